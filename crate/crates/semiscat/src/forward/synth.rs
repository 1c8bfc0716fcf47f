//! Scattering-sample synthesis.
//!
//! A sampled matrix element is the truncated power sum
//! sum_k h^{nu_k} c_k, where the c_k pair the profile functions
//! against the expansion operators and do not depend on h. One pairing
//! therefore serves an entire h-grid.

use crate::forward::testfn::{ExperimentConfig, ForwardError, TestFunctionSpec};
use crate::potential::PotentialExpansion;
use crate::symbols::{pair_symbols, Pairing, PairingSettings, SymbolPlan};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One matrix element at one value of h.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScatteringSample {
    pub h: f64,
    pub value: Complex64,
}

/// All samples produced for one direction and one source/receiver pair,
/// together with the h-independent pairing data they were built from.
#[derive(Debug, Clone)]
pub struct RaySamples {
    pub omega: [f64; 3],
    pub source: TestFunctionSpec,
    pub receiver: TestFunctionSpec,
    /// Number of expansion orders kept.
    pub truncation: usize,
    /// Exponents nu_k, ascending.
    pub exponents: Vec<f64>,
    /// Pairing coefficients c_k aligned with `exponents`.
    pub coefficients: Vec<Complex64>,
    /// Overlap weight of the two profiles (integral of their product).
    pub mass: f64,
    /// Number of quadrature lines that contributed.
    pub lines: usize,
    pub samples: Vec<ScatteringSample>,
}

impl RaySamples {
    /// Evaluates the truncated power sum at an arbitrary h.
    pub fn value_at(&self, h: f64) -> Complex64 {
        power_sum(&self.exponents, &self.coefficients, h)
    }
}

fn power_sum(exponents: &[f64], coefficients: &[Complex64], h: f64) -> Complex64 {
    exponents
        .iter()
        .zip(coefficients)
        .map(|(nu, c)| c * h.powf(*nu))
        .sum()
}

/// Synthesizes the matrix elements for one ray over an h-grid.
///
/// The plan must have been built for the same delta and lambda as the
/// experiment; both specs must point along the same direction.
pub fn synthesize_f(
    cfg: &ExperimentConfig,
    source: &TestFunctionSpec,
    receiver: &TestFunctionSpec,
    potential: &PotentialExpansion,
    plan: &SymbolPlan,
    h_grid: &[f64],
    settings: &PairingSettings,
) -> Result<RaySamples, ForwardError> {
    cfg.validate()?;
    source.validate()?;
    receiver.validate()?;
    if source.omega != receiver.omega {
        return Err(ForwardError::MismatchedOmega);
    }
    if (plan.delta - cfg.delta).abs() > 1e-12 || (plan.lambda - cfg.lambda).abs() > 1e-12 {
        return Err(ForwardError::PlanMismatch {
            plan_delta: plan.delta,
            plan_lambda: plan.lambda,
        });
    }
    for &h in h_grid {
        if !(h > 0.0 && h <= 1.0) {
            return Err(ForwardError::BadH(h));
        }
    }
    let pairing: Pairing = pair_symbols(
        plan,
        potential,
        source.omega,
        &source.bump(),
        &receiver.bump(),
        settings,
    )?;
    let exponents: Vec<f64> = plan.nodes.iter().map(|n| n.nu).collect();
    let samples = h_grid
        .iter()
        .map(|&h| ScatteringSample {
            h,
            value: power_sum(&exponents, &pairing.coefficients, h),
        })
        .collect();
    Ok(RaySamples {
        omega: source.omega,
        source: source.clone(),
        receiver: receiver.clone(),
        truncation: plan.nodes.len(),
        exponents,
        coefficients: pairing.coefficients,
        mass: pairing.mass,
        lines: pairing.lines,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::testfn::Role;
    use crate::potential::{AngularProfile, HomogeneousTerm, PotentialExpansion};
    use crate::symbols::{build_plan, generate_lattice};

    fn classic_potential(amplitude: f64) -> PotentialExpansion {
        PotentialExpansion {
            terms: vec![HomogeneousTerm {
                rho: 2.0,
                angular: AngularProfile::Isotropic { value: amplitude },
            }],
            core_radius: 0.5,
        }
    }

    fn classic_plan(count: usize) -> SymbolPlan {
        let lattice = generate_lattice(&[2.0], 2.0, 16.0).unwrap();
        build_plan(&lattice, 1.0, &[2.0], count)
    }

    fn spec(center: [f64; 3], role: Role) -> TestFunctionSpec {
        TestFunctionSpec {
            omega: [0.0, 0.0, 1.0],
            center,
            radius: 0.5,
            amplitude: 1.0,
            role,
        }
    }

    fn settings() -> PairingSettings {
        PairingSettings {
            transverse_nodes: 12,
            axial_nodes: 12,
            ..PairingSettings::default()
        }
    }

    #[test]
    fn zero_potential_gives_zero_samples() {
        let cfg = ExperimentConfig::with_defaults(1.0, 2.0);
        let src = spec([2.0, 0.0, 0.0], Role::Source);
        let rcv = spec([2.0, 0.0, 0.0], Role::Receiver);
        let h_grid = [1e-3, 1e-2, 1e-1];
        let out = synthesize_f(
            &cfg,
            &src,
            &rcv,
            &classic_potential(0.0),
            &classic_plan(3),
            &h_grid,
            &settings(),
        )
        .unwrap();
        for s in &out.samples {
            assert_eq!(s.value, Complex64::new(0.0, 0.0));
        }
        assert!(out.mass > 0.0);
    }

    #[test]
    fn disjoint_profiles_pair_to_zero_at_leading_order() {
        let cfg = ExperimentConfig::with_defaults(1.0, 2.0);
        let src = spec([2.0, 0.0, 0.0], Role::Source);
        let rcv = spec([-2.0, 0.0, 0.0], Role::Receiver);
        let out = synthesize_f(
            &cfg,
            &src,
            &rcv,
            &classic_potential(1.0),
            &classic_plan(1),
            &[1e-2],
            &settings(),
        )
        .unwrap();
        assert_eq!(out.samples[0].value, Complex64::new(0.0, 0.0));
        assert_eq!(out.mass, 0.0);
    }

    #[test]
    fn swapping_source_and_receiver_negates_the_conjugate() {
        // The leading operator multiplies by a purely imaginary
        // function when the potential is real, so exchanging the two
        // real profiles sends the value to minus its conjugate.
        let cfg = ExperimentConfig::with_defaults(1.0, 2.0);
        let src = spec([2.0, 0.3, 0.1], Role::Source);
        let rcv = spec([2.2, -0.2, -0.3], Role::Receiver);
        let plan = classic_plan(1);
        let pot = classic_potential(1.0);
        let h_grid = [5e-2];
        let fwd = synthesize_f(&cfg, &src, &rcv, &pot, &plan, &h_grid, &settings()).unwrap();
        let swp = synthesize_f(&cfg, &rcv, &src, &pot, &plan, &h_grid, &settings()).unwrap();
        let v = fwd.samples[0].value;
        let w = swp.samples[0].value;
        assert!((w - (-v.conj())).norm() <= 1e-12 * v.norm());
        assert!(v.norm() > 0.0);
    }

    #[test]
    fn log_log_slope_matches_the_leading_exponent() {
        let cfg = ExperimentConfig::with_defaults(1.0, 2.0);
        let src = spec([2.0, 0.0, 0.0], Role::Source);
        let rcv = spec([2.0, 0.0, 0.0], Role::Receiver);
        let h_grid: Vec<f64> = (0..12)
            .map(|i| 1e-3 * (100.0f64).powf(i as f64 / 11.0))
            .collect();
        let out = synthesize_f(
            &cfg,
            &src,
            &rcv,
            &classic_potential(1.0),
            &classic_plan(3),
            &h_grid,
            &settings(),
        )
        .unwrap();
        let pts: Vec<(f64, f64)> = out
            .samples
            .iter()
            .map(|s| (s.h.ln(), s.value.norm().ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let nu1 = out.exponents[0];
        assert!(
            (slope - nu1).abs() <= 0.01 * nu1.abs(),
            "slope {slope} vs nu_1 {nu1}"
        );
    }

    #[test]
    fn mismatched_directions_are_rejected() {
        let cfg = ExperimentConfig::with_defaults(1.0, 2.0);
        let src = spec([2.0, 0.0, 0.0], Role::Source);
        let mut rcv = spec([2.0, 0.0, 0.0], Role::Receiver);
        rcv.omega = [0.0, 1.0, 0.0];
        rcv.center = [2.0, 0.0, 0.0];
        let err = synthesize_f(
            &cfg,
            &src,
            &rcv,
            &classic_potential(1.0),
            &classic_plan(1),
            &[1e-2],
            &settings(),
        );
        assert!(matches!(err, Err(ForwardError::MismatchedOmega)));
    }
}
