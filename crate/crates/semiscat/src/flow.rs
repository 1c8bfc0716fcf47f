//! Classical Hamiltonian flow of p(x, xi) = |xi|^2 + V(x) and a
//! sampling-based non-trapping certifier at fixed energy.
//!
//! Hamilton's equations are x' = 2 xi, xi' = -grad V(x). Energy
//! |xi|^2 + V(x) is conserved along exact trajectories; the adaptive
//! integrator keeps the numerical drift near its tolerance.

use crate::ode::{self, OdeError, OdeOptions};
use crate::potential::PotentialExpansion;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error("energy {energy} does not exceed V = {potential} at the sample point")]
    EnergyBelowPotential { energy: f64, potential: f64 },
}

/// A point (x, xi) of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: [f64; 3],
    pub xi: [f64; 3],
}

impl PhasePoint {
    pub fn energy(&self, v: &PotentialExpansion) -> f64 {
        self.xi.iter().map(|c| c * c).sum::<f64>() + v.eval(self.x)
    }

    fn to_state(self) -> [f64; 6] {
        [self.x[0], self.x[1], self.x[2], self.xi[0], self.xi[1], self.xi[2]]
    }

    fn from_state(y: &[f64]) -> PhasePoint {
        PhasePoint { x: [y[0], y[1], y[2]], xi: [y[3], y[4], y[5]] }
    }
}

/// Result of following one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: PhasePoint,
    pub end: PhasePoint,
    pub time: f64,
    /// max |E(t) - E(0)| over observed steps.
    pub energy_drift: f64,
    pub steps: usize,
}

fn vector_field(v: &PotentialExpansion) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_t, y, dy| {
        dy[0] = 2.0 * y[3];
        dy[1] = 2.0 * y[4];
        dy[2] = 2.0 * y[5];
        let g = v.grad([y[0], y[1], y[2]]);
        dy[3] = -g[0];
        dy[4] = -g[1];
        dy[5] = -g[2];
    }
}

/// Integrates the flow from `start` for signed time `t` (negative
/// runs backwards), tracking the worst energy drift seen at accepted
/// steps.
pub fn follow(
    v: &PotentialExpansion,
    start: PhasePoint,
    t: f64,
    opts: &OdeOptions,
) -> Result<Trajectory, FlowError> {
    let e0 = start.energy(v);
    let mut drift = 0.0_f64;
    let mut observe = |_t: f64, y: &[f64]| {
        let e = PhasePoint::from_state(y).energy(v);
        drift = drift.max((e - e0).abs());
    };
    let mut y = start.to_state().to_vec();
    let mut field = vector_field(v);
    let stats = ode::integrate(&mut field, 0.0, t, &mut y, opts, Some(&mut observe))?;
    Ok(Trajectory {
        start,
        end: PhasePoint::from_state(&y),
        time: t,
        energy_drift: drift,
        steps: stats.steps,
    })
}

/// Integrates until the escape test holds or `t_max` elapses.
/// Escape means |x| > radius with x . xi > 0 (moving outward), which
/// for these decaying potentials is irreversible once the radius is
/// large enough.
fn escapes(
    v: &PotentialExpansion,
    start: PhasePoint,
    t_max: f64,
    radius: f64,
    backward: bool,
    opts: &OdeOptions,
) -> Result<(bool, f64), FlowError> {
    let sign = if backward { -1.0 } else { 1.0 };
    let mut escaped_at: Option<f64> = None;
    let mut observe = |t: f64, y: &[f64]| {
        if escaped_at.is_some() {
            return;
        }
        let p = PhasePoint::from_state(y);
        let r2: f64 = p.x.iter().map(|c| c * c).sum();
        // Outward along the direction of travel: backward escape
        // means the reversed motion heads out, i.e. x . xi < 0.
        let radial = p.x[0] * p.xi[0] + p.x[1] * p.xi[1] + p.x[2] * p.xi[2];
        if r2 > radius * radius && sign * radial > 0.0 {
            escaped_at = Some(t.abs());
        }
    };
    let mut y = start.to_state().to_vec();
    let mut field = vector_field(v);
    let result = ode::integrate(
        &mut field,
        0.0,
        sign * t_max,
        &mut y,
        opts,
        Some(&mut observe),
    );
    match result {
        Ok(_) => {}
        // Hitting the step budget without escaping counts as a
        // failure to certify, not a hard error.
        Err(OdeError::StepBudget { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    match escaped_at {
        Some(t) => Ok((true, t)),
        None => Ok((false, t_max)),
    }
}

/// Settings for the Monte Carlo non-trapping check at one energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifySettings {
    pub energy: f64,
    /// Positions are sampled uniformly from the ball of this radius.
    pub sample_radius: f64,
    pub samples: usize,
    pub seed: u64,
    /// Escape radius for the outward test.
    pub escape_radius: f64,
    /// Time budget per direction before declaring the sample stuck.
    pub t_max: f64,
}

impl Default for CertifySettings {
    fn default() -> Self {
        CertifySettings {
            energy: 1.0,
            sample_radius: 6.0,
            samples: 200,
            seed: 1,
            escape_radius: 40.0,
            t_max: 400.0,
        }
    }
}

/// One failed sample: where it started and which direction stuck.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrappedSample {
    pub point: PhasePoint,
    pub forward_escaped: bool,
    pub backward_escaped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonTrappingReport {
    pub settings: CertifySettings,
    pub certified: bool,
    pub tested: usize,
    /// Samples skipped because V(x) >= energy there (point outside
    /// the classically allowed region).
    pub skipped_forbidden: usize,
    pub max_escape_time: f64,
    pub trapped: Vec<TrappedSample>,
}

/// Samples phase points on the energy shell p = energy and follows
/// each both ways. Certifies non-trapping when every tested sample
/// leaves the escape ball in both time directions.
pub fn certify_nontrapping(
    v: &PotentialExpansion,
    settings: &CertifySettings,
    opts: &OdeOptions,
) -> Result<NonTrappingReport, FlowError> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut tested = 0;
    let mut skipped = 0;
    let mut max_time = 0.0_f64;
    let mut trapped = Vec::new();

    while tested + skipped < settings.samples {
        let x = sample_ball(&mut rng, settings.sample_radius);
        let kinetic = settings.energy - v.eval(x);
        if kinetic <= 0.0 {
            skipped += 1;
            continue;
        }
        let dir = sample_sphere(&mut rng);
        let speed = kinetic.sqrt();
        let point = PhasePoint {
            x,
            xi: [speed * dir[0], speed * dir[1], speed * dir[2]],
        };
        tested += 1;

        let (fwd, t_fwd) = escapes(v, point, settings.t_max, settings.escape_radius, false, opts)?;
        let (bwd, t_bwd) = escapes(v, point, settings.t_max, settings.escape_radius, true, opts)?;
        if fwd && bwd {
            max_time = max_time.max(t_fwd).max(t_bwd);
        } else {
            trapped.push(TrappedSample {
                point,
                forward_escaped: fwd,
                backward_escaped: bwd,
            });
        }
    }

    Ok(NonTrappingReport {
        settings: settings.clone(),
        certified: trapped.is_empty(),
        tested,
        skipped_forbidden: skipped,
        max_escape_time: max_time,
        trapped,
    })
}

fn sample_ball(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    loop {
        let x = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let r2: f64 = x.iter().map(|c| c * c).sum();
        if r2 <= 1.0 {
            return [radius * x[0], radius * x[1], radius * x[2]];
        }
    }
}

fn sample_sphere(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let x = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let r2: f64 = x.iter().map(|c| c * c).sum();
        if r2 > 1e-12 && r2 <= 1.0 {
            let r = r2.sqrt();
            return [x[0] / r, x[1] / r, x[2] / r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{AngularProfile, HomogeneousTerm};
    use approx::assert_relative_eq;

    fn repulsive() -> PotentialExpansion {
        PotentialExpansion::new(
            vec![HomogeneousTerm {
                rho: 2.0,
                angular: AngularProfile::Isotropic { value: 1.0 },
            }],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn free_motion_is_exact() {
        // Start far from the core of a nearly-zero potential
        // moving away: V = 0 along the whole path, so x(t) = x + 2 xi t.
        let v = PotentialExpansion::new(
            vec![HomogeneousTerm {
                rho: 6.0,
                angular: AngularProfile::Isotropic { value: 1e-12 },
            }],
            0.5,
        )
        .unwrap();
        let start = PhasePoint { x: [50.0, 0.0, 0.0], xi: [1.0, 0.5, 0.0] };
        let traj = follow(&v, start, 3.0, &OdeOptions::default()).unwrap();
        assert_relative_eq!(traj.end.x[0], 50.0 + 6.0, max_relative = 1e-9);
        assert_relative_eq!(traj.end.x[1], 3.0, max_relative = 1e-9);
        assert_relative_eq!(traj.end.xi[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn energy_drift_stays_small_through_a_close_pass() {
        let v = repulsive();
        // Enough energy to clear the barrier at impact parameter 1.
        let start = PhasePoint { x: [-8.0, 1.0, 0.0], xi: [1.2, 0.0, 0.0] };
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..OdeOptions::default() };
        let traj = follow(&v, start, 20.0, &opts).unwrap();
        assert!(traj.energy_drift < 1e-9, "drift = {}", traj.energy_drift);
        // The particle has passed the core and is receding.
        assert!(traj.end.x[0] > 0.0);
        let r_end: f64 = traj.end.x.iter().map(|c| c * c).sum::<f64>();
        assert!(r_end.sqrt() > 8.0);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let v = repulsive();
        let start = PhasePoint { x: [-6.0, 1.0, 0.5], xi: [0.9, 0.1, -0.2] };
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..OdeOptions::default() };
        let fwd = follow(&v, start, 8.0, &opts).unwrap();
        let back = follow(&v, fwd.end, -8.0, &opts).unwrap();
        for i in 0..3 {
            assert_relative_eq!(back.end.x[i], start.x[i], epsilon = 1e-7);
            assert_relative_eq!(back.end.xi[i], start.xi[i], epsilon = 1e-7);
        }
    }

    #[test]
    fn repulsive_potential_certifies_quickly() {
        let v = repulsive();
        let settings = CertifySettings {
            energy: 1.0,
            sample_radius: 4.0,
            samples: 20,
            seed: 7,
            escape_radius: 20.0,
            t_max: 200.0,
        };
        let report = certify_nontrapping(&v, &settings, &OdeOptions::default()).unwrap();
        assert!(report.certified);
        assert!(report.tested > 0);
        assert!(report.trapped.is_empty());
    }

    #[test]
    fn circular_orbit_is_reported_as_trapped() {
        // An attractive -1/r^2 layer admits circular orbits at any
        // radius with |xi|^2 = 1/r^2, i.e. energy 0 ... but the shell
        // test wants positive energy, so instead check `escapes`
        // directly on the exact circular initial condition.
        let v = PotentialExpansion::new(
            vec![HomogeneousTerm {
                rho: 2.0,
                angular: AngularProfile::Isotropic { value: -1.0 },
            }],
            0.5,
        )
        .unwrap();
        // For H = |xi|^2 + V: x' = 2 xi. Circular orbit radius r needs
        // centripetal balance: |x''| = 2|xi'| = 2|V'(r)| and
        // |x''| = |v_x|^2 / r with v_x = 2 xi. With V = -r^{-2}:
        // 4|xi|^2 / r = 2 * 2 r^{-3}, so |xi|^2 = r^{-2}.
        let r = 3.0;
        let point = PhasePoint { x: [r, 0.0, 0.0], xi: [0.0, 1.0 / r, 0.0] };
        let opts = OdeOptions::default();
        let (escaped, _) = escapes(&v, point, 50.0, 20.0, false, &opts).unwrap();
        assert!(!escaped);
    }
}
