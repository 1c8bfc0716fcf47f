//! Layer stripping.
//!
//! Each potential term j owns one lattice node: the entry carrying its
//! bare provenance. The fitted coefficient there splits into the
//! weighted X-ray average of term j plus contributions computable from
//! the shallower terms alone (the expansion is triangular across
//! layers). Subtracting the predicted shallow part and scaling by
//! 2 i sqrt(lambda) leaves overlap-weighted line integrals of term j,
//! which a regularized least squares inverts for its angular
//! coefficients.
//!
//! The design matrix uses the same overlap weighting as the data: row
//! entries are integral of Phi Psi against the line transform of each
//! harmonic, collapsed to the transverse plane (line transforms are
//! constant along the direction). This matched weighting avoids the
//! bump-width bias a point-sampled matrix would introduce.

use crate::forward::{ForwardError, ScatteringSample, TestFunctionSpec};
use crate::inversion::fit::{fit_powers, CoefficientFit, FitError, FitMethod};
use crate::linalg::RidgeSvd;
use crate::potential::{AngularProfile, HomogeneousTerm, PotentialExpansion};
use crate::quad::{gauss_legendre, gauss_legendre_on};
use crate::sphere::{relative_l2_error, sh_degree_count, sh_eval_all, SphereGrid};
use crate::symbols::{
    build_plan, generate_lattice, orthonormal_frame, pair_symbols, ExponentLattice,
    LatticeError, PairingSettings, SymbolPlan,
};
use crate::xray::Conditioning;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("dataset contains no rays")]
    EmptyDataset,
    #[error("rays carry differing h grids; sample {index} disagrees")]
    MismatchedGrids { index: usize },
    #[error("layer {layer} has no bare lattice entry below the cutoff")]
    LayerNotInLattice { layer: usize },
    #[error(
        "layer {layer} sits at lattice node {node}, beyond the fitted truncation {truncation}"
    )]
    LayerOutsideTruncation {
        layer: usize,
        node: usize,
        truncation: usize,
    },
    #[error("{rays} usable rays cannot determine {unknowns} angular coefficients")]
    UnderDetermined { rays: usize, unknowns: usize },
    #[error("delta must exceed 1/(rho_1 - 1) = {bound} (got {delta})")]
    BadDelta { delta: f64, bound: f64 },
    #[error("potential degrees must be strictly ascending and exceed 1")]
    BadDegrees,
    #[error("lambda must be positive (got {0})")]
    BadLambda(f64),
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Symbol(#[from] crate::symbols::SymbolError),
}

/// Inversion input for one ray: the pair of profiles and the sampled
/// matrix elements over the h grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayData {
    pub omega: [f64; 3],
    pub source: TestFunctionSpec,
    pub receiver: TestFunctionSpec,
    pub samples: Vec<ScatteringSample>,
}

impl From<&crate::forward::RaySamples> for RayData {
    fn from(r: &crate::forward::RaySamples) -> Self {
        RayData {
            omega: r.omega,
            source: r.source.clone(),
            receiver: r.receiver.clone(),
            samples: r.samples.clone(),
        }
    }
}

/// Knobs of the inverse pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionConfig {
    pub lambda: f64,
    pub delta: f64,
    /// Known decay degrees rho_j, strictly ascending.
    pub rhos: Vec<f64>,
    pub core_radius: f64,
    /// Angular resolution of the recovered profiles.
    pub l_max: usize,
    /// Number of lattice nodes fitted; 0 means just enough to reach
    /// the deepest layer's bare node.
    pub truncation: usize,
    pub method: FitMethod,
    /// Ridge strength (relative to sigma_max^2) for the angular solve.
    pub ridge_scale: f64,
    /// Quadrature used when predicting shallow-layer contributions.
    pub pairing: PairingSettings,
    /// Transverse nodes per axis for the matched design rows.
    pub transverse_nodes: usize,
    /// Nodes along the overlap chord.
    pub chord_nodes: usize,
    /// Nodes of the line-transform rule: central (sinh-mapped) leg and
    /// each compactified tail.
    pub xray_core_nodes: usize,
    pub xray_tail_nodes: usize,
}

impl InversionConfig {
    pub fn new(lambda: f64, delta: f64, rhos: Vec<f64>) -> Self {
        InversionConfig {
            lambda,
            delta,
            rhos,
            core_radius: 0.5,
            l_max: 4,
            truncation: 0,
            method: FitMethod::Joint,
            ridge_scale: 1e-8,
            pairing: PairingSettings::default(),
            transverse_nodes: 16,
            chord_nodes: 16,
            xray_core_nodes: 48,
            xray_tail_nodes: 32,
        }
    }

    fn validate(&self) -> Result<(), InversionError> {
        if !(self.lambda > 0.0) {
            return Err(InversionError::BadLambda(self.lambda));
        }
        if self.rhos.is_empty()
            || self.rhos.iter().any(|r| *r <= 1.0)
            || self.rhos.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(InversionError::BadDegrees);
        }
        let bound = 1.0 / (self.rhos[0] - 1.0);
        if !(self.delta > bound) {
            return Err(InversionError::BadDelta {
                delta: self.delta,
                bound,
            });
        }
        Ok(())
    }
}

/// Diagnostics of one recovered layer.
#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    /// 1-based layer index.
    pub layer: usize,
    /// Lattice node whose coefficient carried the layer.
    pub node: usize,
    pub nu: f64,
    /// True when other provenances share the node, so the fitted
    /// coefficient mixes this layer with shallow-layer products that
    /// had to be subtracted.
    pub collision: bool,
    pub provenances: usize,
    pub conditioning: Conditioning,
    /// Least-squares misfit of the angular solve.
    pub residual: f64,
    /// Largest imaginary residue left after the subtraction, relative
    /// to the real data scale; ideally near roundoff.
    pub imag_leak: f64,
    pub coefficients: Vec<f64>,
}

/// Outcome of the full pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionResult {
    pub potential: PotentialExpansion,
    pub layers: Vec<LayerReport>,
    /// Per-ray coefficient fits, aligned with the dataset.
    pub fits: Vec<CoefficientFit>,
    /// Relative L2(sphere) error per layer when ground truth is given.
    pub errors: Option<Vec<f64>>,
}

/// Fixed quadrature for line transforms of homogeneous terms: a
/// sinh-stretched central leg plus two 1/z-compactified tails.
struct LineRule {
    core_x: Vec<f64>,
    core_w: Vec<f64>,
    tail_x: Vec<f64>,
    tail_w: Vec<f64>,
}

impl LineRule {
    fn new(core: usize, tail: usize) -> Self {
        let (core_x, core_w) = gauss_legendre(core);
        let (tail_x, tail_w) = gauss_legendre_on(tail, 0.0, 1.0);
        LineRule {
            core_x,
            core_w,
            tail_x,
            tail_w,
        }
    }

    /// Line transforms of |x|^{-rho} Y_m for all m up to l_max, along
    /// the line {y + t omega} with y orthogonal to omega.
    fn transforms(&self, rho: f64, y: [f64; 3], omega: [f64; 3], l_max: usize) -> Vec<f64> {
        let d = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let t_split = 8.0 * d.max(1.0);
        let mut acc = vec![0.0; sh_degree_count(l_max)];
        let mut add = |t: f64, jac: f64| {
            let p = [
                y[0] + t * omega[0],
                y[1] + t * omega[1],
                y[2] + t * omega[2],
            ];
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let u = [p[0] / r, p[1] / r, p[2] / r];
            let radial = r.powf(-rho) * jac;
            for (a, b) in acc.iter_mut().zip(sh_eval_all(l_max, u)) {
                *a += radial * b;
            }
        };
        // Central leg: t = d sinh(v) resolves the peak at the foot of
        // the perpendicular.
        let v_max = (t_split / d).asinh();
        for (x, w) in self.core_x.iter().zip(&self.core_w) {
            let v = v_max * x;
            add(d * v.sinh(), w * v_max * d * v.cosh());
        }
        // Tails: t = +-t_split z^{-e} with e = 1/(rho - 1), so the
        // |x|^{-rho} decay cancels the jacobian exactly and the
        // integrand stays analytic in z for every rho.
        let e = 1.0 / (rho - 1.0);
        for (z, w) in self.tail_x.iter().zip(&self.tail_w) {
            let t = t_split * z.powf(-e);
            let jac = w * e * t_split * z.powf(-e - 1.0);
            add(t, jac);
            add(-t, jac);
        }
        acc
    }
}

/// Overlap chord of the two profile balls along {y + t omega}; empty
/// intersections give a zero-length interval.
fn chord(
    y: [f64; 3],
    omega: [f64; 3],
    specs: [&TestFunctionSpec; 2],
) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for s in specs {
        let rel = [
            s.center[0] - y[0],
            s.center[1] - y[1],
            s.center[2] - y[2],
        ];
        let along = rel[0] * omega[0] + rel[1] * omega[1] + rel[2] * omega[2];
        let perp2 = rel.iter().map(|c| c * c).sum::<f64>() - along * along;
        let s2 = s.radius * s.radius - perp2;
        if s2 <= 0.0 {
            return None;
        }
        lo = lo.max(along - s2.sqrt());
        hi = hi.min(along + s2.sqrt());
    }
    (hi > lo).then_some((lo, hi))
}

/// One matched design row: entry m is the double integral of
/// Phi Psi (y + t omega) against the m-th harmonic's line transform.
fn matched_row(
    ray: &RayData,
    rho: f64,
    l_max: usize,
    cfg: &InversionConfig,
    rule: &LineRule,
) -> Vec<f64> {
    let cols = sh_degree_count(l_max);
    let frame = orthonormal_frame(ray.omega);
    // Transverse footprint intersection in the (u1, u2) frame.
    let mut lo = [f64::NEG_INFINITY; 2];
    let mut hi = [f64::INFINITY; 2];
    for s in [&ray.source, &ray.receiver] {
        let along: f64 = s
            .center
            .iter()
            .zip(&ray.omega)
            .map(|(c, w)| c * w)
            .sum();
        let perp = [
            s.center[0] - along * ray.omega[0],
            s.center[1] - along * ray.omega[1],
            s.center[2] - along * ray.omega[2],
        ];
        let c1 = perp[0] * frame.u1[0] + perp[1] * frame.u1[1] + perp[2] * frame.u1[2];
        let c2 = perp[0] * frame.u2[0] + perp[1] * frame.u2[1] + perp[2] * frame.u2[2];
        lo[0] = lo[0].max(c1 - s.radius);
        hi[0] = hi[0].min(c1 + s.radius);
        lo[1] = lo[1].max(c2 - s.radius);
        hi[1] = hi[1].min(c2 + s.radius);
    }
    if lo[0] >= hi[0] || lo[1] >= hi[1] {
        return vec![0.0; cols];
    }
    let (xa, wa) = gauss_legendre_on(cfg.transverse_nodes, lo[0], hi[0]);
    let (xb, wb) = gauss_legendre_on(cfg.transverse_nodes, lo[1], hi[1]);
    let phi = ray.source.bump();
    let psi = ray.receiver.bump();
    let mut row = vec![0.0; cols];
    for (a, wa) in xa.iter().zip(&wa) {
        for (b, wb) in xb.iter().zip(&wb) {
            let y = [
                a * frame.u1[0] + b * frame.u2[0],
                a * frame.u1[1] + b * frame.u2[1],
                a * frame.u1[2] + b * frame.u2[2],
            ];
            let Some((t0, t1)) = chord(y, ray.omega, [&ray.source, &ray.receiver]) else {
                continue;
            };
            let (xt, wt) = gauss_legendre_on(cfg.chord_nodes, t0, t1);
            let mut overlap = 0.0;
            for (t, w) in xt.iter().zip(&wt) {
                let p = [
                    y[0] + t * ray.omega[0],
                    y[1] + t * ray.omega[1],
                    y[2] + t * ray.omega[2],
                ];
                overlap += w * phi.eval(p) * psi.eval(p);
            }
            if overlap == 0.0 {
                continue;
            }
            let weight = wa * wb * overlap;
            for (r, x) in row
                .iter_mut()
                .zip(rule.transforms(rho, y, ray.omega, l_max))
            {
                *r += weight * x;
            }
        }
    }
    row
}

/// Recovers the angular profile of one layer (1-based) from fitted
/// coefficients, given the shallower layers already in `recovered`.
pub fn recover_layer(
    layer: usize,
    rays: &[RayData],
    fits: &[CoefficientFit],
    recovered: &PotentialExpansion,
    plan: &SymbolPlan,
    lattice: &ExponentLattice,
    cfg: &InversionConfig,
) -> Result<LayerReport, InversionError> {
    assert_eq!(rays.len(), fits.len());
    let node = lattice
        .bare_entry_index(layer - 1)
        .ok_or(InversionError::LayerNotInLattice { layer })?;
    if node >= plan.nodes.len() {
        return Err(InversionError::LayerOutsideTruncation {
            layer,
            node,
            truncation: plan.nodes.len(),
        });
    }
    let unknowns = sh_degree_count(cfg.l_max);
    if rays.len() < unknowns {
        return Err(InversionError::UnderDetermined {
            rays: rays.len(),
            unknowns,
        });
    }
    let entry = &lattice.entries[node];

    // Predicted shallow-layer part of the node coefficient, ray by ray.
    let preds: Result<Vec<Complex64>, InversionError> = rays
        .par_iter()
        .map(|ray| {
            let pairing = pair_symbols(
                plan,
                recovered,
                ray.omega,
                &ray.source.bump(),
                &ray.receiver.bump(),
                &cfg.pairing,
            )?;
            Ok(pairing.coefficients[node])
        })
        .collect();
    let preds = preds?;

    // Overlap-weighted line-transform samples of the layer.
    let two_i_sqrt = Complex64::new(0.0, 2.0 * cfg.lambda.sqrt());
    let mut rhs = DVector::zeros(rays.len());
    let mut imag_leak = 0.0f64;
    let mut real_scale = 0.0f64;
    for (i, (fit, pred)) in fits.iter().zip(&preds).enumerate() {
        let sample = two_i_sqrt * (fit.coefficients[node] - pred);
        rhs[i] = sample.re;
        imag_leak = imag_leak.max(sample.im.abs());
        real_scale = real_scale.max(sample.re.abs());
    }
    let imag_leak = imag_leak / real_scale.max(f64::MIN_POSITIVE);

    let rule = LineRule::new(cfg.xray_core_nodes, cfg.xray_tail_nodes);
    let rho = cfg.rhos[layer - 1];
    let rows: Vec<Vec<f64>> = rays
        .par_iter()
        .map(|ray| matched_row(ray, rho, cfg.l_max, cfg, &rule))
        .collect();
    let matrix = DMatrix::from_fn(rays.len(), unknowns, |i, j| rows[i][j]);

    let solver = RidgeSvd::new(&matrix, cfg.ridge_scale);
    let solution = solver.solve(&rhs);
    let residual = (&matrix * &solution - &rhs).norm();
    Ok(LayerReport {
        layer,
        node,
        nu: entry.nu,
        collision: entry.provenances.len() > 1,
        provenances: entry.provenances.len(),
        conditioning: Conditioning {
            rows: rays.len(),
            cols: unknowns,
            sigma_max: solver.sigma_max,
            sigma_min: solver.sigma_min,
            condition: solver.condition(),
        },
        residual,
        imag_leak,
        coefficients: solution.iter().cloned().collect(),
    })
}

/// Lattice and plan sized so that every layer's bare node is fitted.
pub fn plan_for_inversion(
    cfg: &InversionConfig,
) -> Result<(ExponentLattice, SymbolPlan, usize), InversionError> {
    cfg.validate()?;
    let gammas: Vec<f64> = cfg
        .rhos
        .iter()
        .map(|rho| cfg.delta * (rho - 1.0) - 1.0)
        .collect();
    let mut nu_max = gammas.last().unwrap() + 1.0;
    let (lattice, truncation) = loop {
        let lattice = generate_lattice(&cfg.rhos, cfg.delta, nu_max)?;
        let deepest = lattice
            .bare_entry_index(cfg.rhos.len() - 1)
            .map(|i| i + 1)
            .unwrap_or(usize::MAX);
        let wanted = if cfg.truncation == 0 {
            deepest
        } else {
            cfg.truncation.max(deepest)
        };
        if wanted != usize::MAX && lattice.entries.len() >= wanted {
            break (lattice, wanted);
        }
        nu_max *= 1.6;
    };
    let plan = build_plan(&lattice, cfg.lambda, &cfg.rhos, truncation);
    Ok((lattice, plan, truncation))
}

/// Full pipeline: per-ray coefficient fits, then layer stripping from
/// the shallowest term down.
pub fn reconstruct(
    rays: &[RayData],
    cfg: &InversionConfig,
    truth: Option<&PotentialExpansion>,
) -> Result<ReconstructionResult, InversionError> {
    if rays.is_empty() {
        return Err(InversionError::EmptyDataset);
    }
    let (lattice, plan, _) = plan_for_inversion(cfg)?;
    let exponents: Vec<f64> = plan.nodes.iter().map(|n| n.nu).collect();
    let fits: Result<Vec<CoefficientFit>, FitError> = rays
        .par_iter()
        .map(|ray| fit_powers(&ray.samples, &exponents, cfg.method))
        .collect();
    let fits = fits?;

    let mut recovered = PotentialExpansion {
        terms: cfg
            .rhos
            .iter()
            .map(|&rho| HomogeneousTerm {
                rho,
                angular: AngularProfile::Isotropic { value: 0.0 },
            })
            .collect(),
        core_radius: cfg.core_radius,
    };
    let mut layers = Vec::new();
    for layer in 1..=cfg.rhos.len() {
        let report = recover_layer(layer, rays, &fits, &recovered, &plan, &lattice, cfg)?;
        recovered.terms[layer - 1].angular = AngularProfile::Harmonics {
            degree: cfg.l_max,
            coeffs: report.coefficients.clone(),
        };
        layers.push(report);
    }

    let errors = truth.map(|t| {
        let grid = SphereGrid::GaussProduct {
            n_theta: (2 * (cfg.l_max + 1)).max(12),
        };
        recovered
            .terms
            .iter()
            .zip(&t.terms)
            .map(|(r, g)| relative_l2_error(|u| r.angular.eval(u), |u| g.angular.eval(u), &grid))
            .collect()
    });

    Ok(ReconstructionResult {
        potential: recovered,
        layers,
        fits,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{synthesize_f, ExperimentConfig, Role};
    use crate::xray::{xray_full_line, Ray};
    use approx::assert_relative_eq;

    fn ray_spec(omega: [f64; 3], center: [f64; 3], radius: f64, role: Role) -> TestFunctionSpec {
        TestFunctionSpec {
            omega,
            center,
            radius,
            amplitude: 1.0,
            role,
        }
    }

    #[test]
    fn bare_nodes_and_collisions_are_identified() {
        let cfg = InversionConfig::new(1.0, 2.0, vec![2.0, 3.0]);
        let (lattice, plan, truncation) = plan_for_inversion(&cfg).unwrap();
        assert_eq!(truncation, 3);
        assert_eq!(plan.nodes.len(), 3);
        // Layer 1 leads at nu = 1 with a single provenance.
        let k1 = lattice.bare_entry_index(0).unwrap();
        assert_eq!(k1, 0);
        assert_eq!(lattice.entries[k1].provenances.len(), 1);
        // Layer 2 sits at nu = 3 where the triple product of layer 1
        // also lands: a collision.
        let k2 = lattice.bare_entry_index(1).unwrap();
        assert_eq!(lattice.entries[k2].nu, 3.0);
        assert!(lattice.entries[k2].provenances.len() > 1);
    }

    #[test]
    fn matched_rows_agree_with_a_direct_volume_quadrature() {
        // Oracle: entry m equals the 3-D integral of Phi Psi times the
        // full-line transform of |x|^{-rho} Y_m through each point,
        // evaluated with the independent adaptive quadrature.
        // Nested supports (receiver ball strictly inside the source
        // ball) keep the overlap boundary a single smooth sphere, so
        // both quadratures converge fast enough to compare tightly.
        let omega = [0.0, 0.0, 1.0];
        let spec = ray_spec(omega, [1.8, 0.3, 0.3], 0.5, Role::Source);
        let ray = RayData {
            omega,
            source: spec.clone(),
            receiver: ray_spec(omega, [1.85, 0.35, 0.3], 0.3, Role::Receiver),
            samples: Vec::new(),
        };
        let mut cfg = InversionConfig::new(1.0, 2.0, vec![2.0]);
        cfg.l_max = 1;
        cfg.transverse_nodes = 24;
        cfg.chord_nodes = 24;
        let rule = LineRule::new(cfg.xray_core_nodes, cfg.xray_tail_nodes);
        let rho = 2.0;
        let row = matched_row(&ray, rho, cfg.l_max, &cfg, &rule);

        let phi = ray.source.bump();
        let psi = ray.receiver.bump();
        let pots: Vec<PotentialExpansion> = (0..4)
            .map(|m| {
                let mut coeffs = vec![0.0; 4];
                coeffs[m] = 1.0;
                PotentialExpansion {
                    terms: vec![HomogeneousTerm {
                        rho,
                        angular: AngularProfile::Harmonics { degree: 1, coeffs },
                    }],
                    core_radius: 0.5,
                }
            })
            .collect();
        let mut direct = vec![0.0; 4];
        let n = 24;
        let (xs, wxs) = gauss_legendre_on(n, 1.55, 2.15);
        let (ys, wys) = gauss_legendre_on(n, 0.05, 0.65);
        let (zs, wzs) = gauss_legendre_on(n, 0.0, 0.6);
        for (x, wx) in xs.iter().zip(&wxs) {
            for (y, wy) in ys.iter().zip(&wys) {
                for (z, wz) in zs.iter().zip(&wzs) {
                    let p = [*x, *y, *z];
                    let f = phi.eval(p) * psi.eval(p);
                    if f == 0.0 {
                        continue;
                    }
                    let weight = wx * wy * wz * f;
                    let line = Ray::orthogonalized(omega, p).unwrap();
                    for (acc, pot) in direct.iter_mut().zip(&pots) {
                        *acc += weight * xray_full_line(pot, &line, 1e-9).unwrap();
                    }
                }
            }
        }
        let scale = direct.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        for (m, (got, want)) in row.iter().zip(&direct).enumerate() {
            assert!(
                (got - want).abs() <= 1e-4 * scale,
                "entry {m}: matched row {got} vs volume quadrature {want}"
            );
        }
    }

    #[test]
    fn line_rule_matches_the_adaptive_transform() {
        let rule = LineRule::new(48, 32);
        for (rho, y) in [
            (2.0, [1.3, -0.7, 0.0]),
            (3.0, [0.0, 2.0, 0.0]),
            (2.5, [1.0, 1.0, 0.0]),
        ] {
            let omega = [0.0, 0.0, 1.0];
            let got = rule.transforms(rho, y, omega, 2);
            for (m, g) in got.iter().enumerate() {
                let mut coeffs = vec![0.0; 9];
                coeffs[m] = 1.0;
                let pot = PotentialExpansion {
                    terms: vec![HomogeneousTerm {
                        rho,
                        angular: AngularProfile::Harmonics { degree: 2, coeffs },
                    }],
                    core_radius: 0.5,
                };
                let line = Ray::new(omega, y).unwrap();
                let want = xray_full_line(&pot, &line, 1e-11).unwrap();
                assert!(
                    (g - want).abs() <= 1e-8 + 1e-7 * want.abs(),
                    "rho {rho}, m {m}: {g} vs {want}"
                );
            }
        }
    }

    #[test]
    fn single_layer_roundtrip_recovers_an_isotropic_profile() {
        let amplitude = 0.7;
        let truth = PotentialExpansion {
            terms: vec![HomogeneousTerm {
                rho: 2.0,
                angular: AngularProfile::Isotropic { value: amplitude },
            }],
            core_radius: 0.5,
        };
        let mut cfg = InversionConfig::new(1.0, 2.0, vec![2.0]);
        cfg.l_max = 1;
        cfg.truncation = 2;
        cfg.pairing = PairingSettings {
            transverse_nodes: 10,
            axial_nodes: 10,
            ..PairingSettings::default()
        };
        cfg.transverse_nodes = 12;
        cfg.chord_nodes = 12;

        let exp_cfg = ExperimentConfig::with_defaults(1.0, 2.0);
        let (_, plan, _) = plan_for_inversion(&cfg).unwrap();
        let h_grid: Vec<f64> = (0..12)
            .map(|i| 1e-3 * (100.0f64).powf(i as f64 / 11.0))
            .collect();
        let dirs = [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [
                1.0 / 3.0f64.sqrt(),
                1.0 / 3.0f64.sqrt(),
                1.0 / 3.0f64.sqrt(),
            ],
        ];
        let mut rays = Vec::new();
        for omega in dirs {
            let frame = orthonormal_frame(omega);
            for k in 0..4 {
                let angle = std::f64::consts::PI * (2.0 * k as f64 + 0.37) / 4.0;
                let offset = 1.7 + 0.3 * (k % 2) as f64;
                let center = [
                    offset * (angle.cos() * frame.u1[0] + angle.sin() * frame.u2[0]),
                    offset * (angle.cos() * frame.u1[1] + angle.sin() * frame.u2[1]),
                    offset * (angle.cos() * frame.u1[2] + angle.sin() * frame.u2[2]),
                ];
                let src = ray_spec(omega, center, 0.35, Role::Source);
                let rcv = ray_spec(omega, center, 0.35, Role::Receiver);
                let data = synthesize_f(
                    &exp_cfg,
                    &src,
                    &rcv,
                    &truth,
                    &plan,
                    &h_grid,
                    &cfg.pairing,
                )
                .unwrap();
                rays.push(RayData::from(&data));
            }
        }
        let result = reconstruct(&rays, &cfg, Some(&truth)).unwrap();
        let errs = result.errors.unwrap();
        assert!(
            errs[0] <= 0.02,
            "isotropic layer error {} exceeds 2%",
            errs[0]
        );
        assert!(!result.layers[0].collision);
        assert!(result.layers[0].imag_leak < 1e-6);
    }

    #[test]
    fn zero_data_recovers_a_zero_profile() {
        let mut cfg = InversionConfig::new(1.0, 2.0, vec![2.0]);
        cfg.l_max = 1;
        let omega = [0.0, 0.0, 1.0];
        let h_grid: Vec<f64> = (0..8)
            .map(|i| 1e-3 * (100.0f64).powf(i as f64 / 7.0))
            .collect();
        let mut rays = Vec::new();
        for k in 0..6 {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / 6.0;
            let center = [2.0 * angle.cos(), 2.0 * angle.sin(), 0.1];
            let spec = ray_spec(omega, center, 0.4, Role::Source);
            rays.push(RayData {
                omega,
                source: spec.clone(),
                receiver: spec,
                samples: h_grid
                    .iter()
                    .map(|&h| ScatteringSample {
                        h,
                        value: Complex64::new(0.0, 0.0),
                    })
                    .collect(),
            });
        }
        let result = reconstruct(&rays, &cfg, None).unwrap();
        let norm: f64 = result.layers[0]
            .coefficients
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt();
        assert!(norm < 1e-10, "zero data must give zero profile, got {norm}");
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let cfg = InversionConfig::new(1.0, 2.0, vec![2.0]);
        assert!(matches!(
            reconstruct(&[], &cfg, None),
            Err(InversionError::EmptyDataset)
        ));
    }

    #[test]
    fn chord_detects_disjoint_and_coincident_profiles() {
        let omega = [0.0, 0.0, 1.0];
        let a = ray_spec(omega, [2.0, 0.0, 0.0], 0.3, Role::Source);
        let b = ray_spec(omega, [-2.0, 0.0, 0.0], 0.3, Role::Receiver);
        assert!(chord([2.0, 0.0, 0.0], omega, [&a, &b]).is_none());
        let (t0, t1) = chord([2.0, 0.0, 0.0], omega, [&a, &a]).unwrap();
        assert_relative_eq!(t0, -0.3, epsilon = 1e-12);
        assert_relative_eq!(t1, 0.3, epsilon = 1e-12);
    }
}
