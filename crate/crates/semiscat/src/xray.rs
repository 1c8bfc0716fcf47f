//! Line integrals of homogeneous potentials along rays that avoid the
//! core, and the discretized operator taking angular coefficients to
//! full-line samples.
//!
//! For a single term |x|^{-rho} g(x/|x|) and a line y + t*omega with
//! y orthogonal to omega, substituting t = |y| s reduces the full-line
//! integral to
//!
//!   |y|^{1-rho} * Integral (1+s^2)^{-rho/2} g((yhat + s*omega)/sqrt(1+s^2)) ds,
//!
//! a smooth integrand with an |s|^{-rho} tail that the half-line
//! quadrature handles without truncation.

use crate::potential::PotentialExpansion;
use crate::quad;
use crate::sphere::{sh_degree_count, sh_eval_all, SphereGrid};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum XRayError {
    #[error("direction must be a unit vector: | |omega| - 1 | = {0:.3e}")]
    NotUnit(f64),
    #[error("offset must be orthogonal to the direction: |y . omega| = {0:.3e}")]
    NotOrthogonal(f64),
    #[error("offset must satisfy |y| >= 1, got |y| = {0}")]
    OffsetTooClose(f64),
    #[error("half-line passes within {dist} of the origin, inside the core radius {core}")]
    HalfLineTooClose { dist: f64, core: f64 },
    #[error("only dimension 3 is supported, got {0}")]
    UnsupportedDimension(usize),
    #[error("quadrature stalled while computing {0}")]
    QuadratureStalled(&'static str),
}

/// A full line {y + t*omega}, stored by its unit direction and the
/// foot-of-perpendicular offset. Lines are kept at |y| >= 1 so they
/// never meet the potential core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    omega: [f64; 3],
    y: [f64; 3],
}

impl Ray {
    /// Strict constructor: omega unit, y orthogonal, |y| >= 1.
    pub fn new(omega: [f64; 3], y: [f64; 3]) -> Result<Ray, XRayError> {
        let norm = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(XRayError::NotUnit((norm - 1.0).abs()));
        }
        let dot = y[0] * omega[0] + y[1] * omega[1] + y[2] * omega[2];
        if dot.abs() > UNIT_TOL {
            return Err(XRayError::NotOrthogonal(dot.abs()));
        }
        let ynorm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if ynorm < 1.0 {
            return Err(XRayError::OffsetTooClose(ynorm));
        }
        Ok(Ray { omega, y })
    }

    /// Forgiving constructor: normalizes the direction and projects
    /// the offset onto its orthogonal plane before validating.
    pub fn orthogonalized(omega: [f64; 3], y: [f64; 3]) -> Result<Ray, XRayError> {
        let norm = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
        if norm < UNIT_TOL {
            return Err(XRayError::NotUnit(1.0));
        }
        let w = [omega[0] / norm, omega[1] / norm, omega[2] / norm];
        let dot = y[0] * w[0] + y[1] * w[1] + y[2] * w[2];
        let proj = [y[0] - dot * w[0], y[1] - dot * w[1], y[2] - dot * w[2]];
        Ray::new(w, proj)
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    pub fn offset(&self) -> [f64; 3] {
        self.y
    }

    pub fn offset_norm(&self) -> f64 {
        (self.y[0] * self.y[0] + self.y[1] * self.y[1] + self.y[2] * self.y[2]).sqrt()
    }

    pub fn point_at(&self, t: f64) -> [f64; 3] {
        [
            self.y[0] + t * self.omega[0],
            self.y[1] + t * self.omega[1],
            self.y[2] + t * self.omega[2],
        ]
    }
}

/// Closest approach of the half-line {x + t*omega : t >= 0} to the
/// origin (omega unit).
pub fn half_line_distance(x: [f64; 3], omega: [f64; 3]) -> f64 {
    let b = x[0] * omega[0] + x[1] * omega[1] + x[2] * omega[2];
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    if b >= 0.0 {
        r2.sqrt()
    } else {
        (r2 - b * b).max(0.0).sqrt()
    }
}

/// Reduced full-line integral of a degree-rho term with angular part g
/// along `ray`, to absolute tolerance `tol`.
fn reduced_full_line(
    rho: f64,
    g: impl Fn([f64; 3]) -> f64,
    ray: &Ray,
    tol: f64,
) -> quad::QuadResult<f64> {
    let d = ray.offset_norm();
    let yhat = [ray.y[0] / d, ray.y[1] / d, ray.y[2] / d];
    let w = ray.omega;
    let integrand = |s: f64| {
        let scale = (1.0 + s * s).sqrt();
        let u = [
            (yhat[0] + s * w[0]) / scale,
            (yhat[1] + s * w[1]) / scale,
            (yhat[2] + s * w[2]) / scale,
        ];
        scale.powf(-rho) * g(u)
    };
    let upper = quad::integrate_half_line_decay(integrand, 0.0, 0.5 * tol, rho);
    let lower = quad::integrate_half_line_decay(|s| integrand(-s), 0.0, 0.5 * tol, rho);
    quad::QuadResult {
        value: d.powf(1.0 - rho) * (upper.value + lower.value),
        error: d.powf(1.0 - rho) * (upper.error + lower.error),
        converged: upper.converged && lower.converged,
    }
}

/// Integral of V over the full line described by `ray`, summing the
/// per-term reductions. The line keeps |y| >= 1 from the origin, so
/// the core cutoff never enters.
pub fn xray_full_line(p: &PotentialExpansion, ray: &Ray, tol: f64) -> Result<f64, XRayError> {
    let per_term = tol / p.terms.len() as f64;
    let mut total = 0.0;
    for term in &p.terms {
        let r = reduced_full_line(term.rho, |u| term.angular.eval(u), ray, per_term);
        if !r.converged {
            return Err(XRayError::QuadratureStalled("full-line reduction"));
        }
        total += r.value;
    }
    Ok(total)
}

/// Integral of V over {x + t*omega : t >= 0}. The half-line must keep
/// distance >= core radius from the origin, which makes the core
/// cutoff identically 1 along the path.
pub fn xray_half_line(
    p: &PotentialExpansion,
    x: [f64; 3],
    omega: [f64; 3],
    tol: f64,
) -> Result<f64, XRayError> {
    let norm = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(XRayError::NotUnit((norm - 1.0).abs()));
    }
    let dist = half_line_distance(x, omega);
    if dist < p.core_radius {
        return Err(XRayError::HalfLineTooClose { dist, core: p.core_radius });
    }
    // The slowest-decaying term sets the tail exponent.
    let result = quad::integrate_half_line_decay(
        |t: f64| {
            let pt = [x[0] + t * omega[0], x[1] + t * omega[1], x[2] + t * omega[2]];
            p.terms.iter().map(|term| term.eval_tail(pt)).sum::<f64>()
        },
        0.0,
        tol,
        p.terms[0].rho,
    );
    if !result.converged {
        return Err(XRayError::QuadratureStalled("half-line integral"));
    }
    Ok(result.value)
}

/// Conditioning summary of an assembled operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conditioning {
    pub rows: usize,
    pub cols: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub condition: f64,
}

/// Dense discretization of the map from angular harmonic coefficients
/// of a degree-rho term to its full-line X-ray samples over a ray set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XRayOperatorMatrix {
    pub rho: f64,
    pub rays: Vec<Ray>,
    /// Sphere quadrature used downstream to measure angular errors.
    pub grid: SphereGrid,
    pub matrix: DMatrix<f64>,
    pub conditioning: Conditioning,
}

const ENTRY_TOL: f64 = 1e-10;

/// Builds the ray-sampling matrix for harmonics through degree `l_max`.
/// Entry (r, m) is the full-line X-ray of |x|^{-rho} Y_m(x/|x|) along
/// ray r, via the reduced integral.
pub fn assemble_xray_operator(
    rho: f64,
    rays: &[Ray],
    l_max: usize,
    dimension: usize,
) -> Result<XRayOperatorMatrix, XRayError> {
    if dimension != 3 {
        return Err(XRayError::UnsupportedDimension(dimension));
    }
    let cols = sh_degree_count(l_max);
    let rows: Result<Vec<Vec<f64>>, XRayError> = rays
        .par_iter()
        .map(|ray| {
            let mut row = vec![0.0; cols];
            for (m, value) in row.iter_mut().enumerate() {
                let r = reduced_full_line(
                    rho,
                    |u| sh_eval_all(l_max, u)[m],
                    ray,
                    ENTRY_TOL,
                );
                if !r.converged {
                    return Err(XRayError::QuadratureStalled("operator entry"));
                }
                *value = r.value;
            }
            Ok(row)
        })
        .collect();
    let rows = rows?;
    let matrix = DMatrix::from_fn(rays.len(), cols, |i, j| rows[i][j]);
    let svd = matrix.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let sigma_min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let conditioning = Conditioning {
        rows: rays.len(),
        cols,
        sigma_max,
        sigma_min,
        condition: sigma_max / sigma_min,
    };
    Ok(XRayOperatorMatrix {
        rho,
        rays: rays.to_vec(),
        grid: SphereGrid::GaussProduct { n_theta: (2 * (l_max + 1)).max(8) },
        matrix,
        conditioning,
    })
}

impl XRayOperatorMatrix {
    pub fn l_max(&self) -> usize {
        (self.matrix.ncols() as f64).sqrt().round() as usize - 1
    }

    /// Predicted X-ray samples for an angular coefficient vector.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.matrix.ncols());
        let v = nalgebra::DVector::from_column_slice(coeffs);
        (&self.matrix * v).iter().cloned().collect()
    }
}
