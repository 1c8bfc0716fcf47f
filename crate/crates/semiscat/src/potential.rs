//! Potentials that are finite sums of homogeneous terms
//! V_j(x) = |x|^{-rho_j} g_j(x/|x|) outside a core radius, with a
//! smooth cutoff switching the sum off inside. Orders satisfy
//! 1 < rho_1 < rho_2 < ... so every term is short range.
//!
//! Each term carries an exact `RadialPoly` form (solid harmonics times
//! a radial power), which the transport solver differentiates
//! symbolically; evaluation with the core cutoff stays C-infinity
//! across both matching radii.

use crate::poly::{Poly, RadialPoly};
use crate::smooth::{smooth_step, smooth_step_deriv};
use crate::sphere::{sh_degree_count, sh_eval_all, sh_unindex, solid_harmonic};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("homogeneity order must exceed 1, got rho = {0}")]
    OrderTooSmall(f64),
    #[error("homogeneity orders must be strictly increasing: rho[{0}] = {1} follows {2}")]
    OrdersNotIncreasing(usize, f64, f64),
    #[error("angular coefficient {0} is not finite")]
    NonFiniteCoefficient(usize),
    #[error("harmonic coefficient list has length {got}, expected {expected} for degree {degree}")]
    CoefficientCount { degree: usize, expected: usize, got: usize },
    #[error("core radius must be positive, got {0}")]
    BadCoreRadius(f64),
    #[error("expansion needs at least one term")]
    Empty,
}

/// Angular part g of a homogeneous term, as a function on the unit
/// sphere.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AngularProfile {
    Isotropic { value: f64 },
    /// Real orthonormal harmonics packed by `sphere::sh_index`.
    Harmonics { degree: usize, coeffs: Vec<f64> },
}

impl AngularProfile {
    pub fn validate(&self) -> Result<(), PotentialError> {
        match self {
            AngularProfile::Isotropic { value } => {
                if !value.is_finite() {
                    return Err(PotentialError::NonFiniteCoefficient(0));
                }
            }
            AngularProfile::Harmonics { degree, coeffs } => {
                let expected = sh_degree_count(*degree);
                if coeffs.len() != expected {
                    return Err(PotentialError::CoefficientCount {
                        degree: *degree,
                        expected,
                        got: coeffs.len(),
                    });
                }
                for (i, c) in coeffs.iter().enumerate() {
                    if !c.is_finite() {
                        return Err(PotentialError::NonFiniteCoefficient(i));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluate at a unit vector.
    pub fn eval(&self, u: [f64; 3]) -> f64 {
        match self {
            AngularProfile::Isotropic { value } => *value,
            AngularProfile::Harmonics { degree, coeffs } => {
                let basis = sh_eval_all(*degree, u);
                coeffs.iter().zip(&basis).map(|(c, b)| c * b).sum()
            }
        }
    }

    /// L^2(S^2) norm of the profile.
    pub fn l2_norm(&self) -> f64 {
        match self {
            AngularProfile::Isotropic { value } => {
                value.abs() * (4.0 * std::f64::consts::PI).sqrt()
            }
            AngularProfile::Harmonics { coeffs, .. } => {
                coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
            }
        }
    }
}

/// One homogeneous layer |x|^{-rho} g(x/|x|).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HomogeneousTerm {
    pub rho: f64,
    pub angular: AngularProfile,
}

impl HomogeneousTerm {
    pub fn validate(&self) -> Result<(), PotentialError> {
        if !(self.rho > 1.0) {
            return Err(PotentialError::OrderTooSmall(self.rho));
        }
        self.angular.validate()
    }

    /// The pure power-law tail, without any core cutoff. Valid for
    /// x != 0.
    pub fn eval_tail(&self, x: [f64; 3]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let u = [x[0] / r, x[1] / r, x[2] / r];
        r.powf(-self.rho) * self.angular.eval(u)
    }

    /// Exact symbolic form of the tail: solid harmonics over radial
    /// powers. Differentiable term by term via `RadialPoly::partial`.
    pub fn tail_radial_poly(&self) -> RadialPoly {
        match &self.angular {
            AngularProfile::Isotropic { value } => {
                RadialPoly::new(-self.rho, Poly::constant(*value))
            }
            AngularProfile::Harmonics { coeffs, .. } => {
                let mut rp = RadialPoly::zero();
                for (idx, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let (l, m) = sh_unindex(idx);
                    let solid = solid_harmonic(l, m).scale(c);
                    rp = rp.add(&RadialPoly::new(-(self.rho + l as f64), solid));
                }
                rp
            }
        }
    }
}

/// Finite homogeneous expansion with a smooth core cutoff: the tail
/// sum is multiplied by a C-infinity radial switch that vanishes on
/// [0, r_c/2] and equals 1 on [r_c, inf).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PotentialExpansion {
    pub terms: Vec<HomogeneousTerm>,
    pub core_radius: f64,
}

impl PotentialExpansion {
    pub fn new(terms: Vec<HomogeneousTerm>, core_radius: f64) -> Result<Self, PotentialError> {
        let p = PotentialExpansion { terms, core_radius };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        if self.terms.is_empty() {
            return Err(PotentialError::Empty);
        }
        if !(self.core_radius > 0.0) {
            return Err(PotentialError::BadCoreRadius(self.core_radius));
        }
        let mut prev = 1.0;
        for (j, term) in self.terms.iter().enumerate() {
            term.validate()?;
            if j > 0 && term.rho <= prev {
                return Err(PotentialError::OrdersNotIncreasing(j, term.rho, prev));
            }
            prev = term.rho;
        }
        Ok(())
    }

    pub fn orders(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.rho).collect()
    }

    /// Smooth core switch and its radial derivative.
    fn switch(&self, r: f64) -> f64 {
        smooth_step((r - 0.5 * self.core_radius) / (0.5 * self.core_radius))
    }

    fn switch_deriv(&self, r: f64) -> f64 {
        smooth_step_deriv((r - 0.5 * self.core_radius) / (0.5 * self.core_radius))
            / (0.5 * self.core_radius)
    }

    /// V(x), finite and smooth everywhere.
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r <= 0.5 * self.core_radius {
            return 0.0;
        }
        let tail: f64 = self.terms.iter().map(|t| t.eval_tail(x)).sum();
        self.switch(r) * tail
    }

    /// grad V(x), analytic through both the tail terms and the cutoff.
    pub fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r <= 0.5 * self.core_radius {
            return [0.0; 3];
        }
        let theta = self.switch(r);
        let dtheta = self.switch_deriv(r);
        let mut tail = 0.0;
        let mut grad_tail = [0.0; 3];
        for term in &self.terms {
            let rp = term.tail_radial_poly();
            tail += rp.eval(x);
            for i in 0..3 {
                grad_tail[i] += rp.partial(i).eval(x);
            }
        }
        let mut g = [0.0; 3];
        for i in 0..3 {
            g[i] = theta * grad_tail[i] + dtheta * (x[i] / r) * tail;
        }
        g
    }

    /// Keeps the first `count` layers.
    pub fn truncate(&self, count: usize) -> PotentialExpansion {
        PotentialExpansion {
            terms: self.terms.iter().take(count).cloned().collect(),
            core_radius: self.core_radius,
        }
    }
}
