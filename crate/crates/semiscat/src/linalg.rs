//! Regularized least squares via the singular value decomposition.
//!
//! One factorization serves several right-hand sides and several ridge
//! strengths; complex right-hand sides reuse the real factors
//! componentwise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Thin SVD of a design matrix together with an absolute ridge term.
#[derive(Debug, Clone)]
pub struct RidgeSvd {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    sigma: DVector<f64>,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Absolute ridge: solutions use sigma / (sigma^2 + alpha).
    pub alpha: f64,
}

impl RidgeSvd {
    /// Factorizes `a` and fixes the ridge at `alpha_scale * sigma_max^2`.
    /// `alpha_scale = 0` gives plain least squares.
    pub fn new(a: &DMatrix<f64>, alpha_scale: f64) -> Self {
        assert!(alpha_scale >= 0.0);
        let svd = a.clone().svd(true, true);
        let sigma = svd.singular_values.clone();
        let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
        let sigma_min = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
        RidgeSvd {
            u: svd.u.expect("svd requested u"),
            v_t: svd.v_t.expect("svd requested v_t"),
            sigma,
            sigma_max,
            sigma_min,
            alpha: alpha_scale * sigma_max * sigma_max,
        }
    }

    pub fn condition(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    /// Minimizer of |a x - b|^2 + alpha |x|^2.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let utb = self.u.transpose() * b;
        let mut scaled = utb;
        for i in 0..self.sigma.len() {
            let s = self.sigma[i];
            let f = if s == 0.0 && self.alpha == 0.0 {
                0.0
            } else {
                s / (s * s + self.alpha)
            };
            scaled[i] *= f;
        }
        self.v_t.transpose() * scaled
    }

    /// Same solve with a complex right-hand side (the matrix is real,
    /// so real and imaginary parts decouple).
    pub fn solve_complex(&self, b: &[Complex64]) -> Vec<Complex64> {
        let re = DVector::from_iterator(b.len(), b.iter().map(|z| z.re));
        let im = DVector::from_iterator(b.len(), b.iter().map(|z| z.im));
        let xr = self.solve(&re);
        let xi = self.solve(&im);
        xr.iter()
            .zip(xi.iter())
            .map(|(r, i)| Complex64::new(*r, *i))
            .collect()
    }

    /// Diagonal of (A^T A + alpha I)^{-1}, used for standard errors.
    pub fn gram_inverse_diagonal(&self) -> Vec<f64> {
        let k = self.v_t.ncols();
        (0..k)
            .map(|j| {
                (0..self.sigma.len())
                    .map(|i| {
                        let v = self.v_t[(i, j)];
                        let s = self.sigma[i];
                        let d = s * s + self.alpha;
                        if d == 0.0 {
                            0.0
                        } else {
                            v * v / d
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 0.5, 0.2, //
                0.3, 2.0, -0.4, //
                -0.7, 0.1, 1.5, //
                0.2, -0.3, 0.9,
            ],
        )
    }

    #[test]
    fn plain_least_squares_solves_square_systems_exactly() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 1.0, 0.0, 3.0, -1.0, 1.0, 1.0, 4.0]);
        let x_true = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let b = &a * &x_true;
        let x = RidgeSvd::new(&a, 0.0).solve(&b);
        assert!((x - x_true).norm() < 1e-12);
    }

    #[test]
    fn ridge_solution_matches_the_normal_equations() {
        let a = demo_matrix();
        let b = DVector::from_column_slice(&[1.0, -0.5, 2.0, 0.7]);
        let solver = RidgeSvd::new(&a, 1e-3);
        let x = solver.solve(&b);
        let gram = a.transpose() * &a + DMatrix::identity(3, 3) * solver.alpha;
        let rhs = a.transpose() * &b;
        let direct = gram.clone().try_inverse().unwrap() * rhs;
        assert!((x - direct).norm() < 1e-10);
        let diag = solver.gram_inverse_diagonal();
        let inv = gram.try_inverse().unwrap();
        for j in 0..3 {
            assert!((diag[j] - inv[(j, j)]).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_rhs_decouples_into_parts() {
        let a = demo_matrix();
        let b = vec![
            Complex64::new(1.0, -1.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(-0.3, 0.4),
            Complex64::new(0.9, 0.1),
        ];
        let solver = RidgeSvd::new(&a, 1e-6);
        let x = solver.solve_complex(&b);
        let re = solver.solve(&DVector::from_iterator(4, b.iter().map(|z| z.re)));
        for (j, xj) in x.iter().enumerate() {
            assert!((xj.re - re[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicate_columns_show_up_in_the_conditioning() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let solver = RidgeSvd::new(&a, 0.0);
        assert!(solver.condition() > 1e12);
        // With a ridge the solve stays finite.
        let ridged = RidgeSvd::new(&a, 1e-8);
        let x = ridged.solve(&DVector::from_column_slice(&[1.0, 2.0, -1.0]));
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
