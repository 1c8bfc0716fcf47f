//! Real orthonormal spherical harmonics on S^2 and deterministic
//! quadrature grids (Gauss-Legendre product rule and Fibonacci
//! spiral). Harmonics are available both as numerically stable
//! Cartesian recurrences and as exact solid-harmonic polynomials; the
//! polynomial form feeds the derivative algebra for homogeneous
//! potential terms.
//!
//! Packing convention: index(l, m) = l^2 + l + m, so a full basis up
//! to degree L has (L + 1)^2 entries. Normalization is unit L^2 norm
//! on the sphere, no Condon-Shortley phase.

use crate::poly::Poly;
use serde::{Deserialize, Serialize};

pub fn sh_index(l: usize, m: i32) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    (l * l) as usize + (m + l as i32) as usize
}

pub fn sh_degree_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Inverse of `sh_index`.
pub fn sh_unindex(idx: usize) -> (usize, i32) {
    let l = (idx as f64).sqrt() as usize;
    let m = idx as i32 - (l * l + l) as i32;
    (l, m)
}

/// Evaluates the real orthonormal Y_{l,m} at a unit vector.
pub fn sh_eval(l: usize, m: i32, u: [f64; 3]) -> f64 {
    let ma = m.unsigned_abs() as usize;
    let q = legendre_scaled(l, ma, u[2]);
    let norm = sh_norm(l, ma);
    if m == 0 {
        return norm * q;
    }
    // (u_x + i u_y)^|m| via the rotation recurrence; carries the
    // sin^|m|(theta) factor that pairs with the scaled Legendre part.
    let (mut c, mut s) = (1.0, 0.0);
    for _ in 0..ma {
        let cn = c * u[0] - s * u[1];
        s = s * u[0] + c * u[1];
        c = cn;
    }
    let azimuth = if m > 0 { c } else { s };
    std::f64::consts::SQRT_2 * norm * q * azimuth
}

/// Evaluates the whole basis through degree `l_max`, packed by `sh_index`.
pub fn sh_eval_all(l_max: usize, u: [f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; sh_degree_count(l_max)];
    for l in 0..=l_max {
        for m in -(l as i32)..=(l as i32) {
            out[sh_index(l, m)] = sh_eval(l, m, u);
        }
    }
    out
}

fn sh_norm(l: usize, ma: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (l - ma + 1)..=(l + ma) {
        ratio /= k as f64;
    }
    ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * ratio).sqrt()
}

/// Q_l^m(t) = P_l^m(t) / (1 - t^2)^{m/2}: the polynomial part of the
/// associated Legendre function, no Condon-Shortley phase.
fn legendre_scaled(l: usize, m: usize, t: f64) -> f64 {
    debug_assert!(m <= l);
    // Q_m^m = (2m - 1)!!
    let mut qmm = 1.0;
    for k in 1..=m {
        qmm *= (2 * k - 1) as f64;
    }
    if l == m {
        return qmm;
    }
    let mut q0 = qmm;
    let mut q1 = t * (2 * m + 1) as f64 * qmm;
    if l == m + 1 {
        return q1;
    }
    for ll in (m + 2)..=l {
        let a = (2 * ll - 1) as f64;
        let b = (ll + m - 1) as f64;
        let c = (ll - m) as f64;
        let q2 = (a * t * q1 - b * q0) / c;
        q0 = q1;
        q1 = q2;
    }
    q1
}

/// |x|^l Y_{l,m}(x/|x|) as an exact polynomial in (x, y, z).
pub fn solid_harmonic(l: usize, m: i32) -> Poly {
    let ma = m.unsigned_abs() as usize;
    // Coefficients of Q_l^m in powers of t, built by the same recurrence.
    let mut qmm = vec![0.0; 1];
    qmm[0] = 1.0;
    for k in 1..=ma {
        qmm[0] *= (2 * k - 1) as f64;
    }
    let coeffs = if l == ma {
        qmm
    } else {
        let mut q0 = qmm;
        let mut q1 = shift_times_t(&q0, (2 * ma + 1) as f64);
        if l == ma + 1 {
            q1
        } else {
            for ll in (ma + 2)..=l {
                let a = (2 * ll - 1) as f64;
                let b = (ll + ma - 1) as f64;
                let c = (ll - ma) as f64;
                let mut q2 = shift_times_t(&q1, a);
                for (j, v) in q0.iter().enumerate() {
                    q2[j] -= b * v;
                }
                for v in q2.iter_mut() {
                    *v /= c;
                }
                q0 = q1;
                q1 = q2;
            }
            q1
        }
    };

    // r^{l - ma} Q(z / r) = sum_k q_k z^k (r^2)^{(l - ma - k)/2}; the
    // parity of Q makes every exponent a nonnegative even integer.
    let r2 = Poly::monomial([2, 0, 0], 1.0)
        .add(&Poly::monomial([0, 2, 0], 1.0))
        .add(&Poly::monomial([0, 0, 2], 1.0));
    let mut radial = Poly::zero();
    for (k, &qk) in coeffs.iter().enumerate() {
        if qk == 0.0 {
            continue;
        }
        debug_assert!((l - ma - k) % 2 == 0);
        let mut term = Poly::monomial([0, 0, k as u8], qk);
        for _ in 0..((l - ma - k) / 2) {
            term = term.mul(&r2);
        }
        radial = radial.add(&term);
    }

    let norm = sh_norm(l, ma);
    if m == 0 {
        return radial.scale(norm);
    }
    let azimuth = complex_power_part(ma, m > 0);
    radial.mul(&azimuth).scale(std::f64::consts::SQRT_2 * norm)
}

/// Re or Im of (x + i y)^m as a polynomial.
fn complex_power_part(m: usize, real_part: bool) -> Poly {
    let mut re = Poly::constant(1.0);
    let mut im = Poly::zero();
    let x = Poly::var(0);
    let y = Poly::var(1);
    for _ in 0..m {
        let new_re = re.mul(&x).add(&im.mul(&y).scale(-1.0));
        let new_im = im.mul(&x).add(&re.mul(&y));
        re = new_re;
        im = new_im;
    }
    if real_part {
        re
    } else {
        im
    }
}

fn shift_times_t(q: &[f64], factor: f64) -> Vec<f64> {
    let mut out = vec![0.0; q.len() + 1];
    for (j, &v) in q.iter().enumerate() {
        out[j + 1] = factor * v;
    }
    out
}

/// Deterministic quadrature grids on S^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SphereGrid {
    /// Gauss-Legendre in cos(theta) times uniform azimuth; integrates
    /// spherical polynomials up to degree 2 n_theta - 1 exactly.
    GaussProduct { n_theta: usize },
    /// Equal-weight spiral; quasi-uniform, not exact.
    Fibonacci { n: usize },
}

impl SphereGrid {
    pub fn nodes(&self) -> Vec<([f64; 3], f64)> {
        match *self {
            SphereGrid::GaussProduct { n_theta } => {
                let (ct, wt) = crate::quad::gauss_legendre(n_theta);
                let n_phi = 2 * n_theta;
                let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
                let mut out = Vec::with_capacity(n_theta * n_phi);
                for (z, wz) in ct.iter().zip(&wt) {
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    for j in 0..n_phi {
                        let phi = dphi * (j as f64 + 0.5);
                        out.push(([s * phi.cos(), s * phi.sin(), *z], wz * dphi));
                    }
                }
                out
            }
            SphereGrid::Fibonacci { n } => {
                let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
                let w = 4.0 * std::f64::consts::PI / n as f64;
                (0..n)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                        let s = (1.0 - z * z).max(0.0).sqrt();
                        let phi = 2.0 * std::f64::consts::PI * i as f64 / golden;
                        ([s * phi.cos(), s * phi.sin(), z], w)
                    })
                    .collect()
            }
        }
    }

    /// Directions only, for ray-set generation.
    pub fn directions(&self) -> Vec<[f64; 3]> {
        self.nodes().into_iter().map(|(u, _)| u).collect()
    }
}

/// Projects f onto the harmonic basis through degree `l_max`.
pub fn project(f: impl Fn([f64; 3]) -> f64, l_max: usize, grid: &SphereGrid) -> Vec<f64> {
    let mut coeffs = vec![0.0; sh_degree_count(l_max)];
    for (u, w) in grid.nodes() {
        let fu = f(u);
        let basis = sh_eval_all(l_max, u);
        for (c, b) in coeffs.iter_mut().zip(&basis) {
            *c += w * fu * b;
        }
    }
    coeffs
}

/// Relative L^2(S^2) distance between two functions on the sphere.
pub fn relative_l2_error(
    f: impl Fn([f64; 3]) -> f64,
    g: impl Fn([f64; 3]) -> f64,
    grid: &SphereGrid,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, w) in grid.nodes() {
        let d = f(u) - g(u);
        num += w * d * d;
        den += w * g(u) * g(u);
    }
    (num / den).sqrt()
}
