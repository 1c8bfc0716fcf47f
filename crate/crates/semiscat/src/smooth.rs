//! Standard C-infinity building blocks: the exp(-1/t) step, radial
//! cutoffs, plateau energy windows, and the compactly supported bump
//! with exact derivatives to moderate order.
//!
//! Exactness matters in two places. The plateau branches return the
//! literal constants 1.0 and 0.0 so that spectral identities hold to
//! machine precision on grids, and bump derivatives are computed from
//! a symbolic table rather than finite differences so the operator
//! pairings stay at quadrature accuracy.

use crate::poly::Poly;

/// exp(-1/t) for t > 0, else 0. All derivatives vanish at t = 0.
pub fn decay(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Monotone C-infinity step: 0 for t <= 0, 1 for t >= 1.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = decay(t);
        let b = decay(1.0 - t);
        a / (a + b)
    }
}

/// Derivative of `smooth_step`.
pub fn smooth_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = decay(t);
    let b = decay(1.0 - t);
    // a' = a / t^2, b' = -b / (1 - t)^2
    let da = a / (t * t);
    let db = -b / ((1.0 - t) * (1.0 - t));
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

/// Radial frequency cutoff: identically 1 for |xi| <= inner, 0 for
/// |xi| >= outer, smooth and monotone in between.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RadialCutoff {
    pub inner: f64,
    pub outer: f64,
}

impl RadialCutoff {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(inner > 0.0 && outer > inner, "cutoff radii must satisfy 0 < inner < outer");
        RadialCutoff { inner, outer }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= self.outer {
            0.0
        } else {
            smooth_step((self.outer - r) / (self.outer - self.inner))
        }
    }
}

/// Energy window: identically 1 on [lo, hi], supported in
/// (lo - shoulder, hi + shoulder), smooth shoulders on both sides.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EnergyWindow {
    pub lo: f64,
    pub hi: f64,
    pub shoulder: f64,
}

impl EnergyWindow {
    pub fn new(lo: f64, hi: f64, shoulder: f64) -> Self {
        assert!(hi > lo && shoulder > 0.0, "window needs lo < hi and a positive shoulder");
        EnergyWindow { lo, hi, shoulder }
    }

    /// Window centered at `center` with plateau half-width `half` on
    /// both sides; support stays inside (0, inf) by construction check.
    pub fn centered(center: f64, half: f64, shoulder: f64) -> Self {
        let w = Self::new(center - half, center + half, shoulder);
        assert!(w.lo - w.shoulder > 0.0, "energy window must be supported in (0, inf)");
        w
    }

    pub fn eval(&self, e: f64) -> f64 {
        if e >= self.lo && e <= self.hi {
            1.0
        } else if e <= self.lo - self.shoulder || e >= self.hi + self.shoulder {
            0.0
        } else if e < self.lo {
            smooth_step((e - (self.lo - self.shoulder)) / self.shoulder)
        } else {
            smooth_step(((self.hi + self.shoulder) - e) / self.shoulder)
        }
    }
}

/// Compactly supported bump A * exp(-1/(1 - |u|^2)) with
/// u = (x - center)/radius, supported on the closed ball of the given
/// radius.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
    tables: Vec<DerivTable>,
}

/// Partial derivative of the reference profile exp(-1/(1 - s)) with
/// s = |u|^2, expressed as sum_k A_k(u) * P_k(w) * f where
/// w = 1/(1 - s) and P_k tracks the k-th s-derivative of the profile.
#[derive(Debug, Clone)]
struct DerivTable {
    alpha: [u8; 3],
    // (poly in u, polynomial coefficients of P_k in powers of w)
    terms: Vec<(Poly, Vec<f64>)>,
}

pub const BUMP_MAX_DERIV: usize = 4;

impl Bump {
    pub fn new(center: [f64; 3], radius: f64, amplitude: f64) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        Bump {
            center,
            radius,
            amplitude,
            tables: build_tables(BUMP_MAX_DERIV),
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let u = self.to_local(x);
        let s = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        if s >= 1.0 {
            0.0
        } else {
            self.amplitude * (-1.0 / (1.0 - s)).exp()
        }
    }

    /// Exact partial derivative d^alpha in x, |alpha| <= BUMP_MAX_DERIV.
    pub fn partial(&self, x: [f64; 3], alpha: [u8; 3]) -> f64 {
        let order = (alpha[0] + alpha[1] + alpha[2]) as usize;
        assert!(order <= BUMP_MAX_DERIV, "bump derivative order not tabulated");
        if order == 0 {
            return self.eval(x);
        }
        let u = self.to_local(x);
        let s = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        if s >= 1.0 {
            return 0.0;
        }
        let w = 1.0 / (1.0 - s);
        let f = (-w).exp();
        let table = self
            .tables
            .iter()
            .find(|t| t.alpha == alpha)
            .expect("derivative table exists for tabulated order");
        let mut acc = 0.0;
        for (poly, pk) in &table.terms {
            let mut pw = 0.0;
            // Horner in w.
            for &c in pk.iter().rev() {
                pw = pw * w + c;
            }
            acc += poly.eval(u) * pw;
        }
        // Each u-derivative carries 1/radius from the chain rule.
        self.amplitude * f * acc / self.radius.powi(order as i32)
    }

    fn to_local(&self, x: [f64; 3]) -> [f64; 3] {
        [
            (x[0] - self.center[0]) / self.radius,
            (x[1] - self.center[1]) / self.radius,
            (x[2] - self.center[2]) / self.radius,
        ]
    }
}

/// Builds d^alpha tables for all |alpha| <= max_order by repeated
/// differentiation of sum_k A_k(u) P_k(w) f, using
/// d/du_i [A P_k f] = (dA/du_i) P_k f + 2 u_i A (P_k' w^2 - P_k w^2) f
/// which follows from dw/du_i = 2 u_i w^2 and df/du_i = -2 u_i w^2 f.
fn build_tables(max_order: usize) -> Vec<DerivTable> {
    let mut tables: Vec<DerivTable> = vec![DerivTable {
        alpha: [0, 0, 0],
        terms: vec![(Poly::constant(1.0), vec![1.0])],
    }];
    let mut frontier = vec![0usize];
    for _ in 0..max_order {
        let mut next = Vec::new();
        for &idx in &frontier {
            let base = tables[idx].clone();
            for i in 0..3 {
                let mut alpha = base.alpha;
                alpha[i] += 1;
                if tables.iter().any(|t| t.alpha == alpha) {
                    continue;
                }
                let mut terms: Vec<(Poly, Vec<f64>)> = Vec::new();
                for (poly, pk) in &base.terms {
                    push_term(&mut terms, poly.partial(i), pk.clone());
                    // 2 u_i A (w^2 P_k' - w^2 P_k)
                    let ui2 = Poly::var(i).mul(poly).scale(2.0);
                    push_term(&mut terms, ui2, shift_pk(pk));
                }
                next.push(tables.len());
                tables.push(DerivTable { alpha, terms });
            }
        }
        frontier = next;
    }
    tables
}

/// P -> w^2 (P' - P) as coefficient vectors in powers of w.
fn shift_pk(pk: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pk.len() + 2];
    for (j, &c) in pk.iter().enumerate() {
        if j >= 1 {
            // P' term: j c w^{j-1} -> w^{j+1}
            out[j + 1] += j as f64 * c;
        }
        out[j + 2] -= c;
    }
    out
}

fn push_term(terms: &mut Vec<(Poly, Vec<f64>)>, poly: Poly, pk: Vec<f64>) {
    if poly.is_zero() || pk.iter().all(|&c| c == 0.0) {
        return;
    }
    for (q, existing) in terms.iter_mut() {
        if *existing == pk {
            *q = q.add(&poly);
            return;
        }
    }
    terms.push((poly, pk));
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_is_a_partition() {
        for &t in &[0.1, 0.35, 0.5, 0.8] {
            assert_relative_eq!(smooth_step(t) + smooth_step(1.0 - t), 1.0, epsilon = 1e-15);
        }
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
    }

    #[test]
    fn step_derivative_matches_finite_differences() {
        let h = 1e-6;
        for &t in &[0.2, 0.5, 0.77] {
            let fd = (smooth_step(t + h) - smooth_step(t - h)) / (2.0 * h);
            assert_relative_eq!(smooth_step_deriv(t), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn window_plateau_is_exactly_one() {
        let w = EnergyWindow::centered(1.0, 0.2, 0.1);
        assert_eq!(w.eval(0.8), 1.0);
        assert_eq!(w.eval(1.2), 1.0);
        assert_eq!(w.eval(1.0), 1.0);
        assert_eq!(w.eval(0.69), 0.0);
        assert_eq!(w.eval(1.31), 0.0);
        let mid = w.eval(1.25);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn bump_partials_match_finite_differences() {
        let b = Bump::new([0.3, -0.2, 0.1], 0.7, 1.0);
        let x = [0.5, 0.1, -0.2];
        let h = 1e-5;
        for i in 0..3 {
            let mut alpha = [0u8; 3];
            alpha[i] = 1;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (b.eval(xp) - b.eval(xm)) / (2.0 * h);
            assert_relative_eq!(b.partial(x, alpha), fd, max_relative = 1e-8);
        }
        // Mixed second derivative against a nested difference.
        let fd = {
            let e = |dx: f64, dy: f64| b.eval([x[0] + dx, x[1] + dy, x[2]]);
            (e(h, h) - e(h, -h) - e(-h, h) + e(-h, -h)) / (4.0 * h * h)
        };
        assert_relative_eq!(b.partial(x, [1, 1, 0]), fd, max_relative = 1e-6);
    }

    #[test]
    fn bump_vanishes_outside_support_with_all_derivatives() {
        let b = Bump::new([0.0; 3], 0.5, 2.0);
        let x = [0.51, 0.0, 0.0];
        assert_eq!(b.eval(x), 0.0);
        assert_eq!(b.partial(x, [2, 1, 0]), 0.0);
    }

    #[test]
    fn fourth_order_bump_derivative_matches_richardson_fd() {
        let b = Bump::new([0.0; 3], 1.0, 1.0);
        let x = [0.25, -0.15, 0.3];
        let g = |t: f64| b.eval([t, x[1], x[2]]);
        let h = 2e-2;
        let fd4 = |h: f64| {
            (g(x[0] + 2.0 * h) - 4.0 * g(x[0] + h) + 6.0 * g(x[0]) - 4.0 * g(x[0] - h)
                + g(x[0] - 2.0 * h))
                / h.powi(4)
        };
        // One Richardson level on the h^2 error.
        let d4 = (4.0 * fd4(h / 2.0) - fd4(h)) / 3.0;
        assert_relative_eq!(b.partial(x, [4, 0, 0]), d4, max_relative = 2e-4);
    }
}
