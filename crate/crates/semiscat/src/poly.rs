//! Small dense polynomial algebra in three variables, plus the
//! `poly * |x|^p` sums that homogeneous potential terms and their
//! derivatives live in. Degrees stay small (solid harmonics up to
//! degree 8 and a few derivative orders), so a sorted term list is
//! plenty.

use std::collections::BTreeMap;

pub type Exps = [u8; 3];

/// Polynomial in (x, y, z) with f64 coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    /// Sorted by exponent triple, no duplicates, no explicit zeros.
    terms: Vec<(Exps, f64)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            Self::zero()
        } else {
            Poly {
                terms: vec![([0, 0, 0], c)],
            }
        }
    }

    pub fn monomial(exps: Exps, c: f64) -> Self {
        if c == 0.0 {
            Self::zero()
        } else {
            Poly {
                terms: vec![(exps, c)],
            }
        }
    }

    /// Coordinate variable x_i.
    pub fn var(i: usize) -> Self {
        let mut e = [0u8; 3];
        e[i] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(Exps, f64)] {
        &self.terms
    }

    fn from_map(map: BTreeMap<Exps, f64>) -> Self {
        Poly {
            terms: map.into_iter().filter(|&(_, c)| c != 0.0).collect(),
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut map: BTreeMap<Exps, f64> = self.terms.iter().copied().collect();
        for &(e, c) in &other.terms {
            *map.entry(e).or_insert(0.0) += c;
        }
        Self::from_map(map)
    }

    pub fn scale(&self, s: f64) -> Poly {
        if s == 0.0 {
            return Self::zero();
        }
        Poly {
            terms: self.terms.iter().map(|&(e, c)| (e, c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut map: BTreeMap<Exps, f64> = BTreeMap::new();
        for &(ea, ca) in &self.terms {
            for &(eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                *map.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        Self::from_map(map)
    }

    /// Partial derivative with respect to x_i.
    pub fn partial(&self, i: usize) -> Poly {
        let mut map: BTreeMap<Exps, f64> = BTreeMap::new();
        for &(e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e;
            d[i] -= 1;
            *map.entry(d).or_insert(0.0) += c * e[i] as f64;
        }
        Self::from_map(map)
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for &(e, c) in &self.terms {
            acc += c * powi(x[0], e[0]) * powi(x[1], e[1]) * powi(x[2], e[2]);
        }
        acc
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|&(e, _)| e[0] as usize + e[1] as usize + e[2] as usize)
            .max()
            .unwrap_or(0)
    }
}

fn powi(x: f64, n: u8) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// Sum of P_i(x) * |x|^{p_i} with real exponents p_i. Closed under
/// partial derivatives, which is what makes exact derivatives of
/// homogeneous terms cheap: d/dx_i (P |x|^p) = (dP/dx_i) |x|^p
/// + p x_i P |x|^{p-2}.
#[derive(Debug, Clone)]
pub struct RadialPoly {
    /// Keyed by the radial exponent; exponents that collide are merged.
    parts: Vec<(f64, Poly)>,
}

impl RadialPoly {
    pub fn zero() -> Self {
        RadialPoly { parts: Vec::new() }
    }

    pub fn new(power: f64, poly: Poly) -> Self {
        let mut rp = Self::zero();
        rp.accumulate(power, poly);
        rp
    }

    pub fn parts(&self) -> &[(f64, Poly)] {
        &self.parts
    }

    fn accumulate(&mut self, power: f64, poly: Poly) {
        if poly.is_zero() {
            return;
        }
        for (p, q) in self.parts.iter_mut() {
            if *p == power {
                *q = q.add(&poly);
                return;
            }
        }
        self.parts.push((power, poly));
        self.parts
            .sort_by(|a, b| a.0.partial_cmp(&b.0).expect("radial exponent is finite"));
    }

    pub fn add(&self, other: &RadialPoly) -> RadialPoly {
        let mut out = self.clone();
        for (p, q) in &other.parts {
            out.accumulate(*p, q.clone());
        }
        out.prune()
    }

    pub fn scale(&self, s: f64) -> RadialPoly {
        RadialPoly {
            parts: self.parts.iter().map(|(p, q)| (*p, q.scale(s))).collect(),
        }
    }

    pub fn partial(&self, i: usize) -> RadialPoly {
        let mut out = RadialPoly::zero();
        for (p, q) in &self.parts {
            out.accumulate(*p, q.partial(i));
            if *p != 0.0 {
                let xi_q = Poly::var(i).mul(q);
                out.accumulate(*p - 2.0, xi_q.scale(*p));
            }
        }
        out.prune()
    }

    fn prune(mut self) -> RadialPoly {
        self.parts.retain(|(_, q)| !q.is_zero());
        self
    }

    /// Evaluate at x; valid away from the origin when any p_i < 0.
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let mut acc = 0.0;
        for (p, q) in &self.parts {
            let radial = if *p == 0.0 { 1.0 } else { r2.powf(*p * 0.5) };
            acc += radial * q.eval(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_and_partial_agree_with_direct_evaluation() {
        // (x^2 y + 3z) * (y - z), d/dy checked against hand expansion.
        let a = Poly::monomial([2, 1, 0], 1.0).add(&Poly::monomial([0, 0, 1], 3.0));
        let b = Poly::monomial([0, 1, 0], 1.0).add(&Poly::monomial([0, 0, 1], -1.0));
        let prod = a.mul(&b);
        let x = [1.3, -0.7, 2.1];
        assert_relative_eq!(prod.eval(x), a.eval(x) * b.eval(x), max_relative = 1e-14);

        let dy = prod.partial(1);
        // d/dy [(x^2 y + 3z)(y - z)] = x^2 (y - z) + (x^2 y + 3z)
        let expected = a.eval(x) + x[0] * x[0] * (x[1] - x[2]);
        assert_relative_eq!(dy.eval(x), expected, max_relative = 1e-13);
    }

    #[test]
    fn radial_partial_matches_finite_differences() {
        // f = x y |x|^{-3.5}
        let rp = RadialPoly::new(-3.5, Poly::monomial([1, 1, 0], 1.0));
        let x = [0.9, -1.4, 0.6];
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (rp.eval(xp) - rp.eval(xm)) / (2.0 * h);
            assert_relative_eq!(rp.partial(i).eval(x), fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn second_radial_partials_commute() {
        let rp = RadialPoly::new(-2.0, Poly::monomial([0, 2, 1], 0.7));
        let xy = rp.partial(0).partial(1);
        let yx = rp.partial(1).partial(0);
        let x = [1.1, 0.4, -0.8];
        assert_relative_eq!(xy.eval(x), yx.eval(x), max_relative = 1e-13);
    }
}
