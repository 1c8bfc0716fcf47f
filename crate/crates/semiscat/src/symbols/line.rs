//! Per-line integration of the transport recursion.
//!
//! Every symbol coefficient restricted to a line x = q + s*omega obeys
//! a first-order ODE in s whose right-hand side is built from potential
//! derivatives and lower symbols evaluated at the same point, so the
//! whole packed state of a [`SymbolPlan`](super::plan::SymbolPlan) can
//! be advanced as one triangular system. Outgoing symbols decay toward
//! s = +infinity and are integrated downward from there; incoming ones
//! mirror this from s = -infinity. The infinite tail leg is
//! compactified with s = s_ref * z^{-1/(rho_1 - 1)}, which turns the
//! slowest (leading homogeneity) decay into a bounded integrand on
//! z in (0, 1].

use super::plan::{multi_binomial, MultiTable, Source, SymbolPlan};
use crate::ode::{self, OdeError, OdeOptions, OdeStats};
use crate::poly::{Poly, RadialPoly};
use crate::potential::PotentialExpansion;
use crate::xray::half_line_distance;
use num_complex::Complex64;
use thiserror::Error;

/// Padding between the outermost query point and the switchover from
/// the compactified tail leg to the plain leg.
const TAIL_OFFSET: f64 = 48.0;

/// Beyond this arc length the integrand is treated as exactly zero;
/// in the compactified variable the discarded mass is far below f64
/// resolution for every admissible homogeneity order.
const S_GUARD: f64 = 1e150;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SymbolError {
    #[error("direction must be a unit vector (|omega| = {0})")]
    NotUnit(f64),
    #[error("line comes within {dist} of the origin but the potential core extends to {core}")]
    LineTooClose { dist: f64, core: f64 },
    #[error("plan covers {plan} potential terms but the potential has {potential}")]
    TermMismatch { plan: usize, potential: usize },
    #[error("ode integration failed: {0}")]
    Ode(#[from] OdeError),
}

/// Which end of the line the symbol decays at: `Plus` symbols vanish
/// as s -> +infinity (outgoing), `Minus` as s -> -infinity (incoming).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }
}

/// A derivative of a homogeneous potential term, stored as
/// |x|^exponent * poly(x / |x|). Keeping the polynomial on the unit
/// sphere makes evaluation overflow-free at the huge radii the
/// compactified tail leg visits.
#[derive(Debug, Clone)]
struct HomogeneousEval {
    exponent: f64,
    poly: Poly,
}

impl HomogeneousEval {
    /// Collapses a radial-polynomial derivative of a homogeneous
    /// function. Every part of such a derivative shares the same total
    /// homogeneity p + deg, which the constructor checks.
    fn from_radial(rp: &RadialPoly) -> Self {
        let mut exponent = 0.0;
        let mut poly = Poly::zero();
        let mut first = true;
        for (p, q) in rp.parts() {
            for &(e, _) in q.terms() {
                let deg = e[0] as usize + e[1] as usize + e[2] as usize;
                let total = p + deg as f64;
                if first {
                    exponent = total;
                    first = false;
                } else {
                    assert!(
                        (total - exponent).abs() < 1e-9,
                        "derivative of a homogeneous term stays homogeneous"
                    );
                }
            }
            poly = poly.add(q);
        }
        HomogeneousEval { exponent, poly }
    }

    fn eval_unit(&self, u: [f64; 3], r: f64) -> f64 {
        if self.poly.is_zero() {
            return 0.0;
        }
        self.poly.eval(u) * r.powf(self.exponent)
    }
}

/// Solves the packed transport system along admissible lines of a
/// fixed direction. Construction precomputes exact derivative tables
/// of every potential tail up to the order the plan consumes.
pub struct LineSolver<'a> {
    plan: &'a SymbolPlan,
    potential: &'a PotentialExpansion,
    omega: [f64; 3],
    vgrid: MultiTable,
    /// vtables[term][gamma position] = d^gamma of the term's tail.
    vtables: Vec<Vec<HomogeneousEval>>,
}

impl<'a> LineSolver<'a> {
    pub fn new(
        plan: &'a SymbolPlan,
        potential: &'a PotentialExpansion,
        omega: [f64; 3],
    ) -> Result<Self, SymbolError> {
        let n = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(SymbolError::NotUnit(n));
        }
        let needed = plan
            .nodes
            .iter()
            .flat_map(|node| node.sources.iter())
            .filter_map(|s| match *s {
                Source::Bare { term } | Source::Product { term, .. } => Some(term),
                Source::Derivative { .. } => None,
            })
            .max()
            .map_or(0, |t| t + 1);
        if needed > potential.terms.len() {
            return Err(SymbolError::TermMismatch {
                plan: needed,
                potential: potential.terms.len(),
            });
        }
        let vgrid = MultiTable::new(plan.v_deriv_order);
        let vtables = potential
            .terms
            .iter()
            .map(|term| {
                let mut radial: Vec<RadialPoly> = Vec::with_capacity(vgrid.len());
                for &gamma in vgrid.indices() {
                    if gamma == [0, 0, 0] {
                        radial.push(term.tail_radial_poly());
                        continue;
                    }
                    // Graded order guarantees the parent index was
                    // already built.
                    let axis = (0..3).find(|&i| gamma[i] > 0).expect("nonzero index");
                    let mut parent = gamma;
                    parent[axis] -= 1;
                    let rp = radial[vgrid.position(parent)].partial(axis);
                    radial.push(rp);
                }
                radial.iter().map(HomogeneousEval::from_radial).collect()
            })
            .collect();
        Ok(LineSolver {
            plan,
            potential,
            omega,
            vgrid,
            vtables,
        })
    }

    pub fn plan(&self) -> &SymbolPlan {
        self.plan
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    /// Potential tail derivatives at x, laid out term-major to match
    /// `vgrid` positions.
    fn fill_potential(&self, x: [f64; 3], vbuf: &mut [f64]) {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let u = [x[0] / r, x[1] / r, x[2] / r];
        let vlen = self.vgrid.len();
        for (t, table) in self.vtables.iter().enumerate() {
            for (g, entry) in table.iter().enumerate() {
                vbuf[t * vlen + g] = entry.eval_unit(u, r);
            }
        }
    }

    /// d/ds of the packed state at x, written into `dy` (interleaved
    /// re/im). `vbuf` is scratch for the potential derivatives.
    fn fill_rhs(&self, x: [f64; 3], y: &[f64], dy: &mut [f64], vbuf: &mut [f64]) {
        self.fill_potential(x, vbuf);
        let vlen = self.vgrid.len();
        let sqrt_lambda = self.plan.lambda.sqrt();
        // 1 / (2 i sqrt(lambda))
        let prefactor = Complex64::new(0.0, -1.0 / (2.0 * sqrt_lambda));
        let state = |m: usize, beta: [u8; 3], alpha: [u8; 3]| -> Complex64 {
            let s = self.plan.nodes[m].slot(beta, alpha);
            Complex64::new(y[2 * s], y[2 * s + 1])
        };
        for node in &self.plan.nodes {
            for &beta in node.xi_monos.indices() {
                for &alpha in node.alphas.indices() {
                    let mut src = Complex64::new(0.0, 0.0);
                    for source in &node.sources {
                        match *source {
                            Source::Bare { term } => {
                                if beta == [0, 0, 0] {
                                    let v = vbuf[term * vlen + self.vgrid.position(alpha)];
                                    src += Complex64::new(v, 0.0);
                                }
                            }
                            Source::Product { term, node: m } => {
                                let partner = &self.plan.nodes[m];
                                if !partner.xi_monos.contains(beta) {
                                    continue;
                                }
                                // Leibniz over gamma <= alpha.
                                for g0 in 0..=alpha[0] {
                                    for g1 in 0..=alpha[1] {
                                        for g2 in 0..=alpha[2] {
                                            let gamma = [g0, g1, g2];
                                            let rest = [
                                                alpha[0] - g0,
                                                alpha[1] - g1,
                                                alpha[2] - g2,
                                            ];
                                            let b = multi_binomial(alpha, gamma);
                                            let v =
                                                vbuf[term * vlen + self.vgrid.position(gamma)];
                                            src += state(m, beta, rest) * (b * v);
                                        }
                                    }
                                }
                            }
                            Source::Derivative { node: m } => {
                                let partner = &self.plan.nodes[m];
                                // -(2i xi.grad + laplacian) of symbol m,
                                // coefficient of xi^beta, differentiated
                                // by alpha.
                                for i in 0..3 {
                                    if beta[i] >= 1 {
                                        let mut bm = beta;
                                        bm[i] -= 1;
                                        if partner.xi_monos.contains(bm) {
                                            let mut a1 = alpha;
                                            a1[i] += 1;
                                            src += state(m, bm, a1)
                                                * Complex64::new(0.0, -2.0);
                                        }
                                    }
                                    if partner.xi_monos.contains(beta) {
                                        let mut a2 = alpha;
                                        a2[i] += 2;
                                        src -= state(m, beta, a2);
                                    }
                                }
                            }
                        }
                    }
                    let d = prefactor * src;
                    let s = node.slot(beta, alpha);
                    dy[2 * s] = d.re;
                    dy[2 * s + 1] = d.im;
                }
            }
        }
    }

    /// Integrates the full symbol state along the line q + s*omega and
    /// returns it at each requested arc length, in the caller's order.
    /// The half-line swept by the integration (from the decay end down
    /// to the innermost query point) must stay outside the potential
    /// core.
    pub fn solve(
        &self,
        direction: Direction,
        anchor: [f64; 3],
        s_points: &[f64],
        opts: &OdeOptions,
    ) -> Result<LineSolution, SymbolError> {
        if s_points.is_empty() {
            return Ok(LineSolution {
                states: Vec::new(),
                stats: OdeStats::default(),
            });
        }
        let sign = direction.sign();
        let point = |s: f64| {
            [
                anchor[0] + s * self.omega[0],
                anchor[1] + s * self.omega[1],
                anchor[2] + s * self.omega[2],
            ]
        };

        // Sort query points so integration reaches them monotonically
        // from the decay end: descending for Plus, ascending for Minus.
        let mut order: Vec<usize> = (0..s_points.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (sign * s_points[a], sign * s_points[b]);
            y.total_cmp(&x)
        });
        let innermost = s_points[*order.last().expect("nonempty")];
        let outermost = s_points[order[0]];

        // The swept half-line runs from the innermost query point out
        // to infinity on the decay side.
        let dist = half_line_distance(point(innermost), {
            let w = self.omega;
            [sign * w[0], sign * w[1], sign * w[2]]
        });
        if dist < self.potential.core_radius {
            return Err(SymbolError::LineTooClose {
                dist,
                core: self.potential.core_radius,
            });
        }

        let s_ref = (sign * outermost).max(0.0) + TAIL_OFFSET;
        let e = 1.0 / (self.plan.rho_leading - 1.0);
        let mut y = vec![0.0f64; 2 * self.plan.state_len];
        let mut vbuf = vec![0.0f64; self.vtables.len() * self.vgrid.len()];
        let mut stats = OdeStats::default();

        // Tail leg in the compactified variable, z: 0 -> 1 covers
        // s: (decay end) -> sign * s_ref.
        {
            let mut fz = |z: f64, y: &[f64], dy: &mut [f64]| {
                let s = sign * s_ref * z.powf(-e);
                if !s.is_finite() || s.abs() > S_GUARD {
                    dy.fill(0.0);
                    return;
                }
                self.fill_rhs(point(s), y, dy, &mut vbuf);
                // Signed ds/dz.
                let jac = -sign * e * s_ref * z.powf(-e - 1.0);
                for v in dy.iter_mut() {
                    *v *= jac;
                }
            };
            let st = ode::integrate(&mut fz, 0.0, 1.0, &mut y, opts, None)?;
            stats.steps += st.steps;
            stats.rejected += st.rejected;
            stats.rhs_evals += st.rhs_evals;
        }

        // Plain leg through the query points.
        let checkpoints: Vec<f64> = order.iter().map(|&i| s_points[i]).collect();
        let mut fs = |s: f64, y: &[f64], dy: &mut [f64]| {
            self.fill_rhs(point(s), y, dy, &mut vbuf);
        };
        let (raw, st) =
            ode::integrate_checkpoints(&mut fs, sign * s_ref, &checkpoints, &mut y, opts)?;
        stats.steps += st.steps;
        stats.rejected += st.rejected;
        stats.rhs_evals += st.rhs_evals;

        let mut states = vec![Vec::new(); s_points.len()];
        for (rank, &i) in order.iter().enumerate() {
            states[i] = raw[rank]
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
        }
        Ok(LineSolution { states, stats })
    }
}

/// Symbol states along one line.
#[derive(Debug, Clone)]
pub struct LineSolution {
    /// states[i][slot]: packed complex state at the i-th query point.
    pub states: Vec<Vec<Complex64>>,
    pub stats: OdeStats,
}

impl LineSolution {
    /// Value of d/dx^alpha of the xi^beta coefficient of symbol `node`
    /// at query point `i`.
    pub fn coefficient(
        &self,
        plan: &SymbolPlan,
        node: usize,
        beta: [u8; 3],
        alpha: [u8; 3],
        i: usize,
    ) -> Complex64 {
        self.states[i][plan.nodes[node].slot(beta, alpha)]
    }

    /// Evaluates symbol `node` at query point `i` and covector `xi`.
    pub fn symbol(&self, plan: &SymbolPlan, node: usize, xi: [f64; 3], i: usize) -> Complex64 {
        let np = &plan.nodes[node];
        let mut acc = Complex64::new(0.0, 0.0);
        for &beta in np.xi_monos.indices() {
            let mono = xi[0].powi(beta[0] as i32)
                * xi[1].powi(beta[1] as i32)
                * xi[2].powi(beta[2] as i32);
            acc += self.states[i][np.slot(beta, [0, 0, 0])] * mono;
        }
        acc
    }
}
