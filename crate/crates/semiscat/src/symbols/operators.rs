//! Assembly of the expansion coefficient operators and their pairings
//! against test function bumps.
//!
//! With both one-sided symbol families solved, the h^nu_k coefficient
//! of the matrix element expansion is an operator
//!
//!   A_k = op(d_k^+) + op(d_k^-)^* + sum_{nu_a + nu_b = nu_k}
//!         op(d_a^-)^* op(d_b^+),
//!
//! where op(c(x) xi^beta) psi = c * D^beta psi with D = -i grad, and
//! adjoints are taken in the inner product <f, g> = integral f conj(g).
//! Pairings <Phi, A_k Psi> are computed in the equivalent two-sided
//! form <op(d_k^-)Phi, Psi> + <Phi, op(d_k^+)Psi> + sum <op(d_a^-)Phi,
//! op(d_b^+)Psi>, which only ever applies operators forward. The
//! pointwise adjoint normal form op(c xi^beta)^* psi =
//! D^beta(conj(c) psi) is also provided and cross-checked against the
//! two-sided pairing in the tests.

use super::line::{Direction, LineSolver, SymbolError};
use super::plan::{multi_binomial, MultiTable, SymbolPlan};
use crate::ode::OdeOptions;
use crate::potential::PotentialExpansion;
use crate::smooth::{Bump, BUMP_MAX_DERIV};
use crate::quad::gauss_legendre_on;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn axpy(x: [f64; 3], s: f64, d: [f64; 3]) -> [f64; 3] {
    [x[0] + s * d[0], x[1] + s * d[1], x[2] + s * d[2]]
}

/// (-i)^n.
fn mi_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

fn order_of(a: [u8; 3]) -> usize {
    a[0] as usize + a[1] as usize + a[2] as usize
}

/// Right-handed orthonormal frame (u1, u2, omega).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub u1: [f64; 3],
    pub u2: [f64; 3],
    pub omega: [f64; 3],
}

pub fn orthonormal_frame(omega: [f64; 3]) -> Frame {
    // Start from the coordinate axis least aligned with omega.
    let axis = (0..3)
        .min_by(|&i, &j| omega[i].abs().total_cmp(&omega[j].abs()))
        .expect("three axes");
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let p = dot(e, omega);
    let mut u1 = [e[0] - p * omega[0], e[1] - p * omega[1], e[2] - p * omega[2]];
    let n = dot(u1, u1).sqrt();
    u1 = [u1[0] / n, u1[1] / n, u1[2] / n];
    let u2 = [
        omega[1] * u1[2] - omega[2] * u1[1],
        omega[2] * u1[0] - omega[0] * u1[2],
        omega[0] * u1[1] - omega[1] * u1[0],
    ];
    Frame { u1, u2, omega }
}

/// Quadrature resolution for bump pairings. The integrand is smooth
/// and vanishes to all orders at the integration box boundary, so
/// tensor Gauss-Legendre converges superalgebraically.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PairingSettings {
    pub transverse_nodes: usize,
    pub axial_nodes: usize,
    pub ode: OdeOptions,
}

impl Default for PairingSettings {
    fn default() -> Self {
        PairingSettings {
            transverse_nodes: 20,
            axial_nodes: 20,
            ode: OdeOptions {
                rtol: 1e-11,
                atol: 1e-13,
                ..OdeOptions::default()
            },
        }
    }
}

/// All expansion coefficients <Phi, A_k Psi> for one direction, plus
/// the overlap mass of the two bumps.
#[derive(Debug, Clone)]
pub struct Pairing {
    /// coefficients[k] pairs the k-th lattice node.
    pub coefficients: Vec<Complex64>,
    /// integral of Phi * Psi (both bumps are real).
    pub mass: f64,
    /// Lines actually integrated (0 when the supports are disjoint).
    pub lines: usize,
}

impl Pairing {
    fn zero(nodes: usize) -> Self {
        Pairing {
            coefficients: vec![Complex64::new(0.0, 0.0); nodes],
            mass: 0.0,
            lines: 0,
        }
    }
}

/// Computes <Phi, A_k Psi> for every planned node by quadrature over
/// the support intersection, solving the transport system along one
/// line per transverse quadrature node. Deterministic: the parallel
/// reduction is ordered.
pub fn pair_symbols(
    plan: &SymbolPlan,
    potential: &PotentialExpansion,
    omega: [f64; 3],
    phi: &Bump,
    psi: &Bump,
    settings: &PairingSettings,
) -> Result<Pairing, SymbolError> {
    let n_nodes = plan.nodes.len();
    let max_deg = plan.nodes.iter().map(|n| n.xi_degree).max().unwrap_or(0);
    let max_pair = plan
        .pairs
        .iter()
        .flatten()
        .map(|&(a, b)| plan.nodes[a].xi_degree + plan.nodes[b].xi_degree)
        .max()
        .unwrap_or(0);
    assert!(
        max_deg.max(max_pair) <= BUMP_MAX_DERIV,
        "bump derivative tables cover the planned xi degrees"
    );

    let solver = LineSolver::new(plan, potential, omega)?;
    let frame = orthonormal_frame(omega);

    // Per-axis intersection of the two support boxes.
    let interval = |e: [f64; 3]| -> Option<(f64, f64)> {
        let lo = (dot(phi.center, e) - phi.radius).max(dot(psi.center, e) - psi.radius);
        let hi = (dot(phi.center, e) + phi.radius).min(dot(psi.center, e) + psi.radius);
        (lo < hi).then_some((lo, hi))
    };
    let (Some(ia), Some(ib), Some(is)) =
        (interval(frame.u1), interval(frame.u2), interval(omega))
    else {
        return Ok(Pairing::zero(n_nodes));
    };
    let (an, aw) = gauss_legendre_on(settings.transverse_nodes, ia.0, ia.1);
    let (bn, bw) = gauss_legendre_on(settings.transverse_nodes, ib.0, ib.1);
    let (sn, sw) = gauss_legendre_on(settings.axial_nodes, is.0, is.1);

    let rows: Result<Vec<(Vec<Complex64>, f64, usize)>, SymbolError> = (0..an.len())
        .into_par_iter()
        .map(|i| {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); n_nodes];
            let mut mass = 0.0f64;
            let mut lines = 0usize;
            let mut opp = vec![Complex64::new(0.0, 0.0); n_nodes];
            let mut opm = vec![Complex64::new(0.0, 0.0); n_nodes];
            for j in 0..bn.len() {
                let anchor = axpy(axpy([0.0; 3], an[i], frame.u1), bn[j], frame.u2);
                // Skip lines missing either support entirely.
                let misses = |bump: &Bump| {
                    let v = [
                        anchor[0] - bump.center[0],
                        anchor[1] - bump.center[1],
                        anchor[2] - bump.center[2],
                    ];
                    let p = dot(v, omega);
                    let t = [v[0] - p * omega[0], v[1] - p * omega[1], v[2] - p * omega[2]];
                    dot(t, t) >= bump.radius * bump.radius
                };
                if misses(phi) || misses(psi) {
                    continue;
                }
                let plus = solver.solve(Direction::Plus, anchor, &sn, &settings.ode)?;
                let minus = solver.solve(Direction::Minus, anchor, &sn, &settings.ode)?;
                lines += 1;
                for (q, &s) in sn.iter().enumerate() {
                    let x = axpy(anchor, s, omega);
                    let phi0 = phi.eval(x);
                    let psi0 = psi.eval(x);
                    if phi0 == 0.0 || psi0 == 0.0 {
                        continue;
                    }
                    let w = aw[i] * bw[j] * sw[q];
                    for (k, node) in plan.nodes.iter().enumerate() {
                        let mut fwd = Complex64::new(0.0, 0.0);
                        let mut bwd = Complex64::new(0.0, 0.0);
                        for &sigma in node.xi_monos.indices() {
                            let f = mi_pow(order_of(sigma));
                            let slot = node.slot(sigma, [0, 0, 0]);
                            fwd += plus.states[q][slot] * f * psi.partial(x, sigma);
                            bwd += minus.states[q][slot] * f * phi.partial(x, sigma);
                        }
                        opp[k] = fwd;
                        opm[k] = bwd;
                    }
                    for k in 0..n_nodes {
                        let mut v = opm[k] * psi0 + opp[k].conj() * phi0;
                        for &(a, b) in &plan.pairs[k] {
                            v += opm[a] * opp[b].conj();
                        }
                        coeffs[k] += v * w;
                    }
                    mass += w * phi0 * psi0;
                }
            }
            Ok((coeffs, mass, lines))
        })
        .collect();

    let rows = rows?;
    let mut out = Pairing::zero(n_nodes);
    for (coeffs, mass, lines) in rows {
        for (k, c) in coeffs.into_iter().enumerate() {
            out.coefficients[k] += c;
        }
        out.mass += mass;
        out.lines += lines;
    }
    Ok(out)
}

/// Symbol states of both decay directions at one point.
#[derive(Debug, Clone)]
pub struct PointStates {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

/// Solves both transport families along the line through x.
pub fn point_states(
    solver: &LineSolver,
    x: [f64; 3],
    opts: &OdeOptions,
) -> Result<PointStates, SymbolError> {
    let mut plus = solver.solve(Direction::Plus, x, &[0.0], opts)?;
    let mut minus = solver.solve(Direction::Minus, x, &[0.0], opts)?;
    Ok(PointStates {
        plus: plus.states.remove(0),
        minus: minus.states.remove(0),
    })
}

/// d^tau of (op(d_node^+) psi) at x, assembled from the tracked plus
/// state by the Leibniz rule.
fn plus_action_partial(
    plan: &SymbolPlan,
    node: usize,
    plus: &[Complex64],
    psi: &Bump,
    x: [f64; 3],
    tau: [u8; 3],
) -> Complex64 {
    let np = &plan.nodes[node];
    let mut acc = Complex64::new(0.0, 0.0);
    let taus = MultiTable::new(order_of(tau));
    for &sigma in np.xi_monos.indices() {
        let f = mi_pow(order_of(sigma));
        for &mu in taus.indices() {
            if mu[0] > tau[0] || mu[1] > tau[1] || mu[2] > tau[2] {
                continue;
            }
            let rest = [tau[0] - mu[0] + sigma[0], tau[1] - mu[1] + sigma[1], tau[2] - mu[2] + sigma[2]];
            acc += plus[np.slot(sigma, mu)]
                * f
                * multi_binomial(tau, mu)
                * psi.partial(x, rest);
        }
    }
    acc
}

/// (op(d_node^-)^* f)(x) where f's derivatives at x are supplied by
/// the closure: op(c xi^beta)^* f = (-i)^|beta| d^beta (conj(c) f).
fn minus_adjoint_action(
    plan: &SymbolPlan,
    node: usize,
    minus: &[Complex64],
    f_partial: &dyn Fn([u8; 3]) -> Complex64,
) -> Complex64 {
    let np = &plan.nodes[node];
    let mut acc = Complex64::new(0.0, 0.0);
    for &beta in np.xi_monos.indices() {
        let f = mi_pow(order_of(beta));
        let gammas = MultiTable::new(order_of(beta));
        for &gamma in gammas.indices() {
            if gamma[0] > beta[0] || gamma[1] > beta[1] || gamma[2] > beta[2] {
                continue;
            }
            let rest = [beta[0] - gamma[0], beta[1] - gamma[1], beta[2] - gamma[2]];
            acc += f
                * multi_binomial(beta, gamma)
                * minus[np.slot(beta, gamma)].conj()
                * f_partial(rest);
        }
    }
    acc
}

/// One coefficient operator of the matrix-element expansion, evaluable
/// pointwise on a bump through the solved symbol states.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientOperator<'a> {
    plan: &'a SymbolPlan,
    node: usize,
}

impl<'a> CoefficientOperator<'a> {
    pub fn new(plan: &'a SymbolPlan, node: usize) -> Self {
        assert!(node < plan.nodes.len(), "node is planned");
        CoefficientOperator { plan, node }
    }

    pub fn nu(&self) -> f64 {
        self.plan.nodes[self.node].nu
    }

    /// (A_k psi)(x), given the symbol states at x.
    pub fn apply(&self, states: &PointStates, psi: &Bump, x: [f64; 3]) -> Complex64 {
        let plan = self.plan;
        let k = self.node;
        let mut acc = plus_action_partial(plan, k, &states.plus, psi, x, [0, 0, 0]);
        acc += minus_adjoint_action(plan, k, &states.minus, &|tau| {
            Complex64::new(psi.partial(x, tau), 0.0)
        });
        for &(a, b) in &plan.pairs[k] {
            acc += minus_adjoint_action(plan, a, &states.minus, &|tau| {
                plus_action_partial(plan, b, &states.plus, psi, x, tau)
            });
        }
        acc
    }

    /// The part of (A_k psi)(x) carried by the node's bare potential
    /// sources: multiplication by (i / 2 sqrt(lambda)) times the
    /// full-line integral of those potential tails through x. Zero for
    /// nodes without bare sources.
    pub fn bare_multiplier(
        &self,
        potential: &PotentialExpansion,
        omega: [f64; 3],
        x: [f64; 3],
        tol: f64,
    ) -> Complex64 {
        use super::plan::Source;
        let mut xray = 0.0;
        for source in &self.plan.nodes[self.node].sources {
            if let Source::Bare { term } = *source {
                let t = &potential.terms[term];
                let line = |s: f64| t.eval_tail(axpy(x, s, omega));
                let fwd = crate::quad::integrate_half_line_decay(line, 0.0, tol, t.rho);
                let back = |s: f64| t.eval_tail(axpy(x, -s, omega));
                let bwd = crate::quad::integrate_half_line_decay(back, 0.0, tol, t.rho);
                xray += fwd.value + bwd.value;
            }
        }
        Complex64::new(0.0, xray / (2.0 * self.plan.lambda.sqrt()))
    }

    /// The remainder of the action after subtracting the bare X-ray
    /// multiplication; vanishes identically for the leading node.
    pub fn lower_order_part(
        &self,
        states: &PointStates,
        psi: &Bump,
        potential: &PotentialExpansion,
        omega: [f64; 3],
        x: [f64; 3],
    ) -> Complex64 {
        self.apply(states, psi, x) - self.bare_multiplier(potential, omega, x, 1e-11) * psi.eval(x)
    }
}
