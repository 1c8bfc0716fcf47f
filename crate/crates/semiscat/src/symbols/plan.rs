//! Static planning for the transport recursion.
//!
//! Before any quadrature runs, the lattice is turned into a plan: per
//! node, which sources feed it (bare potential terms, products with
//! earlier symbols, derivative shifts of earlier symbols), the
//! polynomial degree in xi, and how many spatial derivative orders of
//! its coefficient functions must be carried so that every consumer
//! (derivative sources need two extra orders, adjoint normal forms
//! need the partner's xi degree) can be served. The plan fixes the
//! packed state layout of the per-line ODE system.

use super::lattice::{ExponentLattice, NU_MERGE_TOL};
use serde::{Deserialize, Serialize};

/// Multi-indices with |alpha| <= order in graded lexicographic order,
/// with constant-time position lookup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiTable {
    order: usize,
    list: Vec<[u8; 3]>,
    pos: Vec<usize>,
}

impl MultiTable {
    pub fn new(order: usize) -> Self {
        let mut list = Vec::new();
        for total in 0..=order {
            for a0 in (0..=total).rev() {
                for a1 in (0..=(total - a0)).rev() {
                    let a2 = total - a0 - a1;
                    list.push([a0 as u8, a1 as u8, a2 as u8]);
                }
            }
        }
        let side = order + 1;
        let mut pos = vec![usize::MAX; side * side * side];
        for (i, a) in list.iter().enumerate() {
            pos[(a[0] as usize * side + a[1] as usize) * side + a[2] as usize] = i;
        }
        MultiTable { order, list, pos }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn indices(&self) -> &[[u8; 3]] {
        &self.list
    }

    /// Position of a multi-index with |alpha| <= order.
    pub fn position(&self, a: [u8; 3]) -> usize {
        let side = self.order + 1;
        let p = self.pos[(a[0] as usize * side + a[1] as usize) * side + a[2] as usize];
        debug_assert_ne!(p, usize::MAX);
        p
    }

    /// Whether the index is covered by this table.
    pub fn contains(&self, a: [u8; 3]) -> bool {
        (a[0] as usize + a[1] as usize + a[2] as usize) <= self.order
    }
}

/// Product of per-component binomial coefficients C(alpha, gamma).
pub fn multi_binomial(alpha: [u8; 3], gamma: [u8; 3]) -> f64 {
    fn binom(n: u8, k: u8) -> f64 {
        let mut v = 1.0;
        for i in 0..k {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        v
    }
    binom(alpha[0], gamma[0]) * binom(alpha[1], gamma[1]) * binom(alpha[2], gamma[2])
}

/// One contribution to a node's transport source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    /// V_term itself (lands at exponent gamma_term).
    Bare { term: usize },
    /// V_term times an earlier symbol.
    Product { term: usize, node: usize },
    /// -(2i xi . grad + Laplacian) of an earlier symbol, shifted by
    /// 1 + delta.
    Derivative { node: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodePlan {
    /// Index into the lattice entries (same as node index).
    pub entry_index: usize,
    pub nu: f64,
    pub xi_degree: usize,
    /// Highest |alpha| of the tracked spatial derivatives of the
    /// coefficient functions.
    pub need: usize,
    pub sources: Vec<Source>,
    /// xi monomials (all |beta| <= xi_degree).
    pub xi_monos: MultiTable,
    /// Tracked derivative multi-indices (all |alpha| <= need).
    pub alphas: MultiTable,
    /// Offset into the packed complex state vector.
    pub offset: usize,
}

impl NodePlan {
    pub fn width(&self) -> usize {
        self.xi_monos.len() * self.alphas.len()
    }

    /// Packed position of d/dx^alpha of the xi^beta coefficient.
    pub fn slot(&self, beta: [u8; 3], alpha: [u8; 3]) -> usize {
        self.offset + self.xi_monos.position(beta) * self.alphas.len() + self.alphas.position(alpha)
    }
}

/// Full plan for the first `nodes.len()` lattice entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolPlan {
    pub delta: f64,
    pub lambda: f64,
    /// Slowest homogeneity order; controls tail compactification.
    pub rho_leading: f64,
    pub nodes: Vec<NodePlan>,
    pub state_len: usize,
    /// Highest |gamma| of potential derivatives any source consumes.
    pub v_deriv_order: usize,
    /// Product pairs (a, b) per node k with nu_a + nu_b = nu_k, used
    /// by the operator assembly.
    pub pairs: Vec<Vec<(usize, usize)>>,
}

/// Builds the plan for the first `count` lattice entries (all of them
/// if `count` exceeds the lattice).
pub fn build_plan(
    lattice: &ExponentLattice,
    lambda: f64,
    rhos: &[f64],
    count: usize,
) -> SymbolPlan {
    let n = count.min(lattice.entries.len());
    let shift = 1.0 + lattice.delta;
    let nus: Vec<f64> = lattice.entries[..n].iter().map(|e| e.nu).collect();

    // Source discovery by exponent matching.
    let mut sources: Vec<Vec<Source>> = Vec::with_capacity(n);
    for (k, &nu_k) in nus.iter().enumerate() {
        let mut s = Vec::new();
        for (j, &g) in lattice.gammas.iter().enumerate() {
            if (g - nu_k).abs() <= NU_MERGE_TOL {
                s.push(Source::Bare { term: j });
            }
        }
        for m in 0..k {
            if (nus[m] + shift - nu_k).abs() <= NU_MERGE_TOL {
                s.push(Source::Derivative { node: m });
            }
            for (j, &g) in lattice.gammas.iter().enumerate() {
                if (g + nus[m] - nu_k).abs() <= NU_MERGE_TOL {
                    s.push(Source::Product { term: j, node: m });
                }
            }
        }
        debug_assert!(!s.is_empty(), "every lattice entry decomposes into sources");
        sources.push(s);
    }

    // xi degrees, forward.
    let mut degree = vec![0usize; n];
    for k in 0..n {
        let mut d = 0usize;
        for s in &sources[k] {
            d = d.max(match *s {
                Source::Bare { .. } => 0,
                Source::Product { node, .. } => degree[node],
                Source::Derivative { node } => degree[node] + 1,
            });
        }
        degree[k] = d;
    }

    // Product pairs per node (for the operator cross terms).
    let pairs: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|k| {
            let mut v = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if (nus[a] + nus[b] - nus[k]).abs() <= NU_MERGE_TOL {
                        v.push((a, b));
                    }
                }
            }
            v
        })
        .collect();

    // Baseline derivative needs: a node's own adjoint normal form
    // needs its own degree; appearing on the plus side of a pair, it
    // is differentiated by the partner's adjoint.
    let mut need = vec![0usize; n];
    for k in 0..n {
        need[k] = degree[k];
    }
    for pair_list in &pairs {
        for &(a, b) in pair_list {
            need[b] = need[b].max(degree[a]);
        }
    }
    // Propagate consumer requirements down the recursion: sources with
    // smaller index serve nodes with larger index, so one descending
    // pass reaches the fixpoint.
    for k in (0..n).rev() {
        for s in &sources[k] {
            match *s {
                Source::Bare { .. } => {}
                Source::Product { node, .. } => need[node] = need[node].max(need[k]),
                Source::Derivative { node } => need[node] = need[node].max(need[k] + 2),
            }
        }
    }

    let v_deriv_order = (0..n)
        .filter(|&k| {
            sources[k]
                .iter()
                .any(|s| matches!(s, Source::Bare { .. } | Source::Product { .. }))
        })
        .map(|k| need[k])
        .max()
        .unwrap_or(0);

    let mut nodes = Vec::with_capacity(n);
    let mut offset = 0usize;
    for k in 0..n {
        let node = NodePlan {
            entry_index: k,
            nu: nus[k],
            xi_degree: degree[k],
            need: need[k],
            sources: sources[k].clone(),
            xi_monos: MultiTable::new(degree[k]),
            alphas: MultiTable::new(need[k]),
            offset,
        };
        offset += node.width();
        nodes.push(node);
    }

    SymbolPlan {
        delta: lattice.delta,
        lambda,
        rho_leading: rhos[0],
        nodes,
        state_len: offset,
        v_deriv_order,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::lattice::generate_lattice;

    fn classic() -> SymbolPlan {
        let lat = generate_lattice(&[2.0, 3.0], 2.0, 8.0).unwrap();
        build_plan(&lat, 1.0, &[2.0, 3.0], usize::MAX)
    }

    #[test]
    fn multi_table_round_trips() {
        let t = MultiTable::new(4);
        assert_eq!(t.len(), 35);
        for (i, &a) in t.indices().iter().enumerate() {
            assert_eq!(t.position(a), i);
        }
        assert_eq!(t.indices()[0], [0, 0, 0]);
        assert!(t.contains([2, 1, 1]));
        assert!(!t.contains([3, 1, 1]));
    }

    #[test]
    fn binomial_products() {
        assert_eq!(multi_binomial([2, 0, 0], [1, 0, 0]), 2.0);
        assert_eq!(multi_binomial([2, 2, 0], [1, 1, 0]), 4.0);
        assert_eq!(multi_binomial([3, 0, 1], [0, 0, 0]), 1.0);
    }

    #[test]
    fn classic_sources_match_hand_derivation() {
        let plan = classic();
        // Entries are nu = 1..=8 with gamma = (1, 3), shift 3.
        let s = |k: usize| &plan.nodes[k].sources;

        assert_eq!(s(0).as_slice(), &[Source::Bare { term: 0 }]);
        assert_eq!(s(1).as_slice(), &[Source::Product { term: 0, node: 0 }]);
        // nu = 3: the second potential term arrives, along with
        // V_1 d_2.
        assert!(s(2).contains(&Source::Bare { term: 1 }));
        assert!(s(2).contains(&Source::Product { term: 0, node: 1 }));
        assert_eq!(s(2).len(), 2);
        // nu = 4: first derivative shift (of d_1) plus V_1 d_3 and
        // V_2 d_1.
        assert!(s(3).contains(&Source::Derivative { node: 0 }));
        assert!(s(3).contains(&Source::Product { term: 0, node: 2 }));
        assert!(s(3).contains(&Source::Product { term: 1, node: 0 }));
        assert_eq!(s(3).len(), 3);
    }

    #[test]
    fn xi_degrees_count_derivative_shifts() {
        let plan = classic();
        let degrees: Vec<usize> = plan.nodes.iter().map(|p| p.xi_degree).collect();
        // Shift chains: 1 -> 4 -> 7 and 2 -> 5 -> 8 and 3 -> 6.
        assert_eq!(degrees, vec![0, 0, 0, 1, 1, 1, 2, 2]);
    }

    #[test]
    fn derivative_consumers_get_two_extra_orders() {
        let plan = classic();
        for node in &plan.nodes {
            assert!(node.need >= node.xi_degree);
            for s in &node.sources {
                match *s {
                    Source::Bare { .. } => {}
                    Source::Product { node: m, .. } => {
                        assert!(plan.nodes[m].need >= node.need);
                    }
                    Source::Derivative { node: m } => {
                        assert!(plan.nodes[m].need >= node.need + 2);
                    }
                }
            }
        }
        // The leading node sits at the bottom of two derivative
        // shifts (1 -> 4 -> 7), each adding two orders to the degree-2
        // top node.
        assert_eq!(plan.nodes[6].xi_degree, 2);
        assert!(plan.nodes[0].need >= 6);
        assert!(plan.v_deriv_order >= plan.nodes[0].need);
    }

    #[test]
    fn pair_lists_are_exponent_consistent() {
        let plan = classic();
        for (k, pair_list) in plan.pairs.iter().enumerate() {
            for &(a, b) in pair_list {
                let sum = plan.nodes[a].nu + plan.nodes[b].nu;
                assert!((sum - plan.nodes[k].nu).abs() <= 1e-9);
            }
        }
        // nu = 2 decomposes only as 1 + 1.
        assert_eq!(plan.pairs[1].as_slice(), &[(0, 0)]);
        // nu = 3 as 1 + 2 and 2 + 1.
        assert_eq!(plan.pairs[2].len(), 2);
    }

    #[test]
    fn truncated_plan_stays_scalar_and_small() {
        let lat = generate_lattice(&[2.0, 3.0], 2.0, 8.0).unwrap();
        let plan = build_plan(&lat, 1.0, &[2.0, 3.0], 3);
        assert_eq!(plan.nodes.len(), 3);
        for node in &plan.nodes {
            assert_eq!(node.xi_degree, 0);
            assert_eq!(node.need, 0);
            assert_eq!(node.width(), 1);
        }
        assert_eq!(plan.state_len, 3);
        assert_eq!(plan.v_deriv_order, 0);
    }

    #[test]
    fn slots_are_disjoint_and_cover_the_state() {
        let plan = classic();
        let mut seen = vec![false; plan.state_len];
        for node in &plan.nodes {
            for &beta in node.xi_monos.indices() {
                for &alpha in node.alphas.indices() {
                    let s = node.slot(beta, alpha);
                    assert!(!seen[s]);
                    seen[s] = true;
                }
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }
}
