//! Iterative term sparsity: support chains for `v` and `w` and the sparsity
//! graphs imposed on the Gram matrices of `a_j`, `b_j`, `c_j`.
//!
//! Chains stop as soon as a support set repeats; the accessors saturate so
//! that asking for a later step returns the stabilized set or graph.

use std::collections::HashSet;

use crate::graphs::{extend, supp_of_graph, ChordalGraph, Extension, MonomialGraph};
use crate::poly::{generic_lie_support, monomials, Exponent, SupportSet};
use crate::system::DynamicalSystem;

/// Gram basis of the `j`-th certificate: `ℕⁿ_{d − ⌈d_j/2⌉}` (`d_0 = 0`).
/// Empty when the constraint degree exceeds `2d`.
pub fn vertex_basis(sys: &DynamicalSystem, d: u32, j: usize) -> Vec<Exponent> {
    let half = sys.d_j(j).div_ceil(2);
    if half > d {
        return Vec::new();
    }
    monomials(sys.dim(), d - half)
}

/// Degree bound for `v`: `2d + 1 − d_f`, capped at `2d`.
pub fn v_degree(sys: &DynamicalSystem, d: u32) -> u32 {
    (2 * d + 1).saturating_sub(sys.d_f()).min(2 * d)
}

/// `𝒜 ∪ supp(∇v·f) ∪ 2ℕⁿ_d` with `𝒜 = ⋃_j supp(p_j)` and `v` generic on `𝒜`.
pub fn initial_support(sys: &DynamicalSystem, d: u32) -> SupportSet {
    let n = sys.dim();
    let mut a = SupportSet::new(n);
    for p in &sys.constraints {
        a = a.union(&p.support());
    }
    let mut out = a.union(&generic_lie_support(&a, &sys.field));
    for b in monomials(n, d) {
        out.insert(b.double());
    }
    out
}

fn graph_from_target(nodes: Vec<Exponent>, shifts: &[Exponent], target: &HashSet<Exponent>) -> MonomialGraph {
    let k = nodes.len();
    let mut edges = Vec::new();
    for i in 0..k {
        for l in i + 1..k {
            if shifts.iter().any(|s| target.contains(&Exponent::add3(&nodes[i], &nodes[l], s))) {
                edges.push((i, l));
            }
        }
    }
    MonomialGraph::from_edges(nodes, edges)
}

fn shifts(sys: &DynamicalSystem, j: usize) -> Vec<Exponent> {
    sys.p(j).support().elements.into_iter().collect()
}

/// Sparsity graph for the Gram matrix of `a_j`: `{β, γ}` is an edge iff
/// `(β + γ + supp(p_j)) ∩ (𝒜 ∪ supp(∇v·f)) ≠ ∅`, with `v` generic on
/// `𝒜 ∩ ℕⁿ_{2d+1−d_f}`.
pub fn build_g_graph(sys: &DynamicalSystem, d: u32, a_set: &SupportSet, j: usize) -> MonomialGraph {
    let v_supp = a_set.truncate(v_degree(sys, d));
    let lie = generic_lie_support(&v_supp, &sys.field);
    let target: HashSet<Exponent> = a_set.iter().chain(lie.iter()).cloned().collect();
    graph_from_target(vertex_basis(sys, d, j), &shifts(sys, j), &target)
}

/// Sparsity graph for the Gram matrices of `b_j` and `c_j`: `{β, γ}` is an
/// edge iff `(β + γ + supp(p_j)) ∩ ℬ ≠ ∅`.
pub fn build_h_graph(sys: &DynamicalSystem, d: u32, b_set: &SupportSet, j: usize) -> MonomialGraph {
    let target: HashSet<Exponent> = b_set.iter().cloned().collect();
    graph_from_target(vertex_basis(sys, d, j), &shifts(sys, j), &target)
}

#[derive(Debug, Clone)]
pub struct SupportChain {
    /// `𝒜¹ ⊆ 𝒜² ⊆ …`
    pub a_sets: Vec<SupportSet>,
    /// `G^s_j` before extension, indexed `[s − 1][j]`.
    pub g_graphs: Vec<Vec<MonomialGraph>>,
    /// `(G^s_j)′`
    pub g_extended: Vec<Vec<ChordalGraph>>,
    pub stabilized_s: bool,
}

impl SupportChain {
    /// `𝒜^s`, saturating at the last computed set.
    pub fn a_set(&self, s: usize) -> &SupportSet {
        &self.a_sets[s.clamp(1, self.a_sets.len()) - 1]
    }

    pub fn g(&self, s: usize, j: usize) -> &MonomialGraph {
        &self.g_graphs[s.clamp(1, self.g_graphs.len()) - 1][j]
    }

    pub fn g_ext(&self, s: usize, j: usize) -> &ChordalGraph {
        &self.g_extended[s.clamp(1, self.g_extended.len()) - 1][j]
    }

    /// First `s` with `𝒜^s = 𝒜^{s+1}`, if reached.
    pub fn stabilization_index(&self) -> Option<usize> {
        self.stabilized_s.then_some(self.a_sets.len())
    }
}

/// Runs `G^s → (G^s)′ → 𝒜^{s+1} = supp((G^s_0)′)` for `s = 1..=s_max`,
/// stopping early at a fixed point.
pub fn iterate_v_chain(sys: &DynamicalSystem, d: u32, extension: Extension, s_max: usize) -> SupportChain {
    let m = sys.num_constraints();
    let mut chain = SupportChain {
        a_sets: vec![initial_support(sys, d)],
        g_graphs: Vec::new(),
        g_extended: Vec::new(),
        stabilized_s: false,
    };
    for _ in 0..s_max.max(1) {
        let cur = chain.a_sets.last().expect("chain is nonempty").clone();
        let raw: Vec<MonomialGraph> = (0..=m).map(|j| build_g_graph(sys, d, &cur, j)).collect();
        let ext: Vec<ChordalGraph> = raw.iter().map(|g| extend(g, extension)).collect();
        let next = supp_of_graph(&ext[0].graph).union(&cur);
        chain.g_graphs.push(raw);
        chain.g_extended.push(ext);
        if next == cur {
            chain.stabilized_s = true;
            break;
        }
        chain.a_sets.push(next);
    }
    chain
}

#[derive(Debug, Clone)]
pub struct WChain {
    /// `ℬ^{s,1} = 𝒜^s ⊆ ℬ^{s,2} ⊆ …`
    pub b_sets: Vec<SupportSet>,
    /// `H^{s,l}_j` before extension, indexed `[l − 1][j]`.
    pub h_graphs: Vec<Vec<MonomialGraph>>,
    pub h_extended: Vec<Vec<ChordalGraph>>,
    pub stabilized_l: bool,
}

impl WChain {
    pub fn b_set(&self, l: usize) -> &SupportSet {
        &self.b_sets[l.clamp(1, self.b_sets.len()) - 1]
    }

    pub fn h(&self, l: usize, j: usize) -> &MonomialGraph {
        &self.h_graphs[l.clamp(1, self.h_graphs.len()) - 1][j]
    }

    pub fn h_ext(&self, l: usize, j: usize) -> &ChordalGraph {
        &self.h_extended[l.clamp(1, self.h_extended.len()) - 1][j]
    }

    pub fn stabilization_index(&self) -> Option<usize> {
        self.stabilized_l.then_some(self.b_sets.len())
    }
}

/// Runs `H^{s,l} → (H^{s,l})′ → ℬ^{s,l+1} = ⋃_j supp(p_j) + supp((H^{s,l}_j)′)`
/// from `ℬ^{s,1} = 𝒜^s`, for `l = 1..=l_max`.
pub fn iterate_w_chain(
    sys: &DynamicalSystem,
    d: u32,
    a_set_s: &SupportSet,
    extension: Extension,
    l_max: usize,
) -> WChain {
    let m = sys.num_constraints();
    let mut chain =
        WChain { b_sets: vec![a_set_s.clone()], h_graphs: Vec::new(), h_extended: Vec::new(), stabilized_l: false };
    for _ in 0..l_max.max(1) {
        let cur = chain.b_sets.last().expect("chain is nonempty").clone();
        let raw: Vec<MonomialGraph> = (0..=m).map(|j| build_h_graph(sys, d, &cur, j)).collect();
        let ext: Vec<ChordalGraph> = raw.iter().map(|g| extend(g, extension)).collect();
        let mut next = cur.clone();
        for (j, cg) in ext.iter().enumerate() {
            next = next.union(&sys.p(j).support().minkowski(&supp_of_graph(&cg.graph)));
        }
        chain.h_graphs.push(raw);
        chain.h_extended.push(ext);
        if next == cur {
            chain.stabilized_l = true;
            break;
        }
        chain.b_sets.push(next);
    }
    chain
}
