//! Graphs on monomial node sets, chordal extensions, and maximal cliques.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::poly::{Exponent, SupportSet};
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Complete every connected component.
    #[default]
    Maximal,
    /// Greedy minimum-degree elimination with fill-in.
    MinDegree,
}

impl std::str::FromStr for Extension {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s {
            "maximal" => Ok(Extension::Maximal),
            "min-degree" | "min_degree" | "approx_smallest" => Ok(Extension::MinDegree),
            _ => Err(CoreError::Invalid(format!("unknown extension '{s}' (expected maximal or min-degree)"))),
        }
    }
}

impl std::fmt::Display for Extension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Extension::Maximal => "maximal",
            Extension::MinDegree => "min-degree",
        })
    }
}

/// Undirected simple graph whose nodes are exponents in graded lex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialGraph {
    pub nodes: Vec<Exponent>,
    /// Sorted neighbor lists.
    adj: Vec<Vec<usize>>,
}

impl MonomialGraph {
    /// Edgeless graph; `nodes` must be strictly increasing.
    pub fn new(nodes: Vec<Exponent>) -> Self {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]), "nodes must be sorted and distinct");
        let n = nodes.len();
        Self { nodes, adj: vec![Vec::new(); n] }
    }

    pub fn from_edges(nodes: Vec<Exponent>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::new(nodes);
        for (i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub fn complete(nodes: Vec<Exponent>) -> Self {
        let n = nodes.len();
        Self { nodes, adj: (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        assert!(i != j, "self-loop");
        match self.adj[i].binary_search(&j) {
            Ok(_) => false,
            Err(p) => {
                self.adj[i].insert(p, j);
                let q = self.adj[j].binary_search(&i).unwrap_err();
                self.adj[j].insert(q, i);
                true
            }
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// `edges(self) ⊆ edges(other)` on the same node list.
    pub fn is_subgraph_of(&self, other: &MonomialGraph) -> bool {
        self.nodes == other.nodes && self.edges().all(|(i, j)| other.has_edge(i, j))
    }

    /// Connected components as sorted index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![s];
            comp[s] = id;
            let mut members = Vec::new();
            while let Some(u) = stack.pop() {
                members.push(u);
                for &w in &self.adj[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Edge list dump: one `monomial monomial` pair per line.
    pub fn edge_list(&self, names: &[String]) -> String {
        let mut out = String::new();
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{} {}", self.nodes[i].display_with(names), self.nodes[j].display_with(names));
        }
        out
    }

    /// Edge set as pairs of exponents, independent of node indexing.
    pub fn edge_set(&self) -> BTreeSet<(Exponent, Exponent)> {
        self.edges().map(|(i, j)| (self.nodes[i].clone(), self.nodes[j].clone())).collect()
    }
}

/// `supp(G) = {2β : β ∈ V} ∪ {β + γ : {β, γ} ∈ E}`.
pub fn supp_of_graph(g: &MonomialGraph) -> SupportSet {
    let dim = g.nodes.first().map_or(0, Exponent::dim);
    let mut s = SupportSet::new(dim);
    for b in &g.nodes {
        s.elements.insert(b.double());
    }
    for (i, j) in g.edges() {
        s.elements.insert(g.nodes[i].add(&g.nodes[j]));
    }
    s
}

/// A chordal graph with a perfect elimination ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChordalGraph {
    pub graph: MonomialGraph,
    /// `order[k]` is the node eliminated at step `k`.
    pub order: Vec<usize>,
}

pub fn extend(g: &MonomialGraph, kind: Extension) -> ChordalGraph {
    match kind {
        Extension::Maximal => maximal_chordal_extension(g),
        Extension::MinDegree => approx_smallest_chordal_extension(g),
    }
}

/// Completes every connected component into a clique.
pub fn maximal_chordal_extension(g: &MonomialGraph) -> ChordalGraph {
    let n = g.len();
    let mut adj = vec![Vec::new(); n];
    for comp in g.components() {
        for &u in &comp {
            adj[u] = comp.iter().copied().filter(|&w| w != u).collect();
        }
    }
    ChordalGraph { graph: MonomialGraph { nodes: g.nodes.clone(), adj }, order: (0..n).collect() }
}

/// Greedy minimum-degree elimination: repeatedly eliminate a node of least
/// current degree (ties by node index), turning its remaining neighborhood
/// into a clique.
pub fn approx_smallest_chordal_extension(g: &MonomialGraph) -> ChordalGraph {
    let n = g.len();
    let mut work: Vec<BTreeSet<usize>> = (0..n).map(|i| g.adj[i].iter().copied().collect()).collect();
    let mut out = g.clone();
    let mut alive: BTreeSet<(usize, usize)> = (0..n).map(|i| (work[i].len(), i)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = alive.pop_first() {
        order.push(v);
        let nb: Vec<usize> = work[v].iter().copied().collect();
        for &u in &nb {
            alive.remove(&(work[u].len(), u));
            work[u].remove(&v);
        }
        for (a, &x) in nb.iter().enumerate() {
            for &y in &nb[a + 1..] {
                if work[x].insert(y) {
                    work[y].insert(x);
                    out.add_edge(x, y);
                }
            }
        }
        for &u in &nb {
            alive.insert((work[u].len(), u));
        }
        work[v].clear();
    }
    ChordalGraph { graph: out, order }
}

/// Maximal cliques as sorted index sets, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueSet {
    pub cliques: Vec<Vec<usize>>,
}

impl CliqueSet {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.cliques.iter().map(Vec::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// One clique per group in `parts` (used for dense and symmetry blocks).
    pub fn from_parts(mut parts: Vec<Vec<usize>>) -> Self {
        for p in &mut parts {
            p.sort_unstable();
        }
        parts.retain(|p| !p.is_empty());
        parts.sort();
        CliqueSet { cliques: parts }
    }
}

/// Maximal cliques from the perfect elimination ordering: each node with its
/// later neighbors is a clique, and the maximal ones are kept. Fails when
/// the ordering is not perfect.
pub fn maximal_cliques(cg: &ChordalGraph) -> Result<CliqueSet, CoreError> {
    let g = &cg.graph;
    let n = g.len();
    if cg.order.len() != n {
        return Err(CoreError::Invalid("elimination order has the wrong length".into()));
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in cg.order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return Err(CoreError::Invalid("elimination order is not a permutation".into()));
        }
        pos[v] = k;
    }
    let later: Vec<Vec<usize>> =
        (0..n).map(|v| g.neighbors(v).iter().copied().filter(|&w| pos[w] > pos[v]).collect()).collect();
    // parent(v): the earliest later neighbor.
    let parent: Vec<Option<usize>> = (0..n).map(|v| later[v].iter().copied().min_by_key(|&w| pos[w])).collect();
    for v in 0..n {
        if let Some(p) = parent[v] {
            for &w in &later[v] {
                if w != p && !g.has_edge(p, w) {
                    return Err(CoreError::Invalid(format!(
                        "elimination order is not perfect: neighbors {p} and {w} of node {v} are not adjacent"
                    )));
                }
            }
        }
    }
    // The candidate at v is contained in another candidate iff some child w
    // (parent(w) = v) has exactly one more later neighbor.
    let mut absorbed = vec![false; n];
    for w in 0..n {
        if let Some(v) = parent[w] {
            if later[w].len() == later[v].len() + 1 {
                absorbed[v] = true;
            }
        }
    }
    let mut cliques: Vec<Vec<usize>> = (0..n)
        .filter(|&v| !absorbed[v])
        .map(|v| {
            let mut c = later[v].clone();
            c.push(v);
            c.sort_unstable();
            c
        })
        .collect();
    cliques.sort();
    cliques.dedup();
    Ok(CliqueSet { cliques })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::monomials;

    fn nodes(k: usize) -> Vec<Exponent> {
        monomials(1, k as u32 - 1)
    }

    #[test]
    fn supp_of_small_graphs() {
        let ns = monomials(2, 1); // 1, x1, x2
        let edgeless = MonomialGraph::new(ns[..2].to_vec());
        let s = supp_of_graph(&edgeless);
        assert_eq!(s.len(), 2);
        assert!(s.contains(&Exponent(vec![0, 0])) && s.contains(&Exponent(vec![2, 0])));
        let full = supp_of_graph(&MonomialGraph::complete(ns));
        assert_eq!(full.len(), 6);
    }

    #[test]
    fn path_becomes_triangle() {
        let g = MonomialGraph::from_edges(nodes(3), [(0, 1), (1, 2)]);
        let cg = maximal_chordal_extension(&g);
        assert_eq!(cg.graph.num_edges(), 3);
        assert_eq!(maximal_cliques(&cg).unwrap().cliques, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn four_cycle_gets_one_chord() {
        let g = MonomialGraph::from_edges(nodes(4), [(0, 1), (1, 2), (2, 3), (3, 0)]);
        let cg = approx_smallest_chordal_extension(&g);
        assert_eq!(cg.graph.num_edges(), 5);
        assert_eq!(maximal_cliques(&cg).unwrap().sizes(), vec![3, 3]);
    }

    #[test]
    fn tree_has_no_fill() {
        let g = MonomialGraph::from_edges(nodes(6), [(0, 1), (0, 2), (2, 3), (2, 4), (4, 5)]);
        let cg = approx_smallest_chordal_extension(&g);
        assert_eq!(cg.graph, g);
        assert_eq!(maximal_cliques(&cg).unwrap().cliques.len(), 5);
    }

    #[test]
    fn edgeless_and_complete_cliques() {
        let g = MonomialGraph::new(nodes(4));
        assert_eq!(maximal_cliques(&maximal_chordal_extension(&g)).unwrap().sizes(), vec![1, 1, 1, 1]);
        let k = MonomialGraph::complete(nodes(4));
        assert_eq!(maximal_cliques(&approx_smallest_chordal_extension(&k)).unwrap().cliques, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn imperfect_order_is_rejected() {
        let g = MonomialGraph::from_edges(nodes(4), [(0, 1), (1, 2), (2, 3), (3, 0)]);
        let cg = ChordalGraph { graph: g, order: vec![0, 1, 2, 3] };
        assert!(maximal_cliques(&cg).is_err());
    }
}
