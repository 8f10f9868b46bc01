//! Brute-force reference implementations, independent of the library code
//! they check. Only exponent sets and polynomial evaluation are shared.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsdyn_core::{DynamicalSystem, Exponent, MonomialGraph, Polynomial};

fn flip(x: &[f64], r: u64) -> Vec<f64> {
    x.iter().enumerate().map(|(i, &v)| if (r >> i) & 1 == 1 { -v } else { v }).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Every `r ∈ ℤ₂ⁿ` with `f_i(σ_r x) = (−1)^{r_i} f_i(x)` and
/// `p_j(σ_r x) = p_j(x)`, checked by evaluation at random points. Sorted.
pub fn sign_symmetries(sys: &DynamicalSystem) -> Vec<u64> {
    let n = sys.dim();
    assert!(n <= 16, "brute force is exponential in n");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let points: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.gen_range(-1.3..1.3)).collect()).collect();
    let mut out = Vec::new();
    for r in 0..(1u64 << n) {
        let ok = points.iter().all(|x| {
            let y = flip(x, r);
            let field_ok = sys.field.iter().enumerate().all(|(i, f)| {
                let sign = if (r >> i) & 1 == 1 { -1.0 } else { 1.0 };
                close(f.eval(&y), sign * f.eval(x))
            });
            field_ok && sys.constraints.iter().all(|p| close(p.eval(&y), p.eval(x)))
        });
        if ok {
            out.push(r);
        }
    }
    out
}

/// Whether `r·α` is even for every `r` in `group`.
pub fn invariant(group: &[u64], alpha: &Exponent) -> bool {
    group.iter().all(|&r| alpha.0.iter().enumerate().map(|(i, &a)| ((r >> i) & 1) as u32 * a as u32).sum::<u32>() % 2 == 0)
}

/// Classes of `basis` under `β ~ γ ⇔ β + γ` invariant. Sorted index lists,
/// sorted by first member.
pub fn symmetry_classes(group: &[u64], basis: &[Exponent]) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, b) in basis.iter().enumerate() {
        match classes.iter_mut().find(|c| invariant(group, &basis[c[0]].add(b))) {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }
    classes.sort();
    classes
}

pub fn adjacency(g: &MonomialGraph) -> Vec<Vec<bool>> {
    let n = g.len();
    (0..n).map(|i| (0..n).map(|j| i != j && g.has_edge(i, j)).collect()).collect()
}

fn connected(adj: &[Vec<bool>], nodes: &[usize]) -> bool {
    let mut seen = vec![nodes[0]];
    let mut k = 0;
    while k < seen.len() {
        let u = seen[k];
        for &w in nodes {
            if adj[u][w] && !seen.contains(&w) {
                seen.push(w);
            }
        }
        k += 1;
    }
    seen.len() == nodes.len()
}

/// No induced cycle of length at least 4: no vertex subset of size ≥ 4 whose
/// induced subgraph is connected and 2-regular.
pub fn is_chordal(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    assert!(n <= 14, "brute force is exponential in the node count");
    for mask in 0u32..(1 << n) {
        if mask.count_ones() < 4 {
            continue;
        }
        let nodes: Vec<usize> = (0..n).filter(|&i| (mask >> i) & 1 == 1).collect();
        let two_regular = nodes.iter().all(|&u| nodes.iter().filter(|&&w| adj[u][w]).count() == 2);
        if two_regular && connected(adj, &nodes) {
            return false;
        }
    }
    true
}

/// Maximal cliques by subset enumeration, sorted.
pub fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    assert!(n <= 14, "brute force is exponential in the node count");
    let cliques: Vec<u32> = (1u32..(1 << n))
        .filter(|&m| (0..n).all(|i| (0..n).all(|j| i == j || (m >> i) & 1 == 0 || (m >> j) & 1 == 0 || adj[i][j])))
        .collect();
    let mut out: Vec<Vec<usize>> = cliques
        .iter()
        .filter(|&&m| !cliques.iter().any(|&o| o != m && o & m == m))
        .map(|&m| (0..n).filter(|&i| (m >> i) & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

/// `supp(p·q)` by direct term products, with cancellation.
pub fn product_support(p: &Polynomial, q: &Polynomial) -> Vec<Exponent> {
    let mut acc: std::collections::BTreeMap<Exponent, f64> = Default::default();
    for (a, ca) in p.terms() {
        for (b, cb) in q.terms() {
            let e = Exponent(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect());
            *acc.entry(e).or_default() += ca * cb;
        }
    }
    acc.into_iter().filter(|(_, c)| *c != 0.0).map(|(e, _)| e).collect()
}

/// Cholesky without pivoting on a row-major `n × n` matrix.
pub fn is_positive_definite(b: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = b[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag <= 0.0 {
            return false;
        }
        l[j * n + j] = diag.sqrt();
        for i in j + 1..n {
            let mut v = b[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / l[j * n + j];
        }
    }
    true
}

/// `r` with `B_ij = 0` whenever `r_i + r_j` is odd, for the random quadratic
/// gain models. Sorted.
pub fn b_sparsity_symmetries(b: &[f64], n: usize) -> Vec<u64> {
    (0..(1u64 << n))
        .filter(|&r| (0..n).all(|i| (0..n).all(|j| ((r >> i) ^ (r >> j)) & 1 == 0 || b[i * n + j] == 0.0)))
        .collect()
}
