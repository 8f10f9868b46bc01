//! Sign symmetries over GF(2).
//!
//! A vector `r ∈ ℤ₂ⁿ` is stored as a `u64` bit mask (bit `i` = `r_i`), so
//! `r·α mod 2` is the parity of `r & parity(α)`.

use std::collections::BTreeMap;

use crate::graphs::CliqueSet;
use crate::poly::Exponent;
use crate::sparsity::initial_support;
use crate::system::DynamicalSystem;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSymmetryGroup {
    pub dim: usize,
    /// Reduced row echelon basis; pivots are the lowest set bits, increasing.
    pub basis: Vec<u64>,
}

impl SignSymmetryGroup {
    pub fn trivial(dim: usize) -> Self {
        Self { dim, basis: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Every element of the group, sorted.
    pub fn elements(&self) -> Vec<u64> {
        let mut out = vec![0u64];
        for &b in &self.basis {
            let extra: Vec<u64> = out.iter().map(|x| x ^ b).collect();
            out.extend(extra);
        }
        out.sort_unstable();
        out
    }

    /// Canonical group spanned by `vectors`.
    pub fn span(dim: usize, vectors: impl IntoIterator<Item = u64>) -> Self {
        Self { dim, basis: rref(vectors.into_iter().collect()) }
    }

    /// `r·α ≡ 0 (mod 2)` for every `r` in the group.
    pub fn in_r_perp(&self, alpha: &Exponent) -> bool {
        let p = alpha.parity();
        self.basis.iter().all(|r| (r & p).count_ones() % 2 == 0)
    }

    /// Parity signature `(r·β mod 2)_r` over the basis, as a bit mask.
    pub fn signature(&self, beta: &Exponent) -> u64 {
        let p = beta.parity();
        self.basis
            .iter()
            .enumerate()
            .fold(0, |s, (k, r)| if (r & p).count_ones() % 2 == 1 { s | (1 << k) } else { s })
    }

    /// Bit-vector display, e.g. `(1,1,0)`.
    pub fn format_vector(&self, r: u64) -> String {
        let bits: Vec<String> = (0..self.dim).map(|i| ((r >> i) & 1).to_string()).collect();
        format!("({})", bits.join(","))
    }
}

/// Reduced row echelon form over GF(2), zero rows dropped.
fn rref(mut rows: Vec<u64>) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::new();
    for r in rows.drain(..) {
        let mut r = r;
        for &b in &basis {
            let pivot = b & b.wrapping_neg();
            if r & pivot != 0 {
                r ^= b;
            }
        }
        if r != 0 {
            let pivot = r & r.wrapping_neg();
            for b in &mut basis {
                if *b & pivot != 0 {
                    *b ^= r;
                }
            }
            basis.push(r);
        }
    }
    basis.sort_unstable_by_key(|b| b.trailing_zeros());
    basis
}

/// Null space over GF(2) of the matrix whose rows are `rows` (n columns).
pub fn gf2_null_space(rows: impl IntoIterator<Item = u64>, n: usize) -> Vec<u64> {
    let pivots = rref(rows.into_iter().collect());
    let pivot_cols: Vec<usize> = pivots.iter().map(|b| b.trailing_zeros() as usize).collect();
    let mut out = Vec::new();
    for free in 0..n {
        if pivot_cols.contains(&free) {
            continue;
        }
        // x_free = 1, other free variables 0; pivot variables from their rows.
        let mut v = 1u64 << free;
        for (row, &pc) in pivots.iter().zip(&pivot_cols) {
            if row & (1 << free) != 0 {
                v |= 1 << pc;
            }
        }
        out.push(v);
    }
    rref(out)
}

/// Sign symmetries of the system, as the GF(2) null space of the parity
/// vectors of the initial support at order `d`.
pub fn sign_symmetries(sys: &DynamicalSystem, d: u32) -> SignSymmetryGroup {
    let a1 = initial_support(sys, d);
    let rows: Vec<u64> = a1.iter().map(Exponent::parity).collect();
    SignSymmetryGroup { dim: sys.dim(), basis: gf2_null_space(rows, sys.dim()) }
}

/// Partition of `basis` by parity signature: `β` and `γ` share a block iff
/// `β + γ ∈ R^⊥`. Blocks are sorted index lists ordered by first member.
pub fn symmetry_blocks(group: &SignSymmetryGroup, basis: &[Exponent]) -> Vec<Vec<usize>> {
    let mut by_sig: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, b) in basis.iter().enumerate() {
        by_sig.entry(group.signature(b)).or_default().push(i);
    }
    let mut blocks: Vec<Vec<usize>> = by_sig.into_values().collect();
    blocks.sort();
    blocks
}

/// Whether the maximal cliques, as node sets, are exactly the blocks.
pub fn blocks_equal(cliques: &CliqueSet, blocks: &[Vec<usize>]) -> bool {
    let mut a = cliques.cliques.clone();
    let mut b: Vec<Vec<usize>> = blocks.to_vec();
    for x in a.iter_mut().chain(b.iter_mut()) {
        x.sort_unstable();
    }
    a.sort();
    b.sort();
    a == b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::monomials;

    #[test]
    fn null_space_of_single_row() {
        // rows {x1+x2}: null space spanned by (1,1,0) and (0,0,1).
        let ns = gf2_null_space([0b011], 3);
        assert_eq!(SignSymmetryGroup::span(3, ns.clone()).elements(), vec![0, 0b011, 0b100, 0b111]);
        for v in ns {
            assert_eq!((v & 0b011).count_ones() % 2, 0);
        }
    }

    #[test]
    fn r_perp_membership() {
        let g = SignSymmetryGroup::span(3, [0b011]);
        assert!(g.in_r_perp(&Exponent(vec![1, 1, 0])));
        assert!(g.in_r_perp(&Exponent(vec![0, 0, 1])));
        assert!(!g.in_r_perp(&Exponent(vec![1, 0, 0])));
        assert!(SignSymmetryGroup::trivial(3).in_r_perp(&Exponent(vec![1, 0, 0])));
    }

    #[test]
    fn lorenz_blocks_on_quadratic_basis() {
        let g = SignSymmetryGroup::span(3, [0b011]);
        let basis = monomials(3, 2);
        let blocks = symmetry_blocks(&g, &basis);
        let shown: Vec<Vec<String>> =
            blocks.iter().map(|b| b.iter().map(|&i| basis[i].to_string()).collect()).collect();
        assert_eq!(shown[0], ["1", "x3", "x1^2", "x1*x2", "x2^2", "x3^2"]);
        assert_eq!(shown[1], ["x1", "x2", "x1*x3", "x2*x3"]);
        assert_eq!(symmetry_blocks(&SignSymmetryGroup::trivial(3), &basis).len(), 1);
    }
}
