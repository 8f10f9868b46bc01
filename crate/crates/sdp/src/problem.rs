//! Standard-form block SDP with free variables.
//!
//! The primal problem is
//!
//! ```text
//! minimize    Σ_k <C_k, X_k> + cᵀx
//! subject to  Σ_k <A_ik, X_k> + (B x)_i = b_i      for every constraint i
//!             X_k ⪰ 0 (PSD blocks) or X_k ≥ 0 entrywise (diagonal blocks)
//!             x free
//! ```
//!
//! Symmetric matrices are given by their upper triangle. An entry `(r, c)`
//! with `r < c` and value `v` stands for `v` at both `(r, c)` and `(c, r)`,
//! so it contributes `2 v X[r, c]` to the inner product, matching the SDPA
//! convention.

use std::fmt::Write as _;

use crate::SdpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Symmetric positive semidefinite block.
    Psd,
    /// Nonnegative diagonal (linear) block; only diagonal entries may appear.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    pub dim: usize,
    pub kind: BlockKind,
}

/// One upper-triangular entry of a block coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl BlockEntry {
    pub fn new(block: usize, row: usize, col: usize, value: f64) -> Self {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        Self { block, row, col, value }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearForm {
    /// `(free variable index, coefficient)`
    pub free: Vec<(usize, f64)>,
    pub entries: Vec<BlockEntry>,
}

impl LinearForm {
    pub fn is_empty(&self) -> bool {
        self.free.is_empty() && self.entries.is_empty()
    }

    /// Evaluates the form at a point.
    pub fn eval(&self, blocks: &[Vec<f64>], dims: &[usize], free: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(k, a) in &self.free {
            acc += a * free[k];
        }
        for e in &self.entries {
            let n = dims[e.block];
            let x = blocks[e.block][e.row * n + e.col];
            acc += if e.row == e.col { e.value * x } else { 2.0 * e.value * x };
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub lhs: LinearForm,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub free_vars: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub objective: LinearForm,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, label: impl Into<String>, dim: usize, kind: BlockKind) -> usize {
        self.blocks.push(Block { label: label.into(), dim, kind });
        self.blocks.len() - 1
    }

    pub fn add_free_var(&mut self, label: impl Into<String>) -> usize {
        self.free_vars.push(label.into());
        self.free_vars.len() - 1
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, lhs: LinearForm, rhs: f64) -> usize {
        self.constraints.push(Constraint { label: label.into(), lhs, rhs });
        self.constraints.len() - 1
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    /// Number of distinct scalar matrix variables (upper triangles of PSD
    /// blocks, diagonals of linear blocks).
    pub fn num_matrix_scalars(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Psd => b.dim * (b.dim + 1) / 2,
                BlockKind::Diagonal => b.dim,
            })
            .sum()
    }

    /// Checks that every form references declared blocks and variables only.
    pub fn validate(&self) -> Result<(), SdpError> {
        let check = |form: &LinearForm, what: &str| -> Result<(), SdpError> {
            for &(k, a) in &form.free {
                if k >= self.free_vars.len() {
                    return Err(SdpError::Malformed(format!("{what}: free variable {k} undeclared")));
                }
                if !a.is_finite() {
                    return Err(SdpError::Malformed(format!("{what}: non-finite coefficient")));
                }
            }
            for e in &form.entries {
                let Some(b) = self.blocks.get(e.block) else {
                    return Err(SdpError::Malformed(format!("{what}: block {} undeclared", e.block)));
                };
                if e.row > e.col || e.col >= b.dim {
                    return Err(SdpError::Malformed(format!(
                        "{what}: entry ({}, {}) outside upper triangle of block {} (dim {})",
                        e.row, e.col, e.block, b.dim
                    )));
                }
                if b.kind == BlockKind::Diagonal && e.row != e.col {
                    return Err(SdpError::Malformed(format!(
                        "{what}: off-diagonal entry in diagonal block {}",
                        e.block
                    )));
                }
                if !e.value.is_finite() {
                    return Err(SdpError::Malformed(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        for b in &self.blocks {
            if b.dim == 0 {
                return Err(SdpError::Malformed(format!("block {} has dimension 0", b.label)));
            }
        }
        check(&self.objective, "objective")?;
        for c in &self.constraints {
            check(&c.lhs, &c.label)?;
            if !c.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("{}: non-finite right-hand side", c.label)));
            }
        }
        Ok(())
    }

    /// Primal objective at a point.
    pub fn primal_objective(&self, blocks: &[Vec<f64>], free: &[f64]) -> f64 {
        self.objective.eval(blocks, &self.block_dims(), free)
    }

    /// Constraint residuals `b_i - lhs_i(X, x)`.
    pub fn primal_residuals(&self, blocks: &[Vec<f64>], free: &[f64]) -> Vec<f64> {
        let dims = self.block_dims();
        self.constraints
            .iter()
            .map(|c| c.rhs - c.lhs.eval(blocks, &dims, free))
            .collect()
    }

    /// Short human-readable summary: block sizes, variable and constraint counts.
    pub fn digest(&self) -> String {
        let mut out = String::new();
        let mut sizes: Vec<usize> = self.blocks.iter().map(|b| b.dim).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let _ = writeln!(out, "blocks: {}", self.blocks.len());
        let _ = writeln!(out, "block sizes: {sizes:?}");
        let _ = writeln!(out, "matrix scalars: {}", self.num_matrix_scalars());
        let _ = writeln!(out, "free variables: {}", self.free_vars.len());
        let _ = writeln!(out, "constraints: {}", self.constraints.len());
        out
    }
}
