//! Primal–dual interior-point method for [`SdpProblem`].
//!
//! Infeasible-start path following with the HKM search direction and a
//! Mehrotra predictor–corrector step. Free variables stay free: each Newton
//! step solves the augmented system
//!
//! ```text
//! [ M   B ] [dy]   [h ]
//! [ Bᵀ  0 ] [dx] = [rf]
//! ```
//!
//! where `M_ij = tr(A_i X A_j Z⁻¹)` is the dense Schur complement. The system
//! is reduced with `K = M + γ B Bᵀ`, which is positive definite whenever the
//! full constraint matrix has full row rank, even if some rows touch free
//! variables only.
//!
//! Constraint matrices are handled in "lifted" form: inside a block, entries
//! that carry identical coefficient columns across all constraints (and the
//! objective) share one lifted index. For Gram-matrix coefficient matching
//! these classes are exactly the monomial sums `β + γ`, which collapses the
//! Schur complement work to one `n⁴` sweep per block.

use std::collections::HashMap;
use std::time::Instant;

use faer::{Mat, MatRef, Side};

use crate::problem::{BlockKind, SdpProblem};
use crate::SdpError;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative duality gap target.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility target.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Residuals within `near_optimal_factor` times the tolerances earn
    /// [`SolveStatus::NearOptimal`] when the iteration cannot make progress.
    pub near_optimal_factor: f64,
    /// Print one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-7, feas_tol: 1e-7, max_iter: 200, near_optimal_factor: 1e3, verbose: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    MaxIter,
    /// Iterates diverged; the problem is probably infeasible or unbounded.
    /// This is a heuristic flag, not a certificate.
    InfeasibleFlag,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near_optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::InfeasibleFlag => "infeasible_flag",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `‖b − A(X) − Bx‖ / (1 + ‖b‖)`
    pub primal_infeasibility: f64,
    /// `‖(C − Aᵀy − Z, c − Bᵀy)‖ / (1 + ‖(C, c)‖)`
    pub dual_infeasibility: f64,
    /// `|p − d| / (1 + |p| + |d|)`
    pub relative_gap: f64,
    /// Bound on how far `primal − dual` may fall below zero at an
    /// infeasible iterate: `|<R_d, X>| + |r_fᵀx| + |yᵀr_p|`.
    pub duality_slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub mu: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Primal objective of the returned iterate.
    pub objective: f64,
    pub dual_objective: f64,
    /// Dense column-major `dim × dim` values, one per problem block
    /// (diagonal blocks are returned as diagonal matrices).
    pub block_values: Vec<Vec<f64>>,
    pub free_values: Vec<f64>,
    /// Dual multipliers, one per constraint.
    pub duals: Vec<f64>,
    /// Dual slack matrices in the same layout as `block_values`.
    pub dual_slacks: Vec<Vec<f64>>,
    /// Recomputed from the returned iterate against the original problem.
    pub residuals: Residuals,
    pub iterations: usize,
    pub seconds: f64,
    pub trace: Vec<IterationRecord>,
}

impl SdpSolution {
    /// Smallest eigenvalue of each returned primal block.
    pub fn block_min_eigenvalues(&self, problem: &SdpProblem) -> Vec<f64> {
        problem
            .blocks
            .iter()
            .zip(&self.block_values)
            .map(|(b, v)| min_eigenvalue(MatRef::from_column_major_slice(v, b.dim, b.dim)))
            .collect()
    }

    /// Eigenvalues of a returned primal block, ascending.
    pub fn block_spectrum(&self, problem: &SdpProblem, block: usize) -> Vec<f64> {
        let n = problem.blocks[block].dim;
        let m = MatRef::from_column_major_slice(&self.block_values[block], n, n);
        m.self_adjoint_eigenvalues(Side::Lower).unwrap_or_default()
    }
}

pub(crate) fn min_eigenvalue(m: MatRef<'_, f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .ok()
        .and_then(|v| v.first().copied())
        .unwrap_or(f64::NAN)
}

struct BlockPlan {
    n: usize,
    /// `n × n` symmetric table of lifted ids (or `NONE`).
    lift: Vec<u32>,
    /// Upper-triangular member pairs of each lifted id.
    members: Vec<Vec<(u32, u32)>>,
    /// Constraint coefficients of each lifted id.
    rows: Vec<Vec<(u32, f64)>>,
    /// Objective coefficient of each lifted id.
    obj: Vec<f64>,
}

impl BlockPlan {
    fn n_lift(&self) -> usize {
        self.members.len()
    }

    /// `<E_σ, Y>` for every lifted id; `Y` need not be symmetric.
    fn lifted_inner(&self, y: MatRef<'_, f64>) -> Vec<f64> {
        self.members
            .iter()
            .map(|pairs| {
                pairs
                    .iter()
                    .map(|&(a, b)| {
                        let (a, b) = (a as usize, b as usize);
                        if a == b {
                            y[(a, a)]
                        } else {
                            y[(a, b)] + y[(b, a)]
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// `Σ_σ coeffs[σ] E_σ` as a dense matrix.
    fn expand(&self, coeffs: &[f64]) -> Mat<f64> {
        let n = self.n;
        Mat::from_fn(n, n, |i, j| {
            let s = self.lift[i * n + j];
            if s == NONE {
                0.0
            } else {
                coeffs[s as usize]
            }
        })
    }

    /// Lifted Schur block `M'[σ, σ'] = tr(E_σ X E_σ' Z⁻¹)`, accumulated into
    /// a row-major `L × L` buffer.
    fn schur(&self, x: &Mat<f64>, zinv: &Mat<f64>, out: &mut [f64]) {
        let n = self.n;
        let l = self.n_lift();
        let t = &self.lift;
        for a in 0..n {
            let xa = x.col_as_slice(a);
            let za = zinv.col_as_slice(a);
            for b in a..n {
                let s = t[a * n + b];
                if s == NONE {
                    continue;
                }
                let xb = x.col_as_slice(b);
                let zb = zinv.col_as_slice(b);
                let row = &mut out[s as usize * l..(s as usize + 1) * l];
                let wab = if a == b { 0.5 } else { 1.0 };
                for c in 0..n {
                    let trow = &t[c * n..(c + 1) * n];
                    let (xbc, xac, zac, zbc) = (xb[c], xa[c], za[c], zb[c]);
                    let sc = trow[c];
                    if sc != NONE {
                        row[sc as usize] += wab * (xbc * zac + xac * zbc);
                    }
                    for d in c + 1..n {
                        let sd = trow[d];
                        if sd == NONE {
                            continue;
                        }
                        row[sd as usize] += wab * (xbc * za[d] + xb[d] * zac + xac * zb[d] + xa[d] * zbc);
                    }
                }
            }
        }
    }
}

struct Plan {
    blocks: Vec<BlockPlan>,
    /// internal block → (problem block, diagonal position for linear blocks)
    origin: Vec<(usize, Option<usize>)>,
    m: usize,
    b: Vec<f64>,
    free_cols: Vec<Vec<(u32, f64)>>,
    c_free: Vec<f64>,
}

impl Plan {
    fn build(problem: &SdpProblem) -> Self {
        let m = problem.constraints.len();
        let mut origin = Vec::new();
        let mut base = Vec::with_capacity(problem.blocks.len());
        for (k, blk) in problem.blocks.iter().enumerate() {
            base.push(origin.len());
            match blk.kind {
                BlockKind::Psd => origin.push((k, None)),
                BlockKind::Diagonal => (0..blk.dim).for_each(|p| origin.push((k, Some(p)))),
            }
        }
        let dims: Vec<usize> = origin
            .iter()
            .map(|&(k, p)| if p.is_some() { 1 } else { problem.blocks[k].dim })
            .collect();

        // (internal block) -> (r, c) -> coefficient column
        let mut sigs: Vec<HashMap<(u32, u32), Vec<(u32, f64)>>> = vec![HashMap::new(); origin.len()];
        let mut push = |row: u32, e: &crate::problem::BlockEntry| {
            let (ib, r, c) = match problem.blocks[e.block].kind {
                BlockKind::Psd => (base[e.block], e.row as u32, e.col as u32),
                BlockKind::Diagonal => (base[e.block] + e.row, 0, 0),
            };
            sigs[ib].entry((r, c)).or_default().push((row, e.value));
        };
        for (i, con) in problem.constraints.iter().enumerate() {
            for e in &con.lhs.entries {
                push(i as u32, e);
            }
        }
        for e in &problem.objective.entries {
            push(m as u32, e);
        }

        let blocks = sigs
            .into_iter()
            .zip(&dims)
            .map(|(sig, &n)| {
                let mut pairs: Vec<((u32, u32), Vec<(u32, f64)>)> = sig.into_iter().collect();
                pairs.sort_unstable_by_key(|(k, _)| *k);
                let mut lift = vec![NONE; n * n];
                let mut ids: HashMap<Vec<(u32, u64)>, u32> = HashMap::new();
                let mut members: Vec<Vec<(u32, u32)>> = Vec::new();
                let mut columns: Vec<Vec<(u32, f64)>> = Vec::new();
                for ((r, c), mut col) in pairs {
                    col.sort_by_key(|&(i, _)| i);
                    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(col.len());
                    for (i, v) in col {
                        match merged.last_mut() {
                            Some(last) if last.0 == i => last.1 += v,
                            _ => merged.push((i, v)),
                        }
                    }
                    merged.retain(|&(_, v)| v != 0.0);
                    if merged.is_empty() {
                        continue;
                    }
                    let key: Vec<(u32, u64)> = merged.iter().map(|&(i, v)| (i, v.to_bits())).collect();
                    let id = *ids.entry(key).or_insert_with(|| {
                        members.push(Vec::new());
                        columns.push(merged);
                        (members.len() - 1) as u32
                    });
                    members[id as usize].push((r, c));
                    lift[r as usize * n + c as usize] = id;
                    lift[c as usize * n + r as usize] = id;
                }
                let mut rows = Vec::with_capacity(columns.len());
                let mut obj = Vec::with_capacity(columns.len());
                for mut col in columns {
                    let o = match col.last() {
                        Some(&(i, v)) if i as usize == m => {
                            col.pop();
                            v
                        }
                        _ => 0.0,
                    };
                    rows.push(col);
                    obj.push(o);
                }
                BlockPlan { n, lift, members, rows, obj }
            })
            .collect();

        let nfree = problem.free_vars.len();
        let mut free_cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nfree];
        for (i, con) in problem.constraints.iter().enumerate() {
            for &(k, v) in &con.lhs.free {
                free_cols[k].push((i as u32, v));
            }
        }
        for col in &mut free_cols {
            col.sort_by_key(|&(i, _)| i);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(col.len());
            for &(i, v) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += v,
                    _ => merged.push((i, v)),
                }
            }
            merged.retain(|&(_, v)| v != 0.0);
            *col = merged;
        }
        let mut c_free = vec![0.0; nfree];
        for &(k, v) in &problem.objective.free {
            c_free[k] += v;
        }
        let b = problem.constraints.iter().map(|c| c.rhs).collect();
        Plan { blocks, origin, m, b, free_cols, c_free }
    }

    fn nfree(&self) -> usize {
        self.free_cols.len()
    }

    /// `A(Y)` summed over blocks.
    fn apply_a(&self, mats: &[Mat<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (bp, y) in self.blocks.iter().zip(mats) {
            let e = bp.lifted_inner(y.as_ref());
            for (s, rows) in bp.rows.iter().enumerate() {
                for &(i, p) in rows {
                    out[i as usize] += p * e[s];
                }
            }
        }
        out
    }

    fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (col, &v) in self.free_cols.iter().zip(x) {
            for &(i, p) in col {
                out[i as usize] += p * v;
            }
        }
        out
    }

    fn apply_bt(&self, y: &[f64]) -> Vec<f64> {
        self.free_cols
            .iter()
            .map(|col| col.iter().map(|&(i, p)| p * y[i as usize]).sum())
            .collect()
    }

    /// `C_k − A_kᵀ(y)` for every block.
    fn dual_matrices(&self, y: &[f64]) -> Vec<Mat<f64>> {
        self.blocks
            .iter()
            .map(|bp| {
                let coeffs: Vec<f64> = bp
                    .rows
                    .iter()
                    .zip(&bp.obj)
                    .map(|(rows, &o)| o - rows.iter().map(|&(i, p)| p * y[i as usize]).sum::<f64>())
                    .collect();
                bp.expand(&coeffs)
            })
            .collect()
    }

    /// `A_kᵀ(y)` without the objective.
    fn adjoint(&self, y: &[f64]) -> Vec<Mat<f64>> {
        self.blocks
            .iter()
            .map(|bp| {
                let coeffs: Vec<f64> =
                    bp.rows.iter().map(|rows| rows.iter().map(|&(i, p)| p * y[i as usize]).sum()).collect();
                bp.expand(&coeffs)
            })
            .collect()
    }

    fn primal_objective(&self, x: &[Mat<f64>], xf: &[f64]) -> f64 {
        let mut acc: f64 = self.c_free.iter().zip(xf).map(|(c, v)| c * v).sum();
        for (bp, xb) in self.blocks.iter().zip(x) {
            if bp.obj.iter().all(|&o| o == 0.0) {
                continue;
            }
            let e = bp.lifted_inner(xb.as_ref());
            acc += bp.obj.iter().zip(&e).map(|(o, v)| o * v).sum::<f64>();
        }
        acc
    }
}

fn frob(m: &Mat<f64>) -> f64 {
    m.norm_l2()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        acc += dot(a.col_as_slice(j), b.col_as_slice(j));
    }
    acc
}

fn sym(m: Mat<f64>) -> Mat<f64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

fn spd_inverse(m: &Mat<f64>) -> Option<Mat<f64>> {
    let llt = m.llt(Side::Lower).ok()?;
    let n = m.nrows();
    let mut inv = Mat::<f64>::identity(n, n);
    llt.L().solve_lower_triangular_in_place(inv.as_mut());
    llt.L().transpose().solve_upper_triangular_in_place(inv.as_mut());
    Some(sym(inv))
}

/// Largest `α` with `X + α dX ⪰ 0` (infinite when `dX ⪰ 0`).
fn max_step(x: &Mat<f64>, dx: &Mat<f64>) -> Option<f64> {
    let n = x.nrows();
    let lam = if n == 1 {
        dx[(0, 0)] / x[(0, 0)]
    } else {
        let llt = x.llt(Side::Lower).ok()?;
        let mut w = dx.clone();
        llt.L().solve_lower_triangular_in_place(w.as_mut());
        let mut wt = w.transpose().to_owned();
        llt.L().solve_lower_triangular_in_place(wt.as_mut());
        min_eigenvalue(sym(wt).as_ref())
    };
    if lam.is_nan() {
        return None;
    }
    Some(if lam >= 0.0 { f64::INFINITY } else { -1.0 / lam })
}

struct Kkt {
    /// Unregularized Schur complement, kept for iterative refinement.
    m: Mat<f64>,
    /// Cholesky factor of `M + γ B Bᵀ`.
    l: Mat<f64>,
    /// `L⁻¹ B`
    w: Mat<f64>,
    /// Cholesky factor of `Wᵀ W`.
    s: Option<Mat<f64>>,
    gamma: f64,
}

impl Kkt {
    fn factor(plan: &Plan, schur: Mat<f64>) -> Result<Self, String> {
        let m = plan.m;
        let mut k = schur.clone();
        let nfree = plan.nfree();
        let mut gamma = 0.0;
        if nfree > 0 {
            let mut bbt_diag = vec![0.0; m];
            for col in &plan.free_cols {
                for &(i, p) in col {
                    bbt_diag[i as usize] += p * p;
                }
            }
            let mean_m = (0..m).map(|i| k[(i, i)]).sum::<f64>() / m as f64;
            let mean_b = bbt_diag.iter().sum::<f64>() / m as f64;
            gamma = if mean_b > 0.0 { (mean_m / mean_b).max(1e-300) } else { 0.0 };
            for col in &plan.free_cols {
                for &(i, p) in col {
                    for &(j, q) in col {
                        k[(i as usize, j as usize)] += gamma * p * q;
                    }
                }
            }
        }
        let l = cholesky_regularized(k).ok_or_else(|| "Schur complement is not positive definite".to_string())?;
        let mut w = Mat::<f64>::zeros(m, nfree);
        for (c, col) in plan.free_cols.iter().enumerate() {
            for &(i, p) in col {
                w[(i as usize, c)] = p;
            }
        }
        let s = if nfree > 0 {
            l.as_ref().solve_lower_triangular_in_place(w.as_mut());
            let s = w.transpose() * &w;
            Some(cholesky_regularized(s).ok_or_else(|| "free-variable block is singular".to_string())?)
        } else {
            None
        };
        Ok(Kkt { m: schur, l, w, s, gamma })
    }

    /// Solves `M dy + B dx = h`, `Bᵀ dy = rf`, refining against the
    /// unregularized `M`.
    fn solve(&self, plan: &Plan, h: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut dy, mut dx) = self.solve_once(plan, h, rf);
        let hn = norm(h).max(norm(rf)).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..4 {
            let (r1, r2) = self.residual(plan, h, rf, &dy, &dx);
            let res = norm(&r1).max(norm(&r2));
            if res <= 1e-15 * hn || res >= 0.5 * last {
                break;
            }
            last = res;
            let (cy, cx) = self.solve_once(plan, &r1, &r2);
            dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
            dx.iter_mut().zip(&cx).for_each(|(a, b)| *a += b);
        }
        (dy, dx)
    }

    fn residual(&self, plan: &Plan, h: &[f64], rf: &[f64], dy: &[f64], dx: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = plan.m;
        let mut r1 = h.to_vec();
        for j in 0..n {
            let c = self.m.col_as_slice(j);
            let v = dy[j];
            if v != 0.0 {
                r1.iter_mut().zip(c).for_each(|(a, b)| *a -= b * v);
            }
        }
        let bdx = plan.apply_b(dx);
        r1.iter_mut().zip(&bdx).for_each(|(a, b)| *a -= b);
        let bty = plan.apply_bt(dy);
        let r2 = rf.iter().zip(&bty).map(|(a, b)| a - b).collect();
        (r1, r2)
    }

    fn solve_once(&self, plan: &Plan, h: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = plan.m;
        let mut hp = h.to_vec();
        if self.gamma != 0.0 {
            let brf = plan.apply_b(rf);
            for (a, b) in hp.iter_mut().zip(&brf) {
                *a += self.gamma * b;
            }
        }
        let mut z = Mat::from_fn(m, 1, |i, _| hp[i]);
        self.l.as_ref().solve_lower_triangular_in_place(z.as_mut());
        let dx = match &self.s {
            Some(s) => {
                let wtz = self.w.transpose() * &z;
                let mut rhs = Mat::from_fn(rf.len(), 1, |i, _| wtz[(i, 0)] - rf[i]);
                s.as_ref().solve_lower_triangular_in_place(rhs.as_mut());
                s.as_ref().transpose().solve_upper_triangular_in_place(rhs.as_mut());
                let dx: Vec<f64> = (0..rf.len()).map(|i| rhs[(i, 0)]).collect();
                let wdx = &self.w * &rhs;
                for i in 0..m {
                    z[(i, 0)] -= wdx[(i, 0)];
                }
                dx
            }
            None => Vec::new(),
        };
        self.l.as_ref().transpose().solve_upper_triangular_in_place(z.as_mut());
        ((0..m).map(|i| z[(i, 0)]).collect(), dx)
    }
}

fn cholesky_regularized(mut k: Mat<f64>) -> Option<Mat<f64>> {
    let n = k.nrows();
    if n == 0 {
        return Some(k);
    }
    let scale = (0..n).map(|i| k[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut added = 0.0;
    for delta in [0.0, 1e-14, 1e-12, 1e-10, 1e-8] {
        let shift = delta * scale - added;
        if shift != 0.0 {
            for i in 0..n {
                k[(i, i)] += shift;
            }
            added += shift;
        }
        if let Ok(llt) = k.llt(Side::Lower) {
            return Some(llt.L().to_owned());
        }
    }
    None
}

struct Iterate {
    x: Vec<Mat<f64>>,
    z: Vec<Mat<f64>>,
    y: Vec<f64>,
    xf: Vec<f64>,
}

const STAGNATION_WINDOW: usize = 8;

/// Solves `problem` to the tolerances in `opts`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    if problem.constraints.is_empty() {
        return Err(SdpError::Malformed("problem has no constraints".into()));
    }
    let started = Instant::now();
    let plan = Plan::build(problem);
    let m = plan.m;
    let nfree = plan.nfree();
    let total_dim: usize = plan.blocks.iter().map(|b| b.n).sum();

    // Cold start: scaled identities, zero multipliers and free variables.
    let b_norm = norm(&plan.b);
    let mut row_norm2 = vec![0.0; m];
    let mut c_norm2 = 0.0;
    for bp in &plan.blocks {
        for (s, rows) in bp.rows.iter().enumerate() {
            let cnt: f64 = bp.members[s].iter().map(|&(a, b)| if a == b { 1.0 } else { 2.0 }).sum();
            for &(i, p) in rows {
                row_norm2[i as usize] += p * p * cnt;
            }
            c_norm2 += bp.obj[s] * bp.obj[s] * cnt;
        }
    }
    let c_norm = (c_norm2 + dot(&plan.c_free, &plan.c_free)).sqrt();
    let max_row = row_norm2.iter().copied().fold(0.0, f64::max).sqrt();
    let xi = plan
        .b
        .iter()
        .zip(&row_norm2)
        .map(|(bi, r)| (1.0 + bi.abs()) / (1.0 + r.sqrt()))
        .fold(10.0, f64::max);
    let eta = 10f64.max(c_norm).max(max_row);
    let mut it = Iterate {
        x: plan.blocks.iter().map(|b| Mat::<f64>::identity(b.n, b.n) * faer::Scale(xi * (b.n as f64).sqrt())).collect(),
        z: plan.blocks.iter().map(|b| Mat::<f64>::identity(b.n, b.n) * faer::Scale(eta * (b.n as f64).sqrt())).collect(),
        y: vec![0.0; m],
        xf: vec![0.0; nfree],
    };

    let mut trace = Vec::new();
    let mut best: Option<(f64, Iterate)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut stall = 0usize;
    let mut since_best = 0usize;
    let mut schur_buf: Vec<f64> = Vec::new();
    let initial_scale = xi.max(eta);

    let mut iter = 0;
    loop {
        // Residuals.
        let ax = plan.apply_a(&it.x);
        let bx = plan.apply_b(&it.xf);
        let rp: Vec<f64> = (0..m).map(|i| plan.b[i] - ax[i] - bx[i]).collect();
        let cmat = plan.dual_matrices(&it.y);
        let rd: Vec<Mat<f64>> = cmat.iter().zip(&it.z).map(|(c, z)| c - z).collect();
        let bty = plan.apply_bt(&it.y);
        let rf: Vec<f64> = plan.c_free.iter().zip(&bty).map(|(c, v)| c - v).collect();
        let pobj = plan.primal_objective(&it.x, &it.xf);
        let dobj = dot(&plan.b, &it.y);
        let pinf = norm(&rp) / (1.0 + b_norm);
        let dinf = (rd.iter().map(|r| r.norm_l2().powi(2)).sum::<f64>() + dot(&rf, &rf)).sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let xz: f64 = it.x.iter().zip(&it.z).map(|(x, z)| inner(x, z)).sum();
        let mu = xz / total_dim as f64;

        let merit = (pinf / opts.feas_tol).max(dinf / opts.feas_tol).max(gap / opts.gap_tol);
        if best.as_ref().map_or(true, |(b, _)| merit < *b) {
            since_best = 0;
            best = Some((
                merit,
                Iterate { x: it.x.clone(), z: it.z.clone(), y: it.y.clone(), xf: it.xf.clone() },
            ));
        }
        if merit <= 1.0 {
            status = SolveStatus::Optimal;
            break;
        }
        if iter >= opts.max_iter {
            break;
        }
        // Accuracy is exhausted once the best merit stops improving; this
        // happens when the free variables diverge along an unattained optimum.
        if since_best >= STAGNATION_WINDOW {
            break;
        }
        since_best += 1;
        let size = it.x.iter().map(frob).fold(norm(&it.xf), f64::max).max(norm(&it.y));
        if !size.is_finite() || size > 1e12 * initial_scale {
            status = SolveStatus::InfeasibleFlag;
            break;
        }
        iter += 1;

        // Schur complement.
        let zinv: Vec<Mat<f64>> = match it.z.iter().map(spd_inverse).collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => {
                return Err(breakdown(iter, "dual slack lost positive definiteness", trace));
            }
        };
        let mut kmat = Mat::<f64>::zeros(m, m);
        for ((bp, x), zi) in plan.blocks.iter().zip(&it.x).zip(&zinv) {
            let l = bp.n_lift();
            schur_buf.clear();
            schur_buf.resize(l * l, 0.0);
            bp.schur(x, zi, &mut schur_buf);
            for s in 0..l {
                let rs = &bp.rows[s];
                if rs.is_empty() {
                    continue;
                }
                let line = &schur_buf[s * l..(s + 1) * l];
                for (t, &v) in line.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    for &(j, q) in &bp.rows[t] {
                        let vq = v * q;
                        let col = kmat.col_as_slice_mut(j as usize);
                        for &(i, p) in rs {
                            col[i as usize] += p * vq;
                        }
                    }
                }
            }
        }
        let kkt = Kkt::factor(&plan, kmat).map_err(|msg| breakdown(iter, &msg, trace.clone()))?;

        // X Rd Z⁻¹ is shared by predictor and corrector.
        let xrdz: Vec<Mat<f64>> = it.x.iter().zip(&rd).zip(&zinv).map(|((x, r), zi)| x * r * zi).collect();
        let a_x_rd_z = plan.apply_a(&xrdz);

        let direction = |sigma_mu: f64, corr: Option<&Vec<Mat<f64>>>| {
            // h = rp − A(σμZ⁻¹ − X − X Rd Z⁻¹ − corr)
            let smz: Vec<Mat<f64>> = zinv.iter().map(|zi| zi * faer::Scale(sigma_mu)).collect();
            let a_smz = plan.apply_a(&smz);
            let a_corr = corr.map(|c| plan.apply_a(c));
            let h: Vec<f64> = (0..m)
                .map(|i| {
                    let mut v = rp[i] - a_smz[i] + ax[i] + a_x_rd_z[i];
                    if let Some(ac) = &a_corr {
                        v += ac[i];
                    }
                    v
                })
                .collect();
            let (dy, dxf) = kkt.solve(&plan, &h, &rf);
            let aty = plan.adjoint(&dy);
            let dz: Vec<Mat<f64>> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
            let dx: Vec<Mat<f64>> = (0..plan.blocks.len())
                .map(|k| {
                    let mut d = &smz[k] - &it.x[k] - &it.x[k] * &dz[k] * &zinv[k];
                    if let Some(c) = corr {
                        d -= &c[k];
                    }
                    sym(d)
                })
                .collect();
            (dx, dxf, dy, dz)
        };

        let steps = |dx: &[Mat<f64>], dz: &[Mat<f64>]| -> Option<(f64, f64)> {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..dx.len() {
                ap = ap.min(max_step(&it.x[k], &dx[k])?);
                ad = ad.min(max_step(&it.z[k], &dz[k])?);
            }
            Some((ap, ad))
        };

        // Predictor.
        let (dxa, _, _, dza) = direction(0.0, None);
        let Some((ap, ad)) = steps(&dxa, &dza) else {
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff: f64 = (0..dxa.len())
            .map(|k| inner(&(&it.x[k] + &dxa[k] * faer::Scale(ap)), &(&it.z[k] + &dza[k] * faer::Scale(ad))))
            .sum::<f64>()
            / total_dim as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // Corrector.
        let corr: Vec<Mat<f64>> = (0..dxa.len()).map(|k| &dxa[k] * &dza[k] * &zinv[k]).collect();
        let (dx, dxf, dy, dz) = direction(sigma * mu, Some(&corr));
        let Some((ap, ad)) = steps(&dx, &dz) else {
            break;
        };
        let tau = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);

        for k in 0..it.x.len() {
            it.x[k] += &dx[k] * faer::Scale(ap);
            it.z[k] += &dz[k] * faer::Scale(ad);
        }
        for (v, d) in it.xf.iter_mut().zip(&dxf) {
            *v += ap * d;
        }
        for (v, d) in it.y.iter_mut().zip(&dy) {
            *v += ad * d;
        }

        let rec = IterationRecord {
            iteration: iter,
            primal_objective: pobj,
            dual_objective: dobj,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            mu,
            step_primal: ap,
            step_dual: ad,
        };
        if opts.verbose {
            eprintln!(
                "{:4} p={:+.9e} d={:+.9e} pinf={:.2e} dinf={:.2e} gap={:.2e} mu={:.2e} ap={:.3} ad={:.3} t={:.1}s",
                iter,
                pobj,
                dobj,
                pinf,
                dinf,
                gap,
                mu,
                ap,
                ad,
                started.elapsed().as_secs_f64()
            );
        }
        trace.push(rec);

        if ap.max(ad) < 1e-8 {
            stall += 1;
        } else {
            stall = 0;
        }
        if stall >= 3 {
            break;
        }
    }

    let (_, fin) = best.expect("at least one iterate is evaluated");
    let mut sol = finish(problem, &plan, fin, status, iter, trace);
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::InfeasibleFlag {
        let f = opts.near_optimal_factor;
        let r = sol.residuals;
        if r.primal_infeasibility <= f * opts.feas_tol
            && r.dual_infeasibility <= f * opts.feas_tol
            && r.relative_gap <= f * opts.gap_tol
        {
            sol.status = SolveStatus::NearOptimal;
        }
    }
    if sol.status == SolveStatus::Optimal
        && (sol.residuals.primal_infeasibility > opts.feas_tol
            || sol.residuals.dual_infeasibility > opts.feas_tol
            || sol.residuals.relative_gap > opts.gap_tol)
    {
        sol.status = SolveStatus::NearOptimal;
    }
    sol.seconds = started.elapsed().as_secs_f64();
    Ok(sol)
}

fn breakdown(iteration: usize, message: &str, trace: Vec<IterationRecord>) -> SdpError {
    SdpError::NumericalBreakdown { iteration, message: message.to_string(), trace }
}

/// Maps the internal iterate back to problem blocks and recomputes every
/// residual from the original problem data.
fn finish(
    problem: &SdpProblem,
    plan: &Plan,
    it: Iterate,
    status: SolveStatus,
    iterations: usize,
    trace: Vec<IterationRecord>,
) -> SdpSolution {
    let dims = problem.block_dims();
    let mut xs: Vec<Vec<f64>> = dims.iter().map(|&n| vec![0.0; n * n]).collect();
    let mut zs = xs.clone();
    for (ib, &(k, pos)) in plan.origin.iter().enumerate() {
        let n = dims[k];
        match pos {
            None => {
                for j in 0..n {
                    for i in 0..n {
                        xs[k][i + j * n] = it.x[ib][(i, j)];
                        zs[k][i + j * n] = it.z[ib][(i, j)];
                    }
                }
            }
            Some(p) => {
                xs[k][p + p * n] = it.x[ib][(0, 0)];
                zs[k][p + p * n] = it.z[ib][(0, 0)];
            }
        }
    }
    let Iterate { xf, y, .. } = it;
    let objective = problem.primal_objective(&xs, &xf);
    let dual_objective = problem.constraints.iter().zip(&y).map(|(c, y)| c.rhs * y).sum::<f64>();
    let rp = problem.primal_residuals(&xs, &xf);
    let b_norm = norm(&problem.constraints.iter().map(|c| c.rhs).collect::<Vec<_>>());

    // S_k = C_k − Σ y_i A_ik, straight from the problem's entries.
    let mut s: Vec<Vec<f64>> = dims.iter().map(|&n| vec![0.0; n * n]).collect();
    let mut add = |e: &crate::problem::BlockEntry, w: f64| {
        let n = dims[e.block];
        s[e.block][e.row + e.col * n] += w * e.value;
        if e.row != e.col {
            s[e.block][e.col + e.row * n] += w * e.value;
        }
    };
    for e in &problem.objective.entries {
        add(e, 1.0);
    }
    for (c, &y) in problem.constraints.iter().zip(&y) {
        for e in &c.lhs.entries {
            add(e, -y);
        }
    }
    let mut c_norm2 = 0.0;
    for e in &problem.objective.entries {
        c_norm2 += if e.row == e.col { e.value * e.value } else { 2.0 * e.value * e.value };
    }
    let mut rf: Vec<f64> = vec![0.0; problem.free_vars.len()];
    for &(k, v) in &problem.objective.free {
        rf[k] += v;
        c_norm2 += v * v;
    }
    for (c, &y) in problem.constraints.iter().zip(&y) {
        for &(k, v) in &c.lhs.free {
            rf[k] -= v * y;
        }
    }
    let mut rd2 = dot(&rf, &rf);
    let mut rd_x = 0.0;
    for k in 0..dims.len() {
        for idx in 0..s[k].len() {
            let r = s[k][idx] - zs[k][idx];
            rd2 += r * r;
            rd_x += r * xs[k][idx];
        }
    }
    let residuals = Residuals {
        primal_infeasibility: norm(&rp) / (1.0 + b_norm),
        dual_infeasibility: rd2.sqrt() / (1.0 + c_norm2.sqrt()),
        relative_gap: (objective - dual_objective).abs() / (1.0 + objective.abs() + dual_objective.abs()),
        duality_slack: rd_x.abs() + dot(&rf, &xf).abs() + dot(&y, &rp).abs(),
    };
    SdpSolution {
        status,
        objective,
        dual_objective,
        block_values: xs,
        free_values: xf,
        duals: y,
        dual_slacks: zs,
        residuals,
        iterations,
        seconds: 0.0,
        trace,
    }
}
