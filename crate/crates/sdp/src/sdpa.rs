//! SDPA sparse format (`.dat-s`).
//!
//! SDPA states its primal as `min cᵀy s.t. Σ F_i y_i − F_0 ⪰ 0` and its dual
//! as `max <F_0, Y> s.t. <F_i, Y> = c_i, Y ⪰ 0`. Our standard form is that
//! dual with `F_0 = −C`, `F_i = A_i`, `c_i = b_i`, so an SDPA solver reports
//! the negative of our objective.
//!
//! Free variables have no SDPA counterpart. Each one is split as
//! `x = x⁺ − x⁻` with `x⁺, x⁻ ≥ 0`, and the pairs go into one trailing
//! diagonal block of size `2 · nfree` (all `x⁺` first, then all `x⁻`).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::problem::{BlockEntry, BlockKind, LinearForm, SdpProblem};
use crate::SdpError;

/// Writes `problem` in SDPA sparse format. The output depends only on the
/// problem data, so equal problems give byte-identical files.
pub fn export_sdpa(problem: &SdpProblem) -> String {
    let nfree = problem.free_vars.len();
    let nblocks = problem.blocks.len() + usize::from(nfree > 0);
    let mut out = String::new();
    let _ = writeln!(out, "{}", problem.constraints.len());
    let _ = writeln!(out, "{nblocks}");
    let mut sizes: Vec<String> = problem
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.dim.to_string(),
            BlockKind::Diagonal => format!("-{}", b.dim),
        })
        .collect();
    if nfree > 0 {
        sizes.push(format!("-{}", 2 * nfree));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = problem.constraints.iter().map(|c| fmt_num(c.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let free_block = problem.blocks.len();
    let mut emit = |matno: usize, form: &LinearForm, sign: f64| {
        // (block, row, col) -> value, ordered block-minor then row-major.
        let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for e in &form.entries {
            *acc.entry((e.block, e.row, e.col)).or_insert(0.0) += sign * e.value;
        }
        for &(k, a) in &form.free {
            *acc.entry((free_block, k, k)).or_insert(0.0) += sign * a;
            *acc.entry((free_block, nfree + k, nfree + k)).or_insert(0.0) -= sign * a;
        }
        for ((b, r, c), v) in acc {
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {} {} {}", matno, b + 1, r + 1, c + 1, fmt_num(v));
            }
        }
    };
    emit(0, &problem.objective, -1.0);
    for (i, con) in problem.constraints.iter().enumerate() {
        emit(i + 1, &con.lhs, 1.0);
    }
    out
}

fn fmt_num(v: f64) -> String {
    // Shortest representation that parses back to the same bits.
    let v = if v == 0.0 { 0.0 } else { v };
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Reads an SDPA sparse file into our standard form. Negative-size blocks
/// become [`BlockKind::Diagonal`] blocks; free variables split on export come
/// back as such a block.
pub fn parse_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let err = |line: usize, msg: &str| SdpError::Parse { line, msg: msg.to_string() };
    let tokens = |l: &str| -> Vec<String> {
        l.split(|c: char| c.is_whitespace() || ",{}()".contains(c))
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));

    let (ln, l) = next("constraint count")?;
    let m: usize = tokens(l).first().and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad constraint count"))?;
    let (ln, l) = next("block count")?;
    let nb: usize = tokens(l).first().and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad block count"))?;
    let (ln, l) = next("block sizes")?;
    let sizes: Vec<i64> = tokens(l)
        .iter()
        .take(nb)
        .map(|t| t.parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| err(ln, "bad block size"))?;
    if sizes.len() != nb || sizes.contains(&0) {
        return Err(err(ln, "expected one nonzero size per block"));
    }
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    let mut ln_rhs = ln;
    while rhs.len() < m {
        let (ln, l) = next("right-hand side")?;
        ln_rhs = ln;
        for t in tokens(l) {
            rhs.push(t.parse().map_err(|_| err(ln, "bad right-hand side"))?);
        }
    }
    if rhs.len() != m {
        return Err(err(ln_rhs, "wrong number of right-hand sides"));
    }

    let mut p = SdpProblem::new();
    for (k, &s) in sizes.iter().enumerate() {
        let kind = if s < 0 { BlockKind::Diagonal } else { BlockKind::Psd };
        p.add_block(format!("B{}", k + 1), s.unsigned_abs() as usize, kind);
    }
    let mut forms: Vec<LinearForm> = vec![LinearForm::default(); m + 1];
    for (ln, l) in lines {
        let t = tokens(l);
        if t.len() < 5 {
            return Err(err(ln, "expected `matno blkno i j value`"));
        }
        let ints: Vec<usize> = t[..4]
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(ln, "bad index"))?;
        let v: f64 = t[4].parse().map_err(|_| err(ln, "bad value"))?;
        let (matno, blk, i, j) = (ints[0], ints[1], ints[2], ints[3]);
        if matno > m || blk == 0 || blk > nb || i == 0 || j == 0 {
            return Err(err(ln, "index out of range"));
        }
        let b = &p.blocks[blk - 1];
        if i > b.dim || j > b.dim {
            return Err(err(ln, "entry outside block"));
        }
        if b.kind == BlockKind::Diagonal && i != j {
            return Err(err(ln, "off-diagonal entry in diagonal block"));
        }
        let v = if matno == 0 { -v } else { v };
        forms[matno].entries.push(BlockEntry::new(blk - 1, i - 1, j - 1, v));
    }
    let mut forms = forms.into_iter();
    p.objective = forms.next().unwrap_or_default();
    for (i, (form, b)) in forms.zip(rhs).enumerate() {
        p.add_constraint(format!("c{}", i + 1), form, b);
    }
    p.validate()?;
    Ok(p)
}
