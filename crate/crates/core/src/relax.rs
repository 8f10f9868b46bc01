//! Assembly of the MPI outer-approximation relaxation into a block SDP, and
//! recovery of the certificates from a solution.
//!
//! The relaxation is
//!
//! ```text
//! inf ∫_X w dx  s.t.  βv − ∇v·f = Σ_j a_j p_j
//!                     w         = Σ_j b_j p_j
//!                     w − v − 1 = Σ_j c_j p_j
//! ```
//!
//! with `p_0 = 1` and every `a_j, b_j, c_j` an SOS polynomial whose Gram
//! matrix follows a sparsity pattern. Each maximal clique of the pattern is
//! its own PSD block; blocks of the same certificate sum.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use tsdyn_sdp::{BlockEntry, BlockKind, LinearForm, SdpProblem, SdpSolution};

use crate::graphs::{maximal_cliques, ChordalGraph, CliqueSet, Extension};
use crate::poly::{lie_polynomial, monomials, Exponent, Polynomial, SupportSet};
use crate::sparsity::{iterate_v_chain, iterate_w_chain, v_degree, vertex_basis, SupportChain, WChain};
use crate::symmetry::{sign_symmetries, symmetry_blocks, SignSymmetryGroup};
use crate::system::{BoxSet, DynamicalSystem};
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Term sparsity: the support chains.
    Ts,
    /// Sign symmetry: block structure from the symmetry group.
    Ss,
    /// Fully dense.
    Fd,
}

impl std::str::FromStr for Mode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s.to_ascii_lowercase().as_str() {
            "ts" => Ok(Mode::Ts),
            "ss" => Ok(Mode::Ss),
            "fd" => Ok(Mode::Fd),
            _ => Err(CoreError::Invalid(format!("unknown mode '{s}' (expected ts, ss or fd)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Ts => "TS",
            Mode::Ss => "SS",
            Mode::Fd => "FD",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationConfig {
    /// Relaxation order; polynomials have degree up to `2d`.
    pub d: u32,
    pub s: usize,
    pub l: usize,
    pub beta: f64,
    pub extension: Extension,
    pub mode: Mode,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self { d: 2, s: 1, l: 1, beta: 1.0, extension: Extension::Maximal, mode: Mode::Ts }
    }
}

impl RelaxationConfig {
    pub fn validate(&self, sys: &DynamicalSystem) -> Result<(), CoreError> {
        let min = sys.min_order();
        if self.d < min {
            return Err(CoreError::Invalid(format!(
                "relaxation order d = {} (2d = {}) is below the minimum {} for this system (d_f = {}, d_p = {})",
                self.d,
                2 * self.d,
                min,
                sys.d_f(),
                sys.d_p()
            )));
        }
        if self.s == 0 || self.l == 0 {
            return Err(CoreError::Invalid("s and l must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(CoreError::Invalid("beta must be positive".into()));
        }
        Ok(())
    }
}

/// `∫_box x^α dx = ∏_i (hi_i^{α_i+1} − lo_i^{α_i+1}) / (α_i + 1)`.
pub fn box_moment(alpha: &Exponent, region: &BoxSet) -> f64 {
    alpha
        .0
        .iter()
        .zip(region.lo.iter().zip(&region.hi))
        .map(|(&a, (&lo, &hi))| {
            let k = a as i32 + 1;
            (hi.powi(k) - lo.powi(k)) / k as f64
        })
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Certificate {
    /// `a_j` in `βv − ∇v·f = Σ a_j p_j`
    A,
    /// `b_j` in `w = Σ b_j p_j`
    B,
    /// `c_j` in `w − v − 1 = Σ c_j p_j`
    C,
}

impl Certificate {
    pub fn letter(self) -> char {
        match self {
            Certificate::A => 'a',
            Certificate::B => 'b',
            Certificate::C => 'c',
        }
    }
}

/// Gram basis and clique decomposition for one certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateLayout {
    pub basis: Vec<Exponent>,
    pub cliques: CliqueSet,
}

impl CertificateLayout {
    fn dense(basis: Vec<Exponent>) -> Self {
        let parts = if basis.is_empty() { vec![] } else { vec![(0..basis.len()).collect()] };
        Self { basis, cliques: CliqueSet::from_parts(parts) }
    }

    fn from_chordal(cg: &ChordalGraph) -> Result<Self, CoreError> {
        Ok(Self { basis: cg.graph.nodes.clone(), cliques: maximal_cliques(cg)? })
    }

    pub fn scalar_count(&self) -> usize {
        self.cliques.cliques.iter().map(|c| c.len() * (c.len() + 1) / 2).sum()
    }
}

/// Everything the assembly needs besides the system: supports of `v` and
/// `w` and the Gram layouts, plus whatever produced them.
#[derive(Debug, Clone)]
pub struct Structure {
    pub v_support: SupportSet,
    pub w_support: SupportSet,
    /// Layout of `a_j`, `j = 0..=m`.
    pub a: Vec<CertificateLayout>,
    /// Shared layout of `b_j` and `c_j`.
    pub bc: Vec<CertificateLayout>,
    pub chain: Option<SupportChain>,
    pub w_chain: Option<WChain>,
    pub group: Option<SignSymmetryGroup>,
}

pub fn structure(sys: &DynamicalSystem, cfg: &RelaxationConfig) -> Result<Structure, CoreError> {
    cfg.validate(sys)?;
    let n = sys.dim();
    let d = cfg.d;
    let m = sys.num_constraints();
    let full_v = SupportSet::from_iter(n, monomials(n, v_degree(sys, d)));
    let full_w = SupportSet::from_iter(n, monomials(n, 2 * d));
    match cfg.mode {
        Mode::Fd => {
            let layouts: Vec<CertificateLayout> =
                (0..=m).map(|j| CertificateLayout::dense(vertex_basis(sys, d, j))).collect();
            Ok(Structure {
                v_support: full_v,
                w_support: full_w,
                a: layouts.clone(),
                bc: layouts,
                chain: None,
                w_chain: None,
                group: None,
            })
        }
        Mode::Ss => {
            let group = sign_symmetries(sys, d);
            let layouts: Vec<CertificateLayout> = (0..=m)
                .map(|j| {
                    let basis = vertex_basis(sys, d, j);
                    let blocks = symmetry_blocks(&group, &basis);
                    CertificateLayout { basis, cliques: CliqueSet::from_parts(blocks) }
                })
                .collect();
            Ok(Structure {
                v_support: full_v.filter(|a| group.in_r_perp(a)),
                w_support: full_w.filter(|a| group.in_r_perp(a)),
                a: layouts.clone(),
                bc: layouts,
                chain: None,
                w_chain: None,
                group: Some(group),
            })
        }
        Mode::Ts => {
            let chain = iterate_v_chain(sys, d, cfg.extension, cfg.s);
            let a_set = chain.a_set(cfg.s).clone();
            let w_chain = iterate_w_chain(sys, d, &a_set, cfg.extension, cfg.l);
            let a = (0..=m).map(|j| CertificateLayout::from_chordal(chain.g_ext(cfg.s, j))).collect::<Result<_, _>>()?;
            let bc =
                (0..=m).map(|j| CertificateLayout::from_chordal(w_chain.h_ext(cfg.l, j))).collect::<Result<_, _>>()?;
            Ok(Structure {
                v_support: a_set.truncate(v_degree(sys, d)),
                w_support: w_chain.b_set(cfg.l).truncate(2 * d),
                a,
                bc,
                chain: Some(chain),
                w_chain: Some(w_chain),
                group: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMeta {
    pub cert: Certificate,
    pub j: usize,
    /// Clique members as exponents, in block row order.
    pub basis: Vec<Exponent>,
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub problem: SdpProblem,
    pub blocks: Vec<BlockMeta>,
    /// `(exponent, free variable index)` for the coefficients of `v`.
    pub v_vars: Vec<(Exponent, usize)>,
    pub w_vars: Vec<(Exponent, usize)>,
    pub structure: Structure,
    pub config: RelaxationConfig,
    pub system: DynamicalSystem,
    pub region: BoxSet,
}

/// Builds the standard-form SDP for `cfg`.
pub fn assemble(sys: &DynamicalSystem, region: &BoxSet, cfg: &RelaxationConfig) -> Result<Assembly, CoreError> {
    if region.dim() != sys.dim() {
        return Err(CoreError::Invalid("box dimension differs from the system dimension".into()));
    }
    let st = structure(sys, cfg)?;
    Ok(assemble_structure(sys, region, cfg, st))
}

/// Accumulates one linear equality per exponent.
struct Rows {
    rows: BTreeMap<Exponent, LinearForm>,
}

impl Rows {
    fn new() -> Self {
        Self { rows: BTreeMap::new() }
    }

    fn free(&mut self, e: Exponent, var: usize, c: f64) {
        if c != 0.0 {
            self.rows.entry(e).or_default().free.push((var, c));
        }
    }

    fn entry(&mut self, e: Exponent, block: usize, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.rows.entry(e).or_default().entries.push(BlockEntry::new(block, r, c, v));
        }
    }
}

/// Assembles from a precomputed [`Structure`].
pub fn assemble_structure(sys: &DynamicalSystem, region: &BoxSet, cfg: &RelaxationConfig, st: Structure) -> Assembly {
    let names = &sys.names;
    let mut problem = SdpProblem::new();
    let mut blocks = Vec::new();

    let v_vars: Vec<(Exponent, usize)> = st
        .v_support
        .iter()
        .map(|e| (e.clone(), problem.add_free_var(format!("v[{}]", e.display_with(names)))))
        .collect();
    let w_vars: Vec<(Exponent, usize)> = st
        .w_support
        .iter()
        .map(|e| (e.clone(), problem.add_free_var(format!("w[{}]", e.display_with(names)))))
        .collect();

    // Gram blocks: (certificate, j, clique) in that order.
    for (cert, layouts) in [(Certificate::A, &st.a), (Certificate::B, &st.bc), (Certificate::C, &st.bc)] {
        for (j, layout) in layouts.iter().enumerate() {
            for (k, clique) in layout.cliques.cliques.iter().enumerate() {
                let label = format!("{}{}[{}]", cert.letter(), j, k);
                problem.add_block(label, clique.len(), BlockKind::Psd);
                blocks.push(BlockMeta { cert, j, basis: clique.iter().map(|&i| layout.basis[i].clone()).collect() });
            }
        }
    }

    let mut lie = Rows::new();
    let mut wid = Rows::new();
    let mut wv = Rows::new();

    for (e, var) in &v_vars {
        lie.free(e.clone(), *var, cfg.beta);
        for (i, fi) in sys.field.iter().enumerate() {
            let Some(low) = e.lower(i) else { continue };
            let a = e.0[i] as f64;
            for (g, &c) in fi.terms() {
                lie.free(low.add(g), *var, -a * c);
            }
        }
        wv.free(e.clone(), *var, -1.0);
    }
    for (e, var) in &w_vars {
        wid.free(e.clone(), *var, 1.0);
        wv.free(e.clone(), *var, 1.0);
    }
    for (b, meta) in blocks.iter().enumerate() {
        let target = match meta.cert {
            Certificate::A => &mut lie,
            Certificate::B => &mut wid,
            Certificate::C => &mut wv,
        };
        let p = sys.p(meta.j);
        let k = meta.basis.len();
        for r in 0..k {
            for c in r..k {
                let base = meta.basis[r].add(&meta.basis[c]);
                for (delta, &coef) in p.terms() {
                    target.entry(base.add(delta), b, r, c, -coef);
                }
            }
        }
    }

    let zero = Exponent::zero(sys.dim());
    for (tag, rows) in [("lie", lie), ("w", wid), ("wv", wv)] {
        for (e, form) in rows.rows {
            let rhs = if tag == "wv" && e == zero { 1.0 } else { 0.0 };
            problem.add_constraint(format!("{tag}[{}]", e.display_with(names)), form, rhs);
        }
    }
    // The constant row of the third identity must exist even if nothing
    // touches it, otherwise the problem silently drops `− 1`.
    if !problem.constraints.iter().any(|c| c.rhs == 1.0) {
        problem.add_constraint("wv[1]", LinearForm::default(), 1.0);
    }

    problem.objective = LinearForm {
        free: w_vars.iter().map(|(e, var)| (*var, box_moment(e, region))).filter(|&(_, m)| m != 0.0).collect(),
        entries: vec![],
    };

    Assembly {
        problem,
        blocks,
        v_vars,
        w_vars,
        structure: st,
        config: cfg.clone(),
        system: sys.clone(),
        region: region.clone(),
    }
}

impl Assembly {
    /// Block sizes per certificate kind, descending, e.g. `a: [6, 4]`.
    pub fn block_sizes(&self, cert: Certificate) -> Vec<usize> {
        let mut s: Vec<usize> = self.blocks.iter().filter(|b| b.cert == cert).map(|b| b.basis.len()).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Sizes of the `a_j` blocks for one `j`.
    pub fn a_block_sizes(&self, j: usize) -> Vec<usize> {
        let mut s: Vec<usize> =
            self.blocks.iter().filter(|b| b.cert == Certificate::A && b.j == j).map(|b| b.basis.len()).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    pub fn gram_scalars(&self) -> usize {
        self.problem.num_matrix_scalars()
    }

    /// Text summary: configuration, chain sizes, block structure, counts.
    pub fn digest(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "mode: {}  2d: {}  s: {}  l: {}  beta: {}  extension: {}",
            c.mode,
            2 * c.d,
            c.s,
            c.l,
            c.beta,
            c.extension
        );
        if let Some(ch) = &self.structure.chain {
            let sizes: Vec<usize> = ch.a_sets.iter().map(SupportSet::len).collect();
            let _ = writeln!(out, "A chain sizes: {sizes:?}  stabilized: {}", ch.stabilized_s);
        }
        if let Some(ch) = &self.structure.w_chain {
            let sizes: Vec<usize> = ch.b_sets.iter().map(SupportSet::len).collect();
            let _ = writeln!(out, "B chain sizes: {sizes:?}  stabilized: {}", ch.stabilized_l);
        }
        if let Some(g) = &self.structure.group {
            let basis: Vec<String> = g.basis.iter().map(|&r| g.format_vector(r)).collect();
            let _ = writeln!(out, "sign symmetries: rank {} basis [{}]", g.rank(), basis.join(" "));
        }
        let _ = writeln!(out, "v support: {}  w support: {}", self.v_vars.len(), self.w_vars.len());
        for cert in [Certificate::A, Certificate::B, Certificate::C] {
            let _ = writeln!(out, "{} blocks: {:?}", cert.letter(), self.block_sizes(cert));
        }
        out.push_str(&self.problem.digest());
        out
    }
}

/// Solved certificates mapped back to polynomials and Gram blocks.
#[derive(Debug, Clone)]
pub struct CertificateSet {
    pub v: Polynomial,
    pub w: Polynomial,
    /// One dense column-major Gram matrix per block, in assembly order.
    pub gram_blocks: Vec<Vec<f64>>,
    /// Largest coefficient of the three identity residuals.
    pub max_identity_residual: f64,
    /// `1 + ` largest coefficient magnitude appearing in the identities.
    pub residual_scale: f64,
    /// Smallest `λ_min / (1 + ‖block‖)` over all Gram blocks.
    pub min_scaled_eigenvalue: f64,
    /// `∫_X w` recomputed from the recovered `w`.
    pub objective: f64,
    pub residual_ok: bool,
    pub psd_ok: bool,
}

/// Gram polynomial `Σ_{r,c} Q[r,c] x^{β_r + β_c}`.
fn gram_polynomial(basis: &[Exponent], q: &[f64], dim: usize) -> Polynomial {
    let k = basis.len();
    let mut p = Polynomial::zero(dim);
    for r in 0..k {
        for c in 0..k {
            p.add_term(basis[r].add(&basis[c]), q[r + c * k]);
        }
    }
    p
}

/// Maps a solution back to `v`, `w`, and the Gram blocks, and checks the
/// identities and PSD-ness independently of the solver.
pub fn recover(asm: &Assembly, sol: &SdpSolution) -> CertificateSet {
    let sys = &asm.system;
    let n = sys.dim();
    let m = sys.num_constraints();
    let v = Polynomial::from_terms(n, asm.v_vars.iter().map(|(e, i)| (e.clone(), sol.free_values[*i])));
    let w = Polynomial::from_terms(n, asm.w_vars.iter().map(|(e, i)| (e.clone(), sol.free_values[*i])));

    let mut sums: BTreeMap<(Certificate, usize), Polynomial> = BTreeMap::new();
    let mut min_scaled = f64::INFINITY;
    for (meta, (q, blk)) in asm.blocks.iter().zip(sol.block_values.iter().zip(&asm.problem.blocks)) {
        let g = gram_polynomial(&meta.basis, q, n);
        let e = sums.entry((meta.cert, meta.j)).or_insert_with(|| Polynomial::zero(n));
        *e = e.add(&g);
        let lam = faer::MatRef::from_column_major_slice(q, blk.dim, blk.dim)
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map(|v| v[0])
            .unwrap_or(f64::NAN);
        let nrm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        min_scaled = min_scaled.min(lam / (1.0 + nrm));
    }
    let sum_of = |cert: Certificate| {
        let mut acc = Polynomial::zero(n);
        let mut scale: f64 = 0.0;
        for j in 0..=m {
            if let Some(s) = sums.get(&(cert, j)) {
                let t = s.mul(&sys.p(j));
                scale = scale.max(t.max_abs_coeff());
                acc = acc.add(&t);
            }
        }
        (acc, scale)
    };
    let (sa, ka) = sum_of(Certificate::A);
    let (sb, kb) = sum_of(Certificate::B);
    let (sc, kc) = sum_of(Certificate::C);
    let lie = lie_polynomial(&v, &sys.field, asm.config.beta);
    let one = Polynomial::constant(n, 1.0);
    let r1 = lie.sub(&sa);
    let r2 = w.sub(&sb);
    let r3 = w.sub(&v).sub(&one).sub(&sc);
    let max_identity_residual = r1.max_abs_coeff().max(r2.max_abs_coeff()).max(r3.max_abs_coeff());
    let residual_scale = 1.0 + [lie.max_abs_coeff(), w.max_abs_coeff(), v.max_abs_coeff(), ka, kb, kc]
        .into_iter()
        .fold(0.0, f64::max);
    let objective = w.terms().iter().map(|(e, c)| c * box_moment(e, &asm.region)).sum();
    CertificateSet {
        v,
        w,
        gram_blocks: sol.block_values.clone(),
        max_identity_residual,
        residual_scale,
        min_scaled_eigenvalue: min_scaled,
        objective,
        residual_ok: max_identity_residual <= 1e-6 * residual_scale,
        psd_ok: !(min_scaled < -1e-6),
    }
}

/// Grid points of the box where `w ≥ 1`, with their `w` values.
pub fn outer_approx_grid(w: &Polynomial, region: &BoxSet, resolution: &[usize]) -> Result<Vec<(Vec<f64>, f64)>, CoreError> {
    let n = region.dim();
    if resolution.len() != n || resolution.iter().any(|&r| r < 2) {
        return Err(CoreError::Invalid("grid resolution must be at least 2 on every axis".into()));
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let r = resolution[i];
            (0..r)
                .map(|k| {
                    if k == r - 1 {
                        region.hi[i]
                    } else {
                        region.lo[i] + (region.hi[i] - region.lo[i]) * k as f64 / (r - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        let x: Vec<f64> = (0..n).map(|i| axes[i][idx[i]]).collect();
        let val = w.eval(&x);
        if val >= 1.0 {
            out.push((x, val));
        }
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < resolution[i] {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// CSV with header `x1,…,xn,w`.
pub fn grid_csv(names: &[String], points: &[(Vec<f64>, f64)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{},w", names.join(","));
    for (x, v) in points {
        let xs: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(out, "{},{}", xs.join(","), v);
    }
    out
}
