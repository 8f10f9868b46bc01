//! Pipeline shared by the `tsdyn` binary and its tests: load a problem,
//! assemble the relaxation, solve it, recover certificates, report.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use tsdyn_core::relax::{assemble, recover, Assembly, CertificateSet, Certificate, RelaxationConfig};
use tsdyn_core::system::{Problem, ProblemFile};
use tsdyn_core::models;
use tsdyn_sdp::{solve, SdpSolution, SolverOptions};

/// Reads a problem file, or a built-in system by name.
pub fn load_problem(arg: &str) -> Result<Problem> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        let file = ProblemFile::from_json(&text).with_context(|| format!("in {arg}"))?;
        let mut p = file.into_problem().with_context(|| format!("in {arg}"))?;
        if p.name == "problem" {
            if let Some(stem) = path.file_stem() {
                p.name = stem.to_string_lossy().into_owned();
            }
        }
        return Ok(p);
    }
    if let Some(p) = models::builtin(arg) {
        return Ok(p);
    }
    bail!("'{arg}' is neither a readable problem file nor a built-in system ({})", models::BUILTIN_NAMES.join(", "))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub mode: String,
    pub two_d: u32,
    pub s: usize,
    pub l: usize,
    pub beta: f64,
    pub extension: String,
    /// `|𝒜^s|` for each computed step (TS only).
    pub a_chain_sizes: Vec<usize>,
    pub a_stabilized_at: Option<usize>,
    pub b_chain_sizes: Vec<usize>,
    pub b_stabilized_at: Option<usize>,
    pub a_blocks: Vec<usize>,
    pub b_blocks: Vec<usize>,
    pub c_blocks: Vec<usize>,
    pub constraints: usize,
    pub free_vars: usize,
    pub gram_scalars: usize,
    pub status: String,
    pub opt: f64,
    pub dual: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub identity_residual: f64,
    pub certificate_ok: bool,
    pub iterations: usize,
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
}

pub const CSV_HEADER: &str = "problem,mode,two_d,s,l,beta,extension,status,opt,dual,primal_infeas,dual_infeas,rel_gap,identity_residual,certificate_ok,max_block,num_blocks,constraints,free_vars,gram_scalars,iterations,assemble_s,solve_s";

impl RunReport {
    pub fn num_blocks(&self) -> usize {
        self.a_blocks.len() + self.b_blocks.len() + self.c_blocks.len()
    }

    pub fn max_block(&self) -> usize {
        self.a_blocks.iter().chain(&self.b_blocks).chain(&self.c_blocks).copied().max().unwrap_or(0)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3e},{:.3e},{:.3e},{:.3e},{},{},{},{},{},{},{},{:.3},{:.3}",
            self.problem,
            self.mode,
            self.two_d,
            self.s,
            self.l,
            self.beta,
            self.extension,
            self.status,
            self.opt,
            self.dual,
            self.primal_infeasibility,
            self.dual_infeasibility,
            self.relative_gap,
            self.identity_residual,
            self.certificate_ok,
            self.max_block(),
            self.num_blocks(),
            self.constraints,
            self.free_vars,
            self.gram_scalars,
            self.iterations,
            self.assemble_seconds,
            self.solve_seconds
        )
    }

    pub fn text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "problem:     {}", self.problem);
        let _ = writeln!(
            o,
            "config:      mode {}  2d = {}  s = {}  l = {}  beta = {}  extension = {}",
            self.mode, self.two_d, self.s, self.l, self.beta, self.extension
        );
        if !self.a_chain_sizes.is_empty() {
            let _ = writeln!(o, "A chain:     sizes {:?}  {}", self.a_chain_sizes, stabilized(self.a_stabilized_at));
            let _ = writeln!(o, "B chain:     sizes {:?}  {}", self.b_chain_sizes, stabilized(self.b_stabilized_at));
        }
        let _ = writeln!(o, "a blocks:    {}", compact_sizes(&self.a_blocks));
        let _ = writeln!(o, "b/c blocks:  {}", compact_sizes(&self.b_blocks));
        let _ = writeln!(
            o,
            "sdp:         {} constraints, {} free variables, {} Gram scalars",
            self.constraints, self.free_vars, self.gram_scalars
        );
        let _ = writeln!(o, "status:      {} after {} iterations", self.status, self.iterations);
        let _ = writeln!(o, "opt:         {:.6}", self.opt);
        let _ = writeln!(o, "dual:        {:.6}", self.dual);
        let _ = writeln!(
            o,
            "residuals:   primal {:.2e}  dual {:.2e}  gap {:.2e}  identities {:.2e} ({})",
            self.primal_infeasibility,
            self.dual_infeasibility,
            self.relative_gap,
            self.identity_residual,
            if self.certificate_ok { "ok" } else { "FLAGGED" }
        );
        let _ = writeln!(o, "time:        assemble {:.2}s  solve {:.2}s", self.assemble_seconds, self.solve_seconds);
        o
    }
}

/// `[6, 4, 4, 1]` as `6 4x2 1`.
fn compact_sizes(sizes: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sizes.len() {
        let mut k = i;
        while k < sizes.len() && sizes[k] == sizes[i] {
            k += 1;
        }
        parts.push(if k - i > 1 { format!("{}x{}", sizes[i], k - i) } else { sizes[i].to_string() });
        i = k;
    }
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(" ")
    }
}

fn stabilized(at: Option<usize>) -> String {
    match at {
        Some(k) => format!("stabilized at step {k}"),
        None => "not yet stabilized".to_string(),
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub assembly: Assembly,
    pub solution: SdpSolution,
    pub certificates: CertificateSet,
}

pub fn assemble_only(problem: &Problem, cfg: &RelaxationConfig) -> Result<Assembly> {
    assemble(&problem.system, &problem.region, cfg).with_context(|| format!("assembling {}", problem.name))
}

/// Assemble, solve, recover.
pub fn run(problem: &Problem, cfg: &RelaxationConfig, opts: &SolverOptions) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let assembly = assemble_only(problem, cfg)?;
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let solution = solve(&assembly.problem, opts).with_context(|| format!("solving {}", problem.name))?;
    let certificates = recover(&assembly, &solution);
    let report = make_report(problem, &assembly, &solution, &certificates, assemble_seconds);
    Ok(RunOutcome { report, assembly, solution, certificates })
}

fn make_report(
    problem: &Problem,
    asm: &Assembly,
    sol: &SdpSolution,
    cert: &CertificateSet,
    assemble_seconds: f64,
) -> RunReport {
    let cfg = &asm.config;
    let st = &asm.structure;
    RunReport {
        problem: problem.name.clone(),
        mode: cfg.mode.to_string(),
        two_d: 2 * cfg.d,
        s: cfg.s,
        l: cfg.l,
        beta: cfg.beta,
        extension: cfg.extension.to_string(),
        a_chain_sizes: st.chain.as_ref().map(|c| c.a_sets.iter().map(|s| s.len()).collect()).unwrap_or_default(),
        a_stabilized_at: st.chain.as_ref().and_then(|c| c.stabilization_index()),
        b_chain_sizes: st.w_chain.as_ref().map(|c| c.b_sets.iter().map(|s| s.len()).collect()).unwrap_or_default(),
        b_stabilized_at: st.w_chain.as_ref().and_then(|c| c.stabilization_index()),
        a_blocks: asm.block_sizes(Certificate::A),
        b_blocks: asm.block_sizes(Certificate::B),
        c_blocks: asm.block_sizes(Certificate::C),
        constraints: asm.problem.num_constraints(),
        free_vars: asm.problem.free_vars.len(),
        gram_scalars: asm.gram_scalars(),
        status: sol.status.to_string(),
        opt: sol.objective,
        dual: sol.dual_objective,
        primal_infeasibility: sol.residuals.primal_infeasibility,
        dual_infeasibility: sol.residuals.dual_infeasibility,
        relative_gap: sol.residuals.relative_gap,
        identity_residual: cert.max_identity_residual,
        certificate_ok: cert.residual_ok && cert.psd_ok,
        iterations: sol.iterations,
        assemble_seconds,
        solve_seconds: sol.seconds,
    }
}

/// Objective, status, residuals, and per-block spectra.
pub fn solution_dump(asm: &Assembly, sol: &SdpSolution) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "status {}", sol.status);
    let _ = writeln!(o, "objective {}", sol.objective);
    let _ = writeln!(o, "dual_objective {}", sol.dual_objective);
    let r = &sol.residuals;
    let _ = writeln!(
        o,
        "residuals primal {:e} dual {:e} gap {:e} slack {:e}",
        r.primal_infeasibility, r.dual_infeasibility, r.relative_gap, r.duality_slack
    );
    for (k, blk) in asm.problem.blocks.iter().enumerate() {
        let spec: Vec<String> = sol.block_spectrum(&asm.problem, k).iter().map(|v| format!("{v:.6e}")).collect();
        let _ = writeln!(o, "block {} dim {} spectrum {}", blk.label, blk.dim, spec.join(" "));
    }
    o
}
