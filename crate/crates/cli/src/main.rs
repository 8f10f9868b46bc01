use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use tsdyn_cli::{assemble_only, load_problem, run, solution_dump, RunReport, CSV_HEADER};
use tsdyn_core::models::random_model;
use tsdyn_core::relax::{grid_csv, outer_approx_grid, Certificate, Mode, RelaxationConfig};
use tsdyn_core::sparsity::vertex_basis;
use tsdyn_core::symmetry::{sign_symmetries, symmetry_blocks};
use tsdyn_core::system::{Problem, ProblemFile};
use tsdyn_sdp::{export_sdpa, parse_sdpa, SdpSolution, SolverOptions};

/// Outer approximations of maximum positively invariant sets via sparse
/// SOS relaxations.
#[derive(Parser)]
#[command(name = "tsdyn", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble, solve and report one relaxation.
    Run {
        /// Problem file (JSON) or built-in name.
        problem: String,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the text report here (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Append a CSV row (header written if the file is new).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the SDP in SDPA sparse format.
        #[arg(long)]
        sdpa: Option<PathBuf>,
        /// Write objective, status, residuals and block spectra.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Write grid points with w ≥ 1 as CSV.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Grid points per axis.
        #[arg(long, default_value_t = 41)]
        grid_res: usize,
        /// Write the support chains (TS mode) as text.
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Sweep relaxation orders and modes; one row per (2d, mode).
    Compare {
        problem: String,
        /// Relaxation orders d (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<u32>,
        /// Modes (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "ts,ss,fd")]
        modes: Vec<String>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        extension: Option<String>,
        /// Parallel cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the sign-symmetry group and the induced Gram block sizes.
    Symmetries {
        problem: String,
        #[arg(long)]
        d: Option<u32>,
    },
    /// Generate ẋ_i = (xᵀBx − 1) x_i with a random (n − 4)-edge graph.
    RandomModel {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the support chains and Gram block sizes without solving.
    Chain {
        problem: String,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also list every set and graph edge.
        #[arg(long)]
        full: bool,
    },
    /// Write the assembled SDP in SDPA sparse format.
    ExportSdpa {
        problem: String,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an SDPA sparse file with the internal solver.
    SolveSdpa {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve and write the grid points where w ≥ 1 as CSV.
    Grid {
        problem: String,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Points per axis.
        #[arg(long, default_value_t = 41)]
        res: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Relaxation order d (polynomials of degree 2d).
    #[arg(long)]
    d: Option<u32>,
    /// v-side sparsity iterations.
    #[arg(long)]
    s: Option<usize>,
    /// w-side sparsity iterations.
    #[arg(long)]
    l: Option<usize>,
    /// ts, ss or fd.
    #[arg(long)]
    mode: Option<String>,
    /// maximal or min-degree.
    #[arg(long)]
    extension: Option<String>,
    /// Discount factor.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative gap and feasibility tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Print solver iterations to stderr.
    #[arg(long)]
    verbose: bool,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            gap_tol: self.tol,
            feas_tol: self.tol,
            max_iter: self.max_iter,
            verbose: self.verbose,
            ..SolverOptions::default()
        }
    }
}

/// Flags override the problem file, which overrides the defaults.
fn resolve(problem: &Problem, args: &ConfigArgs) -> Result<RelaxationConfig> {
    let mut cfg = RelaxationConfig { d: problem.system.min_order(), ..RelaxationConfig::default() };
    if let Some(file) = &problem.config {
        cfg = file.apply(&cfg)?;
    }
    if let Some(d) = args.d {
        cfg.d = d;
    }
    if let Some(s) = args.s {
        cfg.s = s;
    }
    if let Some(l) = args.l {
        cfg.l = l;
    }
    if let Some(m) = &args.mode {
        cfg.mode = m.parse()?;
    }
    if let Some(e) = &args.extension {
        cfg.extension = e.parse()?;
    }
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    cfg.validate(&problem.system)?;
    Ok(cfg)
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => out(text),
    }
}

/// Writes to stdout; a closed pipe (`tsdyn … | head`) is not an error.
fn out(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.context("writing to stdout"),
    }
}

fn append_csv(path: &PathBuf, rows: &[String]) -> Result<()> {
    let mut text = String::new();
    if !path.exists() {
        text.push_str(CSV_HEADER);
        text.push('\n');
    }
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    use std::io::Write;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { problem, cfg, solver, report, csv, sdpa, solution, grid, grid_res, chain, json } => {
            let p = load_problem(&problem)?;
            let cfg = resolve(&p, &cfg)?;
            let out = run(&p, &cfg, &solver.options())?;
            let text = if json { serde_json::to_string_pretty(&out.report)? + "\n" } else { out.report.text() };
            write_or_print(report.as_ref(), &text)?;
            if let Some(path) = csv {
                append_csv(&path, &[out.report.csv_row()])?;
            }
            if let Some(path) = sdpa {
                fs::write(&path, export_sdpa(&out.assembly.problem))?;
            }
            if let Some(path) = solution {
                fs::write(&path, solution_dump(&out.assembly, &out.solution))?;
            }
            if let Some(path) = grid {
                let res = vec![grid_res; p.system.dim()];
                let pts = outer_approx_grid(&out.certificates.w, &p.region, &res)?;
                fs::write(&path, grid_csv(&p.system.names, &pts))?;
            }
            if let Some(path) = chain {
                fs::write(&path, chain_dump(&p, &out.assembly))?;
            }
            if !out.report.certificate_ok {
                eprintln!("warning: recovered certificate failed the residual or PSD check");
            }
        }
        Cmd::Compare { problem, d, modes, s, l, beta, extension, jobs, solver, csv } => {
            let p = load_problem(&problem)?;
            let base = ConfigArgs { d: None, s, l, mode: None, extension, beta };
            let modes: Vec<Mode> = modes.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
            let mut cells = Vec::new();
            for &dd in &d {
                for &m in &modes {
                    let mut a = base.clone();
                    a.d = Some(dd);
                    a.mode = Some(m.to_string());
                    cells.push(resolve(&p, &a)?);
                }
            }
            let opts = solver.options();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
            let results: Vec<Result<RunReport, String>> = pool.install(|| {
                cells
                    .par_iter()
                    .map(|cfg| run(&p, cfg, &opts).map(|o| o.report).map_err(|e| format!("{e:#}")))
                    .collect()
            });
            let mut rows = Vec::new();
            let mut table = String::new();
            let _ = writeln!(
                table,
                "{:>4} {:>4} {:>14} {:>12} {:>10} {:>9} {:>9}",
                "2d", "mode", "status", "opt", "time(s)", "max blk", "#blocks"
            );
            for (cfg, r) in cells.iter().zip(&results) {
                match r {
                    Ok(r) => {
                        let _ = writeln!(
                            table,
                            "{:>4} {:>4} {:>14} {:>12.6} {:>10.2} {:>9} {:>9}",
                            r.two_d,
                            r.mode,
                            r.status,
                            r.opt,
                            r.solve_seconds + r.assemble_seconds,
                            r.max_block(),
                            r.num_blocks()
                        );
                        rows.push(r.csv_row());
                    }
                    Err(e) => {
                        let _ = writeln!(table, "{:>4} {:>4} failed: {e}", 2 * cfg.d, cfg.mode);
                    }
                }
            }
            out(&table)?;
            if let Some(path) = csv {
                let mut text = String::from(CSV_HEADER);
                text.push('\n');
                for r in &rows {
                    text.push_str(r);
                    text.push('\n');
                }
                fs::write(&path, text)?;
            }
            if results.iter().any(Result::is_err) {
                bail!("some cells failed");
            }
        }
        Cmd::Symmetries { problem, d } => {
            let p = load_problem(&problem)?;
            let d = d.unwrap_or(p.system.min_order()).max(p.system.min_order());
            let g = sign_symmetries(&p.system, d);
            let mut o = format!("rank {}\n", g.rank());
            for &r in &g.basis {
                let _ = writeln!(o, "r {}", g.format_vector(r));
            }
            for j in 0..=p.system.num_constraints() {
                let basis = vertex_basis(&p.system, d, j);
                let mut sizes: Vec<usize> = symmetry_blocks(&g, &basis).iter().map(Vec::len).collect();
                sizes.sort_unstable_by(|a, b| b.cmp(a));
                let _ = writeln!(o, "j {j} basis {} blocks {sizes:?}", basis.len());
            }
            out(&o)?;
        }
        Cmd::RandomModel { n, seed, out } => {
            let m = random_model(n, seed)?;
            write_or_print(out.as_ref(), &ProblemFile::from_problem(&m.problem).to_json())?;
        }
        Cmd::Chain { problem, cfg, full } => {
            let p = load_problem(&problem)?;
            let cfg = resolve(&p, &cfg)?;
            let asm = assemble_only(&p, &cfg)?;
            let st = &asm.structure;
            let mut o = String::new();
            let stab = |k: Option<usize>| k.map_or("not yet stabilized".to_string(), |k| format!("stabilized at step {k}"));
            if let Some(ch) = &st.chain {
                let sizes: Vec<usize> = ch.a_sets.iter().map(|a| a.len()).collect();
                let _ = writeln!(o, "A chain sizes {sizes:?} {}", stab(ch.stabilization_index()));
            }
            if let Some(ch) = &st.w_chain {
                let sizes: Vec<usize> = ch.b_sets.iter().map(|b| b.len()).collect();
                let _ = writeln!(o, "B chain sizes {sizes:?} {}", stab(ch.stabilization_index()));
            }
            let _ = writeln!(o, "|v support| {}  |w support| {}", st.v_support.len(), st.w_support.len());
            for j in 0..=p.system.num_constraints() {
                let _ = writeln!(o, "a{j} blocks {:?}", asm.a_block_sizes(j));
            }
            let _ = writeln!(o, "b blocks {:?}", asm.block_sizes(Certificate::B));
            let _ = writeln!(o, "c blocks {:?}", asm.block_sizes(Certificate::C));
            if full {
                o.push_str(&chain_dump(&p, &asm));
            }
            out(&o)?;
        }
        Cmd::ExportSdpa { problem, cfg, out } => {
            let p = load_problem(&problem)?;
            let cfg = resolve(&p, &cfg)?;
            let asm = assemble_only(&p, &cfg)?;
            write_or_print(out.as_ref(), &export_sdpa(&asm.problem))?;
        }
        Cmd::SolveSdpa { file, solver } => {
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let sdp = parse_sdpa(&text)?;
            let sol = tsdyn_sdp::solve(&sdp, &solver.options())?;
            out(&solution_summary(&sol))?;
        }
        Cmd::Grid { problem, cfg, solver, res, out } => {
            let p = load_problem(&problem)?;
            let cfg = resolve(&p, &cfg)?;
            let o = run(&p, &cfg, &solver.options())?;
            let pts = outer_approx_grid(&o.certificates.w, &p.region, &vec![res; p.system.dim()])?;
            write_or_print(out.as_ref(), &grid_csv(&p.system.names, &pts))?;
        }
    }
    Ok(())
}

fn chain_dump(p: &Problem, asm: &tsdyn_core::Assembly) -> String {
    let names = &p.system.names;
    let mut o = String::new();
    if let Some(ch) = &asm.structure.chain {
        for (k, a) in ch.a_sets.iter().enumerate() {
            let _ = writeln!(o, "A^{} ({}): {}", k + 1, a.len(), a.display_with(names));
        }
        for (k, gs) in ch.g_graphs.iter().enumerate() {
            let _ = writeln!(o, "G^{}_0 edges:\n{}", k + 1, gs[0].edge_list(names));
        }
    }
    if let Some(ch) = &asm.structure.w_chain {
        for (k, b) in ch.b_sets.iter().enumerate() {
            let _ = writeln!(o, "B^{} ({}): {}", k + 1, b.len(), b.display_with(names));
        }
        for (k, hs) in ch.h_graphs.iter().enumerate() {
            let _ = writeln!(o, "H^{}_0 edges:\n{}", k + 1, hs[0].edge_list(names));
        }
    }
    if o.is_empty() {
        o.push_str("no support chain in this mode\n");
    }
    o
}

fn solution_summary(sol: &SdpSolution) -> String {
    let r = &sol.residuals;
    format!(
        "status {} after {} iterations\nprimal objective {:.9}\ndual objective {:.9}\nresiduals primal {:.2e} dual {:.2e} gap {:.2e}\n",
        sol.status, sol.iterations, sol.objective, sol.dual_objective, r.primal_infeasibility, r.dual_infeasibility, r.relative_gap
    )
}
