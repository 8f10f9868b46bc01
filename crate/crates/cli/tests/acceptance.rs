//! One test per acceptance criterion. Each prints a single PASS/FAIL line to
//! the uncaptured stderr, so the summary shows up with or without
//! `--nocapture`.

#[path = "../../core/tests/oracles/mod.rs"]
mod core_oracles;
#[path = "../../sdp/tests/oracles/mod.rs"]
mod sdp_oracles;

use std::collections::BTreeSet;
use std::io::Write as _;
use std::time::Instant;

use tsdyn_cli::run;
use tsdyn_core::graphs::{maximal_chordal_extension, maximal_cliques};
use tsdyn_core::models::{self, random_model};
use tsdyn_core::poly::parse_polynomial;
use tsdyn_core::relax::{outer_approx_grid, Mode};
use tsdyn_core::sparsity::{initial_support, iterate_v_chain, iterate_w_chain, vertex_basis};
use tsdyn_core::symmetry::{sign_symmetries, symmetry_blocks};
use tsdyn_core::{DynamicalSystem, Exponent, Extension, MonomialGraph, Problem, RelaxationConfig, SupportSet};
use tsdyn_sdp::{solve, SolveStatus, SolverOptions};

fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n:>2}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn finish(n: u32, failures: &[String], detail: &str) {
    let pass = failures.is_empty();
    let text = if pass { detail.to_string() } else { format!("{detail}; {}", failures.join("; ")) };
    report(n, pass, &text);
    assert!(pass, "criterion {n}: {}", failures.join("; "));
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl Into<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn mono(sys: &DynamicalSystem, s: &str) -> Exponent {
    parse_polynomial(s, &sys.names).unwrap().terms().keys().next().unwrap().clone()
}

fn set(sys: &DynamicalSystem, items: &[&str]) -> SupportSet {
    SupportSet::from_iter(sys.dim(), items.iter().map(|s| mono(sys, s)))
}

fn edge_set(g: &MonomialGraph) -> BTreeSet<BTreeSet<Exponent>> {
    g.edge_set().into_iter().map(|(a, b)| [a, b].into_iter().collect()).collect()
}

fn edges(sys: &DynamicalSystem, pairs: &[(&str, &str)]) -> BTreeSet<BTreeSet<Exponent>> {
    pairs.iter().map(|(a, b)| [mono(sys, a), mono(sys, b)].into_iter().collect()).collect()
}

fn show(sys: &DynamicalSystem, s: &SupportSet) -> String {
    s.display_with(&sys.names)
}

fn bundled() -> Vec<Problem> {
    let mut out: Vec<Problem> = models::BUILTIN_NAMES.iter().map(|n| models::builtin(n).unwrap()).collect();
    for (n, seed) in [(6, 1), (7, 2), (8, 3), (9, 4), (10, 5)] {
        out.push(random_model(n, seed).unwrap().problem);
    }
    out
}

struct Solved {
    opt: f64,
    dual: f64,
    status: SolveStatus,
    seconds: f64,
}

fn solved(p: &Problem, cfg: RelaxationConfig) -> Solved {
    let t0 = Instant::now();
    let out = run(p, &cfg, &SolverOptions::default()).unwrap();
    Solved {
        opt: out.solution.objective,
        dual: out.solution.dual_objective,
        status: out.solution.status,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn cfg(d: u32, mode: Mode, s: usize, l: usize) -> RelaxationConfig {
    RelaxationConfig { d, s, l, mode, ..Default::default() }
}

const A1: [&str; 12] = [
    "1", "x1^2", "x2^2", "x3^2", "x1*x2", "x1*x2*x3", "x1^2*x2^2", "x1^2*x3^2", "x2^2*x3^2", "x1^4", "x2^4", "x3^4",
];

const A2_LISTED: [&str; 17] = [
    "1", "x1^2", "x2^2", "x3^2", "x1*x2", "x1*x2*x3", "x1^2*x2^2", "x1^2*x3^2", "x2^2*x3^2", "x1^4", "x2^4", "x3^4",
    "x3", "x3^3", "x1*x2*x3^2", "x1^3*x2", "x1*x2^3",
];

#[test]
fn criterion_01_lorenz_v_chain() {
    let t0 = Instant::now();
    let sys = models::lorenz().system;
    let mut f = Vec::new();
    check(&mut f, initial_support(&sys, 2) == set(&sys, &A1), "initial support differs from the 12 monomials");
    let chain = iterate_v_chain(&sys, 2, Extension::Maximal, 5);
    let sizes = maximal_cliques(&maximal_chordal_extension(chain.g(1, 0))).unwrap().sizes();
    check(&mut f, sizes == [6, 4], format!("clique sizes {sizes:?}"));
    let a2 = chain.a_set(2);
    let listed = set(&sys, &A2_LISTED);
    if a2 != &listed {
        let extra = SupportSet { dim: 3, elements: a2.elements.difference(&listed.elements).cloned().collect() };
        let missing = SupportSet { dim: 3, elements: listed.elements.difference(&a2.elements).cloned().collect() };
        f.push(format!(
            "A^2 has {} elements, listed set has 17 (extra: {}; missing: {})",
            a2.len(),
            show(&sys, &extra),
            show(&sys, &missing)
        ));
    }
    check(&mut f, chain.a_set(2) == chain.a_set(3) && chain.stabilization_index() == Some(2), "A^2 != A^3");
    let secs = t0.elapsed().as_secs_f64();
    check(&mut f, secs < 1.0, format!("took {secs:.2}s"));
    finish(1, &f, &format!("Lorenz d=2 supports and cliques ({secs:.3}s)"));
}

#[test]
fn criterion_02_lorenz_w_chain() {
    let t0 = Instant::now();
    let sys = models::lorenz().system;
    let mut f = Vec::new();
    let v = iterate_v_chain(&sys, 2, Extension::Maximal, 5);
    let w = iterate_w_chain(&sys, 2, v.a_set(1), Extension::Maximal, 5);
    let expected = edges(
        &sys,
        &[
            ("x3", "x1*x2"),
            ("1", "x1^2"),
            ("1", "x3^2"),
            ("1", "x2^2"),
            ("x1^2", "x3^2"),
            ("x1^2", "x2^2"),
            ("x3^2", "x2^2"),
            ("x1", "x2*x3"),
            ("x2", "x1*x3"),
            ("x1", "x2"),
            ("x1*x2", "1"),
        ],
    );
    check(&mut f, edge_set(w.h(1, 0)) == expected, "H edge set differs");
    let sizes = maximal_cliques(w.h_ext(1, 0)).unwrap().sizes();
    check(&mut f, sizes == [6, 4], format!("clique sizes {sizes:?}"));
    check(&mut f, w.b_set(2) == v.a_set(2), "B^{1,2} != A^2");
    check(&mut f, w.b_set(2) == w.b_set(3), "B^{1,2} != B^{1,3}");
    let secs = t0.elapsed().as_secs_f64();
    check(&mut f, secs < 1.0, format!("took {secs:.2}s"));
    finish(2, &f, &format!("Lorenz d=2 w-graph and chain ({secs:.3}s)"));
}

#[test]
fn criterion_03_sign_symmetries() {
    let mut f = Vec::new();
    let systems = bundled();
    for p in &systems {
        let brute = core_oracles::sign_symmetries(&p.system);
        let g = sign_symmetries(&p.system, p.system.min_order());
        check(&mut f, g.elements() == brute, format!("{}: GF(2) {:?} vs brute {:?}", p.name, g.elements(), brute));
    }
    let lorenz = sign_symmetries(&models::lorenz().system, 2);
    check(&mut f, lorenz.basis == [0b011], format!("Lorenz basis {:?}", lorenz.basis));
    finish(3, &f, &format!("{} systems match brute force; Lorenz group = <(1,1,0)>", systems.len()));
}

#[test]
fn criterion_04_cliques_converge_to_symmetry_blocks() {
    let mut f = Vec::new();
    let mut cases = 0;
    for p in bundled() {
        let sys = &p.system;
        // At d = 1 v is linear; see the Lorenz exception in the core tests.
        let d = sys.min_order().max(2);
        let group = sign_symmetries(sys, d);
        let v = iterate_v_chain(sys, d, Extension::Maximal, 20);
        let s = v.a_sets.len();
        let w = iterate_w_chain(sys, d, v.a_set(s), Extension::Maximal, 20);
        let l = w.b_sets.len();
        check(&mut f, v.stabilized_s && w.stabilized_l, format!("{}: chains did not stabilize", p.name));
        for j in 0..=sys.num_constraints() {
            let blocks = symmetry_blocks(&group, &vertex_basis(sys, d, j));
            let a = maximal_cliques(v.g_ext(s, j)).unwrap().cliques;
            let b = maximal_cliques(w.h_ext(l, j)).unwrap().cliques;
            check(&mut f, a == blocks, format!("{} d={d}: a_{j} cliques differ from symmetry blocks", p.name));
            check(&mut f, b == blocks, format!("{} d={d}: b_{j} cliques differ from symmetry blocks", p.name));
            cases += 2;
        }
    }
    finish(4, &f, &format!("{cases} stabilized Gram patterns equal the symmetry blocks"));
}

#[test]
fn criterion_05_monotonicity() {
    let t0 = Instant::now();
    let p = models::coupled_cubic();
    let tol = 1e-6;
    let le = |a: f64, b: f64| a <= b + tol * b.abs();
    let mut f = Vec::new();
    let orders = [3u32, 4, 5];
    let mut theta = std::collections::BTreeMap::new();
    let mut dense = std::collections::BTreeMap::new();
    for &d in &orders {
        for s in 1..=2 {
            for l in 1..=2 {
                let r = solved(&p, cfg(d, Mode::Ts, s, l));
                check(&mut f, r.status != SolveStatus::InfeasibleFlag, format!("2d={} s={s} l={l} infeasible", 2 * d));
                theta.insert((d, s, l), r.opt);
            }
        }
        dense.insert(d, solved(&p, cfg(d, Mode::Fd, 1, 1)).opt);
    }
    let mut checked = 0;
    for &d in &orders {
        for s in 1..=2 {
            for l in 1..=2 {
                let t = theta[&(d, s, l)];
                if let Some(&next) = theta.get(&(d + 1, s, l)) {
                    check(&mut f, le(next, t), format!("theta(2d={},{s},{l}) = {next} > theta(2d={}) = {t}", 2 * d + 2, 2 * d));
                    checked += 1;
                }
                if s == 1 {
                    let up = theta[&(d, 2, l)];
                    check(&mut f, le(up, t), format!("2d={}: s=2 {up} > s=1 {t}", 2 * d));
                    checked += 1;
                }
                if l == 1 {
                    let up = theta[&(d, s, 2)];
                    check(&mut f, le(up, t), format!("2d={}: l=2 {up} > l=1 {t}", 2 * d));
                    checked += 1;
                }
                check(&mut f, le(dense[&d], t), format!("2d={}: dense {} > sparse {t}", 2 * d, dense[&d]));
                checked += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(&mut f, secs < 120.0, format!("took {secs:.1}s"));
    let values: Vec<String> = orders.iter().map(|d| format!("2d={}: {:.6}/{:.6}", 2 * d, theta[&(*d, 1, 1)], dense[d])).collect();
    finish(5, &f, &format!("{checked} inequalities at 1e-6 (TS/FD {}) in {secs:.1}s", values.join(", ")));
}

#[test]
fn criterion_06_extended_lorenz_order_eight() {
    let p = models::extended_lorenz();
    let mut f = Vec::new();
    let ts = solved(&p, cfg(4, Mode::Ts, 2, 1));
    let ss = solved(&p, cfg(4, Mode::Ss, 3, 1));
    let fd = solved(&p, cfg(4, Mode::Fd, 1, 1));
    check(&mut f, within(ts.opt, 3.31, 0.03), format!("TS {:.4} not within 3% of 3.31", ts.opt));
    check(&mut f, within(ss.opt, 3.24, 0.03), format!("SS {:.4} not within 3% of 3.24", ss.opt));
    check(&mut f, within(fd.opt, 3.24, 0.03), format!("FD {:.4} not within 3% of 3.24", fd.opt));
    let diff = (ss.opt - fd.opt).abs() / fd.opt.abs();
    check(&mut f, diff <= 1e-4, format!("|SS - FD| = {diff:.2e} relative (duals {:.6} / {:.6})", ss.dual, fd.dual));
    finish(
        6,
        &f,
        &format!(
            "TS {:.4} [{}] ({:.0}s), SS {:.4} [{}] ({:.0}s), FD {:.4} [{}] ({:.0}s)",
            ts.opt, ts.status, ts.seconds, ss.opt, ss.status, ss.seconds, fd.opt, fd.status, fd.seconds
        ),
    );
}

#[test]
fn criterion_07_cubic_systems_order_eighteen() {
    let mut f = Vec::new();
    let mut parts = Vec::new();
    for (p, ts_ref, dense_ref) in [(models::coupled_cubic(), 2.86, 1.66), (models::linear_middle_cubic(), 1.79, 0.68)] {
        let ts = solved(&p, cfg(9, Mode::Ts, 1, 1));
        let ss = solved(&p, cfg(9, Mode::Ss, 1, 1));
        let fd = solved(&p, cfg(9, Mode::Fd, 1, 1));
        check(&mut f, within(ts.opt, ts_ref, 0.03), format!("{} TS {:.4} not within 3% of {ts_ref}", p.name, ts.opt));
        for (name, r) in [("SS", &ss), ("FD", &fd)] {
            check(&mut f, within(r.opt, dense_ref, 0.03), format!("{} {name} {:.4} not within 3% of {dense_ref}", p.name, r.opt));
            check(&mut f, r.seconds < 1800.0, format!("{} {name} took {:.0}s", p.name, r.seconds));
        }
        parts.push(format!(
            "{}: TS {:.4} SS {:.4} FD {:.4} ({:.0}s/{:.0}s/{:.0}s)",
            p.name, ts.opt, ss.opt, fd.opt, ts.seconds, ss.seconds, fd.seconds
        ));
    }
    finish(7, &f, &parts.join(", "));
}

#[test]
fn criterion_08_solver_suite() {
    let mut f = Vec::new();
    let opts = SolverOptions::default();
    let eig = sdp_oracles::eigenvalue_sdp();
    let s = solve(&eig, &opts).unwrap();
    check(&mut f, (s.objective + 1.0).abs() <= 1e-4 && (s.duals[0] - 1.0).abs() <= 1e-4, format!("eigenvalue SDP t = {}", s.duals[0]));
    let mut invariants = vec![(eig, s)];

    let mut gram = tsdyn_sdp::SdpProblem::new();
    gram.add_block("Q", 2, tsdyn_sdp::BlockKind::Psd);
    gram.add_constraint("1", sdp_oracles::entries(&[(0, 0, 0, 1.0)]), 1.0);
    gram.add_constraint("x", sdp_oracles::entries(&[(0, 0, 1, 1.0)]), 0.0);
    gram.add_constraint("x^2", sdp_oracles::entries(&[(0, 1, 1, 1.0)]), 1.0);
    let s = solve(&gram, &opts).unwrap();
    let q = &s.block_values[0];
    check(&mut f, (q[0] - 1.0).abs() <= 1e-4 && q[1].abs() <= 1e-4 && (q[3] - 1.0).abs() <= 1e-4, format!("Gram of x^2+1 = {q:?}"));
    invariants.push((gram, s));

    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (c, a, b) = sdp_oracles::random_instance(seed);
        let oracle = sdp_oracles::admm_oracle(&c, &a, &b);
        let p = sdp_oracles::to_problem(&c, &a, &b);
        let s = solve(&p, &opts).unwrap();
        let err = (s.objective - oracle).abs() / (1.0 + oracle.abs());
        worst = worst.max(err);
        check(&mut f, err <= 1e-4, format!("random seed {seed}: ipm {} oracle {oracle}", s.objective));
        invariants.push((p, s));
    }
    for (p, s) in &invariants {
        if let Some(msg) = sdp_oracles::invariant_violation(p, s) {
            f.push(msg);
        }
    }
    finish(8, &f, &format!("12 instances, worst random-instance error {worst:.1e}, invariants hold"));
}

#[test]
fn criterion_09_random_models() {
    let mut f = Vec::new();
    let mut count = 0;
    for n in [6usize, 8, 10, 12] {
        for seed in 0..20u64 {
            let m = random_model(n, seed).unwrap();
            let tag = format!("n={n} seed={seed}");
            check(&mut f, m.edges.len() == n - 4, format!("{tag}: {} edges", m.edges.len()));
            check(&mut f, core_oracles::is_positive_definite(&m.b, n), format!("{tag}: B not PD"));
            let by_b = core_oracles::b_sparsity_symmetries(&m.b, n);
            let brute = core_oracles::sign_symmetries(&m.problem.system);
            let lib = sign_symmetries(&m.problem.system, 2).elements();
            check(&mut f, by_b == brute && lib == brute, format!("{tag}: symmetry characterization differs"));
            count += 1;
        }
    }
    finish(9, &f, &format!("{count} models: n-4 edges, B PD, B-sparsity symmetries = brute force = GF(2)"));
}

#[test]
fn criterion_10_documented_exclusions() {
    let mut f = Vec::new();
    let p = models::lorenz();
    let out = run(&p, &cfg(2, Mode::Ss, 1, 1), &SolverOptions::default()).unwrap();
    let grid = outer_approx_grid(&out.certificates.w, &p.region, &[9, 9, 9]).unwrap();
    check(&mut f, !grid.is_empty() && grid.len() < 729, format!("grid has {} of 729 points", grid.len()));
    check(&mut f, grid.iter().any(|(x, _)| x.iter().all(|v| v.abs() < 1e-12)), "origin not in the outer approximation");
    finish(
        10,
        &f,
        "timings, rendered plots, unsolved dense rows and the out-of-scope relaxation are not reproduced; \
         grid CSV data is produced instead",
    );
}
