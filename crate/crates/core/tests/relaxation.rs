use tsdyn_core::models;
use tsdyn_core::relax::{assemble, recover, Mode};
use tsdyn_core::symmetry::sign_symmetries;
use tsdyn_core::{Problem, RelaxationConfig};
use tsdyn_sdp::{solve, SolveStatus, SolverOptions};

fn optimum(p: &Problem, cfg: &RelaxationConfig) -> f64 {
    let asm = assemble(&p.system, &p.region, cfg).unwrap();
    let sol = solve(&asm.problem, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal, "{} {}", p.name, cfg.mode);
    let cert = recover(&asm, &sol);
    assert!(cert.residual_ok, "identity residual {}", cert.max_identity_residual);
    assert!(cert.psd_ok, "min scaled eigenvalue {}", cert.min_scaled_eigenvalue);
    assert!((cert.objective - sol.objective).abs() <= 1e-8 * (1.0 + sol.objective.abs()));
    sol.objective
}

fn cfg(d: u32, mode: Mode) -> RelaxationConfig {
    RelaxationConfig { d, mode, ..Default::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn lorenz_order_two() {
    let p = models::lorenz();
    let ts1 = optimum(&p, &cfg(2, Mode::Ts));
    let ts2 = optimum(&p, &RelaxationConfig { s: 2, ..cfg(2, Mode::Ts) });
    let ss = optimum(&p, &cfg(2, Mode::Ss));
    let fd = optimum(&p, &cfg(2, Mode::Fd));
    assert!(rel(ss, fd) < 1e-6, "SS {ss} FD {fd}");
    assert!(rel(ts2, fd) < 1e-6, "TS(s=2) {ts2} FD {fd}");
    // Regression values from this solver.
    assert!(rel(ts1, 5.567028) < 1e-6, "{ts1}");
    assert!(rel(fd, 4.554011) < 1e-6, "{fd}");
}

#[test]
fn symmetry_reduction_keeps_the_dense_optimum() {
    for (p, d) in [(models::coupled_cubic(), 2), (models::linear_middle_cubic(), 2), (models::extended_lorenz(), 1)] {
        let ss = optimum(&p, &cfg(d, Mode::Ss));
        let fd = optimum(&p, &cfg(d, Mode::Fd));
        assert!(rel(ss, fd) < 1e-6, "{}: SS {ss} FD {fd}", p.name);
    }
}

#[test]
fn sparse_supports_are_nested_in_dense_ones() {
    for name in models::BUILTIN_NAMES {
        let p = models::builtin(name).unwrap();
        let d = p.system.min_order().max(2);
        let fd = assemble(&p.system, &p.region, &cfg(d, Mode::Fd)).unwrap();
        let ss = assemble(&p.system, &p.region, &cfg(d, Mode::Ss)).unwrap();
        let group = sign_symmetries(&p.system, d);
        for s in 1..=3 {
            let ts = assemble(&p.system, &p.region, &RelaxationConfig { s, ..cfg(d, Mode::Ts) }).unwrap();
            assert!(ts.structure.v_support.is_subset(&fd.structure.v_support), "{name}");
            assert!(ts.structure.w_support.is_subset(&fd.structure.w_support), "{name}");
            assert!(ts.structure.v_support.iter().all(|a| group.in_r_perp(a)), "{name}");
        }
        assert!(ss.structure.w_support.iter().all(|a| group.in_r_perp(a)), "{name}");
        assert!(ss.problem.num_constraints() <= fd.problem.num_constraints());
    }
}

#[test]
fn other_discount_factors_solve() {
    let p = models::lorenz();
    let lo = optimum(&p, &RelaxationConfig { beta: 0.5, ..cfg(2, Mode::Ss) });
    let hi = optimum(&p, &RelaxationConfig { beta: 2.0, ..cfg(2, Mode::Ss) });
    assert!(lo.is_finite() && hi.is_finite());
    assert!(lo > 0.0 && hi > 0.0);
}
