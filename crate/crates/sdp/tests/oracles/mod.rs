//! Shared test instances and an independent first-order oracle.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsdyn_sdp::{BlockEntry, BlockKind, LinearForm, SdpProblem, SdpSolution};

pub fn entries(v: &[(usize, usize, usize, f64)]) -> LinearForm {
    LinearForm { free: vec![], entries: v.iter().map(|&(b, r, c, x)| BlockEntry::new(b, r, c, x)).collect() }
}

/// min t s.t. [[t,1],[1,t]] ⪰ 0, posed as: min <C,X> s.t. <-I,X> = -1 with
/// C = [[0,1],[1,0]]. The dual multiplier is t.
pub fn eigenvalue_sdp() -> SdpProblem {
    let mut p = SdpProblem::new();
    p.add_block("X", 2, BlockKind::Psd);
    p.objective = entries(&[(0, 0, 1, 1.0)]);
    p.add_constraint("trace", entries(&[(0, 0, 0, -1.0), (0, 1, 1, -1.0)]), -1.0);
    p
}

/// Weak duality, up to the slack allowed by the iterate's own residuals,
/// and PSD primal blocks.
pub fn invariant_violation(p: &SdpProblem, s: &SdpSolution) -> Option<String> {
    if s.objective - s.dual_objective < -s.residuals.duality_slack - 1e-9 {
        return Some(format!(
            "weak duality: p={} d={} slack={}",
            s.objective, s.dual_objective, s.residuals.duality_slack
        ));
    }
    let lams = s.block_min_eigenvalues(p);
    for ((b, v), lam) in p.blocks.iter().zip(&s.block_values).zip(lams) {
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lam < -1e-8 * (1.0 + nrm) {
            return Some(format!("block {} min eigenvalue {lam}", b.label));
        }
    }
    None
}

pub fn check_invariants(p: &SdpProblem, s: &SdpSolution) {
    if let Some(msg) = invariant_violation(p, s) {
        panic!("{msg}");
    }
}

// ---------------------------------------------------------------------------
// Independent first-order oracle: ADMM on the dual (alternating direction
// augmented Lagrangian), with a self-contained Jacobi eigensolver.

pub type M3 = [[f64; 3]; 3];

pub fn jacobi_eigen(a: &M3) -> ([f64; 3], M3) {
    let mut a = *a;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for p in 0..3 {
            for q in p + 1..3 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..3 {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

pub fn psd_part(a: &M3) -> M3 {
    let (w, v) = jacobi_eigen(a);
    let mut out = [[0.0; 3]; 3];
    for k in 0..3 {
        if w[k] > 0.0 {
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] += w[k] * v[i][k] * v[j][k];
                }
            }
        }
    }
    out
}

pub fn ip(a: &M3, b: &M3) -> f64 {
    (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a[i][j] * b[i][j]).sum()
}

pub fn solve_small(g: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let m = r.len();
    let mut a: Vec<Vec<f64>> = g.to_vec();
    let mut x = r.to_vec();
    for c in 0..m {
        let piv = (c..m).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, piv);
        x.swap(c, piv);
        for i in c + 1..m {
            let f = a[i][c] / a[c][c];
            for k in c..m {
                a[i][k] -= f * a[c][k];
            }
            x[i] -= f * x[c];
        }
    }
    for c in (0..m).rev() {
        for k in c + 1..m {
            x[c] -= a[c][k] * x[k];
        }
        x[c] /= a[c][c];
    }
    x
}

/// Primal optimum of min <C,X> s.t. <A_i,X> = b_i, X ⪰ 0 by dual ADMM.
pub fn admm_oracle(c: &M3, a: &[M3], b: &[f64]) -> f64 {
    let m = a.len();
    let gram: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| ip(&a[i], &a[j])).collect()).collect();
    let mu = 1.0;
    let mut x = [[0.0; 3]; 3];
    let mut s = [[0.0; 3]; 3];
    for _ in 0..200_000 {
        let rhs: Vec<f64> =
            (0..m).map(|i| mu * (b[i] - ip(&a[i], &x)) + ip(&a[i], c) - ip(&a[i], &s)).collect();
        let y = solve_small(&gram, &rhs);
        let mut v = *c;
        for i in 0..m {
            for p in 0..3 {
                for q in 0..3 {
                    v[p][q] -= y[i] * a[i][p][q];
                }
            }
        }
        let mut w = v;
        for p in 0..3 {
            for q in 0..3 {
                w[p][q] -= mu * x[p][q];
            }
        }
        s = psd_part(&w);
        let mut neg = [[0.0; 3]; 3];
        for p in 0..3 {
            for q in 0..3 {
                neg[p][q] = -w[p][q];
            }
        }
        let xn = psd_part(&neg);
        let mut change = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                let nv = xn[p][q] / mu;
                change += (nv - x[p][q]).powi(2);
                x[p][q] = nv;
            }
        }
        let pinf: f64 = (0..m).map(|i| (ip(&a[i], &x) - b[i]).powi(2)).sum::<f64>().sqrt();
        if change.sqrt() < 1e-12 && pinf < 1e-10 {
            break;
        }
    }
    ip(c, &x)
}

pub fn random_sym(rng: &mut ChaCha8Rng) -> M3 {
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v: f64 = rng.gen_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    a
}

/// Feasible and dual-feasible instance: b = A(X0) with X0 ≻ 0 and
/// C = S0 + Aᵀy0 with S0 ≻ 0.
pub fn random_instance(seed: u64) -> (M3, Vec<M3>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=4);
    let a: Vec<M3> = (0..m).map(|_| random_sym(&mut rng)).collect();
    let spd = |rng: &mut ChaCha8Rng| {
        let g = random_sym(rng);
        let mut p = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] = (0..3).map(|k| g[i][k] * g[j][k]).sum::<f64>() + if i == j { 0.2 } else { 0.0 };
            }
        }
        p
    };
    let x0 = spd(&mut rng);
    let s0 = spd(&mut rng);
    let b: Vec<f64> = a.iter().map(|ai| ip(ai, &x0)).collect();
    let mut c = s0;
    for ai in &a {
        let yi: f64 = rng.gen_range(-1.0..1.0);
        for p in 0..3 {
            for q in 0..3 {
                c[p][q] += yi * ai[p][q];
            }
        }
    }
    (c, a, b)
}

pub fn to_problem(c: &M3, a: &[M3], b: &[f64]) -> SdpProblem {
    let upper = |m: &M3| {
        let mut v = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                v.push((0, i, j, m[i][j]));
            }
        }
        entries(&v)
    };
    let mut p = SdpProblem::new();
    p.add_block("X", 3, BlockKind::Psd);
    p.objective = upper(c);
    for (i, (ai, &bi)) in a.iter().zip(b).enumerate() {
        p.add_constraint(format!("c{i}"), upper(ai), bi);
    }
    p
}

