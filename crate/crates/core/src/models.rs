//! Built-in test systems and the random quadratic-gain model generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poly::Polynomial;
use crate::system::{BoxSet, DynamicalSystem, Problem};
use crate::CoreError;

fn build(name: &str, vars: &[&str], dynamics: &[&str]) -> Problem {
    let region = BoxSet::symmetric(vars.len(), 1.0);
    let cons: Vec<String> = vars.iter().map(|v| format!("1 - {v}^2")).collect();
    let cons: Vec<&str> = cons.iter().map(String::as_str).collect();
    let system = DynamicalSystem::parse(vars, dynamics, &cons).expect("built-in system parses");
    Problem { name: name.to_string(), system, region, config: None }
}

/// Classical Lorenz system on `[−1, 1]³`.
pub fn lorenz() -> Problem {
    build("lorenz", &["x1", "x2", "x3"], &["10*(x2 - x1)", "x1*(28 - x3) - x2", "x1*x2 - 8/3*x3"])
}

/// Cubic system coupled through `x2`, decoupled by variable cliques
/// `{x1, x2}` and `{x2, x3}`, on `[−1, 1]³`.
pub fn coupled_cubic() -> Problem {
    build(
        "coupled-cubic",
        &["x1", "x2", "x3"],
        &["(x1^2 + x2^2 - 1/4)*x1", "(x2^2 + x3^2 - 1/4)*x2", "(x2^2 + x3^2 - 1/4)*x3"],
    )
}

/// Same cubic structure with a linear middle equation, on `[−1, 1]³`.
pub fn linear_middle_cubic() -> Problem {
    build(
        "linear-middle-cubic",
        &["x1", "x2", "x3"],
        &["(x1^2 + x2^2 - 1/4)*x1", "x2", "(x2^2 + x3^2 - 1/4)*x3"],
    )
}

/// Five-state extension of Lorenz on `[−1, 1]⁵`.
pub fn extended_lorenz() -> Problem {
    build(
        "extended-lorenz",
        &["x1", "x2", "x3", "x4", "x5"],
        &[
            "10*x1 - 12*x2",
            "-70/3*x1 + x2 + 125/3*x1*x3",
            "8/3*x3 - 15*x1*x2",
            "10*(x4 - x1)",
            "x1*(28 - x3) - x5",
        ],
    )
}

pub const BUILTIN_NAMES: [&str; 4] = ["lorenz", "coupled-cubic", "linear-middle-cubic", "extended-lorenz"];

pub fn builtin(name: &str) -> Option<Problem> {
    match name {
        "lorenz" => Some(lorenz()),
        "coupled-cubic" => Some(coupled_cubic()),
        "linear-middle-cubic" => Some(linear_middle_cubic()),
        "extended-lorenz" => Some(extended_lorenz()),
        _ => None,
    }
}

/// A sampled instance of `ẋ_i = (xᵀBx − 1) x_i` on `[−1, 1]ⁿ`.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub n: usize,
    pub seed: u64,
    /// Edges `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Row-major `n × n` symmetric matrix.
    pub b: Vec<f64>,
    /// Number of matrices drawn until one was positive definite.
    pub draws: usize,
    pub problem: Problem,
}

pub const MAX_DRAWS: usize = 1000;

/// Samples a graph with `n − 4` edges uniformly (seeded shuffle of all
/// pairs), then draws `B_ii ∈ U[1, 2]` and `B_ij ∈ U[−½, ½]` on edges until
/// `B` is positive definite.
pub fn random_model(n: usize, seed: u64) -> Result<RandomModel, CoreError> {
    if n < 5 {
        return Err(CoreError::Invalid("random models need n ≥ 5 (the graph has n − 4 edges)".into()));
    }
    if n > 64 {
        return Err(CoreError::Invalid("random models support at most 64 variables".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut rng);
    let mut edges: Vec<(usize, usize)> = pairs[..n - 4].to_vec();
    edges.sort_unstable();

    let mut draws = 0;
    let b = loop {
        if draws == MAX_DRAWS {
            return Err(CoreError::Invalid(format!("no positive definite B after {MAX_DRAWS} draws")));
        }
        draws += 1;
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            b[i * n + i] = rng.gen_range(1.0..=2.0);
        }
        for &(i, j) in &edges {
            let v = rng.gen_range(-0.5..=0.5);
            b[i * n + j] = v;
            b[j * n + i] = v;
        }
        let mat = faer::MatRef::from_row_major_slice(&b, n, n);
        if mat.llt(faer::Side::Lower).is_ok() {
            break b;
        }
    };

    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut q = Polynomial::constant(n, -1.0);
    for i in 0..n {
        for j in 0..n {
            if b[i * n + j] != 0.0 {
                q = q.add(&Polynomial::var(n, i).mul(&Polynomial::var(n, j)).scale(b[i * n + j]));
            }
        }
    }
    let field: Vec<Polynomial> = (0..n).map(|i| q.mul(&Polynomial::var(n, i))).collect();
    let region = BoxSet::symmetric(n, 1.0);
    let system = DynamicalSystem::new(names, field, region.constraint_polynomials())?;
    let problem = Problem { name: format!("random-n{n}-seed{seed}"), system, region, config: None };
    Ok(RandomModel { n, seed, edges, b, draws, problem })
}
