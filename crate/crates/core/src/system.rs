//! Polynomial dynamical systems, box constraint sets, and the JSON problem file.
//!
//! Problem file fields:
//!
//! ```json
//! {
//!   "name": "lorenz",                              (optional)
//!   "variables": ["x1", "x2", "x3"],
//!   "dynamics": ["10*(x2 - x1)", "x1*(28 - x3) - x2", "x1*x2 - 8/3*x3"],
//!   "constraints": ["1 - x1^2", "1 - x2^2", "1 - x3^2"],   (optional)
//!   "box": [[-1, 1], [-1, 1], [-1, 1]],            (optional)
//!   "config": { "d": 2, "s": 1, "l": 1, "beta": 1.0,
//!               "mode": "ts", "extension": "maximal" }   (optional)
//! }
//! ```
//!
//! Polynomials use `+ - * / ^` and parentheses over the declared variable
//! names; division is only by constants. If `constraints` is omitted the box
//! generates them as `(hi − x_i)(x_i − lo) ≥ 0`. If `box` is omitted it is
//! read off constraints of that form (`r² − x_i²` included).

use serde::{Deserialize, Serialize};

use crate::poly::{parse_polynomial, Exponent, Polynomial};
use crate::relax::RelaxationConfig;
use crate::CoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalSystem {
    pub names: Vec<String>,
    /// `f_1..f_n`
    pub field: Vec<Polynomial>,
    /// `p_1..p_m`; `p_0 = 1` is implicit.
    pub constraints: Vec<Polynomial>,
}

impl DynamicalSystem {
    pub fn new(names: Vec<String>, field: Vec<Polynomial>, constraints: Vec<Polynomial>) -> Result<Self, CoreError> {
        let n = names.len();
        if n == 0 {
            return Err(CoreError::Invalid("system has no variables".into()));
        }
        if n > 64 {
            return Err(CoreError::Invalid("at most 64 variables are supported".into()));
        }
        if field.len() != n {
            return Err(CoreError::Invalid(format!("{} variables but {} dynamics components", n, field.len())));
        }
        if constraints.is_empty() {
            return Err(CoreError::Invalid("at least one constraint p_j is required".into()));
        }
        if field.iter().chain(&constraints).any(|p| p.dim() != n) {
            return Err(CoreError::Invalid("polynomial dimension mismatch".into()));
        }
        if let Some(k) = constraints.iter().position(Polynomial::is_zero) {
            return Err(CoreError::Invalid(format!("constraint {} is the zero polynomial", k + 1)));
        }
        Ok(Self { names, field, constraints })
    }

    /// Parses dynamics and constraints given as strings.
    pub fn parse(names: &[&str], dynamics: &[&str], constraints: &[&str]) -> Result<Self, CoreError> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let field = dynamics.iter().map(|s| parse_polynomial(s, &names)).collect::<Result<_, _>>()?;
        let cons = constraints.iter().map(|s| parse_polynomial(s, &names)).collect::<Result<_, _>>()?;
        Self::new(names, field, cons)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// `max_i deg f_i` (0 when every component vanishes).
    pub fn d_f(&self) -> u32 {
        self.field.iter().filter_map(Polynomial::degree).max().unwrap_or(0)
    }

    /// `deg p_j` for `j = 0..=m`, with `d_0 = 0`.
    pub fn d_j(&self, j: usize) -> u32 {
        if j == 0 {
            0
        } else {
            self.constraints[j - 1].degree().unwrap_or(0)
        }
    }

    pub fn d_p(&self) -> u32 {
        (1..=self.num_constraints()).map(|j| self.d_j(j)).max().unwrap_or(0)
    }

    /// Smallest relaxation order the hierarchy accepts:
    /// `max(⌈d_f/2⌉, ⌈d_p/2⌉)`, and at least 1.
    pub fn min_order(&self) -> u32 {
        self.d_f().div_ceil(2).max(self.d_p().div_ceil(2)).max(1)
    }

    /// `p_j` with `p_0 = 1`.
    pub fn p(&self, j: usize) -> Polynomial {
        if j == 0 {
            Polynomial::constant(self.dim(), 1.0)
        } else {
            self.constraints[j - 1].clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, CoreError> {
        if lo.len() != hi.len() {
            return Err(CoreError::Invalid("box bounds have different lengths".into()));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite()) {
            return Err(CoreError::Invalid(format!("box side {} is empty or unbounded", i + 1)));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(n: usize, r: f64) -> Self {
        Self { lo: vec![-r; n], hi: vec![r; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Constraints `(hi_i − x_i)(x_i − lo_i) ≥ 0`; `1 − x_i²` on `[−1, 1]`.
    pub fn constraint_polynomials(&self) -> Vec<Polynomial> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let x = Polynomial::var(n, i);
                let a = Polynomial::constant(n, self.hi[i]).sub(&x);
                let b = x.sub(&Polynomial::constant(n, self.lo[i]));
                a.mul(&b)
            })
            .collect()
    }

    /// Recognizes constraint sets made of one concave univariate quadratic per
    /// variable, `c0 + c1 x_i + c2 x_i²` with `c2 < 0` and two real roots.
    pub fn from_constraints(constraints: &[Polynomial]) -> Option<Self> {
        let n = constraints.first()?.dim();
        let mut lo = vec![f64::NAN; n];
        let mut hi = vec![f64::NAN; n];
        for p in constraints {
            let mut var = None;
            for e in p.terms().keys() {
                let nz: Vec<usize> = (0..n).filter(|&i| e.0[i] > 0).collect();
                match nz.as_slice() {
                    [] => {}
                    [i] if e.0[*i] <= 2 => {
                        if var.is_some_and(|v| v != *i) {
                            return None;
                        }
                        var = Some(*i);
                    }
                    _ => return None,
                }
            }
            let i = var?;
            let c0 = p.coeff(&Exponent::zero(n));
            let mut e1 = Exponent::zero(n);
            e1.0[i] = 1;
            let c1 = p.coeff(&e1);
            let mut e2 = Exponent::zero(n);
            e2.0[i] = 2;
            let c2 = p.coeff(&e2);
            if !(c2 < 0.0) || !lo[i].is_nan() {
                return None;
            }
            let disc = c1 * c1 - 4.0 * c2 * c0;
            if !(disc > 0.0) {
                return None;
            }
            let s = disc.sqrt();
            let r1 = (-c1 + s) / (2.0 * c2);
            let r2 = (-c1 - s) / (2.0 * c2);
            lo[i] = r1.min(r2);
            hi[i] = r1.max(r2);
        }
        if lo.iter().any(|v| v.is_nan()) {
            return None;
        }
        Some(Self { lo, hi })
    }
}

/// A system together with its box and optional configuration defaults.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub system: DynamicalSystem,
    pub region: BoxSet,
    pub config: Option<ConfigFile>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extension: Option<String>,
}

impl ConfigFile {
    /// Overlays these settings on `base`.
    pub fn apply(&self, base: &RelaxationConfig) -> Result<RelaxationConfig, CoreError> {
        let mut c = base.clone();
        if let Some(d) = self.d {
            c.d = d;
        }
        if let Some(s) = self.s {
            c.s = s;
        }
        if let Some(l) = self.l {
            c.l = l;
        }
        if let Some(b) = self.beta {
            c.beta = b;
        }
        if let Some(m) = &self.mode {
            c.mode = m.parse()?;
        }
        if let Some(e) = &self.extension {
            c.extension = e.parse()?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub variables: Vec<String>,
    pub dynamics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<String>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigFile>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        serde_json::from_str(text).map_err(|e| CoreError::Invalid(format!("problem file: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem file serializes");
        s.push('\n');
        s
    }

    pub fn into_problem(self) -> Result<Problem, CoreError> {
        let names = self.variables;
        let n = names.len();
        let field: Vec<Polynomial> = self
            .dynamics
            .iter()
            .enumerate()
            .map(|(i, s)| parse_polynomial(s, &names).map_err(|e| e.context(&format!("dynamics[{i}]"))))
            .collect::<Result<_, _>>()?;
        let region = match &self.region {
            Some(b) => {
                if b.len() != n {
                    return Err(CoreError::Invalid(format!("box has {} sides for {} variables", b.len(), n)));
                }
                Some(BoxSet::new(b.iter().map(|s| s[0]).collect(), b.iter().map(|s| s[1]).collect())?)
            }
            None => None,
        };
        let constraints: Vec<Polynomial> = match (&self.constraints, &region) {
            (Some(cs), _) => cs
                .iter()
                .enumerate()
                .map(|(j, s)| parse_polynomial(s, &names).map_err(|e| e.context(&format!("constraints[{j}]"))))
                .collect::<Result<_, _>>()?,
            (None, Some(b)) => b.constraint_polynomials(),
            (None, None) => return Err(CoreError::Invalid("problem file needs `constraints` or `box`".into())),
        };
        let region = match region {
            Some(b) => b,
            None => BoxSet::from_constraints(&constraints).ok_or_else(|| {
                CoreError::Invalid(
                    "the objective needs a box: add a `box` field, or give one constraint (hi - x)(x - lo) per variable"
                        .into(),
                )
            })?,
        };
        let system = DynamicalSystem::new(names, field, constraints)?;
        Ok(Problem { name: self.name.unwrap_or_else(|| "problem".into()), system, region, config: self.config })
    }

    /// Serializes a system; polynomial text round-trips exactly.
    pub fn from_problem(p: &Problem) -> Self {
        let names = &p.system.names;
        ProblemFile {
            name: Some(p.name.clone()),
            variables: names.clone(),
            dynamics: p.system.field.iter().map(|f| f.display_with(names)).collect(),
            constraints: Some(p.system.constraints.iter().map(|c| c.display_with(names)).collect()),
            region: Some(p.region.lo.iter().zip(&p.region.hi).map(|(&l, &h)| [l, h]).collect()),
            config: p.config.clone(),
        }
    }
}
