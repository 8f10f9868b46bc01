//! Sparse multivariate polynomials over exponent vectors.
//!
//! Iteration order everywhere is graded lexicographic: lower total degree
//! first, and within a degree the exponent with the larger leading entry
//! first (`x1² < x1x2 < x1x3 < x2² < …` in ascending order).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::CoreError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Exponent(pub Vec<u16>);

impl Exponent {
    pub fn zero(n: usize) -> Self {
        Exponent(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Exponent(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&a| a as u32).sum()
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Sum of three exponents without an intermediate allocation.
    pub fn add3(a: &Exponent, b: &Exponent, c: &Exponent) -> Exponent {
        Exponent(a.0.iter().zip(&b.0).zip(&c.0).map(|((x, y), z)| x + y + z).collect())
    }

    pub fn double(&self) -> Exponent {
        Exponent(self.0.iter().map(|a| 2 * a).collect())
    }

    /// `self − e_i`, or `None` when the entry is zero.
    pub fn lower(&self, i: usize) -> Option<Exponent> {
        if self.0[i] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[i] -= 1;
        Some(Exponent(e))
    }

    /// Bit mask of odd entries (entry `i` ↦ bit `i`); requires `dim ≤ 64`.
    pub fn parity(&self) -> u64 {
        self.0.iter().enumerate().fold(0, |m, (i, &a)| if a % 2 == 1 { m | (1 << i) } else { m })
    }

    /// Monomial in the given variable names, e.g. `x1^2*x3`; `1` for zero.
    pub fn display_with(&self, names: &[String]) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .zip(names)
            .filter(|(&a, _)| a > 0)
            .map(|(&a, name)| if a == 1 { name.clone() } else { format!("{name}^{a}") })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }

    fn default_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x{i}")).collect()
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&self.default_names()))
    }
}

/// All exponents of `n` variables with total degree at most `d`, in graded
/// lexicographic order.
pub fn monomials(n: usize, d: u32) -> Vec<Exponent> {
    let mut out = Vec::new();
    for deg in 0..=d {
        let mut cur = vec![0u16; n];
        fill(&mut cur, 0, deg, &mut out);
    }
    out
}

fn fill(cur: &mut Vec<u16>, i: usize, left: u32, out: &mut Vec<Exponent>) {
    let n = cur.len();
    if n == 0 {
        if left == 0 {
            out.push(Exponent(Vec::new()));
        }
        return;
    }
    if i == n - 1 {
        cur[i] = left as u16;
        out.push(Exponent(cur.clone()));
        return;
    }
    for a in (0..=left).rev() {
        cur[i] = a as u16;
        fill(cur, i + 1, left - a, out);
    }
    cur[i] = 0;
}

/// A finite set of exponents of a fixed dimension, iterated in graded lex order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportSet {
    pub dim: usize,
    pub elements: BTreeSet<Exponent>,
}

impl SupportSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, elements: BTreeSet::new() }
    }

    pub fn from_iter(dim: usize, it: impl IntoIterator<Item = Exponent>) -> Self {
        let elements: BTreeSet<Exponent> = it.into_iter().collect();
        debug_assert!(elements.iter().all(|e| e.dim() == dim));
        Self { dim, elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, e: &Exponent) -> bool {
        self.elements.contains(e)
    }

    pub fn insert(&mut self, e: Exponent) -> bool {
        debug_assert_eq!(e.dim(), self.dim);
        self.elements.insert(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Exponent> {
        self.elements.iter()
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        SupportSet { dim: self.dim, elements: self.elements.union(&other.elements).cloned().collect() }
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.elements.is_subset(&other.elements)
    }

    /// Minkowski sum `{a + b}`.
    pub fn minkowski(&self, other: &SupportSet) -> SupportSet {
        let mut out = SupportSet::new(self.dim);
        for a in &self.elements {
            for b in &other.elements {
                out.elements.insert(a.add(b));
            }
        }
        out
    }

    /// Elements of total degree at most `d`.
    pub fn truncate(&self, d: u32) -> SupportSet {
        SupportSet { dim: self.dim, elements: self.elements.iter().filter(|e| e.degree() <= d).cloned().collect() }
    }

    pub fn filter(&self, mut keep: impl FnMut(&Exponent) -> bool) -> SupportSet {
        SupportSet { dim: self.dim, elements: self.elements.iter().filter(|e| keep(e)).cloned().collect() }
    }

    /// Space-separated monomials in graded lex order.
    pub fn display_with(&self, names: &[String]) -> String {
        self.elements.iter().map(|e| e.display_with(names)).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(Exponent::zero(dim), c)
    }

    pub fn var(dim: usize, i: usize) -> Self {
        Self::monomial(Exponent::unit(dim, i), 1.0)
    }

    pub fn monomial(e: Exponent, c: f64) -> Self {
        let mut p = Self::zero(e.dim());
        p.add_term(e, c);
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Exponent, f64)>) -> Self {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, f64> {
        &self.terms
    }

    pub fn coeff(&self, e: &Exponent) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Exponent::degree).max()
    }

    /// Adds `c x^e`, dropping the term if it cancels exactly.
    pub fn add_term(&mut self, e: Exponent, c: f64) {
        assert_eq!(e.dim(), self.dim, "exponent dimension mismatch");
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn support(&self) -> SupportSet {
        SupportSet { dim: self.dim, elements: self.terms.keys().cloned().collect() }
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial::from_terms(self.dim, self.terms.iter().map(|(e, v)| (e.clone(), v * c)))
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (e, &c) in &other.terms {
            p.add_term(e.clone(), c);
        }
        p
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (e, &c) in &other.terms {
            p.add_term(e.clone(), -c);
        }
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut p = Polynomial::zero(self.dim);
        for (a, &x) in &self.terms {
            for (b, &y) in &other.terms {
                p.add_term(a.add(b), x * y);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.dim, 1.0);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// `∂p/∂x_i`
    pub fn derivative(&self, i: usize) -> Polynomial {
        Polynomial::from_terms(
            self.dim,
            self.terms.iter().filter_map(|(e, &c)| e.lower(i).map(|l| (l, c * e.0[i] as f64))),
        )
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.dim);
        self.terms
            .iter()
            .map(|(e, &c)| c * e.0.iter().zip(point).map(|(&a, &x)| x.powi(a as i32)).product::<f64>())
            .sum()
    }

    /// Largest coefficient magnitude (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Canonical text in the given variable names; parses back to the same
    /// term map with [`parse_polynomial`].
    pub fn display_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (e, &c)) in self.terms.iter().rev().enumerate() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if k == 0 {
                if sign == "-" {
                    out.push('-');
                }
            } else {
                out.push(' ');
                out.push_str(sign);
                out.push(' ');
            }
            let mono = e.display_with(names);
            if mono == "1" {
                out.push_str(&format!("{mag}"));
            } else if mag == 1.0 {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{mag}*{mono}"));
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        f.write_str(&self.display_with(&names))
    }
}

/// The polynomial `βv − ∇v·f`.
pub fn lie_polynomial(v: &Polynomial, field: &[Polynomial], beta: f64) -> Polynomial {
    let mut out = v.scale(beta);
    for (i, fi) in field.iter().enumerate() {
        out = out.sub(&v.derivative(i).mul(fi));
    }
    out
}

/// Support of `∇v·f` for `v` with generic coefficients on `v_support`:
/// `⋃_α ⋃_{i: α_i > 0} (α − e_i) + supp(f_i)`, with no cancellation.
pub fn generic_lie_support(v_support: &SupportSet, field: &[Polynomial]) -> SupportSet {
    let mut out = SupportSet::new(v_support.dim);
    let supps: Vec<SupportSet> = field.iter().map(Polynomial::support).collect();
    for a in v_support.iter() {
        for (i, s) in supps.iter().enumerate() {
            if let Some(low) = a.lower(i) {
                for g in s.iter() {
                    out.elements.insert(low.add(g));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Parser.
//
//   expr   := ['+'|'-'] term (('+'|'-') term)*
//   term   := factor (('*' factor) | ('/' factor))*      divisor must be constant
//   factor := atom ['^' integer]
//   atom   := number | variable | '(' expr ')'
//
// Numbers accept decimals and exponents (`2.5e-3`). Whitespace is ignored.

pub fn parse_polynomial(text: &str, variables: &[String]) -> Result<Polynomial, CoreError> {
    if variables.is_empty() {
        return Err(CoreError::Parse { pos: 0, msg: "no variables declared".into(), text: text.into() });
    }
    let mut p = Parser { src: text, bytes: text.as_bytes(), pos: 0, vars: variables };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> CoreError {
        CoreError::Parse { pos: self.pos, msg: msg.to_string(), text: self.src.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial, CoreError> {
        let n = self.vars.len();
        let mut acc = Polynomial::zero(n);
        let mut sign = 1.0;
        match self.peek() {
            Some(b'-') => {
                sign = -1.0;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = acc.add(&t.scale(sign));
            match self.peek() {
                Some(b'+') => {
                    sign = 1.0;
                    self.pos += 1;
                }
                Some(b'-') => {
                    sign = -1.0;
                    self.pos += 1;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, CoreError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = acc.mul(&f);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let f = self.factor()?;
                    let c = match (f.terms.len(), f.terms.iter().next()) {
                        (1, Some((e, &c))) if e.degree() == 0 => c,
                        _ => {
                            self.pos = at;
                            return Err(self.err("can only divide by a nonzero constant"));
                        }
                    };
                    acc = Polynomial::from_terms(acc.dim, acc.terms.iter().map(|(e, &v)| (e.clone(), v / c)));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Polynomial, CoreError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected a nonnegative integer exponent"));
            }
            let k: u32 = self.src[start..self.pos].parse().map_err(|_| self.err("exponent too large"))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial, CoreError> {
        let n = self.vars.len();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
                    let mut q = self.pos + 1;
                    if q < self.bytes.len() && matches!(self.bytes[q], b'+' | b'-') {
                        q += 1;
                    }
                    if q < self.bytes.len() && self.bytes[q].is_ascii_digit() {
                        while q < self.bytes.len() && self.bytes[q].is_ascii_digit() {
                            q += 1;
                        }
                        self.pos = q;
                    }
                }
                let lit = &self.src[start..self.pos];
                let v: f64 = lit.parse().map_err(|_| {
                    CoreError::Parse { pos: start, msg: format!("bad number '{lit}'"), text: self.src.into() }
                })?;
                Ok(Polynomial::constant(n, v))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                match self.vars.iter().position(|v| v == name) {
                    Some(i) => Ok(Polynomial::var(n, i)),
                    None => Err(CoreError::Parse {
                        pos: start,
                        msg: format!("unknown variable '{name}'"),
                        text: self.src.into(),
                    }),
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}
