//! Sparse multivariate polynomials over explicit variable spaces.
//!
//! Every polynomial carries the ordered list of variables it lives in. Time,
//! state and control variables are distinct kinds, so a polynomial in
//! `(t, x1, x2)` can only be combined with one in `(t, x1, x2, u1, u2)` after an
//! explicit [`Polynomial::embed`].
//!
//! Monomials are ordered graded-lexicographically: lower total degree first,
//! then larger exponents of earlier variables first. The same order drives the
//! printed form, the monomial bases, and hence every SDP row and column index.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single indeterminate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    /// State coordinate, zero-based (`X(0)` prints as `x1`).
    X(u16),
    /// Control coordinate, zero-based (`U(0)` prints as `u1`).
    U(u16),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::U(i) => write!(f, "u{}", i + 1),
        }
    }
}

impl std::str::FromStr for Var {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownVariable(s.to_string());
        if s == "t" {
            return Ok(Var::T);
        }
        let (kind, idx) = s.split_at(1.min(s.len()));
        let idx: u16 = idx.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        match kind {
            "x" => Ok(Var::X(idx - 1)),
            "u" => Ok(Var::U(idx - 1)),
            _ => Err(bad()),
        }
    }
}

/// Ordered list of variables a polynomial is expressed in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Space(Arc<[Var]>);

impl Space {
    pub fn new(vars: Vec<Var>) -> Result<Self> {
        let mut seen = vars.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != vars.len() {
            return Err(Error::SpaceMismatch("repeated variable".into()));
        }
        Ok(Space(vars.into()))
    }

    /// `(x1..xn)`
    pub fn state(n: usize) -> Self {
        Space((0..n).map(|i| Var::X(i as u16)).collect())
    }

    /// `(t, x1..xn)`
    pub fn time_state(n: usize) -> Self {
        Space(
            std::iter::once(Var::T)
                .chain((0..n).map(|i| Var::X(i as u16)))
                .collect(),
        )
    }

    /// `(t, x1..xn, u1..un)`
    pub fn time_state_control(n: usize) -> Self {
        Space(
            std::iter::once(Var::T)
                .chain((0..n).map(|i| Var::X(i as u16)))
                .chain((0..n).map(|i| Var::U(i as u16)))
                .collect(),
        )
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, var: Var) -> Option<usize> {
        self.0.iter().position(|&v| v == var)
    }

    pub fn contains(&self, var: Var) -> bool {
        self.position(var).is_some()
    }

    /// Number of state variables.
    pub fn state_dim(&self) -> usize {
        self.0.iter().filter(|v| matches!(v, Var::X(_))).count()
    }

    pub fn is_subspace_of(&self, other: &Space) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    /// The space with `var` removed.
    pub fn without(&self, var: Var) -> Space {
        Space(self.0.iter().copied().filter(|&v| v != var).collect())
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Exponent vector, one entry per variable of the ambient space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exps: Vec<u32>) -> Self {
        MultiIndex(exps)
    }

    pub fn zero(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    pub fn unit(len: usize, pos: usize) -> Self {
        let mut e = vec![0; len];
        e[pos] = 1;
        MultiIndex(e)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Value of the monomial at `point`.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse real polynomial. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolyRepr", try_from = "PolyRepr")]
pub struct Polynomial {
    space: Space,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(space: &Space) -> Self {
        Polynomial {
            space: space.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(space: &Space, c: f64) -> Self {
        Self::monomial(space, MultiIndex::zero(space.len()), c)
    }

    pub fn monomial(space: &Space, exps: MultiIndex, c: f64) -> Self {
        assert_eq!(exps.len(), space.len(), "multi-index length");
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(exps, c);
        }
        Polynomial {
            space: space.clone(),
            terms,
        }
    }

    pub fn var(space: &Space, var: Var) -> Result<Self> {
        let pos = space
            .position(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        Ok(Self::monomial(space, MultiIndex::unit(space.len(), pos), 1.0))
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, summing repeats.
    pub fn from_terms<I>(space: &Space, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Polynomial::zero(space);
        for (exps, c) in terms {
            if exps.len() != space.len() {
                return Err(Error::DimensionMismatch {
                    expected: space.len(),
                    found: exps.len(),
                });
            }
            p.add_term(MultiIndex(exps), c);
        }
        Ok(p)
    }

    fn add_term(&mut self, m: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Degree in a single variable.
    pub fn degree_in(&self, var: Var) -> usize {
        match self.space.position(var) {
            Some(p) => self
                .terms
                .keys()
                .map(|m| m.0[p] as usize)
                .max()
                .unwrap_or(0),
            None => 0,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &MultiIndex) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(&self.space);
        }
        Polynomial {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    fn check_same_space(&self, other: &Polynomial) {
        assert_eq!(
            self.space, other.space,
            "polynomials live in different spaces {} and {}",
            self.space, other.space
        );
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!("{} + {}", self.space, other.space)));
        }
        Ok(self + other)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!("{} * {}", self.space, other.space)));
        }
        Ok(self * other)
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(&self.space, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Exact partial derivative.
    pub fn differentiate(&self, var: Var) -> Result<Polynomial> {
        let pos = self
            .space
            .position(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        let mut out = Polynomial::zero(&self.space);
        for (m, &c) in &self.terms {
            let e = m.0[pos];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[pos] -= 1;
            out.add_term(dm, c * e as f64);
        }
        Ok(out)
    }

    /// Plain sum of `coefficient * monomial` values.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.space.len() {
            return Err(Error::DimensionMismatch {
                expected: self.space.len(),
                found: point.len(),
            });
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(point)).sum())
    }

    /// Re-expresses the polynomial in a larger space.
    pub fn embed(&self, target: &Space) -> Result<Polynomial> {
        if !self.space.is_subspace_of(target) {
            return Err(Error::SpaceMismatch(format!(
                "cannot embed {} into {}",
                self.space, target
            )));
        }
        let map: Vec<usize> = self
            .space
            .vars()
            .iter()
            .map(|&v| target.position(v).unwrap())
            .collect();
        let mut out = Polynomial::zero(target);
        for (m, &c) in &self.terms {
            let mut e = vec![0; target.len()];
            for (i, &p) in map.iter().enumerate() {
                e[p] = m.0[i];
            }
            out.add_term(MultiIndex(e), c);
        }
        Ok(out)
    }

    /// Substitutes `var = value`, dropping `var` from the space.
    pub fn fix(&self, var: Var, value: f64) -> Result<Polynomial> {
        let pos = self
            .space
            .position(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        let space = self.space.without(var);
        let mut out = Polynomial::zero(&space);
        for (m, &c) in &self.terms {
            let e = m.0[pos];
            let factor = if e == 0 { 1.0 } else { value.powi(e as i32) };
            let mut rest = m.0.clone();
            rest.remove(pos);
            out.add_term(MultiIndex(rest), c * factor);
        }
        Ok(out)
    }

    /// Parses the canonical text form, e.g. `0.01 - 1 * x1^2` or `2 * t x1^3`.
    pub fn parse(space: &Space, text: &str) -> Result<Polynomial> {
        let bad = |msg: &str| Error::InvalidProblem(format!("polynomial `{text}`: {msg}"));
        let mut out = Polynomial::zero(space);
        // Split into signed terms; a sign directly after `^` or a numeric
        // exponent marker (`1e-3`) stays inside its term.
        let chars: Vec<char> = text.chars().collect();
        let mut chunks: Vec<String> = Vec::new();
        let mut cur = String::new();
        for (i, &ch) in chars.iter().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 {
                let prev = chars[..i].iter().rev().find(|c| !c.is_whitespace()).copied();
                let in_exponent = match prev {
                    Some('^') => true,
                    Some('e') | Some('E') => {
                        let before = chars[..i].iter().rposition(|c| *c == 'e' || *c == 'E');
                        before
                            .and_then(|p| p.checked_sub(1))
                            .map(|p| chars[p].is_ascii_digit() || chars[p] == '.')
                            .unwrap_or(false)
                    }
                    _ => false,
                };
                if !in_exponent && !cur.trim().is_empty() {
                    chunks.push(std::mem::take(&mut cur));
                }
            }
            cur.push(ch);
        }
        if !cur.trim().is_empty() {
            chunks.push(cur);
        }
        if chunks.is_empty() {
            return Err(bad("empty"));
        }
        for chunk in chunks {
            let mut sign = 1.0;
            let mut body = chunk.trim();
            if let Some(rest) = body.strip_prefix('+') {
                body = rest.trim();
            } else if let Some(rest) = body.strip_prefix('-') {
                sign = -1.0;
                body = rest.trim();
            }
            if body.is_empty() {
                continue;
            }
            let mut coef = 1.0;
            let mut exps = vec![0u32; space.len()];
            for factor in body.split(|c: char| c == '*' || c.is_whitespace()) {
                if factor.is_empty() {
                    continue;
                }
                if let Ok(c) = factor.parse::<f64>() {
                    coef *= c;
                    continue;
                }
                let (name, pow) = match factor.split_once('^') {
                    Some((n, p)) => (n, p.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                    None => (factor, 1),
                };
                let var: Var = name.parse()?;
                let pos = space
                    .position(var)
                    .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
                exps[pos] += pow;
            }
            if !coef.is_finite() {
                return Err(bad("non-finite coefficient"));
            }
            out.add_term(MultiIndex(exps), sign * coef);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    exps: Vec<u32>,
    coef: f64,
}

/// JSON form: `{"space": ["t", "x1"], "terms": [{"exps": [..], "coef": c}]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyRepr {
    space: Vec<String>,
    terms: Vec<TermRepr>,
}

impl From<Polynomial> for PolyRepr {
    fn from(p: Polynomial) -> Self {
        PolyRepr {
            space: p.space.vars().iter().map(|v| v.to_string()).collect(),
            terms: p
                .terms
                .iter()
                .map(|(m, &c)| TermRepr {
                    exps: m.0.clone(),
                    coef: c,
                })
                .collect(),
        }
    }
}

impl TryFrom<PolyRepr> for Polynomial {
    type Error = Error;

    fn try_from(r: PolyRepr) -> Result<Self> {
        let vars = r.space.iter().map(|s| s.parse()).collect::<Result<Vec<Var>>>()?;
        let space = Space::new(vars)?;
        if r.terms.iter().any(|t| !t.coef.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Polynomial::from_terms(&space, r.terms.into_iter().map(|t| (t.exps, t.coef)))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write!(f, "{mag}")?;
            if m.degree() > 0 {
                write!(f, " *")?;
                for (v, &e) in self.space.vars().iter().zip(&m.0) {
                    match e {
                        0 => {}
                        1 => write!(f, " {v}")?,
                        _ => write!(f, " {v}^{e}")?,
                    }
                }
            }
        }
        Ok(())
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.check_same_space(rhs);
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.check_same_space(rhs);
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.check_same_space(rhs);
        let mut out = Polynomial::zero(&self.space);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                out.add_term(ma.add(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

/// `∂_t v + Σ fᵢ ∂_{xᵢ} v`, expressed in the space of the vector field.
///
/// `v` lives in `(t, x1..xn)`; each `fᵢ` lives in a common space containing
/// `v`'s variables (typically `(t, x, u)`).
pub fn lie_derivative(v: &Polynomial, field: &[Polynomial]) -> Result<Polynomial> {
    let n = v.space().state_dim();
    if field.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: field.len(),
        });
    }
    let target = match field.first() {
        Some(f0) => f0.space().clone(),
        None => v.space().clone(),
    };
    if field.iter().any(|f| f.space() != &target) {
        return Err(Error::SpaceMismatch("vector field components differ in space".into()));
    }
    let mut out = if v.space().contains(Var::T) {
        v.differentiate(Var::T)?.embed(&target)?
    } else {
        Polynomial::zero(&target)
    };
    for (i, fi) in field.iter().enumerate() {
        let dv = v.differentiate(Var::X(i as u16))?.embed(&target)?;
        out = &out + &(fi * &dv);
    }
    Ok(out)
}

/// The single-integrator field `ẋ = u` in `(t, x, u)`.
pub fn control_field(n: usize) -> Vec<Polynomial> {
    let space = Space::time_state_control(n);
    (0..n)
        .map(|i| Polynomial::var(&space, Var::U(i as u16)).unwrap())
        .collect()
}

/// Side length of a Gram matrix over all monomials of degree ≤ `d` in
/// `n_vars` variables: `C(n_vars + d, d)`.
pub fn gram_size(n_vars: usize, d: usize) -> u64 {
    let mut acc: u128 = 1;
    for i in 1..=d as u128 {
        acc = acc * (n_vars as u128 + i) / i;
    }
    acc as u64
}

/// All monomials of degree ≤ `max_degree` in graded-lex order.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    space: Space,
    max_degree: usize,
    monomials: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn new(space: &Space, max_degree: usize) -> Self {
        let n = space.len();
        let mut monomials = Vec::with_capacity(gram_size(n, max_degree) as usize);
        for deg in 0..=max_degree {
            let mut cur = vec![0u32; n];
            push_degree(&mut monomials, &mut cur, 0, deg as u32);
        }
        MonomialBasis {
            space: space.clone(),
            max_degree,
            monomials,
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.monomials[i]
    }

    /// Values of every basis monomial at `point`.
    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|m| m.eval(point)).collect()
    }
}

// Exponent vectors of total degree `left` over positions `pos..`, largest
// leading exponent first.
fn push_degree(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    let n = cur.len();
    if n == 0 {
        if left == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = left;
        out.push(MultiIndex(cur.clone()));
        cur[pos] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e;
        push_degree(out, cur, pos + 1, left - e);
    }
    cur[pos] = 0;
}

/// `basis(space, d)` as a free function.
pub fn basis(space: &Space, d: usize) -> MonomialBasis {
    MonomialBasis::new(space, d)
}
