//! Solver-agnostic semidefinite feasibility problems.
//!
//! A problem is a list of symmetric PSD matrix variables ("blocks"), a list of
//! free scalars, and linear equalities over entries of both. An optional
//! linear objective is maximized; builders use it for the margin variable.

mod clarabel_backend;
mod external;
mod psd;
pub mod sdpa;
mod solve;

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub use clarabel_backend::ClarabelBackend;
pub use external::{ExternalSdpaBackend, RecordedSolution};
pub use psd::{min_eigenvalue, psd_project};
pub use solve::{
    backend_from_env, solve, Backend, BackendOutcome, RawSolution, SdpSolution, SdpStatus,
    SolverConfig, SolverMeta, BACKEND_ENV,
};

/// A scalar SDP unknown: an upper-triangular block entry or a free variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scalar {
    Entry { block: usize, i: usize, j: usize },
    Free(usize),
}

impl Scalar {
    /// Block entry with indices normalized to `i ≤ j`.
    pub fn entry(block: usize, i: usize, j: usize) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        Scalar::Entry { block, i, j }
    }
}

/// Affine expression `Σ cₖ·scalarₖ + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: BTreeMap<Scalar, f64>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn scalar(s: Scalar) -> Self {
        let mut e = Self::zero();
        e.add_term(s, 1.0);
        e
    }

    pub fn add_term(&mut self, s: Scalar, c: f64) {
        if c == 0.0 {
            return;
        }
        *self.terms.entry(s).or_insert(0.0) += c;
    }

    pub fn add_scaled(&mut self, other: &LinExpr, c: f64) {
        for (&s, &v) in &other.terms {
            self.add_term(s, v * c);
        }
        self.constant += other.constant * c;
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.values().all(|&v| v == 0.0)
    }

    /// Value under an assignment of scalars.
    pub fn eval(&self, value: impl Fn(Scalar) -> f64) -> f64 {
        self.constant + self.terms.iter().map(|(&s, &c)| c * value(s)).sum::<f64>()
    }
}

/// `Σ cₖ·scalarₖ = rhs`, terms sorted and merged.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub terms: Vec<(Scalar, f64)>,
    pub rhs: f64,
}

impl Row {
    fn canonical_cmp(&self, other: &Row) -> std::cmp::Ordering {
        let n = self.terms.len().min(other.terms.len());
        for k in 0..n {
            let (sa, ca) = self.terms[k];
            let (sb, cb) = other.terms[k];
            let o = sa.cmp(&sb).then_with(|| ca.total_cmp(&cb));
            if o.is_ne() {
                return o;
            }
        }
        self.terms
            .len()
            .cmp(&other.terms.len())
            .then_with(|| self.rhs.total_cmp(&other.rhs))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub size: usize,
}

/// Block-PSD feasibility problem with linear equalities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub free: Vec<String>,
    pub rows: Vec<Row>,
    /// Maximized; empty for pure feasibility.
    pub objective: Vec<(Scalar, f64)>,
}

impl SdpProblem {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(|b| b.size).max().unwrap_or(0)
    }

    /// Checks indices and finiteness.
    pub fn validate(&self) -> Result<()> {
        let check = |s: &Scalar| -> Result<()> {
            match *s {
                Scalar::Entry { block, i, j } => {
                    let b = self.blocks.get(block).ok_or_else(|| {
                        Error::MalformedSdp(format!("block {block} does not exist"))
                    })?;
                    if i > j || j >= b.size {
                        return Err(Error::MalformedSdp(format!(
                            "entry ({i},{j}) out of range for block `{}` of size {}",
                            b.label, b.size
                        )));
                    }
                }
                Scalar::Free(k) => {
                    if k >= self.free.len() {
                        return Err(Error::MalformedSdp(format!("free variable {k} does not exist")));
                    }
                }
            }
            Ok(())
        };
        for b in &self.blocks {
            if b.size == 0 {
                return Err(Error::MalformedSdp(format!("block `{}` has size 0", b.label)));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::MalformedSdp("non-finite right-hand side".into()));
            }
            for (s, c) in &row.terms {
                check(s)?;
                if !c.is_finite() {
                    return Err(Error::MalformedSdp("non-finite coefficient".into()));
                }
            }
        }
        for (s, c) in &self.objective {
            check(s)?;
            if !c.is_finite() {
                return Err(Error::MalformedSdp("non-finite objective".into()));
            }
        }
        Ok(())
    }

    /// Largest relative row violation `|aᵀx − b| / (1 + |b|)`.
    pub fn residual(&self, value: impl Fn(Scalar) -> f64) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let lhs: f64 = r.terms.iter().map(|&(s, c)| c * value(s)).sum();
                (lhs - r.rhs).abs() / (1.0 + r.rhs.abs())
            })
            .fold(0.0, f64::max)
    }

    /// An empty row with nonzero right-hand side makes the problem trivially
    /// infeasible.
    pub fn has_inconsistent_row(&self) -> bool {
        self.rows.iter().any(|r| r.terms.is_empty() && r.rhs != 0.0)
    }
}

/// Incremental construction; [`SdpBuilder::finish`] canonicalizes rows.
#[derive(Debug, Default)]
pub struct SdpBuilder {
    problem: SdpProblem,
}

impl SdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, label: impl Into<String>, size: usize) -> usize {
        self.problem.blocks.push(Block {
            label: label.into(),
            size,
        });
        self.problem.blocks.len() - 1
    }

    pub fn add_free(&mut self, label: impl Into<String>) -> usize {
        self.problem.free.push(label.into());
        self.problem.free.len() - 1
    }

    pub fn block(&self, k: usize) -> &Block {
        &self.problem.blocks[k]
    }

    /// Adds the row `expr = 0`.
    pub fn add_zero(&mut self, expr: &LinExpr) {
        let terms = expr.terms.iter().map(|(&s, &c)| (s, c)).collect();
        self.add_row(terms, -expr.constant);
    }

    pub fn add_row(&mut self, terms: Vec<(Scalar, f64)>, rhs: f64) {
        self.problem.rows.push(Row { terms, rhs });
    }

    pub fn set_objective(&mut self, terms: Vec<(Scalar, f64)>) {
        self.problem.objective = terms;
    }

    pub fn finish(self) -> SdpProblem {
        let mut p = self.problem;
        let mut rows: Vec<Row> = p
            .rows
            .into_iter()
            .map(|r| {
                let mut merged: BTreeMap<Scalar, f64> = BTreeMap::new();
                for (s, c) in r.terms {
                    let s = match s {
                        Scalar::Entry { block, i, j } => Scalar::entry(block, i, j),
                        other => other,
                    };
                    *merged.entry(s).or_insert(0.0) += c;
                }
                Row {
                    terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
                    rhs: r.rhs,
                }
            })
            .filter(|r| !(r.terms.is_empty() && r.rhs == 0.0))
            .collect();
        rows.sort_by(Row::canonical_cmp);
        rows.dedup();
        p.rows = rows;
        p.objective.sort_by_key(|a| a.0);
        p
    }
}
