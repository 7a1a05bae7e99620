//! Reference backend: the Clarabel interior-point solver.
//!
//! Clarabel solves `min ½xᵀPx + qᵀx  s.t.  Ax + s = b, s ∈ K`. Each block is
//! stored as its upper triangle packed column by column with off-diagonal
//! entries scaled by √2, which is Clarabel's PSD-triangle layout. The cone rows
//! are `−x + s = 0`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultInfo, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use std::time::Instant;

use super::solve::{accepts, Backend, BackendOutcome, RawSolution, SolverConfig};
use super::{Scalar, SdpProblem};
use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Static KKT regularization, raised after a numerical breakdown.
const REGULARIZATION: [f64; 3] = [1e-8, 1e-7, 1e-6];

fn numerical_failure(raw: &RawSolution) -> bool {
    matches!(&raw.outcome, BackendOutcome::Failed(s) if s == "NumericalError" || s == "InsufficientProgress")
}

#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    /// Ratio between Clarabel's internal tolerances and the requested one.
    pub tightening: f64,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        ClarabelBackend { tightening: 0.1 }
    }
}

fn packed(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

struct Layout {
    offsets: Vec<usize>,
    n_free_start: usize,
    n_vars: usize,
}

impl Layout {
    fn new(p: &SdpProblem) -> Self {
        let mut offsets = Vec::with_capacity(p.blocks.len());
        let mut acc = 0;
        for b in &p.blocks {
            offsets.push(acc);
            acc += b.size * (b.size + 1) / 2;
        }
        Layout {
            offsets,
            n_free_start: acc,
            n_vars: acc + p.free.len(),
        }
    }

    /// Column and scale of a scalar in the packed variable vector.
    fn column(&self, s: Scalar) -> (usize, f64) {
        match s {
            Scalar::Entry { block, i, j } => {
                let col = self.offsets[block] + packed(i, j);
                (col, if i == j { 1.0 } else { 1.0 / SQRT2 })
            }
            Scalar::Free(k) => (self.n_free_start + k, 1.0),
        }
    }
}

impl Backend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve_raw(&self, problem: &SdpProblem, cfg: &SolverConfig) -> Result<RawSolution> {
        let layout = Layout::new(problem);
        let m_eq = problem.rows.len();
        let mut ri = Vec::new();
        let mut ci = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::with_capacity(m_eq + layout.n_free_start);
        for (r, row) in problem.rows.iter().enumerate() {
            for &(s, c) in &row.terms {
                let (col, scale) = layout.column(s);
                ri.push(r);
                ci.push(col);
                vals.push(c * scale);
            }
            b.push(row.rhs);
        }
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if m_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(m_eq));
        }
        let mut r = m_eq;
        for (k, blk) in problem.blocks.iter().enumerate() {
            let len = blk.size * (blk.size + 1) / 2;
            for t in 0..len {
                ri.push(r + t);
                ci.push(layout.offsets[k] + t);
                vals.push(-1.0);
                b.push(0.0);
            }
            r += len;
            cones.push(if blk.size == 1 {
                SupportedConeT::NonnegativeConeT(1)
            } else {
                SupportedConeT::PSDTriangleConeT(blk.size)
            });
        }
        let n = layout.n_vars;
        let a = CscMatrix::new_from_triplets(r, n, ri, ci, vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(s, c) in &problem.objective {
            let (col, scale) = layout.column(s);
            q[col] -= c * scale;
        }
        let start = Instant::now();
        let run = |early_stop: bool, regularization: f64| -> Result<RawSolution> {
            let tol = cfg.tol * self.tightening;
            let budget = cfg.time_limit.map(|t| (t - start.elapsed().as_secs_f64()).max(0.0));
            let settings = DefaultSettingsBuilder::default()
                .static_regularization_constant(regularization)
                .verbose(false)
                .max_iter(cfg.max_iter)
                .time_limit(budget.unwrap_or(f64::INFINITY))
                .tol_feas(tol)
                .tol_gap_abs(tol)
                .tol_gap_rel(tol)
                .direct_solve_method("faer".into())
                .build()
                .map_err(|e| Error::Backend(format!("{e:?}")))?;
            let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
                .map_err(|e| Error::Backend(format!("{e:?}")))?;
            if early_stop {
                solver.set_termination_callback(move |info: &DefaultInfo<f64>| {
                    info.iterations >= 3 && info.res_primal <= tol
                });
            }
            solver.solve();
            Ok(unpack(problem, &layout, &solver, m_eq))
        };
        if problem.objective.is_empty() {
            // Any primal-feasible iterate answers a feasibility problem, and
            // early iterates are well inside the cones.
            let raw = run(true, REGULARIZATION[0])?;
            if (raw.outcome != BackendOutcome::NearlySolved || accepts(problem, &raw, cfg.tol))
                && !numerical_failure(&raw)
            {
                return Ok(raw);
            }
        }
        let mut raw = run(false, REGULARIZATION[0])?;
        for &reg in &REGULARIZATION[1..] {
            if !numerical_failure(&raw) {
                break;
            }
            raw = run(false, reg)?;
        }
        Ok(raw)
    }
}

fn unpack(
    problem: &SdpProblem,
    layout: &Layout,
    solver: &DefaultSolver<f64>,
    m_eq: usize,
) -> RawSolution {
    let sol = &solver.solution;
    let outcome = match sol.status {
        SolverStatus::Solved => BackendOutcome::Solved,
        SolverStatus::AlmostSolved | SolverStatus::CallbackTerminated => {
            BackendOutcome::NearlySolved
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            BackendOutcome::Infeasible
        }
        other => BackendOutcome::Failed(format!("{other:?}")),
    };
    let x = &sol.x;
    let blocks = problem
        .blocks
        .iter()
        .enumerate()
        .map(|(k, blk)| {
            let off = layout.offsets[k];
            DMatrix::from_fn(blk.size, blk.size, |i, j| {
                let (i, j) = if i <= j { (i, j) } else { (j, i) };
                let v = x[off + packed(i, j)];
                if i == j {
                    v
                } else {
                    v / SQRT2
                }
            })
        })
        .collect();
    let free = x[layout.n_free_start..].to_vec();
    let dual_ray = (outcome == BackendOutcome::Infeasible).then(|| sol.z[..m_eq].to_vec());
    RawSolution {
        outcome,
        blocks,
        free,
        iterations: sol.iterations,
        dual_ray,
    }
}
