use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::psd::min_eigenvalue;
use super::{ClarabelBackend, ExternalSdpaBackend, Scalar, SdpProblem};
use crate::error::{Error, Result};

/// Environment variable selecting the backend: `clarabel` (default) or
/// `external:<command>`.
pub const BACKEND_ENV: &str = "DISCONNECT_SDP_BACKEND";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Feasibility tolerance on relative row residuals and block eigenvalues.
    pub tol: f64,
    pub max_iter: u32,
    /// Wall-clock cap in seconds.
    pub time_limit: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 200,
            time_limit: Some(300.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BackendOutcome {
    Solved,
    /// Reduced-accuracy solution; still subject to the residual checks.
    NearlySolved,
    Infeasible,
    Failed(String),
}

/// What a backend hands back before independent checking.
#[derive(Clone, Debug)]
pub struct RawSolution {
    pub outcome: BackendOutcome,
    pub blocks: Vec<DMatrix<f64>>,
    pub free: Vec<f64>,
    pub iterations: u32,
    pub dual_ray: Option<Vec<f64>>,
}

impl RawSolution {
    pub fn failed(msg: impl Into<String>) -> Self {
        RawSolution {
            outcome: BackendOutcome::Failed(msg.into()),
            blocks: Vec::new(),
            free: Vec::new(),
            iterations: 0,
            dual_ray: None,
        }
    }
}

/// A conic solver able to handle block-PSD problems with free variables.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn solve_raw(&self, problem: &SdpProblem, cfg: &SolverConfig) -> Result<RawSolution>;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub backend: String,
    pub raw_status: String,
    pub iterations: u32,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<DMatrix<f64>>,
    pub free: Vec<f64>,
    /// Largest relative row violation; set whenever values are present.
    pub residual: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub objective: Option<f64>,
    pub dual_ray: Option<Vec<f64>>,
    pub meta: SolverMeta,
}

impl SdpSolution {
    pub fn value(&self, s: Scalar) -> f64 {
        match s {
            Scalar::Entry { block, i, j } => self.blocks[block][(i, j)],
            Scalar::Free(k) => self.free[k],
        }
    }

    fn trivial(status: SdpStatus, problem: &SdpProblem, why: &str) -> Self {
        SdpSolution {
            status,
            blocks: problem
                .blocks
                .iter()
                .map(|b| DMatrix::zeros(b.size, b.size))
                .collect(),
            free: vec![0.0; problem.free.len()],
            residual: (status == SdpStatus::Feasible).then_some(0.0),
            min_eigenvalue: (status == SdpStatus::Feasible).then_some(0.0),
            objective: None,
            dual_ray: None,
            meta: SolverMeta {
                backend: "none".into(),
                raw_status: why.into(),
                iterations: 0,
                seconds: 0.0,
            },
        }
    }
}

/// Residual and eigenvalue test behind [`SdpStatus::Feasible`].
pub(crate) fn accepts(problem: &SdpProblem, raw: &RawSolution, tol: f64) -> bool {
    match assess(problem, raw) {
        Some((r, e, _)) => r.is_finite() && r <= tol && e >= -tol,
        None => false,
    }
}

fn assess(problem: &SdpProblem, raw: &RawSolution) -> Option<(f64, f64, f64)> {
    let have_values = raw.blocks.len() == problem.blocks.len()
        && raw.free.len() == problem.free.len()
        && raw
            .blocks
            .iter()
            .zip(&problem.blocks)
            .all(|(m, b)| m.nrows() == b.size && m.ncols() == b.size);
    if !have_values {
        return None;
    }
    let value = |s: Scalar| match s {
        Scalar::Entry { block, i, j } => raw.blocks[block][(i, j)],
        Scalar::Free(k) => raw.free[k],
    };
    let res = problem.residual(value);
    let eig = raw.blocks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
    let obj = problem.objective.iter().map(|&(s, c)| c * value(s)).sum::<f64>();
    Some((res, eig, obj))
}

/// Solves `problem` with `backend`, then re-derives residual and eigenvalue
/// information from the returned values before assigning a status.
pub fn solve(problem: &SdpProblem, backend: &dyn Backend, cfg: &SolverConfig) -> Result<SdpSolution> {
    problem.validate()?;
    if problem.has_inconsistent_row() {
        return Ok(SdpSolution::trivial(SdpStatus::Infeasible, problem, "inconsistent empty row"));
    }
    if problem.rows.is_empty() && problem.blocks.is_empty() && problem.free.is_empty() {
        return Ok(SdpSolution::trivial(SdpStatus::Feasible, problem, "empty problem"));
    }
    let start = Instant::now();
    let raw = match catch_unwind(AssertUnwindSafe(|| backend.solve_raw(problem, cfg))) {
        Ok(Ok(raw)) => raw,
        Ok(Err(e)) => RawSolution::failed(e.to_string()),
        Err(_) => RawSolution::failed("backend panicked"),
    };
    let seconds = start.elapsed().as_secs_f64();
    let raw_status = format!("{:?}", raw.outcome);
    let assessed = assess(problem, &raw);
    let have_values = assessed.is_some();
    let (residual, min_eig, objective) = match assessed {
        Some((r, e, o)) => (Some(r), Some(e), Some(o)),
        None => (None, None, None),
    };
    // A backend that stopped early (time or iteration limits, numerical
    // trouble) may still hand back a point passing the feasibility test.
    let status = match raw.outcome {
        BackendOutcome::Infeasible => SdpStatus::Infeasible,
        _ if accepts(problem, &raw, cfg.tol) => SdpStatus::Feasible,
        _ => SdpStatus::Unknown,
    };
    let (blocks, free) = if have_values {
        (raw.blocks, raw.free)
    } else {
        (
            problem.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect(),
            vec![0.0; problem.free.len()],
        )
    };
    Ok(SdpSolution {
        status,
        blocks,
        free,
        residual,
        min_eigenvalue: min_eig.map(|e| if e.is_finite() { e } else { 0.0 }),
        objective,
        dual_ray: raw.dual_ray,
        meta: SolverMeta {
            backend: backend.name().to_string(),
            raw_status,
            iterations: raw.iterations,
            seconds,
        },
    })
}

/// Backend named by [`BACKEND_ENV`], defaulting to Clarabel.
pub fn backend_from_env() -> Result<Box<dyn Backend>> {
    match std::env::var(BACKEND_ENV) {
        Err(_) => Ok(Box::new(ClarabelBackend::default())),
        Ok(v) if v.is_empty() || v == "clarabel" => Ok(Box::new(ClarabelBackend::default())),
        Ok(v) => match v.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Box::new(ExternalSdpaBackend::new(cmd.trim()))),
            _ => Err(Error::InvalidArgument(format!(
                "{BACKEND_ENV}={v}: expected `clarabel` or `external:<command>`"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::SdpBuilder;

    fn scalar_problem(rhs: f64) -> SdpProblem {
        let mut b = SdpBuilder::new();
        let k = b.add_block("X", 1);
        b.add_row(vec![(Scalar::entry(k, 0, 0), 1.0)], rhs);
        b.finish()
    }

    #[test]
    fn scalar_feasible() {
        let s = solve(&scalar_problem(1.0), &ClarabelBackend::default(), &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible);
        assert!((s.blocks[0][(0, 0)] - 1.0).abs() < 1e-8);
        assert!(s.residual.unwrap() <= 1e-8);
    }

    #[test]
    fn scalar_infeasible() {
        let s = solve(&scalar_problem(-1.0), &ClarabelBackend::default(), &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
    }

    #[test]
    fn empty_problem_is_feasible() {
        let s = solve(&SdpProblem::default(), &ClarabelBackend::default(), &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible);
    }

    #[test]
    fn off_diagonal_layout() {
        // [[1, a], [a, 1]] with a = 0.3 fixed through the off-diagonal entry.
        let mut b = SdpBuilder::new();
        let k = b.add_block("X", 3);
        b.add_row(vec![(Scalar::entry(k, 0, 0), 1.0)], 1.0);
        b.add_row(vec![(Scalar::entry(k, 1, 1), 1.0)], 2.0);
        b.add_row(vec![(Scalar::entry(k, 2, 2), 1.0)], 3.0);
        b.add_row(vec![(Scalar::entry(k, 0, 1), 1.0)], 0.3);
        b.add_row(vec![(Scalar::entry(k, 1, 2), 1.0)], -0.7);
        b.add_row(vec![(Scalar::entry(k, 0, 2), 1.0)], 0.1);
        let f = b.add_free("f");
        b.add_row(vec![(Scalar::Free(f), 2.0), (Scalar::entry(k, 1, 2), 1.0)], 0.0);
        let p = b.finish();
        let s = solve(&p, &ClarabelBackend::default(), &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible, "{:?}", s.meta);
        let m = &s.blocks[0];
        assert!((m[(0, 1)] - 0.3).abs() < 1e-7 && (m[(1, 0)] - 0.3).abs() < 1e-7);
        assert!((m[(1, 2)] + 0.7).abs() < 1e-7);
        assert!((m[(0, 2)] - 0.1).abs() < 1e-7);
        assert!((s.free[0] - 0.35).abs() < 1e-7);
    }

    #[test]
    fn maximizes_objective() {
        // max x s.t. x + s = 1, x, s ≥ 0.
        let mut b = SdpBuilder::new();
        let x = b.add_block("x", 1);
        let s = b.add_block("s", 1);
        b.add_row(vec![(Scalar::entry(x, 0, 0), 1.0), (Scalar::entry(s, 0, 0), 1.0)], 1.0);
        b.set_objective(vec![(Scalar::entry(x, 0, 0), 1.0)]);
        let sol = solve(&b.finish(), &ClarabelBackend::default(), &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        assert!((sol.objective.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_status() {
        let p = scalar_problem(2.0);
        let a = solve(&p, &ClarabelBackend::default(), &SolverConfig::default()).unwrap();
        let b = solve(&p, &ClarabelBackend::default(), &SolverConfig::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.blocks, b.blocks);
    }

    #[test]
    fn malformed_problem_errors_before_backend() {
        let mut p = scalar_problem(1.0);
        p.rows[0].terms[0].0 = Scalar::Entry { block: 4, i: 0, j: 0 };
        assert!(solve(&p, &ClarabelBackend::default(), &SolverConfig::default()).is_err());
    }
}
