//! Solving through an external program that reads SDPA files.
//!
//! The external command is invoked as `<command> <problem.dat-s> <solution>`
//! and must write a solution file of the form
//!
//! ```text
//! status feasible|infeasible|unknown
//! Y <block> <i> <j> <value>
//! ...
//! ```
//!
//! with 1-based SDPA block and entry indices (upper triangle suffices).
//! `tools/sdpa_cvxopt.py` in the repository is such a program.

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;

use super::sdpa::export_sdpa;
use super::solve::{Backend, BackendOutcome, RawSolution, SolverConfig};
use super::SdpProblem;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ExternalSdpaBackend {
    command: String,
}

impl ExternalSdpaBackend {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalSdpaBackend {
            command: command.into(),
        }
    }
}

static COUNTER: AtomicUsize = AtomicUsize::new(0);

impl Backend for ExternalSdpaBackend {
    fn name(&self) -> &str {
        "external-sdpa"
    }

    fn solve_raw(&self, problem: &SdpProblem, _cfg: &SolverConfig) -> Result<RawSolution> {
        let tag = format!(
            "disconnect-{}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        );
        let dir = std::env::temp_dir();
        let input: PathBuf = dir.join(format!("{tag}.dat-s"));
        let output: PathBuf = dir.join(format!("{tag}.sol"));
        std::fs::write(&input, export_sdpa(problem)?)?;
        let mut parts = self.command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Backend("empty external command".into()))?;
        let status = Command::new(program)
            .args(parts)
            .arg(&input)
            .arg(&output)
            .status();
        let _ = std::fs::remove_file(&input);
        let status = status.map_err(|e| Error::Backend(format!("running `{}`: {e}", self.command)))?;
        if !status.success() {
            let _ = std::fs::remove_file(&output);
            return Ok(RawSolution::failed(format!("external solver exited with {status}")));
        }
        let text = std::fs::read_to_string(&output);
        let _ = std::fs::remove_file(&output);
        parse_solution(problem, &text?)
    }
}

/// Replays a solution recorded from an external solver run.
#[derive(Clone, Debug)]
pub struct RecordedSolution {
    text: String,
}

impl RecordedSolution {
    pub fn new(text: impl Into<String>) -> Self {
        RecordedSolution { text: text.into() }
    }
}

impl Backend for RecordedSolution {
    fn name(&self) -> &str {
        "recorded-sdpa"
    }

    fn solve_raw(&self, problem: &SdpProblem, _cfg: &SolverConfig) -> Result<RawSolution> {
        parse_solution(problem, &self.text)
    }
}

/// Maps an SDPA-indexed solution back onto `problem`'s blocks and free
/// variables.
pub fn parse_solution(problem: &SdpProblem, text: &str) -> Result<RawSolution> {
    let bad = |msg: String| Error::Backend(format!("solution file: {msg}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| bad("empty".into()))?;
    let outcome = match head.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["status", "feasible"] => BackendOutcome::Solved,
        ["status", "infeasible"] => BackendOutcome::Infeasible,
        ["status", other] => BackendOutcome::Failed(other.to_string()),
        _ => return Err(bad(format!("bad header `{head}`"))),
    };
    let nb = problem.blocks.len();
    let mut blocks: Vec<DMatrix<f64>> = problem
        .blocks
        .iter()
        .map(|b| DMatrix::zeros(b.size, b.size))
        .collect();
    let mut diag = vec![0.0; 2 * problem.free.len()];
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 || f[0] != "Y" {
            return Err(bad(format!("bad line `{line}`")));
        }
        let idx = f[1..4]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad line `{line}`"))))
            .collect::<Result<Vec<_>>>()?;
        let v: f64 = f[4].parse().map_err(|_| bad(format!("bad line `{line}`")))?;
        let (blk, i, j) = (idx[0], idx[1], idx[2]);
        if blk == 0 || i == 0 || j == 0 {
            return Err(bad(format!("zero index in `{line}`")));
        }
        if blk <= nb {
            let m = &mut blocks[blk - 1];
            if i > m.nrows() || j > m.nrows() {
                return Err(bad(format!("index out of range in `{line}`")));
            }
            m[(i - 1, j - 1)] = v;
            m[(j - 1, i - 1)] = v;
        } else if blk == nb + 1 && !diag.is_empty() && i == j && i <= diag.len() {
            diag[i - 1] = v;
        } else if blk == nb + 1 && i != j {
            continue;
        } else {
            return Err(bad(format!("block out of range in `{line}`")));
        }
    }
    let free = (0..problem.free.len())
        .map(|k| diag[2 * k] - diag[2 * k + 1])
        .collect();
    Ok(RawSolution {
        outcome,
        blocks,
        free,
        iterations: 0,
        dual_ray: None,
    })
}
