//! The degree-raising loop that alternates barrier and moment programs, and
//! contour tables of certificates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certificate::BarrierCertificate;
use crate::error::{Error, Result};
use crate::moment::{build_connect_box, build_connect_full, matched_truncation};
use crate::sdp::{solve, Backend, SdpStatus, SolverConfig};
use crate::semialg::{ControlSet, ProblemInstance};
use crate::sos::{build_disconnect_box, build_disconnect_full, extract_certificate};
use crate::verify::{verify, Verdict, DEFAULT_SAMPLES, DEFAULT_TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunVerdict {
    /// A verified barrier certificate exists.
    Disconnected,
    /// The moment relaxation is feasible; evidence for connectedness only.
    RelaxationFeasible,
    Exhausted,
}

impl RunVerdict {
    pub fn label(self, strict_paper_labels: bool) -> &'static str {
        match (self, strict_paper_labels) {
            (RunVerdict::Disconnected, _) => "PATH-DISCONNECTED",
            (RunVerdict::RelaxationFeasible, true) => "PATH-CONNECTED",
            (RunVerdict::RelaxationFeasible, false) => {
                "RELAXATION-FEASIBLE (connectedness evidence, not a certificate)"
            }
            (RunVerdict::Exhausted, _) => "EXHAUSTED",
        }
    }
}

/// Outcome of one program at one degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramAttempt {
    /// `None` when the program could not be built at this degree.
    pub status: Option<SdpStatus>,
    pub note: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeAttempt {
    pub degree: usize,
    pub barrier: ProgramAttempt,
    pub verification: Option<Verdict>,
    pub moment: Option<ProgramAttempt>,
    pub moment_truncation: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub verdict: RunVerdict,
    pub degree: Option<usize>,
    pub attempts: Vec<DegreeAttempt>,
    pub seconds: f64,
    #[serde(skip)]
    pub certificate: Option<BarrierCertificate>,
    pub certificate_path: Option<String>,
}

#[derive(Clone, Debug)]
pub struct MetaOptions {
    pub solver: SolverConfig,
    pub samples: usize,
    pub seed: u64,
    pub tau: f64,
    /// Use the `ζ±` barrier builder and split moment program for box controls.
    pub eliminate_controls: bool,
    /// The moment relaxation at order `d` is the one dual to barriers of
    /// order `d + moment_lookahead`.
    pub moment_lookahead: usize,
}

impl Default for MetaOptions {
    fn default() -> Self {
        MetaOptions {
            solver: SolverConfig::default(),
            samples: DEFAULT_SAMPLES,
            seed: 0,
            tau: DEFAULT_TAU,
            eliminate_controls: true,
            moment_lookahead: 1,
        }
    }
}

/// Solves the barrier program of order `k` and returns a certificate when
/// the solution is feasible.
pub fn solve_barrier(
    problem: &ProblemInstance,
    k: usize,
    eliminate_controls: bool,
    backend: &dyn Backend,
    cfg: &SolverConfig,
) -> Result<(SdpStatus, Option<BarrierCertificate>, String)> {
    let program = if eliminate_controls && problem.control == ControlSet::Box {
        build_disconnect_box(problem, k)?
    } else {
        build_disconnect_full(problem, k)?
    };
    let sol = solve(&program.sdp, backend, cfg)?;
    let note = sol.meta.raw_status.clone();
    if sol.status != SdpStatus::Feasible {
        return Ok((sol.status, None, note));
    }
    let cert = extract_certificate(&sol, &program.decoder)?;
    Ok((sol.status, Some(cert), note))
}

fn attempt<T>(f: impl FnOnce() -> Result<(SdpStatus, T, String)>) -> Result<(ProgramAttempt, Option<T>)> {
    let start = Instant::now();
    match f() {
        Ok((status, extra, note)) => Ok((
            ProgramAttempt {
                status: Some(status),
                note,
                seconds: start.elapsed().as_secs_f64(),
            },
            Some(extra),
        )),
        Err(e @ Error::OrderTooSmall { .. }) => Ok((
            ProgramAttempt {
                status: None,
                note: e.to_string(),
                seconds: start.elapsed().as_secs_f64(),
            },
            None,
        )),
        Err(e) => Err(e),
    }
}

/// Raises the order from `d0` to `d_max`, trying a barrier certificate and
/// then a moment relaxation at each order. A feasible relaxation rules out
/// barriers up to order `d + moment_lookahead` by weak duality.
pub fn meta_algorithm(
    problem: &ProblemInstance,
    d0: usize,
    d_max: usize,
    backend: &dyn Backend,
    opts: &MetaOptions,
) -> Result<RunOutcome> {
    if d0 == 0 || d0 > d_max {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= d0 <= d_max, got d0={d0}, d_max={d_max}"
        )));
    }
    let start = Instant::now();
    let split = opts.eliminate_controls && problem.control == ControlSet::Box;
    let mut attempts = Vec::new();
    let mut unknown_streak = 0;
    let finish = |verdict, degree, attempts, certificate| RunOutcome {
        verdict,
        degree,
        attempts,
        seconds: start.elapsed().as_secs_f64(),
        certificate,
        certificate_path: None,
    };
    for d in d0..=d_max {
        let (barrier, found) =
            attempt(|| solve_barrier(problem, d, opts.eliminate_controls, backend, &opts.solver))?;
        let mut verification = None;
        if let Some(Some(cert)) = found {
            let report = verify(&cert, problem, opts.samples, opts.seed, opts.tau)?;
            verification = Some(report.verdict);
            if report.verdict == Verdict::Verified {
                attempts.push(DegreeAttempt {
                    degree: d,
                    barrier,
                    verification,
                    moment: None,
                    moment_truncation: matched_truncation(problem, d + opts.moment_lookahead),
                });
                return Ok(finish(RunVerdict::Disconnected, Some(d), attempts, Some(cert)));
            }
        }
        let md = matched_truncation(problem, d + opts.moment_lookahead);
        let (moment, _) = attempt(|| {
            let prog = if split {
                build_connect_box(problem, md)?
            } else {
                build_connect_full(problem, md)?
            };
            let sol = solve(&prog.sdp, backend, &opts.solver)?;
            Ok((sol.status, (), sol.meta.raw_status))
        })?;
        let relaxed = moment.status == Some(SdpStatus::Feasible);
        let unknown = |a: &ProgramAttempt| a.status.is_none_or(|s| s == SdpStatus::Unknown);
        if unknown(&barrier) && unknown(&moment) {
            unknown_streak += 1;
        } else {
            unknown_streak = 0;
        }
        attempts.push(DegreeAttempt {
            degree: d,
            barrier,
            verification,
            moment: Some(moment),
            moment_truncation: md,
        });
        if relaxed {
            return Ok(finish(RunVerdict::RelaxationFeasible, Some(d), attempts, None));
        }
        if unknown_streak >= 3 {
            return Err(Error::Backend(format!(
                "solver returned no verdict for either program at orders {}..={d}",
                d - 2
            )));
        }
    }
    Ok(finish(RunVerdict::Exhausted, None, attempts, None))
}

/// Rows `(t, x₁[, x₂], v)` on a regular grid over `bounds` at each time.
pub fn contour_grid(
    cert: &BarrierCertificate,
    times: &[f64],
    bounds: &[(f64, f64)],
    resolution: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = cert.n;
    if n == 0 || n > 2 {
        return Err(Error::Unsupported(format!("contours need n in {{1, 2}}, got {n}")));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    if bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bounds.len(),
        });
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..resolution)
            .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let grids: Vec<Vec<f64>> = bounds.iter().map(|&b| axis(b)).collect();
    let mut rows = Vec::new();
    for &t in times {
        if n == 1 {
            for &x in &grids[0] {
                rows.push(vec![t, x, cert.v.evaluate(&[t, x])?]);
            }
        } else {
            for &x1 in &grids[0] {
                for &x2 in &grids[1] {
                    rows.push(vec![t, x1, x2, cert.v.evaluate(&[t, x1, x2])?]);
                }
            }
        }
    }
    Ok(rows)
}

pub fn contour_csv(n: usize, rows: &[Vec<f64>]) -> String {
    let mut out = String::from(if n == 1 { "t,x1,v\n" } else { "t,x1,x2,v\n" });
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
