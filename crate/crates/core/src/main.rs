use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use disconnect::certificate::BarrierCertificate;
use disconnect::driver::{contour_csv, contour_grid, meta_algorithm, solve_barrier, MetaOptions, RunVerdict};
use disconnect::horizon::HorizonBound;
use disconnect::moment::{build_connect_box, build_connect_full};
use disconnect::sdp::sdpa::export_sdpa;
use disconnect::sdp::{backend_from_env, solve, SdpStatus, SolverConfig};
use disconnect::semialg::{parse_problem, ProblemInstance};
use disconnect::sos::{build_disconnect_box, build_disconnect_full};
use disconnect::verify::{verify, Verdict, DEFAULT_SAMPLES, DEFAULT_TAU};
use disconnect::{Error, Result};

const EXIT_EXHAUSTED: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VIOLATION: u8 = 1;

#[derive(Parser)]
#[command(name = "disconnect", version, about = "Certify path-disconnectedness of semialgebraic sets")]
struct Cli {
    /// Feasibility tolerance of the SDP solve.
    #[arg(long, global = true, default_value_t = 1e-8)]
    sdp_tol: f64,
    #[arg(long, global = true, default_value_t = 200)]
    sdp_max_iter: u32,
    /// Wall-clock cap per SDP in seconds.
    #[arg(long, global = true, default_value_t = 300.0)]
    time_limit: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Program {
    Disconnect,
    Connect,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a barrier certificate of the given order.
    Disconnect {
        problem: PathBuf,
        #[arg(long)]
        degree: usize,
        /// Keep the controls as variables (default for ball controls).
        #[arg(long, conflicts_with = "box_")]
        full_u: bool,
        /// Eliminate box controls through ζ± (default for box controls).
        #[arg(long = "box")]
        box_: bool,
        /// Maximize the margin λ instead of stopping at the first feasible point.
        #[arg(long)]
        maximize_margin: bool,
        /// Where to write the certificate JSON.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve a moment relaxation of the connectedness program.
    Connect {
        problem: PathBuf,
        /// Moment matrices of order d (moments up to degree 2d).
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        box_split: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Alternate both programs with increasing order.
    Auto {
        problem: PathBuf,
        #[arg(long, default_value_t = 1)]
        d0: usize,
        #[arg(long, default_value_t = 6)]
        dmax: usize,
        /// Report a feasible relaxation as PATH-CONNECTED.
        #[arg(long)]
        strict_paper_labels: bool,
        /// Keep the controls as variables even for box controls.
        #[arg(long)]
        full_u: bool,
        /// Where to write the certificate when one is found.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Re-check a certificate against its problem.
    Verify {
        certificate: PathBuf,
        problem: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Print time-horizon bounds for a problem.
    Bound { problem: PathBuf },
    /// Write the SDP of one program in sparse SDPA format.
    ExportSdpa {
        problem: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long, value_enum)]
        program: Program,
        /// Box-control elimination (barrier) or split measures (moments).
        #[arg(long = "box")]
        box_: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Tabulate v(t, x) as CSV.
    Contour {
        certificate: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0])]
        times: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        res: usize,
        /// `lo:hi` per state coordinate, comma separated.
        #[arg(long, value_delimiter = ',')]
        bounds: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn load_problem(path: &Path) -> Result<ProblemInstance> {
    parse_problem(&std::fs::read_to_string(path)?)
}

fn load_cert(path: &Path) -> Result<BarrierCertificate> {
    BarrierCertificate::from_json(&std::fs::read_to_string(path)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn status_code(status: SdpStatus) -> ExitCode {
    match status {
        SdpStatus::Unknown => ExitCode::from(EXIT_SOLVER),
        _ => ExitCode::SUCCESS,
    }
}

fn parse_bounds(raw: &[String], n: usize) -> Result<Vec<(f64, f64)>> {
    if raw.is_empty() {
        return Ok(vec![(0.0, 1.0); n]);
    }
    raw.iter()
        .map(|s| {
            let (lo, hi) = s
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("bound `{s}` is not lo:hi")))?;
            let p = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number in `{s}`")))
            };
            Ok((p(lo)?, p(hi)?))
        })
        .collect()
}

fn bounds_for(problem: &ProblemInstance) -> Result<Vec<HorizonBound>> {
    let mut out = vec![HorizonBound::user(problem.horizon)?];
    if problem.n >= 2 {
        let deg = problem
            .x
            .components()
            .iter()
            .map(|c| c.max_constraint_degree())
            .max()
            .unwrap_or(0)
            .max(2);
        out.push(HorizonBound::kurdyka(problem.n, deg)?);
    }
    let boxes_only = problem.n == 2
        && problem
            .x
            .components()
            .iter()
            .all(|c| c.ineqs.is_empty() && c.eqs.is_empty());
    if boxes_only {
        let boxes: Vec<[(f64, f64); 2]> = problem
            .x
            .components()
            .iter()
            .map(|c| [c.bounding_box[0], c.bounding_box[1]])
            .collect();
        if let Ok(b) = HorizonBound::box_union(&boxes) {
            out.push(b);
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = SolverConfig {
        tol: cli.sdp_tol,
        max_iter: cli.sdp_max_iter,
        time_limit: Some(cli.time_limit),
    };
    match cli.command {
        Command::Disconnect {
            problem,
            degree,
            full_u,
            box_,
            maximize_margin,
            out,
        } => {
            let p = load_problem(&problem)?;
            let backend = backend_from_env()?;
            let eliminate = !full_u || box_;
            let (status, cert) = if maximize_margin {
                let mut prog = if eliminate && p.control == disconnect::semialg::ControlSet::Box {
                    build_disconnect_box(&p, degree)?
                } else {
                    build_disconnect_full(&p, degree)?
                };
                prog.maximize_margin();
                let sol = solve(&prog.sdp, backend.as_ref(), &cfg)?;
                let cert = (sol.status == SdpStatus::Feasible)
                    .then(|| disconnect::sos::extract_certificate(&sol, &prog.decoder))
                    .transpose()?;
                (sol.status, cert)
            } else {
                let (s, c, _) = solve_barrier(&p, degree, eliminate, backend.as_ref(), &cfg)?;
                (s, c)
            };
            eprintln!("status: {status:?}");
            if let Some(c) = cert {
                eprintln!("margin: {:e}, max residual: {:e}", c.margin, c.max_residual());
                emit(out.as_deref(), &c.to_json())?;
            }
            Ok(status_code(status))
        }
        Command::Connect {
            problem,
            degree,
            box_split,
            out,
        } => {
            let p = load_problem(&problem)?;
            let backend = backend_from_env()?;
            let prog = if box_split {
                build_connect_box(&p, degree)?
            } else {
                build_connect_full(&p, degree)?
            };
            let sol = solve(&prog.sdp, backend.as_ref(), &cfg)?;
            let report = prog.report(&p, &sol)?;
            eprintln!("status: {:?}", sol.status);
            emit(out.as_deref(), &report.to_json())?;
            Ok(status_code(sol.status))
        }
        Command::Auto {
            problem,
            d0,
            dmax,
            strict_paper_labels,
            full_u,
            certificate,
        } => {
            let p = load_problem(&problem)?;
            let backend = backend_from_env()?;
            let opts = MetaOptions {
                solver: cfg,
                eliminate_controls: !full_u,
                ..MetaOptions::default()
            };
            let mut outcome = match meta_algorithm(&p, d0, dmax, backend.as_ref(), &opts) {
                Err(Error::Backend(msg)) => {
                    eprintln!("error: {msg}");
                    return Ok(ExitCode::from(EXIT_SOLVER));
                }
                other => other?,
            };
            if let (Some(path), Some(c)) = (&certificate, &outcome.certificate) {
                std::fs::write(path, c.to_json())?;
                outcome.certificate_path = Some(path.display().to_string());
            }
            eprintln!(
                "{}{}",
                outcome.verdict.label(strict_paper_labels),
                outcome.degree.map(|d| format!(" at order {d}")).unwrap_or_default()
            );
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            Ok(match outcome.verdict {
                RunVerdict::Exhausted => ExitCode::from(EXIT_EXHAUSTED),
                _ => ExitCode::SUCCESS,
            })
        }
        Command::Verify {
            certificate,
            problem,
            samples,
            seed,
            tau,
        } => {
            let cert = load_cert(&certificate)?;
            let p = load_problem(&problem)?;
            let report = verify(&cert, &p, samples, seed, tau)?;
            println!("{}", report.to_json());
            eprintln!("verdict: {:?}", report.verdict);
            Ok(if report.verdict == Verdict::Verified {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VIOLATION)
            })
        }
        Command::Bound { problem } => {
            let p = load_problem(&problem)?;
            for b in bounds_for(&p)? {
                let value = b.value.map_or("inf".to_string(), |v| format!("{v}"));
                println!("{:?} ({}): {value}", b.method, b.label);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportSdpa {
            problem,
            degree,
            program,
            box_,
            out,
        } => {
            let p = load_problem(&problem)?;
            let sdp = match (program, box_) {
                (Program::Disconnect, false) => build_disconnect_full(&p, degree)?.sdp,
                (Program::Disconnect, true) => build_disconnect_box(&p, degree)?.sdp,
                (Program::Connect, false) => build_connect_full(&p, degree)?.sdp,
                (Program::Connect, true) => build_connect_box(&p, degree)?.sdp,
            };
            let text = export_sdpa(&sdp)?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Contour {
            certificate,
            times,
            res,
            bounds,
            out,
        } => {
            let cert = load_cert(&certificate)?;
            let bounds = parse_bounds(&bounds, cert.n)?;
            let rows = contour_grid(&cert, &times, &bounds, res)?;
            let csv = contour_csv(cert.n, &rows);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Backend(_) => ExitCode::from(EXIT_SOLVER),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
