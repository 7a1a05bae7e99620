//! Independent re-checking of barrier certificates, the strict shift, and a
//! rasterized connectivity oracle.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::certificate::{gram_polynomial, BarrierCertificate, BuilderPath, CertConstraint, ConstraintKind};
use crate::error::{Error, Result};
use crate::poly::{MonomialBasis, Polynomial, Var};
use crate::sdp::psd_project;
use crate::semialg::{sample_set, ControlSet, ProblemInstance, SetUnion};

pub const DEFAULT_TAU: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Verified,
    MarginViolation,
    ResidualViolation,
}

/// Smallest sampled value of one barrier inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub label: String,
    pub samples: usize,
    pub min_margin: f64,
    /// `(t, x)` or `(t, x, u)` where the minimum was seen.
    pub worst_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicCheck {
    pub label: String,
    pub residual: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tau: f64,
    pub samples: Vec<SampleCheck>,
    pub algebraic: Vec<AlgebraicCheck>,
    /// `max |ζᵢ⁺ − ζᵢ⁻ − ∂ᵢv|` over coefficients, box path only.
    pub zeta_residual: Option<f64>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn min_margin(&self) -> f64 {
        self.samples.iter().map(|s| s.min_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.algebraic
            .iter()
            .map(|a| a.residual)
            .chain(self.zeta_residual)
            .fold(0.0, f64::max)
    }

    /// Combines two reports; the worse verdict wins.
    pub fn merge(mut self, other: VerificationReport) -> VerificationReport {
        self.samples.extend(other.samples);
        self.algebraic.extend(other.algebraic);
        self.zeta_residual = match (self.zeta_residual, other.zeta_residual) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.tau = self.tau.max(other.tau);
        self.verdict = match (self.verdict, other.verdict) {
            (Verdict::ResidualViolation, _) | (_, Verdict::ResidualViolation) => {
                Verdict::ResidualViolation
            }
            (Verdict::MarginViolation, _) | (_, Verdict::MarginViolation) => Verdict::MarginViolation,
            _ => Verdict::Verified,
        };
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Tracker {
    label: String,
    samples: usize,
    min: f64,
    worst: Vec<f64>,
}

impl Tracker {
    fn new(label: impl Into<String>) -> Self {
        Tracker {
            label: label.into(),
            samples: 0,
            min: f64::INFINITY,
            worst: Vec::new(),
        }
    }

    fn see(&mut self, value: f64, point: &[f64]) {
        self.samples += 1;
        if value < self.min || self.worst.is_empty() {
            self.min = value;
            self.worst = point.to_vec();
        }
    }

    fn finish(self) -> SampleCheck {
        SampleCheck {
            label: self.label,
            samples: self.samples,
            min_margin: self.min,
            worst_point: self.worst,
        }
    }
}

fn control_samples(control: ControlSet, n: usize, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    match control {
        ControlSet::Box => (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect(),
        ControlSet::Ball => {
            let mut out = vec![vec![0.0; n]];
            for _ in 0..count {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let r = z.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                out.push(z.iter().map(|x| x / r).collect());
            }
            out
        }
    }
}

fn with_time(t: f64, x: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(x.len() + 1);
    p.push(t);
    p.extend_from_slice(x);
    p
}

/// Evaluates the three barrier inequalities (and the `ζ` forms on the box
/// path) at seeded samples of `X₀`, `X₁` and `[0,T] × X × U`.
pub fn check_samples(
    cert: &BarrierCertificate,
    problem: &ProblemInstance,
    n_samples: usize,
    seed: u64,
    tau: f64,
) -> Result<VerificationReport> {
    let fp = problem.fingerprint();
    if cert.fingerprint != fp {
        return Err(Error::FingerprintMismatch {
            cert: cert.fingerprint.clone(),
            problem: fp,
        });
    }
    let n = problem.n;
    let big_t = problem.horizon;
    let v = &cert.v;
    let dt = v.differentiate(Var::T)?;
    let dx: Vec<Polynomial> = (0..n)
        .map(|i| v.differentiate(Var::X(i as u16)))
        .collect::<Result<_>>()?;
    let mut checks = Vec::new();

    let mut init = Tracker::new("initial: v(0,x) - 1 on X0");
    for x in sample_set(&problem.x0, n_samples, seed)? {
        let p = with_time(0.0, &x);
        init.see(v.evaluate(&p)? - 1.0, &p);
    }
    checks.push(init.finish());

    let mut term = Tracker::new("terminal: -v(T,x) on X1");
    for x in sample_set(&problem.x1, n_samples, seed.wrapping_add(1))? {
        let p = with_time(big_t, &x);
        term.see(-v.evaluate(&p)?, &p);
    }
    checks.push(term.finish());

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let xs = sample_set(&problem.x, n_samples, seed.wrapping_add(3))?;
    let mut lie = Tracker::new("lie: dv/dt + u.grad v on [0,T] x X x U");
    let mut zeta_lie = Tracker::new("lie (zeta form): dv/dt - sum(zeta+ + zeta-)");
    let mut zeta_pos = Tracker::new("zeta >= 0");
    let box_path = cert.path == BuilderPath::Box && !cert.zetas.is_empty();
    for (k, x) in xs.iter().enumerate() {
        // Endpoints of the time interval get explicit samples.
        let t = match k {
            0 => 0.0,
            1 => big_t,
            _ => rng.gen_range(0.0..=big_t),
        };
        let p = with_time(t, x);
        let d0 = dt.evaluate(&p)?;
        let grad: Vec<f64> = dx.iter().map(|d| d.evaluate(&p)).collect::<Result<_>>()?;
        for u in control_samples(problem.control, n, &mut rng, 4) {
            let val = d0 + u.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
            let mut pt = p.clone();
            pt.extend_from_slice(&u);
            lie.see(val, &pt);
        }
        if box_path {
            let mut total = d0;
            for z in &cert.zetas {
                let zp = z.plus.evaluate(&p)?;
                let zm = z.minus.evaluate(&p)?;
                zeta_pos.see(zp.min(zm), &p);
                total -= zp + zm;
            }
            zeta_lie.see(total, &p);
        }
    }
    checks.push(lie.finish());
    if box_path {
        checks.push(zeta_lie.finish());
        checks.push(zeta_pos.finish());
    }
    let verdict = if checks.iter().all(|c| c.min_margin >= -tau) {
        Verdict::Verified
    } else {
        Verdict::MarginViolation
    };
    Ok(VerificationReport {
        tau,
        samples: checks,
        algebraic: Vec::new(),
        zeta_residual: None,
        verdict,
    })
}

/// What each constraint's target must be, rebuilt from `v`, `ζ` and `λ`.
fn expected_target(cert: &BarrierCertificate, c: &CertConstraint) -> Result<Polynomial> {
    let n = cert.n;
    let v = &cert.v;
    let lam = cert.margin;
    let space = c.space().clone();
    let constant = |x: f64| Polynomial::constant(&space, x);
    Ok(match c.kind {
        ConstraintKind::Initial { .. } => &(&v.fix(Var::T, 0.0)? - &constant(1.0)) - &constant(lam),
        ConstraintKind::Terminal { .. } => &(-&v.fix(Var::T, cert.horizon)?) - &constant(lam),
        ConstraintKind::Lie { .. } => {
            let ve = v.embed(&space)?;
            let mut lie = ve.differentiate(Var::T)?;
            for i in 0..n {
                let u = Polynomial::var(&space, Var::U(i as u16))?;
                lie = &lie + &(&u * &ve.differentiate(Var::X(i as u16))?);
            }
            &lie - &constant(lam)
        }
        ConstraintKind::LieBox { .. } => {
            let mut lie = v.differentiate(Var::T)?;
            for z in &cert.zetas {
                lie = &(&lie - &z.plus) - &z.minus;
            }
            &lie - &constant(lam)
        }
        ConstraintKind::Zeta {
            coord, positive, ..
        } => {
            let z = cert
                .zetas
                .iter()
                .find(|z| z.coord == coord)
                .ok_or_else(|| Error::MissingData(format!("zeta for coordinate {coord}")))?;
            if positive {
                z.plus.clone()
            } else {
                z.minus.clone()
            }
        }
        ConstraintKind::Custom => c.target.clone(),
    })
}

/// Re-expands every Putinar decomposition from its projected Gram matrices
/// and compares it with the target rebuilt from the certificate's `v`.
pub fn check_algebraic(cert: &BarrierCertificate, tau: f64) -> Result<VerificationReport> {
    let mut out = Vec::with_capacity(cert.constraints.len());
    for c in &cert.constraints {
        let space = c.space().clone();
        let target = expected_target(cert, c)?;
        if target.space() != &space {
            return Err(Error::SpaceMismatch(format!(
                "constraint `{}` lives in {space}, its target in {}",
                c.label,
                target.space()
            )));
        }
        let mut recon = Polynomial::zero(&space);
        let mut min_eig = f64::INFINITY;
        for g in &c.sos {
            let basis = MonomialBasis::new(&space, g.degree);
            if g.gram.nrows() != basis.len() || g.gram.ncols() != basis.len() {
                return Err(Error::MissingData(format!(
                    "Gram matrix of `{}` is {}x{}, expected side {}",
                    c.label,
                    g.gram.nrows(),
                    g.gram.ncols(),
                    basis.len()
                )));
            }
            let (q, e) = psd_project(&g.gram)?;
            min_eig = min_eig.min(e);
            recon = &recon + &gram_polynomial(&space, g.degree, &g.multiplier, &q);
        }
        for e in &c.eqs {
            recon = &recon + &(&e.mu * &e.h);
        }
        out.push(AlgebraicCheck {
            label: c.label.clone(),
            residual: (&target - &recon).max_abs_coeff(),
            min_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        });
    }
    let zeta_residual = if cert.path == BuilderPath::Box {
        let mut worst: f64 = 0.0;
        for i in 0..cert.n {
            let z = cert
                .zetas
                .iter()
                .find(|z| z.coord == i)
                .ok_or_else(|| Error::MissingData(format!("zeta for coordinate {i}")))?;
            let gap = &(&z.plus - &z.minus) - &cert.v.differentiate(Var::X(i as u16))?;
            worst = worst.max(gap.max_abs_coeff());
        }
        Some(worst)
    } else {
        None
    };
    let bad = out
        .iter()
        .any(|a| a.residual > tau || a.min_eigenvalue < -tau)
        || zeta_residual.is_some_and(|z| z > tau);
    Ok(VerificationReport {
        tau,
        samples: Vec::new(),
        algebraic: out,
        zeta_residual,
        verdict: if bad {
            Verdict::ResidualViolation
        } else {
            Verdict::Verified
        },
    })
}

/// Sampled and algebraic checks together.
pub fn verify(
    cert: &BarrierCertificate,
    problem: &ProblemInstance,
    n_samples: usize,
    seed: u64,
    tau: f64,
) -> Result<VerificationReport> {
    let sampled = check_samples(cert, problem, n_samples, seed, tau)?;
    Ok(sampled.merge(check_algebraic(cert, tau)?))
}

/// `ṽ(t,x) = v(t,x) − ε(1 − t/(2T))`.
pub fn strict_shift(v: &Polynomial, eps: f64, horizon: f64) -> Result<Polynomial> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift must be positive, got {eps}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {horizon}")));
    }
    let space = v.space();
    let t = Polynomial::var(space, Var::T)?;
    let shift = &Polynomial::constant(space, eps) - &t.scale(eps / (2.0 * horizon));
    Ok(v - &shift)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Connected,
    Disconnected,
}

/// Grid cells of `X` that belong to (or, for single points, are nearest to)
/// the given set.
fn seed_cells(
    set: &SetUnion,
    nodes: &[Vec<f64>],
    in_x: &[bool],
    index: impl Fn(&[f64]) -> usize,
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for comp in set.components() {
        if let Some(p) = comp.pinned_point() {
            let k = index(&p);
            if in_x[k] {
                out.push(k);
            }
            continue;
        }
        for (k, node) in nodes.iter().enumerate() {
            if in_x[k] && comp.contains(node, 1e-9)? {
                out.push(k);
            }
        }
    }
    Ok(out)
}

/// Rasterizes `X` on a `resolution`ⁿ grid over its bounding box and flood
/// fills axis neighbours from the `X₀` cells.
pub fn grid_connectivity_oracle(problem: &ProblemInstance, resolution: usize) -> Result<Connectivity> {
    let n = problem.n;
    if n == 0 || n > 3 {
        return Err(Error::Unsupported(format!("grid oracle needs 1 <= n <= 3, got {n}")));
    }
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 16, got {resolution}"
        )));
    }
    let hull = problem.x.hull();
    let step: Vec<f64> = hull
        .iter()
        .map(|&(lo, hi)| (hi - lo) / (resolution - 1) as f64)
        .collect();
    let total = resolution.pow(n as u32);
    let coords = |mut k: usize| -> Vec<usize> {
        let mut c = vec![0; n];
        for ci in c.iter_mut() {
            *ci = k % resolution;
            k /= resolution;
        }
        c
    };
    let flat = |c: &[usize]| c.iter().rev().fold(0, |acc, &ci| acc * resolution + ci);
    let nodes: Vec<Vec<f64>> = (0..total)
        .map(|k| {
            coords(k)
                .iter()
                .enumerate()
                .map(|(i, &ci)| hull[i].0 + ci as f64 * step[i])
                .collect()
        })
        .collect();
    let in_x: Vec<bool> = nodes
        .iter()
        .map(|p| problem.x.contains(p, 1e-12))
        .collect::<Result<_>>()?;
    let nearest = |p: &[f64]| -> usize {
        let c: Vec<usize> = p
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if step[i] == 0.0 {
                    0
                } else {
                    (((x - hull[i].0) / step[i]).round().max(0.0) as usize).min(resolution - 1)
                }
            })
            .collect();
        flat(&c)
    };
    let starts = seed_cells(&problem.x0, &nodes, &in_x, nearest)?;
    let goals = seed_cells(&problem.x1, &nodes, &in_x, nearest)?;
    let mut goal = vec![false; total];
    for g in goals {
        goal[g] = true;
    }
    let mut seen = vec![false; total];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for s in starts {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(k) = queue.pop_front() {
        if goal[k] {
            return Ok(Connectivity::Connected);
        }
        let c = coords(k);
        for axis in 0..n {
            for delta in [-1i64, 1] {
                let next = c[axis] as i64 + delta;
                if next < 0 || next >= resolution as i64 {
                    continue;
                }
                let mut nc = c.clone();
                nc[axis] = next as usize;
                let nk = flat(&nc);
                if in_x[nk] && !seen[nk] {
                    seen[nk] = true;
                    queue.push_back(nk);
                }
            }
        }
    }
    Ok(Connectivity::Disconnected)
}
