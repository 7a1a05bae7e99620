//! Weighted-SOS constraints and the disconnectedness barrier programs.

use std::collections::BTreeMap;

use crate::certificate::{
    gram_polynomial, BarrierCertificate, BuilderPath, CertConstraint, ConstraintKind, EqTerm,
    GramTerm, ZetaPair,
};
use crate::error::{Error, Result};
use crate::linpoly::LinPoly;
use crate::poly::{gram_size, MonomialBasis, MultiIndex, Polynomial, Space, Var};
use crate::sdp::{psd_project, min_eigenvalue, LinExpr, Scalar, SdpBuilder, SdpProblem, SdpSolution, SdpStatus};
use crate::semialg::{BasicSet, ControlSet, ProblemInstance};

/// `target = σ₀ + Σ σᵢ gᵢ + Σ μⱼ hⱼ` registered in an [`SdpBuilder`].
#[derive(Clone, Debug)]
pub struct WsosConstraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub order: usize,
    pub target: LinPoly,
    /// The first entry is `σ₀` with multiplier 1.
    pub sos: Vec<SosTerm>,
    pub eqs: Vec<(Polynomial, LinPoly)>,
    /// Number of coefficient-matching rows emitted.
    pub rows: usize,
}

/// `multiplier · σ` with `σ` a Gram form over monomials of degree ≤ `degree`.
#[derive(Clone, Debug)]
pub struct SosTerm {
    pub multiplier: Polynomial,
    pub degree: usize,
    pub block: usize,
}

/// Gram basis degree of each `σᵢ`, or `None` when `σᵢ` is forced to vanish.
///
/// Starts from `k` for every multiplier. While the highest degree reached by
/// the products `σᵢgᵢ` exceeds everything else in the identity, those top
/// parts must cancel among themselves. When that group is a single `gᵢ`, or
/// every leading form in it has the same sign, each top part is zero, so the
/// top monomials of those `σᵢ` carry only zero Gram rows and are dropped. The
/// set of representable polynomials is unchanged.
pub fn multiplier_degrees(
    target_degree: usize,
    ineqs: &[Polynomial],
    eqs: &[Polynomial],
    k: usize,
) -> Vec<Option<usize>> {
    let mut deg: Vec<Option<usize>> = vec![Some(k); ineqs.len()];
    let floor = eqs
        .iter()
        .map(|h| 2 * k + h.degree())
        .chain([target_degree, 2 * k])
        .max()
        .unwrap();
    let signs: Vec<Option<f64>> = ineqs.iter().map(leading_form_sign).collect();
    loop {
        let reach = |i: usize| deg[i].map(|d| 2 * d + ineqs[i].degree());
        let Some(top) = (0..ineqs.len()).filter_map(reach).max() else {
            break;
        };
        if top <= floor {
            break;
        }
        let group: Vec<usize> = (0..ineqs.len()).filter(|&i| reach(i) == Some(top)).collect();
        let same_sign = [1.0, -1.0]
            .iter()
            .any(|&sg| group.iter().all(|&i| signs[i] == Some(sg)));
        if group.len() > 1 && !same_sign {
            break;
        }
        for i in group {
            deg[i] = deg[i].and_then(|d| d.checked_sub(1));
        }
    }
    deg
}

/// `Some(±1)` when the top-degree homogeneous part of `g` keeps one sign,
/// judged on a fixed set of random directions. A wrong answer only shrinks the
/// search space; it never admits an invalid certificate.
fn leading_form_sign(g: &Polynomial) -> Option<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let d = g.degree();
    if d == 0 || d % 2 == 1 {
        return None;
    }
    let lead: Vec<(&MultiIndex, f64)> = g.terms().filter(|(m, _)| m.degree() == d).collect();
    let scale = lead.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let n = g.space().len();
    let (mut pos, mut neg) = (true, true);
    for _ in 0..4096 {
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let z: Vec<f64> = z.iter().map(|x| x / norm).collect();
        let val: f64 = lead.iter().map(|(m, c)| c * m.eval(&z)).sum();
        pos &= val >= -1e-12 * scale;
        neg &= val <= 1e-12 * scale;
    }
    match (pos, neg) {
        (true, false) => Some(1.0),
        (false, true) => Some(-1.0),
        _ => None,
    }
}

/// Adds the Putinar constraint for `target` on `{g ≥ 0, h = 0}` at order `k`.
///
/// `σ₀` has basis degree `k`, each `σᵢ` at most `k` (see
/// [`multiplier_degrees`]) and every `μⱼ` degree `2k`; `ineqs` and `eqs` must
/// live in the target's space.
pub fn wsos(
    b: &mut SdpBuilder,
    target: &LinPoly,
    ineqs: &[Polynomial],
    eqs: &[Polynomial],
    k: usize,
    label: &str,
) -> Result<WsosConstraint> {
    let space = target.space().clone();
    for p in ineqs.iter().chain(eqs) {
        if p.space() != &space {
            return Err(Error::SpaceMismatch(format!(
                "constraint in {} for a target in {space}",
                p.space()
            )));
        }
    }
    let reach = 2 * k
        + ineqs
            .iter()
            .chain(eqs)
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0);
    if target.degree() > reach {
        return Err(Error::OrderTooSmall {
            order: k,
            degree: target.degree(),
        });
    }
    let degrees = multiplier_degrees(target.degree(), ineqs, eqs, k);
    let mut residual: BTreeMap<MultiIndex, LinExpr> = BTreeMap::new();
    for (m, e) in target.terms() {
        residual.entry(m.clone()).or_default().add_scaled(e, 1.0);
    }
    let one = Polynomial::constant(&space, 1.0);
    let mut sos = Vec::with_capacity(ineqs.len() + 1);
    let multipliers = std::iter::once((&one, Some(k))).chain(ineqs.iter().zip(degrees));
    for (idx, (g, deg)) in multipliers.enumerate() {
        let Some(deg) = deg else { continue };
        let basis = MonomialBasis::new(&space, deg);
        let blk = b.add_block(format!("{label}/sigma{idx}"), basis.len());
        for a in 0..basis.len() {
            for c in a..basis.len() {
                let w = if a == c { 1.0 } else { 2.0 };
                let zz = basis.get(a).add(basis.get(c));
                for (m, gc) in g.terms() {
                    residual
                        .entry(zz.add(m))
                        .or_default()
                        .add_term(Scalar::entry(blk, a, c), -w * gc);
                }
            }
        }
        sos.push(SosTerm {
            multiplier: g.clone(),
            degree: deg,
            block: blk,
        });
    }
    let mut eq_terms = Vec::with_capacity(eqs.len());
    for (idx, h) in eqs.iter().enumerate() {
        let (mu, _) = LinPoly::unknown(b, &space, 2 * k, &format!("{label}/mu{idx}"));
        for (m, e) in mu.mul_poly(h)?.terms() {
            residual.entry(m.clone()).or_default().add_scaled(e, -1.0);
        }
        eq_terms.push((h.clone(), mu));
    }
    let mut rows = 0;
    for e in residual.values() {
        if e.terms.is_empty() && e.constant == 0.0 {
            continue;
        }
        b.add_zero(e);
        rows += 1;
    }
    Ok(WsosConstraint {
        label: label.to_string(),
        kind: ConstraintKind::Custom,
        order: k,
        target: target.clone(),
        sos,
        eqs: eq_terms,
        rows,
    })
}

/// Inequalities describing a basic set, skipping box factors of pinned
/// coordinates (their equalities already carry them).
pub fn support_ineqs(set: &BasicSet) -> Vec<Polynomial> {
    let mut out = set.ineqs.clone();
    for (p, &(lo, hi)) in set.box_constraints().into_iter().zip(&set.bounding_box) {
        if lo < hi && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn embed_all(ps: &[Polynomial], space: &Space) -> Result<Vec<Polynomial>> {
    ps.iter().map(|p| p.embed(space)).collect()
}

/// `t(T − t)` in `space`.
pub fn time_interval(space: &Space, horizon: f64) -> Polynomial {
    let t = Polynomial::var(space, Var::T).expect("space has t");
    &t * &(&Polynomial::constant(space, horizon) - &t)
}

/// Largest Gram side of a barrier program: the Lie constraint's basis.
pub fn max_gram_side(n: usize, order: usize, path: BuilderPath) -> u64 {
    match path {
        BuilderPath::Full => gram_size(2 * n + 1, order),
        BuilderPath::Box => gram_size(n + 1, order),
    }
}

/// Everything needed to turn an SDP solution back into a certificate.
#[derive(Clone, Debug)]
pub struct BarrierDecoder {
    pub problem_name: String,
    pub fingerprint: String,
    pub n: usize,
    pub horizon: f64,
    pub control: ControlSet,
    pub path: BuilderPath,
    pub order: usize,
    pub v: LinPoly,
    pub zetas: Vec<(usize, LinPoly, LinPoly)>,
    pub margin_block: usize,
    pub constraints: Vec<WsosConstraint>,
}

/// A barrier SDP. The margin `λ ∈ [0, 1]` is a plain variable; interior-point
/// backends then return a well-centred point with `λ > 0` whenever the
/// program is strictly feasible.
#[derive(Clone, Debug)]
pub struct BarrierProgram {
    pub sdp: SdpProblem,
    pub decoder: BarrierDecoder,
}

impl BarrierProgram {
    /// Turns the feasibility program into `max λ`.
    pub fn maximize_margin(&mut self) {
        self.sdp.objective = vec![(Scalar::entry(self.decoder.margin_block, 0, 0), 1.0)];
    }
}

struct Common {
    b: SdpBuilder,
    v: LinPoly,
    lambda: usize,
    constraints: Vec<WsosConstraint>,
}

fn common(problem: &ProblemInstance, k: usize) -> Result<Common> {
    if k == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let mut b = SdpBuilder::new();
    let lambda = b.add_block("lambda", 1);
    let slack = b.add_block("lambda_slack", 1);
    b.add_row(
        vec![(Scalar::entry(lambda, 0, 0), 1.0), (Scalar::entry(slack, 0, 0), 1.0)],
        1.0,
    );
    let ts = Space::time_state(problem.n);
    let (v, _) = LinPoly::unknown(&mut b, &ts, 2 * k, "v");
    let lam = Scalar::entry(lambda, 0, 0);
    let mut constraints = Vec::new();
    let v0 = v.fix(Var::T, 0.0)?.add_constant(-1.0).add_scalar(lam, -1.0);
    for (j, c) in problem.x0.components().iter().enumerate() {
        let mut w = wsos(&mut b, &v0, &support_ineqs(c), &c.eqs, k, &format!("init{j}"))?;
        w.kind = ConstraintKind::Initial { component: j };
        constraints.push(w);
    }
    let vt = LinPoly::zero(v0.space())
        .sub(&v.fix(Var::T, problem.horizon)?)?
        .add_scalar(lam, -1.0);
    for (j, c) in problem.x1.components().iter().enumerate() {
        let mut w = wsos(&mut b, &vt, &support_ineqs(c), &c.eqs, k, &format!("term{j}"))?;
        w.kind = ConstraintKind::Terminal { component: j };
        constraints.push(w);
    }
    Ok(Common {
        b,
        v,
        lambda,
        constraints,
    })
}

fn decoder(
    problem: &ProblemInstance,
    k: usize,
    path: BuilderPath,
    c: Common,
    zetas: Vec<(usize, LinPoly, LinPoly)>,
) -> BarrierProgram {
    BarrierProgram {
        sdp: c.b.finish(),
        decoder: BarrierDecoder {
            problem_name: problem.name.clone(),
            fingerprint: problem.fingerprint(),
            n: problem.n,
            horizon: problem.horizon,
            control: problem.control,
            path,
            order: k,
            v: c.v,
            zetas,
            margin_block: c.lambda,
            constraints: c.constraints,
        },
    }
}

/// Barrier program with the controls kept as variables of the Lie constraint.
pub fn build_disconnect_full(problem: &ProblemInstance, k: usize) -> Result<BarrierProgram> {
    let mut c = common(problem, k)?;
    let n = problem.n;
    let tsu = Space::time_state_control(n);
    let v = c.v.embed(&tsu)?;
    let mut lie = v.differentiate(Var::T)?;
    for i in 0..n {
        let u = Polynomial::var(&tsu, Var::U(i as u16))?;
        lie = lie.add(&v.differentiate(Var::X(i as u16))?.mul_poly(&u)?)?;
    }
    let lie = lie.add_scalar(Scalar::entry(c.lambda, 0, 0), -1.0);
    let mut shared = vec![time_interval(&tsu, problem.horizon)];
    shared.extend(problem.control.constraints(&tsu, n));
    for (j, comp) in problem.x.components().iter().enumerate() {
        let mut ineqs = embed_all(&support_ineqs(comp), &tsu)?;
        ineqs.extend(shared.iter().cloned());
        let eqs = embed_all(&comp.eqs, &tsu)?;
        let mut w = wsos(&mut c.b, &lie, &ineqs, &eqs, k, &format!("lie{j}"))?;
        w.kind = ConstraintKind::Lie { component: j };
        c.constraints.push(w);
    }
    Ok(decoder(problem, k, BuilderPath::Full, c, Vec::new()))
}

/// Barrier program with the box controls eliminated through `ζ±`.
pub fn build_disconnect_box(problem: &ProblemInstance, k: usize) -> Result<BarrierProgram> {
    if problem.control != ControlSet::Box {
        return Err(Error::Unsupported(
            "control elimination needs box controls; use the full builder for ball controls".into(),
        ));
    }
    let mut c = common(problem, k)?;
    let n = problem.n;
    let ts = Space::time_state(n);
    let lam = Scalar::entry(c.lambda, 0, 0);
    let mut zetas = Vec::with_capacity(n);
    let mut lie = c.v.differentiate(Var::T)?.add_scalar(lam, -1.0);
    for i in 0..n {
        let (zp, _) = LinPoly::unknown(&mut c.b, &ts, 2 * k, &format!("zeta+{i}"));
        let (zm, _) = LinPoly::unknown(&mut c.b, &ts, 2 * k, &format!("zeta-{i}"));
        let gap = zp.sub(&zm)?.sub(&c.v.differentiate(Var::X(i as u16))?)?;
        for (_, e) in gap.terms() {
            if !e.is_zero() {
                c.b.add_zero(e);
            }
        }
        lie = lie.sub(&zp)?.sub(&zm)?;
        zetas.push((i, zp, zm));
    }
    let time = time_interval(&ts, problem.horizon);
    for (j, comp) in problem.x.components().iter().enumerate() {
        let mut ineqs = embed_all(&support_ineqs(comp), &ts)?;
        ineqs.push(time.clone());
        let eqs = embed_all(&comp.eqs, &ts)?;
        let mut w = wsos(&mut c.b, &lie, &ineqs, &eqs, k, &format!("liebox{j}"))?;
        w.kind = ConstraintKind::LieBox { component: j };
        c.constraints.push(w);
        for (i, zp, zm) in &zetas {
            for (positive, z) in [(true, zp), (false, zm)] {
                let sign = if positive { '+' } else { '-' };
                let mut w = wsos(&mut c.b, z, &ineqs, &eqs, k, &format!("zeta{sign}{i}/{j}"))?;
                w.kind = ConstraintKind::Zeta {
                    component: j,
                    coord: *i,
                    positive,
                };
                c.constraints.push(w);
            }
        }
    }
    Ok(decoder(problem, k, BuilderPath::Box, c, zetas))
}

/// Reads `v`, `ζ±`, the margin and every projected Gram block out of a
/// feasible solution.
pub fn extract_certificate(sol: &SdpSolution, dec: &BarrierDecoder) -> Result<BarrierCertificate> {
    if sol.status != SdpStatus::Feasible {
        return Err(Error::NotFeasible(format!(
            "cannot extract a certificate from a {:?} solution",
            sol.status
        )));
    }
    let value = |s: Scalar| sol.value(s);
    let v = dec.v.evaluate(value);
    let zetas = dec
        .zetas
        .iter()
        .map(|(i, zp, zm)| ZetaPair {
            coord: *i,
            plus: zp.evaluate(value),
            minus: zm.evaluate(value),
        })
        .collect();
    let mut constraints = Vec::with_capacity(dec.constraints.len());
    for w in &dec.constraints {
        let target = w.target.evaluate(value);
        let space = target.space().clone();
        let mut recon = Polynomial::zero(&space);
        let mut sos = Vec::with_capacity(w.sos.len());
        let mut min_eig = f64::INFINITY;
        for term in &w.sos {
            let raw = &sol.blocks[term.block];
            min_eig = min_eig.min(min_eigenvalue(raw));
            let (q, _) = psd_project(raw)?;
            recon = &recon + &gram_polynomial(&space, term.degree, &term.multiplier, &q);
            sos.push(GramTerm {
                multiplier: term.multiplier.clone(),
                degree: term.degree,
                gram: q,
            });
        }
        let mut eqs = Vec::with_capacity(w.eqs.len());
        for (h, mu) in &w.eqs {
            let mu = mu.evaluate(value);
            recon = &recon + &(&mu * h);
            eqs.push(EqTerm { h: h.clone(), mu });
        }
        constraints.push(CertConstraint {
            label: w.label.clone(),
            kind: w.kind,
            order: w.order,
            residual: (&target - &recon).max_abs_coeff(),
            target,
            sos,
            eqs,
            min_eigenvalue: min_eig,
        });
    }
    Ok(BarrierCertificate {
        problem_name: dec.problem_name.clone(),
        fingerprint: dec.fingerprint.clone(),
        n: dec.n,
        horizon: dec.horizon,
        control: dec.control,
        path: dec.path,
        order: dec.order,
        v,
        zetas,
        margin: sol.blocks[dec.margin_block][(0, 0)],
        constraints,
        sdp_residual: sol.residual.unwrap_or(f64::NAN),
        solver: sol.meta.clone(),
    })
}
