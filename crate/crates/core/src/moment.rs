//! Truncated moment relaxations of the occupation-measure connectedness
//! programs.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{MonomialBasis, MultiIndex, Polynomial, Space, Var};
use crate::sdp::{min_eigenvalue, LinExpr, Scalar, SdpBuilder, SdpProblem, SdpSolution, SdpStatus};
use crate::semialg::{ControlSet, ProblemInstance};
use crate::sos::{support_ineqs, time_interval};

/// Moments `y_α` of one measure, indexed in its own space.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub label: String,
    pub space: Space,
    pub values: BTreeMap<MultiIndex, f64>,
}

impl MomentVector {
    pub fn new(label: impl Into<String>, space: &Space) -> Self {
        MomentVector {
            label: label.into(),
            space: space.clone(),
            values: BTreeMap::new(),
        }
    }

    /// Moments of `δ_p` up to `max_degree`.
    pub fn dirac(label: impl Into<String>, space: &Space, p: &[f64], max_degree: usize) -> Self {
        let mut y = MomentVector::new(label, space);
        for m in MonomialBasis::new(space, max_degree).monomials() {
            y.values.insert(m.clone(), m.eval(p));
        }
        y
    }

    pub fn get(&self, m: &MultiIndex) -> Result<f64> {
        self.values
            .get(m)
            .copied()
            .ok_or_else(|| Error::MissingData(format!("moment {:?} of {}", m.exps(), self.label)))
    }

    pub fn mass(&self) -> Result<f64> {
        self.get(&MultiIndex::zero(self.space.len()))
    }
}

/// `M[α,β] = y_{α+β}` over monomials of degree ≤ `d`.
pub fn moment_matrix(y: &MomentVector, d: usize) -> Result<DMatrix<f64>> {
    let one = Polynomial::constant(&y.space, 1.0);
    localizing_matrix(y, &one, d)
}

/// `M[α,β] = Σ_γ g_γ y_{α+β+γ}` over monomials of degree ≤ `d`.
pub fn localizing_matrix(y: &MomentVector, g: &Polynomial, d: usize) -> Result<DMatrix<f64>> {
    if g.space() != &y.space {
        return Err(Error::SpaceMismatch(format!("{} vs {}", g.space(), y.space)));
    }
    let basis = MonomialBasis::new(&y.space, d);
    let s = basis.len();
    let mut m = DMatrix::zeros(s, s);
    for a in 0..s {
        for b in a..s {
            let ab = basis.get(a).add(basis.get(b));
            let mut v = 0.0;
            for (gm, c) in g.terms() {
                v += c * y.get(&ab.add(gm))?;
            }
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureKind {
    Initial,
    Terminal,
    Occupation,
    ControlPlus { coord: usize },
    ControlMinus { coord: usize },
    ControlSlack { coord: usize },
}

/// One unknown measure together with its support description.
#[derive(Clone, Debug)]
pub struct MeasureSpec {
    pub label: String,
    pub kind: MeasureKind,
    pub component: usize,
    pub space: Space,
    pub ineqs: Vec<Polynomial>,
    pub eqs: Vec<Polynomial>,
    /// Support point when the support is a single point.
    pub atom: Option<Vec<f64>>,
}

/// The measures of a connectedness program, in block order.
pub fn measure_layout(problem: &ProblemInstance, box_split: bool) -> Result<Vec<MeasureSpec>> {
    if box_split && problem.control != ControlSet::Box {
        return Err(Error::Unsupported(
            "the split relaxation needs box controls".into(),
        ));
    }
    let n = problem.n;
    let xs = Space::state(n);
    let mut out = Vec::new();
    for (kind, set, name) in [
        (MeasureKind::Initial, &problem.x0, "mu0"),
        (MeasureKind::Terminal, &problem.x1, "muT"),
    ] {
        for (j, c) in set.components().iter().enumerate() {
            out.push(MeasureSpec {
                label: format!("{name}/{j}"),
                kind,
                component: j,
                space: xs.clone(),
                ineqs: support_ineqs(c),
                eqs: c.eqs.clone(),
                atom: c.pinned_point(),
            });
        }
    }
    let space = if box_split {
        Space::time_state(n)
    } else {
        Space::time_state_control(n)
    };
    let mut shared = vec![time_interval(&space, problem.horizon)];
    if !box_split {
        shared.extend(problem.control.constraints(&space, n));
    }
    for (j, c) in problem.x.components().iter().enumerate() {
        let mut ineqs: Vec<Polynomial> = support_ineqs(c)
            .iter()
            .map(|p| p.embed(&space))
            .collect::<Result<_>>()?;
        ineqs.extend(shared.iter().cloned());
        let eqs: Vec<Polynomial> = c.eqs.iter().map(|p| p.embed(&space)).collect::<Result<_>>()?;
        let mut push = |label: String, kind| {
            out.push(MeasureSpec {
                label,
                kind,
                component: j,
                space: space.clone(),
                ineqs: ineqs.clone(),
                eqs: eqs.clone(),
                atom: None,
            })
        };
        push(format!("mu/{j}"), MeasureKind::Occupation);
        if box_split {
            for i in 0..n {
                push(format!("sigma+{i}/{j}"), MeasureKind::ControlPlus { coord: i });
                push(format!("sigma-{i}/{j}"), MeasureKind::ControlMinus { coord: i });
                push(format!("sigmahat{i}/{j}"), MeasureKind::ControlSlack { coord: i });
            }
        }
    }
    Ok(out)
}

/// `coeff · y_index` of measure number `measure`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTerm {
    pub measure: usize,
    pub index: MultiIndex,
    pub coeff: f64,
}

/// `Σ terms = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentRow {
    pub label: String,
    pub terms: Vec<MomentTerm>,
    pub rhs: f64,
}

impl MomentRow {
    /// `Σ terms − rhs` at the given moments.
    pub fn violation(&self, ys: &[MomentVector]) -> Result<f64> {
        let mut s = -self.rhs;
        for t in &self.terms {
            s += t.coeff * ys[t.measure].get(&t.index)?;
        }
        Ok(s)
    }
}

/// Re-indexes a `(t, x)` exponent vector into `space`, optionally raising
/// the exponent of `bump` by one.
fn reindex(exps: &[u32], space: &Space, bump: Option<Var>) -> MultiIndex {
    let mut out = vec![0u32; space.len()];
    let ts = [Var::T];
    let vars = ts
        .iter()
        .copied()
        .chain((0..exps.len() - 1).map(|i| Var::X(i as u16)));
    for (v, &e) in vars.zip(exps) {
        if let Some(p) = space.position(v) {
            out[p] += e;
        }
    }
    if let Some(v) = bump {
        out[space.position(v).expect("bumped variable in space")] += 1;
    }
    MultiIndex::new(out)
}

/// Liouville equalities for every test monomial `t^a x^β` of degree ≤ `two_d`:
/// `T^a ⟨x^β, μ_T⟩ − 0^a ⟨x^β, μ₀⟩ − ⟨∂ₜφ + u·∇φ, μ⟩ = 0`, with the control
/// terms split into `σᵢ⁺ − σᵢ⁻` for the box program.
pub fn liouville_rows(problem: &ProblemInstance, layout: &[MeasureSpec], two_d: usize) -> Vec<MomentRow> {
    let n = problem.n;
    let ts = Space::time_state(n);
    let mut rows = Vec::new();
    for m in MonomialBasis::new(&ts, two_d).monomials() {
        let e = m.exps();
        let a = e[0];
        let beta = &e[1..];
        let mut terms = Vec::new();
        for (k, spec) in layout.iter().enumerate() {
            match spec.kind {
                MeasureKind::Terminal => terms.push(MomentTerm {
                    measure: k,
                    index: MultiIndex::new(beta.to_vec()),
                    coeff: problem.horizon.powi(a as i32),
                }),
                MeasureKind::Initial if a == 0 => terms.push(MomentTerm {
                    measure: k,
                    index: MultiIndex::new(beta.to_vec()),
                    coeff: -1.0,
                }),
                MeasureKind::Occupation => {
                    if a > 0 {
                        let mut d = e.to_vec();
                        d[0] -= 1;
                        terms.push(MomentTerm {
                            measure: k,
                            index: reindex(&d, &spec.space, None),
                            coeff: -(a as f64),
                        });
                    }
                    if spec.space.contains(Var::U(0)) {
                        for i in 0..n {
                            if beta[i] == 0 {
                                continue;
                            }
                            let mut d = e.to_vec();
                            d[1 + i] -= 1;
                            terms.push(MomentTerm {
                                measure: k,
                                index: reindex(&d, &spec.space, Some(Var::U(i as u16))),
                                coeff: -(beta[i] as f64),
                            });
                        }
                    }
                }
                MeasureKind::ControlPlus { coord } | MeasureKind::ControlMinus { coord } => {
                    if beta[coord] == 0 {
                        continue;
                    }
                    let sign = if matches!(spec.kind, MeasureKind::ControlPlus { .. }) {
                        -1.0
                    } else {
                        1.0
                    };
                    let mut d = e.to_vec();
                    d[1 + coord] -= 1;
                    terms.push(MomentTerm {
                        measure: k,
                        index: reindex(&d, &spec.space, None),
                        coeff: sign * beta[coord] as f64,
                    });
                }
                _ => {}
            }
        }
        rows.push(MomentRow {
            label: format!("liouville{:?}", e),
            terms,
            rhs: 0.0,
        });
    }
    rows
}

/// Mass normalization, domination (box program) and Liouville rows.
pub fn moment_rows(problem: &ProblemInstance, layout: &[MeasureSpec], two_d: usize) -> Vec<MomentRow> {
    let mut rows = vec![MomentRow {
        label: "mass".into(),
        terms: layout
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == MeasureKind::Initial)
            .map(|(k, s)| MomentTerm {
                measure: k,
                index: MultiIndex::zero(s.space.len()),
                coeff: 1.0,
            })
            .collect(),
        rhs: 1.0,
    }];
    for (k, spec) in layout.iter().enumerate() {
        if spec.kind != MeasureKind::Occupation {
            continue;
        }
        let parts: Vec<(usize, &MeasureSpec)> = layout
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                s.component == spec.component
                    && matches!(
                        s.kind,
                        MeasureKind::ControlPlus { .. }
                            | MeasureKind::ControlMinus { .. }
                            | MeasureKind::ControlSlack { .. }
                    )
            })
            .collect();
        for i in 0..problem.n {
            let of_i: Vec<usize> = parts
                .iter()
                .filter(|(_, s)| {
                    matches!(s.kind,
                        MeasureKind::ControlPlus { coord }
                        | MeasureKind::ControlMinus { coord }
                        | MeasureKind::ControlSlack { coord } if coord == i)
                })
                .map(|&(p, _)| p)
                .collect();
            if of_i.is_empty() {
                continue;
            }
            for m in MonomialBasis::new(&spec.space, two_d).monomials() {
                let mut terms = vec![MomentTerm {
                    measure: k,
                    index: m.clone(),
                    coeff: 1.0,
                }];
                terms.extend(of_i.iter().map(|&p| MomentTerm {
                    measure: p,
                    index: m.clone(),
                    coeff: -1.0,
                }));
                rows.push(MomentRow {
                    label: format!("dominate{i}/{}{:?}", spec.component, m.exps()),
                    terms,
                    rhs: 0.0,
                });
            }
        }
    }
    rows.extend(liouville_rows(problem, layout, two_d));
    rows
}

fn half_ceil(deg: usize) -> usize {
    deg.div_ceil(2)
}

/// Moment variables of one measure, read off its moment-matrix block.
#[derive(Clone, Debug)]
pub struct MeasureVars {
    pub block: usize,
    pub localizing: Vec<usize>,
    /// `α ↦ (a, b)` with `y_α = M[a, b]`.
    pub entries: BTreeMap<MultiIndex, (usize, usize)>,
    /// For a point mass the block is the 1×1 mass and `y_α = mass·pᵅ`.
    pub atom: Option<Vec<f64>>,
    pub max_degree: usize,
}

impl MeasureVars {
    fn expr(&self, m: &MultiIndex) -> Result<LinExpr> {
        let beyond = || Error::MissingData(format!("moment {:?} beyond truncation", m.exps()));
        if let Some(p) = &self.atom {
            if m.degree() > self.max_degree {
                return Err(beyond());
            }
            let mut e = LinExpr::zero();
            e.add_term(Scalar::entry(self.block, 0, 0), m.eval(p));
            return Ok(e);
        }
        let &(a, b) = self.entries.get(m).ok_or_else(beyond)?;
        Ok(LinExpr::scalar(Scalar::entry(self.block, a, b)))
    }

    fn value(&self, m: &MultiIndex, blocks: &[DMatrix<f64>]) -> Option<f64> {
        match &self.atom {
            Some(p) => (m.degree() <= self.max_degree).then(|| blocks[self.block][(0, 0)] * m.eval(p)),
            None => self.entries.get(m).map(|&(a, b)| blocks[self.block][(a, b)]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MomentProgram {
    pub sdp: SdpProblem,
    pub layout: Vec<MeasureSpec>,
    pub vars: Vec<MeasureVars>,
    /// Moment matrices are `M_d`; moments run to degree `2d`.
    pub d: usize,
    pub box_split: bool,
}

fn build(problem: &ProblemInstance, d: usize, box_split: bool) -> Result<MomentProgram> {
    if d == 0 {
        return Err(Error::InvalidArgument("truncation must be at least 1".into()));
    }
    let layout = measure_layout(problem, box_split)?;
    let mut b = SdpBuilder::new();
    let mut vars = Vec::with_capacity(layout.len());
    for spec in &layout {
        let need = spec
            .ineqs
            .iter()
            .chain(&spec.eqs)
            .map(|p| half_ceil(p.degree()))
            .max()
            .unwrap_or(0);
        if need > d {
            return Err(Error::OrderTooSmall {
                order: d,
                degree: 2 * need,
            });
        }
        if let Some(p) = &spec.atom {
            let block = b.add_block(format!("mass[{}]", spec.label), 1);
            vars.push(MeasureVars {
                block,
                localizing: Vec::new(),
                entries: BTreeMap::new(),
                atom: Some(p.clone()),
                max_degree: 2 * d,
            });
            continue;
        }
        let basis = MonomialBasis::new(&spec.space, d);
        let s = basis.len();
        let block = b.add_block(format!("M[{}]", spec.label), s);
        let mut entries: BTreeMap<MultiIndex, (usize, usize)> = BTreeMap::new();
        for a in 0..s {
            for c in a..s {
                let m = basis.get(a).add(basis.get(c));
                match entries.get(&m) {
                    None => {
                        entries.insert(m, (a, c));
                    }
                    Some(&(a0, c0)) => b.add_row(
                        vec![(Scalar::entry(block, a, c), 1.0), (Scalar::entry(block, a0, c0), -1.0)],
                        0.0,
                    ),
                }
            }
        }
        let mut mv = MeasureVars {
            block,
            localizing: Vec::new(),
            entries,
            atom: None,
            max_degree: 2 * d,
        };
        for (gi, g) in spec.ineqs.iter().enumerate() {
            let dl = d - half_ceil(g.degree());
            let lb = MonomialBasis::new(&spec.space, dl);
            let blk = b.add_block(format!("L[{}/{gi}]", spec.label), lb.len());
            for a in 0..lb.len() {
                for c in a..lb.len() {
                    let ac = lb.get(a).add(lb.get(c));
                    let mut e = LinExpr::scalar(Scalar::entry(blk, a, c));
                    for (gm, coef) in g.terms() {
                        e.add_scaled(&mv.expr(&ac.add(gm))?, -coef);
                    }
                    b.add_zero(&e);
                }
            }
            mv.localizing.push(blk);
        }
        for h in &spec.eqs {
            let dh = h.degree();
            if dh > 2 * d {
                continue;
            }
            for m in MonomialBasis::new(&spec.space, 2 * d - dh).monomials() {
                let mut e = LinExpr::zero();
                for (hm, coef) in h.terms() {
                    e.add_scaled(&mv.expr(&m.add(hm))?, coef);
                }
                b.add_zero(&e);
            }
        }
        vars.push(mv);
    }
    for row in moment_rows(problem, &layout, 2 * d) {
        let mut e = LinExpr::constant(-row.rhs);
        for t in &row.terms {
            e.add_scaled(&vars[t.measure].expr(&t.index)?, t.coeff);
        }
        b.add_zero(&e);
    }
    Ok(MomentProgram {
        sdp: b.finish(),
        layout,
        vars,
        d,
        box_split,
    })
}

/// Moment relaxation of the `(t, x, u)` occupation-measure program.
pub fn build_connect_full(problem: &ProblemInstance, d: usize) -> Result<MomentProgram> {
    build(problem, d, false)
}

/// Moment relaxation with the box controls split into `σᵢ±` and `σ̂ᵢ`.
pub fn build_connect_box(problem: &ProblemInstance, d: usize) -> Result<MomentProgram> {
    build(problem, d, true)
}

/// The moment truncation whose relaxation is the exact dual partner of a
/// barrier program of order `k`.
pub fn matched_truncation(problem: &ProblemInstance, k: usize) -> usize {
    let set_deg = problem.max_constraint_degree().max(2);
    k + half_ceil(set_deg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub label: String,
    pub kind: MeasureKind,
    pub component: usize,
    pub mass: f64,
    /// `⟨v, μ⟩` for each variable `v` of the measure's space, in order.
    pub first_moments: Vec<f64>,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub problem_name: String,
    pub box_split: bool,
    pub d: usize,
    pub status: SdpStatus,
    pub measures: Vec<MeasureSummary>,
    pub max_row_violation: Option<f64>,
}

impl MomentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn mass_of(&self, kind: MeasureKind) -> f64 {
        self.measures
            .iter()
            .filter(|m| m.kind == kind)
            .map(|m| m.mass)
            .sum()
    }

    pub fn initial_mass(&self) -> f64 {
        self.mass_of(MeasureKind::Initial)
    }

    pub fn terminal_mass(&self) -> f64 {
        self.mass_of(MeasureKind::Terminal)
    }

    pub fn occupation_mass(&self) -> f64 {
        self.mass_of(MeasureKind::Occupation)
    }
}

impl MomentProgram {
    /// The moment vectors held by a solution.
    pub fn moments(&self, sol: &SdpSolution) -> Vec<MomentVector> {
        self.layout
            .iter()
            .zip(&self.vars)
            .map(|(spec, mv)| {
                let mut y = MomentVector::new(spec.label.clone(), &spec.space);
                for m in MonomialBasis::new(&spec.space, mv.max_degree).monomials() {
                    if let Some(v) = mv.value(m, &sol.blocks) {
                        y.values.insert(m.clone(), v);
                    }
                }
                y
            })
            .collect()
    }

    pub fn report(&self, problem: &ProblemInstance, sol: &SdpSolution) -> Result<MomentReport> {
        let have = sol.blocks.len() == self.sdp.blocks.len();
        let mut measures = Vec::new();
        let mut worst = None;
        if have {
            let ys = self.moments(sol);
            for ((spec, mv), y) in self.layout.iter().zip(&self.vars).zip(&ys) {
                let first = (0..spec.space.len())
                    .map(|p| y.get(&MultiIndex::unit(spec.space.len(), p)))
                    .collect::<Result<Vec<_>>>()?;
                measures.push(MeasureSummary {
                    label: spec.label.clone(),
                    kind: spec.kind,
                    component: spec.component,
                    mass: y.mass()?,
                    first_moments: first,
                    min_eigenvalue: min_eigenvalue(&sol.blocks[mv.block]),
                });
            }
            let mut w: f64 = 0.0;
            for row in moment_rows(problem, &self.layout, 2 * self.d) {
                w = w.max(row.violation(&ys)?.abs());
            }
            worst = Some(w);
        }
        Ok(MomentReport {
            problem_name: problem.name.clone(),
            box_split: self.box_split,
            d: self.d,
            status: sol.status,
            measures,
            max_row_violation: worst,
        })
    }
}
