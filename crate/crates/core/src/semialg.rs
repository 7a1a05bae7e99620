//! Semialgebraic sets, unions of them, and the JSON problem document.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poly::{Polynomial, Space, Var};

/// Tolerance used when checking that sampled points are members.
pub const SAMPLE_TOL: f64 = 1e-9;

/// Rejection-sampling budget per returned point.
pub const MAX_DRAWS_PER_POINT: usize = 1_000_000;

/// `{x : g(x) ≥ 0 ∀g, h(x) = 0 ∀h} ∩ box`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicSet {
    space: Space,
    pub ineqs: Vec<Polynomial>,
    pub eqs: Vec<Polynomial>,
    pub bounding_box: Vec<(f64, f64)>,
}

impl BasicSet {
    pub fn new(
        n: usize,
        ineqs: Vec<Polynomial>,
        eqs: Vec<Polynomial>,
        bounding_box: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let space = Space::state(n);
        if bounding_box.len() != n {
            return Err(Error::InvalidProblem(format!(
                "box has {} intervals for dimension {n}",
                bounding_box.len()
            )));
        }
        for (i, &(lo, hi)) in bounding_box.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidProblem(format!("box interval {i} is not finite")));
            }
            if lo > hi {
                return Err(Error::InvalidProblem(format!("box interval {i} has lo > hi")));
            }
        }
        for p in ineqs.iter().chain(&eqs) {
            if p.space() != &space {
                return Err(Error::SpaceMismatch(format!(
                    "set constraint lives in {} instead of {space}",
                    p.space()
                )));
            }
        }
        Ok(BasicSet {
            space,
            ineqs,
            eqs,
            bounding_box,
        })
    }

    /// A box with no further constraints.
    pub fn boxed(bounding_box: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(bounding_box.len(), Vec::new(), Vec::new(), bounding_box)
    }

    /// The singleton `{c}`, encoded by equalities `xᵢ − cᵢ = 0`.
    pub fn point(c: &[f64]) -> Result<Self> {
        let space = Space::state(c.len());
        let eqs = c
            .iter()
            .enumerate()
            .map(|(i, &ci)| {
                let xi = Polynomial::var(&space, Var::X(i as u16)).unwrap();
                &xi - &Polynomial::constant(&space, ci)
            })
            .collect();
        Self::new(c.len(), Vec::new(), eqs, c.iter().map(|&ci| (ci, ci)).collect())
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// `(xᵢ − lo)(hi − xᵢ) ≥ 0` for every coordinate.
    pub fn box_constraints(&self) -> Vec<Polynomial> {
        self.bounding_box
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| {
                let xi = Polynomial::var(&self.space, Var::X(i as u16)).unwrap();
                let a = &xi - &Polynomial::constant(&self.space, lo);
                let b = &Polynomial::constant(&self.space, hi) - &xi;
                &a * &b
            })
            .collect()
    }

    /// Explicit inequalities followed by the box inequalities.
    pub fn all_ineqs(&self) -> Vec<Polynomial> {
        let mut out = self.ineqs.clone();
        out.extend(self.box_constraints());
        out
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: point.len(),
            });
        }
        for (&x, &(lo, hi)) in point.iter().zip(&self.bounding_box) {
            if x < lo - tol || x > hi + tol {
                return Ok(false);
            }
        }
        for g in &self.ineqs {
            if g.evaluate(point)? < -tol {
                return Ok(false);
            }
        }
        for h in &self.eqs {
            if h.evaluate(point)?.abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The point when every coordinate is pinned by an affine single-variable
    /// equality or a degenerate box interval.
    pub fn pinned_point(&self) -> Option<Vec<f64>> {
        let n = self.dim();
        let mut out: Vec<Option<f64>> = self
            .bounding_box
            .iter()
            .map(|&(lo, hi)| (lo == hi).then_some(lo))
            .collect();
        for h in &self.eqs {
            if h.degree() != 1 {
                continue;
            }
            let mut var = None;
            let mut slope = 0.0;
            let mut offset = 0.0;
            let mut single = true;
            for (m, c) in h.terms() {
                if m.degree() == 0 {
                    offset = c;
                    continue;
                }
                let pos = m.exps().iter().position(|&e| e == 1).unwrap();
                if var.is_some_and(|v| v != pos) {
                    single = false;
                }
                var = Some(pos);
                slope = c;
            }
            if let (true, Some(pos)) = (single, var) {
                out[pos] = Some(-offset / slope);
            }
        }
        let pt: Option<Vec<f64>> = out.into_iter().collect();
        pt.filter(|p| p.len() == n && self.contains(p, SAMPLE_TOL).unwrap_or(false))
    }

    pub fn max_constraint_degree(&self) -> usize {
        self.all_ineqs()
            .iter()
            .chain(&self.eqs)
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0)
    }
}

/// Nonempty union of basic sets in one state space.
#[derive(Clone, Debug, PartialEq)]
pub struct SetUnion {
    components: Vec<BasicSet>,
}

impl SetUnion {
    pub fn new(components: Vec<BasicSet>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidProblem("empty union".into()))?;
        let n = first.dim();
        if let Some(bad) = components.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        Ok(SetUnion { components })
    }

    pub fn single(set: BasicSet) -> Self {
        SetUnion {
            components: vec![set],
        }
    }

    pub fn components(&self) -> &[BasicSet] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Smallest box containing every component box.
    pub fn hull(&self) -> Vec<(f64, f64)> {
        let mut out = self.components[0].bounding_box.clone();
        for c in &self.components[1..] {
            for (o, &(lo, hi)) in out.iter_mut().zip(&c.bounding_box) {
                o.0 = o.0.min(lo);
                o.1 = o.1.max(hi);
            }
        }
        out
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        for c in &self.components {
            if c.contains(point, tol)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Membership with tolerance `tol` (see [`BasicSet::contains`]).
pub fn membership(set: &SetUnion, point: &[f64], tol: f64) -> Result<bool> {
    set.contains(point, tol)
}

/// Seeded rejection sampling; every returned point is a member at
/// [`SAMPLE_TOL`]. Pinned components contribute their point.
pub fn sample_set(set: &SetUnion, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(set, count, &mut rng)
}

pub(crate) fn sample_with<R: Rng>(set: &SetUnion, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let pinned: Vec<Option<Vec<f64>>> = set.components.iter().map(BasicSet::pinned_point).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut found = None;
        for _ in 0..MAX_DRAWS_PER_POINT {
            let k = rng.gen_range(0..set.components.len());
            if let Some(p) = &pinned[k] {
                found = Some(p.clone());
                break;
            }
            let comp = &set.components[k];
            let cand: Vec<f64> = comp
                .bounding_box
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
                .collect();
            if comp.contains(&cand, SAMPLE_TOL)? {
                found = Some(cand);
                break;
            }
        }
        match found {
            Some(p) => out.push(p),
            None => {
                return Err(Error::Sampling(format!(
                    "no member found in {MAX_DRAWS_PER_POINT} draws; the set may have measure zero or be empty"
                )))
            }
        }
    }
    Ok(out)
}

/// Admissible control set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlSet {
    /// `[-1, 1]^n`
    Box,
    /// `{‖u‖₂ ≤ 1}`
    Ball,
}

impl ControlSet {
    /// `U` as a basic set over `(u1..un)` mapped into the state space index
    /// layout: `1 − uᵢ² ≥ 0` for every coordinate, plus `1 − Σuᵢ² ≥ 0` for the
    /// ball.
    pub fn constraints(&self, space: &Space, n: usize) -> Vec<Polynomial> {
        let one = Polynomial::constant(space, 1.0);
        let mut out: Vec<Polynomial> = (0..n)
            .map(|i| {
                let u = Polynomial::var(space, Var::U(i as u16)).unwrap();
                &one - &(&u * &u)
            })
            .collect();
        if *self == ControlSet::Ball {
            let mut s = one.clone();
            for i in 0..n {
                let u = Polynomial::var(space, Var::U(i as u16)).unwrap();
                s = &s - &(&u * &u);
            }
            out.push(s);
        }
        out
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            ControlSet::Box => u.iter().all(|x| x.abs() <= 1.0),
            ControlSet::Ball => u.iter().map(|x| x * x).sum::<f64>() <= 1.0,
        }
    }
}

/// A complete disconnectedness question: are `X0` and `X1` linked inside `X`
/// within time `T` under `ẋ = u, u ∈ U`?
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub n: usize,
    pub x: SetUnion,
    pub x0: SetUnion,
    pub x1: SetUnion,
    pub horizon: f64,
    pub control: ControlSet,
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        x: SetUnion,
        x0: SetUnion,
        x1: SetUnion,
        horizon: f64,
        control: ControlSet,
    ) -> Result<Self> {
        let n = x.dim();
        for (label, s) in [("X0", &x0), ("X1", &x1)] {
            if s.dim() != n {
                return Err(Error::InvalidProblem(format!(
                    "{label} has dimension {} but X has {n}",
                    s.dim()
                )));
            }
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidProblem(format!("T must be positive, got {horizon}")));
        }
        let hull = x.hull();
        for (label, s) in [("X0", &x0), ("X1", &x1)] {
            for c in s.components() {
                let inside = c
                    .bounding_box
                    .iter()
                    .zip(&hull)
                    .all(|(&(lo, hi), &(hlo, hhi))| lo >= hlo - 1e-12 && hi <= hhi + 1e-12);
                if !inside {
                    return Err(Error::InvalidProblem(format!(
                        "{label} component box is not inside the bounding box of X"
                    )));
                }
            }
        }
        Ok(ProblemInstance {
            name: name.into(),
            n,
            x,
            x0,
            x1,
            horizon,
            control,
        })
    }

    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument {
            name: self.name.clone(),
            n: self.n,
            horizon: self.horizon,
            control: self.control,
            x: SetDocument::from_union(&self.x),
            x0: SetDocument::from_union(&self.x0),
            x1: SetDocument::from_union(&self.x1),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("problem serializes")
    }

    /// SHA-256 of the compact canonical document.
    pub fn fingerprint(&self) -> String {
        let canon = serde_json::to_string(&self.to_document()).expect("problem serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    /// Largest degree among every inequality and equality of every set.
    pub fn max_constraint_degree(&self) -> usize {
        [&self.x, &self.x0, &self.x1]
            .iter()
            .flat_map(|u| u.components())
            .map(BasicSet::max_constraint_degree)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDocument {
    pub exps: Vec<u32>,
    pub coef: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyDocument {
    pub terms: Vec<TermDocument>,
}

impl PolyDocument {
    pub fn from_poly(p: &Polynomial) -> Self {
        PolyDocument {
            terms: p
                .terms()
                .map(|(m, c)| TermDocument {
                    exps: m.exps().to_vec(),
                    coef: c,
                })
                .collect(),
        }
    }

    pub fn to_poly(&self, space: &Space) -> Result<Polynomial> {
        for t in &self.terms {
            if !t.coef.is_finite() {
                return Err(Error::InvalidProblem("non-finite coefficient".into()));
            }
            if t.exps.len() != space.len() {
                return Err(Error::InvalidProblem(format!(
                    "term has {} exponents, expected {} for space {space}",
                    t.exps.len(),
                    space.len()
                )));
            }
        }
        Polynomial::from_terms(space, self.terms.iter().map(|t| (t.exps.clone(), t.coef)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDocument {
    #[serde(default)]
    pub ineqs: Vec<PolyDocument>,
    #[serde(default)]
    pub eqs: Vec<PolyDocument>,
    #[serde(rename = "box")]
    pub bounding_box: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetDocument {
    pub components: Vec<ComponentDocument>,
}

impl SetDocument {
    pub fn from_union(u: &SetUnion) -> Self {
        SetDocument {
            components: u
                .components()
                .iter()
                .map(|c| ComponentDocument {
                    ineqs: c.ineqs.iter().map(PolyDocument::from_poly).collect(),
                    eqs: c.eqs.iter().map(PolyDocument::from_poly).collect(),
                    bounding_box: c.bounding_box.iter().map(|&(a, b)| [a, b]).collect(),
                })
                .collect(),
        }
    }

    pub fn to_union(&self, n: usize, label: &str) -> Result<SetUnion> {
        if self.components.is_empty() {
            return Err(Error::InvalidProblem(format!("{label}: empty union")));
        }
        let space = Space::state(n);
        let comps = self
            .components
            .iter()
            .map(|c| {
                let ineqs = c.ineqs.iter().map(|p| p.to_poly(&space)).collect::<Result<_>>()?;
                let eqs = c.eqs.iter().map(|p| p.to_poly(&space)).collect::<Result<_>>()?;
                let bx = c.bounding_box.iter().map(|&[a, b]| (a, b)).collect();
                BasicSet::new(n, ineqs, eqs, bx)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidProblem(format!("{label}: {e}")))?;
        SetUnion::new(comps)
    }
}

/// Serialized form of a [`ProblemInstance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub name: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub control: ControlSet,
    #[serde(rename = "X")]
    pub x: SetDocument,
    #[serde(rename = "X0")]
    pub x0: SetDocument,
    #[serde(rename = "X1")]
    pub x1: SetDocument,
}

impl ProblemDocument {
    pub fn into_instance(self) -> Result<ProblemInstance> {
        if self.n == 0 {
            return Err(Error::InvalidProblem("n must be at least 1".into()));
        }
        let x = self.x.to_union(self.n, "X")?;
        let x0 = self.x0.to_union(self.n, "X0")?;
        let x1 = self.x1.to_union(self.n, "X1")?;
        ProblemInstance::new(self.name, x, x0, x1, self.horizon, self.control)
    }
}

/// Parses and validates a JSON problem document.
pub fn parse_problem(text: &str) -> Result<ProblemInstance> {
    let doc: ProblemDocument =
        serde_json::from_str(text).map_err(|e| Error::InvalidProblem(e.to_string()))?;
    doc.into_instance()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(lo: f64, hi: f64) -> BasicSet {
        let s = Space::state(1);
        let g = Polynomial::parse(&s, &format!("-1 * x1^2 + {} * x1 - {}", lo + hi, lo * hi)).unwrap();
        BasicSet::new(1, vec![g], vec![], vec![(lo, hi)]).unwrap()
    }

    fn univariate() -> ProblemInstance {
        let x = SetUnion::new(vec![interval(0.0, 0.4), interval(0.8, 1.0)]).unwrap();
        let x0 = SetUnion::single(BasicSet::point(&[0.2]).unwrap());
        let x1 = SetUnion::single(BasicSet::point(&[0.9]).unwrap());
        ProblemInstance::new("univariate", x, x0, x1, 1.0, ControlSet::Box).unwrap()
    }

    #[test]
    fn union_membership() {
        let p = univariate();
        assert!(membership(&p.x, &[0.2], 0.0).unwrap());
        assert!(!membership(&p.x, &[0.6], 0.0).unwrap());
        assert!(membership(&p.x, &[0.6], 1e9).unwrap());
        assert!(membership(&p.x, &[0.6, 0.1], 0.0).is_err());
    }

    #[test]
    fn document_round_trip() {
        let p = univariate();
        let text = p.to_json();
        let q = parse_problem(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.to_json(), text);
        assert_eq!(p.fingerprint(), q.fingerprint());
        assert_eq!(q.x.components().len(), 2);
    }

    #[test]
    fn rejects_nonpositive_horizon() {
        let mut doc = univariate().to_document();
        doc.horizon = 0.0;
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(parse_problem(&text), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn rejects_empty_union_and_bad_dims() {
        let mut doc = univariate().to_document();
        doc.x1.components.clear();
        assert!(doc.clone().into_instance().is_err());
        let mut doc = univariate().to_document();
        doc.x.components[0].ineqs[0].terms[0].exps = vec![1, 1];
        assert!(doc.into_instance().is_err());
        assert!(parse_problem("{\"name\": 3}").is_err());
        assert!(parse_problem(&univariate().to_json().replace("\"T\": 1.0", "\"T\": NaN")).is_err());
    }

    #[test]
    fn pinned_points_sample_to_themselves() {
        let p = univariate();
        let pts = sample_set(&p.x0, 3, 1).unwrap();
        assert_eq!(pts, vec![vec![0.2]; 3]);
    }

    #[test]
    fn unit_interval_samples_are_members() {
        let s = SetUnion::single(interval(0.0, 1.0));
        let pts = sample_set(&s, 100, 7).unwrap();
        assert_eq!(pts.len(), 100);
        for p in &pts {
            assert!(membership(&s, p, SAMPLE_TOL).unwrap());
        }
        assert_eq!(pts, sample_set(&s, 100, 7).unwrap());
    }

    #[test]
    fn empty_set_exhausts_budget() {
        let s = Space::state(1);
        let g = Polynomial::parse(&s, "-1 - x1^2").unwrap();
        let set = SetUnion::single(BasicSet::new(1, vec![g], vec![], vec![(-1.0, 1.0)]).unwrap());
        assert!(matches!(sample_set(&set, 1, 0), Err(Error::Sampling(_))));
    }

    #[test]
    fn box_constraint_materialization() {
        let b = BasicSet::boxed(vec![(-1.0, 2.0)]).unwrap();
        let g = &b.box_constraints()[0];
        assert_eq!(g.evaluate(&[-1.0]).unwrap(), 0.0);
        assert_eq!(g.evaluate(&[2.0]).unwrap(), 0.0);
        assert!(g.evaluate(&[0.5]).unwrap() > 0.0);
    }

    #[test]
    fn ball_control_constraints() {
        let s = Space::time_state_control(2);
        let cons = ControlSet::Ball.constraints(&s, 2);
        assert_eq!(cons.len(), 3);
        assert!(cons[2].evaluate(&[0.0, 0.0, 0.0, 0.8, 0.8]).unwrap() < 0.0);
    }
}
