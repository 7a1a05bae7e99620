//! Barrier certificates and their JSON form.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{MonomialBasis, Polynomial, Space};
use crate::sdp::SolverMeta;
use crate::semialg::ControlSet;

/// Which barrier condition a weighted-SOS constraint encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `v(0, x) − 1 − λ` on an X0 component.
    Initial { component: usize },
    /// `−v(T, x) − λ` on an X1 component.
    Terminal { component: usize },
    /// `∂ₜv + u·∇ₓv − λ` on `[0,T] × Xʲ × U`.
    Lie { component: usize },
    /// `∂ₜv − Σᵢ(ζᵢ⁺ + ζᵢ⁻) − λ` on `[0,T] × Xʲ`.
    LieBox { component: usize },
    /// `ζᵢ^±` on `[0,T] × Xʲ`.
    Zeta {
        component: usize,
        coord: usize,
        positive: bool,
    },
    /// A constraint assembled outside the barrier builders.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuilderPath {
    /// Controls kept as variables, `(t, x, u)` Lie constraint.
    Full,
    /// Controls eliminated through `ζ±`.
    Box,
}

mod gram_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("Gram matrix must be square"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

/// `multiplier · zᵀ Q z` with `z` the monomials of degree ≤ `degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramTerm {
    pub multiplier: Polynomial,
    pub degree: usize,
    #[serde(with = "gram_serde")]
    pub gram: DMatrix<f64>,
}

/// `μ · h` with `μ` free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqTerm {
    pub h: Polynomial,
    pub mu: Polynomial,
}

/// One Putinar decomposition `target = Σ gᵢ zᵀQᵢz + Σ μⱼhⱼ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertConstraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub order: usize,
    pub target: Polynomial,
    pub sos: Vec<GramTerm>,
    pub eqs: Vec<EqTerm>,
    /// `‖target − decomposition‖∞` after PSD projection of the Grams.
    pub residual: f64,
    pub min_eigenvalue: f64,
}

impl CertConstraint {
    pub fn space(&self) -> &Space {
        self.target.space()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaPair {
    pub coord: usize,
    pub plus: Polynomial,
    pub minus: Polynomial,
}

/// A time-dependent barrier `v(t, x)` with everything needed to re-check it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierCertificate {
    pub problem_name: String,
    pub fingerprint: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub control: ControlSet,
    pub path: BuilderPath,
    /// `v` has degree `2·order`.
    pub order: usize,
    pub v: Polynomial,
    #[serde(default)]
    pub zetas: Vec<ZetaPair>,
    pub margin: f64,
    pub constraints: Vec<CertConstraint>,
    pub sdp_residual: f64,
    pub solver: SolverMeta,
}

impl BarrierCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: BarrierCertificate = serde_json::from_str(text)?;
        if c.v.space() != &Space::time_state(c.n) {
            return Err(Error::MissingData(format!(
                "v must live in (t, x1..x{}), found {}",
                c.n,
                c.v.space()
            )));
        }
        Ok(c)
    }

    pub fn max_residual(&self) -> f64 {
        self.constraints.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

/// `multiplier · zᵀ Q z` expanded in `space`.
pub fn gram_polynomial(
    space: &Space,
    degree: usize,
    multiplier: &Polynomial,
    q: &DMatrix<f64>,
) -> Polynomial {
    let basis = MonomialBasis::new(space, degree);
    let mut terms = Vec::new();
    for a in 0..basis.len() {
        for b in a..basis.len() {
            let w = if a == b { q[(a, a)] } else { q[(a, b)] + q[(b, a)] };
            if w == 0.0 {
                continue;
            }
            terms.push((basis.get(a).add(basis.get(b)).exps().to_vec(), w));
        }
    }
    let sigma = Polynomial::from_terms(space, terms).expect("basis lives in space");
    &sigma * multiplier
}
