//! Polynomials whose coefficients are affine expressions in SDP unknowns.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::poly::{MonomialBasis, MultiIndex, Polynomial, Space, Var};
use crate::sdp::{LinExpr, Scalar, SdpBuilder};

#[derive(Clone, Debug, PartialEq)]
pub struct LinPoly {
    space: Space,
    terms: BTreeMap<MultiIndex, LinExpr>,
}

impl LinPoly {
    pub fn zero(space: &Space) -> Self {
        LinPoly {
            space: space.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        LinPoly {
            space: p.space().clone(),
            terms: p.terms().map(|(m, c)| (m.clone(), LinExpr::constant(c))).collect(),
        }
    }

    /// A polynomial with one fresh free coefficient per monomial of degree ≤ `degree`.
    pub fn unknown(
        builder: &mut SdpBuilder,
        space: &Space,
        degree: usize,
        label: &str,
    ) -> (Self, Vec<(MultiIndex, usize)>) {
        let basis = MonomialBasis::new(space, degree);
        let mut vars = Vec::with_capacity(basis.len());
        let mut terms = BTreeMap::new();
        for m in basis.monomials() {
            let f = builder.add_free(format!("{label}{:?}", m.exps()));
            vars.push((m.clone(), f));
            terms.insert(m.clone(), LinExpr::scalar(Scalar::Free(f)));
        }
        (
            LinPoly {
                space: space.clone(),
                terms,
            },
            vars,
        )
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &LinExpr)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, e)| !e.is_zero())
            .map(|(m, _)| m.degree())
            .max()
            .unwrap_or(0)
    }

    fn add_expr(&mut self, m: MultiIndex, e: &LinExpr, scale: f64) {
        self.terms
            .entry(m)
            .or_default()
            .add_scaled(e, scale);
    }

    pub fn add(&self, other: &LinPoly) -> Result<LinPoly> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &LinPoly) -> Result<LinPoly> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &LinPoly, s: f64) -> Result<LinPoly> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!("{} vs {}", self.space, other.space)));
        }
        let mut out = self.clone();
        for (m, e) in &other.terms {
            out.add_expr(m.clone(), e, s);
        }
        Ok(out)
    }

    pub fn add_constant(&self, c: f64) -> LinPoly {
        let mut out = self.clone();
        out.add_expr(MultiIndex::zero(self.space.len()), &LinExpr::constant(c), 1.0);
        out
    }

    /// Adds `c · scalar` to the constant coefficient.
    pub fn add_scalar(&self, s: Scalar, c: f64) -> LinPoly {
        let mut out = self.clone();
        out.add_expr(MultiIndex::zero(self.space.len()), &LinExpr::scalar(s), c);
        out
    }

    pub fn differentiate(&self, var: Var) -> Result<LinPoly> {
        let pos = self
            .space
            .position(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        let mut out = LinPoly::zero(&self.space);
        for (m, e) in &self.terms {
            let k = m.exps()[pos];
            if k == 0 {
                continue;
            }
            let mut exps = m.exps().to_vec();
            exps[pos] -= 1;
            out.add_expr(MultiIndex::new(exps), e, k as f64);
        }
        Ok(out)
    }

    pub fn fix(&self, var: Var, value: f64) -> Result<LinPoly> {
        let pos = self
            .space
            .position(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        let mut out = LinPoly::zero(&self.space.without(var));
        for (m, e) in &self.terms {
            let k = m.exps()[pos];
            let factor = if k == 0 { 1.0 } else { value.powi(k as i32) };
            let mut exps = m.exps().to_vec();
            exps.remove(pos);
            out.add_expr(MultiIndex::new(exps), e, factor);
        }
        Ok(out)
    }

    pub fn embed(&self, target: &Space) -> Result<LinPoly> {
        if !self.space.is_subspace_of(target) {
            return Err(Error::SpaceMismatch(format!(
                "cannot embed {} into {target}",
                self.space
            )));
        }
        let map: Vec<usize> = self
            .space
            .vars()
            .iter()
            .map(|&v| target.position(v).unwrap())
            .collect();
        let mut out = LinPoly::zero(target);
        for (m, e) in &self.terms {
            let mut exps = vec![0; target.len()];
            for (i, &p) in map.iter().enumerate() {
                exps[p] = m.exps()[i];
            }
            out.add_expr(MultiIndex::new(exps), e, 1.0);
        }
        Ok(out)
    }

    /// Product with a known polynomial in the same space.
    pub fn mul_poly(&self, p: &Polynomial) -> Result<LinPoly> {
        if &self.space != p.space() {
            return Err(Error::SpaceMismatch(format!("{} vs {}", self.space, p.space())));
        }
        let mut out = LinPoly::zero(&self.space);
        for (m, e) in &self.terms {
            for (mp, c) in p.terms() {
                out.add_expr(m.add(mp), e, c);
            }
        }
        Ok(out)
    }

    /// Substitutes values for the unknowns.
    pub fn evaluate(&self, value: impl Fn(Scalar) -> f64) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|(m, e)| (m.exps().to_vec(), e.eval(&value)));
        Polynomial::from_terms(&self.space, terms).expect("same space")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_then_evaluate() {
        let mut b = SdpBuilder::new();
        let s = Space::time_state(1);
        let (p, vars) = LinPoly::unknown(&mut b, &s, 2, "v");
        assert_eq!(vars.len(), 6);
        let vals: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let v = p.evaluate(|sc| match sc {
            Scalar::Free(k) => vals[k],
            _ => 0.0,
        });
        let dt = p.differentiate(Var::T).unwrap().evaluate(|sc| match sc {
            Scalar::Free(k) => vals[k],
            _ => 0.0,
        });
        assert_eq!(dt, v.differentiate(Var::T).unwrap());
        let at1 = p.fix(Var::T, 2.0).unwrap().evaluate(|sc| match sc {
            Scalar::Free(k) => vals[k],
            _ => 0.0,
        });
        assert_eq!(at1, v.fix(Var::T, 2.0).unwrap());
    }
}
