//! Upper bounds on the time needed to connect two points of a component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundMethod {
    KurdykaDegree,
    BoxUnionDiagonals,
    UserSupplied,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonBound {
    /// `None` when no finite bound is known.
    pub value: Option<f64>,
    pub method: BoundMethod,
    pub label: String,
    pub inputs: serde_json::Value,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) by the Lanczos approximation, with reflection below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// `4·Γ(1/2)·Γ((n+2)/2)/Γ((n+1)/2) · d(4d−5)ⁿ⁻¹`, a bound on geodesic
/// distances inside a real algebraic variety of degree `d` in `ℝⁿ`.
pub fn kurdyka_time_bound(n: usize, deg: usize) -> Result<f64> {
    if n < 2 || deg < 2 {
        return Err(Error::InvalidArgument(format!(
            "degree bound needs n >= 2 and deg >= 2, got n={n}, deg={deg}"
        )));
    }
    let nf = n as f64;
    let d = deg as f64;
    let c = 4.0 * gamma(0.5) * gamma((nf + 2.0) / 2.0) / gamma((nf + 1.0) / 2.0);
    Ok(c * d * (4.0 * d - 5.0).powi(n as i32 - 1))
}

/// Sum of the diagonals of 2-D boxes `[(a₁, a₂), (b₁, b₂)]`.
pub fn box_union_time_bound(boxes: &[[(f64, f64); 2]]) -> Result<f64> {
    if boxes.is_empty() {
        return Err(Error::InvalidArgument("no boxes given".into()));
    }
    let mut total = 0.0;
    for b in boxes {
        for &(lo, hi) in b {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::InvalidArgument(format!("degenerate side [{lo}, {hi}]")));
            }
        }
        total += (b[0].1 - b[0].0).hypot(b[1].1 - b[1].0);
    }
    Ok(total)
}

impl HorizonBound {
    pub fn kurdyka(n: usize, deg: usize) -> Result<Self> {
        Ok(HorizonBound {
            value: Some(kurdyka_time_bound(n, deg)?),
            method: BoundMethod::KurdykaDegree,
            label: "lifted-variety bound".into(),
            inputs: serde_json::json!({ "n": n, "deg": deg }),
        })
    }

    pub fn box_union(boxes: &[[(f64, f64); 2]]) -> Result<Self> {
        Ok(HorizonBound {
            value: Some(box_union_time_bound(boxes)?),
            method: BoundMethod::BoxUnionDiagonals,
            label: "box-union diagonal sum".into(),
            inputs: serde_json::json!({ "boxes": boxes }),
        })
    }

    pub fn user(t: f64) -> Result<Self> {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::InvalidArgument(format!("T must be positive, got {t}")));
        }
        Ok(HorizonBound {
            value: (t.is_finite()).then_some(t),
            method: BoundMethod::UserSupplied,
            label: "user supplied".into(),
            inputs: serde_json::json!({ "T": t }),
        })
    }
}
