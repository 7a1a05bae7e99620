#![allow(dead_code)]

use std::path::PathBuf;

use disconnect::semialg::{parse_problem, ProblemInstance};
use serde_json::{json, Value};

pub fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

pub fn load(name: &str) -> ProblemInstance {
    let path = problems_dir().join(format!("{name}.json"));
    parse_problem(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn unit(n: usize, i: usize) -> Vec<u32> {
    (0..n).map(|k| u32::from(k == i)).collect()
}

/// `{p}` as a component: `xᵢ − pᵢ = 0` with a degenerate box.
pub fn point(p: &[f64]) -> Value {
    let n = p.len();
    let eqs: Vec<Value> = (0..n)
        .map(|i| {
            json!({"terms": [
                {"exps": vec![0u32; n], "coef": -p[i]},
                {"exps": unit(n, i), "coef": 1.0},
            ]})
        })
        .collect();
    let bx: Vec<[f64; 2]> = p.iter().map(|&c| [c, c]).collect();
    json!({"ineqs": [], "eqs": eqs, "box": bx})
}

pub fn boxed(b: &[(f64, f64)]) -> Value {
    let bx: Vec<[f64; 2]> = b.iter().map(|&(lo, hi)| [lo, hi]).collect();
    json!({"ineqs": [], "eqs": [], "box": bx})
}

pub fn instance(name: &str, x: Vec<Value>, a: &[f64], b: &[f64], horizon: f64, control: &str) -> ProblemInstance {
    let doc = json!({
        "name": name,
        "n": a.len(),
        "T": horizon,
        "control": control,
        "X": {"components": x},
        "X0": {"components": [point(a)]},
        "X1": {"components": [point(b)]},
    });
    parse_problem(&doc.to_string()).unwrap()
}
