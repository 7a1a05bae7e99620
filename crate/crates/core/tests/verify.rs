mod common;

use common::{boxed, instance, load};
use disconnect::driver::{contour_csv, contour_grid};
use disconnect::poly::{Polynomial, Space};
use disconnect::sdp::{ClarabelBackend, SolverConfig};
use disconnect::verify::{grid_connectivity_oracle, strict_shift, Connectivity};
use proptest::prelude::*;

#[test]
fn oracle_on_shipped_examples() {
    assert_eq!(grid_connectivity_oracle(&load("two_intervals"), 64).unwrap(), Connectivity::Disconnected);
    assert_eq!(grid_connectivity_oracle(&load("one_interval"), 64).unwrap(), Connectivity::Connected);
    assert_eq!(grid_connectivity_oracle(&load("overlap"), 64).unwrap(), Connectivity::Connected);
    assert_eq!(grid_connectivity_oracle(&load("horizontal_cut"), 256).unwrap(), Connectivity::Disconnected);
}

#[test]
fn oracle_follows_box_chains() {
    let chain = vec![
        boxed(&[(0.0, 0.5), (0.0, 0.3)]),
        boxed(&[(0.4, 0.6), (0.0, 1.0)]),
        boxed(&[(0.5, 1.0), (0.7, 1.0)]),
    ];
    let p = instance("chain", chain.clone(), &[0.1, 0.1], &[0.9, 0.9], 3.0, "box");
    assert_eq!(grid_connectivity_oracle(&p, 64).unwrap(), Connectivity::Connected);
    let broken = vec![chain[0].clone(), chain[2].clone()];
    let q = instance("broken", broken, &[0.1, 0.1], &[0.9, 0.9], 3.0, "box");
    assert_eq!(grid_connectivity_oracle(&q, 64).unwrap(), Connectivity::Disconnected);
}

#[test]
fn oracle_rejects_bad_input() {
    let p = load("two_intervals");
    assert!(grid_connectivity_oracle(&p, 4).is_err());
    let four = instance("four", vec![boxed(&[(0.0, 1.0); 4])], &[0.1; 4], &[0.9; 4], 1.0, "box");
    assert!(grid_connectivity_oracle(&four, 16).is_err());
}

#[test]
fn shift_rejects_nonpositive() {
    let v = Polynomial::constant(&Space::time_state(1), 1.0);
    assert!(strict_shift(&v, 0.0, 1.0).is_err());
    assert!(strict_shift(&v, 0.1, 0.0).is_err());
}

proptest! {
    #[test]
    fn shift_is_strict(
        c in prop::collection::vec(-3.0f64..3.0, 6),
        eps in 1e-4f64..1.0,
        horizon in 0.1f64..5.0,
        s in 0.0f64..1.0,
        x in -2.0f64..2.0,
    ) {
        let space = Space::time_state(1);
        let text = format!(
            "{} + {} * t + {} * x1 + {} * t^2 + {} * t * x1 + {} * x1^2",
            c[0], c[1], c[2], c[3], c[4], c[5]
        );
        let v = Polynomial::parse(&space, &text).unwrap();
        let w = strict_shift(&v, eps, horizon).unwrap();
        let t = s * horizon;
        let drop = v.evaluate(&[t, x]).unwrap() - w.evaluate(&[t, x]).unwrap();
        // Lowered everywhere, by ε at t = 0 and ε/2 at t = T, and rising in t
        // at rate ε/(2T).
        prop_assert!(drop >= eps / 2.0 - 1e-12 && drop <= eps + 1e-12);
        let d0 = v.evaluate(&[0.0, x]).unwrap() - w.evaluate(&[0.0, x]).unwrap();
        let d1 = v.evaluate(&[horizon, x]).unwrap() - w.evaluate(&[horizon, x]).unwrap();
        prop_assert!((d0 - eps).abs() < 1e-12);
        prop_assert!((d1 - eps / 2.0).abs() < 1e-12);
        prop_assert!(((d0 - drop) - eps * s / 2.0).abs() < 1e-12);
    }
}

#[test]
fn contour_tables() {
    let p = load("two_intervals");
    let (_, cert, _) = disconnect::driver::solve_barrier(
        &p,
        3,
        true,
        &ClarabelBackend::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    let cert = cert.unwrap();
    let rows = contour_grid(&cert, &[0.0, 0.5, 1.0], &[(0.0, 1.0)], 11).unwrap();
    assert_eq!(rows.len(), 33);
    for r in &rows {
        assert_eq!(r[2], cert.v.evaluate(&[r[0], r[1]]).unwrap());
    }
    let csv = contour_csv(1, &rows);
    assert!(csv.starts_with("t,x1,v\n"));
    assert_eq!(csv.lines().count(), 34);
    assert!(contour_grid(&cert, &[0.0], &[(0.0, 1.0)], 1).is_err());
    assert!(contour_grid(&cert, &[0.0], &[(0.0, 1.0), (0.0, 1.0)], 5).is_err());
}
