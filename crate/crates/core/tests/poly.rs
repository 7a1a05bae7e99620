use disconnect::poly::{gram_size, lie_derivative, control_field, MonomialBasis, Polynomial, Space, Var};
use disconnect::semialg::{membership, sample_set, BasicSet, SetUnion};
use proptest::prelude::*;

fn space() -> Space {
    Space::time_state(2)
}

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0u32..3, 3), -4.0f64..4.0), 0..6)
        .prop_map(|terms| Polynomial::from_terms(&space(), terms).unwrap())
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 3)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// `C(n, k)` by Pascal's rule.
fn pascal(n: usize, k: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row[k]
}

#[test]
fn gram_sizes_against_pascal() {
    assert_eq!(gram_size(7, 6), 1716);
    assert_eq!(gram_size(4, 6), 210);
    for n in 0..10 {
        for d in 0..10 {
            assert_eq!(gram_size(n, d), pascal(n + d, d));
            assert_eq!(MonomialBasis::new(&Space::state(n.max(1)), d).len() as u64, gram_size(n.max(1), d));
        }
    }
}

proptest! {
    #[test]
    fn ring_operations_evaluate_pointwise(p in poly(), q in poly(), r in poly(), x in point()) {
        let (a, b, c) = (p.evaluate(&x).unwrap(), q.evaluate(&x).unwrap(), r.evaluate(&x).unwrap());
        prop_assert!(close((&p + &q).evaluate(&x).unwrap(), a + b));
        prop_assert!(close((&p - &q).evaluate(&x).unwrap(), a - b));
        prop_assert!(close((&p * &q).evaluate(&x).unwrap(), a * b));
        prop_assert!(close((&p * &(&q + &r)).evaluate(&x).unwrap(), a * (b + c)));
        prop_assert_eq!(&p * &q, &q * &p);
        prop_assert!((&p - &p).is_zero());
    }

    #[test]
    fn degree_of_product(p in poly(), q in poly()) {
        let pq = &p * &q;
        if !p.is_zero() && !q.is_zero() {
            prop_assert!(pq.degree() <= p.degree() + q.degree());
        }
    }

    #[test]
    fn printing_parses_back(p in poly(), x in point()) {
        let back = Polynomial::parse(&space(), &p.to_string()).unwrap();
        prop_assert!(close(back.evaluate(&x).unwrap(), p.evaluate(&x).unwrap()));
        prop_assert_eq!(back.num_terms(), p.num_terms());
    }

    #[test]
    fn derivative_matches_finite_difference(p in poly(), x in point()) {
        for (k, var) in [Var::T, Var::X(0), Var::X(1)].into_iter().enumerate() {
            let d = p.differentiate(var).unwrap();
            let h = 1e-5;
            let mut lo = x.clone();
            let mut hi = x.clone();
            lo[k] -= h;
            hi[k] += h;
            let fd = (p.evaluate(&hi).unwrap() - p.evaluate(&lo).unwrap()) / (2.0 * h);
            prop_assert!((d.evaluate(&x).unwrap() - fd).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn product_rule(p in poly(), q in poly()) {
        let lhs = (&p * &q).differentiate(Var::X(1)).unwrap();
        let rhs = &(&p.differentiate(Var::X(1)).unwrap() * &q) + &(&p * &q.differentiate(Var::X(1)).unwrap());
        prop_assert!((&lhs - &rhs).max_abs_coeff() < 1e-9);
    }

    #[test]
    fn lie_derivative_along_controls(p in poly(), x in point(), u in prop::collection::vec(-1.0f64..1.0, 2)) {
        let full = Space::time_state_control(2);
        let v = p.embed(&full).unwrap();
        let l = lie_derivative(&v, &control_field(2)).unwrap();
        let at = [x[0], x[1], x[2], u[0], u[1]];
        let want = p.differentiate(Var::T).unwrap().evaluate(&x).unwrap()
            + u[0] * p.differentiate(Var::X(0)).unwrap().evaluate(&x).unwrap()
            + u[1] * p.differentiate(Var::X(1)).unwrap().evaluate(&x).unwrap();
        prop_assert!(close(l.evaluate(&at).unwrap(), want));
    }

    #[test]
    fn disc_membership(x in -1.2f64..1.2, y in -1.2f64..1.2, r in 0.2f64..1.0) {
        let s = Space::state(2);
        let g = Polynomial::parse(&s, &format!("{} - x1^2 - x2^2", r * r)).unwrap();
        let disc = SetUnion::single(BasicSet::new(2, vec![g], vec![], vec![(-r, r), (-r, r)]).unwrap());
        let inside = x * x + y * y <= r * r;
        if ((x * x + y * y).sqrt() - r).abs() > 1e-9 {
            prop_assert_eq!(membership(&disc, &[x, y], 0.0).unwrap(), inside);
        }
    }

    #[test]
    fn samples_are_members(seed in 0u64..500, r in 0.3f64..1.0) {
        let s = Space::state(2);
        let g = Polynomial::parse(&s, &format!("{} - x1^2 - x2^2", r * r)).unwrap();
        let disc = SetUnion::single(BasicSet::new(2, vec![g], vec![], vec![(-r, r), (-r, r)]).unwrap());
        for p in sample_set(&disc, 20, seed).unwrap() {
            prop_assert!(p[0] * p[0] + p[1] * p[1] <= r * r + 1e-9);
        }
    }
}
