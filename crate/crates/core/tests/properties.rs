use efg_core::exact_reals::{QuadExt, Sign};
use efg_core::perron::{pe_monomial_divide, pe_reexpress};
use efg_core::ring_state::{rs_monomial_value, rs_validate, Monomial, Parameter, RingState};
use efg_core::value_groups::GroupElement;
use num_rational::BigRational;
use proptest::prelude::*;

const RADICANDS: [u64; 4] = [1, 2, 3, 6];

fn quad() -> impl Strategy<Value = QuadExt> {
    proptest::collection::vec((-12i64..=12, 1i64..=6), 4).prop_map(|cs| {
        cs.iter().zip(RADICANDS).fold(QuadExt::zero(), |acc, (&(p, q), d)| {
            acc + QuadExt::term(BigRational::new(p.into(), q.into()), d).unwrap()
        })
    })
}

fn pair() -> impl Strategy<Value = GroupElement> {
    (quad(), quad()).prop_map(|(a, b)| GroupElement::new(vec![a, b]))
}

fn positive(x: &QuadExt) -> bool {
    x.sign().unwrap() == Sign::Positive
}

/// One level holding `1`, `a + b√2` and `c + d√3`, all positive.
fn state() -> impl Strategy<Value = RingState> {
    (1i64..=9, -9i64..=9, 1i64..=9, -9i64..=9, 1i64..=9)
        .prop_map(|(p, a, b, c, d)| {
            let v2 = QuadExt::from_integer(a) + QuadExt::sqrt(2).unwrap().scale_int(b);
            let v3 = QuadExt::from_integer(c) + QuadExt::sqrt(3).unwrap().scale_int(d);
            (QuadExt::from_integer(p), v2, v3)
        })
        .prop_filter("positive values", |(_, v2, v3)| positive(v2) && positive(v3))
        .prop_map(|(v1, v2, v3)| {
            let params = [v1, v2, v3]
                .into_iter()
                .enumerate()
                .map(|(i, v)| Parameter {
                    name: format!("x{}", i + 1),
                    value: GroupElement::new(vec![v]),
                })
                .collect();
            RingState::new(1, vec![3], vec![params], "x")
        })
}

fn monomial() -> impl Strategy<Value = Monomial> {
    proptest::collection::vec(0i64..=6, 3)
        .prop_map(|es| Monomial::from_exponents([("x1", es[0]), ("x2", es[1]), ("x3", es[2])]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ring_laws(a in quad(), b in quad(), c in quad()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!((&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!((&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &a * &b + &a * &c);
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn display_round_trips(a in quad()) {
        let back: QuadExt = a.to_string().parse().unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.to_string(), a.to_string());
    }

    #[test]
    fn sign_is_consistent(a in quad(), b in quad()) {
        let sa = a.sign().unwrap();
        prop_assert_eq!((-&a).sign().unwrap().as_i8(), -sa.as_i8());
        prop_assert_ne!((&a * &a).sign().unwrap(), Sign::Negative);
        if positive(&a) && positive(&b) {
            prop_assert!(positive(&(&a + &b)));
            prop_assert!(positive(&(&a * &b)));
        }
        prop_assert!((sa.as_i8() as f64) * a.approx_f64() >= 0.0);
    }

    #[test]
    fn order_respects_addition(x in pair(), y in pair(), z in pair()) {
        let before = x.compare(&y).unwrap();
        prop_assert_eq!(x.add(&z).compare(&y.add(&z)).unwrap(), before);
        prop_assert_eq!(y.compare(&x).unwrap(), before.reverse());
    }

    #[test]
    fn division_preserves_values(s in state(), a in monomial(), b in monomial()) {
        prop_assume!(rs_validate(&s).is_valid());
        let (va, vb) = (rs_monomial_value(&s, &a).unwrap(), rs_monomial_value(&s, &b).unwrap());
        let (m1, m2) = if va.compare(&vb).unwrap().is_le() { (a, b) } else { (b, a) };
        let out = pe_monomial_divide(&s, &m1, &m2, 10_000).unwrap();
        prop_assert!(out.witness.is_nonnegative());
        prop_assert_eq!(pe_reexpress(&out.log, &m1).unwrap(), out.m1.clone());
        prop_assert_eq!(pe_reexpress(&out.log, &m2).unwrap(), out.m2.clone());
        prop_assert_eq!(
            rs_monomial_value(&out.state, &out.m1).unwrap(),
            rs_monomial_value(&s, &m1).unwrap()
        );
        prop_assert_eq!(
            rs_monomial_value(&out.state, &out.witness).unwrap(),
            rs_monomial_value(&s, &m2).unwrap().sub(&rs_monomial_value(&s, &m1).unwrap())
        );
    }
}
