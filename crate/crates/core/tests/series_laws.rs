use diffeo_conj::dynamics::{comp_square_root, is_involutive, koenigs_linearize, square_deviation};
use diffeo_conj::{Rational, Series};
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-9i64..=9, 1i64..=9).prop_map(|(n, d)| Rational::new(n, d))
}

fn nonzero() -> impl Strategy<Value = Rational> {
    rational().prop_filter("nonzero", |r| r.signum() != 0)
}

fn series_with(order: usize, head: impl Strategy<Value = Rational>) -> impl Strategy<Value = Series> {
    (head, prop::collection::vec(rational(), order - 1)).prop_map(|(m, mut rest)| {
        rest.insert(0, m);
        Series::new(rest).unwrap()
    })
}

fn invertible(order: usize) -> impl Strategy<Value = Series> {
    series_with(order, nonzero())
}

fn triple(order: usize) -> impl Strategy<Value = (Series, Series, Series)> {
    (invertible(order), invertible(order), invertible(order))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_associative((a, b, c) in triple(7)) {
        prop_assert_eq!(a.compose(&b)?.compose(&c)?, a.compose(&b.compose(&c)?)?);
    }

    #[test]
    fn identity_is_two_sided(a in invertible(8)) {
        let x = Series::identity(8);
        prop_assert_eq!(a.compose(&x)?, a.clone());
        prop_assert_eq!(x.compose(&a)?, a);
    }

    #[test]
    fn inverse_is_two_sided(a in invertible(8)) {
        let inv = a.comp_inverse()?;
        let x = Series::identity(8);
        prop_assert_eq!(a.compose(&inv)?, x.clone());
        prop_assert_eq!(inv.compose(&a)?, x);
    }

    #[test]
    fn conjugation_is_a_right_action((s, w1, w2) in triple(6)) {
        let lhs = s.conjugate(&w1)?.conjugate(&w2)?;
        let rhs = s.conjugate(&w1.compose(&w2)?)?;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn multiplier_is_multiplicative_and_conjugation_invariant((a, b, w) in triple(6)) {
        prop_assert_eq!(a.compose(&b)?.multiplier().clone(), a.multiplier() * b.multiplier());
        prop_assert_eq!(a.conjugate(&w)?.multiplier().clone(), a.multiplier().clone());
    }

    #[test]
    fn powers_add(a in invertible(5), j in -3i64..=3, k in -3i64..=3) {
        let lhs = a.comp_power(j + k)?;
        let rhs = a.comp_power(j)?.compose(&a.comp_power(k)?)?;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn truncation_commutes_with_operations((a, b, w) in triple(8), m in 1usize..=8) {
        let (ta, tb, tw) = (a.truncate(m), b.truncate(m), w.truncate(m));
        prop_assert_eq!(a.compose(&b)?.truncate(m), ta.compose(&tb)?);
        prop_assert_eq!(a.comp_inverse()?.truncate(m), ta.comp_inverse()?);
        prop_assert_eq!(a.conjugate(&w)?.truncate(m), ta.conjugate(&tw)?);
        prop_assert_eq!(a.comp_power(-2)?.truncate(m), ta.comp_power(-2)?);
    }

    #[test]
    fn square_deviation_is_odd(s in series_with(10, Just(Rational::from_int(-1)))) {
        if let Some(d) = square_deviation(&s)? {
            prop_assert_eq!(d % 2, 1, "square of {} has deviation {}", s, d);
        }
    }

    #[test]
    fn square_roots_contain_the_root(g in series_with(6, prop::sample::select(vec![
        Rational::from_int(-1), Rational::from_int(2), Rational::new(-1, 3), Rational::from_int(1),
    ]))) {
        let fam = comp_square_root(&g.comp_power_nonneg(2), g.multiplier())?;
        prop_assert!(fam.contains(&g), "{} not in {}", g, fam);
        let w = fam.witness().unwrap();
        prop_assert_eq!(w.comp_power_nonneg(2), g.comp_power_nonneg(2));
    }

    #[test]
    fn involutions_conjugate_to_minus_x(w in invertible(8)) {
        let tau = Series::linear(Rational::from_int(-1), 8).conjugate(&w)?;
        prop_assert!(is_involutive(&tau));
        let psi = Series::identity(8).sub(&tau)?.scale(&Rational::new(1, 2));
        prop_assert_eq!(psi.compose(&tau)?, psi.neg());
    }

    #[test]
    fn koenigs_linearizes(s in series_with(8, prop::sample::select(vec![
        Rational::from_int(2), Rational::from_int(-3), Rational::new(1, 2), Rational::new(-2, 3),
    ]))) {
        let w = koenigs_linearize(&s)?;
        prop_assert_eq!(w.multiplier().clone(), Rational::from_int(1));
        prop_assert_eq!(s.conjugate(&w)?, Series::linear(s.multiplier().clone(), 8));
    }

    #[test]
    fn literals_round_trip(a in invertible(8)) {
        let text = a.to_string();
        prop_assert_eq!(text.parse::<Series>()?, a);
    }
}
