use diffeo_conj::diffeo::{compare_jets, normalize_to_origin, t0_jet, JetComparison};
use diffeo_conj::engine::{full_group_decide, reversing_decide, EngineOptions};
use diffeo_conj::verify::{random_expr_fixing_zero, random_odd_conjugator, random_smooth_expr, seeded_rng};
use diffeo_conj::{parse_expression, taylor_jet, CaseTag, DiffeoSpec, Expr, Rational, Real, Series, Status, Topology};
use proptest::prelude::*;

fn zero() -> Rational {
    Rational::from_int(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jets_are_multiplicative_under_composition(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let a = random_expr_fixing_zero(&mut rng, 2);
        let b = random_expr_fixing_zero(&mut rng, 2);
        let n = 6;
        let composed = taylor_jet(&Expr::compose(a.clone(), b.clone()), &zero(), n)?;
        let ja = taylor_jet(&a, &zero(), n)?.to_hp();
        let jb = taylor_jet(&b, &zero(), n)?.to_hp();
        let gap = composed.to_hp().max_abs_diff(&ja.compose(&jb)?)?;
        prop_assert!(gap.to_f64() < 1e-35, "{} o {}: gap {}", a, b, gap.to_decimal(5));
    }

    #[test]
    fn printed_expressions_parse_back(seed in any::<u64>()) {
        let e = random_smooth_expr(&mut seeded_rng(seed), 3);
        let again = parse_expression(&e.to_string())?;
        prop_assert_eq!(again.to_string(), e.to_string());
    }

    #[test]
    fn rational_bodies_have_exact_jets(c1 in -5i64..=5, c3 in 0i64..=5, p in -4i64..=4) {
        let e = parse_expression(&format!("{c1}*x - {c3}*x^3 + x^2/(1 + x^2)"))?;
        let p = Rational::new(p, 2);
        let j = taylor_jet(&e, &p, 3)?;
        prop_assert!(j.is_exact());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn normalization_is_idempotent(shift in -4i64..=4, c in 0i64..=3) {
        let body = format!("{}/2 - x - {c}*(x - {})^3", shift, Rational::new(shift, 4));
        let d = DiffeoSpec::parse_body(-1, &body, 6)?;
        let once = normalize_to_origin(&d)?;
        let twice = normalize_to_origin(&once)?;
        prop_assert_eq!(t0_jet(&once, 6)?, t0_jet(&twice, 6)?);
        prop_assert_eq!(once.body.unwrap().eval(&zero())?, zero());
    }

    #[test]
    fn degree_is_never_crossed(a in 1i64..=4, b in 1i64..=4) {
        let f = DiffeoSpec::parse_body(-1, &format!("-{a}*x - x^3"), 6)?;
        let g = DiffeoSpec::parse_body(1, &format!("{b}*x + x^3"), 6)?;
        let v = full_group_decide(&f, &g, &EngineOptions::default())?;
        prop_assert_eq!(v.status, Status::NotConjugate);
        let v = full_group_decide(&g, &f, &EngineOptions::default())?;
        prop_assert_eq!(v.status, Status::NotConjugate);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    /// g = h^-1 o f o h for random odd increasing h, with the squares matched
    /// through the supplied h1 = h^-1.
    #[test]
    fn conjugates_are_recognized(seed in any::<u64>(), which in 0usize..2) {
        let f_text = ["-x - x^3", "-2*x - x^3"][which];
        let f = DiffeoSpec::parse_body(-1, f_text, 8)?;
        let h = random_odd_conjugator(&mut seeded_rng(seed));
        let g_body = Expr::compose(Expr::inverse(h.clone()), Expr::compose(f.body.clone().unwrap(), h.clone()));
        let g = DiffeoSpec::from_expr(-1, g_body, 8);
        let opts = EngineOptions { h1: Some(Expr::inverse(h.clone())), ..EngineOptions::default() };
        let v = full_group_decide(&f, &g, &opts)?;
        prop_assert_eq!(v.status, Status::Conjugate, "h = {}: {:?}", h, v.notes);
        prop_assert!(v.residual().unwrap().pass);
    }
}

fn jet(coeffs: &[i64]) -> Series {
    Series::new(coeffs.iter().map(|&c| Rational::from_int(c)).collect()).unwrap()
}

fn fixture_pairs() -> Vec<(DiffeoSpec, DiffeoSpec)> {
    let e = |deg, s: &str| DiffeoSpec::parse_body(deg, s, 8).unwrap();
    let j = |c: &[i64], t| DiffeoSpec::from_jet(-1, jet(c)).with_topology(t);
    vec![
        (e(-1, "-x"), e(-1, "1 - x")),
        (e(-1, "-x - x^3"), e(-1, "-x - x^3")),
        (e(-1, "-x"), e(-1, "-2*x")),
        (e(-1, "-x"), e(1, "x + x^3")),
        (e(-1, "3 - x - x^3"), e(-1, "-x - x^3")),
        (e(-1, "-x - x^3"), e(-1, "-x - 2*x^3")),
        (j(&[-1], Topology::Boundary), j(&[-1, 1, -1], Topology::Boundary)),
        (j(&[-1], Topology::Unknown), j(&[-1, 1, -1], Topology::Unknown)),
        (j(&[-1, 0, -1], Topology::Boundary), j(&[-1, 0, -1], Topology::Unknown)),
        (e(-1, "-x").with_topology(Topology::Interior), e(-1, "2 - x").with_topology(Topology::Interior)),
    ]
}

#[test]
fn verdicts_are_reflexive() {
    for (f, _) in fixture_pairs() {
        let v = full_group_decide(&f, &f, &EngineOptions::default()).unwrap();
        assert_eq!(v.status, Status::Conjugate, "{f:?}");
    }
}

#[test]
fn verdicts_are_symmetric() {
    for (f, g) in fixture_pairs() {
        let a = full_group_decide(&f, &g, &EngineOptions::default()).unwrap();
        let b = full_group_decide(&g, &f, &EngineOptions::default()).unwrap();
        assert_eq!(a.status, b.status, "{f:?} vs {g:?}: {:?} / {:?}", a.notes, b.notes);
    }
}

#[test]
fn certificates_are_sound_and_cases_exclusive() {
    for (f, g) in fixture_pairs() {
        let v = full_group_decide(&f, &g, &EngineOptions::default()).unwrap();
        if v.status == Status::Conjugate {
            let cert = v.certificate.as_ref().expect("conjugate verdicts carry a certificate");
            if let (Some(_), Some(_), Some(_)) = (&cert.expr, &f.body, &g.body) {
                assert!(v.residual().expect("checked").pass);
            }
        }
        if f.degree == -1 && g.degree == -1 {
            let (nf, ng) = (normalize_to_origin(&f).unwrap(), normalize_to_origin(&g).unwrap());
            let r = reversing_decide(&nf, &ng, &EngineOptions::default()).unwrap();
            assert!(matches!(
                r.case_tag,
                CaseTag::Case1NoninvolutiveJet
                    | CaseTag::Case2Interior
                    | CaseTag::Case3Boundary
                    | CaseTag::TopologyUnknown
                    | CaseTag::PreconditionFailed
            ));
            if r.case_tag == CaseTag::Case1NoninvolutiveJet && r.status == Status::Conjugate {
                let n = r.order_used;
                let cmp = compare_jets(&t0_jet(&nf, n).unwrap(), &t0_jet(&ng, n).unwrap()).unwrap();
                assert_ne!(cmp, JetComparison::Different);
            }
        }
    }
}
