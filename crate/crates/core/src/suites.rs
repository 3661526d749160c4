//! Seeded randomized suites over the series and jet layers. Each suite is a
//! pure function of its seed and case count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::dynamics::{
    comp_square_root, koenigs_linearize, random_invertible, random_nonzero_rational, random_rational, random_reversible, reversible_from, random_series, square_deviation,
};
use crate::error::{Error, Result};
use crate::scalar::Rational;
use crate::verify::{
    brute_force_square_roots, enumerated_free_indices, jet_vs_finite_difference, random_smooth_expr, sample_values,
    seeded_rng,
};
use crate::{Series, DEFAULT_ORDER};

/// Failures kept verbatim in a report; the rest are only counted.
const MAX_LISTED_FAILURES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    LemmaSquare,
    EvenIndex,
    InvolutionNormalization,
    Rigidity,
    Koenigs,
    OracleAgreement,
    JetCrossCheck,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::LemmaSquare,
        Suite::EvenIndex,
        Suite::InvolutionNormalization,
        Suite::Rigidity,
        Suite::Koenigs,
        Suite::OracleAgreement,
        Suite::JetCrossCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::LemmaSquare => "lemma-square",
            Suite::EvenIndex => "even-index",
            Suite::InvolutionNormalization => "involution-normalization",
            Suite::Rigidity => "rigidity",
            Suite::Koenigs => "koenigs",
            Suite::OracleAgreement => "oracle-agreement",
            Suite::JetCrossCheck => "jet-cross-check",
        }
    }

    pub fn default_cases(self) -> usize {
        match self {
            Suite::LemmaSquare => 1000,
            Suite::EvenIndex => 200,
            Suite::InvolutionNormalization => 500,
            Suite::Rigidity => 200,
            Suite::Koenigs => 200,
            Suite::OracleAgreement => oracle_fixtures(0).len(),
            Suite::JetCrossCheck => 50,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub order: usize,
    pub cases: usize,
    pub passed: usize,
    /// Tallies of observed outcomes, e.g. deviation indices.
    pub tally: BTreeMap<String, usize>,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, order: usize) -> Self {
        SuiteReport {
            suite,
            seed,
            order,
            cases: 0,
            passed: 0,
            tally: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(what());
        }
    }

    fn count(&mut self, key: impl Into<String>) {
        *self.tally.entry(key.into()).or_default() += 1;
    }

    pub fn pass(&self) -> bool {
        self.cases > 0 && self.passed == self.cases
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "suite {} seed={} order={} cases={} passed={} {}",
            self.suite,
            self.seed,
            self.order,
            self.cases,
            self.passed,
            if self.pass() { "PASS" } else { "FAIL" }
        )?;
        if !self.tally.is_empty() {
            let t: Vec<String> = self.tally.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            write!(f, " tally[{}]", t.join(" "))?;
        }
        for fail in &self.failures {
            write!(f, "\n  failure: {fail}")?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, seed: u64, cases: Option<usize>) -> Result<SuiteReport> {
    run_suite_at(suite, seed, cases, DEFAULT_ORDER)
}

/// Like [`run_suite`] with a series order for the suites that take one;
/// the oracle and jet suites have fixed small orders.
pub fn run_suite_at(suite: Suite, seed: u64, cases: Option<usize>, order: usize) -> Result<SuiteReport> {
    if order < 2 {
        return Err(Error::Precondition("suites need order at least 2".into()));
    }
    let n = cases.unwrap_or(suite.default_cases());
    match suite {
        Suite::LemmaSquare => lemma_square(seed, n, order),
        Suite::EvenIndex => even_index(seed, n, order),
        Suite::InvolutionNormalization => involution_normalization(seed, n, order),
        Suite::Rigidity => rigidity(seed, n, order),
        Suite::Koenigs => koenigs(seed, n, order),
        Suite::OracleAgreement => oracle_agreement(seed, n),
        Suite::JetCrossCheck => jet_cross_check(seed, n),
    }
}

/// Every suite with its default case count, in a fixed order.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Suite::ALL.into_iter().map(|s| run_suite(s, seed, None)).collect()
}

/// Deviation index of the square of a multiplier −1 series is odd, and
/// agreement with `X` through an odd index extends to the next even one.
pub fn lemma_square(seed: u64, cases: usize, order: usize) -> Result<SuiteReport> {
    let mut rng = seeded_rng(seed);
    let mut rep = SuiteReport::new(Suite::LemmaSquare, seed, order);
    let x = Series::identity(order);
    for i in 0..cases {
        // Every few cases, zero a prefix so high deviation indices occur.
        let mut s = random_series(&mut rng, order, Rational::from_int(-1));
        if i % 4 == 0 {
            let keep = rng.gen_range(2..=order);
            for k in 2..keep {
                s.set_coeff(k, Rational::zero());
            }
        }
        let sq = s.comp_power_nonneg(2);
        let dev = square_deviation(&s)?;
        rep.count(match dev {
            Some(d) => format!("dev{d}"),
            None => "none".into(),
        });
        let odd = dev.map_or(true, |d| d % 2 == 1);
        let step = (1..=order / 2).all(|m| !sq.equals_mod(&x, 2 * m - 1) || sq.equals_mod(&x, 2 * m));
        rep.record(odd && step, || format!("case {i}: S = {s}, deviation {dev:?}"));
    }
    Ok(rep)
}

/// Products of two formal involutions have even deviation index and are
/// reversed by the first factor.
pub fn even_index(seed: u64, cases: usize, order: usize) -> Result<SuiteReport> {
    let mut rng = seeded_rng(seed);
    let mut rep = SuiteReport::new(Suite::EvenIndex, seed, order);
    for i in 0..cases {
        // Half the samples take W2 close to W1 so higher indices occur.
        let r = if i % 2 == 0 {
            random_reversible(&mut rng, order)
        } else {
            let w1 = random_invertible(&mut rng, order);
            let j = rng.gen_range(2..=order);
            let bump = Series::identity(order).add(&Series::monomial(random_nonzero_rational(&mut rng), j, order))?;
            reversible_from(&w1, &w1.compose(&bump)?)?
        };
        let dev = r.q.deviation_index();
        rep.count(match dev {
            Some(d) => format!("dev{d}"),
            None => "none".into(),
        });
        let reversed = r.q.conjugate(&r.tau1)? == r.q.comp_inverse()?;
        let even = dev.map_or(true, |d| d % 2 == 0);
        rep.record(even && reversed, || format!("case {i}: Q = {}, deviation {dev:?}", r.q));
    }
    Ok(rep)
}

/// Formal involutions `S` drawn from the square roots of `X`; with
/// `ψ = (X − S)/2`, `ψ ∘ S = −ψ` holds coefficientwise.
pub fn involution_normalization(seed: u64, cases: usize, order: usize) -> Result<SuiteReport> {
    let mut rng = seeded_rng(seed);
    let mut rep = SuiteReport::new(Suite::InvolutionNormalization, seed, order);
    let x = Series::identity(order);
    let family = comp_square_root(&x, &Rational::from_int(-1))?;
    let free = family.free_indices().to_vec();
    let half = Rational::new(1, 2);
    for i in 0..cases {
        let values: BTreeMap<usize, Rational> = free.iter().map(|&k| (k, random_rational(&mut rng))).collect();
        let s = family
            .instantiate(&values)
            .ok_or_else(|| Error::Precondition("square roots of X form an empty family".into()))?;
        let psi = x.sub(&s)?.scale(&half);
        let ok = s.comp_power_nonneg(2) == x && psi.compose(&s)? == psi.neg();
        rep.record(ok, || format!("case {i}: S = {s}"));
    }
    Ok(rep)
}

/// Multipliers with `|λ| ≠ 1` used by [`rigidity`].
pub fn rigidity_multipliers() -> Vec<Rational> {
    [(-2, 1), (-3, 1), (-1, 2), (2, 1), (3, 1)]
        .iter()
        .map(|&(n, d)| Rational::new(n, d))
        .collect()
}

/// For `|λ| ≠ 1` the square root of `G ∘ G` with multiplier `λ` is unique
/// and equals `G`.
pub fn rigidity(seed: u64, cases: usize, order: usize) -> Result<SuiteReport> {
    let mut rng = seeded_rng(seed);
    let mut rep = SuiteReport::new(Suite::Rigidity, seed, order);
    let lambdas = rigidity_multipliers();
    for i in 0..cases {
        let lambda = lambdas.choose(&mut rng).expect("nonempty").clone();
        rep.count(format!("lambda={lambda}"));
        let g = random_series(&mut rng, order, lambda.clone());
        let fam = comp_square_root(&g.comp_power_nonneg(2), &lambda)?;
        let ok = fam.is_unique() && fam.witness() == Some(&g);
        rep.record(ok, || format!("case {i}: G = {g}, got {fam}"));
    }
    Ok(rep)
}

/// `conjugate(S, W) = λX` exactly for the linearizing `W`.
pub fn koenigs(seed: u64, cases: usize, order: usize) -> Result<SuiteReport> {
    let mut rng = seeded_rng(seed);
    let mut rep = SuiteReport::new(Suite::Koenigs, seed, order);
    for i in 0..cases {
        let lambda = loop {
            let r = random_rational(&mut rng);
            if !r.is_zero() && r != Rational::from_int(1) && r != Rational::from_int(-1) {
                break r;
            }
        };
        let s = random_series(&mut rng, order, lambda.clone());
        let w = koenigs_linearize(&s)?;
        let ok = s.conjugate(&w)? == Series::linear(lambda, order);
        rep.record(ok, || format!("case {i}: S = {s}"));
    }
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct OracleFixture {
    pub base: Series,
    pub mu: Rational,
}

fn series_of(coeffs: &[(i64, i64)]) -> Series {
    Series::new(coeffs.iter().map(|&(n, d)| Rational::new(n, d)).collect()).expect("nonempty")
}

/// Square-root problems with order at most 8: hand-picked cases plus
/// squares of seeded random series.
pub fn oracle_fixtures(seed: u64) -> Vec<OracleFixture> {
    let q = |n: i64| Rational::from_int(n);
    let mut out = Vec::new();
    for n in 3..=8 {
        out.push(OracleFixture { base: Series::identity(n), mu: q(-1) });
        out.push(OracleFixture { base: Series::identity(n), mu: q(1) });
    }
    out.push(OracleFixture { base: series_of(&[(4, 1), (0, 1), (0, 1)]), mu: q(2) });
    out.push(OracleFixture { base: series_of(&[(4, 1), (1, 1), (0, 1), (1, 3)]), mu: q(-2) });
    out.push(OracleFixture { base: series_of(&[(1, 1), (0, 1), (2, 1)]), mu: q(-1) });
    out.push(OracleFixture { base: series_of(&[(1, 1), (0, 1), (2, 1), (0, 1), (3, 1)]), mu: q(-1) });
    out.push(OracleFixture { base: series_of(&[(1, 1), (1, 1), (0, 1)]), mu: q(-1) });
    out.push(OracleFixture { base: series_of(&[(1, 4), (1, 1), (-1, 2), (0, 1)]), mu: Rational::new(-1, 2) });
    // a constraint at X^6 pins an earlier free coefficient
    let pinned = series_of(&[(-1, 1), (1, 1), (3, 1), (-1, 1), (2, 1), (0, 1), (0, 1), (0, 1)]);
    out.push(OracleFixture { base: pinned.comp_power_nonneg(2), mu: q(-1) });
    let mut rng = seeded_rng(seed);
    let mus = [q(-1), q(2), q(-2), Rational::new(1, 2), q(1)];
    for i in 0..20 {
        let mu = mus[i % mus.len()].clone();
        let order = rng.gen_range(3..=8);
        let mut g = random_series(&mut rng, order, mu.clone());
        // Coefficients at degenerate indices come from the enumeration's
        // sample set, so pinned values stay enumerable.
        if mu == q(-1) {
            for k in (2..=order).step_by(2) {
                g.set_coeff(k, sample_values().choose(&mut rng).expect("nonempty").clone());
            }
        }
        out.push(OracleFixture { base: g.comp_power_nonneg(2), mu });
    }
    out
}

fn instantiations(free: &[usize]) -> Vec<BTreeMap<usize, Rational>> {
    let mut acc = vec![BTreeMap::new()];
    for &k in free {
        acc = acc
            .into_iter()
            .flat_map(|m| {
                sample_values().into_iter().map(move |v| {
                    let mut m = m.clone();
                    m.insert(k, v);
                    m
                })
            })
            .collect();
    }
    acc
}

/// Compares the symbolic square-root solver against exhaustive enumeration.
/// Returns a description of the first disagreement.
pub fn compare_with_oracle(fx: &OracleFixture) -> Result<Option<String>> {
    let fam = comp_square_root(&fx.base, &fx.mu)?;
    let brute = brute_force_square_roots(&fx.base, &fx.mu)?;
    let brute_free = enumerated_free_indices(&brute, &fx.mu);
    let free = fam.free_indices().to_vec();
    let classes_agree = match (fam.is_empty(), fam.is_unique()) {
        (true, _) => brute.is_empty(),
        (false, true) => brute.len() == 1 && brute_free.is_empty(),
        (false, false) => !brute.is_empty() && brute_free == free,
    };
    if !classes_agree {
        return Ok(Some(format!(
            "classification: solver {fam}, enumeration {} roots free {brute_free:?}",
            brute.len()
        )));
    }
    if let Some(g) = brute.iter().find(|g| !fam.contains(g)) {
        return Ok(Some(format!("enumerated root {g} missing from {fam}")));
    }
    let from_family: BTreeSet<Vec<Rational>> = instantiations(&free)
        .iter()
        .filter_map(|v| fam.instantiate(v))
        .map(|g| g.into_coeffs())
        .collect();
    let from_brute: BTreeSet<Vec<Rational>> = brute.iter().map(|g| g.coeffs().to_vec()).collect();
    if from_family != from_brute {
        return Ok(Some(format!(
            "membership: {} instantiated vs {} enumerated",
            from_family.len(),
            from_brute.len()
        )));
    }
    Ok(None)
}

pub fn oracle_agreement(seed: u64, cases: usize) -> Result<SuiteReport> {
    let fixtures = oracle_fixtures(seed);
    let mut rep = SuiteReport::new(Suite::OracleAgreement, seed, crate::verify::BRUTE_FORCE_MAX_ORDER);
    for (i, fx) in fixtures.iter().take(cases).enumerate() {
        let fam = comp_square_root(&fx.base, &fx.mu)?;
        rep.count(match &fam.solutions {
            crate::dynamics::SquareRoots::Unique(_) => "unique",
            crate::dynamics::SquareRoots::Family { .. } => "family",
            crate::dynamics::SquareRoots::Empty { .. } => "empty",
        });
        let diff = compare_with_oracle(fx)?;
        rep.record(diff.is_none(), || {
            format!("fixture {i}: S = {} mu = {}: {}", fx.base, fx.mu, diff.unwrap_or_default())
        });
    }
    Ok(rep)
}

/// Relative tolerance for the jet cross-check.
pub const JET_CROSS_TOL: f64 = 1e-20;

/// Taylor jets of random smooth expressions against finite differences at
/// orders 1 through 4.
pub fn jet_cross_check(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = seeded_rng(seed);
    let mut rep = SuiteReport::new(Suite::JetCrossCheck, seed, 4);
    for i in 0..cases {
        let e = random_smooth_expr(&mut rng, 3);
        let p = Rational::new(rng.gen_range(-8..=8), 8);
        let order = 1 + i % 4;
        let r = jet_vs_finite_difference(&e, &p, order, JET_CROSS_TOL)?;
        rep.count(format!("order{order}"));
        rep.record(r.pass, || format!("case {i}: {e} at {p}: {r}"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass() {
        for s in Suite::ALL {
            let r = run_suite(s, 3, Some(8)).unwrap();
            assert!(r.pass(), "{r}");
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_suite(Suite::LemmaSquare, 11, Some(20)).unwrap();
        let b = run_suite(Suite::LemmaSquare, 11, Some(20)).unwrap();
        assert_eq!(a.to_string(), b.to_string());
        let c = run_suite(Suite::LemmaSquare, 12, Some(20)).unwrap();
        assert_ne!(a.tally, c.tally);
    }

    #[test]
    fn oracle_catches_a_wrong_family() {
        // a root of X with multiplier 1 is X alone; pretend the solver saw a
        // different base to confirm the comparison is not vacuous
        let fx = OracleFixture {
            base: Series::identity(3),
            mu: Rational::from_int(-1),
        };
        assert_eq!(compare_with_oracle(&fx).unwrap(), None);
        let brute = brute_force_square_roots(&fx.base, &fx.mu).unwrap();
        let other = comp_square_root(&Series::identity(3), &Rational::from_int(1)).unwrap();
        assert!(brute.iter().any(|g| !other.contains(g)));
    }
}
