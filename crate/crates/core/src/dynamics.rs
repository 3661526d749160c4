//! Structural operations on series used by the reversibility arguments:
//! involutivity, compositional square roots, Koenigs linearization, the
//! Lubin normal-form check, and random generators for the property suites.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::{Field, Rational};
use crate::series::TruncatedSeries;
use crate::{Series, SeriesPoly};

/// `S ∘ S = X` modulo `X^(N+1)`.
pub fn is_involutive<T: Field>(s: &TruncatedSeries<T>) -> bool {
    s.comp_power_nonneg(2).is_identity()
}

/// Deviation index of `S ∘ S` for a series with multiplier `-1`.
///
/// Whenever it exists it is odd; the property suites assert this.
pub fn square_deviation(s: &Series) -> Result<Option<usize>> {
    if *s.multiplier() != Rational::from_int(-1) {
        return Err(Error::NotReversingMultiplier(s.multiplier().to_string()));
    }
    Ok(s.comp_power_nonneg(2).deviation_index())
}

pub fn commutes<T: Field>(s: &TruncatedSeries<T>, t: &TruncatedSeries<T>) -> Result<bool> {
    s.commutes(t)
}

// ---------------------------------------------------------------------------
// Square roots
// ---------------------------------------------------------------------------

/// All compositional square roots `G` of a series with a given multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareRootFamily {
    pub base: Series,
    pub root_multiplier: Rational,
    pub solutions: SquareRoots,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SquareRoots {
    Unique(Series),
    /// Coefficients at `free_indices` may be chosen freely; the remaining
    /// coefficients are the polynomials in `general` (variable `k` stands for
    /// the coefficient of `X^k`). `witness` sets every free coefficient to 0.
    Family {
        free_indices: Vec<usize>,
        witness: Series,
        general: SeriesPoly,
    },
    /// The coefficient equation at `failed_at` is inconsistent.
    Empty { failed_at: usize },
}

impl SquareRootFamily {
    pub fn witness(&self) -> Option<&Series> {
        match &self.solutions {
            SquareRoots::Unique(g) => Some(g),
            SquareRoots::Family { witness, .. } => Some(witness),
            SquareRoots::Empty { .. } => None,
        }
    }

    pub fn free_indices(&self) -> &[usize] {
        match &self.solutions {
            SquareRoots::Family { free_indices, .. } => free_indices,
            _ => &[],
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self.solutions, SquareRoots::Unique(_))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.solutions, SquareRoots::Empty { .. })
    }

    /// The member with the given values at the free indices (missing values
    /// read as 0).
    pub fn instantiate(&self, values: &BTreeMap<usize, Rational>) -> Option<Series> {
        match &self.solutions {
            SquareRoots::Unique(g) => Some(g.clone()),
            SquareRoots::Family { general, .. } => {
                let coeffs = general.coeffs().iter().map(|p| p.evaluate(values)).collect();
                Series::new(coeffs).ok()
            }
            SquareRoots::Empty { .. } => None,
        }
    }

    /// Membership test: `g` is one of the square roots described here.
    pub fn contains(&self, g: &Series) -> bool {
        if g.order() != self.base.order() {
            return false;
        }
        let values: BTreeMap<usize, Rational> = self
            .free_indices()
            .iter()
            .map(|&k| (k, g.coeff(k).clone()))
            .collect();
        self.instantiate(&values).as_ref() == Some(g)
    }
}

impl fmt::Display for SquareRootFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.solutions {
            SquareRoots::Unique(g) => write!(f, "unique {g}"),
            SquareRoots::Family {
                free_indices,
                witness,
                general,
            } => {
                let idx: Vec<String> = free_indices.iter().map(|k| k.to_string()).collect();
                write!(f, "family free [{}] witness {witness} general {general}", idx.join(", "))
            }
            SquareRoots::Empty { failed_at } => write!(f, "empty (inconsistent at index {failed_at})"),
        }
    }
}

/// Solves `G ∘ G = S` with `multiplier(G) = mu` coefficient by coefficient.
///
/// The equation for `X^k` reads `(mu + mu^k) g_k + R_k(g_2..g_{k-1}) = s_k`.
/// It only degenerates for `mu = -1` and even `k`; there the solver keeps the
/// earlier free coefficients symbolic, turns the equation into a constraint
/// on them, and opens a new free coefficient `g_k`.
pub fn comp_square_root(s: &Series, mu: &Rational) -> Result<SquareRootFamily> {
    let multiplier = s.multiplier().clone();
    if &(mu * mu) != &multiplier {
        return Err(Error::multiplier_mismatch(mu, &multiplier));
    }
    if mu.is_zero() {
        return Err(Error::ZeroMultiplier);
    }
    let solutions = if *mu == Rational::from_int(-1) {
        solve_symbolic(s)?
    } else {
        SquareRoots::Unique(solve_unique(s, mu))
    };
    Ok(SquareRootFamily {
        base: s.clone(),
        root_multiplier: mu.clone(),
        solutions,
    })
}

fn solve_unique(s: &Series, mu: &Rational) -> Series {
    let n = s.order();
    let mut g = Series::linear(mu.clone(), n);
    let mut mu_k = mu.clone();
    for k in 2..=n {
        mu_k = &mu_k * mu;
        let head = g.truncate(k);
        let partial = head.compose(&head).expect("same order");
        let rhs = s.coeff(k) - partial.coeff(k);
        g.set_coeff(k, &rhs / &(mu + &mu_k));
    }
    g
}

fn solve_symbolic(s: &Series) -> Result<SquareRoots> {
    let n = s.order();
    let half = Poly::constant(Rational::new(1, 2));
    let mut g = SeriesPoly::linear(Poly::constant(Rational::from_int(-1)), n);
    let mut free: Vec<usize> = Vec::new();
    for k in 2..=n {
        let head = g.truncate(k);
        let partial = head.compose(&head)?;
        let residual = partial.coeff(k).clone() - Poly::constant(s.coeff(k).clone());
        if k % 2 == 1 {
            // (mu + mu^k) = -2
            g.set_coeff(k, residual * half.clone());
            continue;
        }
        if let Some(c) = residual.as_constant() {
            if !c.is_zero() {
                return Ok(SquareRoots::Empty { failed_at: k });
            }
        } else {
            let (var, value) = residual
                .variables()
                .into_iter()
                .find_map(|v| {
                    residual.linear_in(v).map(|(a, rest)| {
                        let inv = Poly::constant(-(Rational::one() / a));
                        (v, rest * inv)
                    })
                })
                .ok_or(Error::NonlinearConstraint(k))?;
            for j in 2..k {
                let c = g.coeff(j).substitute(var, &value);
                g.set_coeff(j, c);
            }
            free.retain(|&v| v != var);
        }
        g.set_coeff(k, Poly::var(k));
        free.push(k);
    }
    let zeros = BTreeMap::new();
    let witness = Series::new(g.coeffs().iter().map(|p| p.evaluate(&zeros)).collect())?;
    if free.is_empty() {
        Ok(SquareRoots::Unique(witness))
    } else {
        Ok(SquareRoots::Family {
            free_indices: free,
            witness,
            general: g,
        })
    }
}

// ---------------------------------------------------------------------------
// Linearization and normal forms
// ---------------------------------------------------------------------------

/// Returns `W = X + ...` with `W^{-1} ∘ S ∘ W = λX`, `λ = multiplier(S)`.
///
/// The coefficient `w_k` solves `(λ^k - λ) w_k = [X^k](S ∘ W_{<k})`; the
/// factor vanishes exactly when `λ` is `0` or a root of unity, which over the
/// rationals means `|λ| ∈ {0, 1}`.
pub fn koenigs_linearize<T: Field>(s: &TruncatedSeries<T>) -> Result<TruncatedSeries<T>> {
    let lambda = s.multiplier().clone();
    let n = s.order();
    let mut w = TruncatedSeries::<T>::identity(n);
    let mut lambda_k = lambda.clone();
    if lambda.is_zero() || (lambda.clone() * lambda.clone()).is_one() {
        return Err(Error::Resonant(format!("{lambda:?}")));
    }
    for k in 2..=n {
        lambda_k = lambda_k * lambda.clone();
        let factor = lambda_k.clone() - lambda.clone();
        if factor.is_zero() {
            return Err(Error::Resonant(format!("{lambda:?}")));
        }
        let partial = s.truncate(k).compose(&w.truncate(k))?;
        w.set_coeff(k, partial.coeff(k).clone() / factor);
    }
    Ok(w)
}

/// For `S = X + a X^(p+1) + ...` and `Q` commuting with `S`, checks that
/// `Q = X + μ X^(p+1)` modulo `X^(p+2)` and returns `μ`. Returns `None` when
/// `Q` does not have that shape, or when `μ = 0` but `Q != X`.
pub fn lubin_form(q: &Series, s: &Series) -> Result<Option<Rational>> {
    let one = Rational::one();
    if *q.multiplier() != one || *s.multiplier() != one {
        return Err(Error::Precondition("lubin_form needs multiplier 1 for both series".into()));
    }
    let dev = s
        .deviation_index()
        .ok_or(Error::IdentitySeries(s.order()))?;
    if !q.commutes(s)? {
        return Err(Error::NotCommuting(s.order()));
    }
    if (2..dev).any(|k| !q.coeff(k).is_zero()) {
        return Ok(None);
    }
    let mu = q.coeff(dev).clone();
    if mu.is_zero() && !q.is_identity() {
        return Ok(None);
    }
    Ok(Some(mu))
}

// ---------------------------------------------------------------------------
// Random generators
// ---------------------------------------------------------------------------

/// Rational with numerator in `[-9, 9]` and denominator in `[1, 9]`.
pub fn random_rational<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    Rational::new(rng.gen_range(-9..=9), rng.gen_range(1..=9))
}

pub fn random_nonzero_rational<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    loop {
        let r = random_rational(rng);
        if !r.is_zero() {
            return r;
        }
    }
}

/// Random series of the given order with a prescribed multiplier.
pub fn random_series<R: Rng + ?Sized>(rng: &mut R, order: usize, multiplier: Rational) -> Series {
    let mut coeffs = Vec::with_capacity(order);
    coeffs.push(multiplier);
    coeffs.extend((1..order).map(|_| random_rational(rng)));
    Series::new(coeffs).expect("positive order")
}

pub fn random_invertible<R: Rng + ?Sized>(rng: &mut R, order: usize) -> Series {
    let m = random_nonzero_rational(rng);
    random_series(rng, order, m)
}

/// A product of two formal involutions `τ1 ∘ τ2`, each `τi = Wi^{-1} ∘ (-X) ∘ Wi`.
#[derive(Clone, Debug)]
pub struct ReversibleSample {
    pub q: Series,
    pub tau1: Series,
    pub tau2: Series,
}

pub fn involution_from(w: &Series) -> Result<Series> {
    Series::linear(Rational::from_int(-1), w.order()).conjugate(w)
}

pub fn reversible_from(w1: &Series, w2: &Series) -> Result<ReversibleSample> {
    let tau1 = involution_from(w1)?;
    let tau2 = involution_from(w2)?;
    let q = tau1.compose(&tau2)?;
    Ok(ReversibleSample { q, tau1, tau2 })
}

/// Random reversible series with multiplier 1, reversed by its `tau1`.
pub fn random_reversible<R: Rng + ?Sized>(rng: &mut R, order: usize) -> ReversibleSample {
    let w1 = random_invertible(rng, order);
    let w2 = random_invertible(rng, order);
    reversible_from(&w1, &w2).expect("invertible conjugators")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::seeded_rng;

    fn s(text: &str) -> Series {
        text.parse().unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn involutive_examples() {
        assert!(is_involutive(&s("[-1, 0, 0, 0]")));
        assert!(is_involutive(&s("[-1, 1, -1]")));
        assert!(!is_involutive(&s("[-1, 0, -1]")));
    }

    #[test]
    fn square_deviation_examples() {
        assert_eq!(square_deviation(&s("[-1, 0, 0, 0]")).unwrap(), None);
        assert_eq!(square_deviation(&s("[-1, 0, -1, 0]")).unwrap(), Some(3));
        // (-x + x^2) composed with itself is x - 2x^3 + ...
        let sq = s("[-1, 1, 0, 0]").comp_power(2).unwrap();
        assert_eq!(sq.coeff(2), &q(0, 1));
        assert_eq!(sq.coeff(3), &q(-2, 1));
        assert_eq!(square_deviation(&s("[-1, 1, 0, 0]")).unwrap(), Some(3));
        assert!(matches!(square_deviation(&s("[2, 1]")), Err(Error::NotReversingMultiplier(_))));
    }

    #[test]
    fn square_root_of_identity_is_involution_family() {
        let fam = comp_square_root(&s("[1, 0, 0]"), &q(-1, 1)).unwrap();
        assert_eq!(fam.free_indices(), &[2]);
        assert_eq!(fam.witness().unwrap(), &s("[-1, 0, 0]"));
        for a in [q(1, 1), q(-2, 1), q(1, 3)] {
            let g = fam.instantiate(&BTreeMap::from([(2, a.clone())])).unwrap();
            let expected = Series::new(vec![q(-1, 1), a.clone(), -(&a * &a)]).unwrap();
            assert_eq!(g, expected);
            assert!(fam.contains(&g));
        }
    }

    #[test]
    fn square_root_linear_and_cubic() {
        let fam = comp_square_root(&s("[4, 0, 0]"), &q(2, 1)).unwrap();
        assert_eq!(fam.solutions, SquareRoots::Unique(s("[2, 0, 0]")));
        let fam = comp_square_root(&s("[1, 0, 2]"), &q(-1, 1)).unwrap();
        assert!(fam.contains(&s("[-1, 0, -1]")));
        assert!(matches!(
            comp_square_root(&s("[4, 0]"), &q(3, 1)),
            Err(Error::RootMultiplierMismatch { .. })
        ));
    }

    #[test]
    fn square_root_constraints_pin_free_coefficients() {
        // G0 ∘ G0 for G0 = -X + X^2 + 3X^3 - X^4 + 2X^5; the solver must pin
        // g2 = 1 and g4 = -1 from the later even equations.
        let g0 = s("[-1, 1, 3, -1, 2, 0, 0, 0]");
        let base = g0.comp_power(2).unwrap();
        let fam = comp_square_root(&base, &q(-1, 1)).unwrap();
        assert_eq!(fam.free_indices(), &[8]);
        assert!(fam.contains(&g0));
        let w = fam.witness().unwrap();
        assert_eq!(w.comp_power(2).unwrap(), base);
    }

    #[test]
    fn square_root_inconsistent_even_equation() {
        // multiplier-(-1) squares have odd deviation, so X + X^2 has no root
        let fam = comp_square_root(&s("[1, 1, 0]"), &q(-1, 1)).unwrap();
        assert_eq!(fam.solutions, SquareRoots::Empty { failed_at: 2 });
    }

    #[test]
    fn koenigs_examples() {
        assert_eq!(koenigs_linearize(&s("[2, 0, 0]")).unwrap(), s("[1, 0, 0]"));
        assert_eq!(koenigs_linearize(&s("[2, 1]")).unwrap(), s("[1, 1/2]"));
        let mut rng = seeded_rng(3);
        let f = random_series(&mut rng, 8, q(-2, 1));
        let w = koenigs_linearize(&f).unwrap();
        assert_eq!(f.conjugate(&w).unwrap(), Series::linear(q(-2, 1), 8));
        assert!(matches!(koenigs_linearize(&s("[-1, 1]")), Err(Error::Resonant(_))));
        assert!(matches!(koenigs_linearize(&s("[1, 1]")), Err(Error::Resonant(_))));
    }

    #[test]
    fn lubin_examples() {
        let sx = s("[1, 0, 1, 0, 0, 0]");
        assert_eq!(lubin_form(&Series::identity(6), &sx).unwrap(), Some(q(0, 1)));
        let sq = sx.comp_power(2).unwrap();
        assert_eq!(lubin_form(&sq, &sx).unwrap(), Some(q(2, 1)));
        let a = s("[1, 0, 5/3, 1, 0]");
        assert_eq!(lubin_form(&a, &a).unwrap(), Some(q(5, 3)));
        assert!(matches!(lubin_form(&sx, &Series::identity(6)), Err(Error::IdentitySeries(6))));
        assert!(matches!(
            lubin_form(&s("[1, 1, 0, 0, 0, 0]"), &sx),
            Err(Error::NotCommuting(_))
        ));
    }

    #[test]
    fn commutes_examples() {
        let a = s("[3, 1, -2]");
        assert!(commutes(&a, &a.comp_power(2).unwrap()).unwrap());
        assert!(commutes(&s("[2]"), &s("[3]")).unwrap());
        assert!(!commutes(&s("[-1, 0, 0]"), &s("[1, 1, 0]")).unwrap());
    }

    #[test]
    fn reversible_examples() {
        let mut rng = seeded_rng(11);
        let w = random_invertible(&mut rng, 10);
        let same = reversible_from(&w, &w).unwrap();
        assert!(same.q.is_identity());
        let sample = random_reversible(&mut rng, 10);
        assert_eq!(sample.q.conjugate(&sample.tau1).unwrap(), sample.q.comp_inverse().unwrap());
        if let Some(d) = sample.q.deviation_index() {
            assert_eq!(d % 2, 0);
        }
    }
}
