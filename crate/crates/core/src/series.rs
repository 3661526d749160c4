//! Truncated formal power series without constant term, under composition.
//!
//! A [`TruncatedSeries`] of order `N` stores `c_1 X + ... + c_N X^N` and is
//! understood modulo `X^(N+1)`. Invertible series (`c_1 != 0`) form a group
//! under composition; every operation here returns a new value.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{Field, Rational, Real, Ring};

#[derive(Clone, PartialEq)]
pub struct TruncatedSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Ring> TruncatedSeries<T> {
    /// Builds a series from `[c_1, ..., c_N]`.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptySeries);
        }
        Ok(TruncatedSeries { coeffs })
    }

    pub fn zero(order: usize) -> Self {
        assert!(order > 0, "series order must be positive");
        TruncatedSeries {
            coeffs: vec![T::zero(); order],
        }
    }

    /// The identity `X`.
    pub fn identity(order: usize) -> Self {
        Self::linear(T::one(), order)
    }

    /// `c X`.
    pub fn linear(c: T, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// `X^k` (zero when `k > order`).
    pub fn monomial(c: T, k: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if (1..=order).contains(&k) {
            s.coeffs[k - 1] = c;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient of `X^k`, `1 <= k <= N`.
    pub fn coeff(&self, k: usize) -> &T {
        &self.coeffs[k - 1]
    }

    pub fn set_coeff(&mut self, k: usize, value: T) {
        self.coeffs[k - 1] = value;
    }

    /// Leading coefficient `c_1`.
    pub fn multiplier(&self) -> &T {
        &self.coeffs[0]
    }

    /// Least `m >= 2` with `c_m != 0`.
    pub fn deviation_index(&self) -> Option<usize> {
        (2..=self.order()).find(|&k| !self.coeff(k).is_zero())
    }

    /// True iff the coefficients of `X^1..X^m` agree.
    ///
    /// Panics if either series has order below `m`.
    pub fn equals_mod(&self, other: &Self, m: usize) -> bool {
        assert!(
            m <= self.order() && m <= other.order(),
            "equals_mod: m = {m} exceeds series order"
        );
        self.coeffs[..m] == other.coeffs[..m]
    }

    /// Drops the coefficients above `m`.
    pub fn truncate(&self, m: usize) -> Self {
        assert!(m > 0 && m <= self.order(), "truncate: bad order {m}");
        TruncatedSeries {
            coeffs: self.coeffs[..m].to_vec(),
        }
    }

    /// Pads with zero coefficients up to order `m` (or truncates).
    pub fn resize(&self, m: usize) -> Self {
        assert!(m > 0, "series order must be positive");
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(m, T::zero());
        TruncatedSeries { coeffs }
    }

    pub fn map<U: Ring>(&self, f: impl Fn(&T) -> U) -> TruncatedSeries<U> {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn try_map<U: Ring>(&self, f: impl Fn(&T) -> Result<U>) -> Result<TruncatedSeries<U>> {
        Ok(TruncatedSeries {
            coeffs: self.coeffs.iter().map(f).collect::<Result<_>>()?,
        })
    }

    fn check_order(&self, other: &Self) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::OrderMismatch {
                left: self.order(),
                right: other.order(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        Ok(TruncatedSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        Ok(TruncatedSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    pub fn neg(&self) -> Self {
        self.map(|c| -c.clone())
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|c| s.clone() * c.clone())
    }

    /// Composition `self ∘ inner` modulo `X^(N+1)`.
    ///
    /// Horner evaluation of `self` at `inner`, truncating after every step.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        self.check_order(inner)?;
        Ok(TruncatedSeries {
            coeffs: compose_unchecked(&self.coeffs, &inner.coeffs, self.order()),
        })
    }

    /// `self^{∘k}` for `k >= 0`; available over any ring.
    pub fn comp_power_nonneg(&self, k: u64) -> Self {
        let mut result = Self::identity(self.order());
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result.coeffs = compose_unchecked(&result.coeffs, &base.coeffs, self.order());
            }
            e >>= 1;
            if e > 0 {
                base.coeffs = compose_unchecked(&base.coeffs, &base.coeffs, self.order());
            }
        }
        result
    }

    pub fn commutes(&self, other: &Self) -> Result<bool> {
        Ok(self.compose(other)? == other.compose(self)?)
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(|c| c.is_zero())
    }
}

impl<T: Field> TruncatedSeries<T> {
    /// Compositional inverse by coefficientwise triangular solve.
    pub fn comp_inverse(&self) -> Result<Self> {
        let c1 = self.multiplier().clone();
        if c1.is_zero() {
            return Err(Error::ZeroMultiplier);
        }
        let n = self.order();
        let mut r = vec![T::zero(); n];
        r[0] = T::one() / c1.clone();
        for k in 2..=n {
            // [X^k] (S ∘ R) with r_k = 0 is the only obstruction; c_1 r_k cancels it.
            let partial = compose_unchecked(&self.coeffs[..k], &r[..k], k);
            r[k - 1] = -(partial[k - 1].clone() / c1.clone());
        }
        Ok(TruncatedSeries { coeffs: r })
    }

    /// `self^{∘k}` for any integer `k`; negative powers need `c_1 != 0`.
    pub fn comp_power(&self, k: i64) -> Result<Self> {
        if k >= 0 {
            Ok(self.comp_power_nonneg(k as u64))
        } else {
            Ok(self.comp_inverse()?.comp_power_nonneg(k.unsigned_abs()))
        }
    }

    /// `W^{-1} ∘ self ∘ W`.
    pub fn conjugate(&self, w: &Self) -> Result<Self> {
        self.check_order(w)?;
        let w_inv = w.comp_inverse()?;
        w_inv.compose(&self.compose(w)?)
    }
}

impl<T: Real> TruncatedSeries<T> {
    /// Largest absolute coefficient difference, as a high-precision value.
    pub fn max_abs_diff(&self, other: &Self) -> Result<crate::scalar::HpFloat> {
        self.check_order(other)?;
        let mut worst = crate::scalar::HpFloat::zero();
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            let d = (a.clone() - b.clone()).abs().to_hp();
            worst = worst.max(d);
        }
        Ok(worst)
    }
}

/// Horner composition of `outer` (no constant term) with `inner` (no constant
/// term) modulo `X^(n+1)`; both slices have length `n`.
fn compose_unchecked<T: Ring>(outer: &[T], inner: &[T], n: usize) -> Vec<T> {
    // acc is a polynomial a_0 + a_1 X + ... + a_{n-1} X^{n-1}
    let mut acc: Vec<T> = vec![T::zero(); n];
    acc[0] = outer[n - 1].clone();
    for k in (1..n).rev() {
        acc = mul_by_inner(&acc, inner, n - 1);
        acc[0] = acc[0].clone() + outer[k - 1].clone();
    }
    let full = mul_by_inner(&acc, inner, n);
    full[1..].to_vec()
}

/// `(inner · acc)` keeping degrees `0..=max_deg`; `inner` has no constant term.
fn mul_by_inner<T: Ring>(acc: &[T], inner: &[T], max_deg: usize) -> Vec<T> {
    let mut out = vec![T::zero(); max_deg + 1];
    for (i, a) in acc.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, t) in inner.iter().enumerate() {
            let deg = i + j + 1;
            if deg > max_deg {
                break;
            }
            if t.is_zero() {
                continue;
            }
            out[deg] = out[deg].clone() + a.clone() * t.clone();
        }
    }
    out
}

impl<T: fmt::Display> fmt::Display for TruncatedSeries<T> {
    /// Literal form `[c1, c2, ..., cN]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl<T: fmt::Debug> fmt::Debug for TruncatedSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs.iter()).finish()
    }
}

impl<T: fmt::Display> Serialize for TruncatedSeries<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.coeffs.iter().map(|c| c.to_string()))
    }
}

impl FromStr for TruncatedSeries<Rational> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_series_literal(s)
    }
}

/// Parses `[c1, c2, ..., cN]` with exact rational entries.
pub fn parse_series_literal(text: &str) -> Result<TruncatedSeries<Rational>> {
    let t = text.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Parse {
            pos: 0,
            msg: "series literal must look like [c1, c2, ...]".into(),
        })?;
    if inner.trim().is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut coeffs = Vec::new();
    let mut offset = t.find('[').unwrap_or(0) + 1;
    for part in inner.split(',') {
        let c = part.parse::<Rational>().map_err(|_| Error::Parse {
            pos: offset,
            msg: format!("invalid coefficient `{}`", part.trim()),
        })?;
        coeffs.push(c);
        offset += part.len() + 1;
    }
    TruncatedSeries::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn s(text: &str) -> TruncatedSeries<Rational> {
        text.parse().unwrap()
    }

    /// Full polynomial substitution without intermediate truncation.
    fn expand_full(outer: &[Rational], inner: &[Rational], n: usize) -> Vec<Rational> {
        let inner_poly: Vec<Rational> = std::iter::once(Rational::zero())
            .chain(inner.iter().cloned())
            .collect();
        let mut power = vec![Rational::one()];
        let mut total = vec![Rational::zero(); 1];
        for c in outer {
            let mut next = vec![Rational::zero(); power.len() + inner_poly.len() - 1];
            for (i, a) in power.iter().enumerate() {
                for (j, b) in inner_poly.iter().enumerate() {
                    next[i + j] += &(a * b);
                }
            }
            power = next;
            if total.len() < power.len() {
                total.resize(power.len(), Rational::zero());
            }
            for (i, p) in power.iter().enumerate() {
                total[i] += &(c * p);
            }
        }
        total.resize(n + 1, Rational::zero());
        total[1..=n].to_vec()
    }

    #[test]
    fn compose_examples() {
        let x = TruncatedSeries::<Rational>::identity(4);
        let a = s("[1, 2, 0, -3]");
        assert_eq!(x.compose(&a).unwrap(), a);
        assert_eq!(
            TruncatedSeries::linear(q(2, 1), 1)
                .compose(&TruncatedSeries::linear(q(3, 1), 1))
                .unwrap(),
            s("[6]")
        );
        let left = s("[1, 1, 0]");
        let right = s("[1, 0, 1]");
        let oracle = expand_full(left.coeffs(), right.coeffs(), 3);
        assert_eq!(oracle, s("[1, 1, 1]").into_coeffs());
        assert_eq!(left.compose(&right).unwrap(), s("[1, 1, 1]"));
    }

    #[test]
    fn compose_matches_full_expansion() {
        let a = s("[-2, 1/3, 0, 5, -1/2, 7]");
        let b = s("[3/4, -1, 2, 0, 1/9, -3]");
        assert_eq!(a.compose(&b).unwrap().into_coeffs(), expand_full(a.coeffs(), b.coeffs(), 6));
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let err = s("[1, 1]").compose(&s("[1]")).unwrap_err();
        assert_eq!(err, Error::OrderMismatch { left: 2, right: 1 });
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(s("[2]").comp_inverse().unwrap(), s("[1/2]"));
        assert_eq!(s("[1, 1, 0]").comp_inverse().unwrap(), s("[1, -1, 2]"));
        assert_eq!(s("[1, 0, 0]").comp_inverse().unwrap(), s("[1, 0, 0]"));
        assert_eq!(s("[0, 1]").comp_inverse().unwrap_err(), Error::ZeroMultiplier);
    }

    #[test]
    fn power_examples() {
        assert_eq!(s("[-1, 0, 0]").comp_power(2).unwrap(), s("[1, 0, 0]"));
        assert_eq!(s("[2]").comp_power(3).unwrap(), s("[8]"));
        assert_eq!(s("[-1, 0, -1, 0]").comp_power(2).unwrap(), s("[1, 0, 2, 0]"));
        let a = s("[3, 1, -1]");
        assert_eq!(a.comp_power(0).unwrap(), TruncatedSeries::identity(3));
        assert_eq!(a.comp_power(-1).unwrap(), a.comp_inverse().unwrap());
        assert_eq!(s("[0, 1]").comp_power(-2).unwrap_err(), Error::ZeroMultiplier);
    }

    #[test]
    fn conjugate_examples() {
        let a = s("[5, -1, 2]");
        assert_eq!(a.conjugate(&TruncatedSeries::identity(3)).unwrap(), a);
        let c = s("[-1, 0, 0]").conjugate(&s("[1, 1, 0]")).unwrap();
        assert_eq!(c, s("[-1, -2, -4]"));
        assert!(c.comp_power(2).unwrap().is_identity());
        let lam = s("[7/3, 0, 0, 0]");
        let w = s("[2, -1, 1/2, 4]");
        assert_eq!(lam.conjugate(&w).unwrap().multiplier(), &q(7, 3));
    }

    #[test]
    fn multiplier_and_deviation() {
        assert_eq!(s("[-2, 0, 0, 0, 1]").multiplier(), &q(-2, 1));
        assert_eq!(s("[1]").multiplier(), &q(1, 1));
        assert_eq!(s("[-1, 0, 0, 3]").deviation_index(), Some(4));
        assert_eq!(s("[1, 0, 0]").deviation_index(), None);
        let sq = s("[-1, 0, -1, 0]").comp_power(2).unwrap();
        assert_eq!(sq.deviation_index(), Some(3));
    }

    #[test]
    fn equals_mod_examples() {
        let a = s("[1, 0, 0, 0, 1]");
        let x = TruncatedSeries::identity(5);
        assert!(a.equals_mod(&x, 4));
        assert!(!a.equals_mod(&x, 5));
        assert!(a.equals_mod(&a, 5));
    }

    #[test]
    fn literal_round_trip() {
        let a = s("[-1, 0, 1/3]");
        assert_eq!(a.to_string(), "[-1, 0, 1/3]");
        assert_eq!(a.to_string().parse::<TruncatedSeries<Rational>>().unwrap(), a);
        assert_eq!(s("[1,-1,2]"), s("[1, -1, 2]"));
        assert!("[]".parse::<TruncatedSeries<Rational>>().is_err());
        assert!("1, 2".parse::<TruncatedSeries<Rational>>().is_err());
        assert!(matches!(
            "[1, x]".parse::<TruncatedSeries<Rational>>(),
            Err(Error::Parse { pos: 3, .. })
        ));
    }
}
