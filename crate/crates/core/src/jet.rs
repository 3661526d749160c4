//! Taylor jets with constant term: `c_0 + c_1 X + ... + c_N X^N`.
//!
//! Arithmetic on jets propagates truncated Taylor expansions through an
//! expression; the elementary functions use their defining differential
//! equations, so the recurrences only need `f(c_0)` from the carrier.


use crate::error::{Error, Result};
use crate::scalar::{Field, Real, Ring};
use crate::series::TruncatedSeries;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    coeffs: Vec<T>,
}

impl<T: Ring> Jet<T> {
    pub fn constant(value: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = value;
        Jet { coeffs }
    }

    /// The independent variable `p + X`.
    pub fn variable(point: T, order: usize) -> Self {
        let mut j = Self::constant(point, order);
        if order >= 1 {
            j.coeffs[1] = T::one();
        }
        j
    }

    pub fn from_coeffs(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "jet needs a constant term");
        Jet { coeffs }
    }

    /// `value + S(X)`.
    pub fn from_series(value: T, series: &TruncatedSeries<T>) -> Self {
        let mut coeffs = Vec::with_capacity(series.order() + 1);
        coeffs.push(value);
        coeffs.extend(series.coeffs().iter().cloned());
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> &T {
        &self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// The non-constant part as a series; `None` for order-0 jets.
    pub fn to_series(&self) -> Option<TruncatedSeries<T>> {
        TruncatedSeries::new(self.coeffs[1..].to_vec()).ok()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.order(), other.order());
        Jet {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(a.clone(), b.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        Jet {
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn scale(&self, s: &T) -> Self {
        Jet {
            coeffs: self.coeffs.iter().map(|c| s.clone() * c.clone()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order();
        let mut out = vec![T::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs[..=n - i].iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Jet { coeffs: out }
    }

    pub fn pow_nonneg(&self, mut e: u32) -> Self {
        let mut result = Jet::constant(T::one(), self.order());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// `value + S(self - self_0)`: substitutes this jet into a series
    /// recentred at `value`.
    pub fn substitute_into(&self, value: T, series: &TruncatedSeries<T>) -> Result<Self> {
        let n = self.order();
        if n == 0 {
            return Ok(Jet::constant(value, 0));
        }
        let inner = TruncatedSeries::new(self.coeffs[1..].to_vec())?;
        let outer = series.resize(n);
        Ok(Jet::from_series(value, &outer.compose(&inner)?))
    }
}

impl<T: Field> Jet<T> {
    fn div_int(x: T, k: usize) -> T {
        x / T::from_i64(k as i64)
    }

    pub fn recip(&self) -> Result<Self> {
        let u0 = self.value().clone();
        if u0.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        let n = self.order();
        let mut r = vec![T::zero(); n + 1];
        r[0] = T::one() / u0.clone();
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc = acc + self.coeffs[j].clone() * r[k - j].clone();
            }
            r[k] = -(acc / u0.clone());
        }
        Ok(Jet { coeffs: r })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn powi(&self, e: i32) -> Result<Self> {
        if e >= 0 {
            Ok(self.pow_nonneg(e as u32))
        } else {
            Ok(self.recip()?.pow_nonneg(e.unsigned_abs()))
        }
    }

    /// Formal derivative, as a jet of order `N - 1` padded back to order `N`.
    fn derivative(&self) -> Self {
        let n = self.order();
        let mut d = vec![T::zero(); n + 1];
        for j in 0..n {
            d[j] = T::from_i64((j + 1) as i64) * self.coeffs[j + 1].clone();
        }
        Jet { coeffs: d }
    }

    /// Antiderivative with the given constant term (top term dropped).
    fn integrate(&self, value: T) -> Self {
        let n = self.order();
        let mut a = vec![T::zero(); n + 1];
        a[0] = value;
        for k in 1..=n {
            a[k] = Self::div_int(self.coeffs[k - 1].clone(), k);
        }
        Jet { coeffs: a }
    }
}

fn unavailable<T: Real>(what: &str, at: &T) -> Error {
    if T::EXACT {
        Error::Inexact(format!("{what}({at})"))
    } else {
        Error::Domain(format!("{what}({at})"))
    }
}

impl<T: Real> Jet<T> {
    pub fn exp(&self) -> Result<Self> {
        let u0 = self.value();
        let e0 = u0.try_exp().ok_or_else(|| unavailable("exp", u0))?;
        let n = self.order();
        let mut e = vec![T::zero(); n + 1];
        e[0] = e0;
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc = acc + T::from_i64(j as i64) * self.coeffs[j].clone() * e[k - j].clone();
            }
            e[k] = Self::div_int(acc, k);
        }
        Ok(Jet { coeffs: e })
    }

    pub fn ln(&self) -> Result<Self> {
        let u0 = self.value().clone();
        if u0 <= T::zero() {
            return Err(Error::Domain(format!("log of nonpositive value {u0}")));
        }
        let l0 = u0.try_ln().ok_or_else(|| unavailable("log", &u0))?;
        let n = self.order();
        let mut l = vec![T::zero(); n + 1];
        l[0] = l0;
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..k {
                acc = acc + T::from_i64(j as i64) * l[j].clone() * self.coeffs[k - j].clone();
            }
            l[k] = (self.coeffs[k].clone() - Self::div_int(acc, k)) / u0.clone();
        }
        Ok(Jet { coeffs: l })
    }

    /// `(sinh u, cosh u)` computed together.
    pub fn sinh_cosh(&self) -> Result<(Self, Self)> {
        let u0 = self.value();
        let s0 = u0.try_sinh().ok_or_else(|| unavailable("sinh", u0))?;
        let c0 = u0.try_cosh().ok_or_else(|| unavailable("cosh", u0))?;
        let n = self.order();
        let mut s = vec![T::zero(); n + 1];
        let mut c = vec![T::zero(); n + 1];
        s[0] = s0;
        c[0] = c0;
        for k in 1..=n {
            let mut acc_s = T::zero();
            let mut acc_c = T::zero();
            for j in 1..=k {
                let ju = T::from_i64(j as i64) * self.coeffs[j].clone();
                acc_s = acc_s + ju.clone() * c[k - j].clone();
                acc_c = acc_c + ju * s[k - j].clone();
            }
            s[k] = Self::div_int(acc_s, k);
            c[k] = Self::div_int(acc_c, k);
        }
        Ok((Jet { coeffs: s }, Jet { coeffs: c }))
    }

    pub fn tanh(&self) -> Result<Self> {
        let (s, c) = self.sinh_cosh()?;
        s.div(&c)
    }

    pub fn atan(&self) -> Result<Self> {
        let u0 = self.value();
        let a0 = u0.try_atan().ok_or_else(|| unavailable("atan", u0))?;
        let one = Jet::constant(T::one(), self.order());
        let denom = one.add(&self.mul(self));
        let d = self.derivative().div(&denom)?;
        Ok(d.integrate(a0))
    }
}
