//! Sparse multivariate polynomials over the rationals.
//!
//! Used as a coefficient ring for series whose coefficients depend on free
//! parameters (square-root families). Variables are identified by `usize`
//! labels; the square-root solver labels a parameter by the series index it
//! was introduced at.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::scalar::{Rational, Ring};

/// Sorted `(variable, exponent)` pairs, exponents positive.
type Monomial = Vec<(usize, u32)>;

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    pub fn var(v: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(v, 1)], Rational::one());
        Poly { terms }
    }

    /// The constant term, when the polynomial has no other terms.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn variables(&self) -> BTreeSet<usize> {
        self.terms
            .keys()
            .flat_map(|m| m.iter().map(|&(v, _)| v))
            .collect()
    }

    pub fn degree_in(&self, v: usize) -> u32 {
        self.terms
            .keys()
            .filter_map(|m| m.iter().find(|&&(w, _)| w == v).map(|&(_, e)| e))
            .max()
            .unwrap_or(0)
    }

    /// If `self = a·v + rest` with `a` a nonzero rational and `rest` free of
    /// `v`, returns `(a, rest)`.
    pub fn linear_in(&self, v: usize) -> Option<(Rational, Poly)> {
        let mut coeff = None;
        let mut rest = Poly::zero();
        for (m, c) in &self.terms {
            match m.iter().find(|&&(w, _)| w == v) {
                None => {
                    rest.terms.insert(m.clone(), c.clone());
                }
                Some(&(_, 1)) if m.len() == 1 => coeff = Some(c.clone()),
                Some(_) => return None,
            }
        }
        coeff.map(|a| (a, rest))
    }

    /// Substitutes `value` for variable `v`.
    pub fn substitute(&self, v: usize, value: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut rest: Monomial = Vec::with_capacity(m.len());
            let mut exp = 0;
            for &(w, e) in m {
                if w == v {
                    exp = e;
                } else {
                    rest.push((w, e));
                }
            }
            let mut term = Poly {
                terms: BTreeMap::from([(rest, c.clone())]),
            };
            for _ in 0..exp {
                term = term * value.clone();
            }
            out = out + term;
        }
        out
    }

    /// Evaluates with the given variable assignment; unassigned variables
    /// are read as zero.
    pub fn evaluate(&self, values: &BTreeMap<usize, Rational>) -> Rational {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(v, e) in m {
                let x = values.get(&v).cloned().unwrap_or_else(Rational::zero);
                for _ in 0..e {
                    t *= &x;
                }
            }
            total += &t;
        }
        total
    }

    fn insert_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: Monomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        for (m, c) in rhs.terms {
            self.insert_term(m, c);
        }
        self
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert_term(mul_monomials(ma, mb), ca * cb);
            }
        }
        out
    }
}

impl Zero for Poly {
    fn zero() -> Self {
        Poly::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for Poly {
    fn one() -> Self {
        Poly::constant(Rational::one())
    }
}

impl Ring for Poly {
    fn from_i64(n: i64) -> Self {
        Poly::constant(Rational::from_int(n))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_empty() {
                write!(f, "{c}")?;
                continue;
            }
            if !c.is_one() {
                write!(f, "({c})*")?;
            }
            let vars: Vec<String> = m
                .iter()
                .map(|&(v, e)| if e == 1 { format!("t{v}") } else { format!("t{v}^{e}") })
                .collect();
            write!(f, "{}", vars.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_cancellation() {
        let a = Poly::var(2);
        let b = Poly::var(4);
        let p = (a.clone() + b.clone()) * (a.clone() - b.clone());
        let expected = a.clone() * a.clone() - b.clone() * b.clone();
        assert_eq!(p, expected);
        assert!((p.clone() - expected).is_zero());
        assert_eq!(p.degree_in(2), 2);
    }

    #[test]
    fn linear_extraction_and_substitution() {
        let t2 = Poly::var(2);
        let t4 = Poly::var(4);
        let p = Poly::constant(Rational::new(3, 1)) * t4.clone() + t2.clone() * t2.clone() - Poly::one();
        let (a, rest) = p.linear_in(4).unwrap();
        assert_eq!(a, Rational::new(3, 1));
        assert_eq!(rest, t2.clone() * t2.clone() - Poly::one());
        assert!(p.linear_in(2).is_none());
        let sub = p.substitute(2, &Poly::constant(Rational::new(2, 1)));
        assert_eq!(sub, Poly::constant(Rational::new(3, 1)) * t4 + Poly::constant(Rational::new(3, 1)));
        let vals = BTreeMap::from([(4, Rational::new(1, 3))]);
        assert_eq!(sub.evaluate(&vals), Rational::new(4, 1));
    }
}
