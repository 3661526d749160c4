//! Closed-form expressions in one variable `x`.
//!
//! Grammar (loosest to tightest): sums, products, integer powers, unary
//! minus. So `-x^2` reads as `(-x)^2`. Named functions take parenthesised
//! arguments: `exp log sinh cosh tanh atan`, plus `compose(f, g)` for
//! `f(g(x))` and `inverse(f)` for the compositional inverse. Numeric
//! literals (`3`, `0.25`, `1e-3`) are exact rationals.

use std::fmt;
use std::ops;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::{HpFloat, Rational, Real, Ring};
use crate::{Series, SeriesHp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sinh,
    Cosh,
    Tanh,
    Atan,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "atan" | "arctan" => Func::Atan,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var,
    Const(Rational),
    /// A constant only known to working precision (e.g. a solved fixed point).
    Real(HpFloat),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
    Func(Func, Box<Expr>),
    /// `outer(inner(x))`.
    Compose(Box<Expr>, Box<Expr>),
    /// Compositional inverse of a monotone map.
    Inverse(Box<Expr>),
    Piecewise(PiecewiseMap),
    /// Smooth plateau: 1 on `[-r/2, r/2]`, 0 outside `(-r, r)`.
    Plateau(Rational),
}

/// Map given by different expressions on consecutive intervals.
/// `pieces[i]` applies on `[knots[i-1], knots[i])`, the last piece on
/// `[knots[last], ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseMap {
    pub knots: Vec<Rational>,
    pub pieces: Vec<Expr>,
}

impl PiecewiseMap {
    pub fn new(knots: Vec<Rational>, pieces: Vec<Expr>) -> Result<Self> {
        if pieces.len() != knots.len() + 1 {
            return Err(Error::InvalidSpec("piecewise map needs one more piece than knots".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("piecewise knots must increase".into()));
        }
        Ok(PiecewiseMap { knots, pieces })
    }

    fn piece_for<T: Real>(&self, x: &T) -> &Expr {
        let idx = self
            .knots
            .iter()
            .position(|k| *x < T::from_rational(k))
            .unwrap_or(self.knots.len());
        &self.pieces[idx]
    }

    /// Largest coefficient gap between the jets of adjacent pieces at each
    /// knot (values included).
    pub fn knot_mismatch(&self, order: usize) -> Result<HpFloat> {
        let mut worst = HpFloat::zero();
        for (i, k) in self.knots.iter().enumerate() {
            let p = Jet::variable(HpFloat::from_rational(k), order);
            let left = self.pieces[i].jet(&p)?;
            let right = self.pieces[i + 1].jet(&p)?;
            for (a, b) in left.coeffs().iter().zip(right.coeffs()) {
                worst = worst.max((a.clone() - b.clone()).abs());
            }
        }
        Ok(worst)
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

impl Expr {
    pub fn x() -> Expr {
        Expr::Var
    }

    pub fn constant(r: Rational) -> Expr {
        Expr::Const(r)
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(Rational::from_int(n))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg))
    }

    pub fn pow(base: Expr, n: i64) -> Expr {
        Expr::Pow(Box::new(base), n)
    }

    /// `outer ∘ inner`, dropping identity factors.
    pub fn compose(outer: Expr, inner: Expr) -> Expr {
        match (&outer, &inner) {
            (Expr::Var, _) => inner,
            (_, Expr::Var) => outer,
            _ => Expr::Compose(Box::new(outer), Box::new(inner)),
        }
    }

    /// Compositional inverse; inverses of compositions are split so that
    /// root finding only ever runs on the factors.
    pub fn inverse(e: Expr) -> Expr {
        match e {
            Expr::Var => Expr::Var,
            Expr::Inverse(inner) => *inner,
            Expr::Neg(inner) if inner.is_var() => Expr::Neg(inner),
            Expr::Compose(outer, inner) => Expr::compose(Expr::inverse(*inner), Expr::inverse(*outer)),
            other => Expr::Inverse(Box::new(other)),
        }
    }

    /// `x ↦ -f(-x)`.
    pub fn reflect(e: Expr) -> Expr {
        -Expr::compose(e, -Expr::Var)
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Expr::Var)
    }

    /// True when the tree only uses field operations, integer powers and
    /// composition, so it denotes a rational function.
    pub fn is_rational_closed(&self) -> bool {
        self.rational_degree_bound().is_some()
    }

    /// Upper bounds `(deg P, deg Q)` for a representation `P/Q` of this
    /// expression as a rational function; `None` if it is not one.
    pub fn rational_degree_bound(&self) -> Option<(u64, u64)> {
        let cap = |v: u64| (v <= 1 << 20).then_some(v);
        Some(match self {
            Expr::Var => (1, 0),
            Expr::Const(_) => (0, 0),
            Expr::Neg(a) => a.rational_degree_bound()?,
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (pa, qa) = a.rational_degree_bound()?;
                let (pb, qb) = b.rational_degree_bound()?;
                (cap((pa + qb).max(pb + qa))?, cap(qa + qb)?)
            }
            Expr::Mul(a, b) => {
                let (pa, qa) = a.rational_degree_bound()?;
                let (pb, qb) = b.rational_degree_bound()?;
                (cap(pa + pb)?, cap(qa + qb)?)
            }
            Expr::Div(a, b) => {
                let (pa, qa) = a.rational_degree_bound()?;
                let (pb, qb) = b.rational_degree_bound()?;
                (cap(pa + qb)?, cap(qa + pb)?)
            }
            Expr::Pow(a, n) => {
                let (p, q) = a.rational_degree_bound()?;
                let m = n.unsigned_abs();
                let (p, q) = if *n >= 0 { (p, q) } else { (q, p) };
                (cap(p.checked_mul(m)?)?, cap(q.checked_mul(m)?)?)
            }
            Expr::Compose(outer, inner) => {
                let (po, qo) = outer.rational_degree_bound()?;
                let (pi, qi) = inner.rational_degree_bound()?;
                let d = cap(po.max(qo).checked_mul(pi.max(qi))?)?;
                (d, d)
            }
            _ => return None,
        })
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $variant:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}
expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn unavailable<T: Real>(what: &str, at: &T) -> Error {
    if T::EXACT {
        Error::Inexact(format!("{what}({at})"))
    } else {
        Error::Domain(format!("{what}({at})"))
    }
}

fn powi<T: Real>(base: T, n: i64) -> Result<T> {
    let mut e = n.unsigned_abs();
    let mut b = if n < 0 {
        if base.is_zero() {
            return Err(Error::Domain("negative power of zero".into()));
        }
        T::one() / base
    } else {
        base
    };
    let mut acc = T::one();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b.clone();
        }
        e >>= 1;
        if e > 0 {
            b = b.clone() * b;
        }
    }
    Ok(acc)
}

impl Expr {
    /// Value at `x` in the carrier `T`. Exact carriers report
    /// [`Error::Inexact`] when the value is irrational.
    pub fn eval<T: Real>(&self, x: &T) -> Result<T> {
        Ok(match self {
            Expr::Var => x.clone(),
            Expr::Const(c) => T::from_rational(c),
            Expr::Real(h) => {
                if T::EXACT {
                    return Err(Error::Inexact(h.to_decimal(20)));
                }
                T::from_hp(h).ok_or_else(|| Error::Inexact(h.to_decimal(20)))?
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d.is_zero() {
                    return Err(Error::Domain(format!("division by zero at x = {x}")));
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, n) => powi(a.eval(x)?, *n)?,
            Expr::Func(f, a) => {
                let u = a.eval(x)?;
                match f {
                    Func::Exp => u.try_exp().ok_or_else(|| unavailable("exp", &u))?,
                    Func::Log => {
                        if u <= T::zero() {
                            return Err(Error::Domain(format!("log of nonpositive value {u}")));
                        }
                        u.try_ln().ok_or_else(|| unavailable("log", &u))?
                    }
                    Func::Sinh => u.try_sinh().ok_or_else(|| unavailable("sinh", &u))?,
                    Func::Cosh => u.try_cosh().ok_or_else(|| unavailable("cosh", &u))?,
                    Func::Tanh => {
                        let s = u.try_sinh().ok_or_else(|| unavailable("tanh", &u))?;
                        let c = u.try_cosh().ok_or_else(|| unavailable("tanh", &u))?;
                        s / c
                    }
                    Func::Atan => u.try_atan().ok_or_else(|| unavailable("atan", &u))?,
                }
            }
            Expr::Compose(outer, inner) => outer.eval(&inner.eval(x)?)?,
            Expr::Inverse(inner) => solve_inverse(inner, x)?,
            Expr::Piecewise(pw) => pw.piece_for(x).eval(x)?,
            Expr::Plateau(r) => plateau(r, &Jet::constant(x.clone(), 0))?.value().clone(),
        })
    }

    /// Taylor jet of the expression composed with the input jet.
    pub fn jet<T: Real>(&self, x: &Jet<T>) -> Result<Jet<T>> {
        let n = x.order();
        Ok(match self {
            Expr::Var => x.clone(),
            Expr::Const(_) | Expr::Real(_) => Jet::constant(self.eval(x.value())?, n),
            Expr::Neg(a) => a.jet(x)?.neg(),
            Expr::Add(a, b) => a.jet(x)?.add(&b.jet(x)?),
            Expr::Sub(a, b) => a.jet(x)?.sub(&b.jet(x)?),
            Expr::Mul(a, b) => a.jet(x)?.mul(&b.jet(x)?),
            Expr::Div(a, b) => {
                let d = b.jet(x)?;
                if d.value().is_zero() {
                    return Err(Error::Domain(format!("division by zero at x = {}", x.value())));
                }
                a.jet(x)?.div(&d)?
            }
            Expr::Pow(a, k) => {
                let e = i32::try_from(*k).map_err(|_| Error::Domain("exponent too large".into()))?;
                a.jet(x)?.powi(e)?
            }
            Expr::Func(f, a) => {
                let u = a.jet(x)?;
                match f {
                    Func::Exp => u.exp()?,
                    Func::Log => u.ln()?,
                    Func::Sinh => u.sinh_cosh()?.0,
                    Func::Cosh => u.sinh_cosh()?.1,
                    Func::Tanh => u.tanh()?,
                    Func::Atan => u.atan()?,
                }
            }
            Expr::Compose(outer, inner) => outer.jet(&inner.jet(x)?)?,
            Expr::Inverse(inner) => {
                let y0 = solve_inverse(inner, x.value())?;
                if n == 0 {
                    return Ok(Jet::constant(y0, 0));
                }
                let local = inner.jet(&Jet::variable(y0.clone(), n))?;
                let series = local.to_series().expect("positive order");
                if series.multiplier().is_zero() {
                    return Err(Error::NonSmooth(format!("inverse has vertical tangent at {}", x.value())));
                }
                x.substitute_into(y0, &series.comp_inverse()?)?
            }
            Expr::Piecewise(pw) => pw.piece_for(x.value()).jet(x)?,
            Expr::Plateau(r) => plateau(r, x)?,
        })
    }

    pub fn eval_hp(&self, x: &HpFloat) -> Result<HpFloat> {
        self.eval(x)
    }

    pub fn eval_f64(&self, x: f64) -> Result<f64> {
        self.eval(&x)
    }
}

/// Smooth step `s(t) = φ(t) / (φ(t) + φ(1 - t))` with `φ(t) = exp(-1/t)`,
/// evaluated at `t = (r - |x|) / (r/2)`.
fn plateau<T: Real>(r: &Rational, x: &Jet<T>) -> Result<Jet<T>> {
    let n = x.order();
    let radius = T::from_rational(r);
    let half = T::from_rational(&(r * &Rational::new(1, 2)));
    let x0 = x.value().abs();
    if x0 <= half {
        return Ok(Jet::constant(T::one(), n));
    }
    if x0 >= radius {
        return Ok(Jet::constant(T::zero(), n));
    }
    let ax = if *x.value() < T::zero() { x.neg() } else { x.clone() };
    let t = Jet::constant(radius, n).sub(&ax).scale(&(T::one() / half));
    let phi = |u: &Jet<T>| -> Result<Jet<T>> { u.recip()?.neg().exp() };
    let one = Jet::constant(T::one(), n);
    let a = phi(&t)?;
    let b = phi(&one.sub(&t))?;
    a.div(&a.add(&b))
}

/// Solves `inner(y) = target` for a monotone `inner`.
fn solve_inverse<T: Real>(inner: &Expr, target: &T) -> Result<T> {
    let y = newton_bisect(inner, &target.to_hp())?;
    if T::EXACT {
        let cand = T::from_hp(&y).ok_or_else(|| Error::Inexact(format!("inverse at {target}")))?;
        if inner.eval(&cand)? == *target {
            Ok(cand)
        } else {
            Err(Error::Inexact(format!("inverse at {target}")))
        }
    } else {
        T::from_hp(&y).ok_or_else(|| Error::Inexact(format!("inverse at {target}")))
    }
}

/// Root of `h(y) = target` by Newton steps kept inside a bisection bracket.
/// The bracket is found by doubling `[-1, 1]`.
pub fn newton_bisect(h: &Expr, target: &HpFloat) -> Result<HpFloat> {
    let resid = |y: &HpFloat| -> Result<HpFloat> { Ok(h.eval(y)? - target.clone()) };
    let mut a = HpFloat::from_i64(-1);
    let mut b = HpFloat::from_i64(1);
    let mut fa = resid(&a)?;
    let mut fb = resid(&b)?;
    let mut doublings = 0;
    while fa.is_sign_negative() == fb.is_sign_negative() && !fa.is_zero() && !fb.is_zero() {
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NoConvergence(format!("no sign change bracketing {}", target.to_decimal(12))));
        }
        a = a.clone() + a;
        b = b.clone() + b;
        fa = resid(&a)?;
        fb = resid(&b)?;
    }
    if fa.is_zero() {
        return Ok(a);
    }
    if fb.is_zero() {
        return Ok(b);
    }
    let bits = crate::scalar::working_bits() as i32;
    let scale = target.abs().max(HpFloat::one());
    let tol_f = HpFloat::from_f64(2f64.powi(-(bits - 12))) * scale;
    let two = HpFloat::from_i64(2);
    let mut y = (a.clone() + b.clone()) / two.clone();
    for _ in 0..(4 * bits) {
        let j = h.jet(&Jet::variable(y.clone(), 1))?;
        let fy = j.value().clone() - target.clone();
        if fy.abs() <= tol_f {
            return Ok(y);
        }
        if fy.is_sign_negative() == fa.is_sign_negative() {
            a = y.clone();
            fa = fy.clone();
        } else {
            b = y.clone();
        }
        let width = (b.clone() - a.clone()).abs();
        let ytol = HpFloat::from_f64(2f64.powi(-(bits - 4))) * y.abs().max(HpFloat::one());
        if width <= ytol {
            return Ok(y);
        }
        let d = j.coeffs()[1].clone();
        let lo = if a < b { a.clone() } else { b.clone() };
        let hi = a.clone().max(b.clone());
        let newton = if d.is_zero() { None } else { Some(y.clone() - fy / d) };
        y = match newton {
            Some(z) if z.is_finite() && z > lo && z < hi => z,
            _ => (a.clone() + b.clone()) / two.clone(),
        };
    }
    Err(Error::NoConvergence(format!("inverse at {}", target.to_decimal(12))))
}

// ---------------------------------------------------------------------------
// Jets
// ---------------------------------------------------------------------------

/// A Taylor jet without constant term: exact when the whole computation
/// stayed rational, otherwise at working precision.
#[derive(Clone, Debug, PartialEq)]
pub enum JetValue {
    Exact(Series),
    Approx(SeriesHp),
}

impl JetValue {
    pub fn order(&self) -> usize {
        match self {
            JetValue::Exact(s) => s.order(),
            JetValue::Approx(s) => s.order(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, JetValue::Exact(_))
    }

    pub fn exact(&self) -> Option<&Series> {
        match self {
            JetValue::Exact(s) => Some(s),
            JetValue::Approx(_) => None,
        }
    }

    pub fn to_hp(&self) -> SeriesHp {
        match self {
            JetValue::Exact(s) => s.map(HpFloat::from_rational),
            JetValue::Approx(s) => s.clone(),
        }
    }

    pub fn multiplier_f64(&self) -> f64 {
        match self {
            JetValue::Exact(s) => s.multiplier().to_f64(),
            JetValue::Approx(s) => s.multiplier().to_f64(),
        }
    }
}

impl fmt::Display for JetValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetValue::Exact(s) => write!(f, "{s}"),
            JetValue::Approx(s) => {
                let parts: Vec<String> = s.coeffs().iter().map(|c| c.to_decimal(25)).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

/// Jet of `x ↦ e(p + x) - e(p)` to order `n`.
pub fn taylor_jet(e: &Expr, p: &Rational, n: usize) -> Result<JetValue> {
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    match e.jet(&Jet::variable(p.clone(), n)) {
        Ok(j) => Ok(JetValue::Exact(j.to_series().expect("positive order"))),
        Err(Error::Inexact(_)) => taylor_jet_hp(e, &HpFloat::from_rational(p), n),
        Err(err) => Err(err),
    }
}

/// Jet at a point known only to working precision.
pub fn taylor_jet_hp(e: &Expr, p: &HpFloat, n: usize) -> Result<JetValue> {
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let j = e.jet(&Jet::variable(p.clone(), n))?;
    Ok(JetValue::Approx(j.to_series().expect("positive order")))
}

/// Certifies `a ≡ b` as rational functions by exact evaluation at more
/// points than the numerator degree bound of `a - b`. Returns false when
/// no certificate is available (not a failure of equality).
pub fn certify_identical(a: &Expr, b: &Expr) -> bool {
    if a == b {
        return true;
    }
    let diff = Expr::Sub(Box::new(a.clone()), Box::new(b.clone()));
    let Some((p, _)) = diff.rational_degree_bound() else {
        return false;
    };
    if p > 4096 {
        return false;
    }
    let need = p + 1;
    let mut hits = 0;
    for i in 0..(4 * need + 64) as i64 {
        let k = if i % 2 == 0 { i / 2 } else { -(i / 2 + 1) };
        let x = Rational::new(k, 7);
        match diff.eval(&x) {
            Ok(v) if v.is_zero() => {
                hits += 1;
                if hits >= need {
                    return true;
                }
            }
            Ok(_) => return false,
            Err(_) => continue,
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;

impl Expr {
    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => SUM,
            Expr::Mul(..) | Expr::Div(..) => PRODUCT,
            Expr::Neg(_) => UNARY,
            Expr::Pow(..) => POWER,
            Expr::Const(c) if c.is_negative() => {
                if c.is_integer() {
                    UNARY
                } else {
                    PRODUCT
                }
            }
            Expr::Const(c) if !c.is_integer() => PRODUCT,
            Expr::Real(_) => SUM,
            _ => POWER + 1,
        }
    }

    /// Writes the expression, parenthesised unless its level is at least
    /// `min`. With `no_pow`, powers are wrapped too: a power base may not be
    /// a power, and a negated power needs parentheses since `-x^2` reads as
    /// `(-x)^2`.
    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8, no_pow: bool) -> fmt::Result {
        let lvl = self.level();
        if lvl < min || (no_pow && lvl == POWER) {
            write!(f, "(")?;
            self.write_bare(f)?;
            write!(f, ")")
        } else {
            self.write_bare(f)
        }
    }

    /// Right operand of `+`/`-`: a leading sign gets parentheses.
    fn write_right_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let signed = match self {
            Expr::Neg(_) => true,
            Expr::Const(c) => c.is_negative(),
            _ => false,
        };
        if signed {
            write!(f, "(")?;
            self.write_bare(f)?;
            write!(f, ")")
        } else {
            self.write_at(f, PRODUCT, false)
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var => write!(f, "x"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Real(h) => write!(f, "{}", h.to_decimal(40)),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, UNARY, true)
            }
            Expr::Add(a, b) => {
                a.write_at(f, SUM, false)?;
                write!(f, " + ")?;
                b.write_right_operand(f)
            }
            Expr::Sub(a, b) => {
                a.write_at(f, SUM, false)?;
                write!(f, " - ")?;
                b.write_right_operand(f)
            }
            Expr::Mul(a, b) => {
                a.write_at(f, PRODUCT, false)?;
                write!(f, "*")?;
                b.write_at(f, UNARY, false)
            }
            Expr::Div(a, b) => {
                a.write_at(f, PRODUCT, false)?;
                write!(f, "/")?;
                b.write_at(f, UNARY, false)
            }
            Expr::Pow(a, n) => {
                a.write_at(f, UNARY, true)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Compose(a, b) => write!(f, "compose({a}, {b})"),
            Expr::Inverse(a) => write!(f, "inverse({a})"),
            Expr::Piecewise(pw) => {
                write!(f, "piecewise(")?;
                for (i, piece) in pw.pieces.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    match (i.checked_sub(1).map(|j| &pw.knots[j]), pw.knots.get(i)) {
                        (None, Some(hi)) => write!(f, "x < {hi}: ")?,
                        (Some(lo), Some(hi)) => write!(f, "{lo} <= x < {hi}: ")?,
                        (Some(lo), None) => write!(f, "x >= {lo}: ")?,
                        (None, None) => {}
                    }
                    write!(f, "{piece}")?;
                }
                write!(f, ")")
            }
            Expr::Plateau(r) => write!(f, "plateau({r})"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str) -> Result<Lexer> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let mantissa: String = chars[start..i].iter().collect();
            let mut value: Rational = mantissa.parse().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number `{mantissa}`"),
            })?;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                let digits_start = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j > digits_start {
                    let exp: String = chars[i + 1..j].iter().collect();
                    let e: i32 = exp.parse().map_err(|_| Error::Parse {
                        pos: i,
                        msg: format!("bad exponent `{exp}`"),
                    })?;
                    value = value * Rational::from_int(10).powi(e).expect("nonzero base");
                    i = j;
                }
            }
            toks.push((Tok::Num(value), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^(),<>=:;".contains(c) {
            toks.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    toks.push((Tok::End, chars.len()));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{c}`"))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = lhs + self.product()?;
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = lhs - self.product()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = lhs * self.power()?;
                }
                Tok::Op('/') => {
                    self.bump();
                    let rhs = self.power()?;
                    lhs = match (lhs, rhs) {
                        (Expr::Const(a), Expr::Const(b)) if !b.is_zero() => Expr::Const(&a / &b),
                        (a, b) => a / b,
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let n = self.exponent()?;
        Ok(Expr::pow(base, n))
    }

    fn exponent(&mut self) -> Result<i64> {
        let paren = *self.peek() == Tok::Op('(');
        if paren {
            self.bump();
        }
        let mut sign = 1;
        while let Tok::Op(c @ ('-' | '+')) = *self.peek() {
            if c == '-' {
                sign = -sign;
            }
            self.bump();
        }
        let pos = self.pos();
        let n = match self.bump() {
            Tok::Num(r) if r.is_integer() => r.to_string().parse::<i64>().ok().filter(|v| v.abs() <= 10_000),
            _ => None,
        };
        let Some(n) = n else {
            return Err(Error::Parse {
                pos,
                msg: "exponent must be an integer literal of size at most 10000".into(),
            });
        };
        if paren {
            self.expect(')')?;
        }
        Ok(sign * n)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(r) => Ok(Expr::Const(r)),
            Tok::Op('(') => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.named(name, pos),
            Tok::End => Err(Error::Parse {
                pos,
                msg: "unexpected end of input".into(),
            }),
            Tok::Op(c) => Err(Error::Parse {
                pos,
                msg: format!("unexpected `{c}`"),
            }),
        }
    }

    fn named(&mut self, name: String, pos: usize) -> Result<Expr> {
        if name == "x" {
            return Ok(Expr::Var);
        }
        let arity = match name.as_str() {
            "compose" => 2,
            "inverse" => 1,
            "piecewise" => return self.piecewise(),
            "plateau" => {
                self.expect('(')?;
                let at = self.pos();
                let r = const_of(&self.sum()?);
                self.expect(')')?;
                return match r {
                    Some(r) if r.is_positive() => Ok(Expr::Plateau(r)),
                    _ => Err(Error::Parse {
                        pos: at,
                        msg: "plateau radius must be a positive constant".into(),
                    }),
                };
            }
            _ if Func::from_name(&name).is_some() => 1,
            _ => return Err(Error::UnknownIdentifier { name, pos }),
        };
        self.expect('(')?;
        let mut args = vec![self.sum()?];
        while args.len() < arity {
            self.expect(',')?;
            args.push(self.sum()?);
        }
        self.expect(')')?;
        let mut args = args.into_iter();
        let first = args.next().expect("one argument");
        Ok(match name.as_str() {
            "compose" => Expr::Compose(Box::new(first), Box::new(args.next().expect("two arguments"))),
            "inverse" => Expr::Inverse(Box::new(first)),
            _ => Expr::func(Func::from_name(&name).expect("checked above"), first),
        })
    }
}

impl Parser {
    /// `<`, `<=` or `>=`.
    fn relation(&mut self) -> Result<&'static str> {
        let op = match self.bump() {
            Tok::Op('<') => "<",
            Tok::Op('>') => ">",
            _ => {
                self.at -= 1;
                return self.error("expected `<`, `<=` or `>=`");
            }
        };
        if *self.peek() == Tok::Op('=') {
            self.bump();
            return Ok(if op == "<" { "<=" } else { ">=" });
        }
        if op == ">" {
            return self.error("expected `>=`");
        }
        Ok(op)
    }

    fn piecewise(&mut self) -> Result<Expr> {
        self.expect('(')?;
        let mut bounds: Vec<(Option<Rational>, Option<Rational>)> = Vec::new();
        let mut pieces = Vec::new();
        loop {
            let at = self.pos();
            let a = self.sum()?;
            let r1 = self.relation()?;
            let b = self.sum()?;
            let bound = if *self.peek() == Tok::Op('<') {
                let r2 = self.relation()?;
                let c = self.sum()?;
                match (const_of(&a), r1, b.is_var(), r2, const_of(&c)) {
                    (Some(lo), "<=", true, "<", Some(hi)) => (Some(lo), Some(hi)),
                    _ => return Err(Error::Parse { pos: at, msg: "expected `a <= x < b`".into() }),
                }
            } else {
                match (a.is_var(), r1, const_of(&b)) {
                    (true, "<", Some(hi)) => (None, Some(hi)),
                    (true, ">=", Some(lo)) => (Some(lo), None),
                    _ => return Err(Error::Parse { pos: at, msg: "expected `x < b` or `x >= a`".into() }),
                }
            };
            self.expect(':')?;
            pieces.push(self.sum()?);
            bounds.push(bound);
            match self.bump() {
                Tok::Op(';') => continue,
                Tok::Op(')') => break,
                _ => {
                    self.at -= 1;
                    return self.error("expected `;` or `)`");
                }
            }
        }
        let n = bounds.len();
        let consistent = n >= 2
            && bounds[0].0.is_none()
            && bounds[n - 1].1.is_none()
            && bounds.windows(2).all(|w| w[0].1.is_some() && w[0].1 == w[1].0);
        if !consistent {
            return self.error("piecewise conditions must cover the line in increasing order");
        }
        let knots = bounds[..n - 1].iter().map(|b| b.1.clone().expect("checked")).collect();
        Ok(Expr::Piecewise(PiecewiseMap::new(knots, pieces)?))
    }
}

fn const_of(e: &Expr) -> Option<Rational> {
    match e {
        Expr::Const(r) => Some(r.clone()),
        Expr::Neg(a) => const_of(a).map(|r| -r),
        _ => None,
    }
}

pub fn parse_expression(text: &str) -> Result<Expr> {
    let lexer = lex(text)?;
    let mut p = Parser { toks: lexer.toks, at: 0 };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_expression(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(text: &str) -> Expr {
        parse_expression(text).unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn parses_examples() {
        assert_eq!(e("-x"), Expr::Neg(Box::new(Expr::Var)));
        assert_eq!(e("1 - x"), Expr::int(1) - Expr::Var);
        assert_eq!(e("-x - x^3"), -Expr::Var - Expr::pow(Expr::Var, 3));
        assert_eq!(e("1/2 - x"), Expr::constant(q(1, 2)) - Expr::Var);
        assert_eq!(e("-x^2"), Expr::pow(-Expr::Var, 2));
        assert_eq!(e("x^(-2)"), Expr::pow(Expr::Var, -2));
        assert_eq!(e("2.5e-1"), Expr::constant(q(1, 4)));
        assert_eq!(e("arctan(x)"), Expr::func(Func::Atan, Expr::Var));
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert_eq!(
            parse_expression("x + foo(x)"),
            Err(Error::UnknownIdentifier {
                name: "foo".into(),
                pos: 4
            })
        );
        assert!(matches!(parse_expression("x +"), Err(Error::Parse { pos: 3, .. })));
        assert!(matches!(parse_expression("x + y"), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(parse_expression("x^x"), Err(Error::Parse { pos: 2, .. })));
        assert!(matches!(parse_expression("(x"), Err(Error::Parse { pos: 2, .. })));
        assert!(matches!(parse_expression("x $"), Err(Error::Parse { pos: 2, .. })));
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "-x - x^3",
            "x + sinh(x)",
            "-(x^2) + 3/4*x",
            "(-x)^2",
            "compose(x + x^3, inverse(x + x^3))",
            "x/(1 + x^2)^(-1) - (x - 1)",
            "-3/2*x",
            "x*(-2)",
            "x - (-x)",
            "1 + (-1/2)",
            "plateau(3/2)*x + (1 - plateau(3/2))*sinh(x)",
            "piecewise(x < 0: -x; x >= 0: x^3 + x)",
            "piecewise(x < -1: x; -1 <= x < 2: 2*x + 1; x >= 2: x + 3)",
        ] {
            let parsed = e(text);
            let again = e(&parsed.to_string());
            assert_eq!(parsed, again, "{text} -> {parsed}");
        }
    }

    #[test]
    fn malformed_piecewise() {
        for text in [
            "piecewise(x >= 0: x; x < 0: -x)",
            "piecewise(x < 0: x)",
            "piecewise(x < 0: x; 1 <= x < 2: x; x >= 2: x)",
            "piecewise(x > 0: x; x >= 0: x)",
            "plateau(-1)",
            "plateau(x)",
        ] {
            assert!(matches!(parse_expression(text), Err(Error::Parse { .. })), "{text}");
        }
    }

    #[test]
    fn eval_examples() {
        assert_eq!(e("1 - x").eval(&q(1, 2)).unwrap(), q(1, 2));
        assert_eq!(e("-x - x^3").eval(&q(1, 1)).unwrap(), q(-2, 1));
        assert_eq!(e("exp(x)").eval(&q(0, 1)).unwrap(), q(1, 1));
        assert!(matches!(e("exp(x)").eval(&q(1, 1)), Err(Error::Inexact(_))));
        assert!(matches!(e("log(x)").eval(&q(0, 1)), Err(Error::Domain(_))));
        assert!(matches!(e("1/x").eval(&0.0f64), Err(Error::Domain(_))));
        let v = e("exp(x)").eval(&HpFloat::one()).unwrap();
        assert!((v.to_f64() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn inverse_is_exact_when_rational() {
        let inv = e("inverse(x + x^3)");
        assert_eq!(inv.eval(&q(10, 1)).unwrap(), q(2, 1));
        assert!(matches!(inv.eval(&q(1, 1)), Err(Error::Inexact(_))));
        let y = inv.eval(&HpFloat::one()).unwrap();
        let back = e("x + x^3").eval(&y).unwrap();
        assert!((back - HpFloat::one()).abs().to_f64() < 1e-45);
    }

    #[test]
    fn jet_examples() {
        assert_eq!(taylor_jet(&e("-x"), &q(0, 1), 3).unwrap(), JetValue::Exact("[-1, 0, 0]".parse().unwrap()));
        assert_eq!(taylor_jet(&e("1-x"), &q(1, 2), 3).unwrap(), JetValue::Exact("[-1, 0, 0]".parse().unwrap()));
        assert_eq!(
            taylor_jet(&e("-x - x^3"), &q(0, 1), 4).unwrap(),
            JetValue::Exact("[-1, 0, -1, 0]".parse().unwrap())
        );
        assert_eq!(
            taylor_jet(&e("exp(x) - 1"), &q(0, 1), 3).unwrap(),
            JetValue::Exact("[1, 1/2, 1/6]".parse().unwrap())
        );
        let approx = taylor_jet(&e("exp(x)"), &q(1, 1), 2).unwrap();
        assert!(!approx.is_exact());
        // the inverse of x + x^3 at 0 is x - x^3 + 3x^5 - ...
        assert_eq!(
            taylor_jet(&e("inverse(x + x^3)"), &q(0, 1), 5).unwrap(),
            JetValue::Exact("[1, 0, -1, 0, 3]".parse().unwrap())
        );
    }

    #[test]
    fn plateau_is_flat_at_ends() {
        let p = Expr::Plateau(q(2, 1));
        assert_eq!(p.eval(&q(1, 2)).unwrap(), q(1, 1));
        assert_eq!(p.eval(&q(-3, 1)).unwrap(), q(0, 1));
        let mid = p.eval(&HpFloat::from_rational(&q(3, 2))).unwrap().to_f64();
        assert!((mid - 0.5).abs() < 1e-15);
        let j = p.jet(&Jet::variable(HpFloat::from_rational(&q(1001, 1000)), 3)).unwrap();
        assert!(j.coeffs()[1].to_f64().abs() < 1e-100);
    }

    #[test]
    fn rational_identities() {
        assert!(certify_identical(&e("(x + 1)^2"), &e("x^2 + 2*x + 1")));
        assert!(!certify_identical(&e("(x + 1)^2"), &e("x^2 + 1")));
        assert!(certify_identical(&e("compose(1 - x, 1 - x)"), &Expr::Var));
        assert!(certify_identical(&e("x/(1 + x^2)*(1 + x^2)"), &Expr::Var));
        assert!(!certify_identical(&e("exp(x)"), &e("exp(x) + 0")));
        assert_eq!(e("compose(x^2, 1/x)").rational_degree_bound(), Some((2, 2)));
    }

    #[test]
    fn piecewise_selects_by_knot() {
        let pw = PiecewiseMap::new(vec![q(0, 1)], vec![e("2*x"), e("x")]).unwrap();
        let m = Expr::Piecewise(pw.clone());
        assert_eq!(m.eval(&q(-1, 1)).unwrap(), q(-2, 1));
        assert_eq!(m.eval(&q(0, 1)).unwrap(), q(0, 1));
        assert!(pw.knot_mismatch(2).unwrap().to_f64() > 0.5);
    }
}
