//! Coefficient types and the trait stack the series, jet and expression code
//! is generic over.
//!
//! * [`Ring`]: enough to compose series (used by the symbolic [`Poly`](crate::poly::Poly) ring).
//! * [`Field`]: adds division, needed for inversion and linear solves.
//! * [`Real`]: ordered field with elementary functions, used for evaluation
//!   and Taylor jets.
//!
//! Concrete carriers are [`Rational`] (exact), [`HpFloat`] (MPFR-backed, at the
//! thread's working precision) and plain `f64`.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_traits::{One, Zero};
use rug::Float;

use crate::error::{Error, Result};

pub trait Ring:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn from_i64(n: i64) -> Self;
}

pub trait Field: Ring + Div<Output = Self> {
    fn from_rational(r: &Rational) -> Self;
}

/// Ordered field with the elementary functions used by the expression
/// language. The `try_*` functions return `None` when the value is not
/// representable in the carrier (e.g. `exp(1)` as a rational).
pub trait Real: Field + PartialOrd + fmt::Display {
    /// True when arithmetic in this carrier never rounds.
    const EXACT: bool;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
    fn to_f64(&self) -> f64;
    fn to_hp(&self) -> HpFloat;
    /// Converts a high-precision value into this carrier. Exact carriers only
    /// accept values they can recognise as small rationals.
    fn from_hp(x: &HpFloat) -> Option<Self>;
    fn try_exp(&self) -> Option<Self>;
    fn try_ln(&self) -> Option<Self>;
    fn try_sinh(&self) -> Option<Self>;
    fn try_cosh(&self) -> Option<Self>;
    fn try_atan(&self) -> Option<Self>;
    /// Unit roundoff of the carrier (zero for exact carriers).
    fn epsilon() -> f64;
}

// ---------------------------------------------------------------------------
// Working precision
// ---------------------------------------------------------------------------

pub const DEFAULT_PRECISION_DIGITS: u32 = 50;

thread_local! {
    static WORKING_DIGITS: Cell<u32> = const { Cell::new(DEFAULT_PRECISION_DIGITS) };
}

/// Bits of mantissa used for a given number of decimal digits (plus guard bits).
pub fn digits_to_bits(digits: u32) -> u32 {
    ((digits as f64) * std::f64::consts::LOG2_10).ceil() as u32 + 16
}

pub fn precision_digits() -> u32 {
    WORKING_DIGITS.with(|d| d.get())
}

pub fn working_bits() -> u32 {
    digits_to_bits(precision_digits())
}

/// Sets the working precision of the current thread.
pub fn set_precision_digits(digits: u32) {
    WORKING_DIGITS.with(|d| d.set(digits.max(1)));
}

/// Runs `f` with a temporary working precision on this thread.
pub fn with_precision<R>(digits: u32, f: impl FnOnce() -> R) -> R {
    let old = precision_digits();
    set_precision_digits(digits);
    let out = f();
    set_precision_digits(old);
    out
}

// ---------------------------------------------------------------------------
// Rational
// ---------------------------------------------------------------------------

/// Exact rational number.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rational(pub rug::Rational);

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rational(rug::Rational::from((num, den)))
    }

    pub fn from_int(n: i64) -> Self {
        Rational(rug::Rational::from(n))
    }

    pub fn is_integer(&self) -> bool {
        *self.0.denom() == 1
    }

    pub fn is_negative(&self) -> bool {
        self.0.cmp0() == Ordering::Less
    }

    pub fn is_positive(&self) -> bool {
        self.0.cmp0() == Ordering::Greater
    }

    pub fn signum(&self) -> i32 {
        match self.0.cmp0() {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(Rational(self.0.clone().recip()))
    }

    pub fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = Rational::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        Ok(acc)
    }

    /// Best rational approximation of `x` with denominator at most `max_den`,
    /// via continued-fraction convergents.
    pub fn approximate(x: &HpFloat, max_den: u64) -> Option<Self> {
        let exact = x.0.to_rational()?;
        let (mut p0, mut q0) = (rug::Integer::from(0), rug::Integer::from(1));
        let (mut p1, mut q1) = (rug::Integer::from(1), rug::Integer::from(0));
        let mut rest = exact.clone();
        for _ in 0..64 {
            let a = rest.clone().floor();
            let a = a.numer().clone();
            let p2 = a.clone() * &p1 + &p0;
            let q2 = a.clone() * &q1 + &q0;
            if q2 > max_den {
                break;
            }
            p0 = std::mem::replace(&mut p1, p2);
            q0 = std::mem::replace(&mut q1, q2);
            let frac = rest - rug::Rational::from(a);
            if frac == 0 {
                break;
            }
            rest = frac.recip();
        }
        if q1 == 0 {
            return None;
        }
        Some(Rational(rug::Rational::from((p1, q1))))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.numer().to_string_radix(16).hash(state);
        self.0.denom().to_string_radix(16).hash(state);
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `p`, `p/q` and plain decimals such as `-0.25` (read exactly).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::Parse {
            pos: 0,
            msg: format!("invalid rational literal `{t}`"),
        };
        if t.is_empty() {
            return Err(bad());
        }
        if let Some((int, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.contains('/') {
                return Err(bad());
            }
            let neg = int.starts_with('-');
            let int_digits = int.trim_start_matches(['-', '+']);
            if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let whole: rug::Integer = if int_digits.is_empty() {
                rug::Integer::new()
            } else {
                int_digits.parse().map_err(|_| bad())?
            };
            let num: rug::Integer = frac.parse().map_err(|_| bad())?;
            let den = rug::Integer::from(rug::Integer::u_pow_u(10, frac.len() as u32));
            let mut r = rug::Rational::from(whole) + rug::Rational::from((num, den));
            if neg {
                r = -r;
            }
            return Ok(Rational(r));
        }
        let ok_chars = t
            .bytes()
            .enumerate()
            .all(|(i, b)| b.is_ascii_digit() || b == b'/' || ((b == b'-' || b == b'+') && i == 0));
        if !ok_chars || t.ends_with('/') {
            return Err(bad());
        }
        let r: rug::Rational = t.trim_start_matches('+').parse().map_err(|_| bad())?;
        Ok(Rational(r))
    }
}

macro_rules! rational_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational(rug::Rational::from(self.0.$m(rhs.0)))
            }
        }
        impl<'a> $tr<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $m(self, rhs: &'a Rational) -> Rational {
                Rational(rug::Rational::from((&self.0).$m(&rhs.0)))
            }
        }
    };
}
rational_binop!(Add, add);
rational_binop!(Sub, sub);
rational_binop!(Mul, mul);
rational_binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}
impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}
impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        self.0 *= &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}
impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(rug::Rational::from(-&self.0))
    }
}

impl Zero for Rational {
    fn zero() -> Self {
        Rational(rug::Rational::new())
    }
    fn is_zero(&self) -> bool {
        self.0.cmp0() == Ordering::Equal
    }
}

impl One for Rational {
    fn one() -> Self {
        Rational(rug::Rational::from(1))
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

impl Ring for Rational {
    fn from_i64(n: i64) -> Self {
        Rational::from_int(n)
    }
}

impl Field for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
}

impl Real for Rational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn to_hp(&self) -> HpFloat {
        HpFloat::from_rational(self)
    }
    fn from_hp(x: &HpFloat) -> Option<Self> {
        Rational::approximate(x, 1_000_000)
    }
    fn try_exp(&self) -> Option<Self> {
        self.is_zero().then(Rational::one)
    }
    fn try_ln(&self) -> Option<Self> {
        self.is_one().then(Rational::zero)
    }
    fn try_sinh(&self) -> Option<Self> {
        self.is_zero().then(Rational::zero)
    }
    fn try_cosh(&self) -> Option<Self> {
        self.is_zero().then(Rational::one)
    }
    fn try_atan(&self) -> Option<Self> {
        self.is_zero().then(Rational::zero)
    }
    fn epsilon() -> f64 {
        0.0
    }
}

// ---------------------------------------------------------------------------
// HpFloat
// ---------------------------------------------------------------------------

/// MPFR float carrying its own precision; binary operations use the larger
/// of the two operand precisions. Constructors use the thread's working
/// precision.
#[derive(Clone)]
pub struct HpFloat(pub Float);

impl HpFloat {
    pub fn from_f64(x: f64) -> Self {
        HpFloat(Float::with_val(working_bits(), x))
    }

    pub fn from_rational(r: &Rational) -> Self {
        HpFloat(Float::with_val(working_bits(), &r.0))
    }

    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative() && !self.0.is_zero()
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        if self.0.is_zero() {
            return "0".into();
        }
        format!("{:.*e}", digits.saturating_sub(1), self.0)
    }

    pub fn max(self, other: HpFloat) -> HpFloat {
        if other > self {
            other
        } else {
            self
        }
    }

    fn bits_with(&self, other: &HpFloat) -> u32 {
        self.0.prec().max(other.0.prec())
    }
}

impl PartialEq for HpFloat {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for HpFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for HpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(precision_digits() as usize))
    }
}

impl fmt::Debug for HpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(20))
    }
}

macro_rules! hp_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for HpFloat {
            type Output = HpFloat;
            fn $m(self, rhs: HpFloat) -> HpFloat {
                let bits = self.bits_with(&rhs);
                HpFloat(Float::with_val(bits, (&self.0).$m(&rhs.0)))
            }
        }
        impl<'a> $tr<&'a HpFloat> for &'a HpFloat {
            type Output = HpFloat;
            fn $m(self, rhs: &'a HpFloat) -> HpFloat {
                let bits = self.bits_with(rhs);
                HpFloat(Float::with_val(bits, (&self.0).$m(&rhs.0)))
            }
        }
    };
}
hp_binop!(Add, add);
hp_binop!(Sub, sub);
hp_binop!(Mul, mul);
hp_binop!(Div, div);

impl Neg for HpFloat {
    type Output = HpFloat;
    fn neg(self) -> HpFloat {
        HpFloat(-self.0)
    }
}

impl Zero for HpFloat {
    fn zero() -> Self {
        HpFloat(Float::with_val(working_bits(), 0))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for HpFloat {
    fn one() -> Self {
        HpFloat(Float::with_val(working_bits(), 1))
    }
}

impl Ring for HpFloat {
    fn from_i64(n: i64) -> Self {
        HpFloat(Float::with_val(working_bits(), n))
    }
}

impl Field for HpFloat {
    fn from_rational(r: &Rational) -> Self {
        HpFloat::from_rational(r)
    }
}

impl Real for HpFloat {
    const EXACT: bool = false;

    fn abs(&self) -> Self {
        HpFloat(self.0.clone().abs())
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn to_hp(&self) -> HpFloat {
        self.clone()
    }
    fn from_hp(x: &HpFloat) -> Option<Self> {
        Some(x.clone())
    }
    fn try_exp(&self) -> Option<Self> {
        Some(HpFloat(self.0.clone().exp()))
    }
    fn try_ln(&self) -> Option<Self> {
        (self.0 > 0).then(|| HpFloat(self.0.clone().ln()))
    }
    fn try_sinh(&self) -> Option<Self> {
        Some(HpFloat(self.0.clone().sinh()))
    }
    fn try_cosh(&self) -> Option<Self> {
        Some(HpFloat(self.0.clone().cosh()))
    }
    fn try_atan(&self) -> Option<Self> {
        Some(HpFloat(self.0.clone().atan()))
    }
    fn epsilon() -> f64 {
        2f64.powi(-(working_bits() as i32))
    }
}

// ---------------------------------------------------------------------------
// f64
// ---------------------------------------------------------------------------

impl Ring for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }
}

impl Field for f64 {
    fn from_rational(r: &Rational) -> Self {
        r.to_f64()
    }
}

impl Real for f64 {
    const EXACT: bool = false;

    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_hp(&self) -> HpFloat {
        HpFloat::from_f64(*self)
    }
    fn from_hp(x: &HpFloat) -> Option<Self> {
        Some(x.0.to_f64())
    }
    fn try_exp(&self) -> Option<Self> {
        Some(f64::exp(*self))
    }
    fn try_ln(&self) -> Option<Self> {
        (*self > 0.0).then(|| f64::ln(*self))
    }
    fn try_sinh(&self) -> Option<Self> {
        Some(f64::sinh(*self))
    }
    fn try_cosh(&self) -> Option<Self> {
        Some(f64::cosh(*self))
    }
    fn try_atan(&self) -> Option<Self> {
        Some(f64::atan(*self))
    }
    fn epsilon() -> f64 {
        f64::EPSILON
    }
}
