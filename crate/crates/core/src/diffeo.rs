//! Diffeomorphisms of the real line given by a closed form, a declared jet
//! at the fixed point, or both.
//!
//! Spec files hold one `key = value` per line; `#` starts a comment:
//!
//! ```text
//! degree = -1
//! expr = "-x - x^3"
//! jet = [-1, 0, -1]
//! fixed_point = 0          # or solve (default)
//! topology = boundary      # interior | boundary | unknown
//! order = 16
//! interior_radius = 1/2    # or inf; only meaningful for interior
//! ```

use std::fmt;
use std::path::Path;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{newton_bisect, parse_expression, taylor_jet, taylor_jet_hp, Expr, JetValue};
use crate::jet::Jet;
use crate::scalar::{HpFloat, Rational, Real};
use crate::series::parse_series_literal;
use crate::Series;

/// Where the fixed point sits relative to the fixed-point set of the square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Interior,
    Boundary,
    Unknown,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Interior => "interior",
            Topology::Boundary => "boundary",
            Topology::Unknown => "unknown",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Topology::Interior),
            "boundary" => Ok(Topology::Boundary),
            "unknown" => Ok(Topology::Unknown),
            other => Err(Error::InvalidSpec(format!("unknown topology `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FixedPointDecl {
    Exact(Rational),
    Solve,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FixedPoint {
    Exact(Rational),
    Approx(HpFloat),
}

impl FixedPoint {
    pub fn to_hp(&self) -> HpFloat {
        match self {
            FixedPoint::Exact(r) => HpFloat::from_rational(r),
            FixedPoint::Approx(h) => h.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FixedPoint::Exact(r) => r.is_zero(),
            FixedPoint::Approx(h) => h.is_zero(),
        }
    }

    pub fn as_expr(&self) -> Expr {
        match self {
            FixedPoint::Exact(r) => Expr::Const(r.clone()),
            FixedPoint::Approx(h) => Expr::Real(h.clone()),
        }
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixedPoint::Exact(r) => write!(f, "{r}"),
            FixedPoint::Approx(h) => write!(f, "{}", h.to_decimal(40)),
        }
    }
}

/// Half-width of an interval around the fixed point on which the square is
/// the identity.
#[derive(Clone, Debug, PartialEq)]
pub enum Radius {
    Finite(Rational),
    Infinite,
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => write!(f, "{r}"),
            Radius::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffeoSpec {
    pub degree: i8,
    pub body: Option<Expr>,
    /// Declared jet at the fixed point; entries past its length read as 0.
    pub jet: Option<Series>,
    pub fixed_point: FixedPointDecl,
    pub topology: Topology,
    pub interior_radius: Option<Radius>,
    pub order: usize,
}

/// Residual and sampling tolerance for fixed points.
pub const FIXED_POINT_TOL: f64 = 1e-40;
/// Sampling window for the derivative-sign check.
pub const DEGREE_SAMPLE_HALF_WIDTH: i64 = 10;

impl DiffeoSpec {
    pub fn from_expr(degree: i8, body: Expr, order: usize) -> Self {
        DiffeoSpec {
            degree,
            body: Some(body),
            jet: None,
            fixed_point: FixedPointDecl::Solve,
            topology: Topology::Unknown,
            interior_radius: None,
            order,
        }
    }

    pub fn from_jet(degree: i8, jet: Series) -> Self {
        let order = jet.order();
        DiffeoSpec {
            degree,
            body: None,
            jet: Some(jet),
            fixed_point: FixedPointDecl::Solve,
            topology: Topology::Unknown,
            interior_radius: None,
            order,
        }
    }

    pub fn parse_body(degree: i8, text: &str, order: usize) -> Result<Self> {
        Ok(Self::from_expr(degree, parse_expression(text)?, order))
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn with_radius(mut self, radius: Radius) -> Self {
        self.interior_radius = Some(radius);
        self
    }

    pub fn with_fixed_point(mut self, p: Rational) -> Self {
        self.fixed_point = FixedPointDecl::Exact(p);
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    /// Declared jet padded or truncated to order `n`.
    pub fn declared_jet(&self, n: usize) -> Option<Series> {
        self.jet.as_ref().map(|j| j.resize(n))
    }

    /// Checks the degree value, presence of data, multiplier sign, the
    /// sampled derivative sign and body/jet agreement.
    pub fn validate(&self) -> Result<()> {
        if self.degree != 1 && self.degree != -1 {
            return Err(Error::InvalidSpec(format!("degree must be 1 or -1, got {}", self.degree)));
        }
        if self.order == 0 {
            return Err(Error::InvalidSpec("order must be positive".into()));
        }
        if self.body.is_none() && self.jet.is_none() {
            return Err(Error::InvalidSpec("spec needs `expr` or `jet`".into()));
        }
        if let Some(j) = &self.jet {
            let m = j.multiplier();
            if m.is_zero() || m.signum() != self.degree as i32 {
                return Err(Error::InvalidSpec(format!(
                    "jet multiplier {m} does not match degree {}",
                    self.degree
                )));
            }
        }
        degree_of(self)?;
        if let (Some(_), Some(declared)) = (&self.body, &self.jet) {
            let computed = t0_jet(self, self.order)?;
            let declared = JetValue::Exact(declared.resize(self.order));
            if compare_jets(&computed, &declared)? == JetComparison::Different {
                return Err(Error::InvalidSpec(format!(
                    "declared jet {declared} disagrees with the expression jet {computed}"
                )));
            }
        }
        Ok(())
    }

    /// `x ↦ -f(-x)`; the fixed point moves to `-p`.
    pub fn reflect(&self) -> DiffeoSpec {
        let mut out = self.clone();
        out.body = self.body.clone().map(Expr::reflect);
        out.jet = self.jet.as_ref().map(reflect_series);
        out.fixed_point = match &self.fixed_point {
            FixedPointDecl::Exact(p) => FixedPointDecl::Exact(-p.clone()),
            FixedPointDecl::Solve => FixedPointDecl::Solve,
        };
        out
    }

    /// Spec-file rendering.
    pub fn to_spec_text(&self) -> String {
        let mut out = format!("degree = {}\n", self.degree);
        if let Some(b) = &self.body {
            out.push_str(&format!("expr = \"{b}\"\n"));
        }
        if let Some(j) = &self.jet {
            out.push_str(&format!("jet = {j}\n"));
        }
        if let FixedPointDecl::Exact(p) = &self.fixed_point {
            out.push_str(&format!("fixed_point = {p}\n"));
        }
        out.push_str(&format!("topology = {}\n", self.topology.as_str()));
        if let Some(r) = &self.interior_radius {
            out.push_str(&format!("interior_radius = {r}\n"));
        }
        out.push_str(&format!("order = {}\n", self.order));
        out
    }
}

/// `-S(-X)`: coefficient `k` picks up `(-1)^(k+1)`.
pub fn reflect_series(s: &Series) -> Series {
    let mut out = s.clone();
    for k in (2..=s.order()).step_by(2) {
        out.set_coeff(k, -s.coeff(k).clone());
    }
    out
}

// ---------------------------------------------------------------------------
// Spec files
// ---------------------------------------------------------------------------

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\''))) {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Parses spec-file text. The order is the explicit `order` key, else the
/// declared jet length, else `default_order`.
pub fn parse_spec(text: &str, default_order: usize) -> Result<DiffeoSpec> {
    let mut degree = None;
    let mut body = None;
    let mut jet: Option<Series> = None;
    let mut fixed_point = None;
    let mut topology = None;
    let mut order = None;
    let mut radius = None;
    let mut seen = std::collections::BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| Error::InvalidSpec(format!("line {}: {msg}", lineno + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at("expected `key = value`".into()))?;
        let key = key.trim();
        let value = unquote(value);
        if !seen.insert(key.to_string()) {
            return Err(at(format!("duplicate key `{key}`")));
        }
        match key {
            "degree" => {
                degree = Some(match value {
                    "-1" => -1,
                    "1" | "+1" => 1,
                    other => return Err(at(format!("degree must be 1 or -1, got `{other}`"))),
                })
            }
            "expr" => body = Some(parse_expression(value).map_err(|e| at(format!("expr: {e}")))?),
            "jet" => jet = Some(parse_series_literal(value).map_err(|e| at(format!("jet: {e}")))?),
            "fixed_point" => {
                fixed_point = Some(if value == "solve" {
                    FixedPointDecl::Solve
                } else {
                    FixedPointDecl::Exact(value.parse().map_err(|e| at(format!("fixed_point: {e}")))?)
                })
            }
            "topology" => topology = Some(value.parse().map_err(|e: Error| at(e.to_string()))?),
            "order" => {
                let n: usize = value.parse().map_err(|_| at(format!("order must be a positive integer, got `{value}`")))?;
                if n == 0 {
                    return Err(at("order must be positive".into()));
                }
                order = Some(n)
            }
            "interior_radius" => {
                radius = Some(if value == "inf" {
                    Radius::Infinite
                } else {
                    let r: Rational = value.parse().map_err(|e| at(format!("interior_radius: {e}")))?;
                    if !r.is_positive() {
                        return Err(at("interior_radius must be positive".into()));
                    }
                    Radius::Finite(r)
                })
            }
            other => return Err(at(format!("unknown key `{other}`"))),
        }
    }
    let degree = degree.ok_or_else(|| Error::InvalidSpec("missing `degree`".into()))?;
    let order = order
        .or_else(|| jet.as_ref().map(|j| j.order()))
        .unwrap_or(default_order);
    let spec = DiffeoSpec {
        degree,
        body,
        jet,
        fixed_point: fixed_point.unwrap_or(FixedPointDecl::Solve),
        topology: topology.unwrap_or(Topology::Unknown),
        interior_radius: radius,
        order,
    };
    if spec.body.is_none() && spec.jet.is_none() {
        return Err(Error::InvalidSpec("spec needs `expr` or `jet`".into()));
    }
    Ok(spec)
}

pub fn load_spec(path: impl AsRef<Path>, default_order: usize) -> Result<DiffeoSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
    parse_spec(&text, default_order)
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

/// Degree from the data: sign of the sampled derivative on
/// `[-10, 10]` (2001 points) for bodies, sign of the multiplier for jets.
pub fn degree_of(d: &DiffeoSpec) -> Result<i8> {
    let observed = match &d.body {
        Some(body) => {
            let mut sign = 0i8;
            for i in 0..=2000 {
                let x = -(DEGREE_SAMPLE_HALF_WIDTH as f64) + i as f64 * 0.01;
                let j = body
                    .jet(&Jet::variable(x, 1))
                    .map_err(|e| Error::NotDiffeomorphism(format!("at x = {x}: {e}")))?;
                let dv = j.coeffs()[1];
                let s = if dv > 0.0 {
                    1
                } else if dv < 0.0 {
                    -1
                } else {
                    0
                };
                if s == 0 || (sign != 0 && s != sign) {
                    return Err(Error::NotDiffeomorphism(format!("derivative changes sign near x = {x}")));
                }
                sign = s;
            }
            sign
        }
        None => {
            let j = d.jet.as_ref().expect("validated spec");
            j.multiplier().signum() as i8
        }
    };
    if observed != d.degree {
        return Err(Error::DegreeMismatch {
            declared: d.degree,
            observed,
        });
    }
    Ok(observed)
}

/// The fixed point of a degree −1 map: the declared one after a residual
/// check, else the root of `f(x) - x`, returned exactly when it is a small
/// rational. Jet-only specs sit at 0.
pub fn fixed_point_of(d: &DiffeoSpec) -> Result<FixedPoint> {
    if d.degree != -1 {
        return Err(Error::Precondition("fixed points are only unique for degree -1".into()));
    }
    let Some(body) = &d.body else {
        return Ok(match &d.fixed_point {
            FixedPointDecl::Exact(p) => FixedPoint::Exact(p.clone()),
            FixedPointDecl::Solve => FixedPoint::Exact(Rational::zero()),
        });
    };
    let tol = HpFloat::from_f64(FIXED_POINT_TOL);
    let residual = |p: &HpFloat| -> Result<HpFloat> { Ok((body.eval(p)? - p.clone()).abs()) };
    match &d.fixed_point {
        FixedPointDecl::Exact(p) => {
            if let Ok(v) = body.eval(p) {
                if &v == p {
                    return Ok(FixedPoint::Exact(p.clone()));
                }
            }
            let r = residual(&HpFloat::from_rational(p))?;
            if r > tol {
                return Err(Error::FixedPoint(format!(
                    "|f({p}) - {p}| = {} exceeds {FIXED_POINT_TOL:e}",
                    r.to_decimal(6)
                )));
            }
            Ok(FixedPoint::Exact(p.clone()))
        }
        FixedPointDecl::Solve => {
            let shifted = body.clone() - Expr::Var;
            let y = newton_bisect(&shifted, &HpFloat::zero())?;
            if let Some(p) = Rational::approximate(&y, 1_000_000) {
                if matches!(body.eval(&p), Ok(v) if v == p) {
                    return Ok(FixedPoint::Exact(p));
                }
            }
            let r = residual(&y)?;
            if r > tol {
                return Err(Error::FixedPoint(format!(
                    "root finding stalled with residual {}",
                    r.to_decimal(6)
                )));
            }
            Ok(FixedPoint::Approx(y))
        }
    }
}

/// Conjugates by the translation `x ↦ x + p` so that the fixed point is 0.
/// Declared jets are already at the fixed point and are kept.
pub fn normalize_to_origin(d: &DiffeoSpec) -> Result<DiffeoSpec> {
    let p = fixed_point_of(d)?;
    let mut out = d.clone();
    out.fixed_point = FixedPointDecl::Exact(Rational::zero());
    if p.is_zero() {
        return Ok(out);
    }
    if let Some(body) = &d.body {
        let shift = Expr::Var + p.as_expr();
        out.body = Some(Expr::compose(body.clone(), shift) - p.as_expr());
    }
    Ok(out)
}

/// `T_p f` at the fixed point, to order `n`.
pub fn t0_jet(d: &DiffeoSpec, n: usize) -> Result<JetValue> {
    match &d.body {
        Some(body) => {
            if d.degree != -1 {
                let p = match &d.fixed_point {
                    FixedPointDecl::Exact(p) => p.clone(),
                    FixedPointDecl::Solve => Rational::zero(),
                };
                return taylor_jet(body, &p, n);
            }
            match fixed_point_of(d)? {
                FixedPoint::Exact(p) => taylor_jet(body, &p, n),
                FixedPoint::Approx(p) => taylor_jet_hp(body, &p, n),
            }
        }
        None => Ok(JetValue::Exact(d.declared_jet(n).expect("validated spec"))),
    }
}

/// `T_0(f ∘ f)` of a normalized spec.
pub fn square_jet(d: &DiffeoSpec, n: usize) -> Result<JetValue> {
    Ok(match t0_jet(d, n)? {
        JetValue::Exact(s) => JetValue::Exact(s.comp_power_nonneg(2)),
        JetValue::Approx(s) => JetValue::Approx(s.comp_power_nonneg(2)),
    })
}

/// Tolerance for comparing jets that are only known to working precision.
pub const JET_TOL: f64 = 1e-40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetComparison {
    Equal,
    /// Within [`JET_TOL`] but not exactly comparable.
    WithinTolerance,
    Different,
}

pub fn compare_jets(a: &JetValue, b: &JetValue) -> Result<JetComparison> {
    if let (JetValue::Exact(x), JetValue::Exact(y)) = (a, b) {
        return Ok(if x == y {
            JetComparison::Equal
        } else {
            JetComparison::Different
        });
    }
    let d = a.to_hp().max_abs_diff(&b.to_hp())?;
    Ok(if d <= HpFloat::from_f64(JET_TOL) {
        JetComparison::WithinTolerance
    } else {
        JetComparison::Different
    })
}

pub fn is_identity_jet(a: &JetValue) -> Result<JetComparison> {
    compare_jets(a, &JetValue::Exact(Series::identity(a.order())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn spec(degree: i8, text: &str) -> DiffeoSpec {
        DiffeoSpec::parse_body(degree, text, 4).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degree_of(&spec(-1, "-x - x^3")).unwrap(), -1);
        assert_eq!(degree_of(&spec(1, "x + sinh(x)")).unwrap(), 1);
        assert!(matches!(degree_of(&spec(-1, "-x + x^3")), Err(Error::NotDiffeomorphism(_))));
        assert!(matches!(degree_of(&spec(1, "-x")), Err(Error::DegreeMismatch { .. })));
        assert_eq!(degree_of(&DiffeoSpec::from_jet(-1, "[-1, 1]".parse().unwrap())).unwrap(), -1);
    }

    #[test]
    fn fixed_point_examples() {
        assert_eq!(fixed_point_of(&spec(-1, "-x")).unwrap(), FixedPoint::Exact(q(0, 1)));
        assert_eq!(fixed_point_of(&spec(-1, "1 - x")).unwrap(), FixedPoint::Exact(q(1, 2)));
        assert_eq!(fixed_point_of(&spec(-1, "-x - x^3")).unwrap(), FixedPoint::Exact(q(0, 1)));
        // -x - x^3 + 1 has an irrational fixed point
        let p = fixed_point_of(&spec(-1, "1 - x - x^3")).unwrap();
        let FixedPoint::Approx(v) = p else { panic!("expected approximate root") };
        let r = (v.clone() * v.clone() * v.clone() + v.clone() + v - HpFloat::from_f64(1.0)).abs();
        assert!(r.to_f64() < 1e-40);
        let bad = spec(-1, "1 - x").with_fixed_point(q(0, 1));
        assert!(matches!(fixed_point_of(&bad), Err(Error::FixedPoint(_))));
    }

    #[test]
    fn normalization_examples() {
        let n = normalize_to_origin(&spec(-1, "1 - x")).unwrap();
        assert_eq!(t0_jet(&n, 3).unwrap(), JetValue::Exact("[-1, 0, 0]".parse().unwrap()));
        assert_eq!(n.body.as_ref().unwrap().eval(&q(0, 1)).unwrap(), q(0, 1));
        assert_eq!(n.body.as_ref().unwrap().eval(&q(1, 1)).unwrap(), q(-1, 1));
        let same = spec(-1, "-x - x^3");
        assert_eq!(normalize_to_origin(&same).unwrap().body, same.body);
        let three = normalize_to_origin(&spec(-1, "3 - x")).unwrap();
        assert_eq!(fixed_point_of(&three).unwrap(), FixedPoint::Exact(q(0, 1)));
        assert_eq!(normalize_to_origin(&three).unwrap(), three);
    }

    #[test]
    fn square_jet_examples() {
        assert_eq!(square_jet(&spec(-1, "-x"), 3).unwrap(), JetValue::Exact(Series::identity(3)));
        assert_eq!(
            square_jet(&spec(-1, "-x - x^3"), 4).unwrap(),
            JetValue::Exact("[1, 0, 2, 0]".parse().unwrap())
        );
    }

    #[test]
    fn spec_file_round_trip() {
        let text = "# fixture\ndegree = -1\nexpr = \"-x - x^3\"   # cubic\njet = [-1, 0, -1]\ntopology = boundary\n";
        let s = parse_spec(text, 16).unwrap();
        assert_eq!(s.order, 3);
        assert_eq!(s.topology, Topology::Boundary);
        s.validate().unwrap();
        assert_eq!(parse_spec(&s.to_spec_text(), 16).unwrap(), s);
        assert!(parse_spec("degree = -1\ncolour = red\njet = [-1]\n", 16).is_err());
        assert!(parse_spec("degree = -1\njet = [-1]\njet = [-1]\n", 16).is_err());
        assert!(parse_spec("degree = -1\n", 16).is_err());
        assert!(parse_spec("degree = 2\njet = [2]\n", 16).is_err());
        let bad = parse_spec("degree = -1\nexpr = -x\njet = [-1, 1]\n", 16).unwrap();
        assert!(bad.validate().is_err());
        let wrong_sign = parse_spec("degree = -1\njet = [1]\n", 16).unwrap();
        assert!(wrong_sign.validate().is_err());
    }

    #[test]
    fn reflection_flips_even_coefficients() {
        let s: Series = "[-1, 1, -1, 2]".parse().unwrap();
        assert_eq!(reflect_series(&s), "[-1, -1, -1, -2]".parse().unwrap());
        let f = spec(-1, "-x + x^2/10 - x^3");
        let r = f.reflect();
        let a = t0_jet(&r, 3).unwrap();
        assert_eq!(a, JetValue::Exact(reflect_series(&t0_jet(&f, 3).unwrap().exact().unwrap().clone())));
    }
}
