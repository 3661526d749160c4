//! Conjugacy decisions for orientation-reversing diffeomorphisms of ℝ and the
//! explicit conjugator constructions behind them.
//!
//! Conventions: `h` conjugates `f` to `g` when `f = h⁻¹ ∘ g ∘ h`, i.e.
//! `h ∘ f = g ∘ h`. Every certificate returned here satisfies that identity
//! in the coordinates of the input specs.

use std::fmt;

use num_traits::Zero;
use serde::Serialize;

use crate::diffeo::{
    compare_jets, fixed_point_of, is_identity_jet, normalize_to_origin, square_jet, t0_jet, DiffeoSpec, FixedPoint,
    JetComparison, Radius, Topology,
};
use crate::error::{Error, Result};
use crate::expr::{certify_identical, Expr, JetValue, PiecewiseMap};
use crate::scalar::{Rational, Real};
use crate::verify::{check_conjugacy_numeric, check_equal_numeric, check_increasing, Grid, GridCheckReport};
use crate::Series;

/// Tolerance for numeric verification of certificates.
pub const CERT_TOL: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Conjugate,
    NotConjugate,
    UndeterminedAtOrder,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Conjugate => "CONJUGATE",
            Status::NotConjugate => "NOT_CONJUGATE",
            Status::UndeterminedAtOrder => "UNDETERMINED_AT_ORDER",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    #[serde(rename = "CASE1_NONINVOLUTIVE_JET")]
    Case1NoninvolutiveJet,
    #[serde(rename = "CASE2_INTERIOR")]
    Case2Interior,
    #[serde(rename = "CASE3_BOUNDARY")]
    Case3Boundary,
    /// Involutive jet but no declared topology to split cases 2 and 3.
    #[serde(rename = "TOPOLOGY_UNKNOWN")]
    TopologyUnknown,
    #[serde(rename = "INVOLUTION")]
    Involution,
    #[serde(rename = "ORIENTATION_REDUCED")]
    OrientationReduced,
    #[serde(rename = "PRECONDITION_FAILED")]
    PreconditionFailed,
    /// Both specs denote the same map.
    #[serde(rename = "IDENTICAL")]
    Identical,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Case1NoninvolutiveJet => "CASE1_NONINVOLUTIVE_JET",
            CaseTag::Case2Interior => "CASE2_INTERIOR",
            CaseTag::Case3Boundary => "CASE3_BOUNDARY",
            CaseTag::TopologyUnknown => "TOPOLOGY_UNKNOWN",
            CaseTag::Involution => "INVOLUTION",
            CaseTag::OrientationReduced => "ORIENTATION_REDUCED",
            CaseTag::PreconditionFailed => "PRECONDITION_FAILED",
            CaseTag::Identical => "IDENTICAL",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateForm {
    Closed,
    Piecewise,
    /// Only the jet at the fixed point is known; existence follows from the
    /// case analysis.
    JetOnly,
}

impl CertificateForm {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateForm::Closed => "closed",
            CertificateForm::Piecewise => "piecewise",
            CertificateForm::JetOnly => "jet_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugatorCertificate {
    /// Which map this is: `psi`, `k`, `h`, ...
    pub role: String,
    pub form: CertificateForm,
    #[serde(serialize_with = "ser_opt_display")]
    pub expr: Option<Expr>,
    /// Jet at the fixed point of the source map.
    #[serde(serialize_with = "ser_opt_display")]
    pub jet: Option<JetValue>,
    pub check: Option<GridCheckReport>,
}

fn ser_opt_display<T: fmt::Display, S: serde::Serializer>(v: &Option<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.collect_str(x),
        None => s.serialize_none(),
    }
}

impl ConjugatorCertificate {
    fn closed(role: &str, expr: Expr, jet: Option<JetValue>) -> Self {
        let form = if contains_piecewise(&expr) {
            CertificateForm::Piecewise
        } else {
            CertificateForm::Closed
        };
        ConjugatorCertificate {
            role: role.into(),
            form,
            expr: Some(expr),
            jet,
            check: None,
        }
    }

    fn jet_only(role: &str, jet: JetValue) -> Self {
        ConjugatorCertificate {
            role: role.into(),
            form: CertificateForm::JetOnly,
            expr: None,
            jet: Some(jet),
            check: None,
        }
    }
}

fn contains_piecewise(e: &Expr) -> bool {
    match e {
        Expr::Piecewise(_) => true,
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) | Expr::Inverse(a) => contains_piecewise(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Compose(a, b) => {
            contains_piecewise(a) || contains_piecewise(b)
        }
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugacyVerdict {
    pub status: Status,
    pub case_tag: CaseTag,
    pub order_used: usize,
    pub certificate: Option<ConjugatorCertificate>,
    pub notes: Vec<String>,
}

impl ConjugacyVerdict {
    fn new(status: Status, case_tag: CaseTag, order_used: usize) -> Self {
        ConjugacyVerdict {
            status,
            case_tag,
            order_used,
            certificate: None,
            notes: Vec::new(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    fn precondition(order: usize, why: impl Into<String>) -> Self {
        ConjugacyVerdict::new(Status::UndeterminedAtOrder, CaseTag::PreconditionFailed, order).note(why)
    }

    /// Largest numeric residual of the attached certificate, if checked.
    pub fn residual(&self) -> Option<&GridCheckReport> {
        self.certificate.as_ref().and_then(|c| c.check.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    /// Overrides the order taken from the specs.
    pub order: Option<usize>,
    pub grid: Grid,
    pub tol: f64,
    /// Conjugates the squares: `g` is replaced by `h1⁻¹ ∘ g ∘ h1`.
    pub h1: Option<Expr>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            order: None,
            grid: Grid::default(),
            tol: CERT_TOL,
            h1: None,
        }
    }
}

impl EngineOptions {
    fn order_for(&self, f: &DiffeoSpec, g: &DiffeoSpec) -> usize {
        self.order.unwrap_or(f.order.max(g.order))
    }
}

// ---------------------------------------------------------------------------
// Guards and constructions
// ---------------------------------------------------------------------------

/// Jet-level centraliser guard: a conjugator commuting with a square whose
/// jet is `X` at a boundary fixed point must itself have jet `X`.
pub fn kopell_guard(h_jet: &Series, fsq_jet: &Series, topology: Topology) -> Result<bool> {
    if !h_jet.commutes(fsq_jet)? {
        return Err(Error::NotCommuting(h_jet.order()));
    }
    if !h_jet.multiplier().is_positive() {
        return Err(Error::Precondition("conjugator jet must have positive multiplier".into()));
    }
    if fsq_jet.is_identity() && topology == Topology::Boundary {
        return Ok(h_jet.is_identity());
    }
    Ok(true)
}

fn body_of<'a>(d: &'a DiffeoSpec, what: &str) -> Result<&'a Expr> {
    d.body
        .as_ref()
        .ok_or_else(|| Error::Precondition(format!("{what} needs a closed-form expression")))
}

/// True when `f ∘ f = x` is certified exactly.
pub fn is_global_involution(d: &DiffeoSpec) -> bool {
    match &d.body {
        Some(b) => certify_identical(&Expr::compose(b.clone(), b.clone()), &Expr::Var),
        None => false,
    }
}

fn verify(f: &Expr, g: &Expr, h: &Expr, opts: &EngineOptions) -> Result<GridCheckReport> {
    let rep = check_conjugacy_numeric(f, g, h, &opts.grid, opts.tol)?;
    if !rep.pass {
        return Err(Error::Verification(format!("certificate {h}: {rep}")));
    }
    Ok(rep)
}

/// `ψ = (x - τ(x))/2` for an involution `τ`; `ψ ∘ τ = -ψ`, so `ψ`
/// conjugates `τ` to `-x`.
pub fn involution_conjugator(tau: &DiffeoSpec, opts: &EngineOptions) -> Result<ConjugatorCertificate> {
    let body = body_of(tau, "involution_conjugator")?;
    if tau.degree != -1 {
        return Err(Error::NotInvolution("degree +1 maps are not proper involutions".into()));
    }
    let sq = Expr::compose(body.clone(), body.clone());
    if !certify_identical(&sq, &Expr::Var) {
        let rep = check_equal_numeric(&sq, &Expr::Var, &opts.grid, opts.tol)?;
        if !rep.pass {
            return Err(Error::NotInvolution(format!("{body}: {rep}")));
        }
    }
    let order = opts.order.unwrap_or(tau.order);
    let fsq = square_jet(tau, order)?;
    if is_identity_jet(&fsq)? == JetComparison::Different {
        return Err(Error::NotInvolution(format!("square jet {fsq} is not X")));
    }
    let psi = Expr::Const(Rational::new(1, 2)) * (Expr::Var - body.clone());
    let p = fixed_point_of(tau)?;
    let jet = match &p {
        FixedPoint::Exact(r) => crate::expr::taylor_jet(&psi, r, order)?,
        FixedPoint::Approx(h) => crate::expr::taylor_jet_hp(&psi, h, order)?,
    };
    let mut cert = ConjugatorCertificate::closed("psi", psi.clone(), Some(jet));
    cert.check = Some(verify(body, &-Expr::Var, &psi, opts)?);
    Ok(cert)
}

/// The glue map `k = x` on `x >= 0`, `k = g2 ∘ f⁻¹` on `x < 0`, which
/// conjugates `f` to `g2` when both fix 0, have equal squares and equal
/// jets at 0.
pub fn glue_conjugator(f: &DiffeoSpec, g2: &DiffeoSpec, opts: &EngineOptions) -> Result<ConjugatorCertificate> {
    let fb = body_of(f, "glue_conjugator")?;
    let gb = body_of(g2, "glue_conjugator")?;
    let order = opts.order_for(f, g2);
    let fj = t0_jet(f, order)?;
    let gj = t0_jet(g2, order)?;
    if compare_jets(&fj, &gj)? == JetComparison::Different {
        return Err(Error::Precondition(format!("jets at 0 differ: {fj} vs {gj}")));
    }
    let k = glue_expr(fb, gb)?;
    if let Expr::Piecewise(pw) = &k {
        let gap = pw.knot_mismatch(order)?;
        if gap.to_f64() > opts.tol {
            return Err(Error::NonSmooth(format!("glue map jets differ at 0 by {}", gap.to_decimal(6))));
        }
    }
    let mut cert = ConjugatorCertificate::closed("k", k.clone(), Some(JetValue::Exact(Series::identity(order))));
    cert.check = Some(verify(fb, gb, &k, opts)?);
    Ok(cert)
}

fn glue_expr(fb: &Expr, gb: &Expr) -> Result<Expr> {
    if certify_identical(fb, gb) {
        return Ok(Expr::Var);
    }
    let left = Expr::compose(gb.clone(), Expr::inverse(fb.clone()));
    Ok(Expr::Piecewise(PiecewiseMap::new(vec![Rational::zero()], vec![left, Expr::Var])?))
}

/// `(x - f(x))/2` blended into the identity by a plateau of radius `r`.
fn blend(body: &Expr, radius: &Radius) -> Expr {
    let h1 = Expr::Const(Rational::new(1, 2)) * (Expr::Var - body.clone());
    match radius {
        Radius::Infinite => h1,
        Radius::Finite(r) => {
            let beta = Expr::Plateau(r.clone());
            beta.clone() * h1 + (Expr::int(1) - beta) * Expr::Var
        }
    }
}

fn radius_le(a: &Radius, b: &Radius) -> bool {
    match (a, b) {
        (_, Radius::Infinite) => true,
        (Radius::Infinite, Radius::Finite(_)) => false,
        (Radius::Finite(x), Radius::Finite(y)) => x <= y,
    }
}

fn min_radius(a: Option<&Radius>, b: Option<&Radius>) -> Option<Radius> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if radius_le(x, y) { x.clone() } else { y.clone() }),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    }
}

/// Radius to use for the interior construction: the declared one, else
/// `inf` for certified global involutions, else the largest power of two
/// (from 8 down to 2^-10) on which both squares sample as the identity.
pub fn interior_radius(f: &DiffeoSpec, g: &DiffeoSpec, opts: &EngineOptions) -> Result<Radius> {
    if let Some(r) = min_radius(f.interior_radius.as_ref(), g.interior_radius.as_ref()) {
        return Ok(r);
    }
    if is_global_involution(f) && is_global_involution(g) {
        return Ok(Radius::Infinite);
    }
    let fb = body_of(f, "interior_conjugator")?;
    let gb = body_of(g, "interior_conjugator")?;
    for e in (-10..=3).rev() {
        let r = Rational::from_int(2).powi(e)?;
        let grid = Grid::new(-r.clone(), r.clone(), 201)?;
        let ok = [fb, gb].iter().try_fold(true, |acc, b| -> Result<bool> {
            let sq = Expr::compose((*b).clone(), (*b).clone());
            Ok(acc && check_equal_numeric(&sq, &Expr::Var, &grid, opts.tol)?.pass)
        })?;
        if ok {
            return Ok(Radius::Finite(r));
        }
    }
    Err(Error::Precondition("interior topology declared but the square is not the identity near 0".into()))
}

/// Conjugator for maps whose squares agree and are the identity on
/// `[-radius, radius]`: `h2`, `h3` are `(x - f(x))/2`, `(x - g(x))/2`
/// blended into the identity, so `h2 ∘ f ∘ h2⁻¹` and `h3 ∘ g ∘ h3⁻¹` are
/// `-x` near 0; gluing those gives
/// `h = h3⁻¹ ∘ k ∘ h2`.
pub fn interior_conjugator(
    f: &DiffeoSpec,
    g: &DiffeoSpec,
    radius: &Radius,
    opts: &EngineOptions,
) -> Result<ConjugatorCertificate> {
    let order = opts.order_for(f, g);
    let declared = min_radius(f.interior_radius.as_ref(), g.interior_radius.as_ref());
    if let Some(d) = &declared {
        if !radius_le(radius, d) {
            return Err(Error::Precondition(format!("radius {radius} exceeds the declared interval {d}")));
        }
    }
    if let Radius::Finite(r) = radius {
        if !r.is_positive() {
            return Err(Error::Precondition("radius must be positive".into()));
        }
    }
    let (fj, gj) = (t0_jet(f, order)?, t0_jet(g, order)?);
    let h2j = half_difference(&fj);
    let h3j = half_difference(&gj);
    let hj = h3j.comp_inverse()?.compose(&h2j)?;
    let (Some(fb), Some(gb)) = (&f.body, &g.body) else {
        return Ok(ConjugatorCertificate::jet_only("h", JetValue::Approx(hj)));
    };
    let check_grid = match radius {
        Radius::Finite(r) => Grid::new(-r.clone(), r.clone(), 201)?,
        Radius::Infinite => opts.grid.clone(),
    };
    for b in [fb, gb] {
        let sq = Expr::compose(b.clone(), b.clone());
        let rep = check_equal_numeric(&sq, &Expr::Var, &check_grid, opts.tol)?;
        if !rep.pass {
            return Err(Error::Precondition(format!("square is not the identity on the interior interval: {rep}")));
        }
    }
    let h2 = blend(fb, radius);
    let h3 = blend(gb, radius);
    let mono_grid = match radius {
        Radius::Finite(r) => {
            let w = &(r * &Rational::from_int(2)) + &Rational::from_int(1);
            Grid::new(-w.clone(), w, 801)?
        }
        Radius::Infinite => opts.grid.clone(),
    };
    for (name, h) in [("h2", &h2), ("h3", &h3)] {
        if !check_increasing(h, &mono_grid)? {
            return Err(Error::Precondition(format!("blend {name} is not increasing on {mono_grid}")));
        }
    }
    // k glues h2 f h2⁻¹ to h3 g h3⁻¹; h = h3⁻¹ ∘ k ∘ h2 simplifies piecewise
    // because h2 preserves the sign of x.
    let h3_inv = Expr::inverse(h3.clone());
    let right = Expr::compose(h3_inv.clone(), h2.clone());
    let left = Expr::compose(
        gb.clone(),
        Expr::compose(h3_inv, Expr::compose(h2.clone(), Expr::inverse(fb.clone()))),
    );
    let h = Expr::Piecewise(PiecewiseMap::new(vec![Rational::zero()], vec![left, right])?);
    if let Expr::Piecewise(pw) = &h {
        let gap = pw.knot_mismatch(order)?;
        if gap.to_f64() > opts.tol {
            return Err(Error::NonSmooth(format!("interior conjugator jets differ at 0 by {}", gap.to_decimal(6))));
        }
    }
    let lhs = hj.compose(&fj.to_hp())?;
    let rhs = gj.to_hp().compose(&hj)?;
    let gap = lhs.max_abs_diff(&rhs)?;
    if gap.to_f64() > opts.tol {
        return Err(Error::Verification(format!("jet identity fails by {}", gap.to_decimal(6))));
    }
    let mut cert = ConjugatorCertificate::closed("h", h.clone(), Some(jet_value(hj)));
    cert.check = Some(verify(fb, gb, &h, opts)?);
    Ok(cert)
}

fn half_difference(j: &JetValue) -> crate::SeriesHp {
    let s = j.to_hp();
    let id = crate::SeriesHp::identity(s.order());
    let half = crate::HpFloat::from_rational(&Rational::new(1, 2));
    id.sub(&s).expect("same order").scale(&half)
}

/// Prefers an exact jet when every coefficient is a small rational.
fn jet_value(s: crate::SeriesHp) -> JetValue {
    let exact: Option<Vec<Rational>> = s
        .coeffs()
        .iter()
        .map(|c| Rational::approximate(c, 1_000_000).filter(|r| (crate::HpFloat::from_rational(r) - c.clone()).abs().to_f64() < 1e-45))
        .collect();
    match exact.and_then(|v| Series::new(v).ok()) {
        Some(e) => JetValue::Exact(e),
        None => JetValue::Approx(s),
    }
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

fn resolve_topology(a: Topology, b: Topology) -> Option<Topology> {
    match (a, b) {
        (Topology::Unknown, t) | (t, Topology::Unknown) => Some(t),
        (x, y) if x == y => Some(x),
        _ => None,
    }
}

/// Decides conjugacy in the orientation-preserving group for two degree −1
/// maps with equal squares. Inputs are normalized to fix 0 first; the
/// certificate is expressed in the normalized coordinates.
pub fn reversing_decide(f: &DiffeoSpec, g: &DiffeoSpec, opts: &EngineOptions) -> Result<ConjugacyVerdict> {
    let n = opts.order_for(f, g);
    if f.degree != -1 || g.degree != -1 {
        return Ok(ConjugacyVerdict::precondition(n, "reversing_decide needs two degree -1 maps"));
    }
    let f = normalize_to_origin(f)?;
    let g = normalize_to_origin(g)?;
    let opts = &EngineOptions {
        order: Some(n),
        ..opts.clone()
    };

    let fsq = square_jet(&f, n)?;
    let gsq = square_jet(&g, n)?;
    if compare_jets(&fsq, &gsq)? == JetComparison::Different {
        return Ok(ConjugacyVerdict::precondition(n, format!("square jets differ: {fsq} vs {gsq}")));
    }
    if let (Some(fb), Some(gb)) = (&f.body, &g.body) {
        let a = Expr::compose(fb.clone(), fb.clone());
        let b = Expr::compose(gb.clone(), gb.clone());
        let rep = check_equal_numeric(&a, &b, &opts.grid, opts.tol)?;
        if !rep.pass {
            return Ok(ConjugacyVerdict::precondition(n, format!("squares differ numerically: {rep}")));
        }
    }
    let Some(topology) = resolve_topology(f.topology, g.topology) else {
        return Ok(ConjugacyVerdict::precondition(
            n,
            format!(
                "declared topologies {} and {} conflict although the squares agree",
                f.topology.as_str(),
                g.topology.as_str()
            ),
        ));
    };
    let fj = t0_jet(&f, n)?;
    let gj = t0_jet(&g, n)?;
    let jets = compare_jets(&fj, &gj)?;

    if is_identity_jet(&fsq)? == JetComparison::Different {
        if topology == Topology::Interior {
            return Ok(ConjugacyVerdict::precondition(
                n,
                format!("declared interior topology contradicts the square jet {fsq}"),
            ));
        }
        if jets == JetComparison::Different {
            return Ok(ConjugacyVerdict::precondition(
                n,
                format!("square jet {fsq} is not X but T0f = {fj} differs from T0g = {gj}; the squares cannot agree"),
            ));
        }
        let mut v = ConjugacyVerdict::new(Status::Conjugate, CaseTag::Case1NoninvolutiveJet, n)
            .note(format!("square jet {fsq} is not X; T0f = T0g = {fj}"));
        v.certificate = Some(if f.body.is_some() && g.body.is_some() {
            glue_conjugator(&f, &g, opts)?
        } else {
            v.notes.push("existence only: jet-level data, glue map has jet X".into());
            ConjugatorCertificate::jet_only("k", JetValue::Exact(Series::identity(n)))
        });
        return Ok(v);
    }

    match topology {
        Topology::Interior => {
            let radius = if f.body.is_some() && g.body.is_some() {
                interior_radius(&f, &g, opts)?
            } else {
                Radius::Infinite
            };
            let cert = interior_conjugator(&f, &g, &radius, opts)?;
            let mut v = ConjugacyVerdict::new(Status::Conjugate, CaseTag::Case2Interior, n)
                .note(format!("0 is interior to the fixed set of the square; radius {radius}"));
            if cert.form == CertificateForm::JetOnly {
                v.notes.push("existence only: jet-level data".into());
            }
            v.certificate = Some(cert);
            Ok(v)
        }
        Topology::Boundary => match jets {
            JetComparison::Different => Ok(ConjugacyVerdict::new(Status::NotConjugate, CaseTag::Case3Boundary, n)
                .note(format!("T0f = {fj} differs from T0g = {gj} with a boundary fixed point"))),
            JetComparison::WithinTolerance => Ok(ConjugacyVerdict::new(
                Status::UndeterminedAtOrder,
                CaseTag::Case3Boundary,
                n,
            )
            .note("jets agree within tolerance but are not exactly comparable")),
            JetComparison::Equal => {
                let certified = match (&f.body, &g.body) {
                    (Some(a), Some(b)) => certify_identical(a, b),
                    _ => false,
                };
                if !certified {
                    return Ok(ConjugacyVerdict::new(Status::UndeterminedAtOrder, CaseTag::Case3Boundary, n).note(
                        format!("jets agree mod X^{}; full series equality is not certified", n + 1),
                    ));
                }
                let cert = glue_conjugator(&f, &g, opts)?;
                if let (Some(JetValue::Exact(hj)), JetValue::Exact(sq)) = (&cert.jet, &fsq) {
                    if !kopell_guard(hj, sq, Topology::Boundary)? {
                        return Err(Error::Verification("certificate jet violates the centraliser guard".into()));
                    }
                }
                let mut v = ConjugacyVerdict::new(Status::Conjugate, CaseTag::Case3Boundary, n)
                    .note("full series equality certified: the maps agree as rational functions");
                v.certificate = Some(cert);
                Ok(v)
            }
        },
        Topology::Unknown => Ok(ConjugacyVerdict::new(Status::UndeterminedAtOrder, CaseTag::TopologyUnknown, n)
            .note(format!(
                "square jet is X mod X^{}; declare topology interior or boundary to decide",
                n + 1
            ))),
    }
}

/// Maps a certificate `h̃` between normalized maps back to the original
/// coordinates: `h(x) = h̃(x - p) + q`.
fn translate(h: Expr, p: &FixedPoint, q: &FixedPoint) -> Expr {
    let inner = if p.is_zero() {
        Expr::Var
    } else {
        Expr::Var - p.as_expr()
    };
    let outer = if q.is_zero() {
        Expr::Var
    } else {
        Expr::Var + q.as_expr()
    };
    Expr::compose(outer, Expr::compose(h, inner))
}

fn same_map(f: &DiffeoSpec, g: &DiffeoSpec) -> bool {
    if f.degree != g.degree {
        return false;
    }
    match (&f.body, &g.body) {
        (Some(a), Some(b)) => certify_identical(a, b),
        (None, None) => f == g,
        _ => false,
    }
}

/// Full-group decision: degrees first, then involutions, then the
/// orientation-preserving question for `(f, g)` and for `(-f(-x), g)`.
pub fn full_group_decide(f: &DiffeoSpec, g: &DiffeoSpec, opts: &EngineOptions) -> Result<ConjugacyVerdict> {
    f.validate()?;
    g.validate()?;
    let n = opts.order_for(f, g);
    let opts = &EngineOptions {
        order: Some(n),
        ..opts.clone()
    };

    let g_orig = g;
    let (g, h1) = match &opts.h1 {
        None => (g.clone(), None),
        Some(h1) => {
            let gb = body_of(g, "a supplied h1")?;
            if !check_increasing(h1, &Grid::symmetric(10, 2001))? {
                return Err(Error::Precondition(format!("h1 = {h1} is not increasing")));
            }
            let conj = Expr::compose(Expr::inverse(h1.clone()), Expr::compose(gb.clone(), h1.clone()));
            let mut g1 = DiffeoSpec::from_expr(g.degree, conj, g.order);
            g1.topology = g.topology;
            g1.interior_radius = g.interior_radius.clone();
            (g1, Some(h1.clone()))
        }
    };
    let mut verdict = decide_inner(f, &g, opts)?;
    if let Some(h1) = h1 {
        verdict.notes.push(format!("g replaced by h1^-1 o g o h1 with h1 = {h1}"));
        if let Some(cert) = verdict.certificate.as_mut() {
            cert.expr = cert.expr.take().map(|e| Expr::compose(h1.clone(), e));
            cert.role = "h".into();
            cert.jet = None;
            cert.check = None;
        }
    }
    if verdict.status == Status::Conjugate {
        if let (Some(cert), Some(fb), Some(gb)) = (verdict.certificate.as_mut(), &f.body, &g_orig.body) {
            if let Some(h) = &cert.expr {
                cert.check = Some(verify(fb, gb, h, opts)?);
            }
        }
    }
    Ok(verdict)
}

fn decide_inner(f: &DiffeoSpec, g: &DiffeoSpec, opts: &EngineOptions) -> Result<ConjugacyVerdict> {
    let n = opts.order.expect("set by caller");
    if same_map(f, g) {
        let mut v = ConjugacyVerdict::new(Status::Conjugate, CaseTag::Identical, n).note("both specs denote the same map");
        v.certificate = Some(ConjugatorCertificate::closed(
            "h",
            Expr::Var,
            Some(JetValue::Exact(Series::identity(n))),
        ));
        return Ok(v);
    }
    if f.degree != g.degree {
        return Ok(ConjugacyVerdict::new(Status::NotConjugate, CaseTag::OrientationReduced, n)
            .note(format!("degrees differ ({} vs {}); degree is a conjugacy invariant", f.degree, g.degree)));
    }
    if f.degree == 1 {
        return Ok(ConjugacyVerdict::precondition(
            n,
            "both maps preserve orientation; deciding conjugacy there is out of scope",
        ));
    }
    let fj = t0_jet(f, n)?;
    let gj = t0_jet(g, n)?;
    let mult_gap = (fj.to_hp().multiplier().clone() - gj.to_hp().multiplier().clone()).abs();
    let mults_differ = match (&fj, &gj) {
        (JetValue::Exact(a), JetValue::Exact(b)) => a.multiplier() != b.multiplier(),
        _ => mult_gap.to_f64() > crate::diffeo::JET_TOL,
    };
    if mults_differ {
        return Ok(ConjugacyVerdict::new(Status::NotConjugate, CaseTag::OrientationReduced, n).note(format!(
            "multipliers at the fixed points differ ({} vs {})",
            fj.to_hp().multiplier().to_decimal(20),
            gj.to_hp().multiplier().to_decimal(20)
        )));
    }

    if is_global_involution(f) && is_global_involution(g) {
        let psi_f = involution_conjugator(f, opts)?;
        let psi_g = involution_conjugator(g, opts)?;
        let (Some(pf), Some(pg)) = (psi_f.expr.clone(), psi_g.expr.clone()) else {
            unreachable!("closed-form involutions give closed-form certificates")
        };
        let h = Expr::compose(Expr::inverse(pg.clone()), pf.clone());
        let mut v = ConjugacyVerdict::new(Status::Conjugate, CaseTag::Involution, n)
            .note("both maps are involutions; h = psi_g^-1 o psi_f")
            .note(format!("psi_f = {pf}"))
            .note(format!("psi_g = {pg}"));
        let jet = match (&psi_f.jet, &psi_g.jet) {
            (Some(JetValue::Exact(a)), Some(JetValue::Exact(b))) => Some(JetValue::Exact(b.comp_inverse()?.compose(a)?)),
            _ => None,
        };
        v.certificate = Some(ConjugatorCertificate::closed("h", h, jet));
        return Ok(v);
    }

    let p = fixed_point_of(f)?;
    let q = fixed_point_of(g)?;
    let fnorm = normalize_to_origin(f)?;
    let gnorm = normalize_to_origin(g)?;

    let direct = reversing_decide(&fnorm, &gnorm, opts)?;
    if direct.status == Status::Conjugate {
        return Ok(lift(direct, &p, &q, false));
    }
    let reflected = reversing_decide(&fnorm.reflect(), &gnorm, opts)?;
    if reflected.status == Status::Conjugate {
        return Ok(lift(reflected, &p, &q, true));
    }
    let mut out = if direct.status == Status::NotConjugate && reflected.status == Status::NotConjugate {
        ConjugacyVerdict::new(Status::NotConjugate, direct.case_tag, n)
    } else if direct.status == Status::UndeterminedAtOrder && direct.case_tag != CaseTag::PreconditionFailed {
        ConjugacyVerdict::new(Status::UndeterminedAtOrder, direct.case_tag, n)
    } else if reflected.status == Status::UndeterminedAtOrder && reflected.case_tag != CaseTag::PreconditionFailed {
        ConjugacyVerdict::new(Status::UndeterminedAtOrder, reflected.case_tag, n)
    } else {
        ConjugacyVerdict::precondition(n, "no branch could be decided")
    };
    out.notes.extend(direct.notes.into_iter().map(|s| format!("direct: {s}")));
    out.notes.extend(reflected.notes.into_iter().map(|s| format!("reflected: {s}")));
    Ok(out)
}

fn lift(mut v: ConjugacyVerdict, p: &FixedPoint, q: &FixedPoint, reflected: bool) -> ConjugacyVerdict {
    v.notes.push(if reflected {
        "reflected branch: -f(-x) is conjugate to g; certificate k(x) = h(-x)".into()
    } else {
        "direct branch".into()
    });
    if let Some(cert) = v.certificate.as_mut() {
        if let Some(h) = cert.expr.take() {
            let h = if reflected { Expr::compose(h, -Expr::Var) } else { h };
            cert.expr = Some(translate(h, p, q));
            cert.check = None;
        }
        if reflected {
            cert.jet = cert.jet.take().map(|j| match j {
                JetValue::Exact(s) => JetValue::Exact(s.compose(&Series::linear(Rational::from_int(-1), s.order())).expect("same order")),
                JetValue::Approx(s) => {
                    let neg = crate::SeriesHp::linear(crate::HpFloat::from_rational(&Rational::from_int(-1)), s.order());
                    JetValue::Approx(s.compose(&neg).expect("same order"))
                }
            });
        }
    }
    v
}
