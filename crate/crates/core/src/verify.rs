//! Independent oracles: seeded generators, brute-force square roots, numeric
//! conjugacy checks and finite-difference jet checks.

use std::fmt;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::random_rational;
use crate::error::{Error, Result};
use crate::expr::{taylor_jet, Expr, Func};
use crate::scalar::{HpFloat, Rational, Real};
use crate::Series;

/// Deterministic generator used by every randomized suite.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Grid checks
// ---------------------------------------------------------------------------

/// `points` equally spaced sample points on `[lo, hi]`, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    #[serde(serialize_with = "crate::report::display")]
    pub lo: Rational,
    #[serde(serialize_with = "crate::report::display")]
    pub hi: Rational,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: Rational, hi: Rational, points: usize) -> Result<Self> {
        if points < 2 || lo >= hi {
            return Err(Error::Precondition(format!("bad grid [{lo}, {hi}] with {points} points")));
        }
        Ok(Grid { lo, hi, points })
    }

    pub fn symmetric(half_width: i64, points: usize) -> Self {
        Grid::new(Rational::from_int(-half_width), Rational::from_int(half_width), points).expect("valid grid")
    }

    pub fn sample(&self) -> impl Iterator<Item = Rational> + '_ {
        let step = &(&self.hi - &self.lo) / &Rational::from_int(self.points as i64 - 1);
        (0..self.points).map(move |i| &self.lo + &(&step * &Rational::from_int(i as i64)))
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::symmetric(2, 1001)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] x {}", self.lo, self.hi, self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCheckReport {
    pub grid: Grid,
    #[serde(serialize_with = "crate::report::hp")]
    pub max_residual: HpFloat,
    #[serde(serialize_with = "crate::report::display")]
    pub argmax: Rational,
    pub tolerance: f64,
    pub pass: bool,
}

impl GridCheckReport {
    fn from_residuals(grid: Grid, residuals: impl Iterator<Item = Result<(Rational, HpFloat)>>, tol: f64) -> Result<Self> {
        let mut worst = HpFloat::zero();
        let mut argmax = grid.lo.clone();
        for item in residuals {
            let (x, r) = item?;
            if !r.is_finite() {
                return Err(Error::Domain(format!("non-finite residual at x = {x}")));
            }
            if r > worst {
                worst = r;
                argmax = x;
            }
        }
        let pass = worst <= HpFloat::from_f64(tol);
        Ok(GridCheckReport {
            grid,
            max_residual: worst,
            argmax,
            tolerance: tol,
            pass,
        })
    }
}

impl fmt::Display for GridCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max residual {} at x = {} on {} (tol {:e}): {}",
            self.max_residual.to_decimal(6),
            self.argmax,
            self.grid,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// `sup |h(f(x)) - g(h(x))|` over the grid, at working precision. `h` must
/// be strictly monotone on the grid.
pub fn check_conjugacy_numeric(f: &Expr, g: &Expr, h: &Expr, grid: &Grid, tol: f64) -> Result<GridCheckReport> {
    let mut prev: Option<HpFloat> = None;
    let mut direction = 0i8;
    let mut rows = Vec::with_capacity(grid.points);
    for x in grid.sample() {
        let xh = HpFloat::from_rational(&x);
        let hx = h.eval(&xh)?;
        if let Some(p) = &prev {
            let d = if hx > *p {
                1
            } else if hx < *p {
                -1
            } else {
                0
            };
            if d == 0 || (direction != 0 && d != direction) {
                return Err(Error::Precondition(format!("conjugator is not monotone near x = {x}")));
            }
            direction = d;
        }
        let lhs = h.eval(&f.eval(&xh)?)?;
        let rhs = g.eval(&hx)?;
        prev = Some(hx);
        rows.push(Ok((x, (lhs - rhs).abs())));
    }
    GridCheckReport::from_residuals(grid.clone(), rows.into_iter(), tol)
}

/// `sup |a(x) - b(x)|` over the grid.
pub fn check_equal_numeric(a: &Expr, b: &Expr, grid: &Grid, tol: f64) -> Result<GridCheckReport> {
    let rows = grid.sample().map(|x| {
        let xh = HpFloat::from_rational(&x);
        let d = (a.eval(&xh)? - b.eval(&xh)?).abs();
        Ok((x, d))
    });
    GridCheckReport::from_residuals(grid.clone(), rows, tol)
}

/// Checks that the derivative of `e` is positive at every grid point.
pub fn check_increasing(e: &Expr, grid: &Grid) -> Result<bool> {
    for x in grid.sample() {
        let j = e.jet(&crate::Jet::variable(HpFloat::from_rational(&x), 1))?;
        if !(j.coeffs()[1] > HpFloat::zero()) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Square roots by enumeration
// ---------------------------------------------------------------------------

/// Values tried for each free coefficient by [`brute_force_square_roots`].
pub fn sample_values() -> Vec<Rational> {
    [(-2, 1), (-1, 1), (-1, 2), (0, 1), (1, 2), (1, 1), (2, 1)]
        .iter()
        .map(|&(n, d)| Rational::new(n, d))
        .collect()
}

/// Largest order accepted by [`brute_force_square_roots`].
pub const BRUTE_FORCE_MAX_ORDER: usize = 8;

/// Every `G` with multiplier `mu` and `G ∘ G = S` whose undetermined
/// coefficients lie in [`sample_values`], by depth-first enumeration over
/// the coefficient equations.
pub fn brute_force_square_roots(s: &Series, mu: &Rational) -> Result<Vec<Series>> {
    if s.order() > BRUTE_FORCE_MAX_ORDER {
        return Err(Error::Precondition(format!(
            "brute force is limited to order {BRUTE_FORCE_MAX_ORDER}"
        )));
    }
    if &(mu * mu) != s.multiplier() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let start = Series::linear(mu.clone(), s.order());
    descend(s, mu, start, 2, &mut out);
    Ok(out)
}

fn descend(s: &Series, mu: &Rational, g: Series, k: usize, out: &mut Vec<Series>) {
    if k > s.order() {
        out.push(g);
        return;
    }
    // the k-th coefficient of G ∘ G with g_k = 0
    let head = g.truncate(k);
    let partial = head.compose(&head).expect("same order");
    let residual = s.coeff(k) - partial.coeff(k);
    let factor = mu + &mu.powi(k as i32).expect("nonzero multiplier");
    if !factor.is_zero() {
        let mut next = g;
        next.set_coeff(k, &residual / &factor);
        descend(s, mu, next, k + 1, out);
    } else if residual.is_zero() {
        for v in sample_values() {
            let mut next = g.clone();
            next.set_coeff(k, v);
            descend(s, mu, next, k + 1, out);
        }
    }
}

/// Degenerate coefficient equations (`mu + mu^k = 0`) at which the
/// enumerated roots still take more than one value: the free coefficients
/// as seen by enumeration.
pub fn enumerated_free_indices(roots: &[Series], mu: &Rational) -> Vec<usize> {
    let Some(first) = roots.first() else {
        return Vec::new();
    };
    (2..=first.order())
        .filter(|&k| (mu + &mu.powi(k as i32).expect("nonzero multiplier")).is_zero())
        .filter(|&k| roots.iter().any(|r| r.coeff(k) != first.coeff(k)))
        .collect()
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Fornberg weights: `w[k][j]` approximates the `k`-th derivative at 0 from
/// the values at `nodes[j]`.
pub fn fornberg_weights(nodes: &[Rational], max_deriv: usize) -> Vec<Vec<Rational>> {
    let n = nodes.len();
    let mut c = vec![vec![Rational::zero(); n]; max_deriv + 1];
    c[0][0] = Rational::one();
    let mut c1 = Rational::one();
    let mut c4 = nodes[0].clone();
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = Rational::one();
        let c5 = c4.clone();
        c4 = nodes[i].clone();
        for j in 0..i {
            let c3 = &nodes[i] - &nodes[j];
            c2 = &c2 * &c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    let kk = Rational::from_int(k as i64);
                    let t = &(&kk * &c[k - 1][i - 1]) - &(&c5 * &c[k][i - 1]);
                    c[k][i] = &(&c1 * &t) / &c2;
                }
                c[0][i] = -(&(&(&c1 * &c5) * &c[0][i - 1]) / &c2);
            }
            for k in (1..=mn).rev() {
                let kk = Rational::from_int(k as i64);
                let t = &(&c4 * &c[k][j]) - &(&kk * &c[k - 1][j]);
                c[k][j] = &t / &c3;
            }
            c[0][j] = &(&c4 * &c[0][j]) / &c3;
        }
        c1 = c2;
    }
    c
}

/// Half-width (in steps) of the central stencil.
pub const FD_HALF_STENCIL: i64 = 8;
/// Step of the central stencil.
pub const FD_STEP: f64 = 1e-3;

/// Compares `taylor_jet(e, p, order)` with central finite differences of
/// `e` at working precision. The residual of coefficient `c_k` is
/// `|c_k - d_k| / max(1, |c_k|)`; `argmax` holds the worst index.
pub fn jet_vs_finite_difference(e: &Expr, p: &Rational, order: usize, tol: f64) -> Result<GridCheckReport> {
    if order == 0 || order > 4 {
        return Err(Error::Precondition("finite-difference check supports orders 1..4".into()));
    }
    let jet = taylor_jet(e, p, order)?.to_hp();
    let nodes: Vec<Rational> = (-FD_HALF_STENCIL..=FD_HALF_STENCIL).map(Rational::from_int).collect();
    let weights = fornberg_weights(&nodes, order);
    let h = Rational::approximate(&HpFloat::from_f64(FD_STEP), 1_000_000).expect("finite step");
    let values: Vec<HpFloat> = nodes
        .iter()
        .map(|z| e.eval(&HpFloat::from_rational(&(p + &(z * &h)))))
        .collect::<Result<_>>()?;
    let mut factorial = Rational::one();
    let mut h_pow = Rational::one();
    let mut rows = Vec::new();
    for k in 1..=order {
        factorial = &factorial * &Rational::from_int(k as i64);
        h_pow = &h_pow * &h;
        let mut acc = HpFloat::zero();
        for (w, v) in weights[k].iter().zip(&values) {
            acc = acc + HpFloat::from_rational(w) * v.clone();
        }
        let fd = acc / HpFloat::from_rational(&(&factorial * &h_pow));
        let c = jet.coeff(k).clone();
        let scale = c.abs().max(HpFloat::one());
        rows.push(Ok((Rational::from_int(k as i64), (fd - c).abs() / scale)));
    }
    let grid = Grid {
        lo: p.clone(),
        hi: p.clone(),
        points: order,
    };
    GridCheckReport::from_residuals(grid, rows.into_iter(), tol)
}

// ---------------------------------------------------------------------------
// Random expressions
// ---------------------------------------------------------------------------

fn small_rational<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    loop {
        let r = random_rational(rng);
        if !r.is_zero() {
            return r;
        }
    }
}

/// Random expression smooth on all of ℝ: divisions are only by `1 + u^2`,
/// `cosh(u)` or `exp(u)`, and logarithms only of `1 + u^2`.
pub fn random_smooth_expr<R: Rng + ?Sized>(rng: &mut R, depth: usize) -> Expr {
    if depth == 0 {
        return if rng.gen_bool(0.7) {
            Expr::Var
        } else {
            Expr::Const(small_rational(rng))
        };
    }
    let sub = |rng: &mut R| random_smooth_expr(rng, depth - 1);
    let one = || Expr::int(1);
    match rng.gen_range(0..12) {
        0 => sub(rng) + sub(rng),
        1 => sub(rng) - sub(rng),
        2 => sub(rng) * sub(rng),
        3 => {
            let a = sub(rng);
            let b = sub(rng);
            a / (one() + Expr::pow(b, 2))
        }
        4 => {
            let a = sub(rng);
            let b = sub(rng);
            let denom = *[Func::Cosh, Func::Exp].choose(rng).expect("nonempty");
            a / Expr::func(denom, b)
        }
        5 => Expr::pow(sub(rng), rng.gen_range(2..=3)),
        6 => Expr::func(Func::Log, one() + Expr::pow(sub(rng), 2)),
        7 => Expr::func(Func::Exp, Expr::Const(Rational::new(1, 2)) * sub(rng)),
        8 => Expr::func(Func::Sinh, sub(rng)),
        9 => Expr::func(Func::Tanh, sub(rng)),
        10 => Expr::func(Func::Atan, sub(rng)),
        _ => Expr::compose(sub(rng), sub(rng)),
    }
}

/// Random smooth expression vanishing at 0 (`e(x) - e(0)`).
pub fn random_expr_fixing_zero<R: Rng + ?Sized>(rng: &mut R, depth: usize) -> Expr {
    let e = random_smooth_expr(rng, depth);
    let at0 = Expr::compose(e.clone(), Expr::int(0));
    e - at0
}

/// Odd polynomial `a x + b x^3 + c x^5` with `a > 0`, `b, c >= 0`: a
/// diffeomorphism of ℝ fixing 0.
pub fn random_odd_conjugator<R: Rng + ?Sized>(rng: &mut R) -> Expr {
    let a = Rational::new(rng.gen_range(1..=9), rng.gen_range(1..=9));
    let b = Rational::new(rng.gen_range(0..=9), rng.gen_range(1..=9));
    let c = Rational::new(rng.gen_range(0..=3), rng.gen_range(1..=9));
    let x = Expr::Var;
    Expr::Const(a) * x.clone() + Expr::Const(b) * Expr::pow(x.clone(), 3) + Expr::Const(c) * Expr::pow(x, 5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::Jet;
    use rand::RngCore;

    fn e(text: &str) -> Expr {
        parse_expression(text).unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn seeded_streams() {
        let a: Vec<u64> = (0..4).map(|_| seeded_rng(0).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r0 = seeded_rng(0);
        let mut r1 = seeded_rng(1);
        assert_ne!(r0.next_u64(), r1.next_u64());
    }

    #[test]
    fn numeric_conjugacy_examples() {
        let f = e("-x - x^3");
        let rep = check_conjugacy_numeric(&f, &f, &Expr::Var, &Grid::default(), 1e-30).unwrap();
        assert!(rep.pass);
        assert!(rep.max_residual.is_zero());
        // x + 1/2 conjugates -x to 1 - x
        let rep = check_conjugacy_numeric(&e("-x"), &e("1 - x"), &e("x + 1/2"), &Grid::default(), 1e-30).unwrap();
        assert!(rep.pass, "{rep}");
        let mut rng = seeded_rng(5);
        for _ in 0..5 {
            let h = random_odd_conjugator(&mut rng);
            let rep = check_conjugacy_numeric(&e("-x"), &f, &h, &Grid::default(), 1e-30).unwrap();
            assert!(!rep.pass);
        }
        let err = check_conjugacy_numeric(&f, &f, &e("x^2"), &Grid::default(), 1e-30);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn perturbed_certificate_is_flagged() {
        let h = e("x + 1/2 + 1e-10*x^2*exp(-x^2)");
        let rep = check_conjugacy_numeric(&e("-x"), &e("1 - x"), &h, &Grid::default(), 1e-30).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn brute_force_examples() {
        let id3: Series = "[1, 0, 0]".parse().unwrap();
        let roots = brute_force_square_roots(&id3, &q(-1, 1)).unwrap();
        assert_eq!(roots.len(), 7);
        for r in &roots {
            let a = r.coeff(2).clone();
            assert_eq!(r.coeff(3), &-(&a * &a));
        }
        assert_eq!(enumerated_free_indices(&roots, &q(-1, 1)), vec![2]);
        let four: Series = "[4, 0, 0]".parse().unwrap();
        assert_eq!(brute_force_square_roots(&four, &q(2, 1)).unwrap(), vec!["[2, 0, 0]".parse().unwrap()]);
        let plus = brute_force_square_roots(&id3, &q(1, 1)).unwrap();
        assert_eq!(plus, vec![id3.clone()]);
        assert!(brute_force_square_roots(&Series::identity(9), &q(1, 1)).is_err());
    }

    #[test]
    fn fornberg_matches_textbook_stencils() {
        let nodes: Vec<Rational> = (-1..=1).map(Rational::from_int).collect();
        let w = fornberg_weights(&nodes, 2);
        assert_eq!(w[1], vec![q(-1, 2), q(0, 1), q(1, 2)]);
        assert_eq!(w[2], vec![q(1, 1), q(-2, 1), q(1, 1)]);
        let five: Vec<Rational> = (-2..=2).map(Rational::from_int).collect();
        let w = fornberg_weights(&five, 1);
        assert_eq!(w[1], vec![q(1, 12), q(-2, 3), q(0, 1), q(2, 3), q(-1, 12)]);
    }

    #[test]
    fn finite_difference_examples() {
        for text in ["-x", "exp(x)", "-x - x^3", "atan(x)/cosh(x)"] {
            for p in [q(0, 1), q(1, 3)] {
                let rep = jet_vs_finite_difference(&e(text), &p, 4, 1e-20).unwrap();
                assert!(rep.pass, "{text} at {p}: {rep}");
            }
        }
        let rep = jet_vs_finite_difference(&e("-x"), &q(5, 1), 4, 1e-20).unwrap();
        assert!(rep.max_residual.to_f64() < 1e-35);
    }

    #[test]
    fn random_expressions_are_smooth() {
        let mut rng = seeded_rng(9);
        for _ in 0..40 {
            let ex = random_smooth_expr(&mut rng, 3);
            for x in [-2.0, -0.5, 0.0, 0.7, 2.0] {
                let j = ex.jet(&Jet::variable(HpFloat::from_f64(x), 2));
                assert!(j.is_ok(), "{ex} at {x}: {j:?}");
            }
            let z = random_expr_fixing_zero(&mut rng, 2);
            assert!(z.eval(&HpFloat::zero()).unwrap().to_f64().abs() < 1e-40);
        }
    }
}
