//! Exact truncated power series and conjugacy decisions for diffeomorphisms
//! of the real line.

pub mod dynamics;
pub mod diffeo;
pub mod engine;
pub mod error;
pub mod expr;
pub mod jet;
pub mod poly;
pub mod report;
pub mod scalar;
pub mod series;
pub mod suites;
pub mod verify;

pub use diffeo::{DiffeoSpec, FixedPoint, Radius, Topology};
pub use engine::{full_group_decide, reversing_decide, CaseTag, ConjugacyVerdict, EngineOptions, Status};
pub use error::{Error, Result};
pub use expr::{parse_expression, taylor_jet, Expr, JetValue, PiecewiseMap};
pub use jet::Jet;
pub use poly::Poly;
pub use scalar::{Field, HpFloat, Rational, Real, Ring};
pub use series::TruncatedSeries;

/// Series with exact rational coefficients.
pub type Series = TruncatedSeries<Rational>;
/// Series with high-precision float coefficients.
pub type SeriesHp = TruncatedSeries<HpFloat>;
/// Series with `f64` coefficients.
pub type SeriesF64 = TruncatedSeries<f64>;
/// Series whose coefficients are polynomials in free parameters.
pub type SeriesPoly = TruncatedSeries<Poly>;

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 16;
