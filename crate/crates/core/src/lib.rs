//! Exact-arithmetic approximation of Euler's totient for RSA semiprimes.
//!
//! The crate generates seeded semiprime datasets, fits linear predictors of
//! `ε = φ(n)/2 − 1` from the public modulus `n`, turns them into lower bounds
//! on `φ(n)`, compares those against classical analytic bounds, and measures
//! how far a prediction is from enabling a Fermat-style factorization.
//!
//! All fitting, prediction and metric arithmetic is exact (big integers and
//! big rationals). Transcendental bounds use [`bigfloat::BigFloat`] with
//! directed rounding.

pub mod attack;
pub mod bigfloat;
pub mod bounds;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod ntheory;
pub mod plot;
pub mod regress;
pub mod samples;
pub mod totient;

pub use attack::{AttackOutcome, WindowReport, WindowRow};
pub use bigfloat::BigFloat;
pub use bounds::BoundReport;
pub use dataset::{DatasetHeader, DatasetStats, SplitSpec};
pub use error::{Error, Result};
pub use metrics::{Histogram, HistogramSpec, MetricsReport};
pub use ntheory::{Natural, PrimalityPolicy};
pub use regress::{FitMode, LinearModel, OlsSums, Rational};
pub use samples::{RngStream, RsaSample};
pub use totient::HyperPoint;
