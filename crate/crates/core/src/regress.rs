//! Exact linear regression of ε on n.
//!
//! Four fit modes share the model form `ŷ(x) = slope·x + intercept`:
//!
//! * `free_ols`: ordinary least squares, both coefficients free;
//! * `half_slope`: slope pinned at ½, least-squares intercept;
//! * `conservative`: slope ½, intercept = min(y − x/2) over the training set,
//!   so no training point is over-predicted;
//! * `provable`: slope ½, intercept −2^(bits/2), which under-predicts ε for
//!   every balanced modulus of that size.
//!
//! The negated intercept of a slope-½ model is written α, so that
//! `ε̂ = n/2 − α` and `n − 2α + 2` is the induced lower bound on φ(n).

use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::ntheory::Natural;

/// Exact rational in lowest terms with positive denominator.
pub type Rational = BigRational;

pub const MODEL_FORMAT: &str = "totient-model/v1";

pub(crate) fn rational(v: &Natural) -> Rational {
    Rational::from_integer(BigInt::from(v.clone()))
}

pub(crate) fn half() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(2))
}

/// Sufficient statistics `(N, Σx, Σy, Σxy, Σx²)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OlsSums {
    pub count: u64,
    pub sum_x: BigInt,
    pub sum_y: BigInt,
    pub sum_xy: BigInt,
    pub sum_xx: BigInt,
}

impl OlsSums {
    pub fn push(&mut self, x: &Natural, y: &Natural) {
        let x = BigInt::from(x.clone());
        let y = BigInt::from(y.clone());
        self.count += 1;
        self.sum_xy += &x * &y;
        self.sum_xx += &x * &x;
        self.sum_x += x;
        self.sum_y += y;
    }

    pub fn merge(mut self, other: &OlsSums) -> OlsSums {
        self.count += other.count;
        self.sum_x += &other.sum_x;
        self.sum_y += &other.sum_y;
        self.sum_xy += &other.sum_xy;
        self.sum_xx += &other.sum_xx;
        self
    }
}

/// Sequential accumulation.
pub fn accumulate<'a, I>(pairs: I) -> OlsSums
where
    I: IntoIterator<Item = (&'a Natural, &'a Natural)>,
{
    pairs.into_iter().fold(OlsSums::default(), |mut acc, (x, y)| {
        acc.push(x, y);
        acc
    })
}

/// Partition-and-merge accumulation on the current rayon pool. Equal to
/// [`accumulate`] for every partitioning.
pub fn accumulate_par(pairs: &[(Natural, Natural)]) -> OlsSums {
    pairs
        .par_iter()
        .fold(OlsSums::default, |mut acc, (x, y)| {
            acc.push(x, y);
            acc
        })
        .reduce(OlsSums::default, |a, b| a.merge(&b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    FreeOls,
    HalfSlope,
    Conservative,
    Provable,
}

impl FitMode {
    pub const ALL: [FitMode; 4] = [
        FitMode::FreeOls,
        FitMode::HalfSlope,
        FitMode::Conservative,
        FitMode::Provable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FitMode::FreeOls => "free_ols",
            FitMode::HalfSlope => "half_slope",
            FitMode::Conservative => "conservative",
            FitMode::Provable => "provable",
        }
    }
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown fit mode {s:?}")))
    }
}

impl std::fmt::Display for FitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub slope: Rational,
    pub intercept: Rational,
    pub mode: FitMode,
    pub modulus_bits: u64,
    pub train_count: u64,
    pub master_seed: u64,
    pub metrics: Option<MetricsReport>,
}

impl LinearModel {
    fn new(slope: Rational, intercept: Rational, mode: FitMode, train_count: u64) -> Self {
        Self {
            slope,
            intercept,
            mode,
            modulus_bits: 0,
            train_count,
            master_seed: 0,
            metrics: None,
        }
    }

    /// Custom line, mostly for tests and hand-built predictors.
    pub fn from_coefficients(slope: Rational, intercept: Rational, mode: FitMode) -> Result<Self> {
        if mode != FitMode::FreeOls && slope != half() {
            return Err(Error::domain(format!("{mode} models have slope 1/2")));
        }
        Ok(Self::new(slope, intercept, mode, 0))
    }

    pub fn with_provenance(mut self, modulus_bits: u64, master_seed: u64) -> Self {
        self.modulus_bits = modulus_bits;
        self.master_seed = master_seed;
        self
    }

    pub fn with_metrics(mut self, metrics: MetricsReport) -> Self {
        self.metrics = Some(metrics);
        self
    }

    pub fn has_half_slope(&self) -> bool {
        self.slope == half()
    }

    /// `slope·x + intercept`.
    pub fn predict(&self, x: &Natural) -> Rational {
        &self.slope * rational(x) + &self.intercept
    }

    /// α = −intercept.
    pub fn alpha(&self) -> Rational {
        -&self.intercept
    }

    /// `n − 2α + 2 = 2(ε̂ + 1)`; requires slope ½.
    pub fn phi_lower_bound(&self, n: &Natural) -> Result<Rational> {
        if !self.has_half_slope() {
            return Err(Error::domain(format!(
                "phi_lower_bound needs slope 1/2, model has {}",
                self.slope
            )));
        }
        Ok((self.predict(n) + Rational::one()) * Rational::from_integer(2.into()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            bits: self.modulus_bits,
            mode: self.mode,
            slope: RationalJson::from(&self.slope),
            intercept: RationalJson::from(&self.intercept),
            train_count: self.train_count,
            seed: self.master_seed,
            metrics: self.metrics.as_ref().map(MetricsReport::to_json),
        };
        serde_json::to_value(file).expect("model serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unsupported model format {:?}", file.format)));
        }
        let slope = file.slope.to_rational()?;
        let intercept = file.intercept.to_rational()?;
        if file.mode != FitMode::FreeOls && slope != half() {
            return Err(Error::Format(format!("{} model with slope {slope}", file.mode)));
        }
        let metrics = file.metrics.map(MetricsReport::from_json).transpose()?;
        Ok(Self {
            slope,
            intercept,
            mode: file.mode,
            modulus_bits: file.bits,
            train_count: file.train_count,
            master_seed: file.seed,
            metrics,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    bits: u64,
    mode: FitMode,
    slope: RationalJson,
    intercept: RationalJson,
    train_count: u64,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metrics: Option<serde_json::Value>,
}

/// `{"num": "<dec>", "den": "<dec>"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RationalJson {
    num: String,
    den: String,
}

impl From<&Rational> for RationalJson {
    fn from(r: &Rational) -> Self {
        Self {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl RationalJson {
    pub(crate) fn to_rational(&self) -> Result<Rational> {
        let parse = |s: &str| {
            BigInt::from_str(s).map_err(|e| Error::Format(format!("bad integer {s:?}: {e}")))
        };
        let num = parse(&self.num)?;
        let den = parse(&self.den)?;
        if !den.is_positive() {
            return Err(Error::Format(format!("denominator must be positive, got {den}")));
        }
        Ok(Rational::new(num, den))
    }
}

pub fn save_model(model: &LinearModel, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&model.to_json()).expect("model serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<LinearModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value = serde_json::from_str(&text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    LinearModel::from_json(value)
}

/// Ordinary least squares on exact sums.
pub fn fit_free_ols(sums: &OlsSums) -> Result<LinearModel> {
    if sums.count < 2 {
        return Err(Error::Fit(format!("free OLS needs ≥ 2 points, got {}", sums.count)));
    }
    let n = BigInt::from(sums.count);
    let denom = &n * &sums.sum_xx - &sums.sum_x * &sums.sum_x;
    if denom.is_zero() {
        return Err(Error::Fit("all x values are equal".into()));
    }
    let slope = Rational::new(&n * &sums.sum_xy - &sums.sum_x * &sums.sum_y, denom);
    let intercept = (Rational::from_integer(sums.sum_y.clone())
        - &slope * Rational::from_integer(sums.sum_x.clone()))
        / Rational::from_integer(n);
    Ok(LinearModel::new(slope, intercept, FitMode::FreeOls, sums.count))
}

/// Least-squares intercept under slope ½: `(Σy − Σx/2)/N`.
pub fn fit_half_slope(sums: &OlsSums) -> Result<LinearModel> {
    if sums.count == 0 {
        return Err(Error::Fit("half-slope fit on empty input".into()));
    }
    let intercept = (Rational::from_integer(sums.sum_y.clone())
        - half() * Rational::from_integer(sums.sum_x.clone()))
        / Rational::from_integer(BigInt::from(sums.count));
    Ok(LinearModel::new(half(), intercept, FitMode::HalfSlope, sums.count))
}

/// Slope ½ with intercept `min(y − x/2)`: never over-predicts a training point.
pub fn fit_conservative<'a, I>(pairs: I) -> Result<LinearModel>
where
    I: IntoIterator<Item = (&'a Natural, &'a Natural)>,
{
    let mut count = 0u64;
    let mut best: Option<Rational> = None;
    for (x, y) in pairs {
        count += 1;
        let gap = rational(y) - half() * rational(x);
        if best.as_ref().is_none_or(|b| gap < *b) {
            best = Some(gap);
        }
    }
    let intercept = best.ok_or_else(|| Error::Fit("conservative fit on empty input".into()))?;
    Ok(LinearModel::new(half(), intercept, FitMode::Conservative, count))
}

/// Slope ½, intercept `−2^(bits/2)`. Needs no data: for primes below
/// 2^(bits/2), `ε − n/2 = −(p+q+1)/2 > −2^(bits/2)`.
pub fn fit_provable(modulus_bits: u64) -> Result<LinearModel> {
    if modulus_bits < 8 || !modulus_bits.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "provable model needs even bits ≥ 8, got {modulus_bits}"
        )));
    }
    let alpha = BigInt::one() << (modulus_bits / 2);
    Ok(LinearModel::new(half(), Rational::from_integer(-alpha), FitMode::Provable, 0)
        .with_provenance(modulus_bits, 0))
}

/// Pairs where the model over-predicts, `ε̂(x) > y`.
pub fn count_violations<'a, I>(model: &LinearModel, pairs: I) -> u64
where
    I: IntoIterator<Item = (&'a Natural, &'a Natural)>,
{
    pairs
        .into_iter()
        .filter(|(x, y)| model.predict(x) > rational(y))
        .count() as u64
}

/// Fits `mode` on `(n, ε)` training pairs.
pub fn fit(mode: FitMode, pairs: &[(Natural, Natural)], modulus_bits: u64) -> Result<LinearModel> {
    match mode {
        FitMode::FreeOls => fit_free_ols(&accumulate_par(pairs)),
        FitMode::HalfSlope => fit_half_slope(&accumulate_par(pairs)),
        FitMode::Conservative => fit_conservative(pairs.iter().map(|(x, y)| (x, y))),
        FitMode::Provable => fit_provable(modulus_bits).map(|mut m| {
            m.train_count = pairs.len() as u64;
            m
        }),
    }
}
