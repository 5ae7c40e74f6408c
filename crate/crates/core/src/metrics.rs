//! Exact evaluation metrics (MAE, MSE, R²), residual histograms and decimal
//! rendering of rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntheory::Natural;
use crate::regress::{rational, LinearModel, Rational, RationalJson};
use crate::samples::RsaSample;

/// Significant digits used when rendering metrics.
pub const DEFAULT_DIGITS: usize = 17;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub count: u64,
    pub mae: Rational,
    pub mse: Rational,
    pub r2: Rational,
    pub digits: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsFile {
    count: u64,
    mae: RationalJson,
    mse: RationalJson,
    r2: RationalJson,
    digits: usize,
    rendered: Rendered,
}

#[derive(Serialize, Deserialize)]
struct Rendered {
    mae: String,
    mse: String,
    r2: String,
}

impl MetricsReport {
    pub fn with_digits(mut self, digits: usize) -> Self {
        self.digits = digits.max(1);
        self
    }

    /// `(mae, mse, r2)` rendered at `self.digits` significant digits.
    pub fn rendered(&self) -> (String, String, String) {
        (
            render_decimal(&self.mae, self.digits),
            render_decimal(&self.mse, self.digits),
            render_decimal(&self.r2, self.digits),
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (mae, mse, r2) = self.rendered();
        serde_json::to_value(MetricsFile {
            count: self.count,
            mae: (&self.mae).into(),
            mse: (&self.mse).into(),
            r2: (&self.r2).into(),
            digits: self.digits,
            rendered: Rendered { mae, mse, r2 },
        })
        .expect("metrics serialize")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let f: MetricsFile =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("metrics: {e}")))?;
        Ok(Self {
            count: f.count,
            mae: f.mae.to_rational()?,
            mse: f.mse.to_rational()?,
            r2: f.r2.to_rational()?,
            digits: f.digits,
        })
    }
}

/// Streaming, mergeable accumulator for a fixed model.
///
/// Residuals of `y − (a·x + b)` become integers after scaling by
/// `D = lcm(den a, den b)`, so everything is summed as big integers and only
/// divided once at the end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsAccumulator {
    scale: BigInt,
    slope_scaled: BigInt,
    intercept_scaled: BigInt,
    count: u64,
    sum_abs: BigInt,
    sum_sq: BigInt,
    sum_y: BigInt,
    sum_yy: BigInt,
}

impl MetricsAccumulator {
    pub fn new(model: &LinearModel) -> Self {
        let scale = model.slope.denom().lcm(model.intercept.denom());
        let slope_scaled = model.slope.numer() * (&scale / model.slope.denom());
        let intercept_scaled = model.intercept.numer() * (&scale / model.intercept.denom());
        Self {
            scale,
            slope_scaled,
            intercept_scaled,
            count: 0,
            sum_abs: BigInt::zero(),
            sum_sq: BigInt::zero(),
            sum_y: BigInt::zero(),
            sum_yy: BigInt::zero(),
        }
    }

    fn empty_like(&self) -> Self {
        Self {
            count: 0,
            sum_abs: BigInt::zero(),
            sum_sq: BigInt::zero(),
            sum_y: BigInt::zero(),
            sum_yy: BigInt::zero(),
            ..self.clone()
        }
    }

    pub fn push(&mut self, x: &Natural, y: &Natural) {
        let x = BigInt::from(x.clone());
        let y = BigInt::from(y.clone());
        let r = &y * &self.scale - (&self.slope_scaled * &x + &self.intercept_scaled);
        self.count += 1;
        self.sum_abs += r.abs();
        self.sum_sq += &r * &r;
        self.sum_yy += &y * &y;
        self.sum_y += y;
    }

    pub fn merge(mut self, other: &Self) -> Self {
        debug_assert_eq!(self.scale, other.scale);
        self.count += other.count;
        self.sum_abs += &other.sum_abs;
        self.sum_sq += &other.sum_sq;
        self.sum_y += &other.sum_y;
        self.sum_yy += &other.sum_yy;
        self
    }

    pub fn finish(&self) -> Result<MetricsReport> {
        if self.count == 0 {
            return Err(Error::domain("metrics of an empty evaluation set"));
        }
        let n = BigInt::from(self.count);
        let d = &self.scale;
        let mae = Rational::new(self.sum_abs.clone(), &n * d);
        let mse = Rational::new(self.sum_sq.clone(), &n * d * d);
        // SStot·N = N·Σy² − (Σy)²
        let ss_tot_n = &n * &self.sum_yy - &self.sum_y * &self.sum_y;
        if ss_tot_n.is_zero() {
            return Err(Error::domain("R² undefined: zero variance in the target"));
        }
        let ss_res = Rational::new(self.sum_sq.clone(), d * d);
        let r2 = Rational::one() - ss_res * Rational::from_integer(n) / Rational::from_integer(ss_tot_n);
        Ok(MetricsReport {
            count: self.count,
            mae,
            mse,
            r2,
            digits: DEFAULT_DIGITS,
        })
    }
}

/// MAE / MSE / R² of `model` on `(n, ε)` pairs, computed in parallel.
pub fn evaluate_pairs(model: &LinearModel, pairs: &[(Natural, Natural)]) -> Result<MetricsReport> {
    let proto = MetricsAccumulator::new(model);
    pairs
        .par_iter()
        .fold(
            || proto.empty_like(),
            |mut acc, (x, y)| {
                acc.push(x, y);
                acc
            },
        )
        .reduce(|| proto.empty_like(), |a, b| a.merge(&b))
        .finish()
}

pub fn evaluate(model: &LinearModel, samples: &[RsaSample]) -> Result<MetricsReport> {
    let pairs: Vec<_> = samples.iter().map(|s| (s.n.clone(), s.epsilon.clone())).collect();
    evaluate_pairs(model, &pairs)
}

/// `y − ŷ(x)` per sample.
pub fn residuals(model: &LinearModel, samples: &[RsaSample]) -> Vec<Rational> {
    samples
        .iter()
        .map(|s| rational(&s.epsilon) - model.predict(&s.n))
        .collect()
}

fn mean_of<I: Iterator<Item = Rational>>(values: I, what: &str) -> Result<Rational> {
    let (sum, count) = values.fold((Rational::zero(), 0u64), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        return Err(Error::domain(format!("{what} of an empty residual set")));
    }
    Ok(sum / Rational::from_integer(count.into()))
}

pub fn mae(residuals: &[Rational]) -> Result<Rational> {
    mean_of(residuals.iter().map(Signed::abs), "MAE")
}

pub fn mse(residuals: &[Rational]) -> Result<Rational> {
    mean_of(residuals.iter().map(|r| r * r), "MSE")
}

/// `1 − Σ(y−ŷ)² / Σ(y−ȳ)²`, with ȳ the mean of `y_true`.
pub fn r2(y_true: &[Rational], y_pred: &[Rational]) -> Result<Rational> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::domain("R² needs equal-length nonempty series"));
    }
    let n = Rational::from_integer(BigInt::from(y_true.len()));
    let (mut sum_y, mut sum_yy, mut ss_res) = (Rational::zero(), Rational::zero(), Rational::zero());
    for (y, p) in y_true.iter().zip(y_pred) {
        let r = y - p;
        ss_res += &r * &r;
        sum_yy += y * y;
        sum_y += y;
    }
    let ss_tot = sum_yy - &sum_y * &sum_y / n;
    if ss_tot.is_zero() {
        return Err(Error::domain("R² undefined: zero variance in the target"));
    }
    Ok(Rational::one() - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramSpec {
    pub bin_count: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { bin_count: 100 }
    }
}

/// Equal-width bins over `[min, max]`; left-closed, the last bin also
/// right-closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<Rational>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn histogram(residuals: &[Rational], spec: HistogramSpec) -> Result<Histogram> {
    if spec.bin_count == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    let mut min = residuals
        .first()
        .cloned()
        .ok_or_else(|| Error::domain("histogram of an empty residual set"))?;
    let mut max = min.clone();
    for r in residuals {
        if *r < min {
            min = r.clone();
        }
        if *r > max {
            max = r.clone();
        }
    }
    if min == max {
        min -= Rational::one();
        max += Rational::one();
    }
    let bins = Rational::from_integer(BigInt::from(spec.bin_count));
    let width = (&max - &min) / &bins;
    let edges: Vec<Rational> = (0..=spec.bin_count)
        .map(|i| &min + &width * Rational::from_integer(BigInt::from(i)))
        .collect();
    let mut counts = vec![0u64; spec.bin_count];
    for r in residuals {
        let pos = ((r - &min) / &width).floor().to_integer();
        let idx = usize::try_from(pos).unwrap_or(usize::MAX).min(spec.bin_count - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

fn pow10(k: usize) -> BigInt {
    num_traits::pow(BigInt::from(10), k)
}

/// Rounds `num/den` (den > 0) to the nearest integer, ties to even.
fn round_half_even(num: &BigInt, den: &BigInt) -> BigInt {
    let (q, r) = num.div_mod_floor(den);
    let twice: BigInt = &r * 2;
    match twice.cmp(den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal if q.is_even() => q,
        std::cmp::Ordering::Equal => q + 1,
    }
}

/// Decimal rendering with `significant_digits` digits, round-half-even.
/// Plain notation below 10^21, `d.ddde+N` at or above.
pub fn render_decimal(value: &Rational, significant_digits: usize) -> String {
    let digits = significant_digits.max(1);
    if value.is_zero() {
        return if digits == 1 {
            "0".to_string()
        } else {
            format!("0.{}", "0".repeat(digits - 1))
        };
    }
    let sign = if value.is_negative() { "-" } else { "" };
    let num = value.numer().abs();
    let den = value.denom().clone();

    // e = ⌊log10 |v|⌋
    let mut e = num.to_string().len() as i64 - den.to_string().len() as i64;
    let ge_pow = |e: i64| -> bool {
        // |v| ≥ 10^e
        if e >= 0 {
            num >= &den * pow10(e as usize)
        } else {
            &num * pow10((-e) as usize) >= den
        }
    };
    while !ge_pow(e) {
        e -= 1;
    }
    while ge_pow(e + 1) {
        e += 1;
    }

    let shift = digits as i64 - 1 - e;
    let mut mantissa = if shift >= 0 {
        round_half_even(&(&num * pow10(shift as usize)), &den)
    } else {
        round_half_even(&num, &(&den * pow10((-shift) as usize)))
    };
    if mantissa == pow10(digits) {
        mantissa /= 10;
        e += 1;
    }
    let m = mantissa.to_string();
    debug_assert_eq!(m.len(), digits);

    if e >= 21 {
        let (head, tail) = m.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e+{e}")
        } else {
            format!("{sign}{head}.{tail}e+{e}")
        };
    }
    if e < 0 {
        return format!("{sign}0.{}{m}", "0".repeat((-e - 1) as usize));
    }
    let int_len = e as usize + 1;
    if int_len >= digits {
        format!("{sign}{m}{}", "0".repeat(int_len - digits))
    } else {
        format!("{sign}{}.{}", &m[..int_len], &m[int_len..])
    }
}

/// Fixed-point rendering with exactly `decimals` fractional digits,
/// round-half-even.
pub fn render_fixed(value: &Rational, decimals: usize) -> String {
    let scaled = round_half_even(&(value.numer() * pow10(decimals)), value.denom());
    let sign = if scaled.is_negative() { "-" } else { "" };
    let digits = format!("{:0>width$}", scaled.abs().to_string(), width = decimals + 1);
    let (int, frac) = digits.split_at(digits.len() - decimals);
    if decimals == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}
