//! Classical bounds on φ(n) and the learned lower bound, side by side.
//!
//! | bound      | statement                         | rounding |
//! |------------|-----------------------------------|----------|
//! | Sierpiński | φ(n) ≤ n − √n (composite n)       | up       |
//! | Kendall    | φ(n) > n^(2/3) for n > 30         | exact    |
//! | Hatalová   | φ(n) > (ln 2 / 2)·n / ln n, n ≥ 3 | down     |
//! | Fang       | n / (e^γ ln ln n) + O(·)          | down, reported only |
//!
//! The Fang expression drops its error term, so it is never used as a
//! verdict. Its `e^γ loglog n` is read as `e^γ · ln ln n`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::bigfloat::{check_precision, euler_gamma, BigFloat, Interval, Rounding};
use crate::error::{Error, Result};
use crate::ntheory::{iroot, isqrt, Natural};
use crate::regress::{rational, LinearModel, Rational};
use crate::totient::totient_semiprime;

pub use crate::bigfloat::DEFAULT_PRECISION;

/// `n − √n`, rounded toward +∞.
pub fn sierpinski_upper(n: &Natural, precision: u32) -> Result<BigFloat> {
    check_precision(precision)?;
    let scale = Interval::scale_for(precision);
    // ⌊√(n·4^scale)⌋ / 2^scale ≤ √n, so the difference is an upper bound.
    let root_floor = isqrt(&(n << (2 * scale)));
    let value = rational(n) - Rational::new(BigInt::from(root_floor), BigInt::one() << scale);
    BigFloat::from_rational(&value, precision, Rounding::Up)
}

/// `⌊n^(2/3)⌋ = ⌊(n²)^(1/3)⌋`, exact.
pub fn kendall_lower(n: &Natural) -> Result<Natural> {
    if n <= &Natural::from(30u32) {
        return Err(Error::domain(format!("Kendall bound needs n > 30, got {n}")));
    }
    iroot(&(n * n), 3)
}

/// `φ > n^(2/3)`, decided exactly as `φ³ > n²`.
pub fn kendall_holds(n: &Natural, phi: &Natural) -> bool {
    phi.pow(3) > n * n
}

/// `(ln 2 / 2)·n / ln n`, rounded toward −∞.
pub fn hatalova_lower(n: &Natural, precision: u32) -> Result<BigFloat> {
    check_precision(precision)?;
    if n < &Natural::from(3u32) {
        return Err(Error::domain(format!("Hatalová bound needs n ≥ 3, got {n}")));
    }
    let scale = Interval::scale_for(precision);
    let two = Interval::from_integer(&BigInt::from(2), scale);
    let ln2 = two.ln()?;
    let nv = Interval::from_integer(&BigInt::from(n.clone()), scale);
    let value = ln2.halve().mul(&nv).div(&nv.ln()?)?;
    BigFloat::from_rational(&value.lower(), precision, Rounding::Down)
}

/// `n / (e^γ · ln ln n)`, rounded toward −∞. Reference curve only.
pub fn fang_main_term(n: &Natural, precision: u32) -> Result<BigFloat> {
    check_precision(precision)?;
    if n < &Natural::from(16u32) {
        return Err(Error::domain(format!("Fang main term needs n ≥ 16, got {n}")));
    }
    let scale = Interval::scale_for(precision);
    let nv = Interval::from_integer(&BigInt::from(n.clone()), scale);
    let denom = euler_gamma(scale).exp_unit()?.mul(&nv.ln()?.ln()?);
    let value = nv.div(&denom)?;
    BigFloat::from_rational(&value.lower(), precision, Rounding::Down)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdicts {
    pub sierpinski: bool,
    pub kendall: Option<bool>,
    pub hatalova: bool,
    pub learned: Option<bool>,
}

impl Verdicts {
    /// Every classical bound that applies is satisfied.
    pub fn classical_pass(&self) -> bool {
        self.sierpinski && self.hatalova && self.kendall.unwrap_or(true)
    }
}

/// `(bound − φ) / φ` for each bound present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tightness {
    pub sierpinski: BigFloat,
    pub kendall: Option<BigFloat>,
    pub hatalova: BigFloat,
    pub learned: Option<BigFloat>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundReport {
    pub n: Natural,
    pub phi: Option<Natural>,
    pub learned_lower: Option<Rational>,
    pub sierpinski_upper: BigFloat,
    pub kendall_lower: Option<Natural>,
    pub hatalova_lower: BigFloat,
    /// Heuristic: main term only, never a verdict.
    pub fang_main_term: Option<BigFloat>,
    pub verdicts: Option<Verdicts>,
    pub tightness: Option<Tightness>,
}

pub const CSV_HEADER: &str = "n,phi,learned_lower,kendall_lower,hatalova_lower,sierpinski_upper,fang_main_term,kendall_ok,hatalova_ok,sierpinski_ok,learned_ok";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl BoundReport {
    /// Learned bound strictly above both classical lower bounds.
    pub fn learned_dominates(&self) -> Option<bool> {
        let learned = self.learned_lower.as_ref()?;
        let above_kendall = self
            .kendall_lower
            .as_ref()
            .is_none_or(|k| *learned > rational(k));
        let above_hatalova = self.hatalova_lower.cmp_rational(learned) == Ordering::Less;
        Some(above_kendall && above_hatalova)
    }

    pub fn csv_row(&self) -> String {
        let v = self.verdicts.as_ref();
        [
            self.n.to_string(),
            opt(self.phi.as_ref()),
            opt(self.learned_lower.as_ref()),
            opt(self.kendall_lower.as_ref()),
            self.hatalova_lower.to_string(),
            self.sierpinski_upper.to_string(),
            opt(self.fang_main_term.as_ref()),
            opt(v.and_then(|v| v.kendall)),
            opt(v.map(|v| v.hatalova)),
            opt(v.map(|v| v.sierpinski)),
            opt(v.and_then(|v| v.learned)),
        ]
        .join(",")
    }
}

fn tightness(bound: &Rational, phi: &Rational, precision: u32) -> Result<BigFloat> {
    BigFloat::from_rational(&((bound - phi) / phi), precision, Rounding::Nearest)
}

/// Evaluates every bound at `n`. Verdicts and tightness need the factors;
/// the learned bound needs a slope-½ model.
pub fn compare(
    n: &Natural,
    factors: Option<(&Natural, &Natural)>,
    model: Option<&LinearModel>,
    precision: u32,
) -> Result<BoundReport> {
    let phi = match factors {
        Some((p, q)) => {
            if &(p * q) != n {
                return Err(Error::domain(format!("{p}·{q} ≠ {n}")));
            }
            Some(totient_semiprime(p, q)?)
        }
        None => None,
    };
    let learned_lower = model.map(|m| m.phi_lower_bound(n)).transpose()?;
    let sierpinski_upper = sierpinski_upper(n, precision)?;
    let kendall_lower = (n > &Natural::from(30u32)).then(|| kendall_lower(n)).transpose()?;
    let hatalova_lower = hatalova_lower(n, precision)?;
    let fang_main_term = (n >= &Natural::from(16u32))
        .then(|| fang_main_term(n, precision))
        .transpose()?;

    let (verdicts, tight) = match &phi {
        Some(phi) if !phi.is_zero() => {
            let phi_r = rational(phi);
            let verdicts = Verdicts {
                sierpinski: sierpinski_upper.cmp_rational(&phi_r) != Ordering::Less,
                kendall: kendall_lower.as_ref().map(|_| kendall_holds(n, phi)),
                hatalova: hatalova_lower.cmp_rational(&phi_r) == Ordering::Less,
                learned: learned_lower.as_ref().map(|l| *l < phi_r),
            };
            let tight = Tightness {
                sierpinski: tightness(&sierpinski_upper.to_rational(), &phi_r, precision)?,
                kendall: kendall_lower
                    .as_ref()
                    .map(|k| tightness(&rational(k), &phi_r, precision))
                    .transpose()?,
                hatalova: tightness(&hatalova_lower.to_rational(), &phi_r, precision)?,
                learned: learned_lower
                    .as_ref()
                    .map(|l| tightness(l, &phi_r, precision))
                    .transpose()?,
            };
            (Some(verdicts), Some(tight))
        }
        _ => (None, None),
    };

    Ok(BoundReport {
        n: n.clone(),
        phi,
        learned_lower,
        sierpinski_upper,
        kendall_lower,
        hatalova_lower,
        fang_main_term,
        verdicts,
        tightness: tight,
    })
}
