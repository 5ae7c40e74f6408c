//! Binary floating point of arbitrary precision with directed rounding, and
//! rigorous interval evaluation of `ln` and `exp`.
//!
//! Transcendental values are computed as fixed-point intervals
//! `[lo, hi] / 2^W` that provably contain the true value; every truncating
//! step rounds outward. A caller then rounds the relevant endpoint to the
//! target precision in the safe direction.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::metrics::render_decimal;
use crate::regress::Rational;

pub const DEFAULT_PRECISION: u32 = 128;
pub const MIN_PRECISION: u32 = 53;

/// Extra fixed-point bits carried beyond the target precision.
const GUARD_BITS: u64 = 64;

/// Euler-Mascheroni constant, truncated after 110 decimal places.
const EULER_GAMMA_DIGITS: &str = "57721566490153286060651209008240243104215933593992359880576723488486772677766467093694706329174674951463144725";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    /// Toward −∞.
    Down,
    /// Toward +∞.
    Up,
    /// Nearest, ties away from zero.
    Nearest,
}

/// `mantissa · 2^exponent`, with `|mantissa| < 2^precision` and an odd
/// mantissa unless the value is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigFloat {
    mantissa: BigInt,
    exponent: i64,
    precision: u32,
}

impl BigFloat {
    pub fn zero(precision: u32) -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
            precision,
        }
    }

    /// Rounds an exact rational to `precision` significant bits.
    pub fn from_rational(value: &Rational, precision: u32, rounding: Rounding) -> Result<Self> {
        check_precision(precision)?;
        if value.is_zero() {
            return Ok(Self::zero(precision));
        }
        let num = value.numer();
        let den = value.denom();
        // Choose e so that |value| / 2^e has `precision` bits before rounding.
        let mut e = num.bits() as i64 - den.bits() as i64 - precision as i64;
        loop {
            let (n, d) = if e >= 0 {
                (num.clone(), den << (e as u64))
            } else {
                (num << ((-e) as u64), den.clone())
            };
            let (q, r) = n.div_mod_floor(&d);
            let m = if r.is_zero() {
                q
            } else {
                match rounding {
                    Rounding::Down => q,
                    Rounding::Up => q + 1,
                    Rounding::Nearest => {
                        let twice: BigInt = &r * 2;
                        match twice.cmp(&d) {
                            Ordering::Less => q,
                            Ordering::Greater => q + 1,
                            Ordering::Equal if q.is_negative() => q,
                            Ordering::Equal => q + 1,
                        }
                    }
                }
            };
            if m.bits() > precision as u64 {
                e += 1;
                continue;
            }
            return Ok(Self::normalized(m, e, precision));
        }
    }

    fn normalized(mut mantissa: BigInt, mut exponent: i64, precision: u32) -> Self {
        if mantissa.is_zero() {
            return Self::zero(precision);
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            mantissa >>= tz;
            exponent += tz as i64;
        }
        Self {
            mantissa,
            exponent,
            precision,
        }
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    /// Exact value.
    pub fn to_rational(&self) -> Rational {
        if self.exponent >= 0 {
            Rational::from_integer(&self.mantissa << (self.exponent as u64))
        } else {
            Rational::new(self.mantissa.clone(), BigInt::one() << ((-self.exponent) as u64))
        }
    }

    /// Exact comparison against a rational.
    pub fn cmp_rational(&self, other: &Rational) -> Ordering {
        self.to_rational().cmp(other)
    }

    /// Decimal digits that cover the binary precision.
    pub fn decimal_digits(&self) -> usize {
        (self.precision as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1
    }

    pub fn to_f64(&self) -> f64 {
        render_decimal(&self.to_rational(), 20).parse().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_decimal(&self.to_rational(), self.decimal_digits()))
    }
}

pub(crate) fn check_precision(precision: u32) -> Result<()> {
    if precision < MIN_PRECISION {
        return Err(Error::domain(format!(
            "precision must be ≥ {MIN_PRECISION} bits, got {precision}"
        )));
    }
    Ok(())
}

/// A closed interval `[lo, hi] / 2^scale` containing the true value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Interval {
    lo: BigInt,
    hi: BigInt,
    scale: u64,
}

fn div_ceil(n: &BigInt, d: &BigInt) -> BigInt {
    n.div_ceil(d)
}

impl Interval {
    /// Working fixed-point scale for a result needed at `precision` bits.
    pub(crate) fn scale_for(precision: u32) -> u64 {
        precision as u64 + GUARD_BITS
    }

    pub(crate) fn exact(value: &Rational, scale: u64) -> Self {
        let n = value.numer() << scale;
        Self {
            lo: n.div_floor(value.denom()),
            hi: div_ceil(&n, value.denom()),
            scale,
        }
    }

    pub(crate) fn from_integer(v: &BigInt, scale: u64) -> Self {
        let s = v << scale;
        Self {
            lo: s.clone(),
            hi: s,
            scale,
        }
    }

    pub(crate) fn lower(&self) -> Rational {
        Rational::new(self.lo.clone(), BigInt::one() << self.scale)
    }

    pub(crate) fn upper(&self) -> Rational {
        Rational::new(self.hi.clone(), BigInt::one() << self.scale)
    }

    pub(crate) fn mul(&self, other: &Self) -> Self {
        let one = BigInt::one() << self.scale;
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let min = products.iter().min().unwrap();
        let max = products.iter().max().unwrap();
        Self {
            lo: min.div_floor(&one),
            hi: div_ceil(max, &one),
            scale: self.scale,
        }
    }

    /// Division by an interval that lies strictly above zero.
    pub(crate) fn div(&self, other: &Self) -> Result<Self> {
        if !other.lo.is_positive() {
            return Err(Error::domain("interval division by a non-positive divisor"));
        }
        let lo_num = &self.lo << self.scale;
        let hi_num = &self.hi << self.scale;
        let quotients_lo = [lo_num.div_floor(&other.lo), lo_num.div_floor(&other.hi)];
        let quotients_hi = [div_ceil(&hi_num, &other.lo), div_ceil(&hi_num, &other.hi)];
        Ok(Self {
            lo: quotients_lo.into_iter().min().unwrap(),
            hi: quotients_hi.into_iter().max().unwrap(),
            scale: self.scale,
        })
    }

    pub(crate) fn halve(&self) -> Self {
        Self {
            lo: self.lo.div_floor(&BigInt::from(2)),
            hi: div_ceil(&self.hi, &BigInt::from(2)),
            scale: self.scale,
        }
    }

    /// Natural logarithm of an interval that lies strictly above zero.
    pub(crate) fn ln(&self) -> Result<Self> {
        if !self.lo.is_positive() {
            return Err(Error::domain("logarithm of a non-positive value"));
        }
        let ln2 = ln2(self.scale);
        let (lo, _) = ln_fixed(&self.lo, self.scale, &ln2);
        let (_, hi) = ln_fixed(&self.hi, self.scale, &ln2);
        Ok(Self {
            lo,
            hi,
            scale: self.scale,
        })
    }

    /// `exp` of an interval inside `[0, 1]`.
    pub(crate) fn exp_unit(&self) -> Result<Self> {
        let one = BigInt::one() << self.scale;
        if self.lo.is_negative() || self.hi > one {
            return Err(Error::domain("exp_unit argument outside [0, 1]"));
        }
        Ok(Self {
            lo: exp_fixed_lower(&self.lo, self.scale),
            hi: exp_fixed_upper(&self.hi, self.scale),
            scale: self.scale,
        })
    }
}

/// `2·atanh(num/den)` bounds at `scale`, for `0 ≤ num/den < 1/2`.
fn two_atanh(num: &BigInt, den: &BigInt, scale: u64) -> (BigInt, BigInt) {
    let one = BigInt::one() << scale;
    let scaled = num << scale;

    // Lower: every truncation floors.
    let z = scaled.div_floor(den);
    let zz = (&z * &z).div_floor(&one);
    let mut power = z;
    let mut lo = BigInt::zero();
    let mut k = 1u64;
    while !power.is_zero() {
        lo += power.div_floor(&BigInt::from(k));
        power = (&power * &zz).div_floor(&one);
        k += 2;
    }

    // Upper: every truncation ceils; once the running power is ≤ 1 ulp the
    // remaining tail is below 9/8 ulp, covered by adding 2.
    let z = div_ceil(&scaled, den);
    let zz = div_ceil(&(&z * &z), &one);
    let mut power = z;
    let mut hi = BigInt::zero();
    let mut k = 1u64;
    while power > BigInt::one() {
        hi += div_ceil(&power, &BigInt::from(k));
        power = div_ceil(&(&power * &zz), &one);
        k += 2;
    }
    hi += 2;

    (lo * 2, hi * 2)
}

/// ln 2 = 2·atanh(1/3).
fn ln2(scale: u64) -> (BigInt, BigInt) {
    two_atanh(&BigInt::one(), &BigInt::from(3), scale)
}

/// Bounds on `ln(x / 2^scale)` for `x > 0`.
fn ln_fixed(x: &BigInt, scale: u64, ln2: &(BigInt, BigInt)) -> (BigInt, BigInt) {
    // x / 2^scale = 2^k · m with m = x / 2^(bits−1) ∈ [1, 2).
    let top = x.bits() - 1;
    let k = top as i64 - scale as i64;
    let d = BigInt::one() << top;
    let (a_lo, a_hi) = two_atanh(&(x - &d), &(x + &d), scale);
    let kb = BigInt::from(k);
    if k >= 0 {
        (&kb * &ln2.0 + a_lo, &kb * &ln2.1 + a_hi)
    } else {
        (&kb * &ln2.1 + a_lo, &kb * &ln2.0 + a_hi)
    }
}

fn exp_fixed_lower(x: &BigInt, scale: u64) -> BigInt {
    let one = BigInt::one() << scale;
    let mut term = one.clone();
    let mut sum = one.clone();
    let mut j = 1u64;
    while !term.is_zero() {
        term = (&term * x).div_floor(&(&one * j));
        sum += &term;
        j += 1;
    }
    sum
}

fn exp_fixed_upper(x: &BigInt, scale: u64) -> BigInt {
    // Term ratios are ≤ x/(j+1) ≤ 1/2, so the tail after a ≤ 1 ulp term is
    // at most 2 ulp.
    let one = BigInt::one() << scale;
    let mut term = one.clone();
    let mut sum = one.clone();
    let mut j = 1u64;
    while term > BigInt::one() {
        term = div_ceil(&(&term * x), &(&one * j));
        sum += &term;
        j += 1;
    }
    sum + 2
}

/// Interval containing the Euler-Mascheroni constant.
pub(crate) fn euler_gamma(scale: u64) -> Interval {
    let digits: BigInt = EULER_GAMMA_DIGITS.parse().expect("constant parses");
    let den = num_traits::pow(BigInt::from(10), EULER_GAMMA_DIGITS.len());
    let lo = (&digits << scale).div_floor(&den);
    let hi = div_ceil(&((digits + 1) << scale), &den);
    Interval { lo, hi, scale }
}

/// Bounds on `ln(value)` rounded outward to `precision` bits.
pub fn ln_bounds(value: &Rational, precision: u32) -> Result<(BigFloat, BigFloat)> {
    check_precision(precision)?;
    let iv = Interval::exact(value, Interval::scale_for(precision)).ln()?;
    Ok((
        BigFloat::from_rational(&iv.lower(), precision, Rounding::Down)?,
        BigFloat::from_rational(&iv.upper(), precision, Rounding::Up)?,
    ))
}

/// Bounds on `exp(value)` for `value ∈ [0, 1]`.
pub fn exp_bounds(value: &Rational, precision: u32) -> Result<(BigFloat, BigFloat)> {
    check_precision(precision)?;
    let iv = Interval::exact(value, Interval::scale_for(precision)).exp_unit()?;
    Ok((
        BigFloat::from_rational(&iv.lower(), precision, Rounding::Down)?,
        BigFloat::from_rational(&iv.upper(), precision, Rounding::Up)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn r(num: i64, den: i64) -> Rational {
        Rational::new(num.into(), den.into())
    }

    /// `digits` read as a decimal with one integer digit, widened by one unit
    /// in the last place.
    fn reference(digits: &str) -> (Rational, Rational) {
        let (int, frac) = digits.split_once('.').unwrap();
        let negative = int.starts_with('-');
        let mag = BigInt::from_str(&format!("{}{frac}", int.trim_start_matches('-'))).unwrap();
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let sign = if negative { -1 } else { 1 };
        let a = Rational::new(&mag * sign, den.clone());
        let b = Rational::new((&mag + 1) * sign, den);
        if a < b { (a, b) } else { (b, a) }
    }

    fn assert_encloses(bounds: (BigFloat, BigFloat), digits: &str) {
        let (lo_ref, hi_ref) = reference(digits);
        assert!(bounds.0.to_rational() <= lo_ref, "lower {} vs {digits}", bounds.0);
        assert!(bounds.1.to_rational() >= hi_ref, "upper {} vs {digits}", bounds.1);
        // and tight: within 2^-(precision-8) relative
        let width = bounds.1.to_rational() - bounds.0.to_rational();
        let scale = Rational::new(BigInt::one(), BigInt::one() << (bounds.0.precision() as u64 - 8));
        assert!(width <= scale * lo_ref.abs().max(Rational::one()), "interval too wide");
    }

    #[test]
    fn ln_matches_reference_values() {
        let ln2 = "0.69314718055994530941723212145817656807550013436025525412068000949339362196969472";
        let ln1e6 = "13.815510557964274104107948728106185245606608931772637856199967405805435658064115";
        let ln3_7 = "-0.8472978603872036137101075065206540249895941717591117367246958163000855695334603";
        for prec in [64u32, 128, 200] {
            assert_encloses(ln_bounds(&r(2, 1), prec).unwrap(), ln2);
            assert_encloses(ln_bounds(&r(1_000_000, 1), prec).unwrap(), ln1e6);
            assert_encloses(ln_bounds(&r(3, 7), prec).unwrap(), ln3_7);
        }
        let (lo, hi) = ln_bounds(&r(1, 1), 128).unwrap();
        assert!(lo.to_rational() <= Rational::zero() && hi.to_rational() >= Rational::zero());
        assert!(ln_bounds(&r(0, 1), 128).is_err());
        assert!(ln_bounds(&r(-1, 1), 128).is_err());
    }

    #[test]
    fn exp_matches_reference_values() {
        let sqrt_e = "1.6487212707001281468486507878141635716537761007101480115750793116406610211942156";
        assert_encloses(exp_bounds(&r(1, 2), 128).unwrap(), sqrt_e);
        let (lo, hi) = exp_bounds(&r(0, 1), 128).unwrap();
        assert!(lo.to_rational() <= Rational::one() && hi.to_rational() >= Rational::one());
        assert!(exp_bounds(&r(3, 2), 128).is_err());
    }

    #[test]
    fn exp_gamma_encloses_reference() {
        let scale = Interval::scale_for(128);
        let e_gamma = euler_gamma(scale).exp_unit().unwrap();
        let (lo_ref, hi_ref) =
            reference("1.7810724179901979852365041031071795491696452143034302053576658765128410768135883");
        assert!(e_gamma.lower() <= lo_ref);
        assert!(e_gamma.upper() >= hi_ref);
    }

    #[test]
    fn rounding_directions() {
        let third = r(1, 3);
        let down = BigFloat::from_rational(&third, 53, Rounding::Down).unwrap();
        let up = BigFloat::from_rational(&third, 53, Rounding::Up).unwrap();
        assert!(down.to_rational() < third && third < up.to_rational());
        assert_eq!(
            up.to_rational() - down.to_rational(),
            Rational::new(BigInt::one(), BigInt::one() << 54)
        );
        let neg = BigFloat::from_rational(&-third.clone(), 53, Rounding::Down).unwrap();
        assert!(neg.to_rational() < -third);
    }

    #[test]
    fn exact_values_survive() {
        for v in [r(12, 1), r(-3, 8), r(1 << 40, 1), r(0, 1)] {
            for mode in [Rounding::Down, Rounding::Up, Rounding::Nearest] {
                assert_eq!(BigFloat::from_rational(&v, 64, mode).unwrap().to_rational(), v);
            }
        }
    }

    #[test]
    fn mantissa_fits_precision() {
        let v = Rational::new(BigInt::from(10).pow(80) + 7, BigInt::from(3));
        for mode in [Rounding::Down, Rounding::Up, Rounding::Nearest] {
            let f = BigFloat::from_rational(&v, 60, mode).unwrap();
            assert!(f.mantissa.bits() <= 60);
        }
        // rounding up across a power of two
        let just_below = Rational::new((BigInt::one() << 70) - 1, BigInt::one());
        let f = BigFloat::from_rational(&just_below, 53, Rounding::Up).unwrap();
        assert_eq!(f.to_rational(), Rational::from_integer(BigInt::one() << 70));
    }

    #[test]
    fn precision_floor_enforced() {
        assert!(BigFloat::from_rational(&r(1, 1), 52, Rounding::Down).is_err());
    }

    #[test]
    fn display_uses_decimal_digits() {
        let f = BigFloat::from_rational(&r(1, 4), 128, Rounding::Nearest).unwrap();
        assert!(f.to_string().starts_with("0.2500"));
        assert_eq!(f.to_f64(), 0.25);
    }
}
