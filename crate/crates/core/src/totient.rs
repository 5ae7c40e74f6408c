//! Totient, the ε parametrization `φ = 2(ε + 1)`, and the Hyper-X / Hyper-Y
//! coordinates of a modulus.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::ntheory::Natural;

/// Largest argument accepted by [`totient_bruteforce`].
pub const BRUTEFORCE_LIMIT: u64 = 10_000_000;

/// `(X, Y)` with `X = 2(n−ε)(n+1) − (n−1)²` and `Y = 4n(n−ε)²`.
/// `X` goes negative once `(n−1)²` dominates, which is the usual case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperPoint {
    pub x: BigInt,
    pub y: Natural,
}

/// `(p−1)(q−1)` for distinct primes.
pub fn totient_semiprime(p: &Natural, q: &Natural) -> Result<Natural> {
    if p == q {
        return Err(Error::domain("totient_semiprime needs p ≠ q"));
    }
    if p.is_zero() || q.is_zero() {
        return Err(Error::domain("totient_semiprime needs nonzero primes"));
    }
    Ok((p - 1u32) * (q - 1u32))
}

/// `φ/2 − 1`.
pub fn epsilon_of_phi(phi: &Natural) -> Result<Natural> {
    if phi.is_odd() {
        return Err(Error::domain(format!("phi must be even, got {phi}")));
    }
    if phi < &Natural::from(4u32) {
        return Err(Error::domain(format!("phi must be ≥ 4, got {phi}")));
    }
    Ok(phi / 2u32 - 1u32)
}

/// `2(ε + 1)`.
pub fn phi_of_epsilon(epsilon: &Natural) -> Natural {
    (epsilon + 1u32) << 1u32
}

pub fn hyper_point(n: &Natural, epsilon: &Natural) -> Result<HyperPoint> {
    if epsilon >= n {
        return Err(Error::domain("hyper_point needs ε < n"));
    }
    let gap = n - epsilon;
    let n_minus_1 = if n.is_zero() { Natural::zero() } else { n - 1u32 };
    let lhs = BigInt::from_biguint(Sign::Plus, (&gap * (n + 1u32)) << 1u32);
    let x = lhs - BigInt::from_biguint(Sign::Plus, &n_minus_1 * &n_minus_1);
    let y = (n * &gap * &gap) << 2u32;
    Ok(HyperPoint { x, y })
}

/// Counts `1 ≤ k < n` coprime to `n`, with the convention φ(1) = 1.
/// Test oracle only; limited to `n ≤ 10^7`.
pub fn totient_bruteforce(n: &Natural) -> Result<Natural> {
    let v: u64 = n
        .try_into()
        .ok()
        .filter(|v| (1..=BRUTEFORCE_LIMIT).contains(v))
        .ok_or_else(|| Error::domain(format!("totient_bruteforce needs 1 ≤ n ≤ 10^7, got {n}")))?;
    if v == 1 {
        return Ok(Natural::one());
    }
    let count = (1..v).filter(|k| k.gcd(&v) == 1).count();
    Ok(Natural::from(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(v: u64) -> Natural {
        Natural::from(v)
    }

    #[test]
    fn semiprime_examples() {
        assert_eq!(totient_semiprime(&n(3), &n(5)).unwrap(), n(8));
        assert_eq!(totient_semiprime(&n(5), &n(7)).unwrap(), n(24));
        assert_eq!(totient_semiprime(&n(11), &n(13)).unwrap(), n(120));
        assert!(totient_semiprime(&n(7), &n(7)).is_err());
    }

    #[test]
    fn epsilon_conversions() {
        assert_eq!(epsilon_of_phi(&n(8)).unwrap(), n(3));
        assert_eq!(epsilon_of_phi(&n(120)).unwrap(), n(59));
        assert_eq!(epsilon_of_phi(&n(4)).unwrap(), n(1));
        assert!(epsilon_of_phi(&n(9)).is_err());
        assert!(epsilon_of_phi(&n(2)).is_err());
        assert_eq!(phi_of_epsilon(&n(3)), n(8));
        assert_eq!(phi_of_epsilon(&n(59)), n(120));
        assert_eq!(phi_of_epsilon(&n(0)), n(2));
    }

    #[test]
    fn hyper_point_examples() {
        let h = hyper_point(&n(15), &n(3)).unwrap();
        assert_eq!(h.x, BigInt::from(188));
        assert_eq!(h.y, n(8640));
        assert_eq!(n(15) * n(24 * 24), n(8640));

        let h = hyper_point(&n(143), &n(59)).unwrap();
        // 2·84·144 − 142² and 4·143·84², the latter also 143·(12·14)².
        assert_eq!(h.x, BigInt::from(4028));
        assert_eq!(h.y, n(4_036_032));
        assert_eq!(h.y, n(143) * n(168 * 168));

        assert!(hyper_point(&n(15), &n(15)).is_err());
    }

    #[test]
    fn hyper_x_in_terms_of_prime_sum() {
        // X = (s + 4)·n + s with s = p + q.
        let p = n(4_294_967_291);
        let q = n(4_294_967_279);
        let nn = &p * &q;
        let s = &p + &q;
        let eps = epsilon_of_phi(&totient_semiprime(&p, &q).unwrap()).unwrap();
        let x = hyper_point(&nn, &eps).unwrap().x;
        assert_eq!(x, BigInt::from((&s + 4u32) * &nn + &s));
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(totient_bruteforce(&n(15)).unwrap(), n(8));
        assert_eq!(totient_bruteforce(&n(7)).unwrap(), n(6));
        assert_eq!(totient_bruteforce(&n(1)).unwrap(), n(1));
        assert!(totient_bruteforce(&n(0)).is_err());
        assert!(totient_bruteforce(&n(BRUTEFORCE_LIMIT + 1)).is_err());
    }

    proptest! {
        #[test]
        fn phi_epsilon_round_trip(half in 2u64..u64::MAX / 4) {
            let phi = n(half * 2);
            prop_assert_eq!(phi_of_epsilon(&epsilon_of_phi(&phi).unwrap()), phi);
        }
    }
}
