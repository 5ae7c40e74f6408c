//! Arbitrary-precision number theory: modular exponentiation, Miller-Rabin,
//! integer roots and perfect-square detection.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::samples::RngStream;

/// Arbitrary-precision non-negative integer.
pub type Natural = BigUint;

/// Witnesses that make Miller-Rabin exact for every n < 2^64.
const DETERMINISTIC_WITNESSES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalityMode {
    /// Fixed witness set below 2^64, `rounds` random witnesses above.
    DeterministicSmall,
    /// Always `rounds` random witnesses.
    Probabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimalityPolicy {
    pub mode: PrimalityMode,
    pub rounds: u32,
}

impl PrimalityPolicy {
    pub fn probabilistic(rounds: u32) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::domain("probabilistic primality needs at least one round"));
        }
        Ok(Self {
            mode: PrimalityMode::Probabilistic,
            rounds,
        })
    }
}

impl Default for PrimalityPolicy {
    fn default() -> Self {
        Self {
            mode: PrimalityMode::DeterministicSmall,
            rounds: 64,
        }
    }
}

/// `base^exponent mod modulus`.
pub fn mod_pow(base: &Natural, exponent: &Natural, modulus: &Natural) -> Result<Natural> {
    if modulus.is_zero() {
        return Err(Error::domain("mod_pow with zero modulus"));
    }
    Ok(base.modpow(exponent, modulus))
}

/// Miller-Rabin under `policy`. 0 and 1 are not prime; 2 is.
pub fn is_probable_prime(n: &Natural, policy: PrimalityPolicy, rng: &mut RngStream) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        if n == &BigUint::from(p) {
            return true;
        }
        if (n % p).is_zero() {
            return false;
        }
    }
    // n is odd and > 251 from here on.
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().expect("n - 1 > 0");
    let d = &n_minus_1 >> s;

    let small = n.bits() <= 64;
    if small && policy.mode == PrimalityMode::DeterministicSmall {
        return DETERMINISTIC_WITNESSES
            .iter()
            .all(|&a| passes_round(n, &n_minus_1, &d, s, &BigUint::from(a)));
    }

    // Random witnesses uniform in [2, n - 2].
    let span = n - 3u32;
    (0..policy.rounds.max(1)).all(|_| {
        let a = rng.below(&span) + 2u32;
        passes_round(n, &n_minus_1, &d, s, &a)
    })
}

/// One Miller-Rabin round with n - 1 = d·2^s. True when `a` is not a witness
/// of compositeness.
fn passes_round(n: &Natural, n_minus_1: &Natural, d: &Natural, s: u64, a: &Natural) -> bool {
    let mut x = a.modpow(d, n);
    if x.is_one() || &x == n_minus_1 {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if &x == n_minus_1 {
            return true;
        }
        if x.is_one() {
            return false;
        }
    }
    false
}

/// `⌊√n⌋`.
pub fn isqrt(n: &Natural) -> Natural {
    n.sqrt()
}

/// `⌊n^(1/k)⌋`.
pub fn iroot(n: &Natural, k: u32) -> Result<Natural> {
    if k == 0 {
        return Err(Error::domain("iroot with k = 0"));
    }
    Ok(n.nth_root(k))
}

/// `(true, r)` with `r² = n` for perfect squares, else `(false, ⌊√n⌋)`.
pub fn is_perfect_square(n: &Natural) -> (bool, Natural) {
    let r = isqrt(n);
    let exact = &r * &r == *n;
    (exact, r)
}

fn residue_table(m: u32) -> Vec<bool> {
    let mut table = vec![false; m as usize];
    for x in 0..m {
        table[(x * x % m) as usize] = true;
    }
    table
}

/// `Some(√n)` when `n` is a perfect square. Most non-squares are rejected by
/// quadratic residues mod 64, 63, 65 and 11 without taking a root.
pub fn exact_sqrt(n: &Natural) -> Option<Natural> {
    use std::sync::OnceLock;
    static TABLES: OnceLock<[(u32, Vec<bool>); 4]> = OnceLock::new();
    let tables = TABLES.get_or_init(|| [64, 63, 65, 11].map(|m| (m, residue_table(m))));
    let low = n.iter_u64_digits().next().unwrap_or(0);
    if !tables[0].1[(low & 63) as usize] {
        return None;
    }
    // 63 · 65 · 11 = 45045
    let r = (n % 45045u32).to_u32().expect("below modulus");
    if tables[1..].iter().any(|(m, t)| !t[(r % m) as usize]) {
        return None;
    }
    match is_perfect_square(n) {
        (true, root) => Some(root),
        (false, _) => None,
    }
}

/// Greatest common divisor, re-exported for callers that only see `Natural`.
pub fn gcd(a: &Natural, b: &Natural) -> Natural {
    a.gcd(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(v: u64) -> Natural {
        Natural::from(v)
    }

    fn rng() -> RngStream {
        RngStream::new(0xC0FFEE, 0)
    }

    fn trial_division(v: u64) -> bool {
        if v < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= v {
            if v.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn mod_pow_examples() {
        assert_eq!(mod_pow(&n(2), &n(10), &n(1000)).unwrap(), n(24));
        assert_eq!(mod_pow(&n(5), &n(0), &n(7)).unwrap(), n(1));
        assert_eq!(mod_pow(&n(0), &n(5), &n(7)).unwrap(), n(0));
        assert!(matches!(
            mod_pow(&n(2), &n(3), &n(0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mod_pow_matches_naive_exhaustive_sample() {
        for m in (1u64..1024).step_by(37) {
            for a in (0u64..1024).step_by(53) {
                for b in (0u64..1024).step_by(61) {
                    let mut acc = 1 % m;
                    for _ in 0..b {
                        acc = acc * a % m;
                    }
                    assert_eq!(mod_pow(&n(a), &n(b), &n(m)).unwrap(), n(acc), "{a}^{b} mod {m}");
                }
            }
        }
    }

    #[test]
    fn primality_examples() {
        let p = PrimalityPolicy::default();
        let mut r = rng();
        assert!(is_probable_prime(&n(7), p, &mut r));
        assert!(!is_probable_prime(&n(561), p, &mut r));
        assert!(!is_probable_prime(&n(1), p, &mut r));
        assert!(!is_probable_prime(&n(0), p, &mut r));
        assert!(is_probable_prime(&n(2), p, &mut r));
    }

    #[test]
    fn carmichael_numbers_rejected() {
        let mut r = rng();
        for c in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265, 321197185] {
            assert!(!is_probable_prime(&n(c), PrimalityPolicy::default(), &mut r), "{c}");
            assert!(
                !is_probable_prime(&n(c), PrimalityPolicy::probabilistic(20).unwrap(), &mut r),
                "{c}"
            );
        }
    }

    #[test]
    fn strong_pseudoprimes_to_small_bases_rejected() {
        // 3215031751 is a strong pseudoprime to bases 2, 3, 5 and 7.
        let mut r = rng();
        assert!(!is_probable_prime(&n(3_215_031_751), PrimalityPolicy::default(), &mut r));
        // 3825123056546413051 fools every base up to 23.
        assert!(!is_probable_prime(
            &n(3_825_123_056_546_413_051),
            PrimalityPolicy::default(),
            &mut r
        ));
    }

    #[test]
    fn agrees_with_trial_division_below_2_pow_20() {
        let mut r = rng();
        let p = PrimalityPolicy::default();
        for v in 0u64..(1 << 20) {
            assert_eq!(is_probable_prime(&n(v), p, &mut r), trial_division(v), "{v}");
        }
    }

    #[test]
    fn large_known_primes() {
        let mut r = rng();
        let p = PrimalityPolicy::default();
        // 2^61 - 1, 2^127 - 1 and 2^521 - 1 are Mersenne primes.
        for e in [61u32, 127, 521] {
            let m = (Natural::one() << e) - 1u32;
            assert!(is_probable_prime(&m, p, &mut r), "2^{e}-1");
        }
        let composite = ((Natural::one() << 127) - 1u32) * ((Natural::one() << 61) - 1u32);
        assert!(!is_probable_prime(&composite, p, &mut r));
        assert!(!is_probable_prime(&((Natural::one() << 128) + 1u32), p, &mut r));
    }

    #[test]
    fn probabilistic_policy_needs_rounds() {
        assert!(PrimalityPolicy::probabilistic(0).is_err());
    }

    #[test]
    fn isqrt_examples() {
        assert_eq!(isqrt(&n(0)), n(0));
        assert_eq!(isqrt(&n(15)), n(3));
        assert_eq!(isqrt(&n(16)), n(4));
        assert_eq!(isqrt(&n(1)), n(1));
        assert_eq!(isqrt(&n(u64::MAX)), n(u32::MAX as u64));
    }

    #[test]
    fn iroot_examples() {
        assert_eq!(iroot(&n(27), 3).unwrap(), n(3));
        assert_eq!(iroot(&n(35), 3).unwrap(), n(3));
        assert_eq!(iroot(&n(1), 7).unwrap(), n(1));
        assert_eq!(iroot(&n(0), 5).unwrap(), n(0));
        assert!(matches!(iroot(&n(8), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_sqrt_small_range() {
        for v in 0u64..20_000 {
            let r = (v as f64).sqrt() as u64;
            let expect = (r * r == v).then(|| n(r));
            assert_eq!(exact_sqrt(&n(v)), expect, "{v}");
        }
    }

    #[test]
    fn perfect_square_examples() {
        assert_eq!(is_perfect_square(&n(4)), (true, n(2)));
        assert_eq!(is_perfect_square(&n(5)), (false, n(2)));
        assert_eq!(is_perfect_square(&n(0)), (true, n(0)));
        assert_eq!(is_perfect_square(&n(17)), (false, n(4)));
    }

    fn big(bytes: &[u8]) -> Natural {
        Natural::from_bytes_le(bytes)
    }

    proptest! {
        #[test]
        fn isqrt_brackets(bytes in proptest::collection::vec(any::<u8>(), 0..96)) {
            let v = big(&bytes);
            let r = isqrt(&v);
            prop_assert!(&r * &r <= v);
            prop_assert!((&r + 1u32) * (&r + 1u32) > v);
        }

        #[test]
        fn iroot_brackets(bytes in proptest::collection::vec(any::<u8>(), 0..96), k in 1u32..9) {
            let v = big(&bytes);
            let r = iroot(&v, k).unwrap();
            prop_assert!(r.pow(k) <= v);
            prop_assert!((&r + 1u32).pow(k) > v);
        }

        #[test]
        fn iroot_two_is_isqrt(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let v = big(&bytes);
            prop_assert_eq!(iroot(&v, 2).unwrap(), isqrt(&v));
        }

        #[test]
        fn squares_detected(bytes in proptest::collection::vec(any::<u8>(), 0..48)) {
            let r = big(&bytes);
            let sq = &r * &r;
            prop_assert_eq!(is_perfect_square(&sq), (true, r.clone()));
            if !sq.is_zero() {
                let (is_sq, root) = is_perfect_square(&(&sq + 1u32));
                prop_assert!(!is_sq);
                prop_assert_eq!(root, r);
            }
        }

        #[test]
        fn exact_sqrt_agrees(bytes in proptest::collection::vec(any::<u8>(), 0..48), delta in 0u32..3) {
            let r = big(&bytes);
            let v = &r * &r + delta;
            let (is_sq, root) = is_perfect_square(&v);
            prop_assert_eq!(exact_sqrt(&v), is_sq.then_some(root));
        }
    }
}
