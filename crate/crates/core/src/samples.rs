//! Seeded generation of RSA semiprime samples.
//!
//! Every sample index owns its own ChaCha20 stream derived from
//! `(master_seed, index)`, so a dataset is identical no matter how many
//! workers produce it.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ntheory::{is_probable_prime, Natural, PrimalityPolicy};

/// Deterministic random stream, a pure function of `(master_seed, stream_index)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform integer in `[0, 2^bits)`.
    pub fn random_bits(&mut self, bits: u64) -> Natural {
        if bits == 0 {
            return Natural::zero();
        }
        let len = bits.div_ceil(8) as usize;
        let mut buf = vec![0u8; len];
        self.rng.fill_bytes(&mut buf);
        let spare = (len as u64) * 8 - bits;
        if spare > 0 {
            buf[len - 1] &= 0xFF >> spare;
        }
        BigUint::from_bytes_le(&buf)
    }

    /// Uniform integer in `[0, bound)` by rejection; zero when `bound` is zero.
    pub fn below(&mut self, bound: &Natural) -> Natural {
        if bound.is_zero() {
            return Natural::zero();
        }
        let bits = bound.bits();
        loop {
            let v = self.random_bits(bits);
            if &v < bound {
                return v;
            }
        }
    }
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RsaSample {
    pub p: Natural,
    pub q: Natural,
    pub n: Natural,
    pub epsilon: Natural,
}

impl RsaSample {
    /// Builds the row for distinct odd primes `p`, `q`.
    pub fn from_primes(p: Natural, q: Natural) -> Result<Self> {
        let two = Natural::from(2u32);
        if p < Natural::from(3u32) || q < Natural::from(3u32) {
            return Err(Error::domain("sample primes must be odd primes ≥ 3"));
        }
        if p == q {
            return Err(Error::domain("sample primes must be distinct"));
        }
        let n = &p * &q;
        let phi = (&p - 1u32) * (&q - 1u32);
        let epsilon = phi / &two - 1u32;
        Ok(Self { p, q, n, epsilon })
    }

    /// Checks the arithmetic invariants (not primality): n = pq, p ≠ q,
    /// ε = (p−1)(q−1)/2 − 1, ε odd, and optionally the bit length of n.
    pub fn check(&self, modulus_bits: Option<u64>) -> std::result::Result<(), String> {
        if self.p == self.q {
            return Err("p = q".into());
        }
        if self.p.is_zero() || self.q.is_zero() {
            return Err("zero prime".into());
        }
        if &self.p * &self.q != self.n {
            return Err("n ≠ p·q".into());
        }
        let phi = (&self.p - 1u32) * (&self.q - 1u32);
        if phi.bit(0) || phi < Natural::from(4u32) || phi / 2u32 - 1u32 != self.epsilon {
            return Err("ε ≠ (p−1)(q−1)/2 − 1".into());
        }
        if !self.epsilon.bit(0) {
            return Err("ε is even".into());
        }
        if let Some(bits) = modulus_bits {
            if self.n.bits() != bits {
                return Err(format!("n has {} bits, expected {bits}", self.n.bits()));
            }
        }
        Ok(())
    }

    /// `p + q`.
    pub fn prime_sum(&self) -> Natural {
        &self.p + &self.q
    }
}

/// A random prime with exactly `bits` bits, found by rejection sampling of
/// odd candidates with the top bit forced.
pub fn random_prime(bits: u64, rng: &mut RngStream) -> Result<Natural> {
    if bits < 3 {
        return Err(Error::domain(format!("random_prime needs bits ≥ 3, got {bits}")));
    }
    let top = Natural::one() << (bits - 1);
    let policy = PrimalityPolicy::default();
    loop {
        let mut candidate = rng.random_bits(bits - 1) | &top;
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, policy, rng) {
            return Ok(candidate);
        }
    }
}

fn check_modulus_bits(modulus_bits: u64) -> Result<()> {
    if modulus_bits < 8 || !modulus_bits.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "modulus bits must be even and ≥ 8, got {modulus_bits}"
        )));
    }
    Ok(())
}

/// Draws a balanced semiprime with exactly `modulus_bits` bits.
pub fn generate_sample(modulus_bits: u64, rng: &mut RngStream) -> Result<RsaSample> {
    check_modulus_bits(modulus_bits)?;
    let half = modulus_bits / 2;
    loop {
        let p = random_prime(half, rng)?;
        let q = random_prime(half, rng)?;
        if p == q || (&p * &q).bits() != modulus_bits {
            continue;
        }
        return RsaSample::from_primes(p, q);
    }
}

/// Sample `index` of the dataset seeded with `master_seed`.
pub fn sample_at(modulus_bits: u64, master_seed: u64, index: u64) -> Result<RsaSample> {
    generate_sample(modulus_bits, &mut RngStream::new(master_seed, index))
}

const GENERATION_CHUNK: u64 = 4096;

/// Ordered stream of `count` samples. Chunks are produced in parallel on the
/// current rayon pool; the output never depends on its size.
pub fn generate_dataset(modulus_bits: u64, count: u64, master_seed: u64) -> Result<DatasetStream> {
    check_modulus_bits(modulus_bits)?;
    if count == 0 {
        return Err(Error::domain("dataset count must be ≥ 1"));
    }
    Ok(DatasetStream {
        modulus_bits,
        count,
        master_seed,
        next_index: 0,
        buffer: Vec::new().into_iter(),
    })
}

pub struct DatasetStream {
    modulus_bits: u64,
    count: u64,
    master_seed: u64,
    next_index: u64,
    buffer: std::vec::IntoIter<RsaSample>,
}

impl Iterator for DatasetStream {
    type Item = RsaSample;

    fn next(&mut self) -> Option<RsaSample> {
        if let Some(s) = self.buffer.next() {
            return Some(s);
        }
        if self.next_index >= self.count {
            return None;
        }
        let end = (self.next_index + GENERATION_CHUNK).min(self.count);
        let (bits, seed) = (self.modulus_bits, self.master_seed);
        let chunk: Vec<RsaSample> = (self.next_index..end)
            .into_par_iter()
            .map(|i| sample_at(bits, seed, i).expect("bit size validated at construction"))
            .collect();
        self.next_index = end;
        self.buffer = chunk.into_iter();
        self.buffer.next()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next_index) as usize + self.buffer.len();
        (left, Some(left))
    }
}
