//! How close a predicted φ gets to factoring n.
//!
//! With the exact φ, `s = p + q = n + 1 − φ` and the factors are the roots of
//! `z² − s·z + n`. A slope-½ model predicts `ŝ = 2α − 1` for every modulus of
//! its size, so the distance `|s − ŝ|` (the window) is what a Fermat-style
//! search seeded at `ŝ` must cover.
//!
//! The search visits even candidates `c, c−2, c+2, c−4, c+4, …` where `c` is
//! `ŝ` rounded up to even, and skips candidates below `2√n` without charging
//! the budget. With `d = s − c` the number of discriminant tests is
//!
//! * `1` when `d = 0`,
//! * `2k` when `d = −2k`,
//! * `2k + 1 − #{1 ≤ j ≤ k : c − 2j < 2√n}` when `d = 2k`,
//!
//! so a budget of `window + 1` always suffices.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde_json::json;

use crate::error::{Error, Result};
use crate::metrics::render_decimal;
use crate::ntheory::{exact_sqrt, is_perfect_square, is_probable_prime, Natural, PrimalityPolicy};
use crate::regress::{rational, LinearModel, Rational, RationalJson};
use crate::samples::{RngStream, RsaSample};

/// Windows above 2^40 are reported as sizes, never searched.
pub const MAX_SEARCH_WINDOW_BITS: u64 = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackOutcome {
    pub success: bool,
    /// Smaller factor, set on success.
    pub p: Option<Natural>,
    pub q: Option<Natural>,
    pub iterations_used: u64,
    pub predicted_sum: Natural,
    /// `|p + q − predicted_sum|`, when the harness knows the factors.
    pub window: Option<Natural>,
}

impl AttackOutcome {
    pub fn with_truth(mut self, true_sum: &Natural) -> Self {
        self.window = Some(abs_diff(true_sum, &self.predicted_sum));
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "success": self.success,
            "p": self.p.as_ref().map(|v| v.to_string()),
            "q": self.q.as_ref().map(|v| v.to_string()),
            "iterations_used": self.iterations_used,
            "predicted_sum": self.predicted_sum.to_string(),
            "window": self.window.as_ref().map(|v| v.to_string()),
        })
    }
}

fn abs_diff(a: &Natural, b: &Natural) -> Natural {
    if a >= b {
        a - b
    } else {
        b - a
    }
}

/// Factors `n` from its exact totient.
pub fn recover_factors_from_phi(n: &Natural, phi: &Natural) -> Result<(Natural, Natural)> {
    let s = n + 1u32;
    if phi > &s {
        return Err(Error::InconsistentPhi(format!("φ = {phi} exceeds n + 1")));
    }
    let s = s - phi;
    let four_n = n << 2u32;
    let sq = &s * &s;
    if sq < four_n {
        return Err(Error::InconsistentPhi("negative discriminant".into()));
    }
    let (exact, t) = is_perfect_square(&(sq - four_n));
    if !exact || (&s + &t).is_odd() {
        return Err(Error::InconsistentPhi("discriminant is not an even square".into()));
    }
    let p = (&s - &t) >> 1u32;
    let q = (&s + &t) >> 1u32;
    if &(&p * &q) != n {
        return Err(Error::InconsistentPhi("recovered factors do not multiply to n".into()));
    }
    Ok((p, q))
}

/// `ŝ = n + 1 − (n − 2α + 2) = 2α − 1`, rounded to the nearest integer (ties
/// up) when 2α is not integral.
pub fn predicted_sum(model: &LinearModel, n: &Natural) -> Result<Natural> {
    let bound = model.phi_lower_bound(n)?;
    let value = rational(n) + Rational::one() - bound;
    let rounded = (value + Rational::new(BigInt::one(), BigInt::from(2))).floor().to_integer();
    rounded
        .to_biguint()
        .ok_or_else(|| Error::domain(format!("model predicts a negative prime sum ({rounded})")))
}

/// Smallest `x` with `x² ≥ 4n`.
fn sum_floor(n: &Natural) -> Natural {
    let four_n = n << 2u32;
    let (exact, r) = is_perfect_square(&four_n);
    if exact {
        r
    } else {
        r + 1u32
    }
}

fn round_up_even(v: &Natural) -> Natural {
    if v.is_odd() {
        v + 1u32
    } else {
        v.clone()
    }
}

/// Tests `s² − 4n` for a square split into two primes.
fn test_candidate(n: &Natural, s: &Natural, rng: &mut RngStream) -> Option<(Natural, Natural)> {
    let four_n = n << 2u32;
    let t = exact_sqrt(&(s * s - four_n))?;
    let p = (s - &t) >> 1u32;
    let q = (s + &t) >> 1u32;
    let policy = PrimalityPolicy::default();
    (&p * &q == *n && is_probable_prime(&p, policy, rng) && is_probable_prime(&q, policy, rng))
        .then_some((p, q))
}

/// Fermat search seeded at `start_sum`, alternating outward, with at most
/// `budget` discriminant tests.
pub fn fermat_search(n: &Natural, start_sum: &Natural, budget: u64) -> AttackOutcome {
    let mut outcome = AttackOutcome {
        success: false,
        p: None,
        q: None,
        iterations_used: 0,
        predicted_sum: start_sum.clone(),
        window: None,
    };
    if budget == 0 || n.is_zero() {
        return outcome;
    }
    let floor = BigInt::from(sum_floor(n));
    let start = BigInt::from(round_up_even(start_sum));
    let mut rng = RngStream::new(0, 0);
    let mut offset = BigInt::zero();
    let two = BigInt::from(2);
    loop {
        let below = &start - &offset;
        let above = &start + &offset;
        let candidates: &[BigInt] = if offset.is_zero() {
            std::slice::from_ref(&start)
        } else {
            &[below, above]
        };
        for c in candidates {
            if c < &floor {
                continue;
            }
            outcome.iterations_used += 1;
            let c = c.to_biguint().expect("candidate above 2√n is positive");
            if let Some((p, q)) = test_candidate(n, &c, &mut rng) {
                outcome.success = true;
                outcome.p = Some(p);
                outcome.q = Some(q);
                return outcome;
            }
            if outcome.iterations_used >= budget {
                return outcome;
            }
        }
        offset += &two;
    }
}

/// Classic Fermat: ascend from the smallest even sum ≥ 2√n.
pub fn fermat_baseline(n: &Natural, budget: u64) -> AttackOutcome {
    let start = round_up_even(&sum_floor(n));
    let mut outcome = AttackOutcome {
        success: false,
        p: None,
        q: None,
        iterations_used: 0,
        predicted_sum: start.clone(),
        window: None,
    };
    let mut rng = RngStream::new(0, 0);
    let mut s = start;
    while outcome.iterations_used < budget {
        outcome.iterations_used += 1;
        if let Some((p, q)) = test_candidate(n, &s, &mut rng) {
            outcome.success = true;
            outcome.p = Some(p);
            outcome.q = Some(q);
            break;
        }
        s += 2u32;
    }
    outcome
}

/// Discriminant tests [`fermat_search`] spends to reach `true_sum`.
pub fn search_cost(n: &Natural, start_sum: &Natural, true_sum: &Natural) -> Natural {
    let start = round_up_even(start_sum);
    if true_sum == &start {
        return Natural::one();
    }
    if true_sum < &start {
        // d = −2k: k below-candidates and k − 1 above-candidates precede it.
        return &start - true_sum;
    }
    let k: Natural = (true_sum - &start) >> 1u32;
    let floor = sum_floor(n);
    // Above-candidates c + 2j (0 ≤ j ≤ k) and below-candidates c − 2j
    // (1 ≤ j ≤ k) that are not under 2√n.
    let (above, below) = if start >= floor {
        (&k + 1u32, ((&start - &floor) >> 1u32).min(k.clone()))
    } else {
        let skipped = (&floor - &start + 1u32) >> 1u32;
        (&k + 1u32 - skipped, Natural::zero())
    };
    above + below
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowRow {
    pub n: Natural,
    pub true_sum: Natural,
    pub predicted_sum: Natural,
    pub window: Natural,
    /// `⌈window/2⌉ + 1`: even candidates between seed and truth.
    pub one_sided_cost: Natural,
    /// Exact cost of the alternating search.
    pub search_cost: Natural,
}

impl WindowRow {
    pub fn window_bits(&self) -> u64 {
        self.window.bits()
    }
}

pub const WINDOW_CSV_HEADER: &str = "n,true_sum,predicted_sum,window,window_bits,one_sided_cost,search_cost";

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub min: Natural,
    pub median: Rational,
    pub max: Natural,
    pub mean: Rational,
}

impl Summary {
    fn of(mut values: Vec<Natural>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort();
        let len = values.len();
        let median = if len % 2 == 1 {
            rational(&values[len / 2])
        } else {
            (rational(&values[len / 2 - 1]) + rational(&values[len / 2])) / Rational::from_integer(2.into())
        };
        let sum: Natural = values.iter().sum();
        Some(Self {
            min: values[0].clone(),
            median,
            max: values[len - 1].clone(),
            mean: Rational::new(BigInt::from(sum), BigInt::from(len)),
        })
    }

    fn to_json(&self) -> serde_json::Value {
        json!({
            "min": self.min.to_string(),
            "median": RationalJson::from(&self.median),
            "max": self.max.to_string(),
            "mean": RationalJson::from(&self.mean),
            "rendered": {
                "median": render_decimal(&self.median, 17),
                "mean": render_decimal(&self.mean, 17),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub rows: Vec<WindowRow>,
    pub window: Summary,
    pub search_cost: Summary,
    pub one_sided_cost: Summary,
}

impl WindowReport {
    pub fn csv(&self) -> String {
        let mut out = String::from(WINDOW_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n,
                r.true_sum,
                r.predicted_sum,
                r.window,
                r.window_bits(),
                r.one_sided_cost,
                r.search_cost
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let bits: Vec<u64> = self.rows.iter().map(WindowRow::window_bits).collect();
        json!({
            "count": self.rows.len(),
            "window": self.window.to_json(),
            "window_bits": {
                "min": bits.iter().min(),
                "max": bits.iter().max(),
            },
            "search_cost": self.search_cost.to_json(),
            "one_sided_cost": self.one_sided_cost.to_json(),
            "searchable_max_window_bits": MAX_SEARCH_WINDOW_BITS,
        })
    }
}

pub fn window_row(model: &LinearModel, sample: &RsaSample) -> Result<WindowRow> {
    let predicted = predicted_sum(model, &sample.n)?;
    let true_sum = sample.prime_sum();
    let window = abs_diff(&true_sum, &predicted);
    let one_sided_cost = ((&window + 1u32) >> 1u32) + 1u32;
    let search_cost = search_cost(&sample.n, &predicted, &true_sum);
    Ok(WindowRow {
        n: sample.n.clone(),
        true_sum,
        predicted_sum: predicted,
        window,
        one_sided_cost,
        search_cost,
    })
}

pub fn window_report(model: &LinearModel, samples: &[RsaSample]) -> Result<WindowReport> {
    if samples.is_empty() {
        return Err(Error::domain("window report of an empty sample set"));
    }
    let rows = samples
        .iter()
        .map(|s| window_row(model, s))
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&WindowRow) -> &Natural| rows.iter().map(f).cloned().collect::<Vec<_>>();
    let window = Summary::of(pick(|r| &r.window)).expect("nonempty");
    let search_cost = Summary::of(pick(|r| &r.search_cost)).expect("nonempty");
    let one_sided_cost = Summary::of(pick(|r| &r.one_sided_cost)).expect("nonempty");
    Ok(WindowReport {
        rows,
        window,
        search_cost,
        one_sided_cost,
    })
}

/// Results of actually running the seeded search on a sample set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchTally {
    pub attempted: u64,
    pub succeeded: u64,
    pub skipped_large_window: u64,
    pub iterations: u64,
}

/// Runs [`fermat_search`] on every sample whose window fits in
/// [`MAX_SEARCH_WINDOW_BITS`].
pub fn run_searches(model: &LinearModel, samples: &[RsaSample], budget: u64) -> Result<SearchTally> {
    let mut tally = SearchTally::default();
    for s in samples {
        let row = window_row(model, s)?;
        if row.window_bits() > MAX_SEARCH_WINDOW_BITS {
            tally.skipped_large_window += 1;
            continue;
        }
        let out = fermat_search(&s.n, &row.predicted_sum, budget);
        tally.attempted += 1;
        tally.iterations += out.iterations_used;
        tally.succeeded += u64::from(out.success);
    }
    Ok(tally)
}

impl SearchTally {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "attempted": self.attempted,
            "succeeded": self.succeeded,
            "skipped_large_window": self.skipped_large_window,
            "iterations": self.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{accumulate_par, fit_half_slope, fit_provable, FitMode};
    use crate::samples::generate_dataset;
    use crate::totient::totient_semiprime;

    fn n(v: u64) -> Natural {
        Natural::from(v)
    }

    #[test]
    fn recover_examples() {
        assert_eq!(recover_factors_from_phi(&n(15), &n(8)).unwrap(), (n(3), n(5)));
        assert_eq!(recover_factors_from_phi(&n(143), &n(120)).unwrap(), (n(11), n(13)));
        assert!(matches!(
            recover_factors_from_phi(&n(15), &n(9)),
            Err(Error::InconsistentPhi(_))
        ));
        assert!(recover_factors_from_phi(&n(15), &n(100)).is_err());
        assert!(recover_factors_from_phi(&n(15), &n(14)).is_err());
    }

    #[test]
    fn recover_inverts_totient_on_samples() {
        for s in generate_dataset(64, 200, 5).unwrap() {
            let phi = totient_semiprime(&s.p, &s.q).unwrap();
            let (p, q) = recover_factors_from_phi(&s.n, &phi).unwrap();
            assert_eq!((p, q), (s.p.clone().min(s.q.clone()), s.p.clone().max(s.q.clone())));
        }
        for s in generate_dataset(1024, 2, 5).unwrap() {
            let phi = totient_semiprime(&s.p, &s.q).unwrap();
            assert!(recover_factors_from_phi(&s.n, &phi).is_ok());
        }
    }

    #[test]
    fn predicted_sum_examples() {
        let m = fit_provable(8).unwrap();
        for v in [129u64, 143, 200, 255] {
            assert_eq!(predicted_sum(&m, &n(v)).unwrap(), n(31));
        }
        let s = RsaSample::from_primes(n(11), n(13)).unwrap();
        let row = window_row(&m, &s).unwrap();
        assert_eq!(row.window, n(7));
        assert_eq!(row.one_sided_cost, n(5));
        assert_eq!(row.search_cost, n(8));

        let free = LinearModel::from_coefficients(Rational::one(), Rational::zero(), FitMode::FreeOls).unwrap();
        assert!(matches!(predicted_sum(&free, &n(143)), Err(Error::Domain(_))));
    }

    #[test]
    fn predicted_sum_rounds_half_slope_alpha() {
        // α = 25/4 → 2α − 1 = 11.5 → 12 (ties up); α = 31/5 → 11.4 → 11.
        let m = LinearModel::from_coefficients(crate::regress::half(), Rational::new((-25).into(), 4.into()), FitMode::HalfSlope).unwrap();
        assert_eq!(predicted_sum(&m, &n(143)).unwrap(), n(12));
        let m = LinearModel::from_coefficients(crate::regress::half(), Rational::new((-31).into(), 5.into()), FitMode::HalfSlope).unwrap();
        assert_eq!(predicted_sum(&m, &n(143)).unwrap(), n(11));
    }

    #[test]
    fn fermat_examples() {
        let out = fermat_search(&n(143), &n(31), 10);
        assert!(out.success);
        assert_eq!((out.p.clone().unwrap(), out.q.clone().unwrap()), (n(11), n(13)));
        // 32, 30, 34, 28, 36, 26, 38, 24
        assert_eq!(out.iterations_used, 8);

        let out = fermat_search(&n(15), &n(8), 1);
        assert!(out.success);
        assert_eq!((out.p.unwrap(), out.q.unwrap()), (n(3), n(5)));

        let out = fermat_search(&n(143), &n(24), 1);
        assert!(out.success && out.iterations_used == 1);

        let out = fermat_search(&n(143), &n(31), 7);
        assert!(!out.success);
        assert_eq!(out.iterations_used, 7);
    }

    #[test]
    fn seeds_below_root_skip_for_free() {
        // 2√143 ≈ 23.9: candidates below 24 cost nothing.
        let out = fermat_search(&n(143), &n(0), 100);
        assert!(out.success);
        assert_eq!(n(out.iterations_used), search_cost(&n(143), &n(0), &n(24)));
        assert_eq!(out.iterations_used, 1);
        let out = fermat_search(&n(143), &n(20), 100);
        assert_eq!(n(out.iterations_used), search_cost(&n(143), &n(20), &n(24)));
        assert_eq!(out.iterations_used, 1);
        // 26, then 24
        let out = fermat_search(&n(143), &n(26), 100);
        assert_eq!(out.iterations_used, 2);
    }

    #[test]
    fn baseline_finds_close_primes() {
        let out = fermat_baseline(&n(143), 5);
        assert!(out.success);
        assert_eq!(out.iterations_used, 1);
        let out = fermat_baseline(&n(3 * 1009), 3);
        assert!(!out.success);
        assert_eq!(out.iterations_used, 3);
    }

    #[test]
    fn trivial_split_is_not_success() {
        // For n = 15 the sum 16 = 1 + 15 gives a square discriminant (14²).
        let out = fermat_search(&n(15), &n(16), 1);
        assert!(!out.success);
        assert_eq!(out.iterations_used, 1);
    }

    #[test]
    fn cost_formula_matches_search_exhaustively() {
        let primes = [11u64, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];
        for (i, &p) in primes.iter().enumerate() {
            for &q in &primes[i + 1..] {
                let nn = n(p * q);
                let s = n(p + q);
                for seed in 0u64..120 {
                    let cost = search_cost(&nn, &n(seed), &s);
                    let out = fermat_search(&nn, &n(seed), u64::MAX);
                    assert!(out.success);
                    assert_eq!(n(out.iterations_used), cost, "n={nn} seed={seed}");
                    let window = abs_diff(&s, &n(seed));
                    assert!(cost <= &window + 1u32, "n={nn} seed={seed}");
                }
            }
        }
    }

    #[test]
    fn window_report_summary() {
        let rows: Vec<_> = generate_dataset(32, 101, 3).unwrap().collect();
        let pairs: Vec<_> = rows.iter().map(|s| (s.n.clone(), s.epsilon.clone())).collect();
        let m = fit_half_slope(&accumulate_par(&pairs)).unwrap();
        let rep = window_report(&m, &rows).unwrap();
        assert_eq!(rep.rows.len(), 101);
        assert!(rational(&rep.window.min) <= rep.window.median);
        assert!(rep.window.median <= rational(&rep.window.max));
        let text = rep.csv();
        assert_eq!(text.lines().count(), 102);
        let js = rep.summary_json();
        assert_eq!(js["count"], 101);

        let tally = run_searches(&m, &rows[..20], 1_000_000).unwrap();
        assert_eq!(tally.attempted, 20);
        assert_eq!(tally.succeeded, 20);
    }

    #[test]
    fn exact_seed_window_zero() {
        let s = RsaSample::from_primes(n(11), n(13)).unwrap();
        // α = 25/2 gives ŝ = 24 exactly.
        let m = LinearModel::from_coefficients(crate::regress::half(), Rational::new((-25).into(), 2.into()), FitMode::HalfSlope).unwrap();
        let row = window_row(&m, &s).unwrap();
        assert_eq!(row.window, n(0));
        assert_eq!(row.search_cost, n(1));
        assert_eq!(row.one_sided_cost, n(1));
    }

    #[test]
    fn large_windows_are_not_searched() {
        let rows: Vec<_> = generate_dataset(128, 3, 1).unwrap().collect();
        let m = fit_provable(128).unwrap();
        let tally = run_searches(&m, &rows, 10).unwrap();
        assert_eq!(tally.skipped_large_window, 3);
        assert_eq!(tally.attempted, 0);
    }
}
