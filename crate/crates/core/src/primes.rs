//! Prime tables and the elementary prime-counting facts used by the prime
//! averages: Chebyshev's `θ`, two-sided bounds on the `n`-th prime, and the
//! weighted sums `Σ_{p ≤ N} log p / p^λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIEVE_LIMIT: u64 = 1_000_000_000;

/// Above this the sieve runs over fixed-size segments.
pub const SEGMENT_THRESHOLD: u64 = 10_000_000;

const SEGMENT_BITS: u64 = 1 << 20;

/// All primes up to `limit`, in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u32>,
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// `r_N`, the number of primes up to the limit.
    pub fn count(&self) -> usize {
        self.primes.len()
    }

    /// Primes `p <= n` (`n` clipped to the table limit).
    pub fn up_to(&self, n: u64) -> &[u32] {
        let k = self.primes.partition_point(|&p| (p as u64) <= n);
        &self.primes[..k]
    }

    /// `log p` for each listed prime.
    pub fn log_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.primes.iter().map(|&p| (p as f64).ln())
    }

    pub fn contains(&self, n: u64) -> bool {
        n <= u32::MAX as u64 && self.primes.binary_search(&(n as u32)).is_ok()
    }

    /// The `n`-th prime, 1-based.
    pub fn nth(&self, n: usize) -> Option<u64> {
        n.checked_sub(1).and_then(|i| self.primes.get(i)).map(|&p| p as u64)
    }

    /// `θ(n) = Σ_{p ≤ n} log p`.
    pub fn theta(&self, n: u64) -> f64 {
        self.up_to(n).iter().map(|&p| (p as f64).ln()).sum()
    }

    /// `Σ_{p ≤ n} log p / p^λ`.
    pub fn weighted_sum(&self, lambda: f64, n: u64) -> f64 {
        self.up_to(n)
            .iter()
            .map(|&p| {
                let p = p as f64;
                p.ln() * p.powf(-lambda)
            })
            .sum()
    }
}

/// Primes up to `n` by a sieve of Eratosthenes, self-checked against trial
/// division on a 1% sample of the primes and of the integers in `[2, n]`.
pub fn sieve(n: u64) -> Result<PrimeTable> {
    let table = sieve_unchecked(n)?;
    spot_check(&table)?;
    Ok(table)
}

fn sieve_unchecked(n: u64) -> Result<PrimeTable> {
    if !(2..=SIEVE_LIMIT).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "sieve limit {n} outside [2, {SIEVE_LIMIT}]"
        )));
    }
    let primes = if n <= SEGMENT_THRESHOLD {
        simple_sieve(n)
    } else {
        segmented_sieve(n)
    };
    Ok(PrimeTable { limit: n, primes })
}

/// Odd-only bit sieve; bit `i` stands for `2i + 1`.
fn simple_sieve(n: u64) -> Vec<u32> {
    let bits = (n as usize + 1) / 2;
    let mut composite = vec![0u64; bits.div_ceil(64)];
    let mut i = 1;
    while (2 * i + 1) * (2 * i + 1) <= n as usize {
        if composite[i / 64] >> (i % 64) & 1 == 0 {
            let p = 2 * i + 1;
            let mut j = p * p / 2;
            while j < bits {
                composite[j / 64] |= 1 << (j % 64);
                j += p;
            }
        }
        i += 1;
    }
    let mut primes = Vec::with_capacity(prime_count_estimate(n));
    primes.push(2);
    for i in 1..bits {
        if composite[i / 64] >> (i % 64) & 1 == 0 {
            primes.push((2 * i + 1) as u32);
        }
    }
    primes
}

fn segmented_sieve(n: u64) -> Vec<u32> {
    let root = isqrt(n);
    let base = simple_sieve(root.max(2));
    let mut primes = Vec::with_capacity(prime_count_estimate(n));
    primes.extend_from_slice(&base);
    let mut flags = vec![false; SEGMENT_BITS as usize];
    // odd numbers only: segment covers [lo, lo + 2 * SEGMENT_BITS)
    let mut lo = root + 1;
    if lo % 2 == 0 {
        lo += 1;
    }
    while lo <= n {
        let hi = (lo + 2 * SEGMENT_BITS - 1).min(n);
        let count = ((hi - lo) / 2 + 1) as usize;
        flags[..count].iter_mut().for_each(|f| *f = false);
        for &p in &base[1..] {
            let p = p as u64;
            if p * p > hi {
                break;
            }
            let mut start = (lo.div_ceil(p) * p).max(p * p);
            if start % 2 == 0 {
                start += p;
            }
            let mut j = ((start - lo) / 2) as usize;
            while j < count {
                flags[j] = true;
                j += p as usize;
            }
        }
        for (i, &c) in flags[..count].iter().enumerate() {
            if !c {
                primes.push((lo + 2 * i as u64) as u32);
            }
        }
        lo = hi + 1;
        if lo % 2 == 0 {
            lo += 1;
        }
    }
    primes
}

fn prime_count_estimate(n: u64) -> usize {
    let x = n.max(3) as f64;
    (1.3 * x / x.ln()) as usize + 16
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Trial division by 2, 3 and `6k ± 1`.
pub fn is_prime_trial(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 || n % 3 == 0 {
        return false;
    }
    let mut d = 5;
    while d * d <= n {
        if n % d == 0 || n % (d + 2) == 0 {
            return false;
        }
        d += 6;
    }
    true
}

fn spot_check(table: &PrimeTable) -> Result<()> {
    for &p in table.primes.iter().step_by(100) {
        if !is_prime_trial(p as u64) {
            return Err(Error::InvalidParameter(format!("sieve listed composite {p}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(table.limit);
    let samples = (table.limit / 100).clamp(1, 1_000_000);
    for _ in 0..samples {
        let m = rng.gen_range(2..=table.limit);
        if table.contains(m) != is_prime_trial(m) {
            return Err(Error::InvalidParameter(format!("sieve misclassified {m}")));
        }
    }
    Ok(())
}

/// Chebyshev's `θ(N) = Σ_{p ≤ N} log p`.
pub fn chebyshev_theta(n: u64) -> Result<f64> {
    Ok(sieve(n)?.theta(n))
}

/// `n log n + n log log n - n`, `n log n + n log log n`.
pub fn nth_prime_bounds(n: u64) -> (f64, f64) {
    let x = n as f64;
    let upper = x * x.ln() + x * x.ln().ln();
    (upper - x, upper)
}

/// First `n` where the two-sided `p_n` bounds are checked.
pub const NTH_PRIME_CHECK_START: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NthPrimeFailure {
    pub n: u64,
    pub p_n: u64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NthPrimeReport {
    pub n_min: u64,
    pub n_max: u64,
    pub checked: u64,
    /// Smallest value of `p_n - lower` over the range.
    pub min_lower_slack: f64,
    /// Smallest value of `upper - p_n` over the range.
    pub min_upper_slack: f64,
    pub failures: Vec<NthPrimeFailure>,
}

impl NthPrimeReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `n log n + n log log n - n <= p_n <= n log n + n log log n` for
/// every `6 <= n <= n_max` against sieved primes.
pub fn nth_prime_bounds_check(n_max: u64) -> Result<NthPrimeReport> {
    if n_max < NTH_PRIME_CHECK_START {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} < 6")));
    }
    // the upper bound itself holds from n = 6 on; pad in case it does not
    let limit = (nth_prime_bounds(n_max).1 * 1.1) as u64 + 100;
    let table = sieve(limit)?;
    let mut report = NthPrimeReport {
        n_min: NTH_PRIME_CHECK_START,
        n_max,
        checked: 0,
        min_lower_slack: f64::INFINITY,
        min_upper_slack: f64::INFINITY,
        failures: Vec::new(),
    };
    for n in NTH_PRIME_CHECK_START..=n_max {
        let p_n = table
            .nth(n as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("table too short for n = {n}")))?;
        let (lower, upper) = nth_prime_bounds(n);
        let pf = p_n as f64;
        report.checked += 1;
        report.min_lower_slack = report.min_lower_slack.min(pf - lower);
        report.min_upper_slack = report.min_upper_slack.min(upper - pf);
        if pf < lower || pf > upper {
            report.failures.push(NthPrimeFailure { n, p_n, lower, upper });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimeSum {
    pub lambda: f64,
    pub n: u64,
    /// `Σ_{p ≤ N} log p / p^λ`
    pub sum: f64,
    /// `sum / N^{1-λ}`
    pub ratio: f64,
}

pub fn prime_sum_estimate(lambda: f64, n: u64) -> Result<PrimeSum> {
    prime_sum_with(&sieve(n)?, lambda, n)
}

/// As [`prime_sum_estimate`] on a table that already covers `n`.
pub fn prime_sum_with(table: &PrimeTable, lambda: f64, n: u64) -> Result<PrimeSum> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} not in (0, 1)")));
    }
    if n < 2 || n > table.limit() {
        return Err(Error::InvalidParameter(format!(
            "N = {n} outside [2, {}]",
            table.limit()
        )));
    }
    let sum = table.weighted_sum(lambda, n);
    Ok(PrimeSum {
        lambda,
        n,
        sum,
        ratio: sum / (n as f64).powf(1.0 - lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_tables() {
        assert_eq!(sieve(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(sieve(2).unwrap().primes(), &[2]);
        assert_eq!(sieve(3).unwrap().primes(), &[2, 3]);
        assert!(sieve(1).is_err());
        assert!(sieve(SIEVE_LIMIT + 1).is_err());
    }

    #[test]
    fn count_at_1000() {
        let oracle = (2..=1000u64).filter(|&m| is_prime_trial(m)).count();
        assert_eq!(oracle, 168);
        assert_eq!(sieve(1000).unwrap().count(), oracle);
    }

    #[test]
    fn exhaustive_against_trial_division() {
        let table = sieve(10_000).unwrap();
        let oracle: Vec<u32> = (2..=10_000u64).filter(|&m| is_prime_trial(m)).map(|m| m as u32).collect();
        assert_eq!(table.primes(), &oracle[..]);
        for n in 2..300 {
            let t = sieve(n).unwrap();
            assert_eq!(t.primes(), table.up_to(n));
        }
    }

    #[test]
    fn segmented_agrees_with_simple() {
        // force both algorithms over the same range just above the threshold
        let n = SEGMENT_THRESHOLD + 123_457;
        let a = simple_sieve(n);
        let b = segmented_sieve(n);
        assert_eq!(a.len(), b.len());
        assert!(a == b);
    }

    #[test]
    fn theta_values() {
        assert_relative_eq!(chebyshev_theta(10).unwrap(), 210f64.ln(), epsilon = 1e-13);
        assert_relative_eq!(chebyshev_theta(2).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let table = sieve(1_000_000).unwrap();
        let t = table.theta(1_000_000) / 1e6;
        assert!(t > 0.99 && t < 1.01, "theta(1e6)/1e6 = {t}");
        for n in [10_000u64, 50_000, 300_000] {
            let r = table.theta(n) / n as f64;
            assert!((0.8..=1.2).contains(&r));
        }
    }

    #[test]
    fn theta_increments_at_primes() {
        let table = sieve(500).unwrap();
        for n in 3..=500u64 {
            let jump = table.theta(n) - table.theta(n - 1);
            if is_prime_trial(n) {
                assert_relative_eq!(jump, (n as f64).ln(), epsilon = 1e-12);
            } else {
                assert_eq!(jump, 0.0);
            }
        }
    }

    #[test]
    fn nth_prime_bound_examples() {
        let (lo, hi) = nth_prime_bounds(6);
        assert!((lo - 8.2506).abs() < 1e-3 && (hi - 14.2506).abs() < 1e-3);
        assert!(lo <= 13.0 && 13.0 <= hi);
        let (lo, hi) = nth_prime_bounds(10);
        assert!((lo - 21.366).abs() < 1e-3 && (hi - 31.366).abs() < 1e-3);
        let t = sieve(100).unwrap();
        assert_eq!(t.nth(6), Some(13));
        assert_eq!(t.nth(10), Some(29));
        assert!(nth_prime_bounds_check(5).is_err());
        let report = nth_prime_bounds_check(2000).unwrap();
        assert!(report.passed());
        assert_eq!(report.checked, 1995);
        // the lower bound is not checked below n = 6; at n = 2..5 the upper bound fails
        assert!(nth_prime_bounds(5).1 < 11.0);
    }

    #[test]
    fn prime_sum_examples() {
        let s = prime_sum_estimate(0.5, 10).unwrap();
        let oracle: f64 = [2.0f64, 3.0, 5.0, 7.0].iter().map(|p| p.ln() / p.sqrt()).sum();
        assert_relative_eq!(s.sum, oracle, epsilon = 1e-14);
        assert!((s.sum - 2.57966).abs() < 1e-5);
        assert!((s.ratio - 0.8157).abs() < 1e-4);
        for l in [0.1, 0.5, 0.9] {
            let s = prime_sum_estimate(l, 2).unwrap();
            assert_relative_eq!(s.sum, 2f64.ln() / 2f64.powf(l), epsilon = 1e-15);
        }
        assert!(prime_sum_estimate(1.0, 10).is_err());
        assert!(prime_sum_estimate(0.0, 10).is_err());
    }
}
