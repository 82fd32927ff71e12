//! Confidence intervals and paired tests for comparing error rates.

use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

/// Exact two-sided Clopper-Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "need 0 <= k <= n, n > 0");
    let a = (1.0 - level) / 2.0;
    let lo = if k == 0 { 0.0 } else { Beta::new(k as f64, (n - k + 1) as f64).unwrap().inverse_cdf(a) };
    let hi = if k == n { 1.0 } else { Beta::new((k + 1) as f64, (n - k) as f64).unwrap().inverse_cdf(1.0 - a) };
    (lo, hi)
}

/// Rate estimate with its interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub k: u64,
    pub n: u64,
    pub lo: f64,
    pub hi: f64,
}

impl Rate {
    pub fn new(k: u64, n: u64) -> Self {
        let (lo, hi) = clopper_pearson(k, n, 0.95);
        Rate { k, n, lo, hi }
    }

    pub fn value(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// `self <= other` is consistent with the data: the 95% bands touch or
    /// `self` lies below.
    pub fn not_above(&self, other: &Rate) -> bool {
        self.lo <= other.hi
    }
}

/// Discordant pair counts over the common prefix of two paired runs:
/// `(a fails and b succeeds, b fails and a succeeds)`.
pub fn discordant(a: &[bool], b: &[bool]) -> (u64, u64) {
    a.iter().zip(b).fold((0, 0), |(x, y), (&fa, &fb)| (x + u64::from(fa && !fb), y + u64::from(fb && !fa)))
}

/// One-sided exact McNemar p-value for "a fails more often than b", from the
/// discordant counts of [`discordant`].
pub fn mcnemar_greater(a_only: u64, b_only: u64) -> f64 {
    let n = a_only + b_only;
    if n == 0 || a_only == 0 {
        return 1.0;
    }
    let bin = Binomial::new(0.5, n).unwrap();
    // P(X >= a_only)
    1.0 - bin.cdf(a_only - 1)
}

/// Eb/N0 where a curve crosses `target`, interpolating linearly in log FER.
/// Points must be sorted by Eb/N0.
pub fn crossing(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((x0, f0), (x1, f1)) = (w[0], w[1]);
        if f0 >= target && f1 <= target && f0 > 0.0 && f1 > 0.0 {
            if f0 == f1 {
                return Some(x0);
            }
            let (l0, l1, lt) = (f0.ln(), f1.ln(), target.ln());
            Some(x0 + (x1 - x0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}
