//! Small Monte Carlo helpers shared by the simulators.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

/// Independent generator for trial `index` of a run seeded with `seed`.
///
/// Each trial gets its own ChaCha stream, so results do not depend on the
/// order in which trials are scheduled.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Error count over a number of Bernoulli trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ErrorCount {
    pub errors: u64,
    pub trials: u64,
}

impl ErrorCount {
    pub fn new(errors: u64, trials: u64) -> Self {
        Self { errors, trials }
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.errors as f64 / self.trials as f64
        }
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Half-width of the normal-approximation 95% interval.
    pub fn ci95_half_width(&self) -> f64 {
        1.96 * self.std_error()
    }

    /// Wilson score 95% interval.
    pub fn wilson95(&self) -> (f64, f64) {
        if self.trials == 0 {
            return (0.0, 1.0);
        }
        let z = 1.96f64;
        let n = self.trials as f64;
        let p = self.rate();
        let denom = 1.0 + z * z / n;
        let center = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        ((center - half).max(0.0), (center + half).min(1.0))
    }

    pub fn merge(self, other: Self) -> Self {
        Self { errors: self.errors + other.errors, trials: self.trials + other.trials }
    }
}

/// True when `later` is not larger than `earlier` beyond `sigmas` combined standard errors.
pub fn non_increasing_within(earlier: &ErrorCount, later: &ErrorCount, sigmas: f64) -> bool {
    let se = (earlier.std_error().powi(2) + later.std_error().powi(2)).sqrt();
    later.rate() <= earlier.rate() + sigmas * se
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = trial_rng(5, 1).random();
        let b: u64 = trial_rng(5, 1).random();
        let c: u64 = trial_rng(5, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wilson_brackets_rate() {
        let e = ErrorCount::new(30, 1000);
        let (lo, hi) = e.wilson95();
        assert!(lo < 0.03 && 0.03 < hi);
        assert_eq!(ErrorCount::new(0, 100).ci95_half_width(), 0.0);
    }

    #[test]
    fn trend_tolerance() {
        let a = ErrorCount::new(100, 10_000);
        let b = ErrorCount::new(105, 10_000);
        assert!(non_increasing_within(&a, &b, 2.0));
        assert!(!non_increasing_within(&a, &ErrorCount::new(200, 10_000), 2.0));
    }
}
