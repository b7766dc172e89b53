use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::descriptive::{mean, quantile_sorted};
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};
use crate::scalar::Scalar;

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    BootstrapPercentile,
    Wilson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate<T> {
    pub point: T,
    pub lo: T,
    pub hi: T,
    pub level: f64,
    pub method: IntervalMethod,
    /// Interval collapsed to a point (single sample).
    #[serde(default)]
    pub degenerate: bool,
}

impl<T: Scalar> IntervalEstimate<T> {
    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    Ok(())
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci<T: Scalar>(
    samples: &[T],
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<IntervalEstimate<T>> {
    bootstrap_ci_with(
        samples,
        |xs| mean(xs).expect("resample is nonempty"),
        n_boot,
        level,
        seed,
    )
}

/// Percentile bootstrap interval for an arbitrary statistic.
pub fn bootstrap_ci_with<T: Scalar>(
    samples: &[T],
    statistic: impl Fn(&[T]) -> T,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<IntervalEstimate<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput(
            "bootstrap needs at least one sample".into(),
        ));
    }
    if n_boot < 100 {
        return Err(Error::invalid(format!("n_boot = {n_boot} < 100")));
    }
    check_level(level)?;
    let point = statistic(samples);
    if samples.len() == 1 {
        return Ok(IntervalEstimate {
            point,
            lo: point,
            hi: point,
            level,
            method: IntervalMethod::BootstrapPercentile,
            degenerate: true,
        });
    }
    let mut rng = stream(seed, &[purpose::BOOTSTRAP]);
    let n = samples.len();
    let mut resample = vec![T::zero(); n];
    let mut stats: Vec<T> = (0..n_boot)
        .map(|_| {
            for slot in resample.iter_mut() {
                *slot = samples[rng.random_range(0..n)];
            }
            statistic(&resample)
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let tail = (1.0 - level) / 2.0;
    Ok(IntervalEstimate {
        point,
        lo: quantile_sorted(&stats, tail),
        hi: quantile_sorted(&stats, 1.0 - tail),
        level,
        method: IntervalMethod::BootstrapPercentile,
        degenerate: false,
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci<T: Scalar>(successes: u64, n: u64, level: f64) -> Result<IntervalEstimate<T>> {
    if n == 0 {
        return Err(Error::invalid("Wilson interval needs n >= 1"));
    }
    if successes > n {
        return Err(Error::invalid(format!("{successes} successes out of {n}")));
    }
    check_level(level)?;
    let z = T::of(normal_quantile(1.0 - (1.0 - level) / 2.0));
    let nf = T::of(n as f64);
    let p = T::of(successes as f64) / nf;
    let two = T::of(2.0);
    let four = T::of(4.0);
    let z2 = z * z;
    let denom = T::one() + z2 / nf;
    let center = (p + z2 / (two * nf)) / denom;
    let half = z * (p * (T::one() - p) / nf + z2 / (four * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 {
        T::zero()
    } else {
        (center - half).max(T::zero())
    };
    let hi = if successes == n {
        T::one()
    } else {
        (center + half).min(T::one())
    };
    Ok(IntervalEstimate {
        point: p,
        lo,
        hi,
        level,
        method: IntervalMethod::Wilson,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_collapse() {
        let ci = bootstrap_ci(&[2.5; 20], 500, 0.95, 3).unwrap();
        assert_eq!((ci.lo, ci.point, ci.hi), (2.5, 2.5, 2.5));
    }

    #[test]
    fn single_sample_is_flagged() {
        let ci = bootstrap_ci(&[1.0], 500, 0.95, 3).unwrap();
        assert!(ci.degenerate);
        assert_eq!((ci.lo, ci.hi), (1.0, 1.0));
    }

    #[test]
    fn bootstrap_rejects_bad_arguments() {
        assert!(bootstrap_ci::<f64>(&[], 500, 0.95, 0).is_err());
        assert!(bootstrap_ci(&[1.0, 2.0], 99, 0.95, 0).is_err());
        assert!(bootstrap_ci(&[1.0, 2.0], 500, 1.0, 0).is_err());
    }

    #[test]
    fn bootstrap_is_seed_reproducible() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let a = bootstrap_ci(&xs, 1000, 0.9, 11).unwrap();
        let b = bootstrap_ci(&xs, 1000, 0.9, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wilson_edges() {
        let zero: IntervalEstimate<f64> = wilson_ci(0, 17, 0.95).unwrap();
        assert_eq!(zero.lo, 0.0);
        let all: IntervalEstimate<f64> = wilson_ci(10, 10, 0.95).unwrap();
        assert!((all.lo - 0.7225).abs() < 5e-4);
        assert_eq!(all.hi, 1.0);
        assert!(wilson_ci::<f64>(0, 0, 0.95).is_err());
        assert!(wilson_ci::<f64>(4, 3, 0.95).is_err());
    }

    #[test]
    fn wilson_reports_observed_rate() {
        let ci: IntervalEstimate<f64> = wilson_ci(29, 43, 0.95).unwrap();
        assert_eq!(format!("{:.3}", ci.point), "0.674");
        assert!(ci.lo <= ci.point && ci.point <= ci.hi);
    }
}
