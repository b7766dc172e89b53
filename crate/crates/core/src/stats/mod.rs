//! Statistical machinery: permutation tests, bootstrap and Wilson intervals,
//! Pearson correlation and per-arm group reports.

mod correlation;
mod descriptive;
mod interval;
mod permutation;
mod report;

pub use correlation::pearson_r;
pub use descriptive::{mean, pooled_std, quantile_sorted, sample_std};
pub use interval::{
    bootstrap_ci, bootstrap_ci_with, normal_quantile, wilson_ci, IntervalEstimate, IntervalMethod,
    DEFAULT_BOOTSTRAP_RESAMPLES,
};
pub use permutation::{
    binomial, permutation_test, PermutationMode, PermutationResult, PermutationTest, Sidedness,
    EXHAUSTIVE_LIMIT,
};
pub use report::GroupReport;
