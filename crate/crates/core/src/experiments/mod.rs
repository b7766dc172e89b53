//! End-to-end runners for the three experimental protocols.

pub mod direction;
pub mod outcome;
pub mod scan;
pub mod steering;

use rayon::prelude::*;

use crate::error::Result;
use crate::rollout::{Episode, SteeringPlan, Testbed};

pub use direction::{
    candidate_directions, gradient_direction, orthogonal_direction, probe_gradient,
    run_alpha_sweep, run_direction_experiment, score_candidates, search_direction, DirectionConfig,
    DirectionKind, DirectionReport, SearchConfig, SweepResult, DEFAULT_ALPHA_GRID,
};
pub use outcome::{
    analyze_outcomes, run_outcome_association, ControlResult, MatchedProfiles, OutcomeConfig,
    OutcomeReport,
};
pub use scan::{
    run_decomposition, run_noise_scan, ContextScan, DecompositionRow, NoiseCondition, ScanConfig,
    ScanResult,
};
pub use steering::{
    aggregate_reports, run_trajectory_steering, AggregateReport, Arm, Regime, SteeringConfig,
    SteeringReport,
};

/// Roll out episodes `0..n` under `master`, in parallel, in episode order.
pub fn rollout_many(
    bed: &Testbed,
    master: u64,
    n: usize,
    plan: &SteeringPlan,
) -> Result<Vec<Episode>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| bed.rollout(bed.episode_seed(master, i), plan))
        .collect()
}
