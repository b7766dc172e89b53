//! Trajectory-level steering with three arms sharing their randomness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::direction::SearchConfig;
use crate::error::{Error, Result};
use crate::metrics::{episode_contrast, Control};
use crate::rng::{derive, purpose};
use crate::rollout::{Episode, SearchSteering, SteeringPlan, Testbed};
use crate::stats::GroupReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Baseline,
    /// Steered against the artifact direction.
    Good,
    /// Steered along it.
    Bad,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Baseline, Arm::Good, Arm::Bad];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Good => "good",
            Arm::Bad => "bad",
        }
    }

    /// Sign applied to `|α|`.
    pub fn sign(self) -> f64 {
        match self {
            Arm::Baseline => 0.0,
            Arm::Good => -1.0,
            Arm::Bad => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteeringConfig {
    /// Arms to run, reported in this order.
    pub arms: Vec<Arm>,
    pub n_episodes_per_arm: usize,
    /// Steering magnitude `|α|`.
    pub alpha: f64,
    pub warmup_boundaries: usize,
    pub search: SearchConfig,
    pub research_each_boundary: bool,
    pub n_boot: usize,
    pub level: f64,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        Self {
            arms: Arm::ALL.to_vec(),
            n_episodes_per_arm: 50,
            alpha: 0.5,
            warmup_boundaries: 2,
            search: SearchConfig::default(),
            research_each_boundary: false,
            n_boot: 10_000,
            level: 0.95,
        }
    }
}

/// Success regime of a run, judged from its baseline arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Ceiling,
    Headroom,
    Floor,
}

impl Regime {
    pub fn of_success_rate(rate: f64) -> Self {
        if rate >= 0.95 {
            Regime::Ceiling
        } else if rate <= 0.05 {
            Regime::Floor
        } else {
            Regime::Headroom
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    /// Mean contrast good < baseline < bad.
    pub contrast: bool,
    /// Success rate good > baseline > bad.
    pub success: bool,
}

impl Ordering {
    fn of(arms: &[GroupReport]) -> Self {
        let get = |arm: Arm| arms.iter().find(|r| r.arm == arm.label());
        let (Some(base), Some(good), Some(bad)) =
            (get(Arm::Baseline), get(Arm::Good), get(Arm::Bad))
        else {
            return Self {
                contrast: false,
                success: false,
            };
        };
        let contrast = match (
            good.mean_contrast(),
            base.mean_contrast(),
            bad.mean_contrast(),
        ) {
            (Some(g), Some(b), Some(d)) => g < b && b < d,
            _ => false,
        };
        let (g, b, d) = (
            good.success_rate.point,
            base.success_rate.point,
            bad.success_rate.point,
        );
        Self {
            contrast,
            success: g > b && b > d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringReport {
    /// In configured arm order.
    pub arms: Vec<GroupReport>,
    /// Episodes per arm whose direction search was degenerate.
    pub fallbacks: Vec<usize>,
    /// False unless all three arms ran.
    pub ordering: Ordering,
    /// Judged from the baseline arm, when it ran.
    pub regime: Option<Regime>,
    pub alpha: f64,
    pub warmup_boundaries: usize,
}

impl SteeringReport {
    pub fn arm(&self, arm: Arm) -> Option<&GroupReport> {
        self.arms.iter().find(|r| r.arm == arm.label())
    }
}

fn plan_for(arm: Arm, config: &SteeringConfig) -> SteeringPlan {
    match arm {
        Arm::Baseline => SteeringPlan::None,
        _ => SteeringPlan::Search(SearchSteering {
            alpha: arm.sign() * config.alpha,
            warmup: config.warmup_boundaries,
            search: config.search,
            research_each_boundary: config.research_each_boundary,
        }),
    }
}

fn report_for(
    arm: Arm,
    episodes: &[Episode],
    config: &SteeringConfig,
    seed: u64,
    tag: u64,
) -> Result<GroupReport> {
    let successes = episodes.iter().map(|e| e.trace.success).collect();
    let contrasts = episodes
        .iter()
        .map(|e| {
            episode_contrast(&e.trace, Control::All)
                .ok()
                .map(|s| s.jerk_contrast)
        })
        .collect();
    GroupReport::from_episodes(
        arm.label(),
        successes,
        contrasts,
        config.n_boot,
        config.level,
        derive(seed, &[purpose::BOOTSTRAP, tag]),
    )
}

/// Run the configured arms over the same episode seeds.
pub fn run_trajectory_steering(
    bed: &Testbed,
    config: &SteeringConfig,
    seed: u64,
) -> Result<SteeringReport> {
    if !(config.alpha > 0.0 && config.alpha.is_finite()) {
        return Err(Error::invalid("steering needs |α| > 0"));
    }
    if config.warmup_boundaries == 0 {
        return Err(Error::invalid("warmup_boundaries must be >= 1"));
    }
    if config.n_episodes_per_arm == 0 {
        return Err(Error::invalid("n_episodes_per_arm must be >= 1"));
    }
    if config.arms.is_empty() {
        return Err(Error::invalid("at least one arm is required"));
    }
    if config
        .arms
        .iter()
        .enumerate()
        .any(|(i, a)| config.arms[..i].contains(a))
    {
        return Err(Error::invalid("arms must be distinct"));
    }
    let mut arms = Vec::with_capacity(config.arms.len());
    let mut fallbacks = Vec::with_capacity(config.arms.len());
    for &arm in &config.arms {
        let plan = plan_for(arm, config);
        let episodes: Vec<Episode> = (0..config.n_episodes_per_arm as u64)
            .into_par_iter()
            .map(|i| bed.rollout(bed.episode_seed(seed, i), &plan))
            .collect::<Result<_>>()?;
        fallbacks.push(episodes.iter().filter(|e| e.fell_back).count());
        // Bootstrap streams are keyed by arm, not by position in the list.
        let tag = Arm::ALL.iter().position(|a| *a == arm).unwrap_or(0) as u64;
        arms.push(report_for(arm, &episodes, config, seed, tag)?);
    }
    let regime = arms
        .iter()
        .find(|g| g.arm == Arm::Baseline.label())
        .map(|g| Regime::of_success_rate(g.success_rate.point));
    Ok(SteeringReport {
        ordering: Ordering::of(&arms),
        arms,
        fallbacks,
        regime,
        alpha: config.alpha,
        warmup_boundaries: config.warmup_boundaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub arms: Vec<GroupReport>,
    pub ordering: Ordering,
    /// Regime of each constituent run.
    pub regimes: Vec<Regime>,
    pub note: Option<String>,
}

/// Pool per-episode values across runs, arm by arm, and recompute intervals.
pub fn aggregate_reports(
    reports: &[Vec<GroupReport>],
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::EmptyInput("no reports to aggregate".into()))?;
    let labels: Vec<&str> = first.iter().map(|r| r.arm.as_str()).collect();
    for (i, r) in reports.iter().enumerate() {
        let these: Vec<&str> = r.iter().map(|g| g.arm.as_str()).collect();
        if these != labels {
            return Err(Error::MismatchedArms(format!(
                "report {i} has arms {these:?}, expected {labels:?}"
            )));
        }
        for g in r {
            g.check()?;
        }
    }
    let arms = labels
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let mut successes = Vec::new();
            let mut contrasts = Vec::new();
            for r in reports {
                successes.extend_from_slice(&r[k].raw_successes);
                contrasts.extend_from_slice(&r[k].raw_contrasts);
            }
            GroupReport::from_episodes(
                *label,
                successes,
                contrasts,
                n_boot,
                level,
                derive(seed, &[purpose::BOOTSTRAP, k as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let regimes: Vec<Regime> = reports
        .iter()
        .map(|r| {
            let base = r
                .iter()
                .find(|g| g.arm == Arm::Baseline.label())
                .unwrap_or(&r[0]);
            Regime::of_success_rate(base.success_rate.point)
        })
        .collect();
    let mixed = regimes.windows(2).any(|w| w[0] != w[1]);
    let note = mixed.then(|| {
        format!(
            "pooled over runs in different success regimes ({regimes:?}); \
             ceiling and floor runs compress success-rate separation"
        )
    });
    Ok(AggregateReport {
        ordering: Ordering::of(&arms),
        arms,
        regimes,
        note,
    })
}
