//! Episode-level association between boundary artifact and task outcome.

use serde::{Deserialize, Serialize};

use super::rollout_many;
use crate::error::{Error, Result};
use crate::metrics::{episode_contrast, jerk_at, matched_horizon_truncate, Control};
use crate::rng::{derive, purpose};
use crate::rollout::{Episode, SteeringPlan, Testbed};
use crate::stats::{mean, PermutationResult, PermutationTest, Sidedness};
use crate::Trace;

pub const DEFAULT_PERMUTATIONS: u64 = 20_000;
pub const MIN_EPISODES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutcomeConfig {
    pub controls: Vec<Control>,
    pub n_permutations: u64,
    pub sidedness: Sidedness,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        Self {
            controls: vec![
                Control::All,
                Control::contact_free(),
                Control::contact_free_first(15),
            ],
            n_permutations: DEFAULT_PERMUTATIONS,
            sidedness: Sidedness::Greater,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    pub control: Control,
    pub label: String,
    pub n_success: usize,
    pub n_failure: usize,
    /// Episodes whose contrast was undefined under this control.
    pub excluded: usize,
    pub success_mean: Option<f64>,
    pub failure_mean: Option<f64>,
    /// `failure_mean − success_mean`.
    pub delta: Option<f64>,
    /// `None` when either group is empty.
    pub test: Option<PermutationResult<f64>>,
}

impl ControlResult {
    pub fn applicable(&self) -> bool {
        self.test.is_some()
    }

    pub fn p_value(&self) -> Option<f64> {
        self.test.map(|t| t.p_value)
    }
}

/// Per-timestep mean jerk by outcome after truncating every episode to the
/// shortest one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedProfiles {
    pub horizon: usize,
    pub success_mean_jerk: Vec<Option<f64>>,
    pub failure_mean_jerk: Vec<Option<f64>>,
    pub boundary: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub n_episodes: usize,
    pub n_valid: usize,
    pub n_success: usize,
    pub n_failure: usize,
    pub controls: Vec<ControlResult>,
    pub profiles: Option<MatchedProfiles>,
    /// Conditions that limit interpretation (too few episodes, one outcome).
    pub flags: Vec<String>,
}

impl OutcomeReport {
    pub fn control(&self, label: &str) -> Option<&ControlResult> {
        self.controls.iter().find(|c| c.label == label)
    }
}

fn matched_profiles(traces: &[&Trace]) -> Result<Option<MatchedProfiles>> {
    if traces.is_empty() {
        return Ok(None);
    }
    let owned: Vec<Trace> = traces.iter().map(|t| (*t).clone()).collect();
    let cut = matched_horizon_truncate(&owned)?;
    let horizon = cut[0].len();
    let group_mean = |success: bool, t: usize| {
        let js: Vec<f64> = cut
            .iter()
            .filter(|tr| tr.success == success)
            .filter_map(|tr| jerk_at(tr, t))
            .collect();
        mean(&js)
    };
    Ok(Some(MatchedProfiles {
        horizon,
        success_mean_jerk: (0..horizon).map(|t| group_mean(true, t)).collect(),
        failure_mean_jerk: (0..horizon).map(|t| group_mean(false, t)).collect(),
        boundary: (0..horizon).map(|t| cut[0].is_boundary(t)).collect(),
    }))
}

/// Group traces by outcome and compare episode contrasts under each control.
/// Invalid traces are skipped.
pub fn analyze_outcomes(
    traces: &[Trace],
    config: &OutcomeConfig,
    seed: u64,
) -> Result<OutcomeReport> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("no traces to analyze".into()));
    }
    let valid: Vec<&Trace> = traces.iter().filter(|t| t.valid).collect();
    let n_success = valid.iter().filter(|t| t.success).count();
    let n_failure = valid.len() - n_success;
    let mut flags = Vec::new();
    if valid.len() < MIN_EPISODES {
        flags.push(format!(
            "only {} valid episodes (< {MIN_EPISODES})",
            valid.len()
        ));
    }
    if n_success == 0 || n_failure == 0 {
        flags.push("single-outcome run: tests inapplicable".into());
    }

    let mut controls = Vec::with_capacity(config.controls.len());
    for (ci, &control) in config.controls.iter().enumerate() {
        let mut succ = Vec::new();
        let mut fail = Vec::new();
        let mut excluded = 0;
        for t in &valid {
            match episode_contrast(t, control) {
                Ok(s) if t.success => succ.push(s.jerk_contrast),
                Ok(s) => fail.push(s.jerk_contrast),
                Err(Error::Capability(m)) => return Err(Error::Capability(m)),
                Err(_) => excluded += 1,
            }
        }
        let (sm, fm) = (mean(&succ), mean(&fail));
        let test = if succ.is_empty() || fail.is_empty() {
            None
        } else {
            Some(
                PermutationTest::new(config.n_permutations)
                    .sidedness(config.sidedness)
                    .seed(derive(seed, &[purpose::PERMUTATION, ci as u64]))
                    .run(&succ, &fail)?,
            )
        };
        controls.push(ControlResult {
            control,
            label: control.label(),
            n_success: succ.len(),
            n_failure: fail.len(),
            excluded,
            success_mean: sm,
            failure_mean: fm,
            delta: sm.zip(fm).map(|(s, f)| f - s),
            test,
        });
    }

    Ok(OutcomeReport {
        n_episodes: traces.len(),
        n_valid: valid.len(),
        n_success,
        n_failure,
        controls,
        profiles: matched_profiles(&valid)?,
        flags,
    })
}

/// Roll out `n_episodes` unsteered episodes and analyze them.
pub fn run_outcome_association(
    bed: &Testbed,
    n_episodes: usize,
    config: &OutcomeConfig,
    seed: u64,
) -> Result<(OutcomeReport, Vec<Episode>)> {
    if n_episodes == 0 {
        return Err(Error::invalid("n_episodes must be >= 1"));
    }
    let episodes = rollout_many(bed, seed, n_episodes, &SteeringPlan::None)?;
    let traces: Vec<Trace> = episodes.iter().map(|e| e.trace.clone()).collect();
    let report = analyze_outcomes(&traces, config, seed)?;
    Ok((report, episodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ActionMatrix;

    fn trace(success: bool, spike: f64) -> Trace {
        let rows: Vec<[f64; 1]> = (0..20)
            .map(|t| [if t % 5 == 0 { spike } else { 0.0 }])
            .collect();
        Trace::from_actions(ActionMatrix::from_rows(&rows).unwrap(), 5, 10, success)
            .unwrap()
            .with_contact_mask(vec![false; 20])
            .unwrap()
    }

    #[test]
    fn single_outcome_marks_tests_inapplicable() {
        let traces: Vec<Trace> = (0..12).map(|i| trace(true, i as f64)).collect();
        let r = analyze_outcomes(&traces, &OutcomeConfig::default(), 1).unwrap();
        assert!(r.controls.iter().all(|c| !c.applicable()));
        assert!(!r.flags.is_empty());
    }

    #[test]
    fn larger_failure_spikes_are_detected() {
        let mut traces: Vec<Trace> = (0..6).map(|i| trace(true, 0.1 * i as f64)).collect();
        traces.extend((0..6).map(|i| trace(false, 5.0 + i as f64)));
        let cfg = OutcomeConfig {
            controls: vec![Control::All],
            ..Default::default()
        };
        let r = analyze_outcomes(&traces, &cfg, 1).unwrap();
        let all = r.control("all").unwrap();
        assert!(all.delta.unwrap() > 0.0);
        assert!(all.p_value().unwrap() < 0.01);
        assert_eq!(r.profiles.as_ref().unwrap().horizon, 20);
    }
}
