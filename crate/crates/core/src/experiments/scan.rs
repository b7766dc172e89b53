//! Fixed-context noise scans and the z0 / z1 decomposition.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rollout_many;
use crate::env::{snapshot_contexts, ContextSnapshot, SelectionRule};
use crate::error::{Error, Result};
use crate::policy::{probe_values, NoiseVector};
use crate::rng::{derive, purpose, stream};
use crate::rollout::{SteeringPlan, Testbed};
use crate::stats::{bootstrap_ci, mean, pooled_std, sample_std, IntervalEstimate};
use crate::trace::{ContextId, NoiseId};

/// Which chunk noise is redrawn while the context stays fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCondition {
    VaryZ0,
    VaryZ1,
    VaryBoth,
}

impl NoiseCondition {
    pub const ALL: [NoiseCondition; 3] = [
        NoiseCondition::VaryZ0,
        NoiseCondition::VaryZ1,
        NoiseCondition::VaryBoth,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NoiseCondition::VaryZ0 => "vary_z0",
            NoiseCondition::VaryZ1 => "vary_z1",
            NoiseCondition::VaryBoth => "vary_both",
        }
    }

    fn tag(self) -> u64 {
        match self {
            NoiseCondition::VaryZ0 => 0,
            NoiseCondition::VaryZ1 => 1,
            NoiseCondition::VaryBoth => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub n_contexts: usize,
    pub n_samples: usize,
    pub condition: NoiseCondition,
    /// Unsteered episodes rolled out to build the context pool.
    pub pool_episodes: usize,
    pub selection: SelectionRule,
    pub n_boot: usize,
    pub level: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n_contexts: 16,
            n_samples: 24,
            condition: NoiseCondition::VaryZ1,
            pool_episodes: 8,
            selection: SelectionRule::Stratified,
            n_boot: 10_000,
            level: 0.95,
        }
    }
}

/// A boundary context with the noises its rollout actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceContext {
    pub context: ContextSnapshot,
    pub z0: NoiseVector,
    pub z1: NoiseVector,
}

/// Roll out the pool and select contexts with their reference noises.
pub fn reference_contexts(
    bed: &Testbed,
    n_contexts: usize,
    pool_episodes: usize,
    selection: SelectionRule,
    seed: u64,
) -> Result<Vec<ReferenceContext>> {
    let episodes = rollout_many(bed, seed, pool_episodes, &SteeringPlan::None)?;
    let picked = snapshot_contexts(&episodes, n_contexts, selection)?;
    picked
        .into_iter()
        .map(|context| {
            let ep = episodes
                .iter()
                .find(|e| e.trace.episode_id == context.episode_id)
                .ok_or_else(|| Error::invalid("context from an unknown episode"))?;
            let b = context.t / bed.chunking.stride;
            Ok(ReferenceContext {
                z0: ep.noises[b].clone(),
                z1: ep.noises[b + 1].clone(),
                context,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextScan {
    pub context_id: ContextId,
    pub episode_id: u64,
    pub t: usize,
    pub btj: Vec<f64>,
    pub contrast: Vec<f64>,
    pub btj_std: Option<f64>,
    pub contrast_std: Option<f64>,
    /// Probe value at the rollout's own noises.
    pub reference_btj: Option<f64>,
    pub reference_contrast: Option<f64>,
    pub invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub condition: NoiseCondition,
    pub n_samples: usize,
    pub contexts: Vec<ContextScan>,
    pub mean_contrast_std: Option<f64>,
    pub mean_btj_std: Option<f64>,
    pub contrast_std_ci: Option<IntervalEstimate<f64>>,
    pub btj_std_ci: Option<IntervalEstimate<f64>>,
    pub max_contrast_std: Option<f64>,
    pub max_btj_std: Option<f64>,
    pub invalid_total: usize,
    pub note: String,
}

fn draw(rng: &mut impl Rng, len: usize, id: u64) -> NoiseVector {
    NoiseVector::sample(rng, len, NoiseId(id))
}

fn probe(
    bed: &Testbed,
    ctx: &ContextSnapshot,
    z0: &NoiseVector,
    z1: &NoiseVector,
) -> Result<Option<(f64, f64)>> {
    match bed
        .policy
        .first_boundary_probe(ctx, z0, z1, bed.chunking.stride, &bed.env)
    {
        Ok(s) => Ok(Some(probe_values(&s))),
        Err(
            Error::ProbeInvalid(_) | Error::UndefinedSummary(_) | Error::UndefinedContrast { .. },
        ) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Probe one context under `n_samples` noise draws.
pub fn scan_context(
    bed: &Testbed,
    reference: &ReferenceContext,
    condition: NoiseCondition,
    n_samples: usize,
    seed: u64,
) -> Result<ContextScan> {
    let len = bed.policy.latent_dim();
    let mut rng = stream(
        seed,
        &[
            purpose::PROBE,
            condition.tag(),
            reference.context.context_id.0,
        ],
    );
    let mut btj = Vec::with_capacity(n_samples);
    let mut contrast = Vec::with_capacity(n_samples);
    let mut invalid = 0;
    for i in 0..n_samples as u64 {
        let (z0, z1) = match condition {
            NoiseCondition::VaryZ0 => (draw(&mut rng, len, 2 * i), reference.z1.clone()),
            NoiseCondition::VaryZ1 => (reference.z0.clone(), draw(&mut rng, len, 2 * i + 1)),
            NoiseCondition::VaryBoth => {
                let z0 = draw(&mut rng, len, 2 * i);
                (z0, draw(&mut rng, len, 2 * i + 1))
            }
        };
        match probe(bed, &reference.context, &z0, &z1)? {
            Some((b, c)) => {
                btj.push(b);
                contrast.push(c);
            }
            None => invalid += 1,
        }
    }
    let reference_value = probe(bed, &reference.context, &reference.z0, &reference.z1)?;
    Ok(ContextScan {
        context_id: reference.context.context_id,
        episode_id: reference.context.episode_id,
        t: reference.context.t,
        btj_std: sample_std(&btj),
        contrast_std: sample_std(&contrast),
        btj,
        contrast,
        reference_btj: reference_value.map(|v| v.0),
        reference_contrast: reference_value.map(|v| v.1),
        invalid,
    })
}

fn max_of(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(f64::max)
}

/// Fixed-context scan: per-context spread of first-boundary artifacts when
/// only latent noise changes.
pub fn run_noise_scan(bed: &Testbed, config: &ScanConfig, seed: u64) -> Result<ScanResult> {
    if config.n_samples == 0 || config.n_contexts == 0 {
        return Err(Error::invalid(
            "scan needs n_contexts >= 1 and n_samples >= 1",
        ));
    }
    let refs = reference_contexts(
        bed,
        config.n_contexts,
        config.pool_episodes,
        config.selection,
        seed,
    )?;
    let contexts: Vec<ContextScan> = refs
        .par_iter()
        .map(|r| scan_context(bed, r, config.condition, config.n_samples, seed))
        .collect::<Result<_>>()?;
    let contrast_stds: Vec<f64> = contexts.iter().filter_map(|c| c.contrast_std).collect();
    let btj_stds: Vec<f64> = contexts.iter().filter_map(|c| c.btj_std).collect();
    let ci = |xs: &[f64], k: u64| -> Result<Option<IntervalEstimate<f64>>> {
        if xs.is_empty() {
            return Ok(None);
        }
        bootstrap_ci(
            xs,
            config.n_boot,
            config.level,
            derive(seed, &[purpose::BOOTSTRAP, k]),
        )
        .map(Some)
    };
    Ok(ScanResult {
        condition: config.condition,
        n_samples: config.n_samples,
        mean_contrast_std: mean(&contrast_stds),
        mean_btj_std: mean(&btj_stds),
        contrast_std_ci: ci(&contrast_stds, 0)?,
        btj_std_ci: ci(&btj_stds, 1)?,
        max_contrast_std: max_of(&contrast_stds),
        max_btj_std: max_of(&btj_stds),
        invalid_total: contexts.iter().map(|c| c.invalid).sum(),
        contexts,
        note: format!(
            "{}: which chunk noise a fixed-context scan should vary is ambiguous; \
             the other noise stays at the rollout's reference draw",
            config.condition.label()
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub condition: NoiseCondition,
    /// Within-context standard deviation pooled over contexts.
    pub btj_std: f64,
    pub contrast_std: f64,
    pub n_samples: usize,
    pub n_contexts: usize,
    pub invalid: usize,
}

/// Vary only z0, only z1, or both, from the same reference noises.
pub fn run_decomposition(
    bed: &Testbed,
    n_contexts: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<DecompositionRow>> {
    let defaults = ScanConfig::default();
    if n_samples < 2 {
        return Err(Error::invalid(
            "decomposition needs at least 2 samples per condition",
        ));
    }
    let refs = reference_contexts(
        bed,
        n_contexts,
        defaults.pool_episodes,
        defaults.selection,
        seed,
    )?;
    NoiseCondition::ALL
        .iter()
        .map(|&condition| {
            let scans: Vec<ContextScan> = refs
                .par_iter()
                .map(|r| scan_context(bed, r, condition, n_samples, seed))
                .collect::<Result<_>>()?;
            let pooled = |f: fn(&ContextScan) -> &Vec<f64>| {
                let groups: Vec<Vec<f64>> = scans.iter().map(|s| f(s).clone()).collect();
                pooled_std(&groups).unwrap_or(0.0)
            };
            Ok(DecompositionRow {
                condition,
                btj_std: pooled(|s| &s.btj),
                contrast_std: pooled(|s| &s.contrast),
                n_samples,
                n_contexts: refs.len(),
                invalid: scans.iter().map(|s| s.invalid).sum(),
            })
        })
        .collect()
}
