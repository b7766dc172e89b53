//! Random-direction search in noise space and α sweeps.

use serde::{Deserialize, Serialize};

use super::scan::{reference_contexts, ReferenceContext};
use crate::env::{ContextSnapshot, SelectionRule, ACTION_DIM};
use crate::error::{Error, Result};
use crate::policy::{probe_values, steer, NoiseVector, ProbeMetric, SteeringDirection};
use crate::rng::{derive, purpose, standard_normal_vec, stream, unit_vector};
use crate::rollout::Testbed;
use crate::stats::{mean, pearson_r};
use crate::trace::{ContextId, DirectionId};

pub const DEFAULT_ALPHA_GRID: [f64; 7] = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0];

/// Scores at or below this count as zero.
pub const DEGENERATE_SCORE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub n_directions: usize,
    /// Probe offset: candidates are scored at `z ± ε d`.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_directions: 12,
            epsilon: 0.5,
            seed: 0,
        }
    }
}

/// Candidate directions drawn for a search seed.
pub fn candidate_directions(seed: u64, n: usize, len: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, &[purpose::SEARCH]);
    (0..n).map(|_| unit_vector(&mut rng, len)).collect()
}

/// Per-candidate probe outcomes of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: usize,
    /// `A(z1 + εd)` and `A(z1 − εd)`; `None` if either probe was invalid.
    pub plus_minus: Option<(f64, f64)>,
}

impl CandidateScore {
    pub fn score(&self) -> Option<f64> {
        self.plus_minus.map(|(p, m)| (p - m).abs())
    }
}

/// Score every candidate by the first-boundary contrast difference
/// `|A(z1 + εd) − A(z1 − εd)|`, perturbing only the upcoming chunk's noise.
pub fn score_candidates(
    bed: &Testbed,
    context: &ContextSnapshot,
    z0: &NoiseVector,
    z1: &NoiseVector,
    candidates: &[Vec<f64>],
    epsilon: f64,
) -> Result<Vec<CandidateScore>> {
    let (policy, env, stride) = (&bed.policy, &bed.env, bed.chunking.stride);
    let (next, prefix) = policy.probe_prefix(context, z0, stride, env)?;
    candidates
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let d = SteeringDirection::new(c.clone(), DirectionId(index as u64))?;
            let probe = |sign: f64| -> Result<Option<f64>> {
                let z = steer(z1, &d, sign * epsilon)?;
                match policy.probe_from_prefix(&next, &prefix, &z, stride, env) {
                    Ok(s) => Ok(Some(s.jerk_contrast)),
                    Err(
                        Error::ProbeInvalid(_)
                        | Error::UndefinedSummary(_)
                        | Error::UndefinedContrast { .. },
                    ) => Ok(None),
                    Err(e) => Err(e),
                }
            };
            let plus_minus = match (probe(1.0)?, probe(-1.0)?) {
                (Some(p), Some(m)) => Some((p, m)),
                _ => None,
            };
            Ok(CandidateScore { index, plus_minus })
        })
        .collect()
}

/// Pick the candidate with the largest score, oriented so that positive α
/// increases the artifact. Ties go to the lowest index.
pub fn search_direction(
    bed: &Testbed,
    context: &ContextSnapshot,
    z0: &NoiseVector,
    z1: &NoiseVector,
    config: &SearchConfig,
) -> Result<SteeringDirection> {
    if config.n_directions == 0 {
        return Err(Error::invalid("n_directions must be >= 1"));
    }
    if !(config.epsilon > 0.0) {
        return Err(Error::invalid("search epsilon must be positive"));
    }
    let candidates =
        candidate_directions(config.seed, config.n_directions, bed.policy.latent_dim());
    let scores = score_candidates(bed, context, z0, z1, &candidates, config.epsilon)?;
    let mut best: Option<(usize, f64, bool)> = None;
    for s in &scores {
        if let (Some(score), Some((p, m))) = (s.score(), s.plus_minus) {
            if best.is_none_or(|(_, b, _)| score > b) {
                best = Some((s.index, score, p < m));
            }
        }
    }
    let (index, score, flip) =
        best.ok_or_else(|| Error::SearchFailed("every candidate probe was invalid".into()))?;
    let mut d = SteeringDirection::new(
        candidates[index].clone(),
        DirectionId(derive(config.seed, &[context.context_id.0, index as u64])),
    )?;
    if flip {
        d = d.negated();
    }
    d.context_id = Some(context.context_id);
    d.candidate_index = index;
    d.selection_score = score;
    d.degenerate = score <= DEGENERATE_SCORE;
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub context_id: ContextId,
    pub direction: SteeringDirection,
    pub alphas: Vec<f64>,
    /// Boundary transition jerk per α; `None` where the probe was invalid.
    pub btj: Vec<Option<f64>>,
    pub contrast: Vec<Option<f64>>,
    pub r_btj: Option<f64>,
    pub r_contrast: Option<f64>,
    /// `max − min` of the contrast over valid grid points.
    pub artifact_range: f64,
    pub excluded: usize,
}

fn correlation(alphas: &[f64], values: &[Option<f64>]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = alphas
        .iter()
        .zip(values)
        .filter_map(|(a, v)| v.map(|v| (*a, v)))
        .unzip();
    pearson_r(&xs, &ys).ok()
}

/// Evaluate the first-boundary probe at `z1 + α d` for each α.
pub fn run_alpha_sweep(
    bed: &Testbed,
    context: &ContextSnapshot,
    z0: &NoiseVector,
    z1: &NoiseVector,
    direction: &SteeringDirection,
    grid: &[f64],
) -> Result<SweepResult> {
    let (policy, env, stride) = (&bed.policy, &bed.env, bed.chunking.stride);
    if !grid.contains(&0.0) {
        return Err(Error::invalid("α grid must contain 0"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("α grid must be strictly ascending"));
    }
    let (next, prefix) = policy.probe_prefix(context, z0, stride, env)?;
    let mut btj = Vec::with_capacity(grid.len());
    let mut contrast = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let z = steer(z1, direction, alpha)?;
        match policy.probe_from_prefix(&next, &prefix, &z, stride, env) {
            Ok(s) => {
                let (b, c) = probe_values(&s);
                btj.push(Some(b));
                contrast.push(Some(c));
            }
            Err(
                Error::ProbeInvalid(_)
                | Error::UndefinedSummary(_)
                | Error::UndefinedContrast { .. },
            ) => {
                btj.push(None);
                contrast.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let valid: Vec<f64> = contrast.iter().flatten().copied().collect();
    let artifact_range = match valid.is_empty() {
        true => 0.0,
        false => {
            valid.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - valid.iter().copied().fold(f64::INFINITY, f64::min)
        }
    };
    Ok(SweepResult {
        context_id: context.context_id,
        direction: direction.clone(),
        alphas: grid.to_vec(),
        r_btj: correlation(grid, &btj),
        r_contrast: correlation(grid, &contrast),
        excluded: contrast.iter().filter(|c| c.is_none()).count(),
        btj,
        contrast,
        artifact_range,
    })
}

/// Exact gradient of a first-boundary metric with respect to `z1`.
pub fn probe_gradient(
    bed: &Testbed,
    context: &ContextSnapshot,
    z0: &NoiseVector,
    z1: &NoiseVector,
    metric: ProbeMetric,
) -> Result<Vec<f64>> {
    let (policy, env, stride) = (&bed.policy, &bed.env, bed.chunking.stride);
    let (next, prefix) = policy.probe_prefix(context, z0, stride, env)?;
    policy.probe_gradient(&next, &prefix, &z1.values(), stride, env, metric)
}

/// Unit direction along the exact gradient of a first-boundary metric.
pub fn gradient_direction(
    bed: &Testbed,
    context: &ContextSnapshot,
    z0: &NoiseVector,
    z1: &NoiseVector,
    metric: ProbeMetric,
) -> Result<SteeringDirection> {
    let g = probe_gradient(bed, context, z0, z1, metric)?;
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > DEGENERATE_SCORE) {
        return Err(Error::SearchFailed("contrast gradient vanishes".into()));
    }
    let mut d = SteeringDirection::new(g, DirectionId(context.context_id.0))?;
    d.context_id = Some(context.context_id);
    d.selection_score = norm;
    Ok(d)
}

/// Random unit direction in the null space of the coupling: every chunk,
/// and so every artifact value, is unchanged along it.
pub fn orthogonal_direction(bed: &Testbed, seed: u64) -> Result<SteeringDirection> {
    let h = bed.policy.horizon();
    let right = bed.policy.right_factors();
    if right.len() >= h {
        return Err(Error::invalid("full-rank coupling has no null space"));
    }
    // Orthonormal basis of span{v_k}, then project it out of each column.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in right {
        let mut u = v.clone();
        for b in &basis {
            let c: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            basis.push(u.into_iter().map(|x| x / n).collect());
        }
    }
    let mut z = standard_normal_vec(&mut stream(seed, &[purpose::SEARCH]), h * ACTION_DIM);
    for d in 0..ACTION_DIM {
        for b in &basis {
            let c: f64 = (0..h).map(|j| z[j * ACTION_DIM + d] * b[j]).sum();
            for j in 0..h {
                z[j * ACTION_DIM + d] -= c * b[j];
            }
        }
    }
    SteeringDirection::new(z, DirectionId(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    /// Best of the random candidates.
    Search,
    /// Exact gradient of the first-boundary contrast.
    Gradient,
    /// Null space of the coupling.
    Orthogonal,
}

impl DirectionKind {
    pub fn label(self) -> &'static str {
        match self {
            DirectionKind::Search => "search",
            DirectionKind::Gradient => "gradient",
            DirectionKind::Orthogonal => "orthogonal",
        }
    }
}

impl std::str::FromStr for DirectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "search" => Ok(DirectionKind::Search),
            "gradient" => Ok(DirectionKind::Gradient),
            "orthogonal" => Ok(DirectionKind::Orthogonal),
            other => Err(Error::invalid(format!("unknown direction kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectionConfig {
    pub n_contexts: usize,
    pub pool_episodes: usize,
    pub selection: SelectionRule,
    pub kind: DirectionKind,
    pub search: SearchConfig,
    pub alpha_grid: Vec<f64>,
}

impl Default for DirectionConfig {
    fn default() -> Self {
        Self {
            n_contexts: 4,
            pool_episodes: 8,
            selection: SelectionRule::Stratified,
            kind: DirectionKind::Search,
            search: SearchConfig::default(),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub kind: DirectionKind,
    pub sweeps: Vec<SweepResult>,
    /// Mean `|r|` over contexts with a defined correlation.
    pub mean_abs_r_btj: Option<f64>,
    pub mean_abs_r_contrast: Option<f64>,
    pub mean_artifact_range: Option<f64>,
    pub max_artifact_range: Option<f64>,
    /// Contexts whose search found only zero scores.
    pub degenerate: usize,
}

fn pick_direction(
    bed: &Testbed,
    r: &ReferenceContext,
    config: &DirectionConfig,
    seed: u64,
    i: usize,
) -> Result<SteeringDirection> {
    match config.kind {
        DirectionKind::Search => {
            let search = SearchConfig {
                seed: derive(seed, &[purpose::SEARCH, config.search.seed, i as u64]),
                ..config.search
            };
            search_direction(bed, &r.context, &r.z0, &r.z1, &search)
        }
        DirectionKind::Gradient => {
            gradient_direction(bed, &r.context, &r.z0, &r.z1, ProbeMetric::Contrast)
        }
        DirectionKind::Orthogonal => {
            orthogonal_direction(bed, derive(seed, &[purpose::SEARCH, i as u64]))
        }
    }
}

/// Select contexts, pick one direction per context and sweep α along it.
pub fn run_direction_experiment(
    bed: &Testbed,
    config: &DirectionConfig,
    seed: u64,
) -> Result<DirectionReport> {
    if config.n_contexts == 0 {
        return Err(Error::invalid("n_contexts must be >= 1"));
    }
    let refs = reference_contexts(
        bed,
        config.n_contexts,
        config.pool_episodes,
        config.selection,
        seed,
    )?;
    let mut sweeps = Vec::with_capacity(refs.len());
    let mut degenerate = 0;
    for (i, r) in refs.iter().enumerate() {
        let d = pick_direction(bed, r, config, seed, i)?;
        degenerate += usize::from(d.degenerate);
        sweeps.push(run_alpha_sweep(
            bed,
            &r.context,
            &r.z0,
            &r.z1,
            &d,
            &config.alpha_grid,
        )?);
    }
    let abs_mean = |f: fn(&SweepResult) -> Option<f64>| {
        let v: Vec<f64> = sweeps.iter().filter_map(f).map(f64::abs).collect();
        mean(&v)
    };
    let ranges: Vec<f64> = sweeps.iter().map(|s| s.artifact_range).collect();
    Ok(DirectionReport {
        kind: config.kind,
        mean_abs_r_btj: abs_mean(|s| s.r_btj),
        mean_abs_r_contrast: abs_mean(|s| s.r_contrast),
        mean_artifact_range: mean(&ranges),
        max_artifact_range: ranges.iter().copied().reduce(f64::max),
        degenerate,
        sweeps,
    })
}
