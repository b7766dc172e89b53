//! Noise-conditioned chunk generator.
//!
//! A chunk is an expert plan `e(x)` plus a deviation
//! `Δ = ε_dev · (M(x) Z + B(x))`, where `Z` is the latent `z` reshaped to
//! `H × D`, `M(x)` is a frozen rank-`r` temporal coupling modulated by random
//! Fourier features of the context, and `B(x)` is a context-dependent offset.
//! Both concentrate at the start of the chunk. The sampler integrates a straight-line
//! velocity field from the latent to `e(x) + Δ` with `S` Euler steps.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{step_kinematics, ContextSnapshot, EnvConfig, EnvState, Vec2, ACTION_DIM};
use crate::error::{Error, Result};
use crate::metrics::{summarize, Window};
use crate::rng::{purpose, standard_normal_vec, stream, SeedRecord};
use crate::trace::{
    ActionChunk, ActionMatrix, ContextId, DirectionId, NoiseId, RolloutTrace, SteeringTag,
};
use crate::Summary;

const N_FEATURES: usize = 9;
/// Per-feature frequency scales: agent position, agent velocity, object,
/// goal, carrying flag. The goal is fixed per episode and varies fastest.
const FEATURE_FREQ: [f64; N_FEATURES] = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 20.0, 20.0, 0.2];

/// A steering direction applied to a latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedSteering {
    pub direction_id: DirectionId,
    pub direction: Vec<f64>,
    pub alpha: f64,
}

/// Latent noise `z` of one chunk.
///
/// Steering is stored as accumulated coefficients over the untouched base
/// draw, so repeated steering along one direction composes exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseVector {
    pub base: Vec<f64>,
    pub noise_id: NoiseId,
    pub seed_record: Option<SeedRecord>,
    pub steering: Vec<AppliedSteering>,
}

impl NoiseVector {
    pub fn new(values: Vec<f64>, noise_id: NoiseId) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("noise vector".into()));
        }
        Ok(Self {
            base: values,
            noise_id,
            seed_record: None,
            steering: Vec::new(),
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            base: vec![0.0; len],
            noise_id: NoiseId(0),
            seed_record: None,
            steering: Vec::new(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, len: usize, noise_id: NoiseId) -> Self {
        Self {
            base: standard_normal_vec(rng, len),
            noise_id,
            seed_record: None,
            steering: Vec::new(),
        }
    }

    pub fn with_seed_record(mut self, record: SeedRecord) -> Self {
        self.seed_record = Some(record);
        self
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = self.base.clone();
        for s in &self.steering {
            for (x, d) in v.iter_mut().zip(&s.direction) {
                *x += s.alpha * d;
            }
        }
        v
    }

    /// Net steering along a direction, if any.
    pub fn steering_tag(&self) -> Option<SteeringTag> {
        self.steering.last().map(|s| SteeringTag {
            alpha: s.alpha,
            direction_id: s.direction_id,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Positive α increases the artifact.
    PositiveIncreases,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringDirection {
    pub direction: Vec<f64>,
    pub id: DirectionId,
    pub context_id: Option<ContextId>,
    pub candidate_index: usize,
    pub selection_score: f64,
    pub polarity: Polarity,
    /// Every candidate scored (numerically) zero.
    pub degenerate: bool,
}

impl SteeringDirection {
    /// Normalize `v` to a unit direction.
    pub fn new(v: Vec<f64>, id: DirectionId) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::invalid(
                "steering direction must be nonzero and finite",
            ));
        }
        Ok(Self {
            direction: v.into_iter().map(|x| x / norm).collect(),
            id,
            context_id: None,
            candidate_index: 0,
            selection_score: 0.0,
            polarity: Polarity::PositiveIncreases,
            degenerate: false,
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            direction: self.direction.iter().map(|x| -x).collect(),
            ..self.clone()
        }
    }
}

/// `z' = z + α d`, with provenance.
pub fn steer(z: &NoiseVector, d: &SteeringDirection, alpha: f64) -> Result<NoiseVector> {
    if z.len() != d.direction.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: d.direction.len(),
        });
    }
    let mut out = z.clone();
    match out
        .steering
        .iter_mut()
        .find(|s| s.direction_id == d.id && s.direction == d.direction)
    {
        Some(s) => s.alpha += alpha,
        None => out.steering.push(AppliedSteering {
            direction_id: d.id,
            direction: d.direction.clone(),
            alpha,
        }),
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    /// Deviation scale `ε_dev`.
    pub deviation_scale: f64,
    /// Rank `r` of the temporal coupling.
    pub coupling_rank: usize,
    /// Euler steps `S` of the sampler.
    pub flow_steps: usize,
    pub expert_gain: f64,
    pub expert_max_speed: f64,
    pub feature_seed: u64,
    /// Depth of the context modulation of each coupling component.
    pub modulation: f64,
    /// Log-amplitude of the context gain.
    pub gain_spread: f64,
    /// Size of the decaying per-chunk offset relative to the coupling.
    pub bias_scale: f64,
    /// Per-step decay of the deviation over a chunk, shared by the offset
    /// and the coupling profiles.
    pub onset_decay: f64,
    /// When set, the deviation is `ε·s·tanh((MZ + B)/s)`.
    pub saturation: Option<f64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            deviation_scale: 0.02,
            coupling_rank: 3,
            flow_steps: 10,
            expert_gain: 5.0,
            expert_max_speed: 0.2,
            feature_seed: 7,
            modulation: 0.5,
            gain_spread: 0.5,
            bias_scale: 6.0,
            onset_decay: 0.5,
            saturation: None,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.deviation_scale >= 0.0 && self.deviation_scale.is_finite()) {
            return Err(Error::invalid("policy.deviation_scale must be >= 0"));
        }
        if self.coupling_rank == 0 || self.flow_steps == 0 {
            return Err(Error::invalid(
                "policy.coupling_rank and policy.flow_steps must be >= 1",
            ));
        }
        if !(self.expert_gain > 0.0 && self.expert_max_speed > 0.0) {
            return Err(Error::invalid("expert gain and speed must be positive"));
        }
        if !(0.0..1.0).contains(&self.onset_decay) {
            return Err(Error::invalid("policy.onset_decay must lie in [0, 1)"));
        }
        if self.saturation.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::invalid("policy.saturation must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Features {
    /// Right factors `v_k`, unit vectors over chunk time.
    right: Vec<Vec<f64>>,
    /// Left profiles `u_k` over chunk time, decaying from the chunk start.
    left: Vec<Vec<f64>>,
    mod_w: Vec<[f64; N_FEATURES]>,
    mod_c: Vec<f64>,
    gain_w: [f64; N_FEATURES],
    gain_c: f64,
    bias_w: [f64; N_FEATURES],
    bias_c: f64,
    bias_angle: f64,
}

impl Features {
    fn draw(seed: u64, rank: usize, horizon: usize, decay: f64) -> Self {
        let mut rng = stream(seed, &[purpose::FEATURES]);
        let freq = |rng: &mut rand_chacha::ChaCha8Rng| {
            let g = standard_normal_vec(rng, N_FEATURES);
            std::array::from_fn(|i| g[i] * FEATURE_FREQ[i])
        };
        let right = (0..rank)
            .map(|_| crate::rng::unit_vector(&mut rng, horizon))
            .collect();
        let left = (0..rank)
            .map(|k| {
                (0..horizon)
                    .map(|i| {
                        decay.powi(i as i32)
                            * (PI * k as f64 * (i as f64 + 0.5) / horizon as f64).cos()
                    })
                    .collect()
            })
            .collect();
        let mod_w = (0..rank).map(|_| freq(&mut rng)).collect();
        let mod_c = (0..rank).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        let gain_w = freq(&mut rng);
        let gain_c = rng.random::<f64>() * 2.0 * PI;
        let bias_w = freq(&mut rng);
        let bias_c = rng.random::<f64>() * 2.0 * PI;
        let bias_angle = rng.random::<f64>() * 2.0 * PI;
        Self {
            right,
            left,
            mod_w,
            mod_c,
            gain_w,
            gain_c,
            bias_w,
            bias_c,
            bias_angle,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Frozen chunk policy. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPolicy {
    config: PolicyConfig,
    horizon: usize,
    dt: f64,
    pickup_radius: f64,
    features: Features,
}

impl ChunkPolicy {
    pub fn new(config: PolicyConfig, horizon: usize, env: &EnvConfig) -> Result<Self> {
        config.validate()?;
        env.validate()?;
        if horizon < 2 {
            return Err(Error::invalid("horizon must be >= 2"));
        }
        let features = Features::draw(
            config.feature_seed,
            config.coupling_rank,
            horizon,
            config.onset_decay,
        );
        Ok(Self {
            config,
            horizon,
            dt: env.dt,
            pickup_radius: env.pickup_radius,
            features,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Latent length `L = H × D`.
    pub fn latent_dim(&self) -> usize {
        self.horizon * ACTION_DIM
    }

    fn context_features(state: &EnvState, max_speed: f64) -> [f64; N_FEATURES] {
        [
            state.agent[0],
            state.agent[1],
            state.velocity[0] / max_speed,
            state.velocity[1] / max_speed,
            state.object[0],
            state.object[1],
            state.goal[0],
            state.goal[1],
            f64::from(u8::from(state.carrying)),
        ]
    }

    fn gain(&self, f: &[f64; N_FEATURES]) -> f64 {
        (self.config.gain_spread * (dot(&self.features.gain_w, f) + self.features.gain_c).cos())
            .exp()
    }

    /// Temporal coupling `M(x)` as a row-major `H × H` matrix.
    pub fn coupling_matrix(&self, state: &EnvState) -> Vec<f64> {
        let h = self.horizon;
        let f = Self::context_features(state, self.config.expert_max_speed);
        let g = self.gain(&f);
        let mut m = vec![0.0; h * h];
        for k in 0..self.config.coupling_rank {
            let w = g
                * (1.0
                    + self.config.modulation
                        * (dot(&self.features.mod_w[k], &f) + self.features.mod_c[k]).cos());
            let (u, v) = (&self.features.left[k], &self.features.right[k]);
            for i in 0..h {
                for j in 0..h {
                    m[i * h + j] += w * u[i] * v[j];
                }
            }
        }
        m
    }

    /// Offset `B(x)` as a row-major `H × D` matrix.
    pub fn bias(&self, state: &EnvState) -> Vec<f64> {
        let f = Self::context_features(state, self.config.expert_max_speed);
        let g = self.gain(&f);
        let phi = self.features.bias_angle
            + 0.25 * (dot(&self.features.bias_w, &f) + self.features.bias_c).cos();
        let dir = [phi.cos(), phi.sin()];
        let mut out = Vec::with_capacity(self.horizon * ACTION_DIM);
        let mut decay = 1.0;
        for _ in 0..self.horizon {
            for d in dir {
                out.push(self.config.bias_scale * g * decay * d);
            }
            decay *= self.config.onset_decay;
        }
        out
    }

    /// `M(x) Z + B(x)`, row-major `H × D`.
    fn pre_activation(&self, state: &EnvState, z: &[f64]) -> Vec<f64> {
        let h = self.horizon;
        let m = self.coupling_matrix(state);
        let mut pre = self.bias(state);
        for i in 0..h {
            for j in 0..h {
                let w = m[i * h + j];
                for d in 0..ACTION_DIM {
                    pre[i * ACTION_DIM + d] += w * z[j * ACTION_DIM + d];
                }
            }
        }
        pre
    }

    /// Right factors `v_k` of the coupling. Latent directions orthogonal to
    /// all of them (per action dimension) leave every chunk unchanged.
    pub fn right_factors(&self) -> &[Vec<f64>] {
        &self.features.right
    }

    /// Deviation `Δ` for a latent, row-major `H × D`.
    pub fn deviation(&self, state: &EnvState, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                got: z.len(),
            });
        }
        let h = self.horizon;
        let eps = self.config.deviation_scale;
        if eps == 0.0 {
            return Ok(vec![0.0; h * ACTION_DIM]);
        }
        let pre = self.pre_activation(state, z);
        Ok(match self.config.saturation {
            None => pre.into_iter().map(|p| eps * p).collect(),
            Some(s) => pre.into_iter().map(|p| eps * s * (p / s).tanh()).collect(),
        })
    }

    /// Saturated proportional controller toward the object, then the goal,
    /// rolled forward `H` steps from `state`. Row-major `H × D`.
    pub fn expert_plan(&self, state: &EnvState) -> Vec<f64> {
        let vmax = self.config.expert_max_speed;
        let mut p = state.agent;
        let mut carrying = state.carrying;
        let mut out = Vec::with_capacity(self.horizon * ACTION_DIM);
        for _ in 0..self.horizon {
            let target = if carrying || state.dropped {
                state.goal
            } else {
                state.object
            };
            let mut v: Vec2 = [
                self.config.expert_gain * (target[0] - p[0]),
                self.config.expert_gain * (target[1] - p[1]),
            ];
            let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if n > vmax {
                v = [v[0] / n * vmax, v[1] / n * vmax];
            }
            p = [p[0] + self.dt * v[0], p[1] + self.dt * v[1]];
            if !carrying && !state.dropped {
                let d =
                    ((p[0] - state.object[0]).powi(2) + (p[1] - state.object[1]).powi(2)).sqrt();
                carrying = d <= self.pickup_radius;
            }
            out.extend_from_slice(&v);
        }
        out
    }

    /// `a = π(x, z)`. Deterministic in `(context, z)`.
    pub fn generate_chunk(
        &self,
        context: &ContextSnapshot,
        z: &NoiseVector,
        chunk_index: usize,
    ) -> Result<ActionChunk<f64>> {
        let values = self.generate_actions(&context.state, &z.values())?;
        ActionChunk::new(
            ActionMatrix::from_flat(self.horizon, ACTION_DIM, values)?,
            chunk_index,
            context.context_id,
            z.noise_id,
        )
    }

    /// Flat `H × D` actions for a state and latent values.
    pub fn generate_actions(&self, state: &EnvState, z: &[f64]) -> Result<Vec<f64>> {
        let target = self.deviation(state, z)?;
        let expert = self.expert_plan(state);
        // Integrate in plan-relative coordinates, from z − e(x) to Δ.
        let mut r: Vec<f64> = z.iter().zip(&expert).map(|(zi, ei)| zi - ei).collect();
        let steps = self.config.flow_steps;
        for s in 0..steps {
            let remaining = (steps - s) as f64;
            for (ri, ti) in r.iter_mut().zip(&target) {
                *ri += (ti - *ri) / remaining;
            }
        }
        Ok(expert.iter().zip(&r).map(|(e, ri)| e + ri).collect())
    }

    fn clip(values: &[f64], bound: f64) -> Vec<f64> {
        values.iter().map(|v| v.clamp(-bound, bound)).collect()
    }

    /// Execute the first `K` actions of the chunk for `(x, z0)` on a
    /// kinematic copy of the environment. Returns the successor state and
    /// the executed (clipped) actions.
    pub fn probe_prefix(
        &self,
        context: &ContextSnapshot,
        z0: &NoiseVector,
        stride: usize,
        env: &EnvConfig,
    ) -> Result<(EnvState, Vec<f64>)> {
        if stride == 0 || stride > self.horizon {
            return Err(Error::invalid(format!(
                "stride {stride} outside 1..={}",
                self.horizon
            )));
        }
        let c0 = self.generate_actions(&context.state, &z0.values())?;
        let mut state = context.state.clone();
        let mut executed = Vec::with_capacity(stride * ACTION_DIM);
        for i in 0..stride {
            let info = step_kinematics(&mut state, &c0[i * ACTION_DIM..(i + 1) * ACTION_DIM], env)?;
            executed.extend_from_slice(&info.executed);
            if state.status(env).is_terminal() {
                return Err(Error::ProbeInvalid(format!(
                    "episode terminated ({:?}) after {} prefix steps",
                    state.status(env),
                    i + 1
                )));
            }
        }
        Ok((state, executed))
    }

    /// Stitch the executed prefix of chunk 0 with the head of chunk 1 and
    /// summarize the `2K` window. The boundary sits at `t = K`.
    pub fn first_boundary_probe(
        &self,
        context: &ContextSnapshot,
        z0: &NoiseVector,
        z1: &NoiseVector,
        stride: usize,
        env: &EnvConfig,
    ) -> Result<Summary> {
        let (next, prefix) = self.probe_prefix(context, z0, stride, env)?;
        self.probe_from_prefix(&next, &prefix, z1, stride, env)
    }

    /// Second half of the probe, for callers that vary only `z1`.
    pub fn probe_from_prefix(
        &self,
        next: &EnvState,
        prefix: &[f64],
        z1: &NoiseVector,
        stride: usize,
        env: &EnvConfig,
    ) -> Result<Summary> {
        let c1 = Self::clip(&self.generate_actions(next, &z1.values())?, env.action_clip);
        let mut window = prefix.to_vec();
        window.extend_from_slice(&c1[..stride * ACTION_DIM]);
        let trace = RolloutTrace::from_actions(
            ActionMatrix::from_flat(2 * stride, ACTION_DIM, window)?,
            stride,
            self.horizon,
            false,
        )?;
        summarize(&trace, &Window::full(&trace))
    }

    /// Exact gradient of a probe metric with respect to `z1`. Jerks of zero
    /// norm and clipped actions contribute nothing.
    pub fn probe_gradient(
        &self,
        next: &EnvState,
        prefix: &[f64],
        z1: &[f64],
        stride: usize,
        env: &EnvConfig,
        metric: ProbeMetric,
    ) -> Result<Vec<f64>> {
        const D: usize = ACTION_DIM;
        if z1.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                got: z1.len(),
            });
        }
        if prefix.len() != stride * D {
            return Err(Error::DimensionMismatch {
                expected: stride * D,
                got: prefix.len(),
            });
        }
        let sets = crate::metrics::PhaseSets::default_for(stride)?;
        let raw = self.generate_actions(next, z1)?;
        let len = 2 * stride;
        let mut window = prefix.to_vec();
        window.extend(
            raw[..stride * D]
                .iter()
                .map(|v| v.clamp(-env.action_clip, env.action_clip)),
        );

        // dC/da over the window.
        let mut counts = vec![0usize; stride];
        for t in 2..len {
            counts[t % stride] += 1;
        }
        let weight = |p: usize| {
            if metric == ProbeMetric::BoundaryJerk {
                if p == 0 {
                    1.0 / counts[0] as f64
                } else {
                    0.0
                }
            } else if sets.boundary.contains(&p) {
                1.0 / (sets.boundary.len() * counts[p]) as f64
            } else if sets.interior.contains(&p) {
                -1.0 / (sets.interior.len() * counts[p]) as f64
            } else {
                0.0
            }
        };
        let mut grad_a = vec![0.0; len * D];
        for t in 2..len {
            let v: [f64; D] = std::array::from_fn(|d| {
                window[t * D + d] - 2.0 * window[(t - 1) * D + d] + window[(t - 2) * D + d]
            });
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let w = weight(t % stride);
            for d in 0..D {
                let g = w * v[d] / norm;
                grad_a[t * D + d] += g;
                grad_a[(t - 1) * D + d] -= 2.0 * g;
                grad_a[(t - 2) * D + d] += g;
            }
        }

        // Chain through clip, the output nonlinearity and ε M.
        let h = self.horizon;
        let eps = self.config.deviation_scale;
        let m = self.coupling_matrix(next);
        let pre = self.pre_activation(next, z1);
        let mut grad_z = vec![0.0; h * D];
        for i in 0..stride {
            for d in 0..D {
                let k = i * D + d;
                if raw[k].abs() > env.action_clip {
                    continue;
                }
                let slope = match self.config.saturation {
                    None => eps,
                    Some(s) => eps * (1.0 - (pre[k] / s).tanh().powi(2)),
                };
                let g = grad_a[(stride + i) * D + d] * slope;
                for j in 0..h {
                    grad_z[j * D + d] += g * m[i * h + j];
                }
            }
        }
        Ok(grad_z)
    }
}

/// Scalar read off a first-boundary probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMetric {
    BoundaryJerk,
    Contrast,
}

/// Probe outcome helper: `(BTJ, contrast)`.
pub fn probe_values(summary: &Summary) -> (f64, f64) {
    (
        summary.boundary_transition_jerk.unwrap_or(f64::NAN),
        summary.jerk_contrast,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(cfg: PolicyConfig) -> (ChunkPolicy, ContextSnapshot, EnvConfig) {
        let env = EnvConfig::headroom();
        let policy = ChunkPolicy::new(cfg, 10, &env).unwrap();
        let ctx = ContextSnapshot::new(env.initial_state(), 0, 0);
        (policy, ctx, env)
    }

    #[test]
    fn zero_deviation_returns_expert_plan() {
        let (p, ctx, _) = setup(PolicyConfig {
            deviation_scale: 0.0,
            ..Default::default()
        });
        let z = NoiseVector::sample(&mut stream(3, &[]), 20, NoiseId(1));
        let chunk = p.generate_chunk(&ctx, &z, 0).unwrap();
        assert_eq!(
            chunk.actions.as_slice(),
            p.expert_plan(&ctx.state).as_slice()
        );
    }

    #[test]
    fn collinear_expert_is_saturated_and_exact() {
        let (p, ctx, _) = setup(PolicyConfig::default());
        let plan = p.expert_plan(&ctx.state);
        for row in plan.chunks(2) {
            assert_eq!(row, &[0.2, 0.0]);
        }
    }

    #[test]
    fn one_step_matches_many() {
        let (p1, ctx, _) = setup(PolicyConfig {
            flow_steps: 1,
            ..Default::default()
        });
        let (p100, _, _) = setup(PolicyConfig {
            flow_steps: 100,
            ..Default::default()
        });
        let z = NoiseVector::sample(&mut stream(4, &[]), 20, NoiseId(1));
        let a = p1.generate_actions(&ctx.state, &z.values()).unwrap();
        let b = p100.generate_actions(&ctx.state, &z.values()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn steering_composes_exactly() {
        let z = NoiseVector::sample(&mut stream(5, &[]), 20, NoiseId(2));
        let d = SteeringDirection::new(
            crate::rng::unit_vector(&mut stream(6, &[]), 20),
            DirectionId(1),
        )
        .unwrap();
        let twice = steer(&steer(&z, &d, 0.25).unwrap(), &d, 0.5).unwrap();
        let once = steer(&z, &d, 0.75).unwrap();
        assert_eq!(twice.values(), once.values());
        let back = steer(&steer(&z, &d, 1.0).unwrap(), &d, -1.0).unwrap();
        assert_eq!(back.values(), z.values());
        assert_eq!(steer(&z, &d, 0.0).unwrap().values(), z.values());
    }

    #[test]
    fn wrong_latent_length_is_rejected() {
        let (p, ctx, _) = setup(PolicyConfig::default());
        assert!(p.generate_chunk(&ctx, &NoiseVector::zeros(19), 0).is_err());
    }

    #[test]
    fn probe_boundary_sits_at_stride() {
        let (p, ctx, env) = setup(PolicyConfig::default());
        let z0 = NoiseVector::sample(&mut stream(8, &[]), 20, NoiseId(1));
        let z1 = NoiseVector::sample(&mut stream(9, &[]), 20, NoiseId(2));
        let s = p.first_boundary_probe(&ctx, &z0, &z1, 5, &env).unwrap();
        assert_eq!(s.phase_profile.counts_by_phase[0], 1);
        assert!(s.boundary_transition_jerk.unwrap() > 0.0);
    }
}
