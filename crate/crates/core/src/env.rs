//! Deterministic 2D point-mass grasp-and-transport testbed.
//!
//! The agent commands planar velocities. It grasps the object automatically
//! once within the pickup radius and must carry it into the goal radius.
//! While carrying, every step drops the object with probability
//! `σ(κ·(j_t − θ_slip))`, where `j_t` is the jerk of the last three
//! commanded actions; this is the only failure channel besides the step
//! limit, so artifact magnitude causally drives failure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::Episode;
use crate::trace::ContextId;

pub type Vec2 = [f64; 2];

/// Action dimension of the testbed.
pub const ACTION_DIM: usize = 2;

fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub agent: Vec2,
    pub velocity: Vec2,
    pub object: Vec2,
    pub goal: Vec2,
    pub carrying: bool,
    pub dropped: bool,
    pub step: usize,
    /// Up to two previously commanded actions, most recent first.
    pub history: Vec<Vec2>,
}

impl EnvState {
    pub fn at_rest(agent: Vec2, object: Vec2, goal: Vec2) -> Self {
        Self {
            agent,
            velocity: [0.0; 2],
            object,
            goal,
            carrying: false,
            dropped: false,
            step: 0,
            history: Vec::new(),
        }
    }

    pub fn status(&self, config: &EnvConfig) -> Status {
        if self.dropped {
            Status::Dropped
        } else if self.carrying && dist(self.object, self.goal) <= config.goal_radius {
            Status::Success
        } else if self.step >= config.max_steps {
            Status::Timeout
        } else {
            Status::Running
        }
    }

    fn is_finite(&self) -> bool {
        self.agent
            .iter()
            .chain(&self.velocity)
            .chain(&self.object)
            .chain(&self.goal)
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Success,
    Dropped,
    Timeout,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Success => "success",
            Status::Dropped => "dropped",
            Status::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub start: Vec2,
    /// Nominal object position; scenes jitter its x coordinate.
    pub object: Vec2,
    /// Nominal goal position; scenes jitter its x coordinate.
    pub goal: Vec2,
    pub object_jitter: f64,
    pub goal_jitter: f64,
    pub pickup_radius: f64,
    pub goal_radius: f64,
    pub max_steps: usize,
    /// Jerk at which the per-step drop probability is one half.
    pub slip_threshold: f64,
    /// Logistic slope of the drop probability.
    pub slip_sharpness: f64,
    /// Per-component bound on commanded actions.
    pub action_clip: f64,
    pub dt: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::headroom()
    }
}

/// Named scene presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvPreset {
    /// Baseline success well below one, leaving room for steering to help.
    Headroom,
    /// Baseline success saturated near one.
    Ceiling,
}

impl EnvPreset {
    pub fn config(self) -> EnvConfig {
        match self {
            EnvPreset::Headroom => EnvConfig::headroom(),
            EnvPreset::Ceiling => EnvConfig::ceiling(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvPreset::Headroom => "headroom",
            EnvPreset::Ceiling => "ceiling",
        }
    }
}

impl std::str::FromStr for EnvPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "headroom" => Ok(EnvPreset::Headroom),
            "ceiling" => Ok(EnvPreset::Ceiling),
            other => Err(Error::invalid(format!("unknown env preset `{other}`"))),
        }
    }
}

impl EnvConfig {
    fn base() -> Self {
        Self {
            start: [0.0, 0.0],
            object: [0.4, 0.0],
            goal: [1.0, 0.0],
            object_jitter: 0.08,
            goal_jitter: 0.15,
            pickup_radius: 0.08,
            goal_radius: 0.08,
            max_steps: 150,
            slip_threshold: 0.37,
            slip_sharpness: 300.0,
            action_clip: 1.0,
            dt: 0.1,
        }
    }

    /// Baseline success near 0.7 under the default policy.
    pub fn headroom() -> Self {
        Self::base()
    }

    /// Baseline success near 0.98 under the default policy.
    pub fn ceiling() -> Self {
        Self {
            slip_threshold: 0.6,
            ..Self::base()
        }
    }

    /// Same config with the nominal scene and no jitter.
    pub fn canonical(&self) -> Self {
        Self {
            object_jitter: 0.0,
            goal_jitter: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pickup_radius", self.pickup_radius),
            ("goal_radius", self.goal_radius),
            ("slip_threshold", self.slip_threshold),
            ("action_clip", self.action_clip),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "env.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.slip_sharpness >= 0.0) || self.object_jitter < 0.0 || self.goal_jitter < 0.0 {
            return Err(Error::invalid(
                "env sharpness and jitters must be nonnegative",
            ));
        }
        Ok(())
    }

    /// Check the step limit against the replanning stride.
    pub fn validate_for_stride(&self, stride: usize) -> Result<()> {
        self.validate()?;
        if self.max_steps < 4 * stride {
            return Err(Error::invalid(format!(
                "env.max_steps = {} must be at least 4K = {}",
                self.max_steps,
                4 * stride
            )));
        }
        Ok(())
    }

    /// Draw an initial state. Jitter moves the object and goal along the x
    /// axis only, so every scene is collinear with the start.
    pub fn sample_scene<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let ox = self.object[0] + self.object_jitter * (2.0 * rng.random::<f64>() - 1.0);
        let gx = self.goal[0] + self.goal_jitter * (2.0 * rng.random::<f64>() - 1.0);
        EnvState::at_rest(self.start, [ox, self.object[1]], [gx, self.goal[1]])
    }

    pub fn initial_state(&self) -> EnvState {
        EnvState::at_rest(self.start, self.object, self.goal)
    }
}

/// Per-step drop probability of a carried object.
pub fn slip_probability(jerk: f64, config: &EnvConfig) -> f64 {
    1.0 / (1.0 + (-config.slip_sharpness * (jerk - config.slip_threshold)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Carrying during this step (the testbed's operationalization of
    /// object contact).
    pub contact: bool,
    pub executed: Vec2,
    pub jerk: Option<f64>,
    pub drop_probability: f64,
}

/// Deterministic part of a step: clip, integrate, grasp.
pub fn step_kinematics(
    state: &mut EnvState,
    action: &[f64],
    config: &EnvConfig,
) -> Result<StepInfo> {
    if action.len() != ACTION_DIM {
        return Err(Error::DimensionMismatch {
            expected: ACTION_DIM,
            got: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("action".into()));
    }
    let c = config.action_clip;
    let a = [action[0].clamp(-c, c), action[1].clamp(-c, c)];
    state.velocity = a;
    state.agent = [
        state.agent[0] + config.dt * a[0],
        state.agent[1] + config.dt * a[1],
    ];
    if state.carrying {
        state.object = state.agent;
    } else if !state.dropped && dist(state.agent, state.object) <= config.pickup_radius {
        state.carrying = true;
        state.object = state.agent;
    }
    let jerk = (state.history.len() == 2).then(|| {
        let (p1, p2) = (state.history[0], state.history[1]);
        let d = [a[0] - 2.0 * p1[0] + p2[0], a[1] - 2.0 * p1[1] + p2[1]];
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    });
    let drop_probability = match (state.carrying, jerk) {
        (true, Some(j)) => slip_probability(j, config),
        _ => 0.0,
    };
    state.history.insert(0, a);
    state.history.truncate(2);
    state.step += 1;
    Ok(StepInfo {
        contact: state.carrying,
        executed: a,
        jerk,
        drop_probability,
    })
}

/// One environment step. Exactly one uniform is drawn from `rng` per step,
/// carrying or not, so runs that share a stream stay aligned step by step.
pub fn env_step<R: Rng + ?Sized>(
    state: &EnvState,
    action: &[f64],
    config: &EnvConfig,
    rng: &mut R,
) -> Result<(EnvState, StepInfo)> {
    let mut next = state.clone();
    let info = step_kinematics(&mut next, action, config)?;
    let u: f64 = rng.random();
    if info.contact && u < info.drop_probability {
        next.carrying = false;
        next.dropped = true;
    }
    debug_assert!(next.is_finite());
    Ok((next, info))
}

/// Frozen environment state from which chunks can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub state: EnvState,
    pub context_id: ContextId,
    pub episode_id: u64,
    pub t: usize,
}

impl ContextSnapshot {
    pub fn new(state: EnvState, episode_id: u64, t: usize) -> Self {
        let context_id = ContextId((episode_id << 24) | t as u64);
        Self {
            state,
            context_id,
            episode_id,
            t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Equal shares from the early, middle and late thirds of each episode's
    /// boundaries, evenly spaced within each share.
    Stratified,
    /// Evenly spaced over the pooled boundary list.
    Even,
}

fn evenly_spaced<T: Clone>(items: &[T], k: usize) -> Vec<T> {
    (0..k)
        .map(|j| items[((2 * j + 1) * items.len()) / (2 * k)].clone())
        .collect()
}

/// Pick `n` boundary contexts from rollouts. A boundary is eligible when its
/// chunk ran a full stride and the episode went on to the next chunk, so
/// the recorded noises of both chunks exist.
pub fn snapshot_contexts(
    episodes: &[Episode],
    n: usize,
    rule: SelectionRule,
) -> Result<Vec<ContextSnapshot>> {
    if episodes.is_empty() {
        return Err(Error::EmptyInput(
            "no episodes to draw contexts from".into(),
        ));
    }
    let mut strata: [Vec<ContextSnapshot>; 3] = Default::default();
    for ep in episodes {
        let stride = ep.trace.stride;
        let eligible: Vec<&ContextSnapshot> = ep
            .contexts
            .iter()
            .filter(|c| c.t + stride < ep.trace.len())
            .collect();
        let m = eligible.len();
        for (i, c) in eligible.into_iter().enumerate() {
            strata[(3 * i) / m].push(c.clone());
        }
    }
    let available: usize = strata.iter().map(Vec::len).sum();
    if available < n {
        return Err(Error::NotEnoughContexts {
            requested: n,
            available,
        });
    }
    match rule {
        SelectionRule::Even => {
            let pooled: Vec<ContextSnapshot> = strata.concat();
            let mut all = pooled;
            all.sort_by_key(|c| (c.episode_id, c.t));
            Ok(evenly_spaced(&all, n))
        }
        SelectionRule::Stratified => {
            let mut alloc = [0usize; 3];
            for (s, a) in alloc.iter_mut().enumerate() {
                *a = (n / 3 + usize::from(s < n % 3)).min(strata[s].len());
            }
            let mut missing = n - alloc.iter().sum::<usize>();
            for s in 0..3 {
                let extra = missing.min(strata[s].len() - alloc[s]);
                alloc[s] += extra;
                missing -= extra;
            }
            Ok((0..3)
                .flat_map(|s| evenly_spaced(&strata[s], alloc[s]))
                .collect())
        }
    }
}
