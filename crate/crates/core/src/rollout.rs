//! Receding-horizon execution: generate a chunk, run `K` actions, replan.

use serde::{Deserialize, Serialize};

use crate::env::{env_step, ContextSnapshot, EnvConfig, Status, ACTION_DIM};
use crate::error::{Error, Result};
use crate::experiments::direction::{search_direction, SearchConfig};
use crate::policy::{steer, ChunkPolicy, NoiseVector, PolicyConfig, SteeringDirection};
use crate::rng::{derive, purpose, SeedRecord};
use crate::trace::{
    chunk_count, ActionMatrix, ChunkRecord, NoiseId, RolloutTrace, Source, Termination,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkingConfig {
    /// Replanning stride `K`.
    pub stride: usize,
    /// Chunk horizon `H`.
    pub horizon: usize,
    pub phase_offset: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            stride: 5,
            horizon: 10,
            phase_offset: 0,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.horizon {
            return Err(Error::invalid(format!(
                "chunking needs 1 <= K <= H, got K = {}, H = {}",
                self.stride, self.horizon
            )));
        }
        if self.phase_offset >= self.stride {
            return Err(Error::invalid("phase offset must be smaller than K"));
        }
        Ok(())
    }
}

/// Online search-then-steer schedule for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSteering {
    /// Signed α applied along the found direction.
    pub alpha: f64,
    /// Boundaries rolled out before the search.
    pub warmup: usize,
    pub search: SearchConfig,
    /// Search again at every later boundary instead of reusing one direction.
    pub research_each_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SteeringPlan {
    #[default]
    None,
    /// Steer every chunk from `from_boundary` on along a fixed direction.
    Fixed {
        direction: SteeringDirection,
        alpha: f64,
        from_boundary: usize,
    },
    Search(SearchSteering),
}

/// A rollout together with what is needed to revisit its boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub trace: RolloutTrace<f64>,
    /// Context at each generated chunk, in chunk order.
    pub contexts: Vec<ContextSnapshot>,
    /// Noise used for each generated chunk, after steering.
    pub noises: Vec<NoiseVector>,
    pub status: Status,
    /// Direction used for steering, if one was found.
    pub direction: Option<SteeringDirection>,
    /// Direction search was degenerate and the episode ran unsteered.
    pub fell_back: bool,
}

fn noise_id(episode: u64, boundary: usize) -> NoiseId {
    NoiseId((episode << 24) | boundary as u64)
}

/// Environment, frozen policy and chunking schedule of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Testbed {
    pub env: EnvConfig,
    pub policy: ChunkPolicy,
    pub chunking: ChunkingConfig,
}

impl Testbed {
    pub fn new(env: EnvConfig, policy: PolicyConfig, chunking: ChunkingConfig) -> Result<Self> {
        chunking.validate()?;
        env.validate_for_stride(chunking.stride)?;
        let policy = ChunkPolicy::new(policy, chunking.horizon, &env)?;
        Ok(Self {
            env,
            policy,
            chunking,
        })
    }

    pub fn rollout(&self, seed: SeedRecord, plan: &SteeringPlan) -> Result<Episode> {
        rollout(self, seed, plan)
    }

    /// Seed record of episode `i` under a master seed.
    pub fn episode_seed(&self, master: u64, i: u64) -> SeedRecord {
        SeedRecord::new(master, i).with_feature_seed(self.policy.config().feature_seed)
    }
}

/// Roll out one episode.
///
/// Scene, noise and environment randomness come from separate streams of
/// `seed`, so two plans run with the same seed see the same scene, the same
/// base noises and the same drop draws.
pub fn rollout(bed: &Testbed, seed: SeedRecord, plan: &SteeringPlan) -> Result<Episode> {
    let (policy, env, chunking) = (&bed.policy, &bed.env, bed.chunking);
    chunking.validate()?;
    if chunking.phase_offset != 0 {
        return Err(Error::invalid(
            "testbed rollouts start on a boundary (phase offset 0)",
        ));
    }
    if chunking.horizon != policy.horizon() {
        return Err(Error::DimensionMismatch {
            expected: policy.horizon(),
            got: chunking.horizon,
        });
    }
    env.validate_for_stride(chunking.stride)?;
    let seed = seed.with_feature_seed(policy.config().feature_seed);
    let k = chunking.stride;
    let latent = policy.latent_dim();

    let mut state = env.sample_scene(&mut seed.stream(purpose::SCENE));
    let mut noise_rng = seed.stream(purpose::NOISE);
    let mut env_rng = seed.stream(purpose::ENV);

    let mut executed = ActionMatrix::empty(ACTION_DIM);
    let mut contact = Vec::new();
    let mut contexts = Vec::new();
    let mut noises = Vec::new();
    let mut direction: Option<SteeringDirection> = match plan {
        SteeringPlan::Fixed { direction, .. } => Some(direction.clone()),
        _ => None,
    };
    let mut fell_back = false;
    let mut aborted = None;

    for b in 0.. {
        if state.status(env).is_terminal() {
            break;
        }
        let ctx = ContextSnapshot::new(state.clone(), seed.episode, executed.rows());
        let mut z = NoiseVector::sample(&mut noise_rng, latent, noise_id(seed.episode, b))
            .with_seed_record(seed);

        let alpha = match plan {
            SteeringPlan::None => None,
            SteeringPlan::Fixed {
                alpha,
                from_boundary,
                ..
            } => (b >= *from_boundary).then_some(*alpha),
            SteeringPlan::Search(s) => {
                let active = b > s.warmup;
                if b == s.warmup || (s.research_each_boundary && b > s.warmup) {
                    // The upcoming chunk's base noise, without consuming it.
                    let z1 = NoiseVector::sample(
                        &mut noise_rng.clone(),
                        latent,
                        noise_id(seed.episode, b + 1),
                    );
                    let cfg = SearchConfig {
                        seed: derive(seed.master, &[seed.episode, purpose::SEARCH, b as u64]),
                        ..s.search
                    };
                    let found = search_direction(bed, &ctx, &z, &z1, &cfg).and_then(|d| {
                        if d.degenerate {
                            Err(Error::SearchFailed("degenerate".into()))
                        } else {
                            Ok(d)
                        }
                    });
                    match found {
                        Ok(d) => direction = Some(d),
                        Err(_) if direction.is_none() => fell_back = true,
                        Err(_) => {}
                    }
                }
                (active && direction.is_some()).then_some(s.alpha)
            }
        };
        if let (Some(a), Some(d)) = (alpha, &direction) {
            z = steer(&z, d, a)?;
        }

        let chunk = match policy.generate_chunk(&ctx, &z, b) {
            Ok(c) => c,
            Err(e) => {
                aborted = Some(e);
                break;
            }
        };
        contexts.push(ctx);
        noises.push(z);
        for i in 0..k {
            let (next, info) = env_step(&state, chunk.actions.row(i), env, &mut env_rng)?;
            executed.push_row(&info.executed)?;
            contact.push(info.contact);
            state = next;
            if state.status(env).is_terminal() {
                break;
            }
        }
    }

    let status = state.status(env);
    let (termination, valid) = match (&aborted, status) {
        (Some(e), _) => {
            log::warn!("episode {} aborted: {e}", seed.episode);
            (Termination::Aborted, false)
        }
        (None, Status::Success) => (Termination::Goal, true),
        (None, Status::Dropped) => (Termination::Drop, true),
        (None, _) => (Termination::Timeout, true),
    };
    let n_chunks = chunk_count(executed.rows(), k, 0);
    let chunk_records = contexts
        .iter()
        .zip(&noises)
        .take(n_chunks)
        .enumerate()
        .map(|(i, (c, z))| ChunkRecord {
            chunk_index: i,
            context_id: Some(c.context_id),
            noise_id: Some(z.noise_id),
            steering: z.steering_tag(),
        })
        .collect();
    let trace = RolloutTrace {
        executed,
        stride: k,
        horizon: chunking.horizon,
        phase_offset: 0,
        chunk_records,
        contact_mask: Some(contact),
        success: status == Status::Success && aborted.is_none(),
        termination,
        episode_id: seed.episode,
        seed_record: Some(seed),
        source: Source::Testbed,
        valid,
    };
    if valid {
        trace.validate()?;
    }
    Ok(Episode {
        trace,
        contexts,
        noises,
        status,
        direction,
        fell_back,
    })
}
