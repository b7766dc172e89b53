//! Run configuration: one TOML file, then `key=value` overrides.
//!
//! Every field has a default, so an empty file is a valid config. Unknown
//! keys are rejected by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use chunkscope::env::{EnvConfig, EnvPreset, Vec2};
use chunkscope::experiments::{
    DirectionConfig, DirectionKind, OutcomeConfig, ScanConfig, SteeringConfig,
};
use chunkscope::io::{Decision, ReportFormat};
use chunkscope::metrics::Control;
use chunkscope::policy::PolicyConfig;
use chunkscope::rollout::{ChunkingConfig, Testbed};
use chunkscope::stats::Sidedness;

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CHUNKSCOPE_OUT";
pub const DEFAULT_OUT: &str = "chunkscope-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for every random stream.
    pub seed: u64,
    /// Not echoed into outputs: it does not affect results.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 means one per core. Not echoed into outputs.
    #[serde(skip_serializing)]
    pub workers: usize,
    pub format: ReportFormat,
    pub env: EnvSection,
    pub policy: PolicyConfig,
    pub chunking: ChunkingConfig,
    pub rollout: RolloutSection,
    pub analyze: AnalyzeSection,
    pub scan: ScanConfig,
    pub decompose: DecomposeSection,
    pub direction: DirectionConfig,
    pub steer: SteeringConfig,
    pub aggregate: AggregateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            workers: 0,
            format: ReportFormat::Structured,
            env: EnvSection::default(),
            policy: PolicyConfig::default(),
            chunking: ChunkingConfig::default(),
            rollout: RolloutSection::default(),
            analyze: AnalyzeSection::default(),
            scan: ScanConfig::default(),
            decompose: DecomposeSection::default(),
            direction: DirectionConfig::default(),
            steer: SteeringConfig::default(),
            aggregate: AggregateSection::default(),
        }
    }
}

/// A named preset with optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub preset: EnvPreset,
    pub start: Option<Vec2>,
    pub object: Option<Vec2>,
    pub goal: Option<Vec2>,
    pub object_jitter: Option<f64>,
    pub goal_jitter: Option<f64>,
    pub pickup_radius: Option<f64>,
    pub goal_radius: Option<f64>,
    pub max_steps: Option<usize>,
    pub slip_threshold: Option<f64>,
    pub slip_sharpness: Option<f64>,
    pub action_clip: Option<f64>,
    pub dt: Option<f64>,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            preset: EnvPreset::Headroom,
            start: None,
            object: None,
            goal: None,
            object_jitter: None,
            goal_jitter: None,
            pickup_radius: None,
            goal_radius: None,
            max_steps: None,
            slip_threshold: None,
            slip_sharpness: None,
            action_clip: None,
            dt: None,
        }
    }
}

impl EnvSection {
    pub fn resolve(&self) -> EnvConfig {
        let mut c = self.preset.config();
        macro_rules! apply {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { c.$f = v; })*};
        }
        apply!(
            start,
            object,
            goal,
            object_jitter,
            goal_jitter,
            pickup_radius,
            goal_radius,
            max_steps,
            slip_threshold,
            slip_sharpness,
            action_clip,
            dt
        );
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutSection {
    pub n_episodes: usize,
}

impl Default for RolloutSection {
    fn default() -> Self {
        Self { n_episodes: 70 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlName {
    All,
    ContactFree,
    ContactFreeFirstN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    pub controls: Vec<ControlName>,
    /// `N` of the first-N contact-free window.
    pub first_n: usize,
    /// Steps excluded on each side of a contact transition.
    pub guard: usize,
    pub n_permutations: u64,
    pub sidedness: Sidedness,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            controls: vec![
                ControlName::All,
                ControlName::ContactFree,
                ControlName::ContactFreeFirstN,
            ],
            first_n: 15,
            guard: chunkscope::metrics::DEFAULT_GUARD_MARGIN,
            n_permutations: chunkscope::experiments::outcome::DEFAULT_PERMUTATIONS,
            sidedness: Sidedness::Greater,
        }
    }
}

impl AnalyzeSection {
    pub fn outcome_config(&self) -> OutcomeConfig {
        let controls = self
            .controls
            .iter()
            .map(|c| match c {
                ControlName::All => Control::All,
                ControlName::ContactFree => Control::ContactFree { guard: self.guard },
                ControlName::ContactFreeFirstN => Control::ContactFreeFirstN {
                    n: self.first_n,
                    guard: self.guard,
                },
            })
            .collect();
        OutcomeConfig {
            controls,
            n_permutations: self.n_permutations,
            sidedness: self.sidedness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeSection {
    pub n_contexts: usize,
    pub n_samples: usize,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        Self {
            n_contexts: 2,
            n_samples: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregateSection {
    pub n_boot: usize,
    pub level: f64,
}

impl Default for AggregateSection {
    fn default() -> Self {
        Self {
            n_boot: 10_000,
            level: 0.95,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parse the right-hand side of `key=value` as a TOML value, falling back to
/// a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| raw.into()),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Set a dotted key in a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override key `{key}` is malformed")));
    }
    let (last, parents) = path.split_last().expect("split yields one part");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override key `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Load an optional file and apply overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.aggregate.level > 0.0 && self.aggregate.level < 1.0) {
            return Err(config_err("aggregate.level must lie in (0, 1)"));
        }
        if self.analyze.controls.is_empty() {
            return Err(config_err("analyze.controls must not be empty"));
        }
        self.testbed().map(|_| ())
    }

    pub fn testbed(&self) -> Result<Testbed, CliError> {
        Testbed::new(self.env.resolve(), self.policy.clone(), self.chunking)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Effective config as echoed into outputs.
    pub fn echo(&self) -> Result<serde_json::Value, CliError> {
        let mut v = serde_json::to_value(self).map_err(|e| CliError::Runner(e.into()))?;
        v["env"]["resolved"] =
            serde_json::to_value(self.env.resolve()).map_err(|e| CliError::Runner(e.into()))?;
        Ok(v)
    }

    /// Effective value of every interpretation switch.
    pub fn decisions(&self) -> Vec<Decision> {
        let steer = &self.steer;
        let reuse = if steer.research_each_boundary {
            "re-searched at every steered boundary".to_string()
        } else {
            format!(
                "searched once per episode at boundary {} and reused",
                steer.warmup_boundaries
            )
        };
        let direction_kind = match self.direction.kind {
            DirectionKind::Search => "best of random candidates by artifact difference",
            DirectionKind::Gradient => "normalized analytic probe gradient",
            DirectionKind::Orthogonal => "random direction orthogonal to the coupling",
        };
        vec![
            Decision::new("scan.condition", self.scan.condition.label()),
            Decision::new(
                "search.epsilon",
                "probe offset: candidates scored at z1 +/- epsilon*d; sweeps apply z1 + alpha*d",
            ),
            Decision::new("direction.kind", direction_kind),
            Decision::new("steer.direction_reuse", reuse),
            Decision::new("steer.warmup_boundaries", steer.warmup_boundaries),
            Decision::new("steer.alpha_magnitude", steer.alpha),
            Decision::new("steer.steered_noise", "upcoming chunk (z1) only"),
            Decision::new(
                "steer.degenerate_search",
                "episode continues unsteered and is counted as a fallback",
            ),
            Decision::new(
                "context.selection",
                format!("{:?}", self.scan.selection).to_lowercase(),
            ),
            Decision::new("analyze.sidedness", self.analyze.sidedness),
            Decision::new(
                "analyze.p_value",
                "exhaustive when C(n, k) <= limit, else (1 + #{T* as extreme}) / (n_perm + 1)",
            ),
            Decision::new("analyze.contact_guard", self.analyze.guard),
            Decision::new("analyze.contact", "contact = carrying the object"),
            Decision::new(
                "policy.saturation",
                match self.policy.saturation {
                    Some(s) => format!("tanh with scale {s:?}"),
                    None => "affine".to_string(),
                },
            ),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_gives_defaults() {
        let c = RunConfig::from_table(toml::Table::new()).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.rollout.n_episodes, 70);
        assert_eq!(c.direction.alpha_grid.len(), 7);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "rollout.n_episdoes=3").unwrap();
        let err = RunConfig::from_table(t).unwrap_err();
        assert!(err.to_string().contains("n_episdoes"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_parse_typed_values() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "steer.arms=[\"good\",\"bad\"]").unwrap();
        apply_override(&mut t, "env.preset=ceiling").unwrap();
        apply_override(&mut t, "steer.alpha=1.5").unwrap();
        let c = RunConfig::from_table(t).unwrap();
        assert_eq!(c.steer.arms.len(), 2);
        assert_eq!(c.env.preset, EnvPreset::Ceiling);
        assert_eq!(c.steer.alpha, 1.5);
    }

    #[test]
    fn env_overrides_apply_over_preset() {
        let s = EnvSection {
            slip_threshold: Some(0.9),
            ..Default::default()
        };
        assert_eq!(s.resolve().slip_threshold, 0.9);
        assert_eq!(s.resolve().max_steps, EnvConfig::headroom().max_steps);
    }

    #[test]
    fn echo_omits_execution_settings() {
        let c = RunConfig {
            workers: 3,
            output_dir: Some("x".into()),
            ..RunConfig::default()
        };
        let v = c.echo().unwrap();
        assert!(v.get("workers").is_none());
        assert!(v.get("output_dir").is_none());
        assert!(v["env"]["resolved"]["slip_threshold"].is_number());
    }
}
