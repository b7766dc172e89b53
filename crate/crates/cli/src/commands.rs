//! One function per subcommand. Each returns the paths it wrote, in order.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use chunkscope::experiments::{
    aggregate_reports, analyze_outcomes, rollout_many, run_decomposition, run_direction_experiment,
    run_noise_scan, run_trajectory_steering, SteeringReport,
};
use chunkscope::io::report::Envelope;
use chunkscope::io::{
    config_hash, read_trace, render_report, write_trace, Decision, DecompositionTable, Report,
    ReportFormat, ReportMeta, Table,
};
use chunkscope::rollout::SteeringPlan;
use chunkscope::trace::Termination;
use chunkscope::Trace;

use crate::config::RunConfig;
use crate::error::CliError;

pub const TRACE_EXT: &str = "trace";

fn core(e: chunkscope::Error) -> CliError {
    CliError::from_core(e)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Structured => "json",
        ReportFormat::Tabular => "csv",
    }
}

/// Hash of everything that determines a rollout.
pub fn generation_hash(cfg: &RunConfig) -> Result<String, CliError> {
    let v = serde_json::json!({
        "seed": cfg.seed,
        "env": cfg.env.resolve(),
        "policy": cfg.policy,
        "chunking": cfg.chunking,
    });
    config_hash(&v).map_err(core)
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    meta: ReportMeta,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        let dir = cfg.output_dir();
        ensure_dir(&dir)?;
        Ok(Self {
            cfg,
            dir,
            meta: ReportMeta {
                config: cfg.echo()?,
                decisions: cfg.decisions(),
            },
            written: Vec::new(),
        })
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.meta.decisions.push(Decision::new(key, value));
    }

    fn report<R: Report>(&mut self, name: &str, report: &R) -> Result<(), CliError> {
        let path = self
            .dir
            .join(format!("{name}.{}", extension(self.cfg.format)));
        let text = render_report(report, &self.meta, self.cfg.format).map_err(core)?;
        std::fs::write(&path, text).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub episode_id: u64,
    pub success: bool,
    pub termination: Termination,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub n_episodes: usize,
    pub n_success: usize,
    pub episodes: Vec<ManifestEntry>,
}

impl Report for Manifest {
    const KIND: &'static str = "rollout_manifest";
    fn table(&self) -> Table {
        let mut t = Table::new(&["file", "episode_id", "success", "termination", "steps"]);
        for e in &self.episodes {
            t.push(vec![
                e.file.clone(),
                e.episode_id.to_string(),
                e.success.to_string(),
                serde_json::to_value(e.termination)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                e.steps.to_string(),
            ]);
        }
        t
    }
}

pub fn rollout(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let bed = cfg.testbed()?;
    let n = cfg.rollout.n_episodes;
    if n == 0 {
        return Err(CliError::Config("rollout.n_episodes must be >= 1".into()));
    }
    let hash = generation_hash(cfg)?;
    let mut w = Writer::new(cfg)?;
    let trace_dir = w.dir.join("traces");
    ensure_dir(&trace_dir)?;
    info!(
        "rolling out {n} episodes ({} preset)",
        cfg.env.preset.name()
    );
    let episodes = rollout_many(&bed, cfg.seed, n, &SteeringPlan::None).map_err(core)?;
    let mut entries = Vec::with_capacity(n);
    for e in &episodes {
        let file = format!("episode_{:05}.{TRACE_EXT}", e.trace.episode_id);
        let path = trace_dir.join(&file);
        write_trace(&e.trace, Some(&hash), &path).map_err(|err| match err {
            chunkscope::Error::Io(source) => CliError::Output {
                path: path.clone(),
                source,
            },
            other => core(other),
        })?;
        w.written.push(path);
        entries.push(ManifestEntry {
            file: format!("traces/{file}"),
            episode_id: e.trace.episode_id,
            success: e.trace.success,
            termination: e.trace.termination,
            steps: e.trace.len(),
        });
    }
    let manifest = Manifest {
        config_hash: hash,
        n_episodes: n,
        n_success: entries.iter().filter(|e| e.success).count(),
        episodes: entries,
    };
    info!("{} of {n} episodes succeeded", manifest.n_success);
    w.report("manifest", &manifest)?;
    Ok(w.written)
}

/// Trace files named directly, plus every `*.trace` inside named directories,
/// sorted by path.
pub fn collect_traces(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::Runner(e.into()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == TRACE_EXT))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Config("no trace files given".into()));
    }
    Ok(files)
}

pub fn analyze(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let inputs = if inputs.is_empty() {
        vec![cfg.output_dir().join("traces")]
    } else {
        inputs.to_vec()
    };
    let files = collect_traces(&inputs)?;
    let expected = generation_hash(cfg)?;
    let mut traces: Vec<Trace> = Vec::with_capacity(files.len());
    let mut mismatched = 0;
    for f in &files {
        let doc = read_trace(f).map_err(|e| match e {
            chunkscope::Error::Parse { line, message } => {
                CliError::Runner(chunkscope::Error::Parse {
                    line,
                    message: format!("{}: {message}", f.display()),
                })
            }
            other => core(other),
        })?;
        if doc.check_config_hash(&expected).is_some() {
            mismatched += 1;
        }
        traces.push(doc.trace);
    }
    traces.sort_by_key(|t| t.episode_id);
    info!("analyzing {} traces", traces.len());
    let report =
        analyze_outcomes(&traces, &cfg.analyze.outcome_config(), cfg.seed).map_err(core)?;
    for flag in &report.flags {
        warn!("{flag}");
    }
    let mut w = Writer::new(cfg)?;
    if mismatched > 0 {
        warn!("{mismatched} traces were written under a different config");
        w.note(
            "warning.config_hash",
            format!(
                "{mismatched} of {} traces do not match the current config",
                traces.len()
            ),
        );
    }
    w.report("outcome", &report)?;
    if let Some(p) = &report.profiles {
        w.report("profiles", p)?;
    }
    Ok(w.written)
}

pub fn scan(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let bed = cfg.testbed()?;
    info!(
        "noise scan: {} contexts x {} samples, {}",
        cfg.scan.n_contexts,
        cfg.scan.n_samples,
        cfg.scan.condition.label()
    );
    let result = run_noise_scan(&bed, &cfg.scan, cfg.seed).map_err(core)?;
    let mut w = Writer::new(cfg)?;
    w.report("scan", &result)?;
    Ok(w.written)
}

pub fn decompose(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let bed = cfg.testbed()?;
    let d = &cfg.decompose;
    info!(
        "decomposition: {} contexts x {} samples",
        d.n_contexts, d.n_samples
    );
    let rows = run_decomposition(&bed, d.n_contexts, d.n_samples, cfg.seed).map_err(core)?;
    let mut w = Writer::new(cfg)?;
    w.report("decomposition", &DecompositionTable(rows))?;
    Ok(w.written)
}

pub fn direction(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let bed = cfg.testbed()?;
    info!(
        "direction sweep: {} contexts, {} directions",
        cfg.direction.n_contexts,
        cfg.direction.kind.label()
    );
    let report = run_direction_experiment(&bed, &cfg.direction, cfg.seed).map_err(core)?;
    let mut w = Writer::new(cfg)?;
    w.report("direction", &report)?;
    Ok(w.written)
}

pub fn steer(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let bed = cfg.testbed()?;
    let arms: Vec<&str> = cfg.steer.arms.iter().map(|a| a.label()).collect();
    info!(
        "trajectory steering: arms {}, {} episodes each, |alpha| = {}",
        arms.join(","),
        cfg.steer.n_episodes_per_arm,
        cfg.steer.alpha
    );
    let report = run_trajectory_steering(&bed, &cfg.steer, cfg.seed).map_err(core)?;
    for (arm, n) in arms.iter().zip(&report.fallbacks) {
        if *n > 0 {
            warn!("arm {arm}: {n} episodes fell back to baseline");
        }
    }
    let mut w = Writer::new(cfg)?;
    w.report("steering", &report)?;
    Ok(w.written)
}

pub fn aggregate(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config(
            "aggregate needs steering report files".into(),
        ));
    }
    let mut runs = Vec::with_capacity(inputs.len());
    for p in inputs {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Runner(e.into()))?;
        let env: Envelope<SteeringReport> = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!(
                "{} is not a structured steering report: {e}",
                p.display()
            ))
        })?;
        if env.kind != SteeringReport::KIND {
            return Err(CliError::Config(format!(
                "{} has kind `{}`, expected `{}`",
                p.display(),
                env.kind,
                SteeringReport::KIND
            )));
        }
        runs.push(env.payload.arms);
    }
    info!("aggregating {} runs", runs.len());
    let report = aggregate_reports(&runs, cfg.aggregate.n_boot, cfg.aggregate.level, cfg.seed)
        .map_err(core)?;
    if let Some(note) = &report.note {
        warn!("{note}");
    }
    let mut w = Writer::new(cfg)?;
    let names: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    w.note("aggregate.inputs", names.join(";"));
    w.report("aggregate", &report)?;
    Ok(w.written)
}
