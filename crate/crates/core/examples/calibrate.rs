//! Monte Carlo sweep used to pick the testbed presets.
//!
//! Usage: `cargo run --release -p chunkscope-core --example calibrate -- <preset> [theta] [kappa] [eps] [alpha] [bias] [gain_spread]`

use chunkscope::env::EnvPreset;
use chunkscope::experiments::{
    run_outcome_association, run_trajectory_steering, OutcomeConfig, SteeringConfig,
};
use chunkscope::policy::PolicyConfig;
use chunkscope::rollout::{ChunkingConfig, Testbed};

fn main() -> chunkscope::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let preset: EnvPreset = args
        .first()
        .map(String::as_str)
        .unwrap_or("headroom")
        .parse()?;
    let arg = |i: usize| args.get(i).and_then(|s| s.parse::<f64>().ok());
    let mut env = preset.config();
    if let Some(t) = arg(1) {
        env.slip_threshold = t;
    }
    if let Some(k) = arg(2) {
        env.slip_sharpness = k;
    }
    let mut policy = PolicyConfig::default();
    if let Some(e) = arg(3) {
        policy.deviation_scale = e;
    }
    if let Some(b) = arg(5) {
        policy.bias_scale = b;
    }
    if let Some(g) = arg(6) {
        policy.gain_spread = g;
    }
    let bed = Testbed::new(env, policy, ChunkingConfig::default())?;
    let cfg = OutcomeConfig {
        n_permutations: 2000,
        ..Default::default()
    };
    let (report, episodes) = run_outcome_association(&bed, 200, &cfg, 1)?;
    let mean_len =
        episodes.iter().map(|e| e.trace.len()).sum::<usize>() as f64 / episodes.len() as f64;
    println!(
        "success {}/{}  mean length {mean_len:.1}",
        report.n_success, report.n_valid
    );
    for c in &report.controls {
        println!(
            "  {:<24} succ {:?} fail {:?} delta {:?} p {:?} (n {} / {}, excl {})",
            c.label,
            c.success_mean,
            c.failure_mean,
            c.delta,
            c.p_value(),
            c.n_success,
            c.n_failure,
            c.excluded
        );
    }
    let steer_cfg = SteeringConfig {
        alpha: arg(4).unwrap_or(0.5),
        research_each_boundary: arg(7).is_some_and(|r| r > 0.0),
        warmup_boundaries: arg(8).map_or(2, |w| w as usize),
        n_boot: 200,
        ..Default::default()
    };
    let (mut n_contrast, mut n_success, mut n_ceiling) = (0, 0, 0);
    for seed in 0..10 {
        let r = run_trajectory_steering(&bed, &steer_cfg, 100 + seed)?;
        n_contrast += usize::from(r.ordering.contrast);
        n_success += usize::from(r.ordering.success);
        let rate = |i: usize| r.arms[i].success_rate.point;
        n_ceiling += usize::from(
            rate(0) >= 0.98 && rate(1) >= 0.98 && r.ordering.contrast && rate(2) < rate(0),
        );
        let line: Vec<String> = r
            .arms
            .iter()
            .map(|g| {
                format!(
                    "{} {:.2}/{:.4}",
                    g.arm,
                    g.success_rate.point,
                    g.mean_contrast().unwrap_or(f64::NAN)
                )
            })
            .collect();
        println!(
            "  steer seed {seed}: {}  order {:?} fallbacks {:?}",
            line.join("  "),
            r.ordering,
            r.fallbacks
        );
    }
    println!("orderings: contrast {n_contrast}/10 success {n_success}/10 ceiling {n_ceiling}/10");
    Ok(())
}
