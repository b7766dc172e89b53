//! Direction-sweep correlations across seeds.
//!
//! Usage: `cargo run --release -p chunkscope-core --example directions -- [preset]`

use chunkscope::env::EnvPreset;
use chunkscope::experiments::{run_direction_experiment, DirectionConfig, DirectionKind};
use chunkscope::policy::PolicyConfig;
use chunkscope::rollout::{ChunkingConfig, Testbed};

fn main() -> chunkscope::Result<()> {
    let preset: EnvPreset = std::env::args()
        .nth(1)
        .as_deref()
        .unwrap_or("headroom")
        .parse()?;
    let bed = Testbed::new(
        preset.config(),
        PolicyConfig::default(),
        ChunkingConfig::default(),
    )?;
    for kind in [
        DirectionKind::Gradient,
        DirectionKind::Search,
        DirectionKind::Orthogonal,
    ] {
        for seed in 0..10 {
            let cfg = DirectionConfig {
                kind,
                ..Default::default()
            };
            let r = run_direction_experiment(&bed, &cfg, seed)?;
            let min_r = r
                .sweeps
                .iter()
                .filter_map(|s| s.r_contrast)
                .map(f64::abs)
                .fold(f64::INFINITY, f64::min);
            println!(
                "{:<10} seed {seed}: |r| btj {:.4} contrast {:.4} (min {min_r:.4}) range mean {:.3e} max {:.3e} degenerate {}",
                kind.label(),
                r.mean_abs_r_btj.unwrap_or(f64::NAN),
                r.mean_abs_r_contrast.unwrap_or(f64::NAN),
                r.mean_artifact_range.unwrap_or(f64::NAN),
                r.max_artifact_range.unwrap_or(f64::NAN),
                r.degenerate
            );
        }
    }
    Ok(())
}
