//! Expected success under a grid of slip parameters, computed from drop-free
//! rollouts (the trajectory before a drop does not depend on the drop draws).
//!
//! Usage: `cargo run --release -p chunkscope-core --example hazard -- [eps] [bias] [gain_spread] [alpha] [episodes]`

use chunkscope::env::{slip_probability, EnvConfig};
use chunkscope::experiments::{SearchConfig, SteeringConfig};
use chunkscope::metrics::jerk_at;
use chunkscope::policy::PolicyConfig;
use chunkscope::rollout::{ChunkingConfig, SearchSteering, SteeringPlan, Testbed};

fn main() -> chunkscope::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|s| s.parse().ok())
        .collect();
    let arg = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let policy = PolicyConfig {
        deviation_scale: arg(0, 0.05),
        bias_scale: arg(1, 1.5),
        gain_spread: arg(2, 0.5),
        ..Default::default()
    };
    let alpha = arg(3, 0.5);
    let n = arg(4, 200.0) as u64;
    let env = EnvConfig {
        slip_threshold: 1e6,
        ..EnvConfig::headroom()
    };
    let bed = Testbed::new(env.clone(), policy, ChunkingConfig::default())?;
    let defaults = SteeringConfig::default();
    let plan = |sign: f64| {
        if sign == 0.0 {
            SteeringPlan::None
        } else {
            SteeringPlan::Search(SearchSteering {
                alpha: sign * alpha,
                warmup: defaults.warmup_boundaries,
                search: SearchConfig::default(),
                research_each_boundary: false,
            })
        }
    };
    let mut top = Vec::new();
    for i in 0..n {
        let ep = bed.rollout(bed.episode_seed(1, i), &SteeringPlan::None)?;
        let mask = ep.trace.contact_mask.clone().unwrap();
        let grasp = mask.iter().position(|&c| c).unwrap_or(0);
        for t in (0..ep.trace.len()).filter(|&t| mask[t]) {
            if let Some(j) = jerk_at(&ep.trace, t) {
                top.push((
                    j,
                    i,
                    t,
                    ep.trace.phase(t),
                    t as i64 - grasp as i64,
                    ep.trace.len(),
                ));
            }
        }
    }
    top.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (j, i, t, ph, since, len) in top.iter().take(12) {
        println!("jerk {j:.3} episode {i} t {t} phase {ph} since_grasp {since} len {len}");
    }
    let mut jerks: Vec<Vec<Vec<f64>>> = Vec::new();
    for sign in [0.0, -1.0, 1.0] {
        let p = plan(sign);
        let mut arm = Vec::new();
        for i in 0..n {
            let ep = bed.rollout(bed.episode_seed(1, i), &p)?;
            let mask = ep.trace.contact_mask.clone().unwrap();
            let js: Vec<f64> = (0..ep.trace.len())
                .filter(|&t| mask[t])
                .filter_map(|t| jerk_at(&ep.trace, t))
                .collect();
            arm.push(js);
        }
        jerks.push(arm);
    }
    let all: Vec<f64> = jerks[0].iter().flatten().copied().collect();
    let mut sorted = all.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p) as usize];
    println!(
        "carrying jerk quantiles: 50% {:.3} 90% {:.3} 99% {:.3} max {:.3}",
        q(0.5),
        q(0.9),
        q(0.99),
        q(1.0)
    );
    for kappa in [30.0, 60.0, 120.0] {
        for theta in [0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.7] {
            let cfg = EnvConfig {
                slip_threshold: theta,
                slip_sharpness: kappa,
                ..env.clone()
            };
            let rates: Vec<f64> = jerks
                .iter()
                .map(|arm| {
                    arm.iter()
                        .map(|js| {
                            js.iter()
                                .map(|&j| 1.0 - slip_probability(j, &cfg))
                                .product::<f64>()
                        })
                        .sum::<f64>()
                        / arm.len() as f64
                })
                .collect();
            println!(
                "kappa {kappa:>5} theta {theta:.2}: baseline {:.3} good {:.3} bad {:.3}",
                rates[0], rates[1], rates[2]
            );
        }
    }
    Ok(())
}
