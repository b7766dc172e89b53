//! Acceptance criteria 1 through 8. Each test prints one PASS/FAIL line.

use std::path::{Path, PathBuf};
use std::process::Command;

use chunkscope::env::{step_kinematics, EnvConfig, ACTION_DIM};
use chunkscope::experiments::scan::reference_contexts;
use chunkscope::experiments::{
    run_decomposition, run_direction_experiment, run_noise_scan, run_outcome_association,
    run_trajectory_steering, Arm, DirectionConfig, DirectionKind, NoiseCondition, OutcomeConfig,
    ScanConfig, SteeringConfig,
};
use chunkscope::io::{decode_trace, encode_trace, read_trace};
use chunkscope::metrics::{
    boundary_transition_jerk, episode_contrast, jerk_contrast, jerk_series, phase_profile, Control,
    PhaseSets, Window,
};
use chunkscope::policy::PolicyConfig;
use chunkscope::rng::{standard_normal_vec, stream};
use chunkscope::rollout::{ChunkingConfig, SteeringPlan, Testbed};
use chunkscope::stats::{
    bootstrap_ci, normal_quantile, wilson_ci, PermutationMode, PermutationTest, Sidedness,
};
use chunkscope::trace::ActionMatrix;
use chunkscope::Trace;

const METRIC_TOL: f64 = 1e-9;
const MIN_FIXTURES: usize = 10;

const PERM_MC: u64 = 20_000;
const PERM_FIXTURES: u64 = 20;
const PERM_TOL: f64 = 0.01;
const NULL_REPS: u64 = 2_000;
const NULL_PERMS: u64 = 500;
const NULL_SUP_TOL: f64 = 0.05;

const WILSON_TOL: f64 = 1e-12;
const COVERAGE_SAMPLES: u64 = 200;
const COVERAGE_N: usize = 100;
const COVERAGE_BOOT: usize = 2_000;
const MIN_COVERAGE: f64 = 0.93;

const OUTCOME_EPISODES: usize = 200;
const OUTCOME_ALPHA: f64 = 0.01;
const NULL_SEEDS: u64 = 20;
const NULL_ALPHA: f64 = 0.05;
const NULL_MIN_FRACTION: f64 = 0.9;

const SCAN_CONTEXTS: usize = 16;
const SCAN_SAMPLES: usize = 24;
const MC_DRAWS: usize = 10_000;
const STD_REL_TOL: f64 = 0.20;
const SATURATION: f64 = 0.5;
const NONADDITIVE_REL: f64 = 0.05;

const GRADIENT_MIN_R: f64 = 0.99;
const SEARCH_MIN_R: f64 = 0.9;
const SEARCH_SEEDS: u64 = 10;
const SEARCH_MIN_SEEDS: usize = 8;
const ORTHOGONAL_MAX_RANGE: f64 = 1e-6;

const STEER_EPISODES: usize = 50;
const STEER_SEEDS: u64 = 10;
const CONTRAST_ORDER_MIN: usize = 9;
const SUCCESS_ORDER_MIN: usize = 8;
const CEILING_SUCCESS: f64 = 0.98;
const CEILING_MIN: usize = 8;

fn report(id: u32, pass: bool, detail: String) {
    println!("C{id} {}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn bed(env: EnvConfig, policy: PolicyConfig) -> Testbed {
    Testbed::new(env, policy, ChunkingConfig::default()).unwrap()
}

fn eps(deviation_scale: f64) -> PolicyConfig {
    PolicyConfig {
        deviation_scale,
        ..Default::default()
    }
}

// Naive metric oracle ------------------------------------------------------

fn naive_jerk(rows: &[Vec<f64>], t: usize) -> f64 {
    (0..rows[t].len())
        .map(|d| {
            let s = rows[t][d] - 2.0 * rows[t - 1][d] + rows[t - 2][d];
            s * s
        })
        .sum::<f64>()
        .sqrt()
}

/// Per-phase mean jerk, contrast, and mean phase-0 jerk over `[lo, hi)`.
fn naive_summary(
    rows: &[Vec<f64>],
    k: usize,
    offset: usize,
    lo: usize,
    hi: usize,
) -> (Vec<Option<f64>>, Option<f64>) {
    let mut sum = vec![0.0; k];
    let mut cnt = vec![0usize; k];
    for t in lo.max(2)..hi {
        let p = (t + offset) % k;
        sum[p] += naive_jerk(rows, t);
        cnt[p] += 1;
    }
    let means: Vec<Option<f64>> = (0..k)
        .map(|p| (cnt[p] > 0).then(|| sum[p] / cnt[p] as f64))
        .collect();
    let avg = |ps: &[usize]| -> Option<f64> {
        let v: Option<Vec<f64>> = ps.iter().map(|&p| means[p]).collect();
        v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let boundary = avg(&[0, 1]);
    let interior = avg(&(2..k).collect::<Vec<_>>());
    (means, boundary.zip(interior).map(|(b, i)| b - i))
}

struct Fixture {
    rows: Vec<Vec<f64>>,
    k: usize,
    offset: usize,
}

impl Fixture {
    fn trace(&self) -> Trace {
        let mut t = Trace::from_actions(
            ActionMatrix::from_rows(&self.rows).unwrap(),
            self.k,
            2 * self.k,
            true,
        )
        .unwrap();
        t.phase_offset = self.offset;
        t.chunk_records = (0..chunkscope::trace::chunk_count(t.len(), self.k, self.offset))
            .map(chunkscope::trace::ChunkRecord::bare)
            .collect();
        t.validate().unwrap();
        t
    }
}

fn metric_fixtures() -> Vec<Fixture> {
    let scalar = |v: Vec<f64>| v.into_iter().map(|x| vec![x]).collect::<Vec<_>>();
    let mut out = vec![
        Fixture {
            rows: scalar(vec![0.0; 15]),
            k: 5,
            offset: 0,
        },
        Fixture {
            rows: scalar(vec![2.5; 20]),
            k: 4,
            offset: 0,
        },
        Fixture {
            rows: scalar((0..18).map(|t| 0.3 * t as f64 - 1.0).collect()),
            k: 4,
            offset: 0,
        },
        Fixture {
            rows: scalar([0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0].to_vec()),
            k: 4,
            offset: 0,
        },
        Fixture {
            rows: scalar(
                (0..25)
                    .map(|t| if t % 5 == 0 { 1.0 } else { 0.0 })
                    .collect(),
            ),
            k: 5,
            offset: 0,
        },
        Fixture {
            rows: (0..12)
                .map(|t| vec![0.5 * (t * t) as f64, -(t as f64)])
                .collect(),
            k: 4,
            offset: 0,
        },
    ];
    for (i, (k, offset, len, dim)) in [
        (5, 0, 40, 2),
        (5, 2, 33, 2),
        (4, 1, 29, 3),
        (6, 5, 50, 1),
        (4, 3, 20, 2),
        (7, 3, 45, 2),
    ]
    .into_iter()
    .enumerate()
    {
        let flat = standard_normal_vec(&mut stream(100 + i as u64, &[]), len * dim);
        out.push(Fixture {
            rows: flat.chunks(dim).map(<[f64]>::to_vec).collect(),
            k,
            offset,
        });
    }
    out
}

#[test]
fn c1_metric_correctness() {
    let fixtures = metric_fixtures();
    let mut worst = 0.0f64;
    let mut ok = fixtures.len() >= MIN_FIXTURES;
    for f in &fixtures {
        let tr = f.trace();
        let n = f.rows.len();
        for (t, j) in jerk_series(&tr, &Window::full(&tr)).unwrap() {
            worst = worst.max((j - naive_jerk(&f.rows, t)).abs());
        }
        for (lo, hi) in [(0, n), (1, n - 1), (n / 3, n)] {
            let w = Window::range(lo, hi);
            let (means, contrast) = naive_summary(&f.rows, f.k, f.offset, lo, hi);
            let Ok(p) = phase_profile(&tr, &w) else {
                ok &= means.iter().all(Option::is_none);
                continue;
            };
            for (got, want) in p.mean_jerk_by_phase.iter().zip(&means) {
                match (got, want) {
                    (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
                    (None, None) => {}
                    _ => ok = false,
                }
            }
            match (
                jerk_contrast(&p, &PhaseSets::default_for(f.k).unwrap()),
                contrast,
            ) {
                (Ok(c), Some(w)) => worst = worst.max((c - w).abs()),
                (Err(_), None) => {}
                _ => ok = false,
            }
        }
        let (means, contrast) = naive_summary(&f.rows, f.k, f.offset, 0, n);
        let s = episode_contrast(&tr, Control::All).ok();
        ok &= s.is_some() == contrast.is_some();
        match (
            s.and_then(|s| s.boundary_transition_jerk),
            means[0].filter(|_| contrast.is_some()),
        ) {
            (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
            (None, None) => {}
            _ => ok = false,
        }
        for b in tr.boundaries().filter(|&b| b >= 2) {
            let got = boundary_transition_jerk(&tr, b).unwrap();
            worst = worst.max((got - naive_jerk(&f.rows, b)).abs());
        }
    }
    // Strides below 4 leave no interior phase.
    let short = Fixture {
        rows: vec![vec![0.0]; 9],
        k: 3,
        offset: 0,
    }
    .trace();
    ok &= phase_profile(&short, &Window::full(&short)).is_err();
    let pass = ok && worst <= METRIC_TOL;
    report(
        1,
        pass,
        format!(
            "{} fixtures, max |err| {worst:.2e} (tol {METRIC_TOL:e})",
            fixtures.len()
        ),
    );
    assert!(pass);
}

// Permutation exactness ----------------------------------------------------

/// Exhaustive p over all C(8,4) relabelings, computed without the library.
fn exhaustive_p(a: &[f64], b: &[f64], side: Sidedness) -> f64 {
    let pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pool.len();
    let nb = b.len();
    let total: f64 = pool.iter().sum();
    let delta = |sum_b: f64| sum_b / nb as f64 - (total - sum_b) / (n - nb) as f64;
    let observed = delta(b.iter().sum());
    let (mut hits, mut count) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != nb {
            continue;
        }
        let sb: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pool[i]).sum();
        let d = delta(sb);
        let extreme = match side {
            Sidedness::Greater => d >= observed - 1e-12,
            Sidedness::TwoSided => d.abs() >= observed.abs() - 1e-12,
        };
        hits += u64::from(extreme);
        count += 1;
    }
    hits as f64 / count as f64
}

#[test]
fn c2_permutation_exactness() {
    let mut worst = 0.0f64;
    for s in 0..PERM_FIXTURES {
        let x = standard_normal_vec(&mut stream(200 + s, &[]), 8);
        let shift = 0.25 * (s % 5) as f64;
        let a = &x[..4];
        let b: Vec<f64> = x[4..].iter().map(|v| v + shift).collect();
        for side in [Sidedness::Greater, Sidedness::TwoSided] {
            let mc = PermutationTest::new(PERM_MC)
                .mode(PermutationMode::MonteCarlo)
                .sidedness(side)
                .seed(s)
                .run(a, &b)
                .unwrap();
            worst = worst.max((mc.p_value - exhaustive_p(a, &b, side)).abs());
        }
    }

    let mut ps: Vec<f64> = (0..NULL_REPS)
        .map(|r| {
            let x = standard_normal_vec(&mut stream(10_000 + r, &[]), 30);
            PermutationTest::new(NULL_PERMS)
                .mode(PermutationMode::MonteCarlo)
                .sidedness(Sidedness::Greater)
                .seed(r)
                .run(&x[..15], &x[15..])
                .unwrap()
                .p_value
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let sup = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).abs().max((p - i as f64 / n).abs()))
        .fold(0.0, f64::max);

    let pass = worst <= PERM_TOL && sup < NULL_SUP_TOL;
    report(
        2,
        pass,
        format!("max |p_mc - p_exact| {worst:.4} (tol {PERM_TOL}), null sup deviation {sup:.4} (tol {NULL_SUP_TOL})"),
    );
    assert!(pass);
}

// Interval estimators ------------------------------------------------------

#[test]
fn c3_interval_estimators() {
    let mut worst = 0.0f64;
    for level in [0.8, 0.9, 0.95, 0.99] {
        let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
        for n in [1u64, 2, 7, 10, 43, 50, 200, 1000] {
            for k in 0..=n {
                let w = wilson_ci::<f64>(k, n, level).unwrap();
                let (kf, nf) = (k as f64, n as f64);
                let p = kf / nf;
                let denom = 1.0 + z * z / nf;
                let center = (p + z * z / (2.0 * nf)) / denom;
                let half = z / denom * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
                worst = worst
                    .max((w.lo - (center - half).max(0.0)).abs())
                    .max((w.hi - (center + half).min(1.0)).abs());
            }
        }
    }

    let covered = (0..COVERAGE_SAMPLES)
        .filter(|&s| {
            let x = standard_normal_vec(&mut stream(500 + s, &[]), COVERAGE_N);
            bootstrap_ci(&x, COVERAGE_BOOT, 0.95, s)
                .unwrap()
                .contains(0.0)
        })
        .count();
    let coverage = covered as f64 / COVERAGE_SAMPLES as f64;

    let pass = worst <= WILSON_TOL && coverage >= MIN_COVERAGE;
    report(
        3,
        pass,
        format!("Wilson max |err| {worst:.1e} (tol {WILSON_TOL:e}), bootstrap coverage {coverage:.3} (min {MIN_COVERAGE})"),
    );
    assert!(pass);
}

// Outcome association ------------------------------------------------------

#[test]
fn c4_outcome_association() {
    let cfg = OutcomeConfig::default();
    let (r, _) = run_outcome_association(
        &bed(EnvConfig::headroom(), PolicyConfig::default()),
        OUTCOME_EPISODES,
        &cfg,
        0,
    )
    .unwrap();
    let lines: Vec<String> = r
        .controls
        .iter()
        .map(|c| {
            format!(
                "{} delta {:+.4} p {:?}",
                c.label,
                c.delta.unwrap_or(f64::NAN),
                c.p_value()
            )
        })
        .collect();
    let separated = r.controls.iter().all(|c| {
        c.delta.is_some_and(|d| d > 0.0) && c.p_value().is_some_and(|p| p < OUTCOME_ALPHA)
    });

    let (mut clean, mut inapplicable) = (0, 0);
    for seed in 0..NULL_SEEDS {
        let (r, _) = run_outcome_association(
            &bed(EnvConfig::headroom(), eps(0.0)),
            OUTCOME_EPISODES,
            &cfg,
            seed,
        )
        .unwrap();
        if r.controls.iter().all(|c| !c.applicable()) {
            inapplicable += 1;
        }
        if r.controls
            .iter()
            .all(|c| c.p_value().is_none_or(|p| p > NULL_ALPHA))
        {
            clean += 1;
        }
    }
    let fraction = clean as f64 / NULL_SEEDS as f64;

    let pass = separated && fraction >= NULL_MIN_FRACTION;
    report(
        4,
        pass,
        format!(
            "{} success / {} failure; {}; null: {clean}/{NULL_SEEDS} seeds without a false mechanism ({inapplicable} single-outcome, tests inapplicable)",
            r.n_success,
            r.n_failure,
            lines.join("; ")
        ),
    );
    assert!(pass);
}

// Fixed-context scan -------------------------------------------------------

fn sample_std(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Brute-force probe: execute K actions of chunk 0, stitch K clipped actions
/// of chunk 1 and measure the window directly.
fn hand_probe(
    b: &Testbed,
    state: &chunkscope::env::EnvState,
    z0: &[f64],
    z1: &[f64],
) -> Option<(f64, f64)> {
    let k = b.chunking.stride;
    let plan0 = b.policy.generate_actions(state, z0).unwrap();
    let mut s = state.clone();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * k);
    for i in 0..k {
        let info =
            step_kinematics(&mut s, &plan0[i * ACTION_DIM..(i + 1) * ACTION_DIM], &b.env).unwrap();
        rows.push(info.executed.to_vec());
        if s.status(&b.env).is_terminal() {
            return None;
        }
    }
    let plan1 = b.policy.generate_actions(&s, z1).unwrap();
    let clip = b.env.action_clip;
    for i in 0..k {
        rows.push(
            plan1[i * ACTION_DIM..(i + 1) * ACTION_DIM]
                .iter()
                .map(|a| a.clamp(-clip, clip))
                .collect(),
        );
    }
    let (means, contrast) = naive_summary(&rows, k, 0, 0, 2 * k);
    means[0].and(contrast).map(|c| (naive_jerk(&rows, k), c))
}

#[test]
fn c5_fixed_context_scan() {
    let b = bed(EnvConfig::headroom(), PolicyConfig::default());
    let cfg = ScanConfig {
        n_contexts: SCAN_CONTEXTS,
        n_samples: SCAN_SAMPLES,
        condition: NoiseCondition::VaryZ1,
        n_boot: 1_000,
        ..Default::default()
    };
    let scan = run_noise_scan(&b, &cfg, 0).unwrap();
    let refs = reference_contexts(&b, cfg.n_contexts, cfg.pool_episodes, cfg.selection, 0).unwrap();
    let latent = b.policy.latent_dim();
    let (mut within, mut total, mut worst) = (0, 0, 0.0f64);
    let mut probe_gap = 0.0f64;
    for (c, r) in scan.contexts.iter().zip(&refs) {
        assert_eq!(c.context_id, r.context.context_id);
        let mut rng = stream(77, &[r.context.context_id.0]);
        let z0 = r.z0.values();
        let at_ref = hand_probe(&b, &r.context.state, &z0, &r.z1.values());
        if let (Some((hb, hc)), Some(rb), Some(rc)) =
            (at_ref, c.reference_btj, c.reference_contrast)
        {
            probe_gap = probe_gap.max((hb - rb).abs()).max((hc - rc).abs());
        } else {
            probe_gap = f64::INFINITY;
        }
        let draws: Vec<(f64, f64)> = (0..MC_DRAWS)
            .filter_map(|_| {
                hand_probe(
                    &b,
                    &r.context.state,
                    &z0,
                    &standard_normal_vec(&mut rng, latent),
                )
            })
            .collect();
        let mc_btj = sample_std(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
        let mc_con = sample_std(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
        for (got, want) in [(c.btj_std, mc_btj), (c.contrast_std, mc_con)] {
            total += 1;
            let rel = got.map_or(f64::INFINITY, |g| (g - want).abs() / want);
            worst = worst.max(rel);
            within += usize::from(rel <= STD_REL_TOL);
        }
    }

    let flat = run_noise_scan(&bed(EnvConfig::headroom(), eps(0.0)), &cfg, 0).unwrap();
    let zero = flat
        .contexts
        .iter()
        .all(|c| c.btj_std == Some(0.0) && c.contrast_std == Some(0.0));

    let rows = run_decomposition(&b, SCAN_CONTEXTS, SCAN_SAMPLES, 0).unwrap();
    let nonzero = rows.iter().all(|r| r.btj_std > 0.0 && r.contrast_std > 0.0);

    let mut nonadditive = Vec::new();
    for env in [EnvConfig::headroom(), EnvConfig::ceiling()] {
        let policy = PolicyConfig {
            saturation: Some(SATURATION),
            ..Default::default()
        };
        let rows = run_decomposition(&bed(env, policy), SCAN_CONTEXTS, SCAN_SAMPLES, 0).unwrap();
        let get = |c: NoiseCondition| rows.iter().find(|r| r.condition == c).unwrap().contrast_std;
        let quad = get(NoiseCondition::VaryZ0).hypot(get(NoiseCondition::VaryZ1));
        nonadditive.push((get(NoiseCondition::VaryBoth) - quad).abs() / quad);
    }
    let nonadd = nonadditive.iter().any(|&d| d > NONADDITIVE_REL);

    let pass = within == total && probe_gap <= METRIC_TOL && zero && nonzero && nonadd;
    report(
        5,
        pass,
        format!(
            "{within}/{total} stds within {STD_REL_TOL} of {MC_DRAWS}-draw MC (worst rel {worst:.3}); hand probe matches library {probe_gap:.1e}; eps=0 exact zero {zero}; decomposition nonzero {nonzero}; non-additivity {nonadditive:.3?} (min {NONADDITIVE_REL})"
        ),
    );
    assert!(pass);
}

// Directional steering -----------------------------------------------------

#[test]
fn c6_directional_steering() {
    let b = bed(EnvConfig::headroom(), PolicyConfig::default());
    let run = |kind, seed| {
        run_direction_experiment(
            &b,
            &DirectionConfig {
                kind,
                ..Default::default()
            },
            seed,
        )
        .unwrap()
    };
    let g = run(DirectionKind::Gradient, 0);
    let grad_r = g
        .sweeps
        .iter()
        .map(|s| s.r_contrast.map_or(0.0, f64::abs))
        .fold(f64::INFINITY, f64::min);

    let mut search_r = Vec::new();
    let mut max_range = 0.0f64;
    for seed in 0..SEARCH_SEEDS {
        search_r.push(
            run(DirectionKind::Search, seed)
                .mean_abs_r_contrast
                .unwrap_or(0.0),
        );
        max_range = max_range.max(
            run(DirectionKind::Orthogonal, seed)
                .max_artifact_range
                .unwrap(),
        );
    }
    let good = search_r.iter().filter(|&&r| r >= SEARCH_MIN_R).count();

    let pass =
        grad_r >= GRADIENT_MIN_R && good >= SEARCH_MIN_SEEDS && max_range < ORTHOGONAL_MAX_RANGE;
    report(
        6,
        pass,
        format!(
            "gradient min |r| {grad_r:.4}; search mean |r| >= {SEARCH_MIN_R} in {good}/{SEARCH_SEEDS} seeds (min {:.4}); orthogonal max range {max_range:.1e}",
            search_r.iter().copied().fold(f64::INFINITY, f64::min)
        ),
    );
    assert!(pass);
}

// Trajectory steering ------------------------------------------------------

#[test]
fn c7_trajectory_steering() {
    let cfg = SteeringConfig {
        n_episodes_per_arm: STEER_EPISODES,
        n_boot: 1_000,
        ..Default::default()
    };
    let head = bed(EnvConfig::headroom(), PolicyConfig::default());
    let ceil = bed(EnvConfig::ceiling(), PolicyConfig::default());
    let (mut contrast, mut success, mut ceiling) = (0, 0, 0);
    let mut ceiling_rates = Vec::new();
    for seed in 0..STEER_SEEDS {
        let r = run_trajectory_steering(&head, &cfg, seed).unwrap();
        contrast += usize::from(r.ordering.contrast);
        success += usize::from(r.ordering.success);

        let c = run_trajectory_steering(&ceil, &cfg, seed).unwrap();
        let rate = |arm| c.arm(arm).unwrap().success_rate.point;
        let (g, base, bad) = (rate(Arm::Good), rate(Arm::Baseline), rate(Arm::Bad));
        ceiling_rates.push((g, base, bad));
        ceiling += usize::from(
            g >= CEILING_SUCCESS && base >= CEILING_SUCCESS && c.ordering.contrast && bad < base,
        );
    }

    let pass =
        contrast >= CONTRAST_ORDER_MIN && success >= SUCCESS_ORDER_MIN && ceiling >= CEILING_MIN;
    report(
        7,
        pass,
        format!(
            "headroom contrast order {contrast}/{STEER_SEEDS} (min {CONTRAST_ORDER_MIN}), success order {success}/{STEER_SEEDS} (min {SUCCESS_ORDER_MIN}); ceiling signature {ceiling}/{STEER_SEEDS} (min {CEILING_MIN}), (good, baseline, bad) success {ceiling_rates:.2?}"
        ),
    );
    assert!(pass);
}

// Reproducibility and I/O --------------------------------------------------

fn run_cli(args: &[&str], out: &Path) -> Vec<PathBuf> {
    let o = Command::new(env!("CARGO_BIN_EXE_chunkscope"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?}");
    String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(PathBuf::from)
        .collect()
}

#[test]
fn c8_reproducibility_and_io() {
    let commands: [&[&str]; 6] = [
        &["rollout", "--episodes", "20"],
        &["analyze", "--permutations", "500"],
        &["scan", "--contexts", "2", "--samples", "4"],
        &["decompose"],
        &["direction", "--contexts", "2"],
        &["steer", "--episodes", "4", "--set", "steer.n_boot=200"],
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut identical = true;
    let mut files = 0;
    for args in commands {
        let pa = run_cli(args, a.path());
        let pb = run_cli(args, b.path());
        identical &= pa.len() == pb.len();
        for (x, y) in pa.iter().zip(&pb) {
            files += 1;
            identical &= x.strip_prefix(a.path()).ok() == y.strip_prefix(b.path()).ok();
            identical &= std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
        }
    }

    let bed = bed(EnvConfig::headroom(), PolicyConfig::default());
    let round_trip = chunkscope::experiments::rollout_many(&bed, 9, 10, &SteeringPlan::None)
        .unwrap()
        .iter()
        .all(|e| {
            let text = encode_trace(&e.trace, None).unwrap();
            let back = decode_trace(&text).unwrap();
            back.trace == e.trace && encode_trace(&back.trace, None).unwrap() == text
        });
    let written = std::fs::read_dir(a.path().join("traces"))
        .unwrap()
        .all(|p| read_trace(p.unwrap().path()).is_ok());

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/golden.trace");
    let golden_ok = read_trace(&golden).is_ok_and(|d| d.trace.len() == 5);

    let pass = identical && round_trip && written && golden_ok;
    report(
        8,
        pass,
        format!("{files} output files byte-identical {identical}; round-trip exact {round_trip}; written traces parse {written}; golden parses {golden_ok}"),
    );
    assert!(pass);
}
