use chunkscope::metrics::{
    boundary_transition_jerk, contact_free_mask, control_window, episode_contrast, jerk_contrast,
    jerk_series, matched_horizon_truncate, phase_profile, Control, PhaseProfile, PhaseSets, Window,
};
use chunkscope::trace::ActionMatrix;
use chunkscope::{Error, Trace};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn trace(values: &[f64], stride: usize) -> Trace {
    Trace::from_actions(
        ActionMatrix::from_scalars(values).unwrap(),
        stride,
        2 * stride,
        true,
    )
    .unwrap()
}

fn trace_2d(rows: &[[f64; 2]], stride: usize) -> Trace {
    Trace::from_actions(
        ActionMatrix::from_rows(rows).unwrap(),
        stride,
        2 * stride,
        true,
    )
    .unwrap()
}

/// Actions whose jerk is 1 at `spikes` and 0 elsewhere: a_t is built by
/// double-summing a unit second difference.
fn from_second_differences(dd: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; dd.len()];
    for t in 2..dd.len() {
        a[t] = dd[t] + 2.0 * a[t - 1] - a[t - 2];
    }
    a
}

fn profile_means(p: &PhaseProfile<f64>) -> Vec<Option<f64>> {
    p.mean_jerk_by_phase.clone()
}

#[test]
fn constant_and_ramp_have_zero_jerk() {
    let c = trace(&[3.5; 12], 4);
    let r = trace(&(0..12).map(|t| 0.25 * t as f64).collect::<Vec<_>>(), 4);
    for tr in [c, r] {
        let s = jerk_series(&tr, &Window::full(&tr)).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|(_, j)| j.abs() < TOL));
    }
}

#[test]
fn step_sequence_jerk() {
    let tr = trace(&[0.0, 0.0, 1.0, 1.0], 4);
    let s = jerk_series(&tr, &Window::full(&tr)).unwrap();
    assert_eq!(s, vec![(2, 1.0), (3, 1.0)]);
}

#[test]
fn early_steps_are_excluded_not_zero() {
    let tr = trace(&[0.0, 0.0, 1.0, 1.0], 4);
    let s = jerk_series(&tr, &Window::range(0, 2)).unwrap_or_default();
    assert!(s.is_empty());
}

#[test]
fn boundary_pulse_profile_and_contrast() {
    let mut dd = vec![0.0; 15];
    for t in [5, 6, 10, 11] {
        dd[t] = 1.0;
    }
    let tr = trace(&from_second_differences(&dd), 5);
    let p = phase_profile(&tr, &Window::full(&tr)).unwrap();
    let means: Vec<f64> = profile_means(&p).into_iter().map(|m| m.unwrap()).collect();
    for (m, want) in means.iter().zip([1.0, 1.0, 0.0, 0.0, 0.0]) {
        assert!((m - want).abs() < TOL);
    }
    let c = jerk_contrast(&p, &PhaseSets::default_for(5).unwrap()).unwrap();
    assert!((c - 1.0).abs() < TOL);
    let s = episode_contrast(&tr, Control::All).unwrap();
    assert!((s.jerk_contrast - c).abs() < TOL);
}

#[test]
fn contrast_of_given_profiles() {
    let sets = PhaseSets::default_for(5).unwrap();
    let cases = [
        ([1.0, 1.0, 0.0, 0.0, 0.0], 1.0f64),
        ([0.7; 5], 0.0),
        ([0.0, 0.0, 1.0, 1.0, 1.0], -1.0),
    ];
    for (means, want) in cases {
        let c = jerk_contrast(&PhaseProfile::from_means(&means), &sets).unwrap();
        assert!((c - want).abs() < TOL);
    }
}

#[test]
fn window_without_boundaries_leaves_phases_absent() {
    let tr = trace(&[0.0; 20], 5);
    let mask: Vec<bool> = (0..20).map(|t| t % 5 >= 2).collect();
    let p = phase_profile(&tr, &Window::from_mask(mask)).unwrap();
    assert_eq!(p.counts_by_phase[0], 0);
    assert_eq!(p.counts_by_phase[1], 0);
    assert!(p.mean_jerk_by_phase[0].is_none());
    assert!(matches!(
        jerk_contrast(&p, &PhaseSets::default_for(5).unwrap()),
        Err(Error::UndefinedContrast { phase: 0 })
    ));
}

#[test]
fn boundary_transition_jerk_cases() {
    let tr = trace(&[0.0; 15], 5);
    assert_eq!(boundary_transition_jerk(&tr, 5).unwrap(), 0.0);

    let mut a = vec![0.0; 5];
    a.extend([1.0; 5]);
    let tr = trace(&a, 5);
    assert!((boundary_transition_jerk(&tr, 5).unwrap() - 1.0).abs() < TOL);
    assert!(matches!(
        boundary_transition_jerk(&tr, 6),
        Err(Error::NotABoundary { .. })
    ));

    // Smooth quadratic continuation: boundary jerk equals interior jerk.
    let q: Vec<f64> = (0..15).map(|t| 0.5 * 0.3 * (t * t) as f64).collect();
    let tr = trace(&q, 5);
    let series = jerk_series(&tr, &Window::full(&tr)).unwrap();
    let b = boundary_transition_jerk(&tr, 10).unwrap();
    for (_, j) in series {
        assert!((j - b).abs() < TOL);
    }
}

#[test]
fn l2_norm_over_all_dimensions() {
    let tr = trace_2d(&[[0.0, 0.0], [0.0, 0.0], [3.0, 4.0], [3.0, 4.0]], 4);
    let s = jerk_series(&tr, &Window::full(&tr)).unwrap();
    assert!((s[0].1 - 5.0).abs() < TOL);
}

#[test]
fn contact_free_equals_all_without_contact() {
    let dd: Vec<f64> = (0..30).map(|t| ((t * 7) % 5) as f64 * 0.1).collect();
    let tr = trace(&from_second_differences(&dd), 5)
        .with_contact_mask(vec![false; 30])
        .unwrap();
    let all = episode_contrast(&tr, Control::All).unwrap();
    let free = episode_contrast(&tr, Control::contact_free()).unwrap();
    assert!((all.jerk_contrast - free.jerk_contrast).abs() < TOL);
}

#[test]
fn contact_from_t30_first_n_window() {
    let mask: Vec<bool> = (0..60).map(|t| t >= 30).collect();
    let tr = trace(&vec![0.0; 60], 5).with_contact_mask(mask).unwrap();
    let w = control_window(&tr, Control::contact_free_first(50)).unwrap();
    let kept: Vec<usize> = w.timesteps().collect();
    // Oracle: contact-free steps before the edge at 30, minus 2 on each side.
    let oracle: Vec<usize> = (0..28).collect();
    assert_eq!(kept, oracle);
    let s = jerk_series(&tr, &w).unwrap();
    assert_eq!(s.first().unwrap().0, 2);
    assert_eq!(s.last().unwrap().0, 27);
}

#[test]
fn contact_controls_need_a_mask() {
    let tr = trace(&[0.0; 20], 5);
    assert!(matches!(
        episode_contrast(&tr, Control::contact_free()),
        Err(Error::Capability(_))
    ));
}

#[test]
fn matched_horizon_truncation() {
    let a = trace(&vec![0.0; 40], 5);
    let b = trace(&vec![1.0; 60], 5)
        .with_contact_mask(vec![true; 60])
        .unwrap();
    let cut = matched_horizon_truncate(&[a.clone(), b]).unwrap();
    assert!(cut.iter().all(|t| t.len() == 40));
    assert_eq!(cut[1].contact_mask.as_ref().unwrap().len(), 40);
    assert!(episode_contrast(&cut[1], Control::All).is_ok());
    let same = matched_horizon_truncate(&[a.clone(), a.clone()]).unwrap();
    assert_eq!(same, vec![a.clone(), a]);
    assert!(matches!(
        matched_horizon_truncate::<f64>(&[]),
        Err(Error::EmptyInput(_))
    ));
}

#[test]
fn guard_band_oracle() {
    let mask = [
        false, false, false, false, true, true, true, true, false, false, false, false,
    ];
    let free = contact_free_mask(&mask, 2);
    // Edges between 3|4 and 7|8.
    let oracle: Vec<bool> = (0..12)
        .map(|t| !(2..=5).contains(&t) && !(6..=9).contains(&t) && !mask[t])
        .collect();
    assert_eq!(free, oracle);
}

fn actions(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 12..max_len)
}

proptest! {
    #[test]
    fn affine_trajectories_have_zero_jerk(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 6usize..40) {
        let v: Vec<f64> = (0..n).map(|t| a + b * t as f64).collect();
        let tr = trace(&v, 4);
        for (_, j) in jerk_series(&tr, &Window::full(&tr)).unwrap() {
            prop_assert!(j.abs() < 1e-9);
        }
    }

    #[test]
    fn contrast_shift_and_scale(means in prop::collection::vec(0.0f64..4.0, 5), c in -2.0f64..2.0, s in 0.0f64..3.0) {
        let sets = PhaseSets::default_for(5).unwrap();
        let base = jerk_contrast(&PhaseProfile::from_means(&means), &sets).unwrap();
        let shifted: Vec<f64> = means.iter().map(|m| m + c).collect();
        let shifted = jerk_contrast(&PhaseProfile::from_means(&shifted), &sets).unwrap();
        prop_assert!((shifted - base).abs() < 1e-9);

        let v: Vec<f64> = means.iter().cycle().take(25).copied().collect();
        let tr = trace(&v, 5);
        let scaled: Vec<f64> = v.iter().map(|x| s * x).collect();
        let trs = trace(&scaled, 5);
        let c0 = episode_contrast(&tr, Control::All).unwrap().jerk_contrast;
        let c1 = episode_contrast(&trs, Control::All).unwrap().jerk_contrast;
        prop_assert!((c1 - s * c0).abs() < 1e-9 * (1.0 + c0.abs() * s));
    }

    #[test]
    fn phase_independent_jerk_has_zero_contrast(j in 0.0f64..3.0, cycles in 3usize..8) {
        // Constant second difference gives the same jerk at every step.
        let n = 5 * cycles;
        let v: Vec<f64> = (0..n).map(|t| 0.5 * j * (t * t) as f64).collect();
        let tr = trace(&v, 5);
        let c = episode_contrast(&tr, Control::All).unwrap().jerk_contrast;
        prop_assert!(c.abs() < 1e-9 * (1.0 + j * (n * n) as f64));
    }

    #[test]
    fn phase_counts_partition_the_window(v in actions(60), lo in 0usize..6, span in 3usize..40) {
        let tr = trace(&v, 5);
        let hi = (lo + span).min(v.len());
        let w = Window::range(lo, hi);
        if let Ok(s) = jerk_series(&tr, &w) {
            let p = phase_profile(&tr, &w).unwrap();
            prop_assert_eq!(p.total_count(), s.len());
            for (ph, (m, n)) in p.mean_jerk_by_phase.iter().zip(&p.counts_by_phase).enumerate() {
                prop_assert_eq!(m.is_some(), *n > 0);
                // Direct binning oracle.
                let bin: Vec<f64> = s.iter().filter(|(t, _)| t % 5 == ph).map(|(_, j)| *j).collect();
                if let Some(m) = m {
                    let oracle = bin.iter().sum::<f64>() / bin.len() as f64;
                    prop_assert!((m - oracle).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn truncation_is_idempotent(lens in prop::collection::vec(5usize..50, 1..5)) {
        let traces: Vec<Trace> = lens.iter().map(|&n| trace(&vec![0.5; n], 5)).collect();
        let once = matched_horizon_truncate(&traces).unwrap();
        let twice = matched_horizon_truncate(&once).unwrap();
        prop_assert_eq!(once, twice);
    }
}
