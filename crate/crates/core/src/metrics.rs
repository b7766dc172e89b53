//! Artifact metrics: action jerk, phase-locked jerk profiles, the
//! boundary–interior jerk contrast and boundary transition jerk.
//!
//! Jerk at step `t` is `‖a_t − 2a_{t−1} + a_{t−2}‖₂` and is undefined for
//! `t < 2`; those steps are excluded rather than zero-padded. Windows filter
//! jerk timesteps, so `j_t` always reads `a_{t−2..=t}` even when `t−1` or
//! `t−2` lie outside the window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trace::RolloutTrace;

/// Default guard margin (in steps) around contact-mask transitions.
pub const DEFAULT_GUARD_MARGIN: usize = 2;

/// Set of jerk timesteps a statistic is computed over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    start: usize,
    end: usize,
    include: Option<Vec<bool>>,
}

impl Window {
    /// Half-open range `[start, end)`.
    pub fn range(start: usize, end: usize) -> Self {
        Self {
            start,
            end,
            include: None,
        }
    }

    pub fn full<T: Scalar>(trace: &RolloutTrace<T>) -> Self {
        Self::range(0, trace.len())
    }

    /// Arbitrary subset given as a mask over `[0, mask.len())`.
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let start = mask.iter().position(|&b| b).unwrap_or(0);
        let end = mask.iter().rposition(|&b| b).map(|i| i + 1).unwrap_or(0);
        Self {
            start,
            end,
            include: Some(mask),
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.start
            && t < self.end
            && self
                .include
                .as_ref()
                .is_none_or(|m| m.get(t).copied().unwrap_or(false))
    }

    pub fn timesteps(&self) -> impl Iterator<Item = usize> + '_ {
        (self.start..self.end).filter(move |&t| self.contains(t))
    }

    pub fn is_empty(&self) -> bool {
        self.timesteps().next().is_none()
    }
}

/// Jerk at a single step; `None` for `t < 2` or past the end.
pub fn jerk_at<T: Scalar>(trace: &RolloutTrace<T>, t: usize) -> Option<T> {
    if t < 2 || t >= trace.len() {
        return None;
    }
    let a = &trace.executed;
    let (a0, a1, a2) = (a.row(t), a.row(t - 1), a.row(t - 2));
    let two = T::of(2.0);
    let sq = (0..a.cols())
        .map(|k| {
            let d = a0[k] - two * a1[k] + a2[k];
            d * d
        })
        .fold(T::zero(), |acc, x| acc + x);
    Some(sq.sqrt())
}

/// `(t, j_t)` for every `t ≥ 2` in the window.
pub fn jerk_series<T: Scalar>(trace: &RolloutTrace<T>, window: &Window) -> Result<Vec<(usize, T)>> {
    if window.end > trace.len() || window.start >= window.end {
        return Err(Error::EmptySeries(format!(
            "window [{}, {}) outside trace of length {}",
            window.start,
            window.end,
            trace.len()
        )));
    }
    if window.include.is_none() && window.end - window.start < 3 {
        return Err(Error::EmptySeries(format!(
            "window [{}, {}) shorter than 3 steps",
            window.start, window.end
        )));
    }
    let series: Vec<(usize, T)> = window
        .timesteps()
        .filter_map(|t| jerk_at(trace, t).map(|j| (t, j)))
        .collect();
    if series.is_empty() {
        return Err(Error::EmptySeries(
            "no timestep with t >= 2 in window".into(),
        ));
    }
    Ok(series)
}

/// Mean jerk per phase of the replanning cycle. Phases without samples are
/// absent (`None`), never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile<T> {
    pub mean_jerk_by_phase: Vec<Option<T>>,
    pub counts_by_phase: Vec<usize>,
}

impl<T: Scalar> PhaseProfile<T> {
    /// Bin `(t, j_t)` pairs by `(t + offset) % stride`.
    pub fn from_series(series: &[(usize, T)], stride: usize, phase_offset: usize) -> Self {
        let mut sums = vec![T::zero(); stride];
        let mut counts = vec![0usize; stride];
        for &(t, j) in series {
            let p = (t + phase_offset) % stride;
            sums[p] = sums[p] + j;
            counts[p] += 1;
        }
        let means = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s / T::of_usize(c)))
            .collect();
        Self {
            mean_jerk_by_phase: means,
            counts_by_phase: counts,
        }
    }

    /// Profile built directly from per-phase means (all present).
    pub fn from_means(means: &[T]) -> Self {
        Self {
            mean_jerk_by_phase: means.iter().map(|&m| Some(m)).collect(),
            counts_by_phase: vec![1; means.len()],
        }
    }

    pub fn stride(&self) -> usize {
        self.mean_jerk_by_phase.len()
    }

    pub fn total_count(&self) -> usize {
        self.counts_by_phase.iter().sum()
    }
}

/// Boundary and interior phase sets for the contrast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSets {
    pub boundary: Vec<usize>,
    pub interior: Vec<usize>,
}

impl PhaseSets {
    /// `B = {0, 1}`, `I = {2, …, K−1}`.
    pub fn default_for(stride: usize) -> Result<Self> {
        if stride < 4 {
            return Err(Error::invalid(format!(
                "stride {stride} < 4 leaves no interior phases beyond {{0, 1}}"
            )));
        }
        Ok(Self {
            boundary: vec![0, 1],
            interior: (2..stride).collect(),
        })
    }
}

pub fn phase_profile<T: Scalar>(
    trace: &RolloutTrace<T>,
    window: &Window,
) -> Result<PhaseProfile<T>> {
    if trace.stride < 4 {
        return Err(Error::invalid(format!(
            "phase profile needs stride >= 4, got {}",
            trace.stride
        )));
    }
    let series = jerk_series(trace, window)?;
    Ok(PhaseProfile::from_series(
        &series,
        trace.stride,
        trace.phase_offset,
    ))
}

/// Mean boundary-phase jerk minus mean interior-phase jerk.
pub fn jerk_contrast<T: Scalar>(profile: &PhaseProfile<T>, sets: &PhaseSets) -> Result<T> {
    if sets.boundary.is_empty() || sets.interior.is_empty() {
        return Err(Error::invalid("phase sets must both be nonempty"));
    }
    let set_mean = |phases: &[usize]| -> Result<T> {
        let mut acc = T::zero();
        for &p in phases {
            let m = profile
                .mean_jerk_by_phase
                .get(p)
                .copied()
                .flatten()
                .ok_or(Error::UndefinedContrast { phase: p })?;
            acc = acc + m;
        }
        Ok(acc / T::of_usize(phases.len()))
    };
    Ok(set_mean(&sets.boundary)? - set_mean(&sets.interior)?)
}

/// Jerk exactly at a chunk boundary (the second difference straddling the
/// stitch point).
pub fn boundary_transition_jerk<T: Scalar>(
    trace: &RolloutTrace<T>,
    boundary_t: usize,
) -> Result<T> {
    if !trace.is_boundary(boundary_t) {
        return Err(Error::NotABoundary {
            t: boundary_t,
            stride: trace.stride,
            offset: trace.phase_offset,
        });
    }
    if boundary_t < 2 {
        return Err(Error::invalid(format!(
            "boundary {boundary_t} has no second difference"
        )));
    }
    jerk_at(trace, boundary_t).ok_or_else(|| {
        Error::invalid(format!(
            "boundary {boundary_t} beyond trace length {}",
            trace.len()
        ))
    })
}

/// Which timesteps of an episode enter its contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Control {
    All,
    /// Steps without contact, excluding `guard` steps on either side of
    /// every contact-mask transition.
    ContactFree {
        guard: usize,
    },
    /// The first `n` steps of the contact-free set.
    ContactFreeFirstN {
        n: usize,
        guard: usize,
    },
}

impl Control {
    pub fn contact_free() -> Self {
        Control::ContactFree {
            guard: DEFAULT_GUARD_MARGIN,
        }
    }

    pub fn contact_free_first(n: usize) -> Self {
        Control::ContactFreeFirstN {
            n,
            guard: DEFAULT_GUARD_MARGIN,
        }
    }

    pub fn needs_contact_mask(&self) -> bool {
        !matches!(self, Control::All)
    }

    pub fn label(&self) -> String {
        match self {
            Control::All => "all".into(),
            Control::ContactFree { .. } => "contact_free".into(),
            Control::ContactFreeFirstN { n, .. } => format!("contact_free_first_{n}"),
        }
    }
}

impl std::fmt::Display for Control {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Contact-free timesteps of a mask, with a guard band around transitions.
pub fn contact_free_mask(mask: &[bool], guard: usize) -> Vec<bool> {
    let mut free: Vec<bool> = mask.iter().map(|&c| !c).collect();
    for t in 1..mask.len() {
        if mask[t] != mask[t - 1] {
            // The edge lies between t - 1 and t; drop `guard` steps per side.
            let lo = t.saturating_sub(guard);
            let hi = (t + guard).min(mask.len());
            free[lo..hi].iter_mut().for_each(|f| *f = false);
        }
    }
    free
}

pub fn control_window<T: Scalar>(trace: &RolloutTrace<T>, control: Control) -> Result<Window> {
    let mask = || {
        trace.contact_mask.as_deref().ok_or_else(|| {
            Error::Capability(format!(
                "control `{control}` needs a contact mask; episode {} has none",
                trace.episode_id
            ))
        })
    };
    Ok(match control {
        Control::All => Window::full(trace),
        Control::ContactFree { guard } => Window::from_mask(contact_free_mask(mask()?, guard)),
        Control::ContactFreeFirstN { n, guard } => {
            let mut free = contact_free_mask(mask()?, guard);
            let mut kept = 0;
            for f in free.iter_mut() {
                if *f {
                    if kept < n {
                        kept += 1;
                    } else {
                        *f = false;
                    }
                }
            }
            Window::from_mask(free)
        }
    })
}

/// Scalar artifact metrics over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSummary<T> {
    pub jerk_contrast: T,
    /// Mean jerk over boundary timesteps (phase 0) in the window.
    pub boundary_transition_jerk: Option<T>,
    pub phase_profile: PhaseProfile<T>,
    pub window: (usize, usize),
    pub n_timesteps: usize,
}

pub fn summarize<T: Scalar>(
    trace: &RolloutTrace<T>,
    window: &Window,
) -> Result<ArtifactSummary<T>> {
    if window.is_empty() {
        return Err(Error::UndefinedSummary(
            "window contains no timesteps".into(),
        ));
    }
    let profile = phase_profile(trace, window).map_err(|e| match e {
        Error::EmptySeries(m) => Error::UndefinedSummary(m),
        other => other,
    })?;
    let contrast = jerk_contrast(&profile, &PhaseSets::default_for(trace.stride)?)?;
    Ok(ArtifactSummary {
        jerk_contrast: contrast,
        boundary_transition_jerk: profile.mean_jerk_by_phase[0],
        n_timesteps: profile.total_count(),
        phase_profile: profile,
        window: (window.start, window.end),
    })
}

/// Episode-level contrast under a control condition.
pub fn episode_contrast<T: Scalar>(
    trace: &RolloutTrace<T>,
    control: Control,
) -> Result<ArtifactSummary<T>> {
    let window = control_window(trace, control)?;
    summarize(trace, &window)
}

/// Truncate every trace to the shortest length among them.
pub fn matched_horizon_truncate<T: Scalar>(
    traces: &[RolloutTrace<T>],
) -> Result<Vec<RolloutTrace<T>>> {
    let min_len = traces
        .iter()
        .map(RolloutTrace::len)
        .min()
        .ok_or_else(|| Error::EmptyInput("no traces to truncate".into()))?;
    Ok(traces.iter().map(|t| t.truncated(min_len)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ActionMatrix;

    fn trace_1d(values: &[f64], stride: usize) -> RolloutTrace<f64> {
        RolloutTrace::from_actions(
            ActionMatrix::from_scalars(values).unwrap(),
            stride,
            2 * stride,
            true,
        )
        .unwrap()
    }

    #[test]
    fn jerk_of_step_sequence() {
        let tr = trace_1d(&[0.0, 0.0, 1.0, 1.0], 2);
        let s = jerk_series(&tr, &Window::full(&tr)).unwrap();
        assert_eq!(s, vec![(2, 1.0), (3, 1.0)]);
    }

    #[test]
    fn constant_and_affine_have_zero_jerk() {
        let c = trace_1d(&[3.0; 10], 5);
        assert!(jerk_series(&c, &Window::full(&c))
            .unwrap()
            .iter()
            .all(|&(_, j)| j == 0.0));
        let rows: Vec<[f64; 2]> = (0..12)
            .map(|t| [0.5 * t as f64, -2.0 * t as f64 + 1.0])
            .collect();
        let tr = RolloutTrace::from_actions(ActionMatrix::from_rows(&rows).unwrap(), 5, 10, true)
            .unwrap();
        assert!(jerk_series(&tr, &Window::full(&tr))
            .unwrap()
            .iter()
            .all(|&(_, j)| j.abs() < 1e-12));
    }

    #[test]
    fn short_window_is_an_error() {
        let tr = trace_1d(&[0.0; 10], 5);
        assert!(matches!(
            jerk_series(&tr, &Window::range(0, 2)),
            Err(Error::EmptySeries(_))
        ));
        assert!(matches!(
            jerk_series(&tr, &Window::range(4, 20)),
            Err(Error::EmptySeries(_))
        ));
    }

    #[test]
    fn missing_phase_makes_contrast_undefined() {
        let mut p = PhaseProfile::from_means(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        p.mean_jerk_by_phase[1] = None;
        let err = jerk_contrast(&p, &PhaseSets::default_for(5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::UndefinedContrast { phase: 1 }));
    }

    #[test]
    fn btj_requires_boundary() {
        let tr = trace_1d(&[0.0; 12], 5);
        assert!(matches!(
            boundary_transition_jerk(&tr, 6),
            Err(Error::NotABoundary { .. })
        ));
        assert!(boundary_transition_jerk(&tr, 0).is_err());
        assert_eq!(boundary_transition_jerk(&tr, 5).unwrap(), 0.0);
    }

    #[test]
    fn contact_controls_need_mask() {
        let tr = trace_1d(&[0.0; 12], 5);
        assert!(matches!(
            episode_contrast(&tr, Control::contact_free()),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn guard_band_surrounds_transitions() {
        let mask: Vec<bool> = (0..12).map(|t| (5..8).contains(&t)).collect();
        let free = contact_free_mask(&mask, 2);
        let kept: Vec<usize> = (0..12).filter(|&t| free[t]).collect();
        assert_eq!(kept, vec![0, 1, 2, 10, 11]);
    }

    #[test]
    fn works_in_f32() {
        let tr = RolloutTrace::from_actions(
            ActionMatrix::<f32>::from_scalars(&[0.0, 0.0, 1.0, 1.0]).unwrap(),
            2,
            4,
            true,
        )
        .unwrap();
        assert_eq!(
            jerk_series(&tr, &Window::full(&tr)).unwrap(),
            vec![(2, 1.0f32), (3, 1.0f32)]
        );
    }
}
