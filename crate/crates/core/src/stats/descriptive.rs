use crate::scalar::Scalar;

pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().fold(T::zero(), |a, &x| a + x) / T::of_usize(xs.len()))
}

/// Sample standard deviation (n − 1 denominator); zero for a single value.
pub fn sample_std<T: Scalar>(xs: &[T]) -> Option<T> {
    let m = mean(xs)?;
    if xs.len() == 1 {
        return Some(T::zero());
    }
    let ss = xs.iter().fold(T::zero(), |a, &x| a + (x - m) * (x - m));
    Some((ss / T::of_usize(xs.len() - 1)).sqrt())
}

/// Pooled within-group standard deviation `sqrt(Σ(n_g−1)s_g² / Σ(n_g−1))`.
pub fn pooled_std<T: Scalar>(groups: &[Vec<T>]) -> Option<T> {
    let mut num = T::zero();
    let mut dof = 0usize;
    for g in groups.iter().filter(|g| g.len() > 1) {
        let s = sample_std(g)?;
        num = num + s * s * T::of_usize(g.len() - 1);
        dof += g.len() - 1;
    }
    (dof > 0).then(|| (num / T::of_usize(dof)).sqrt())
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
