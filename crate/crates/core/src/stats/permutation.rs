use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{purpose, stream};
use crate::scalar::Scalar;

/// Label assignments up to which the test enumerates exactly.
pub const EXHAUSTIVE_LIMIT: u128 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    TwoSided,
    /// Alternative: `mean(b) > mean(a)`.
    Greater,
}

impl std::fmt::Display for Sidedness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sidedness::TwoSided => "two_sided",
            Sidedness::Greater => "greater",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    /// Exhaustive when `C(n_a + n_b, n_a) <= EXHAUSTIVE_LIMIT`, Monte Carlo
    /// otherwise.
    Auto,
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult<T> {
    /// `mean(b) − mean(a)`.
    pub observed_delta: T,
    pub p_value: f64,
    /// Label assignments evaluated (all of them in exhaustive mode).
    pub n_permutations: u64,
    pub sidedness: Sidedness,
    pub exhaustive: bool,
    /// All pooled values identical; `p_value` is 1.
    pub degenerate: bool,
}

/// Two-sample permutation test on the difference of means.
///
/// Monte Carlo p-values use the add-one correction
/// `(1 + #{as or more extreme}) / (n_perm + 1)`, so they are never zero.
#[derive(Debug, Clone, Copy)]
pub struct PermutationTest {
    n_permutations: u64,
    sidedness: Sidedness,
    mode: PermutationMode,
    seed: u64,
}

impl PermutationTest {
    pub fn new(n_permutations: u64) -> Self {
        Self {
            n_permutations,
            sidedness: Sidedness::Greater,
            mode: PermutationMode::Auto,
            seed: 0,
        }
    }

    pub fn sidedness(mut self, sidedness: Sidedness) -> Self {
        self.sidedness = sidedness;
        self
    }

    pub fn mode(mut self, mode: PermutationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn run<T: Scalar>(&self, a: &[T], b: &[T]) -> Result<PermutationResult<T>> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyInput(
                "permutation test needs two nonempty groups".into(),
            ));
        }
        if self.n_permutations == 0 {
            return Err(Error::invalid("n_permutations must be >= 1"));
        }
        let pooled: Vec<T> = a.iter().chain(b).copied().collect();
        let total = pooled.iter().fold(T::zero(), |s, &x| s + x);
        let (na, nb) = (T::of_usize(a.len()), T::of_usize(b.len()));
        let stat = |sum_a: T| (total - sum_a) / nb - sum_a / na;
        let observed = stat(a.iter().fold(T::zero(), |s, &x| s + x));

        let first = pooled[0];
        if pooled.iter().all(|&x| x == first) {
            return Ok(PermutationResult {
                observed_delta: observed,
                p_value: 1.0,
                n_permutations: 0,
                sidedness: self.sidedness,
                exhaustive: false,
                degenerate: true,
            });
        }

        let scale = pooled.iter().fold(T::one(), |m, &x| m.max(x.abs()));
        let tol = T::epsilon() * T::of(1024.0) * scale;
        let extreme = |s: T| match self.sidedness {
            Sidedness::Greater => s >= observed - tol,
            Sidedness::TwoSided => s.abs() >= observed.abs() - tol,
        };

        let assignments = binomial(pooled.len() as u64, a.len() as u64);
        let exhaustive = match self.mode {
            PermutationMode::Exhaustive => true,
            PermutationMode::MonteCarlo => false,
            PermutationMode::Auto => assignments <= EXHAUSTIVE_LIMIT,
        };

        if exhaustive {
            if assignments > 50 * EXHAUSTIVE_LIMIT {
                return Err(Error::invalid(format!(
                    "{assignments} label assignments are too many to enumerate"
                )));
            }
            let mut count = 0u64;
            let mut n = 0u64;
            for_each_combination(pooled.len(), a.len(), |idx| {
                let sum_a = idx.iter().fold(T::zero(), |s, &i| s + pooled[i]);
                n += 1;
                if extreme(stat(sum_a)) {
                    count += 1;
                }
            });
            return Ok(PermutationResult {
                observed_delta: observed,
                p_value: count as f64 / n as f64,
                n_permutations: n,
                sidedness: self.sidedness,
                exhaustive: true,
                degenerate: false,
            });
        }

        let mut rng = stream(self.seed, &[purpose::PERMUTATION]);
        let mut work = pooled;
        let mut count = 0u64;
        for _ in 0..self.n_permutations {
            let (chosen, _) = work.partial_shuffle(&mut rng, a.len());
            let sum_a = chosen.iter().fold(T::zero(), |s, &x| s + x);
            if extreme(stat(sum_a)) {
                count += 1;
            }
        }
        Ok(PermutationResult {
            observed_delta: observed,
            p_value: (1 + count) as f64 / (self.n_permutations + 1) as f64,
            n_permutations: self.n_permutations,
            sidedness: self.sidedness,
            exhaustive: false,
            degenerate: false,
        })
    }
}

/// Convenience wrapper with automatic mode selection.
pub fn permutation_test<T: Scalar>(
    a: &[T],
    b: &[T],
    n_permutations: u64,
    sidedness: Sidedness,
    seed: u64,
) -> Result<PermutationResult<T>> {
    PermutationTest::new(n_permutations)
        .sidedness(sidedness)
        .seed(seed)
        .run(a, b)
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
