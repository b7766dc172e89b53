//! Chunked trajectory types: action matrices, generated chunks and executed
//! rollout traces with their chunk/boundary bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedRecord;
use crate::scalar::Scalar;

/// Row-major matrix of actions: one row per timestep, one column per action
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> ActionMatrix<T> {
    pub fn from_flat(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::invalid("action dimension must be at least 1"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("action matrix".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), cols, data)
    }

    /// Single-dimension trajectory.
    pub fn from_scalars(values: &[T]) -> Result<Self> {
        Self::from_flat(values.len(), 1, values.to_vec())
    }

    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn push_row(&mut self, row: &[T]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("action row".into()));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn truncated(&self, rows: usize) -> Self {
        let rows = rows.min(self.rows);
        Self {
            rows,
            cols: self.cols,
            data: self.data[..rows * self.cols].to_vec(),
        }
    }

    /// Apply `f` to every entry.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_flat(
            self.rows,
            self.cols,
            self.data.iter().map(|&x| f(x)).collect(),
        )
    }

    /// Convert to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<ActionMatrix<U>> {
        ActionMatrix::from_flat(
            self.rows,
            self.cols,
            self.data.iter().map(|x| U::of(x.to_f64_lossy())).collect(),
        )
    }
}

macro_rules! id_newtype {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_newtype!(
    /// Identifies a frozen observation context.
    ContextId
);
id_newtype!(
    /// Identifies a latent noise draw.
    NoiseId
);
id_newtype!(
    /// Identifies a steering direction.
    DirectionId
);

/// A block of `H` generated actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk<T> {
    pub actions: ActionMatrix<T>,
    pub chunk_index: usize,
    pub context_id: ContextId,
    pub noise_id: NoiseId,
}

impl<T: Scalar> ActionChunk<T> {
    pub fn new(
        actions: ActionMatrix<T>,
        chunk_index: usize,
        context_id: ContextId,
        noise_id: NoiseId,
    ) -> Result<Self> {
        if actions.rows() < 2 {
            return Err(Error::invalid("a chunk needs at least two actions"));
        }
        Ok(Self {
            actions,
            chunk_index,
            context_id,
            noise_id,
        })
    }

    pub fn horizon(&self) -> usize {
        self.actions.rows()
    }
}

/// Steering applied to the noise of one chunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringTag {
    pub alpha: f64,
    pub direction_id: DirectionId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk_index: usize,
    pub context_id: Option<ContextId>,
    pub noise_id: Option<NoiseId>,
    pub steering: Option<SteeringTag>,
}

impl ChunkRecord {
    pub fn bare(chunk_index: usize) -> Self {
        Self {
            chunk_index,
            context_id: None,
            noise_id: None,
            steering: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Testbed,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Goal,
    Drop,
    Timeout,
    Aborted,
    Unknown,
}

/// Executed action trajectory of one episode.
///
/// Chunk boundaries sit at every `t` with `(t + phase_offset) % stride == 0`;
/// for testbed traces the offset is zero, so boundaries are `0, K, 2K, ...`
/// and phase 0 is the first action of a freshly generated chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace<T> {
    pub executed: ActionMatrix<T>,
    pub stride: usize,
    pub horizon: usize,
    pub phase_offset: usize,
    pub chunk_records: Vec<ChunkRecord>,
    pub contact_mask: Option<Vec<bool>>,
    pub success: bool,
    pub termination: Termination,
    pub episode_id: u64,
    pub seed_record: Option<SeedRecord>,
    pub source: Source,
    /// False when the rollout was aborted (e.g. the policy failed to
    /// produce a chunk).
    pub valid: bool,
}

impl<T: Scalar> RolloutTrace<T> {
    /// Minimal trace with one bare chunk record per chunk and no contact mask.
    pub fn from_actions(
        executed: ActionMatrix<T>,
        stride: usize,
        horizon: usize,
        success: bool,
    ) -> Result<Self> {
        let n = chunk_count(executed.rows(), stride, 0);
        let trace = Self {
            executed,
            stride,
            horizon,
            phase_offset: 0,
            chunk_records: (0..n).map(ChunkRecord::bare).collect(),
            contact_mask: None,
            success,
            termination: Termination::Unknown,
            episode_id: 0,
            seed_record: None,
            source: Source::External,
            valid: true,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn with_contact_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.contact_mask = Some(mask);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.executed.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.executed.rows() == 0
    }

    pub fn action_dim(&self) -> usize {
        self.executed.cols()
    }

    pub fn phase(&self, t: usize) -> usize {
        (t + self.phase_offset) % self.stride
    }

    pub fn is_boundary(&self, t: usize) -> bool {
        self.phase(t) == 0
    }

    /// Index into `chunk_records` of the chunk that executed step `t`.
    pub fn chunk_of(&self, t: usize) -> usize {
        (t + self.phase_offset) / self.stride
    }

    pub fn boundaries(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&t| self.is_boundary(t))
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.horizon {
            return Err(Error::invalid(format!(
                "stride {} must satisfy 1 <= K <= H = {}",
                self.stride, self.horizon
            )));
        }
        if self.phase_offset >= self.stride {
            return Err(Error::invalid(
                "phase offset must be smaller than the stride",
            ));
        }
        if self.len() < self.stride {
            return Err(Error::invalid(format!(
                "trace length {} shorter than stride {}",
                self.len(),
                self.stride
            )));
        }
        if let Some(mask) = &self.contact_mask {
            if mask.len() != self.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.len(),
                    got: mask.len(),
                });
            }
        }
        let n = chunk_count(self.len(), self.stride, self.phase_offset);
        if self.chunk_records.len() != n {
            return Err(Error::invalid(format!(
                "{} chunk records for {} executed chunks",
                self.chunk_records.len(),
                n
            )));
        }
        if let Some((i, _)) = self
            .chunk_records
            .iter()
            .enumerate()
            .find(|(i, r)| r.chunk_index != *i)
        {
            return Err(Error::invalid(format!("chunk record {i} out of order")));
        }
        Ok(())
    }

    /// Truncate to the first `len` steps, dropping chunk records that no
    /// longer own any step.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        let mut out = self.clone();
        out.executed = self.executed.truncated(len);
        out.contact_mask = self.contact_mask.as_ref().map(|m| m[..len].to_vec());
        out.chunk_records
            .truncate(chunk_count(len, self.stride, self.phase_offset));
        out
    }

    pub fn cast<U: Scalar>(&self) -> Result<RolloutTrace<U>> {
        Ok(RolloutTrace {
            executed: self.executed.cast()?,
            stride: self.stride,
            horizon: self.horizon,
            phase_offset: self.phase_offset,
            chunk_records: self.chunk_records.clone(),
            contact_mask: self.contact_mask.clone(),
            success: self.success,
            termination: self.termination,
            episode_id: self.episode_id,
            seed_record: self.seed_record,
            source: self.source,
            valid: self.valid,
        })
    }
}

/// Number of chunks that own at least one of `len` steps.
pub fn chunk_count(len: usize, stride: usize, phase_offset: usize) -> usize {
    if len == 0 || stride == 0 {
        0
    } else {
        (len - 1 + phase_offset) / stride + 1
    }
}
