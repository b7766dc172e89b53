//! Line-delimited JSON trace files.
//!
//! Line 1 is a header, then one record per executed step, then a trailer
//! with the outcome. Encoding is canonical: equal traces produce equal bytes,
//! and floats use shortest round-trip formatting so decoding is exact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::SeedRecord;
use crate::trace::{
    chunk_count, ActionMatrix, ChunkRecord, ContextId, DirectionId, NoiseId, RolloutTrace, Source,
    SteeringTag, Termination,
};
use crate::Trace;

pub const TRACE_FORMAT: &str = "chunkscope-trace";
pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFileHeader {
    pub format: String,
    pub version: u32,
    pub stride: usize,
    pub horizon: usize,
    pub action_dim: usize,
    pub phase_offset: usize,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_record: Option<SeedRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    t: usize,
    action: Vec<f64>,
    chunk_index: usize,
    phase: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contact: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction_id: Option<DirectionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context_id: Option<ContextId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_id: Option<NoiseId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndRecord {
    success: bool,
    termination: Termination,
    episode_id: u64,
    valid: bool,
    steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(TraceFileHeader),
    Step(StepRecord),
    End(EndRecord),
}

/// A decoded trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDocument {
    pub trace: Trace,
    pub config_hash: Option<String>,
}

impl TraceDocument {
    /// Compare the stored hash with `expected`; mismatches are logged and
    /// returned as a warning.
    pub fn check_config_hash(&self, expected: &str) -> Option<String> {
        let warning = match &self.config_hash {
            Some(h) if h == expected => return None,
            Some(h) => format!(
                "trace episode {} was written under config {h}, expected {expected}",
                self.trace.episode_id
            ),
            None => format!(
                "trace episode {} carries no config hash",
                self.trace.episode_id
            ),
        };
        log::warn!("{warning}");
        Some(warning)
    }
}

/// SHA-256 of the canonical JSON encoding of a config.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn push_line(out: &mut String, line: &Line) -> Result<()> {
    out.push_str(&serde_json::to_string(line)?);
    out.push('\n');
    Ok(())
}

pub fn encode_trace(trace: &Trace, config_hash: Option<&str>) -> Result<String> {
    trace.validate()?;
    let mut out = String::new();
    push_line(
        &mut out,
        &Line::Header(TraceFileHeader {
            format: TRACE_FORMAT.into(),
            version: TRACE_FORMAT_VERSION,
            stride: trace.stride,
            horizon: trace.horizon,
            action_dim: trace.action_dim(),
            phase_offset: trace.phase_offset,
            source: trace.source,
            seed_record: trace.seed_record,
            config_hash: config_hash.map(str::to_owned),
        }),
    )?;
    for t in 0..trace.len() {
        let c = trace.chunk_of(t);
        let record = &trace.chunk_records[c];
        let first_of_chunk = t == 0 || trace.is_boundary(t);
        push_line(
            &mut out,
            &Line::Step(StepRecord {
                t,
                action: trace.executed.row(t).to_vec(),
                chunk_index: c,
                phase: trace.phase(t),
                contact: trace.contact_mask.as_ref().map(|m| m[t]),
                alpha: record.steering.map(|s| s.alpha),
                direction_id: record.steering.map(|s| s.direction_id),
                context_id: record.context_id.filter(|_| first_of_chunk),
                noise_id: record.noise_id.filter(|_| first_of_chunk),
            }),
        )?;
    }
    push_line(
        &mut out,
        &Line::End(EndRecord {
            success: trace.success,
            termination: trace.termination,
            episode_id: trace.episode_id,
            valid: trace.valid,
            steps: trace.len(),
        }),
    )?;
    Ok(out)
}

pub fn decode_trace(text: &str) -> Result<TraceDocument> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let header = match serde_json::from_str::<Line>(first) {
        Ok(Line::Header(h)) => h,
        Ok(_) => return Err(Error::parse(1, "first record must be the header")),
        Err(e) => return Err(Error::parse(1, e.to_string())),
    };
    if header.format != TRACE_FORMAT {
        return Err(Error::parse(
            1,
            format!("unknown format `{}`", header.format),
        ));
    }
    if header.version != TRACE_FORMAT_VERSION {
        return Err(Error::parse(
            1,
            format!(
                "unsupported version {} (expected {TRACE_FORMAT_VERSION})",
                header.version
            ),
        ));
    }
    if header.stride == 0 || header.stride > header.horizon || header.phase_offset >= header.stride
    {
        return Err(Error::parse(
            1,
            "header needs 1 <= K <= H and phase offset < K",
        ));
    }
    if header.action_dim == 0 {
        return Err(Error::parse(1, "action_dim must be >= 1"));
    }

    let mut executed = ActionMatrix::empty(header.action_dim);
    let mut contact: Vec<Option<bool>> = Vec::new();
    let mut records: Vec<ChunkRecord> = Vec::new();
    let mut end = None;
    let mut last_line = 1;
    for (n, raw) in lines {
        last_line = n;
        if end.is_some() {
            if raw.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(n, "content after the end record"));
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::parse(n, e.to_string()))?;
        match line {
            Line::Header(_) => return Err(Error::parse(n, "duplicate header")),
            Line::End(e) => end = Some((n, e)),
            Line::Step(s) => {
                let t = executed.rows();
                if s.t != t {
                    return Err(Error::parse(n, format!("expected t = {t}, found {}", s.t)));
                }
                if s.action.len() != header.action_dim {
                    return Err(Error::parse(
                        n,
                        format!(
                            "action has {} entries, header says {}",
                            s.action.len(),
                            header.action_dim
                        ),
                    ));
                }
                if s.action.iter().any(|a| !a.is_finite())
                    || s.alpha.is_some_and(|a| !a.is_finite())
                {
                    return Err(Error::parse(n, "non-finite value"));
                }
                let chunk = (t + header.phase_offset) / header.stride;
                let phase = (t + header.phase_offset) % header.stride;
                if s.chunk_index != chunk || s.phase != phase {
                    return Err(Error::parse(
                        n,
                        format!("chunk/phase ({}, {}) disagree with t = {t} (expected ({chunk}, {phase}))", s.chunk_index, s.phase),
                    ));
                }
                let steering = match (s.alpha, s.direction_id) {
                    (Some(alpha), Some(direction_id)) => Some(SteeringTag {
                        alpha,
                        direction_id,
                    }),
                    (None, None) => None,
                    _ => {
                        return Err(Error::parse(
                            n,
                            "alpha and direction_id must appear together",
                        ))
                    }
                };
                if chunk == records.len() {
                    records.push(ChunkRecord {
                        chunk_index: chunk,
                        context_id: s.context_id,
                        noise_id: s.noise_id,
                        steering,
                    });
                } else if s.context_id.is_some() || s.noise_id.is_some() {
                    return Err(Error::parse(
                        n,
                        "context_id/noise_id only belong on a chunk's first step",
                    ));
                } else if records[chunk].steering != steering {
                    return Err(Error::parse(n, "steering changes within a chunk"));
                }
                executed
                    .push_row(&s.action)
                    .map_err(|e| Error::parse(n, e.to_string()))?;
                contact.push(s.contact);
            }
        }
    }
    let (end_line, end) =
        end.ok_or_else(|| Error::parse(last_line + 1, "truncated file: missing end record"))?;
    if end.steps != executed.rows() {
        return Err(Error::parse(
            end_line,
            format!(
                "end record says {} steps, found {}",
                end.steps,
                executed.rows()
            ),
        ));
    }
    let contact_mask = if contact.iter().all(Option::is_some) && !contact.is_empty() {
        Some(contact.into_iter().map(|c| c.unwrap_or_default()).collect())
    } else if contact.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::parse(
            end_line,
            "contact given on some steps but not all",
        ));
    };
    debug_assert_eq!(
        records.len(),
        chunk_count(executed.rows(), header.stride, header.phase_offset)
    );
    let trace = RolloutTrace {
        executed,
        stride: header.stride,
        horizon: header.horizon,
        phase_offset: header.phase_offset,
        chunk_records: records,
        contact_mask,
        success: end.success,
        termination: end.termination,
        episode_id: end.episode_id,
        seed_record: header.seed_record,
        source: header.source,
        valid: end.valid,
    };
    trace
        .validate()
        .map_err(|e| Error::parse(end_line, e.to_string()))?;
    Ok(TraceDocument {
        trace,
        config_hash: header.config_hash,
    })
}

pub fn write_trace(trace: &Trace, config_hash: Option<&str>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_trace(trace, config_hash)?)?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceDocument> {
    decode_trace(&std::fs::read_to_string(path)?)
}
