//! Trace files and result files.

pub mod report;
pub mod trace_format;

pub use report::{
    render_report, write_report, ArmTable, Decision, DecompositionTable, Report, ReportFormat,
    ReportMeta, SweepTable, Table,
};
pub use trace_format::{
    config_hash, decode_trace, encode_trace, read_trace, write_trace, TraceDocument,
    TraceFileHeader, TRACE_FORMAT, TRACE_FORMAT_VERSION,
};
