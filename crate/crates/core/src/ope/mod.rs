//! Off-policy evaluation of bandit policies on logged interaction data.

mod ips;
mod log;
mod segment;
mod synth;

pub use ips::{
    ips_evaluate, ips_evaluate_with, IpsEstimate, IpsOptions, IpsSummaryRow, IpsTrialRow, PolicyFactory, UpdateRule,
};
pub use log::{
    default_schema, ingest_log, ingest_reader, write_log, IngestReport, LoggedEvent, RejectedRow, SchemaMapping,
    MAX_BAD_ROW_FRACTION,
};
pub use segment::{chunk_intervals, segment, ReplaySegment, Segmentation, SkippedSegment, INTERVAL_LEN};
pub use synth::{synth_log, synth_log_from_rates, SynthParams, SyntheticLog};
