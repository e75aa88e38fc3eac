//! Shared inputs for the benchmarks.

use regionminer_core::event_log::{parse_trace_log, EventLog};
use regionminer_core::quality::{reference_model, simulate};

pub const RUNNING_EXAMPLE: &str =
    "10;a b d e g\n12;a c d e f d b e g\n9;a d c e h\n11;a b d e f c d e g\n13;a d c e f b d e h";

pub fn running_example() -> EventLog {
    parse_trace_log(RUNNING_EXAMPLE).expect("fixture parses")
}

/// `traces` runs of the six-activity reference model.
pub fn reference_log(traces: usize, seed: u64) -> EventLog {
    simulate(&reference_model(), traces, seed, 100)
}
