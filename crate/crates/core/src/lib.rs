//! Process discovery with language-based regions.
//!
//! The pipeline wraps a log with unique start/end activities, derives a
//! causal graph, and solves one binary integer program per causal pair
//! whose feasible set is the set of regions of the log's prefix-closure.
//! A sequence-encoding filter can drop the constraints that stem from
//! infrequent behaviour before solving.

pub mod causal_graph;
pub mod discovery;
pub mod event_log;
pub mod ilp;
pub mod quality;
pub mod region;
pub mod sequence_filter;
pub mod workflow_net;

pub use causal_graph::{causal_oracle, CausalGraph};
pub use discovery::{discover, discover_with, Discovery, DiscoveryError, DiscoveryOptions};
pub use event_log::{
    parse_trace_log, parse_xes, serialize_trace_log, use_transform, Activity, Alphabet, EventLog,
    PrefixClosure, Trace, UseLog,
};
pub use ilp::{BinaryProgram, BinarySolver, BranchAndBound, BruteForce, Solution};
pub use quality::{escaping_edges_precision, evaluate, inject_noise, token_fitness, QualityReport};
pub use region::{ConstraintSystem, EncodingVector, IlpInstance, Objective, RegionCandidate};
pub use sequence_filter::{sef_bfs, KappaMax, SequenceEncodingGraph};
pub use workflow_net::{export_dot, export_pnml, import_pnml, PetriNet, WorkflowNet};
