//! Discrete-event simulator of the SoC communication paths.
//!
//! Virtual time is kept in integer nanoseconds. The shared memory port
//! (MEMIF) is an egalitarian processor-sharing resource; hardware topics are
//! contention-free per-subscriber streams; software topics go through the
//! DDS layer and, for hardware subscribers, through their delegate threads.
//!
//! Absolute latencies are only meaningful relative to a calibrated
//! [`PlatformModel`]; the measured reference data consists of speedups.

mod calibrate;
mod chain;
mod engine;
mod experiment;
mod platform;
mod scenario;
mod stats;
mod trace;

pub use calibrate::{calibrate, CalibrationOptions, CalibrationReport, Param, Target, TargetResidual, TargetSet};
pub use chain::{chain_links, run_chain_scenario, ChainResult};
pub use engine::simulate;
pub use experiment::{grid_cells, run_cell, CellResult, GridCell, GRID_HW_SUBSCRIBERS, GRID_SIZES};
pub use platform::PlatformModel;
pub use scenario::{Reaction, Scenario, ScenarioFile, WorkloadEntry};
pub use stats::{compute_stats, SubscriberStats, TopicSpeedup, TopicStats, TransferStats};
pub use trace::{MemifSegment, MessageRecord, SimTrace, TraceEvent, TraceKind};

use thiserror::Error;

use crate::gateway::ProtocolError;
use crate::graph::GraphError;
use crate::mapping::MappingError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid platform model: {0}")]
    InvalidPlatform(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),
    #[error("chain is disconnected between `{from}` and `{to}`")]
    DisconnectedChain { from: String, to: String },
    #[error("calibration needs at least one target")]
    NoTargets,
}

pub(crate) fn us_to_ns(us: f64) -> u64 {
    (us * 1000.0).round().max(0.0) as u64
}

pub(crate) fn ns_to_us(ns: u64) -> f64 {
    ns as f64 / 1000.0
}
