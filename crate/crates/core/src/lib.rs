//! Topology-aware mapping of publish/subscribe communication on
//! CPU+FPGA systems-on-chip.
//!
//! * [`graph`]: the bipartite node/topic computation graph and its mappings.
//! * [`mapping`]: chooses SMT, HMT or gateway per topic.
//! * [`gateway`]: the gateway core's state machine.
//! * [`sim`]: discrete-event simulation of the platform, calibration and
//!   the chain-latency scenario.
//! * [`cli`]: the `topomap` command line.

pub mod cli;
pub mod gateway;
pub mod graph;
pub mod mapping;
pub mod sim;

pub use graph::{CommMapping, ComputationGraph, Domain, NodeId, NodeMapping, TopicId, TopicImpl};
pub use mapping::{map_communication, CostModelParams, Policy};
pub use sim::{simulate, PlatformModel, Scenario};
