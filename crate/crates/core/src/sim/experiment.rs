//! The single-topic speedup experiment: one publisher, `k` hardware
//! subscribers and one software subscriber on topic `A`, run once over the
//! software topic and once through a gateway.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::simulate;
use super::platform::PlatformModel;
use super::scenario::{Scenario, WorkloadEntry};
use super::stats::compute_stats;
use super::SimError;
use crate::graph::{CommMapping, ComputationGraph, Domain, NodeId, NodeMapping, TopicId, TopicImpl, TopicInfo};

pub const GRID_SIZES: [u64; 4] = [10_000, 100_000, 1_000_000, 10_000_000];
pub const GRID_HW_SUBSCRIBERS: [usize; 3] = [2, 4, 8];

const PERIOD_US: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub publisher: Domain,
    pub hw_subscribers: usize,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: GridCell,
    pub smt_hw_us: f64,
    pub smt_sw_us: f64,
    pub gw_hw_us: f64,
    pub gw_sw_us: f64,
}

impl CellResult {
    /// SMT over gateway transfer time as seen by subscribers in `path`.
    pub fn speedup(&self, path: Domain) -> f64 {
        match path {
            Domain::Hardware => self.smt_hw_us / self.gw_hw_us,
            Domain::Software => self.smt_sw_us / self.gw_sw_us,
        }
    }
}

/// Both publisher domains over the given sizes and subscriber counts.
pub fn grid_cells(sizes: &[u64], hw_subscribers: &[usize]) -> Vec<GridCell> {
    let mut out = Vec::new();
    for publisher in [Domain::Hardware, Domain::Software] {
        for &k in hw_subscribers {
            for &size_bytes in sizes {
                out.push(GridCell {
                    publisher,
                    hw_subscribers: k,
                    size_bytes,
                });
            }
        }
    }
    out
}

impl GridCell {
    pub fn graph(&self) -> (ComputationGraph, NodeMapping) {
        let topic = TopicId::new("A");
        let publisher = NodeId::new("pub");
        let hw: Vec<NodeId> = (0..self.hw_subscribers)
            .map(|i| NodeId::new(format!("hw_sub_{i}")))
            .collect();
        let sw = NodeId::new("sw_sub");
        let mut nodes = vec![publisher.clone(), sw.clone()];
        nodes.extend(hw.iter().cloned());
        let subs: Vec<_> = hw
            .iter()
            .chain(std::iter::once(&sw))
            .map(|n| (topic.clone(), n.clone()))
            .collect();
        let graph = ComputationGraph::new(
            nodes,
            [(
                topic.clone(),
                TopicInfo {
                    message_size_bytes: self.size_bytes,
                    publish_rate_hz: 1.0,
                },
            )],
            vec![(publisher.clone(), topic)],
            subs,
        )
        .expect("grid graph is well formed");
        let mut domains: BTreeMap<NodeId, Domain> = hw.into_iter().map(|n| (n, Domain::Hardware)).collect();
        domains.insert(sw, Domain::Software);
        domains.insert(publisher, self.publisher);
        let mapping = NodeMapping::new(&graph, domains).expect("grid mapping is total");
        (graph, mapping)
    }

    pub fn scenario(&self, implementation: TopicImpl, messages: u32, seed: u64) -> Scenario {
        let (graph, node_mapping) = self.graph();
        let comm_mapping = CommMapping::uniform(&graph, implementation);
        Scenario {
            workload: vec![WorkloadEntry {
                publisher: NodeId::new("pub"),
                topic: TopicId::new("A"),
                count: messages,
                size_bytes: None,
                period_us: PERIOD_US,
                offset_us: 0.0,
            }],
            graph,
            node_mapping,
            comm_mapping,
            seed,
            compute_us: Default::default(),
            reactions: Vec::new(),
        }
    }
}

pub fn run_cell(platform: &PlatformModel, cell: GridCell, messages: u32, seed: u64) -> Result<CellResult, SimError> {
    let run = |imp| -> Result<(f64, f64), SimError> {
        let trace = simulate(&cell.scenario(imp, messages, seed), platform)?;
        let stats = compute_stats(&trace)?;
        let t = &stats.topics[&TopicId::new("A")];
        let missing = || SimError::IncompleteTrace("grid cell without deliveries".into());
        Ok((
            t.t_trans_hw_us.ok_or_else(missing)?,
            t.t_trans_sw_us.ok_or_else(missing)?,
        ))
    };
    let (smt_hw_us, smt_sw_us) = run(TopicImpl::Software)?;
    let (gw_hw_us, gw_sw_us) = run(TopicImpl::Gateway)?;
    Ok(CellResult {
        cell,
        smt_hw_us,
        smt_sw_us,
        gw_hw_us,
        gw_sw_us,
    })
}
