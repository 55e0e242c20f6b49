//! Eight hardware subscribers reading one software-topic message share the
//! memory port; a gateway streams the same message once.

use std::collections::BTreeMap;

use topomap::graph::{CommMapping, ComputationGraph, Domain, NodeId, NodeMapping, TopicImpl, TopicInfo};
use topomap::sim::{compute_stats, simulate, PlatformModel, Scenario, TraceKind, WorkloadEntry};

fn scenario(kind: TopicImpl) -> Result<Scenario, Box<dyn std::error::Error>> {
    let subs: Vec<NodeId> = (0..8).map(|i| NodeId::new(format!("hw{i}"))).collect();
    let mut nodes = subs.clone();
    nodes.push("src".into());
    nodes.push("sw".into());
    let graph = ComputationGraph::new(
        nodes,
        [(
            "img".into(),
            TopicInfo {
                message_size_bytes: 1_000_000,
                publish_rate_hz: 30.0,
            },
        )],
        [("src".into(), "img".into())],
        subs.iter()
            .chain([&NodeId::new("sw")])
            .map(|n| ("img".into(), n.clone())),
    )?;
    let mut domains: BTreeMap<NodeId, Domain> = subs.into_iter().map(|n| (n, Domain::Hardware)).collect();
    domains.insert("src".into(), Domain::Hardware);
    domains.insert("sw".into(), Domain::Software);
    Ok(Scenario {
        node_mapping: NodeMapping::new(&graph, domains)?,
        comm_mapping: CommMapping::uniform(&graph, kind),
        graph,
        workload: vec![WorkloadEntry {
            publisher: "src".into(),
            topic: "img".into(),
            count: 1,
            size_bytes: None,
            period_us: 33_333.0,
            offset_us: 0.0,
        }],
        seed: 42,
        compute_us: BTreeMap::new(),
        reactions: Vec::new(),
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let platform = PlatformModel::default();
    for kind in [TopicImpl::Software, TopicImpl::Gateway] {
        let trace = simulate(&scenario(kind)?, &platform)?;
        let stats = compute_stats(&trace)?;
        let t = &stats.topics[&"img".into()];
        println!(
            "{kind}: {} MEMIF transfers, slowest HW delivery {:.1} us",
            trace.count(TraceKind::MemifXferStart),
            t.t_trans_hw_us.unwrap_or(0.0)
        );
        for seg in &trace.memif_segments {
            println!(
                "    {:>10.3} .. {:>10.3} us: {} active at {:.0} MB/s each",
                seg.start_ns as f64 / 1e3,
                seg.end_ns as f64 / 1e3,
                seg.active,
                seg.per_transfer_bytes_per_s / 1e6
            );
        }
    }
    Ok(())
}
