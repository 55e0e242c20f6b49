//! Chain latency of the lane-keeping pipeline with topic `A` as a software
//! topic versus through a gateway.

use std::path::Path;

use topomap::graph::NodeId;
use topomap::mapping::{map_communication, Policy};
use topomap::sim::{run_chain_scenario, PlatformModel, ScenarioFile};

const CHAIN: [&str; 5] = [
    "compensation",
    "gaussian_blur",
    "lane_planner",
    "polyfit",
    "lane_control",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let file = ScenarioFile::parse(&std::fs::read_to_string(dir.join("chain_scenario.json"))?)?;
    let doc = file.load_graph(&dir)?;
    let nm = doc.node_mapping.expect("chain graph carries its node mapping");
    let platform = PlatformModel::default();
    let chain: Vec<NodeId> = CHAIN.iter().map(|&n| n.into()).collect();

    let mut means = Vec::new();
    for policy in [Policy::AlwaysSmt, Policy::MultiHwSub] {
        let (cm, _) = map_communication(&doc.graph, &nm, &platform.to_cost_params(), policy)?;
        println!("{policy}: topic A as {}", cm.get(&"A".into()).expect("A is mapped"));
        let scenario = file.resolve(&dir, Some(cm))?;
        let r = run_chain_scenario(&scenario, &platform, &chain)?;
        println!(
            "  chain over {} runs: mean {:.3} ms, stddev {:.4} ms",
            r.samples.len(),
            r.mean_us / 1e3,
            r.stddev_us / 1e3
        );
        means.push(r.mean_us);
    }
    println!("speedup {:.3}", means[0] / means[1]);
    Ok(())
}
