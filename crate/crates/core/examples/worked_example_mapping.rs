//! Maps the bundled eleven-node example graph under every policy.

use topomap::graph::parse_document;
use topomap::mapping::{MappingReport, Policy};
use topomap::sim::PlatformModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = parse_document(include_str!("../data/worked_example_graph.json"))?;
    let nm = doc.node_mapping.expect("example graph carries a node mapping");
    let params = PlatformModel::default().to_cost_params();
    for policy in [Policy::MultiHwSub, Policy::Cost, Policy::AlwaysSmt] {
        let report = MappingReport::build(&doc.graph, &nm, &params, policy)?;
        println!("== {policy}");
        print!("{}", report.to_table());
        println!();
    }
    Ok(())
}
