use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::graph::{self, CommMapping, ComputationGraph, GraphError, NodeId, NodeMapping, TopicId};
use crate::mapping::check_consistent;

/// Periodic publications of one node on one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEntry {
    pub publisher: NodeId,
    pub topic: TopicId,
    pub count: u32,
    /// Defaults to the topic's annotated message size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bytes: Option<u64>,
    pub period_us: f64,
    #[serde(default)]
    pub offset_us: f64,
}

/// On receiving a message on `on_topic`, `node` computes for its
/// `compute_us` and then publishes on `publish_topic`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub node: NodeId,
    pub on_topic: TopicId,
    pub publish_topic: TopicId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: ComputationGraph,
    pub node_mapping: NodeMapping,
    pub comm_mapping: CommMapping,
    pub workload: Vec<WorkloadEntry>,
    pub seed: u64,
    pub compute_us: BTreeMap<NodeId, f64>,
    pub reactions: Vec<Reaction>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.node_mapping.validate(&self.graph)?;
        self.comm_mapping.validate(&self.graph)?;
        check_consistent(&self.graph, &self.node_mapping, &self.comm_mapping)?;
        for w in &self.workload {
            self.graph.topic(&w.topic)?;
            if !self.graph.publishes(&w.publisher, &w.topic) {
                return Err(SimError::InvalidScenario(format!(
                    "workload publisher `{}` has no publish edge to `{}`",
                    w.publisher, w.topic
                )));
            }
            if w.size_bytes == Some(0) {
                return Err(SimError::InvalidScenario(format!(
                    "workload on `{}` has zero size",
                    w.topic
                )));
            }
            if !(w.period_us.is_finite() && w.period_us > 0.0 && w.offset_us >= 0.0) {
                return Err(SimError::InvalidScenario(format!(
                    "workload on `{}` needs a positive period and non-negative offset",
                    w.topic
                )));
            }
        }
        for (n, c) in &self.compute_us {
            if !self.graph.has_node(n) {
                return Err(GraphError::UnknownNode(n.clone()).into());
            }
            if !(c.is_finite() && *c >= 0.0) {
                return Err(SimError::InvalidScenario(format!("compute_us of `{n}` must be >= 0")));
            }
        }
        for r in &self.reactions {
            if !self.graph.subscribes(&r.on_topic, &r.node) || !self.graph.publishes(&r.node, &r.publish_topic) {
                return Err(SimError::InvalidScenario(format!(
                    "reaction of `{}` needs edges {} -> {} and {} -> {}",
                    r.node, r.on_topic, r.node, r.node, r.publish_topic
                )));
            }
        }
        Ok(())
    }

    pub fn compute_of(&self, n: &NodeId) -> f64 {
        self.compute_us.get(n).copied().unwrap_or(0.0)
    }

    pub fn message_size(&self, w: &WorkloadEntry) -> u64 {
        w.size_bytes
            .unwrap_or_else(|| self.graph.topic(&w.topic).map(|t| t.message_size_bytes).unwrap_or(1))
    }
}

/// Scenario file. `graph` is a path (relative to the scenario file) or an
/// inline graph document. `comm_mapping` may be left out when a mapping
/// policy supplies it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_mapping: Option<NodeMapping>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm_mapping: Option<CommMapping>,
    #[serde(default)]
    pub workload: Vec<WorkloadEntry>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub compute_us: BTreeMap<NodeId, f64>,
    #[serde(default)]
    pub reactions: Vec<Reaction>,
}

fn default_seed() -> u64 {
    42
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| graph::syntax_error(&e))
    }

    /// Loads the referenced graph. Relative paths resolve against `base_dir`.
    pub fn load_graph(&self, base_dir: &Path) -> Result<graph::GraphDocument, SimError> {
        match &self.graph {
            serde_json::Value::String(rel) => {
                let path = base_dir.join(rel);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| SimError::InvalidScenario(format!("cannot read graph {}: {e}", path.display())))?;
                Ok(graph::parse_document(&text)?)
            }
            inline => Ok(graph::document_from_value(inline.clone())?),
        }
    }

    /// Builds a scenario, taking the comm mapping from the file unless
    /// `comm_mapping` overrides it.
    pub fn resolve(&self, base_dir: &Path, comm_mapping: Option<CommMapping>) -> Result<Scenario, SimError> {
        let doc = self.load_graph(base_dir)?;
        let node_mapping = match (&self.node_mapping, doc.node_mapping) {
            (Some(m), _) => m.clone(),
            (None, Some(m)) => m,
            (None, None) => return Err(SimError::InvalidScenario("missing node_mapping".into())),
        };
        let comm_mapping = comm_mapping
            .or_else(|| self.comm_mapping.clone())
            .ok_or_else(|| SimError::InvalidScenario("missing comm_mapping".into()))?;
        let scenario = Scenario {
            graph: doc.graph,
            node_mapping,
            comm_mapping,
            workload: self.workload.clone(),
            seed: self.seed,
            compute_us: self.compute_us.clone(),
            reactions: self.reactions.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
