//! Computation graph of nodes and topics joined by publish/subscribe edges.
//!
//! The graph is bipartite: publish edges run node → topic, subscribe edges
//! run topic → node. Topics carry workload annotations (message size and
//! publish rate) because the software/gateway decision depends on them.
//!
//! All collections are ordered by id so iteration is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(String);

macro_rules! impl_id {
    ($ty:ident) => {
        impl $ty {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

impl_id!(NodeId);
impl_id!(TopicId);

/// Where a node executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "HW")]
    Hardware,
    #[serde(rename = "SW")]
    Software,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Hardware => "HW",
            Domain::Software => "SW",
        })
    }
}

/// How a topic is realized on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TopicImpl {
    /// Software-mapped topic: buffers in main memory, served by the software DDS.
    #[serde(rename = "SMT")]
    Software,
    /// Hardware-mapped topic: dedicated streaming channels in the fabric.
    #[serde(rename = "HMT")]
    Hardware,
    /// An SMT/HMT pair synchronized by a gateway core.
    #[serde(rename = "GW")]
    Gateway,
}

impl fmt::Display for TopicImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopicImpl::Software => "SMT",
            TopicImpl::Hardware => "HMT",
            TopicImpl::Gateway => "GW",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicInfo {
    pub message_size_bytes: u64,
    pub publish_rate_hz: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("empty identifier in {0}")]
    EmptyId(&'static str),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("{kind} edge references undeclared {missing} `{id}`")]
    UnknownEndpoint {
        kind: &'static str,
        missing: &'static str,
        id: String,
    },
    #[error("topic `{topic}`: {field} must be positive")]
    NonPositive { topic: String, field: &'static str },
    #[error("unknown topic `{0}`")]
    UnknownTopic(TopicId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("node mapping is missing node `{0}`")]
    UnmappedNode(NodeId),
    #[error("communication mapping is missing topic `{0}`")]
    UnmappedTopic(TopicId),
}

/// Non-fatal structural findings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphWarning {
    NoPublishers(TopicId),
    NoSubscribers(TopicId),
}

impl fmt::Display for GraphWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphWarning::NoPublishers(t) => write!(f, "topic `{t}` has no publishers"),
            GraphWarning::NoSubscribers(t) => write!(f, "topic `{t}` has no subscribers"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComputationGraph {
    nodes: BTreeSet<NodeId>,
    topics: BTreeMap<TopicId, TopicInfo>,
    pub_edges: BTreeSet<(NodeId, TopicId)>,
    sub_edges: BTreeSet<(TopicId, NodeId)>,
}

impl ComputationGraph {
    /// Builds a graph, enforcing every structural invariant.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        topics: impl IntoIterator<Item = (TopicId, TopicInfo)>,
        pub_edges: impl IntoIterator<Item = (NodeId, TopicId)>,
        sub_edges: impl IntoIterator<Item = (TopicId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let mut g = ComputationGraph::default();
        for n in nodes {
            if n.as_str().is_empty() {
                return Err(GraphError::EmptyId("nodes"));
            }
            if !g.nodes.insert(n.clone()) {
                return Err(GraphError::DuplicateId(n.0));
            }
        }
        for (t, info) in topics {
            if t.as_str().is_empty() {
                return Err(GraphError::EmptyId("topics"));
            }
            if g.nodes.contains(&NodeId(t.0.clone())) || g.topics.contains_key(&t) {
                return Err(GraphError::DuplicateId(t.0));
            }
            if info.message_size_bytes == 0 {
                return Err(GraphError::NonPositive {
                    topic: t.0,
                    field: "message_size_bytes",
                });
            }
            if !(info.publish_rate_hz.is_finite() && info.publish_rate_hz > 0.0) {
                return Err(GraphError::NonPositive {
                    topic: t.0,
                    field: "publish_rate_hz",
                });
            }
            g.topics.insert(t, info);
        }
        for (n, t) in pub_edges {
            g.check_endpoints("publish", &n, &t)?;
            if !g.pub_edges.insert((n.clone(), t.clone())) {
                return Err(GraphError::DuplicateEdge(n.0, t.0));
            }
        }
        for (t, n) in sub_edges {
            g.check_endpoints("subscribe", &n, &t)?;
            if !g.sub_edges.insert((t.clone(), n.clone())) {
                return Err(GraphError::DuplicateEdge(t.0, n.0));
            }
        }
        Ok(g)
    }

    fn check_endpoints(&self, kind: &'static str, n: &NodeId, t: &TopicId) -> Result<(), GraphError> {
        if !self.nodes.contains(n) {
            return Err(GraphError::UnknownEndpoint {
                kind,
                missing: "node",
                id: n.0.clone(),
            });
        }
        if !self.topics.contains_key(t) {
            return Err(GraphError::UnknownEndpoint {
                kind,
                missing: "topic",
                id: t.0.clone(),
            });
        }
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn topics(&self) -> impl Iterator<Item = (&TopicId, &TopicInfo)> {
        self.topics.iter()
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &TopicId> {
        self.topics.keys()
    }

    pub fn topic(&self, t: &TopicId) -> Result<&TopicInfo, GraphError> {
        self.topics.get(t).ok_or_else(|| GraphError::UnknownTopic(t.clone()))
    }

    pub fn has_node(&self, n: &NodeId) -> bool {
        self.nodes.contains(n)
    }

    pub fn pub_edges(&self) -> &BTreeSet<(NodeId, TopicId)> {
        &self.pub_edges
    }

    pub fn sub_edges(&self) -> &BTreeSet<(TopicId, NodeId)> {
        &self.sub_edges
    }

    /// Publish edges into `t`.
    pub fn pub_edges_of(&self, t: &TopicId) -> Result<BTreeSet<(NodeId, TopicId)>, GraphError> {
        self.topic(t)?;
        Ok(self.pub_edges.iter().filter(|(_, y)| y == t).cloned().collect())
    }

    /// Subscribe edges out of `t`.
    pub fn sub_edges_of(&self, t: &TopicId) -> Result<BTreeSet<(TopicId, NodeId)>, GraphError> {
        self.topic(t)?;
        Ok(self.sub_edges.iter().filter(|(x, _)| x == t).cloned().collect())
    }

    pub fn publishers(&self, t: &TopicId) -> Result<Vec<NodeId>, GraphError> {
        Ok(self.pub_edges_of(t)?.into_iter().map(|(n, _)| n).collect())
    }

    pub fn subscribers(&self, t: &TopicId) -> Result<Vec<NodeId>, GraphError> {
        Ok(self.sub_edges_of(t)?.into_iter().map(|(_, n)| n).collect())
    }

    pub fn publishes(&self, n: &NodeId, t: &TopicId) -> bool {
        self.pub_edges.contains(&(n.clone(), t.clone()))
    }

    pub fn subscribes(&self, t: &TopicId, n: &NodeId) -> bool {
        self.sub_edges.contains(&(t.clone(), n.clone()))
    }

    /// Dangling topics. These are accepted; the mapping conditions hold vacuously.
    pub fn warnings(&self) -> Vec<GraphWarning> {
        let mut out = Vec::new();
        for t in self.topics.keys() {
            if !self.pub_edges.iter().any(|(_, y)| y == t) {
                out.push(GraphWarning::NoPublishers(t.clone()));
            }
            if !self.sub_edges.iter().any(|(x, _)| x == t) {
                out.push(GraphWarning::NoSubscribers(t.clone()));
            }
        }
        out
    }
}

/// Total assignment of nodes to hardware or software.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeMapping(BTreeMap<NodeId, Domain>);

impl NodeMapping {
    /// Validates that `assignment` covers exactly the graph's nodes.
    pub fn new(graph: &ComputationGraph, assignment: BTreeMap<NodeId, Domain>) -> Result<Self, GraphError> {
        let mapping = NodeMapping(assignment);
        mapping.validate(graph)?;
        Ok(mapping)
    }

    /// Every node mapped to `domain`.
    pub fn uniform(graph: &ComputationGraph, domain: Domain) -> Self {
        NodeMapping(graph.nodes.iter().map(|n| (n.clone(), domain)).collect())
    }

    pub fn validate(&self, graph: &ComputationGraph) -> Result<(), GraphError> {
        for n in &graph.nodes {
            if !self.0.contains_key(n) {
                return Err(GraphError::UnmappedNode(n.clone()));
            }
        }
        if let Some(extra) = self.0.keys().find(|n| !graph.nodes.contains(*n)) {
            return Err(GraphError::UnknownNode(extra.clone()));
        }
        Ok(())
    }

    pub fn domain(&self, n: &NodeId) -> Option<Domain> {
        self.0.get(n).copied()
    }

    pub fn is_hw(&self, n: &NodeId) -> bool {
        self.domain(n) == Some(Domain::Hardware)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Domain)> {
        self.0.iter()
    }

    pub fn nodes_in(&self, domain: Domain) -> BTreeSet<NodeId> {
        self.0
            .iter()
            .filter(|(_, d)| **d == domain)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

/// Total assignment of topics to SMT, HMT, or gateway.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommMapping(BTreeMap<TopicId, TopicImpl>);

impl CommMapping {
    pub fn new(graph: &ComputationGraph, assignment: BTreeMap<TopicId, TopicImpl>) -> Result<Self, GraphError> {
        let mapping = CommMapping(assignment);
        mapping.validate(graph)?;
        Ok(mapping)
    }

    pub fn uniform(graph: &ComputationGraph, kind: TopicImpl) -> Self {
        CommMapping(graph.topics.keys().map(|t| (t.clone(), kind)).collect())
    }

    pub fn validate(&self, graph: &ComputationGraph) -> Result<(), GraphError> {
        for t in graph.topics.keys() {
            if !self.0.contains_key(t) {
                return Err(GraphError::UnmappedTopic(t.clone()));
            }
        }
        if let Some(extra) = self.0.keys().find(|t| !graph.topics.contains_key(*t)) {
            return Err(GraphError::UnknownTopic(extra.clone()));
        }
        Ok(())
    }

    pub fn get(&self, t: &TopicId) -> Option<TopicImpl> {
        self.0.get(t).copied()
    }

    pub fn set(&mut self, t: TopicId, kind: TopicImpl) {
        self.0.insert(t, kind);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TopicId, &TopicImpl)> {
        self.0.iter()
    }

    pub fn topics_of(&self, kind: TopicImpl) -> BTreeSet<TopicId> {
        self.0
            .iter()
            .filter(|(_, k)| **k == kind)
            .map(|(t, _)| t.clone())
            .collect()
    }
}

// Wire format.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicDoc {
    id: String,
    message_size_bytes: i64,
    publish_rate_hz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PubDoc {
    node: String,
    topic: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubDoc {
    topic: String,
    node: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    topics: Vec<TopicDoc>,
    publishes: Vec<PubDoc>,
    subscribes: Vec<SubDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_mapping: Option<BTreeMap<String, Domain>>,
}

/// A parsed graph document: the graph plus its optional node mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDocument {
    pub graph: ComputationGraph,
    pub node_mapping: Option<NodeMapping>,
}

pub(crate) fn syntax_error(e: &serde_json::Error) -> GraphError {
    GraphError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses a graph document, including its optional `node_mapping`.
pub fn parse_document(text: &str) -> Result<GraphDocument, GraphError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| syntax_error(&e))?;
    from_doc(doc)
}

/// Parses a graph document and returns only the graph.
pub fn parse_graph(text: &str) -> Result<ComputationGraph, GraphError> {
    parse_document(text).map(|d| d.graph)
}

pub(crate) fn document_from_value(value: serde_json::Value) -> Result<GraphDocument, GraphError> {
    let doc: GraphDoc = serde_json::from_value(value).map_err(|e| syntax_error(&e))?;
    from_doc(doc)
}

fn from_doc(doc: GraphDoc) -> Result<GraphDocument, GraphError> {
    let mut topics = Vec::with_capacity(doc.topics.len());
    for t in doc.topics {
        if t.message_size_bytes <= 0 {
            return Err(GraphError::NonPositive {
                topic: t.id,
                field: "message_size_bytes",
            });
        }
        topics.push((
            TopicId(t.id),
            TopicInfo {
                message_size_bytes: t.message_size_bytes as u64,
                publish_rate_hz: t.publish_rate_hz,
            },
        ));
    }
    let graph = ComputationGraph::new(
        doc.nodes.into_iter().map(|n| NodeId(n.id)),
        topics,
        doc.publishes.into_iter().map(|e| (NodeId(e.node), TopicId(e.topic))),
        doc.subscribes.into_iter().map(|e| (TopicId(e.topic), NodeId(e.node))),
    )?;
    let node_mapping = match doc.node_mapping {
        Some(m) => Some(NodeMapping::new(
            &graph,
            m.into_iter().map(|(k, v)| (NodeId(k), v)).collect(),
        )?),
        None => None,
    };
    Ok(GraphDocument { graph, node_mapping })
}

/// Serializes a graph (and optional node mapping) into the document format.
pub fn to_json(graph: &ComputationGraph, node_mapping: Option<&NodeMapping>) -> String {
    let doc = GraphDoc {
        nodes: graph.nodes.iter().map(|n| NodeDoc { id: n.0.clone() }).collect(),
        topics: graph
            .topics
            .iter()
            .map(|(t, i)| TopicDoc {
                id: t.0.clone(),
                message_size_bytes: i.message_size_bytes as i64,
                publish_rate_hz: i.publish_rate_hz,
            })
            .collect(),
        publishes: graph
            .pub_edges
            .iter()
            .map(|(n, t)| PubDoc {
                node: n.0.clone(),
                topic: t.0.clone(),
            })
            .collect(),
        subscribes: graph
            .sub_edges
            .iter()
            .map(|(t, n)| SubDoc {
                topic: t.0.clone(),
                node: n.0.clone(),
            })
            .collect(),
        node_mapping: node_mapping.map(|m| m.0.iter().map(|(k, v)| (k.0.clone(), *v)).collect()),
    };
    serde_json::to_string_pretty(&doc).expect("graph document serializes")
}
