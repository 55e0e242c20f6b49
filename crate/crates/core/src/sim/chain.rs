use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::simulate;
use super::platform::PlatformModel;
use super::scenario::{Reaction, Scenario};
use super::{ns_to_us, SimError};
use crate::graph::{ComputationGraph, NodeId, TopicId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub mean_us: f64,
    /// Sample standard deviation; 0 for fewer than two samples.
    pub stddev_us: f64,
    pub samples: Vec<f64>,
}

/// The topic carrying each consecutive hop of `chain`.
pub fn chain_links(graph: &ComputationGraph, chain: &[NodeId]) -> Result<Vec<TopicId>, SimError> {
    chain
        .windows(2)
        .map(|w| {
            graph
                .topic_ids()
                .find(|t| graph.publishes(&w[0], t) && graph.subscribes(t, &w[1]))
                .cloned()
                .ok_or_else(|| SimError::DisconnectedChain {
                    from: w[0].to_string(),
                    to: w[1].to_string(),
                })
        })
        .collect()
}

/// End-to-end latency of `chain`: from the head's release (its publish
/// time minus its compute time) to the end of the tail's computation on the
/// matching input. The head's workload drives the chain; interior nodes
/// republish on reception.
pub fn run_chain_scenario(
    scenario: &Scenario,
    platform: &PlatformModel,
    chain: &[NodeId],
) -> Result<ChainResult, SimError> {
    let Some(head) = chain.first() else {
        return Err(SimError::InvalidScenario("empty chain".into()));
    };
    if !scenario.graph.has_node(head) {
        return Err(crate::graph::GraphError::UnknownNode(head.clone()).into());
    }
    let links = chain_links(&scenario.graph, chain)?;
    if links.is_empty() {
        let c = scenario.compute_of(head);
        return Ok(ChainResult {
            mean_us: c,
            stddev_us: 0.0,
            samples: vec![c],
        });
    }

    let mut sc = scenario.clone();
    for (i, node) in chain.iter().enumerate().skip(1).take(links.len() - 1) {
        let r = Reaction {
            node: node.clone(),
            on_topic: links[i - 1].clone(),
            publish_topic: links[i].clone(),
        };
        if !sc.reactions.contains(&r) {
            sc.reactions.push(r);
        }
    }
    let trace = simulate(&sc, platform)?;

    let mut children: BTreeMap<(u64, &NodeId, &TopicId), u64> = BTreeMap::new();
    for m in &trace.messages {
        if let Some(p) = m.parent {
            children.entry((p, &m.publisher, &m.topic)).or_insert(m.id);
        }
    }
    let tail = chain.last().expect("non-empty");
    let last_topic = links.last().expect("non-empty");
    let mut delivered: BTreeMap<u64, u64> = BTreeMap::new();
    for e in trace
        .events
        .iter()
        .filter(|e| e.is_delivery() && e.endpoint == tail.as_str())
    {
        if let Some(id) = e.message {
            if trace.messages[id as usize].topic == *last_topic {
                delivered.entry(id).or_insert(e.time_ns);
            }
        }
    }

    let head_compute = scenario.compute_of(head);
    let tail_compute = scenario.compute_of(tail);
    let mut samples = Vec::new();
    for root in trace
        .messages
        .iter()
        .filter(|m| m.parent.is_none() && &m.publisher == head && m.topic == links[0])
    {
        let mut id = root.id;
        let mut complete = true;
        for (node, topic) in chain.iter().zip(&links).skip(1) {
            match children.get(&(id, node, topic)) {
                Some(&child) => id = child,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        let Some(&at) = delivered.get(&id).filter(|_| complete) else {
            return Err(SimError::IncompleteTrace(format!(
                "message {} did not traverse the chain",
                root.id
            )));
        };
        samples.push(ns_to_us(at - root.publish_ns) + head_compute + tail_compute);
    }
    if samples.is_empty() {
        return Err(SimError::InvalidScenario(format!(
            "workload has no publications of `{head}` on `{}`",
            links[0]
        )));
    }
    let n = samples.len() as f64;
    let mean_us = samples.iter().sum::<f64>() / n;
    let stddev_us = if samples.len() < 2 {
        0.0
    } else {
        (samples.iter().map(|x| (x - mean_us).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(ChainResult {
        mean_us,
        stddev_us,
        samples,
    })
}
