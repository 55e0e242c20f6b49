use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::trace::SimTrace;
use super::{ns_to_us, SimError};
use crate::graph::{Domain, NodeId, TopicId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriberStats {
    pub node: NodeId,
    pub domain: Domain,
    pub deliveries: usize,
    pub mean_latency_us: f64,
    pub max_latency_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStats {
    pub messages: usize,
    pub subscribers: Vec<SubscriberStats>,
    /// Mean over messages of the latest hardware-subscriber delivery.
    pub t_trans_hw_us: Option<f64>,
    /// Same over software subscribers.
    pub t_trans_sw_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransferStats {
    pub topics: BTreeMap<TopicId, TopicStats>,
}

/// Baseline over candidate transfer time; above 1 means the candidate is faster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSpeedup {
    pub topic: TopicId,
    pub speedup_hw: Option<f64>,
    pub speedup_sw: Option<f64>,
}

/// Per-topic delivery latencies. Every message must reach every expected
/// subscriber exactly once.
pub fn compute_stats(trace: &SimTrace) -> Result<TransferStats, SimError> {
    let mut delivered: BTreeMap<(u64, &str), u64> = BTreeMap::new();
    for e in trace.events.iter().filter(|e| e.is_delivery()) {
        let id = e
            .message
            .ok_or_else(|| SimError::IncompleteTrace("delivery without message id".into()))?;
        if delivered.insert((id, e.endpoint.as_str()), e.time_ns).is_some() {
            return Err(SimError::IncompleteTrace(format!(
                "message {id} delivered twice to `{}`",
                e.endpoint
            )));
        }
    }

    let mut out = TransferStats::default();
    for (topic, subs) in &trace.expected {
        let msgs: Vec<_> = trace.messages.iter().filter(|m| &m.topic == topic).collect();
        if msgs.is_empty() {
            continue;
        }
        let mut per_sub: Vec<Vec<f64>> = vec![Vec::with_capacity(msgs.len()); subs.len()];
        let (mut worst_hw, mut worst_sw) = (Vec::new(), Vec::new());
        for m in &msgs {
            let (mut hw, mut sw) = (None::<f64>, None::<f64>);
            for (i, (node, domain)) in subs.iter().enumerate() {
                let at = delivered.remove(&(m.id, node.as_str())).ok_or_else(|| {
                    SimError::IncompleteTrace(format!("message {} on `{topic}` never reached `{node}`", m.id))
                })?;
                let lat = ns_to_us(at - m.publish_ns);
                per_sub[i].push(lat);
                let slot = if *domain == Domain::Hardware { &mut hw } else { &mut sw };
                *slot = Some(slot.map_or(lat, |v: f64| v.max(lat)));
            }
            worst_hw.extend(hw);
            worst_sw.extend(sw);
        }
        let subscribers = subs
            .iter()
            .zip(per_sub)
            .map(|((node, domain), lats)| SubscriberStats {
                node: node.clone(),
                domain: *domain,
                deliveries: lats.len(),
                mean_latency_us: mean(&lats).unwrap_or(0.0),
                max_latency_us: lats.iter().copied().fold(0.0, f64::max),
            })
            .collect();
        out.topics.insert(
            topic.clone(),
            TopicStats {
                messages: msgs.len(),
                subscribers,
                t_trans_hw_us: mean(&worst_hw),
                t_trans_sw_us: mean(&worst_sw),
            },
        );
    }
    if let Some(((id, node), _)) = delivered.into_iter().next() {
        return Err(SimError::IncompleteTrace(format!(
            "unexpected delivery of message {id} to `{node}`"
        )));
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

impl TransferStats {
    /// Topics present in both runs.
    pub fn speedups(baseline: &TransferStats, candidate: &TransferStats) -> Vec<TopicSpeedup> {
        let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        baseline
            .topics
            .iter()
            .filter_map(|(t, base)| {
                let cand = candidate.topics.get(t)?;
                Some(TopicSpeedup {
                    topic: t.clone(),
                    speedup_hw: ratio(base.t_trans_hw_us, cand.t_trans_hw_us),
                    speedup_sw: ratio(base.t_trans_sw_us, cand.t_trans_sw_us),
                })
            })
            .collect()
    }

    /// `topic,subscriber,domain,deliveries,mean_latency_us,max_latency_us`
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "topic",
            "subscriber",
            "domain",
            "deliveries",
            "mean_latency_us",
            "max_latency_us",
        ])?;
        for (topic, ts) in &self.topics {
            for s in &ts.subscribers {
                w.write_record([
                    topic.to_string(),
                    s.node.to_string(),
                    s.domain.to_string(),
                    s.deliveries.to_string(),
                    format!("{:.3}", s.mean_latency_us),
                    format!("{:.3}", s.max_latency_us),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trace::{MessageRecord, TraceEvent, TraceKind};

    fn trace(deliveries: &[(&str, u64)]) -> SimTrace {
        let mut t = SimTrace::default();
        t.expected.insert(
            "T".into(),
            vec![("h".into(), Domain::Hardware), ("s".into(), Domain::Software)],
        );
        t.messages.push(MessageRecord {
            id: 0,
            topic: "T".into(),
            publisher: "p".into(),
            seq: 0,
            size_bytes: 10,
            publish_ns: 1_000,
            parent: None,
        });
        for &(node, at) in deliveries {
            t.events.push(TraceEvent {
                time_ns: at,
                kind: TraceKind::SmtDeliver,
                message: Some(0),
                endpoint: node.into(),
            });
        }
        t
    }

    #[test]
    fn latencies_per_domain() {
        let s = compute_stats(&trace(&[("h", 4_000), ("s", 2_000)])).unwrap();
        let t = &s.topics[&TopicId::new("T")];
        assert_eq!(t.t_trans_hw_us, Some(3.0));
        assert_eq!(t.t_trans_sw_us, Some(1.0));
        assert_eq!(t.subscribers.len(), 2);
    }

    #[test]
    fn missing_or_duplicate_deliveries_fail() {
        assert!(compute_stats(&trace(&[("h", 4_000)])).is_err());
        assert!(compute_stats(&trace(&[("h", 4_000), ("s", 2_000), ("s", 2_500)])).is_err());
        assert!(compute_stats(&trace(&[("h", 4_000), ("s", 2_000), ("x", 2_500)])).is_err());
    }

    #[test]
    fn empty_trace_has_no_topics() {
        assert!(compute_stats(&SimTrace::default()).unwrap().topics.is_empty());
    }

    #[test]
    fn speedup_is_baseline_over_candidate() {
        let slow = compute_stats(&trace(&[("h", 9_000), ("s", 2_000)])).unwrap();
        let fast = compute_stats(&trace(&[("h", 4_000), ("s", 2_000)])).unwrap();
        let sp = TransferStats::speedups(&slow, &fast);
        assert_eq!(sp[0].speedup_hw, Some(8.0 / 3.0));
        assert_eq!(sp[0].speedup_sw, Some(1.0));
    }
}
