use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ns_to_us;
use crate::graph::{Domain, NodeId, TopicId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceKind {
    Publish,
    MemifXferStart,
    MemifXferEnd,
    HmtDeliver,
    SmtDeliver,
    GwAction,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Publish => "PUBLISH",
            TraceKind::MemifXferStart => "MEMIF_XFER_START",
            TraceKind::MemifXferEnd => "MEMIF_XFER_END",
            TraceKind::HmtDeliver => "HMT_DELIVER",
            TraceKind::SmtDeliver => "SMT_DELIVER",
            TraceKind::GwAction => "GW_ACTION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time_ns: u64,
    pub kind: TraceKind,
    pub message: Option<u64>,
    /// Node id for publications and deliveries, transfer owner for MEMIF
    /// events, `gw:<topic>:<Action>` for gateway actions.
    pub endpoint: String,
}

impl TraceEvent {
    pub fn is_delivery(&self) -> bool {
        matches!(self.kind, TraceKind::HmtDeliver | TraceKind::SmtDeliver)
    }
}

/// One published message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub id: u64,
    pub topic: TopicId,
    pub publisher: NodeId,
    pub seq: u64,
    pub size_bytes: u64,
    pub publish_ns: u64,
    /// Message whose reception triggered this publication.
    pub parent: Option<u64>,
}

/// Interval of constant MEMIF sharing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemifSegment {
    pub start_ns: u64,
    pub end_ns: u64,
    pub active: usize,
    /// Rate each active transfer receives.
    pub per_transfer_bytes_per_s: f64,
}

impl MemifSegment {
    pub fn total_bytes_per_s(&self) -> f64 {
        self.per_transfer_bytes_per_s * self.active as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    pub messages: Vec<MessageRecord>,
    /// Subscribers every message of a topic must reach.
    pub expected: BTreeMap<TopicId, Vec<(NodeId, Domain)>>,
    pub memif_bandwidth_bytes_per_s: f64,
    pub memif_segments: Vec<MemifSegment>,
    /// Own publications fed back into a gateway's subscribers.
    pub loop_injections: usize,
}

impl SimTrace {
    pub fn count(&self, kind: TraceKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// MEMIF transfers started per message id.
    pub fn memif_transfers_per_message(&self) -> BTreeMap<u64, usize> {
        let mut out: BTreeMap<u64, usize> = self.messages.iter().map(|m| (m.id, 0)).collect();
        for e in &self.events {
            if e.kind == TraceKind::MemifXferStart {
                if let Some(id) = e.message {
                    *out.entry(id).or_default() += 1;
                }
            }
        }
        out
    }

    pub fn gateway_discards(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == TraceKind::GwAction && e.endpoint.ends_with(":Discard"))
            .count()
    }

    /// `timestamp_us,kind,message_id,endpoint`
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp_us", "kind", "message_id", "endpoint"])?;
        for e in &self.events {
            w.write_record([
                format!("{:.3}", ns_to_us(e.time_ns)),
                e.kind.as_str().to_string(),
                e.message.map(|m| m.to_string()).unwrap_or_default(),
                e.endpoint.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("utf8 csv")
    }
}
