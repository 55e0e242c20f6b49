#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topomap::gateway::{
    ActionKind, EndpointId, EventKind, GatewayAction, GatewayEvent, Guard, HeldUpdate, Message, Operand, Phase,
    Republish, TransitionTable,
};
use topomap::graph::{CommMapping, ComputationGraph, Domain, NodeId, NodeMapping, TopicId, TopicImpl, TopicInfo};
use topomap::sim::{Scenario, WorkloadEntry};

pub const OWN_SMT: &str = "gw/smt";
pub const OWN_HMT: &str = "gw/hmt";

pub fn own_ids() -> (EndpointId, EndpointId) {
    (EndpointId::new(OWN_SMT), EndpointId::new(OWN_HMT))
}

pub fn message(id: u64, publisher: &str) -> Message {
    Message {
        id,
        topic: TopicId::new("A"),
        publisher_id: EndpointId::new(publisher),
        seq: id,
        size_bytes: 1_000,
        payload_digest: id ^ 0xabcd,
    }
}

/// Interpreter state: the table only needs the phase, the held message and
/// the request flag.
#[derive(Debug, Clone, PartialEq)]
pub struct TableState {
    pub phase: Phase,
    pub held: Option<Message>,
    pub outstanding: bool,
}

impl TableState {
    pub fn initial(table: &TransitionTable) -> Self {
        TableState {
            phase: table.initial,
            held: None,
            outstanding: false,
        }
    }
}

fn event_kind(e: &GatewayEvent) -> EventKind {
    match e {
        GatewayEvent::BufferLocation(_) => EventKind::BufferLocation,
        GatewayEvent::DelegateResponse(_) => EventKind::DelegateResponse,
        GatewayEvent::HmtArrival(_) => EventKind::HmtArrival,
        GatewayEvent::CancelResult(_) => EventKind::CancelResult,
    }
}

fn event_message(e: &GatewayEvent) -> Option<&Message> {
    match e {
        GatewayEvent::DelegateResponse(m) | GatewayEvent::HmtArrival(m) => Some(m),
        GatewayEvent::CancelResult(m) => m.as_ref(),
        GatewayEvent::BufferLocation(_) => None,
    }
}

/// Brute-force interpretation of the exported table: scan every row, take
/// the one whose phase, event and guard match. `None` means no row applies.
pub fn interpret(
    table: &TransitionTable,
    state: &TableState,
    event: &GatewayEvent,
) -> Option<(TableState, Vec<GatewayAction>)> {
    let kind = event_kind(event);
    let msg = event_message(event);
    let matching: Vec<_> = table
        .transitions
        .iter()
        .filter(|row| row.from == state.phase && row.event == kind)
        .filter(|row| {
            let own = match row.side {
                Some(topomap::gateway::Side::SmtSide) => OWN_SMT,
                Some(topomap::gateway::Side::HmtSide) => OWN_HMT,
                None => "",
            };
            match row.guard {
                Guard::Any => true,
                Guard::Empty => msg.is_none(),
                Guard::Accept => msg.is_some_and(|m| m.publisher_id.0 != own),
                Guard::Reject => msg.is_some_and(|m| m.publisher_id.0 == own),
            }
        })
        .collect();
    assert!(
        matching.len() <= 1,
        "table rows overlap for {:?} in {:?}",
        kind,
        state.phase
    );
    let row = matching.first()?;
    let mut actions = Vec::new();
    for a in &row.actions {
        let operand = match a.operand {
            Operand::None => None,
            Operand::Event => Some(msg.expect("row consumes the event message").clone()),
            Operand::Held => Some(state.held.clone().expect("row consumes the held message")),
        };
        let operand = operand.map(|mut m| {
            match a.publisher {
                Republish::Unchanged => {}
                Republish::OwnHmt => m.publisher_id = EndpointId::new(OWN_HMT),
                Republish::OwnSmt => m.publisher_id = EndpointId::new(OWN_SMT),
            }
            m
        });
        actions.push(match (a.action, operand) {
            (ActionKind::RequestSmtMessage, None) => GatewayAction::RequestSmtMessage,
            (ActionKind::CancelSmtRequest, None) => GatewayAction::CancelSmtRequest,
            (ActionKind::TransferToHmt, Some(m)) => GatewayAction::TransferToHmt(m),
            (ActionKind::TransferToMain, Some(m)) => GatewayAction::TransferToMain(m),
            (ActionKind::PublishSmt, Some(m)) => GatewayAction::PublishSmt(m),
            (ActionKind::Discard, Some(m)) => {
                GatewayAction::Discard(m, topomap::gateway::DiscardReason::OwnPublication)
            }
            (k, o) => panic!("malformed action template {k:?} with operand {o:?}"),
        });
    }
    let held = match row.held {
        HeldUpdate::Keep => state.held.clone(),
        HeldUpdate::SetEvent => msg.cloned(),
        HeldUpdate::Clear => None,
    };
    Some((
        TableState {
            phase: row.to,
            held,
            outstanding: row.outstanding_request,
        },
        actions,
    ))
}

/// Closed event alphabet: two external publishers `p1`, `p2` plus the
/// gateway's own ids on each side. `id` keeps messages distinguishable.
pub fn alphabet(id: u64) -> Vec<GatewayEvent> {
    let m = |p: &str| message(id, p);
    vec![
        GatewayEvent::BufferLocation(0x1000),
        GatewayEvent::DelegateResponse(m("p1")),
        GatewayEvent::DelegateResponse(m("p2")),
        GatewayEvent::DelegateResponse(m(OWN_SMT)),
        GatewayEvent::HmtArrival(m("p1")),
        GatewayEvent::HmtArrival(m("p2")),
        GatewayEvent::HmtArrival(m(OWN_HMT)),
        GatewayEvent::CancelResult(None),
        GatewayEvent::CancelResult(Some(m("p1"))),
        GatewayEvent::CancelResult(Some(m("p2"))),
        GatewayEvent::CancelResult(Some(m(OWN_SMT))),
    ]
}

/// Random graph: `n{i}` nodes, `t{j}` topics, independent edges.
pub fn arb_graph(max_nodes: usize, max_topics: usize) -> impl Strategy<Value = (ComputationGraph, NodeMapping)> {
    (1..=max_nodes, 1..=max_topics)
        .prop_flat_map(|(n, t)| {
            (
                Just(n),
                Just(t),
                proptest::collection::vec(any::<bool>(), n * t),
                proptest::collection::vec(any::<bool>(), n * t),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec((1u64..20_000_000, 1u32..1000), t),
            )
        })
        .prop_map(|(n, t, pubs, subs, hw, annotations)| build_graph(n, t, &pubs, &subs, &hw, &annotations))
}

pub fn build_graph(
    n: usize,
    t: usize,
    pubs: &[bool],
    subs: &[bool],
    hw: &[bool],
    annotations: &[(u64, u32)],
) -> (ComputationGraph, NodeMapping) {
    let node = |i: usize| NodeId::new(format!("n{i}"));
    let topic = |j: usize| TopicId::new(format!("t{j}"));
    let mut pub_edges = Vec::new();
    let mut sub_edges = Vec::new();
    for i in 0..n {
        for j in 0..t {
            if pubs[i * t + j] {
                pub_edges.push((node(i), topic(j)));
            }
            if subs[i * t + j] {
                sub_edges.push((topic(j), node(i)));
            }
        }
    }
    let graph = ComputationGraph::new(
        (0..n).map(node),
        (0..t).map(|j| {
            (
                topic(j),
                TopicInfo {
                    message_size_bytes: annotations[j].0,
                    publish_rate_hz: annotations[j].1 as f64 / 8.0,
                },
            )
        }),
        pub_edges,
        sub_edges,
    )
    .expect("generated graph is valid");
    let nm = NodeMapping::new(
        &graph,
        (0..n)
            .map(|i| (node(i), if hw[i] { Domain::Hardware } else { Domain::Software }))
            .collect(),
    )
    .expect("total mapping");
    (graph, nm)
}

/// Randomized simulation scenario with busy, overlapping workloads so that
/// MEMIF sharing and gateway cancel races actually happen. Topics with
/// endpoints on both sides use a gateway, all-hardware topics an HMT.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=7);
    let t = rng.gen_range(1..=4);
    let mut pubs: Vec<bool> = (0..n * t).map(|_| rng.gen_bool(0.25)).collect();
    let subs: Vec<bool> = (0..n * t).map(|_| rng.gen_bool(0.45)).collect();
    for j in 0..t {
        if !(0..n).any(|i| pubs[i * t + j]) {
            pubs[rng.gen_range(0..n) * t + j] = true;
        }
    }
    let hw: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
    let annotations: Vec<(u64, u32)> = (0..t)
        .map(|_| (rng.gen_range(1_000..2_000_000), rng.gen_range(8..800)))
        .collect();
    let (graph, nm) = build_graph(n, t, &pubs, &subs, &hw, &annotations);

    let mut cm = BTreeMap::new();
    for topic in graph.topic_ids() {
        let endpoints: Vec<_> = graph
            .publishers(topic)
            .unwrap()
            .into_iter()
            .chain(graph.subscribers(topic).unwrap())
            .collect();
        let any_hw = endpoints.iter().any(|e| nm.is_hw(e));
        let any_sw = endpoints.iter().any(|e| !nm.is_hw(e));
        let kind = match (any_hw, any_sw) {
            (true, true) => TopicImpl::Gateway,
            (true, false) => TopicImpl::Hardware,
            _ => TopicImpl::Software,
        };
        cm.insert(topic.clone(), kind);
    }
    let comm_mapping = CommMapping::new(&graph, cm).unwrap();

    let workload = graph
        .pub_edges()
        .iter()
        .map(|(p, topic)| WorkloadEntry {
            publisher: p.clone(),
            topic: topic.clone(),
            count: rng.gen_range(1..=6),
            size_bytes: rng.gen_bool(0.5).then(|| rng.gen_range(100..1_500_000)),
            period_us: rng.gen_range(20.0..4_000.0),
            offset_us: rng.gen_range(0.0..500.0),
        })
        .collect();
    Scenario {
        graph,
        node_mapping: nm,
        comm_mapping,
        workload,
        seed,
        compute_us: BTreeMap::new(),
        reactions: Vec::new(),
    }
}

/// Same scenario with every topic on the software transport.
pub fn all_smt(sc: &Scenario) -> Scenario {
    let mut out = sc.clone();
    out.comm_mapping = CommMapping::uniform(&sc.graph, TopicImpl::Software);
    out
}
