mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use topomap::graph::{parse_document, to_json, ComputationGraph, GraphError, NodeId, TopicId, TopicInfo};

use common::arb_graph;

fn info() -> TopicInfo {
    TopicInfo {
        message_size_bytes: 8,
        publish_rate_hz: 1.0,
    }
}

proptest! {
    #[test]
    fn json_round_trip((graph, nm) in arb_graph(8, 6)) {
        let text = to_json(&graph, Some(&nm));
        let doc = parse_document(&text).unwrap();
        prop_assert_eq!(&doc.graph, &graph);
        prop_assert_eq!(doc.node_mapping.as_ref(), Some(&nm));
        prop_assert_eq!(to_json(&doc.graph, doc.node_mapping.as_ref()), text);
    }

    #[test]
    fn per_topic_edges_partition_the_edge_sets((graph, _) in arb_graph(8, 6)) {
        let mut pubs = BTreeSet::new();
        let mut subs = BTreeSet::new();
        for t in graph.topic_ids() {
            let p = graph.pub_edges_of(t).unwrap();
            let s = graph.sub_edges_of(t).unwrap();
            prop_assert!(p.iter().all(|(_, x)| x == t));
            prop_assert!(s.iter().all(|(x, _)| x == t));
            prop_assert!(pubs.is_disjoint(&p) && subs.is_disjoint(&s));
            pubs.extend(p);
            subs.extend(s);
        }
        prop_assert_eq!(&pubs, graph.pub_edges());
        prop_assert_eq!(&subs, graph.sub_edges());
    }
}

#[test]
fn per_topic_filter_matches_brute_force() {
    // 5 nodes, 3 topics, 30 candidate edges, every third one present.
    let nodes: Vec<NodeId> = (0..5).map(|i| NodeId::new(format!("n{i}"))).collect();
    let topics: Vec<TopicId> = (0..3).map(|j| TopicId::new(format!("t{j}"))).collect();
    let mut pub_e = Vec::new();
    let mut sub_e = Vec::new();
    let mut k = 0;
    for n in &nodes {
        for t in &topics {
            if k % 3 == 0 {
                pub_e.push((n.clone(), t.clone()));
            }
            if k % 3 == 1 {
                sub_e.push((t.clone(), n.clone()));
            }
            k += 1;
        }
    }
    let g = ComputationGraph::new(
        nodes.clone(),
        topics.iter().map(|t| (t.clone(), info())),
        pub_e.clone(),
        sub_e.clone(),
    )
    .unwrap();
    for t in &topics {
        let want_p: BTreeSet<_> = pub_e.iter().filter(|(_, x)| x == t).cloned().collect();
        let want_s: BTreeSet<_> = sub_e.iter().filter(|(x, _)| x == t).cloned().collect();
        assert_eq!(g.pub_edges_of(t).unwrap(), want_p);
        assert_eq!(g.sub_edges_of(t).unwrap(), want_s);
    }
    assert!(matches!(
        g.pub_edges_of(&TopicId::new("zz")),
        Err(GraphError::UnknownTopic(_))
    ));
}

#[test]
fn worked_example_sizes() {
    let doc = parse_document(include_str!("../data/worked_example_graph.json")).unwrap();
    assert_eq!(doc.graph.nodes().len(), 11);
    assert_eq!(doc.graph.topic_ids().count(), 5);
    assert!(doc.node_mapping.is_some());
}

#[test]
fn structural_errors_are_rejected() {
    let n = || NodeId::new("a");
    let t = || TopicId::new("x");
    let dup = ComputationGraph::new([n(), n()], [], [], []);
    assert!(matches!(dup, Err(GraphError::DuplicateId(_))));
    let clash = ComputationGraph::new([n()], [(TopicId::new("a"), info())], [], []);
    assert!(matches!(clash, Err(GraphError::DuplicateId(_))));
    let dangling = ComputationGraph::new([n()], [(t(), info())], [(NodeId::new("b"), t())], []);
    assert!(matches!(dangling, Err(GraphError::UnknownEndpoint { .. })));
    let zero = ComputationGraph::new(
        [n()],
        [(
            t(),
            TopicInfo {
                message_size_bytes: 0,
                publish_rate_hz: 1.0,
            },
        )],
        [],
        [],
    );
    assert!(matches!(zero, Err(GraphError::NonPositive { .. })));
    assert!(matches!(
        parse_document("{\"nodes\": ["),
        Err(GraphError::Syntax { .. })
    ));
}
