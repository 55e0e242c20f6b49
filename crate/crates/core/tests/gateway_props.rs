mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use topomap::gateway::{init, step, transition_table, EndpointId, GatewayAction, GatewayEvent, GatewayState, Phase};

use common::{alphabet, interpret, message, own_ids, TableState, OWN_HMT, OWN_SMT};

fn ready() -> GatewayState {
    let (s, _) = own_ids();
    let (state, actions) = init(s, EndpointId::new(OWN_HMT));
    assert!(actions.is_empty());
    let (state, actions) = step(&state, GatewayEvent::BufferLocation(0x40)).unwrap();
    assert_eq!(actions, vec![GatewayAction::RequestSmtMessage]);
    state
}

/// Abstract input: which side delivers next and from whom.
#[derive(Debug, Clone, Copy)]
enum Input {
    Smt(u8),
    Hmt(u8),
    /// HMT arrival whose cancel races with an SMT message.
    Raced(u8, u8),
}

fn publisher(code: u8, own: &str) -> String {
    match code % 3 {
        0 => own.to_string(),
        1 => "p1".to_string(),
        _ => "p2".to_string(),
    }
}

fn arb_inputs() -> impl Strategy<Value = Vec<Input>> {
    proptest::collection::vec(
        prop_oneof![
            any::<u8>().prop_map(Input::Smt),
            any::<u8>().prop_map(Input::Hmt),
            (any::<u8>(), any::<u8>()).prop_map(|(a, b)| Input::Raced(a, b)),
        ],
        0..40,
    )
}

/// Runs the gateway over `inputs`, answering its cancel requests. Returns
/// every (event, actions) pair in order.
fn drive(inputs: &[Input]) -> Vec<(GatewayEvent, Vec<GatewayAction>)> {
    let mut state = ready();
    let mut log = Vec::new();
    let mut next_id = 0;
    let mut msg = |p: String| {
        next_id += 1;
        message(next_id, &p)
    };
    let feed = |state: &mut GatewayState, e: GatewayEvent, log: &mut Vec<_>| {
        let (next, actions) = step(state, e.clone()).expect("legal event");
        *state = next;
        log.push((e, actions));
    };
    for &input in inputs {
        match input {
            Input::Smt(p) => feed(
                &mut state,
                GatewayEvent::DelegateResponse(msg(publisher(p, OWN_SMT))),
                &mut log,
            ),
            Input::Hmt(p) => {
                let e = GatewayEvent::HmtArrival(msg(publisher(p, OWN_HMT)));
                feed(&mut state, e, &mut log);
                if state.phase() == Phase::Cancelling {
                    feed(&mut state, GatewayEvent::CancelResult(None), &mut log);
                }
            }
            Input::Raced(p, q) => {
                let e = GatewayEvent::HmtArrival(msg(publisher(p, OWN_HMT)));
                feed(&mut state, e, &mut log);
                if state.phase() == Phase::Cancelling {
                    let raced = msg(publisher(q, OWN_SMT));
                    feed(&mut state, GatewayEvent::CancelResult(Some(raced)), &mut log);
                }
            }
        }
        assert_eq!(state.phase(), Phase::Polling);
        assert!(state.outstanding_request());
        assert!(state.held().is_none());
    }
    log
}

fn incoming(e: &GatewayEvent) -> Option<(&topomap::gateway::Message, &str)> {
    match e {
        GatewayEvent::DelegateResponse(m) | GatewayEvent::CancelResult(Some(m)) => Some((m, OWN_SMT)),
        GatewayEvent::HmtArrival(m) => Some((m, OWN_HMT)),
        _ => None,
    }
}

proptest! {
    #[test]
    fn own_publications_never_cross(inputs in arb_inputs()) {
        for (event, actions) in drive(&inputs) {
            let Some((m, own)) = incoming(&event) else { continue };
            let forwarded = actions.iter().any(|a| matches!(a,
                GatewayAction::TransferToHmt(x) | GatewayAction::TransferToMain(x) if x.id == m.id));
            if m.publisher_id.0 == own {
                prop_assert!(!forwarded, "own message {m:?} forwarded");
                prop_assert!(actions.iter().any(|a| matches!(a, GatewayAction::Discard(x, _) if x.id == m.id)));
            }
        }
    }

    #[test]
    fn accepted_messages_cross_exactly_once(inputs in arb_inputs()) {
        let log = drive(&inputs);
        let mut crossings: BTreeMap<u64, usize> = BTreeMap::new();
        let mut accepted = Vec::new();
        for (event, actions) in &log {
            if let Some((m, own)) = incoming(event) {
                if m.publisher_id.0 != own {
                    accepted.push(m.id);
                }
            }
            for a in actions {
                match a {
                    GatewayAction::TransferToHmt(m) => {
                        prop_assert_eq!(m.publisher_id.0.as_str(), OWN_HMT);
                        *crossings.entry(m.id).or_default() += 1;
                    }
                    GatewayAction::PublishSmt(m) => {
                        prop_assert_eq!(m.publisher_id.0.as_str(), OWN_SMT);
                        *crossings.entry(m.id).or_default() += 1;
                    }
                    _ => {}
                }
            }
        }
        prop_assert_eq!(crossings.len(), accepted.len());
        for id in accepted {
            prop_assert_eq!(crossings.get(&id), Some(&1));
        }
    }

    #[test]
    fn at_most_one_request_outstanding(inputs in arb_inputs()) {
        let mut outstanding = 1i32;
        for (event, actions) in drive(&inputs) {
            if matches!(event, GatewayEvent::DelegateResponse(_) | GatewayEvent::CancelResult(_)) {
                outstanding -= 1;
            }
            for a in &actions {
                match a {
                    GatewayAction::RequestSmtMessage => outstanding += 1,
                    GatewayAction::CancelSmtRequest => prop_assert_eq!(outstanding, 1),
                    _ => {}
                }
                prop_assert!((0..=1).contains(&outstanding));
            }
            prop_assert_eq!(outstanding, 1);
        }
    }

    #[test]
    fn per_source_order_is_kept(inputs in arb_inputs()) {
        // Ids grow with arrival order, so forwarded ids must too.
        let mut last: BTreeMap<&'static str, u64> = BTreeMap::new();
        for (_, actions) in drive(&inputs) {
            for a in actions {
                let (dir, m) = match &a {
                    GatewayAction::TransferToHmt(m) => ("to_hmt", m),
                    GatewayAction::PublishSmt(m) => ("to_smt", m),
                    _ => continue,
                };
                let prev = last.insert(dir, m.id);
                prop_assert!(prev.is_none_or(|p| p < m.id), "{dir}: {prev:?} then {}", m.id);
            }
        }
    }

    #[test]
    fn step_is_deterministic(inputs in arb_inputs()) {
        prop_assert_eq!(drive(&inputs), drive(&inputs));
    }
}

#[test]
fn held_message_is_published_after_the_cancel() {
    let state = ready();
    let m = message(7, "p1");
    let (state, actions) = step(&state, GatewayEvent::HmtArrival(m.clone())).unwrap();
    assert_eq!(state.phase(), Phase::Cancelling);
    assert_eq!(
        actions,
        vec![
            GatewayAction::TransferToMain(m.clone()),
            GatewayAction::CancelSmtRequest
        ]
    );
    assert_eq!(state.held(), Some(&m));
    let (state, actions) = step(&state, GatewayEvent::CancelResult(None)).unwrap();
    let published = m.republished_by(&EndpointId::new(OWN_SMT));
    assert_eq!(
        actions,
        vec![GatewayAction::PublishSmt(published), GatewayAction::RequestSmtMessage]
    );
    assert!(state.held().is_none());
}

#[test]
fn illegal_events_are_protocol_errors() {
    let (s, h) = own_ids();
    let (fresh, _) = init(s, h);
    assert!(step(&fresh, GatewayEvent::DelegateResponse(message(1, "p1"))).is_err());
    let polling = ready();
    assert!(step(&polling, GatewayEvent::BufferLocation(1)).is_err());
    assert!(step(&polling, GatewayEvent::CancelResult(None)).is_err());
}

#[test]
fn four_event_interleavings_match_the_table() {
    let table = transition_table();
    let (s, h) = own_ids();
    let (start, _) = init(s, h);
    let mut frontier = vec![(start, TableState::initial(&table))];
    for depth in 0..4u64 {
        let mut next = Vec::new();
        for (real, oracle) in &frontier {
            for event in alphabet(depth + 1) {
                match (step(real, event.clone()), interpret(&table, oracle, &event)) {
                    (Err(_), None) => {}
                    (Ok((r, ra)), Some((o, oa))) => {
                        assert_eq!(ra, oa, "{:?} on {event:?}", real.phase());
                        assert_eq!(
                            (r.phase(), r.held(), r.outstanding_request()),
                            (o.phase, o.held.as_ref(), o.outstanding)
                        );
                        next.push((r, o));
                    }
                    (got, want) => panic!("{:?} on {event:?}: step {got:?}, table {want:?}", real.phase()),
                }
            }
        }
        frontier = next;
    }
    assert!(!frontier.is_empty());
}

#[test]
fn republished_messages_die_after_one_round() {
    // Feed every output straight back into the gateway as if its own
    // publications looped around. Ten external messages enter; none may
    // cross more than once and every echo must be discarded.
    let mut state = ready();
    let mut pending: Vec<GatewayEvent> = Vec::new();
    let (mut crossings, mut discards) = (0, 0);
    for round in 0..10u64 {
        let ext = if round % 2 == 0 {
            GatewayEvent::DelegateResponse(message(round, "p1"))
        } else {
            GatewayEvent::HmtArrival(message(round, "p2"))
        };
        pending.push(ext);
        while let Some(e) = pending.pop() {
            let (next, actions) = step(&state, e).unwrap();
            state = next;
            for a in actions {
                match a {
                    GatewayAction::TransferToHmt(m) => {
                        crossings += 1;
                        pending.push(GatewayEvent::HmtArrival(m));
                    }
                    GatewayAction::PublishSmt(m) => {
                        crossings += 1;
                        pending.push(GatewayEvent::DelegateResponse(m));
                    }
                    GatewayAction::CancelSmtRequest => pending.insert(0, GatewayEvent::CancelResult(None)),
                    GatewayAction::Discard(..) => discards += 1,
                    _ => {}
                }
            }
            // Cancel answers must arrive before any other input.
            if state.phase() == Phase::Cancelling {
                let pos = pending
                    .iter()
                    .position(|e| matches!(e, GatewayEvent::CancelResult(_)))
                    .unwrap();
                let c = pending.remove(pos);
                pending.push(c);
            }
        }
    }
    assert_eq!(crossings, 10);
    assert_eq!(discards, 10);
    assert_eq!(state.phase(), Phase::Polling);
}
