//! Walks the gateway core through a forwarding round in each direction,
//! including an SMT response racing the cancel, then prints the exported
//! transition table size.

use topomap::gateway::{init, step, transition_table, EndpointId, GatewayEvent, Message};

fn msg(id: u64, publisher: &str) -> Message {
    Message {
        id,
        topic: "A".into(),
        publisher_id: EndpointId::new(publisher),
        seq: id,
        size_bytes: 1_000_000,
        payload_digest: id * 31,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mut state, _) = init(EndpointId::new("gw/smt"), EndpointId::new("gw/hmt"));
    let events = [
        GatewayEvent::BufferLocation(0x4000_0000),
        // A software publisher's message, forwarded into hardware.
        GatewayEvent::DelegateResponse(msg(1, "camera")),
        // The hardware copy loops back on the HMT and is dropped.
        GatewayEvent::HmtArrival(msg(1, "gw/hmt")),
        // A hardware publication, while an SMT message races the cancel.
        GatewayEvent::HmtArrival(msg(2, "compensation")),
        GatewayEvent::CancelResult(Some(msg(3, "camera"))),
        // The gateway's own SMT republication comes back and is dropped.
        GatewayEvent::DelegateResponse(msg(2, "gw/smt")),
    ];
    for event in events {
        let before = state.phase();
        let (next, actions) = step(&state, event.clone())?;
        println!("{before:?} --{:?}--> {:?}", event.kind(), next.phase());
        for a in &actions {
            match a.message() {
                Some(m) => println!("    {} #{} as {}", a.kind(), m.id, m.publisher_id),
                None => println!("    {}", a.kind()),
            }
        }
        state = next;
    }
    println!("transition table: {} rows", transition_table().transitions.len());
    Ok(())
}
