//! Gateway core state machine.
//!
//! A gateway pairs one software-mapped topic (SMT) with one hardware-mapped
//! topic (HMT). The core keeps a single outstanding read request at its
//! delegate thread and polls the HMT. Messages arriving from the software
//! side are forwarded to the HMT; messages arriving from hardware are copied
//! to main memory, the pending request is cancelled, and the message is
//! published on the SMT. A cancel can race with a delegate response, in which
//! case the raced message is flushed to the HMT before the next request.
//!
//! Both subscribers filter by publisher id so the gateway never re-forwards
//! what it published itself.
//!
//! [`step`] is pure: state in, state and ordered actions out. The caller must
//! linearize SMT and HMT inputs.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::TopicId;

/// Identifier of a publishing endpoint (a node, or one side of a gateway).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EndpointId(pub String);

impl EndpointId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    /// Trace reference; stays the same when the gateway republishes.
    pub id: u64,
    pub topic: TopicId,
    pub publisher_id: EndpointId,
    pub seq: u64,
    pub size_bytes: u64,
    pub payload_digest: u64,
}

impl Message {
    /// The same message as re-published by `publisher`.
    pub fn republished_by(&self, publisher: &EndpointId) -> Message {
        Message {
            publisher_id: publisher.clone(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    AwaitBuffer,
    Polling,
    FwdSmtToHmt,
    FwdHmtToMain,
    Cancelling,
    FlushPending,
    PublishSmt,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::AwaitBuffer,
        Phase::Polling,
        Phase::FwdSmtToHmt,
        Phase::FwdHmtToMain,
        Phase::Cancelling,
        Phase::FlushPending,
        Phase::PublishSmt,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    SmtSide,
    HmtSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatewayEvent {
    BufferLocation(u64),
    DelegateResponse(Message),
    HmtArrival(Message),
    CancelResult(Option<Message>),
}

impl GatewayEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            GatewayEvent::BufferLocation(_) => EventKind::BufferLocation,
            GatewayEvent::DelegateResponse(_) => EventKind::DelegateResponse,
            GatewayEvent::HmtArrival(_) => EventKind::HmtArrival,
            GatewayEvent::CancelResult(_) => EventKind::CancelResult,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    BufferLocation,
    DelegateResponse,
    HmtArrival,
    CancelResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// Publisher id matches the gateway's own publisher on that side.
    OwnPublication,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatewayAction {
    RequestSmtMessage,
    CancelSmtRequest,
    TransferToHmt(Message),
    TransferToMain(Message),
    PublishSmt(Message),
    Discard(Message, DiscardReason),
}

impl GatewayAction {
    pub fn kind(&self) -> ActionKind {
        match self {
            GatewayAction::RequestSmtMessage => ActionKind::RequestSmtMessage,
            GatewayAction::CancelSmtRequest => ActionKind::CancelSmtRequest,
            GatewayAction::TransferToHmt(_) => ActionKind::TransferToHmt,
            GatewayAction::TransferToMain(_) => ActionKind::TransferToMain,
            GatewayAction::PublishSmt(_) => ActionKind::PublishSmt,
            GatewayAction::Discard(..) => ActionKind::Discard,
        }
    }

    pub fn message(&self) -> Option<&Message> {
        match self {
            GatewayAction::RequestSmtMessage | GatewayAction::CancelSmtRequest => None,
            GatewayAction::TransferToHmt(m)
            | GatewayAction::TransferToMain(m)
            | GatewayAction::PublishSmt(m)
            | GatewayAction::Discard(m, _) => Some(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    RequestSmtMessage,
    CancelSmtRequest,
    TransferToHmt,
    TransferToMain,
    PublishSmt,
    Discard,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("protocol error: event {event:?} is illegal in phase {phase:?}")]
pub struct ProtocolError {
    pub phase: Phase,
    pub event: GatewayEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayState {
    phase: Phase,
    outstanding_request: bool,
    own_smt_id: EndpointId,
    own_hmt_id: EndpointId,
    buffer: Option<u64>,
    held: Option<Message>,
}

impl GatewayState {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn outstanding_request(&self) -> bool {
        self.outstanding_request
    }

    pub fn own_smt_id(&self) -> &EndpointId {
        &self.own_smt_id
    }

    pub fn own_hmt_id(&self) -> &EndpointId {
        &self.own_hmt_id
    }

    pub fn buffer(&self) -> Option<u64> {
        self.buffer
    }

    /// Message copied to main memory, awaiting publication after the cancel.
    pub fn held(&self) -> Option<&Message> {
        self.held.as_ref()
    }
}

/// Fresh gateway core waiting for its SMT output buffer location.
pub fn init(own_smt_id: EndpointId, own_hmt_id: EndpointId) -> (GatewayState, Vec<GatewayAction>) {
    let state = GatewayState {
        phase: Phase::AwaitBuffer,
        outstanding_request: false,
        own_smt_id,
        own_hmt_id,
        buffer: None,
        held: None,
    };
    (state, Vec::new())
}

/// Loop-prevention filter: reject a message published by our own endpoint on
/// the side it arrived from.
pub fn filter(m: &Message, side: Side, state: &GatewayState) -> Verdict {
    let own = match side {
        Side::SmtSide => &state.own_smt_id,
        Side::HmtSide => &state.own_hmt_id,
    };
    if &m.publisher_id == own {
        Verdict::Reject
    } else {
        Verdict::Accept
    }
}

/// Advances the gateway core by one event.
pub fn step(state: &GatewayState, event: GatewayEvent) -> Result<(GatewayState, Vec<GatewayAction>), ProtocolError> {
    use GatewayAction::*;

    let mut next = state.clone();
    let mut actions = Vec::new();
    match (state.phase, event) {
        (Phase::AwaitBuffer, GatewayEvent::BufferLocation(addr)) => {
            next.buffer = Some(addr);
            actions.push(RequestSmtMessage);
            next.outstanding_request = true;
            next.phase = Phase::Polling;
        }
        (Phase::Polling, GatewayEvent::DelegateResponse(m)) => {
            next.outstanding_request = false;
            match filter(&m, Side::SmtSide, state) {
                Verdict::Accept => {
                    next.phase = Phase::FwdSmtToHmt;
                    actions.push(TransferToHmt(m.republished_by(&state.own_hmt_id)));
                }
                Verdict::Reject => actions.push(Discard(m, DiscardReason::OwnPublication)),
            }
            actions.push(RequestSmtMessage);
            next.outstanding_request = true;
            next.phase = Phase::Polling;
        }
        (Phase::Polling, GatewayEvent::HmtArrival(m)) => match filter(&m, Side::HmtSide, state) {
            Verdict::Accept => {
                next.phase = Phase::FwdHmtToMain;
                actions.push(TransferToMain(m.clone()));
                actions.push(CancelSmtRequest);
                next.held = Some(m);
                next.phase = Phase::Cancelling;
            }
            Verdict::Reject => actions.push(Discard(m, DiscardReason::OwnPublication)),
        },
        (Phase::Cancelling, GatewayEvent::CancelResult(raced)) => {
            next.outstanding_request = false;
            if let Some(m2) = raced {
                next.phase = Phase::FlushPending;
                match filter(&m2, Side::SmtSide, state) {
                    Verdict::Accept => actions.push(TransferToHmt(m2.republished_by(&state.own_hmt_id))),
                    Verdict::Reject => actions.push(Discard(m2, DiscardReason::OwnPublication)),
                }
            }
            next.phase = Phase::PublishSmt;
            let held = next.held.take().expect("a message is held while cancelling");
            actions.push(PublishSmt(held.republished_by(&state.own_smt_id)));
            actions.push(RequestSmtMessage);
            next.outstanding_request = true;
            next.phase = Phase::Polling;
        }
        (phase, event) => return Err(ProtocolError { phase, event }),
    }
    Ok((next, actions))
}

// Transition table export.

/// Condition on the event's message that selects a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Guard {
    Any,
    Accept,
    Reject,
    /// CancelResult without a raced message.
    Empty,
}

/// Which message an action row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Operand {
    None,
    /// Message carried by the event.
    Event,
    /// Message held from the HMT arrival.
    Held,
}

/// Publisher id an emitted message carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Republish {
    Unchanged,
    OwnHmt,
    OwnSmt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTemplate {
    pub action: ActionKind,
    pub operand: Operand,
    pub publisher: Republish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HeldUpdate {
    Keep,
    SetEvent,
    Clear,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: Phase,
    pub event: EventKind,
    /// Filter side consulted by the guard.
    pub side: Option<Side>,
    pub guard: Guard,
    /// Transient phases passed through while emitting the actions.
    pub via: Vec<Phase>,
    pub to: Phase,
    pub actions: Vec<ActionTemplate>,
    pub held: HeldUpdate,
    pub outstanding_request: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub initial: Phase,
    pub phases: Vec<Phase>,
    pub events: Vec<EventKind>,
    pub actions: Vec<ActionKind>,
    pub transitions: Vec<Transition>,
}

fn act(action: ActionKind, operand: Operand, publisher: Republish) -> ActionTemplate {
    ActionTemplate {
        action,
        operand,
        publisher,
    }
}

/// Complete transition table of the gateway core.
pub fn transition_table() -> TransitionTable {
    use ActionKind::*;
    use Operand::{Event, Held};
    use Republish::*;

    let request = act(RequestSmtMessage, Operand::None, Unchanged);
    let row = |from, event, side, guard, via: &[Phase], to, actions, held, outstanding| Transition {
        from,
        event,
        side,
        guard,
        via: via.to_vec(),
        to,
        actions,
        held,
        outstanding_request: outstanding,
    };
    let smt = Some(Side::SmtSide);
    let hmt = Some(Side::HmtSide);
    let transitions = vec![
        row(
            Phase::AwaitBuffer,
            EventKind::BufferLocation,
            None,
            Guard::Any,
            &[],
            Phase::Polling,
            vec![request.clone()],
            HeldUpdate::Keep,
            true,
        ),
        row(
            Phase::Polling,
            EventKind::DelegateResponse,
            smt,
            Guard::Accept,
            &[Phase::FwdSmtToHmt],
            Phase::Polling,
            vec![act(TransferToHmt, Event, OwnHmt), request.clone()],
            HeldUpdate::Keep,
            true,
        ),
        row(
            Phase::Polling,
            EventKind::DelegateResponse,
            smt,
            Guard::Reject,
            &[],
            Phase::Polling,
            vec![act(Discard, Event, Unchanged), request.clone()],
            HeldUpdate::Keep,
            true,
        ),
        row(
            Phase::Polling,
            EventKind::HmtArrival,
            hmt,
            Guard::Accept,
            &[Phase::FwdHmtToMain],
            Phase::Cancelling,
            vec![
                act(TransferToMain, Event, Unchanged),
                act(CancelSmtRequest, Operand::None, Unchanged),
            ],
            HeldUpdate::SetEvent,
            true,
        ),
        row(
            Phase::Polling,
            EventKind::HmtArrival,
            hmt,
            Guard::Reject,
            &[],
            Phase::Polling,
            vec![act(Discard, Event, Unchanged)],
            HeldUpdate::Keep,
            true,
        ),
        row(
            Phase::Cancelling,
            EventKind::CancelResult,
            smt,
            Guard::Empty,
            &[Phase::PublishSmt],
            Phase::Polling,
            vec![act(PublishSmt, Held, OwnSmt), request.clone()],
            HeldUpdate::Clear,
            true,
        ),
        row(
            Phase::Cancelling,
            EventKind::CancelResult,
            smt,
            Guard::Accept,
            &[Phase::FlushPending, Phase::PublishSmt],
            Phase::Polling,
            vec![
                act(TransferToHmt, Event, OwnHmt),
                act(PublishSmt, Held, OwnSmt),
                request.clone(),
            ],
            HeldUpdate::Clear,
            true,
        ),
        row(
            Phase::Cancelling,
            EventKind::CancelResult,
            smt,
            Guard::Reject,
            &[Phase::FlushPending, Phase::PublishSmt],
            Phase::Polling,
            vec![act(Discard, Event, Unchanged), act(PublishSmt, Held, OwnSmt), request],
            HeldUpdate::Clear,
            true,
        ),
    ];
    TransitionTable {
        initial: Phase::AwaitBuffer,
        phases: Phase::ALL.to_vec(),
        events: vec![
            EventKind::BufferLocation,
            EventKind::DelegateResponse,
            EventKind::HmtArrival,
            EventKind::CancelResult,
        ],
        actions: vec![
            RequestSmtMessage,
            CancelSmtRequest,
            TransferToHmt,
            TransferToMain,
            PublishSmt,
            Discard,
        ],
        transitions,
    }
}

pub fn transition_table_json() -> String {
    serde_json::to_string_pretty(&transition_table()).expect("table serializes")
}
