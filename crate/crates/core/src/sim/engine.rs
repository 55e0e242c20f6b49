use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::platform::PlatformModel;
use super::scenario::Scenario;
use super::trace::{MemifSegment, MessageRecord, SimTrace, TraceEvent, TraceKind};
use super::{us_to_ns, SimError};
use crate::gateway::{self, EndpointId, GatewayAction, GatewayEvent, GatewayState, Message, Phase};
use crate::graph::{Domain, NodeId, TopicId, TopicImpl};

const MEMIF_EPS_BYTES: f64 = 1e-6;

/// Runs `scenario` on `platform` until every event has drained.
pub fn simulate(scenario: &Scenario, platform: &PlatformModel) -> Result<SimTrace, SimError> {
    scenario.validate()?;
    platform.validate()?;
    let mut engine = Engine::new(scenario, platform);
    engine.run()?;
    Ok(engine.finish())
}

#[derive(Debug, Clone)]
enum Reader {
    Node(NodeId),
    Delegate(NodeId),
    Gateway(usize),
}

#[derive(Debug, Clone, Copy)]
enum Direction {
    ToMain { stream_end: u64 },
    ToHmt,
}

#[derive(Debug)]
enum Ev {
    Release { entry: usize, index: u32 },
    ReactionPublish { node: NodeId, topic: TopicId, parent: u64 },
    DdsDeliver { msg: u64, readers: Vec<Reader> },
    DelegateHandoff { msg: u64, node: NodeId },
    MemifTick { generation: u64 },
    HmtDeliver { msg: u64, node: NodeId },
    GwHmtArrival { gw: usize, msg: Message, stream_end: u64 },
    GwDelegateReady { gw: usize },
    GwTransferStart { gw: usize, msg: Message, dir: Direction },
    GwTransferDone { gw: usize },
    GwCancelDone { gw: usize },
    GwStreamOut { gw: usize, msg: Message },
}

#[derive(Debug)]
enum Continuation {
    SmtRead { node: NodeId },
    GwToMain { gw: usize, stream_end: u64 },
    GwToHmt { gw: usize, msg: Message, stream_floor: u64 },
}

#[derive(Debug)]
struct Transfer {
    msg: u64,
    endpoint: String,
    remaining: f64,
    cont: Continuation,
}

/// Egalitarian processor sharing of the memory port.
#[derive(Debug)]
struct Memif {
    bytes_per_ns: f64,
    active: Vec<Transfer>,
    last_ns: u64,
    generation: u64,
    segments: Vec<MemifSegment>,
}

impl Memif {
    fn advance(&mut self, now: u64) {
        if !self.active.is_empty() && now > self.last_ns {
            let rate = self.bytes_per_ns / self.active.len() as f64;
            let moved = rate * (now - self.last_ns) as f64;
            for t in &mut self.active {
                t.remaining -= moved;
            }
            self.segments.push(MemifSegment {
                start_ns: self.last_ns,
                end_ns: now,
                active: self.active.len(),
                per_transfer_bytes_per_s: rate * 1e9,
            });
        }
        self.last_ns = now;
    }

    /// Delay until the next transfer finishes at the current sharing level.
    fn next_completion(&self) -> Option<u64> {
        let min = self.active.iter().map(|t| t.remaining).fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return None;
        }
        if min <= MEMIF_EPS_BYTES {
            return Some(0);
        }
        let rate = self.bytes_per_ns / self.active.len() as f64;
        Some((min / rate).ceil() as u64)
    }
}

#[derive(Debug)]
struct Response {
    msg: Message,
    event: Option<u64>,
    ready: bool,
}

/// Simulation-side wrapper around one gateway core: its delegate thread,
/// its HMT inbox and the action sequence it is executing.
#[derive(Debug)]
struct GatewaySim {
    topic: TopicId,
    name: String,
    state: GatewayState,
    hmt_inbox: VecDeque<(Message, u64)>,
    delegate_outstanding: bool,
    delegate_queue: VecDeque<Message>,
    response: Option<Response>,
    busy: bool,
    pending: VecDeque<GatewayAction>,
    stream_end: u64,
}

struct TopicRoute {
    kind: TopicImpl,
    hw_subs: Vec<NodeId>,
    sw_subs: Vec<NodeId>,
    gateway: Option<usize>,
}

struct Engine<'a> {
    scenario: &'a Scenario,
    platform: &'a PlatformModel,
    now: u64,
    seq: u64,
    heap: BinaryHeap<Reverse<(u64, u64)>>,
    events: HashMap<u64, Ev>,
    rng: ChaCha8Rng,
    memif: Memif,
    routes: BTreeMap<TopicId, TopicRoute>,
    gateways: Vec<GatewaySim>,
    messages: Vec<MessageRecord>,
    payloads: Vec<Message>,
    pub_seq: BTreeMap<(NodeId, TopicId), u64>,
    trace: Vec<TraceEvent>,
    loop_injections: usize,
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario, platform: &'a PlatformModel) -> Self {
        let mut routes = BTreeMap::new();
        let mut gateways = Vec::new();
        for t in scenario.graph.topic_ids() {
            let kind = scenario.comm_mapping.get(t).expect("validated mapping");
            let subs = scenario.graph.subscribers(t).expect("known topic");
            let (hw_subs, sw_subs) = subs.into_iter().partition(|n| scenario.node_mapping.is_hw(n));
            let gateway = (kind == TopicImpl::Gateway).then(|| {
                let name = format!("gw:{t}");
                let (state, _) = gateway::init(
                    EndpointId::new(format!("{name}/smt")),
                    EndpointId::new(format!("{name}/hmt")),
                );
                gateways.push(GatewaySim {
                    topic: t.clone(),
                    name,
                    state,
                    hmt_inbox: VecDeque::new(),
                    delegate_outstanding: false,
                    delegate_queue: VecDeque::new(),
                    response: None,
                    busy: false,
                    pending: VecDeque::new(),
                    stream_end: 0,
                });
                gateways.len() - 1
            });
            routes.insert(
                t.clone(),
                TopicRoute {
                    kind,
                    hw_subs,
                    sw_subs,
                    gateway,
                },
            );
        }
        Engine {
            scenario,
            platform,
            now: 0,
            seq: 0,
            heap: BinaryHeap::new(),
            events: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            memif: Memif {
                bytes_per_ns: platform.memif_bandwidth_bytes_per_s / 1e9,
                active: Vec::new(),
                last_ns: 0,
                generation: 0,
                segments: Vec::new(),
            },
            routes,
            gateways,
            messages: Vec::new(),
            payloads: Vec::new(),
            pub_seq: BTreeMap::new(),
            trace: Vec::new(),
            loop_injections: 0,
        }
    }

    fn schedule(&mut self, at: u64, ev: Ev) -> u64 {
        let id = self.seq;
        self.seq += 1;
        self.heap.push(Reverse((at, id)));
        self.events.insert(id, ev);
        id
    }

    fn cancel(&mut self, id: u64) {
        self.events.remove(&id);
    }

    fn jitter(&mut self) -> f64 {
        let j = self.platform.delegate_jitter;
        if j == 0.0 {
            1.0
        } else {
            1.0 + j * (2.0 * self.rng.gen::<f64>() - 1.0)
        }
    }

    fn osif_ns(&mut self) -> u64 {
        us_to_ns(self.platform.osif_roundtrip_us * self.jitter())
    }

    fn delegate_publish_ns(&mut self) -> u64 {
        us_to_ns(self.platform.delegate_publish_us * self.jitter())
    }

    fn record(&mut self, kind: TraceKind, message: Option<u64>, endpoint: impl Into<String>) {
        self.trace.push(TraceEvent {
            time_ns: self.now,
            kind,
            message,
            endpoint: endpoint.into(),
        });
    }

    fn run(&mut self) -> Result<(), SimError> {
        for gw in 0..self.gateways.len() {
            let (state, actions) = gateway::step(
                &self.gateways[gw].state,
                GatewayEvent::BufferLocation(0x1000 + gw as u64),
            )?;
            self.gateways[gw].state = state;
            self.gateways[gw].pending.extend(actions);
            self.drive(gw)?;
        }
        for (entry, w) in self.scenario.workload.iter().enumerate() {
            if w.count > 0 {
                self.schedule(us_to_ns(w.offset_us), Ev::Release { entry, index: 0 });
            }
        }
        while let Some(Reverse((at, id))) = self.heap.pop() {
            let Some(ev) = self.events.remove(&id) else {
                continue;
            };
            debug_assert!(at >= self.now);
            self.now = at;
            self.handle(ev)?;
        }
        Ok(())
    }

    fn finish(self) -> SimTrace {
        let expected = self
            .routes
            .iter()
            .map(|(t, r)| {
                let mut subs: Vec<_> = r
                    .hw_subs
                    .iter()
                    .map(|n| (n.clone(), Domain::Hardware))
                    .chain(r.sw_subs.iter().map(|n| (n.clone(), Domain::Software)))
                    .collect();
                subs.sort();
                (t.clone(), subs)
            })
            .collect();
        SimTrace {
            events: self.trace,
            messages: self.messages,
            expected,
            memif_bandwidth_bytes_per_s: self.platform.memif_bandwidth_bytes_per_s,
            memif_segments: self.memif.segments,
            loop_injections: self.loop_injections,
        }
    }

    fn handle(&mut self, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Release { entry, index } => {
                let w = &self.scenario.workload[entry];
                let (publisher, topic, size) = (w.publisher.clone(), w.topic.clone(), self.scenario.message_size(w));
                if index + 1 < w.count {
                    let next = self.now + us_to_ns(w.period_us);
                    self.schedule(
                        next,
                        Ev::Release {
                            entry,
                            index: index + 1,
                        },
                    );
                }
                self.publish(&publisher, &topic, size, None)?;
            }
            Ev::ReactionPublish { node, topic, parent } => {
                let size = self.scenario.graph.topic(&topic)?.message_size_bytes;
                self.publish(&node, &topic, size, Some(parent))?;
            }
            Ev::DdsDeliver { msg, readers } => {
                for reader in readers {
                    match reader {
                        Reader::Node(node) => self.deliver(msg, &node, TraceKind::SmtDeliver),
                        Reader::Delegate(node) => {
                            let at = self.now + self.osif_ns();
                            self.schedule(at, Ev::DelegateHandoff { msg, node });
                        }
                        Reader::Gateway(gw) => {
                            let m = self.payloads[msg as usize].clone();
                            let g = &mut self.gateways[gw];
                            if &m.publisher_id == g.state.own_smt_id() {
                                self.loop_injections += 1;
                            }
                            // The gateway's SMT subscriber sees the message as published on the SMT.
                            g.delegate_queue.push_back(m);
                            self.maybe_respond(gw);
                        }
                    }
                }
            }
            Ev::DelegateHandoff { msg, node } => {
                self.start_transfer(msg, node.to_string(), Continuation::SmtRead { node });
            }
            Ev::MemifTick { generation } => {
                if generation == self.memif.generation {
                    self.complete_transfers()?;
                }
            }
            Ev::HmtDeliver { msg, node } => self.deliver(msg, &node, TraceKind::HmtDeliver),
            Ev::GwHmtArrival { gw, msg, stream_end } => {
                self.gateways[gw].hmt_inbox.push_back((msg, stream_end));
                self.drive(gw)?;
            }
            Ev::GwDelegateReady { gw } => {
                if let Some(r) = self.gateways[gw].response.as_mut() {
                    r.ready = true;
                    r.event = None;
                }
                self.drive(gw)?;
            }
            Ev::GwTransferStart { gw, msg, dir } => {
                let name = self.gateways[gw].name.clone();
                let cont = match dir {
                    Direction::ToMain { stream_end } => Continuation::GwToMain { gw, stream_end },
                    Direction::ToHmt => {
                        let stream_floor = self.now + us_to_ns(self.platform.hmt_stream_us(msg.size_bytes));
                        Continuation::GwToHmt {
                            gw,
                            msg: msg.clone(),
                            stream_floor,
                        }
                    }
                };
                self.start_transfer(msg.id, name, cont);
            }
            Ev::GwTransferDone { gw } => {
                self.gateways[gw].busy = false;
                self.drive(gw)?;
            }
            Ev::GwCancelDone { gw } => {
                let raced = self.gateways[gw].response.take();
                if let Some(Response { event: Some(id), .. }) = &raced {
                    self.cancel(*id);
                }
                let g = &mut self.gateways[gw];
                g.delegate_outstanding = false;
                g.busy = false;
                self.feed(gw, GatewayEvent::CancelResult(raced.map(|r| r.msg)))?;
                self.drive(gw)?;
            }
            Ev::GwStreamOut { gw, msg } => {
                let topic = self.gateways[gw].topic.clone();
                let hw_subs = self.routes[&topic].hw_subs.clone();
                for node in hw_subs {
                    self.deliver(msg.id, &node, TraceKind::HmtDeliver);
                }
                // The gateway's own HMT subscriber receives the copy it just published.
                self.loop_injections += 1;
                let now = self.now;
                self.gateways[gw].hmt_inbox.push_back((msg, now));
                self.drive(gw)?;
            }
        }
        Ok(())
    }

    fn publish(&mut self, node: &NodeId, topic: &TopicId, size: u64, parent: Option<u64>) -> Result<(), SimError> {
        let id = self.messages.len() as u64;
        let seq = {
            let s = self.pub_seq.entry((node.clone(), topic.clone())).or_default();
            *s += 1;
            *s - 1
        };
        self.messages.push(MessageRecord {
            id,
            topic: topic.clone(),
            publisher: node.clone(),
            seq,
            size_bytes: size,
            publish_ns: self.now,
            parent,
        });
        let payload = Message {
            id,
            topic: topic.clone(),
            publisher_id: EndpointId::new(node.as_str()),
            seq,
            size_bytes: size,
            payload_digest: id.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ size,
        };
        self.payloads.push(payload.clone());
        self.record(TraceKind::Publish, Some(id), node.as_str());

        let hw_publisher = self.scenario.node_mapping.is_hw(node);
        let route = &self.routes[topic];
        let (kind, gateway) = (route.kind, route.gateway);
        let hw_subs = route.hw_subs.clone();
        let sw_subs = route.sw_subs.clone();
        let stream_ns = us_to_ns(self.platform.hmt_setup_us + self.platform.hmt_stream_us(size));
        match (kind, hw_publisher) {
            (TopicImpl::Software, _) => {
                // A hardware publisher's message already sits in main memory;
                // its delegate publishes the pointer.
                let delay = if hw_publisher { self.delegate_publish_ns() } else { 0 };
                let readers: Vec<Reader> = sw_subs
                    .into_iter()
                    .map(Reader::Node)
                    .chain(hw_subs.into_iter().map(Reader::Delegate))
                    .collect();
                self.fan_out(id, size, delay, readers);
            }
            (TopicImpl::Hardware, _) => {
                for n in hw_subs {
                    self.schedule(self.now + stream_ns, Ev::HmtDeliver { msg: id, node: n });
                }
            }
            (TopicImpl::Gateway, true) => {
                for n in hw_subs {
                    self.schedule(self.now + stream_ns, Ev::HmtDeliver { msg: id, node: n });
                }
                let gw = gateway.expect("gateway topic has a gateway");
                let header = self.now + us_to_ns(self.platform.hmt_setup_us);
                self.schedule(
                    header,
                    Ev::GwHmtArrival {
                        gw,
                        msg: payload,
                        stream_end: self.now + stream_ns,
                    },
                );
            }
            (TopicImpl::Gateway, false) => {
                let gw = gateway.expect("gateway topic has a gateway");
                let readers = sw_subs
                    .into_iter()
                    .map(Reader::Node)
                    .chain(std::iter::once(Reader::Gateway(gw)))
                    .collect();
                self.fan_out(id, size, 0, readers);
            }
        }
        Ok(())
    }

    fn fan_out(&mut self, msg: u64, size: u64, delay_ns: u64, readers: Vec<Reader>) {
        if readers.is_empty() {
            return;
        }
        let at = self.now + delay_ns + us_to_ns(self.platform.dds_delivery_us(size, readers.len()));
        self.schedule(at, Ev::DdsDeliver { msg, readers });
    }

    fn deliver(&mut self, msg: u64, node: &NodeId, kind: TraceKind) {
        self.record(kind, Some(msg), node.as_str());
        let topic = self.messages[msg as usize].topic.clone();
        let reacts: Vec<_> = self
            .scenario
            .reactions
            .iter()
            .filter(|r| &r.node == node && r.on_topic == topic)
            .map(|r| r.publish_topic.clone())
            .collect();
        for out in reacts {
            let at = self.now + us_to_ns(self.scenario.compute_of(node));
            self.schedule(
                at,
                Ev::ReactionPublish {
                    node: node.clone(),
                    topic: out,
                    parent: msg,
                },
            );
        }
    }

    fn start_transfer(&mut self, msg: u64, endpoint: String, cont: Continuation) {
        self.memif.advance(self.now);
        self.record(TraceKind::MemifXferStart, Some(msg), endpoint.clone());
        let size = self.messages[msg as usize].size_bytes as f64;
        self.memif.active.push(Transfer {
            msg,
            endpoint,
            remaining: size,
            cont,
        });
        self.reschedule_memif();
    }

    fn reschedule_memif(&mut self) {
        self.memif.generation += 1;
        if let Some(dt) = self.memif.next_completion() {
            let generation = self.memif.generation;
            self.schedule(self.now + dt, Ev::MemifTick { generation });
        }
    }

    fn complete_transfers(&mut self) -> Result<(), SimError> {
        self.memif.advance(self.now);
        let (done, active): (Vec<_>, Vec<_>) = std::mem::take(&mut self.memif.active)
            .into_iter()
            .partition(|t| t.remaining <= MEMIF_EPS_BYTES);
        self.memif.active = active;
        for t in done {
            self.record(TraceKind::MemifXferEnd, Some(t.msg), t.endpoint.clone());
            match t.cont {
                Continuation::SmtRead { node } => self.deliver(t.msg, &node, TraceKind::SmtDeliver),
                Continuation::GwToMain { gw, stream_end } => {
                    self.schedule(self.now.max(stream_end), Ev::GwTransferDone { gw });
                }
                Continuation::GwToHmt { gw, msg, stream_floor } => {
                    let done = self.now.max(stream_floor);
                    self.schedule(done + us_to_ns(self.platform.hmt_setup_us), Ev::GwStreamOut { gw, msg });
                    self.schedule(done, Ev::GwTransferDone { gw });
                }
            }
        }
        self.reschedule_memif();
        Ok(())
    }

    fn maybe_respond(&mut self, gw: usize) {
        let g = &self.gateways[gw];
        if !g.delegate_outstanding || g.response.is_some() || g.delegate_queue.is_empty() {
            return;
        }
        let at = self.now + self.osif_ns();
        let msg = self.gateways[gw].delegate_queue.pop_front().expect("non-empty");
        let event = self.schedule(at, Ev::GwDelegateReady { gw });
        self.gateways[gw].response = Some(Response {
            msg,
            event: Some(event),
            ready: false,
        });
    }

    fn feed(&mut self, gw: usize, event: GatewayEvent) -> Result<(), SimError> {
        let g = &mut self.gateways[gw];
        let (state, actions) = gateway::step(&g.state, event)?;
        g.state = state;
        g.pending.extend(actions);
        Ok(())
    }

    /// Executes queued actions until the core blocks, then polls for the
    /// next input (HMT before delegate).
    fn drive(&mut self, gw: usize) -> Result<(), SimError> {
        loop {
            while !self.gateways[gw].busy {
                let Some(action) = self.gateways[gw].pending.pop_front() else {
                    break;
                };
                self.execute(gw, action);
            }
            if self.gateways[gw].busy {
                return Ok(());
            }
            let g = &mut self.gateways[gw];
            if g.state.phase() != Phase::Polling {
                return Ok(());
            }
            if let Some((msg, stream_end)) = g.hmt_inbox.pop_front() {
                g.stream_end = stream_end;
                self.feed(gw, GatewayEvent::HmtArrival(msg))?;
            } else if g.response.as_ref().is_some_and(|r| r.ready) {
                let r = g.response.take().expect("ready response");
                g.delegate_outstanding = false;
                self.feed(gw, GatewayEvent::DelegateResponse(r.msg))?;
            } else {
                return Ok(());
            }
        }
    }

    fn execute(&mut self, gw: usize, action: GatewayAction) {
        let label = format!("{}:{}", self.gateways[gw].name, action.kind());
        self.record(TraceKind::GwAction, action.message().map(|m| m.id), label);
        let overhead = us_to_ns(self.platform.gateway_overhead_us);
        match action {
            GatewayAction::RequestSmtMessage => {
                self.gateways[gw].delegate_outstanding = true;
                self.maybe_respond(gw);
            }
            GatewayAction::CancelSmtRequest => {
                self.gateways[gw].busy = true;
                let at = self.now + self.osif_ns();
                self.schedule(at, Ev::GwCancelDone { gw });
            }
            GatewayAction::TransferToMain(msg) => {
                let stream_end = self.gateways[gw].stream_end;
                self.gateways[gw].busy = true;
                self.schedule(
                    self.now + overhead,
                    Ev::GwTransferStart {
                        gw,
                        msg,
                        dir: Direction::ToMain { stream_end },
                    },
                );
            }
            GatewayAction::TransferToHmt(msg) => {
                self.gateways[gw].busy = true;
                self.schedule(
                    self.now + overhead,
                    Ev::GwTransferStart {
                        gw,
                        msg,
                        dir: Direction::ToHmt,
                    },
                );
            }
            GatewayAction::PublishSmt(msg) => {
                let topic = self.gateways[gw].topic.clone();
                let readers: Vec<Reader> = self.routes[&topic]
                    .sw_subs
                    .iter()
                    .cloned()
                    .map(Reader::Node)
                    .chain(std::iter::once(Reader::Gateway(gw)))
                    .collect();
                // Subscribers see the gateway's republished copy.
                self.payloads[msg.id as usize] = msg.clone();
                let delay = self.delegate_publish_ns();
                self.fan_out(msg.id, msg.size_bytes, delay, readers);
            }
            GatewayAction::Discard(..) => {}
        }
    }
}
