//! Simulator adapters for the dissemination and ordering state machines,
//! and the adversary behaviours that wrap them.

use std::collections::BTreeSet;

use dagcast_core::ordering::{OrderingConfig, OrderingEvent, OrderingMessage, OrderingNode, OrderingOutgoing};
use dagcast_core::{
    BroadcastMessage, Keyring, Outgoing, ParticipantId, ParticipantState, ProtocolEvent, ProtocolParams,
    ResponseTicket, Status, VertexRef,
};

use crate::netsim::{Action, AdversaryKind, NodeEvent, SimConfig, SimNode, Wire};

impl Wire for BroadcastMessage {
    fn sender(&self) -> ParticipantId {
        self.sender
    }
    fn round(&self) -> u32 {
        self.round
    }
    fn kind(&self) -> &'static str {
        self.kind.as_str()
    }
    fn size(&self) -> usize {
        self.wire_size()
    }
    fn vref(&self) -> Option<VertexRef> {
        Some(self.new_vertex.vref)
    }
}

impl Wire for OrderingMessage {
    fn sender(&self) -> ParticipantId {
        OrderingMessage::sender(self)
    }
    fn round(&self) -> u32 {
        match self {
            OrderingMessage::Instance { msg, .. } => msg.round,
            _ => 0,
        }
    }
    fn kind(&self) -> &'static str {
        match self {
            OrderingMessage::Instance { msg, .. } => msg.kind.as_str(),
            OrderingMessage::Fetch { .. } => "fetch",
            OrderingMessage::Supply { .. } => "supply",
        }
    }
    fn size(&self) -> usize {
        match self {
            OrderingMessage::Instance { msg, .. } => msg.wire_size() + 4,
            OrderingMessage::Fetch { owners, .. } => 8 + 2 * owners.len(),
            OrderingMessage::Supply { originals, .. } => {
                8 + originals.iter().map(|v| 140 + v.payload().map_or(0, <[u8]>::len)).sum::<usize>()
            }
        }
    }
    fn step(&self) -> Option<u32> {
        Some(OrderingMessage::step(self))
    }
    fn vref(&self) -> Option<VertexRef> {
        match self {
            OrderingMessage::Instance { msg, .. } => Some(msg.new_vertex.vref),
            _ => None,
        }
    }
}

fn slot_list(slots: &BTreeSet<dagcast_core::Slot>) -> String {
    let parts: Vec<String> = slots.iter().map(|s| format!("{}[{}]", s.origin, s.round)).collect();
    parts.join(" ")
}

/// Trace rendering of a dissemination event.
pub fn protocol_event(e: &ProtocolEvent) -> NodeEvent {
    let (event, vref, detail) = match e {
        ProtocolEvent::Started { vref } => ("start", Some(*vref), String::new()),
        ProtocolEvent::Advanced { vref, originals } => ("advance", Some(*vref), format!("originals={originals}")),
        ProtocolEvent::Waiting { round, have, need } => {
            ("wait", None, format!("round={round} originals={have} need={need}"))
        }
        ProtocolEvent::EquivocationDetected { round, evidence } => (
            "equivocation",
            Some(evidence.variant_a.vref),
            format!(
                "offender={} detected_round={round} variant_b={}",
                evidence.offender,
                evidence.variant_b.vref.digest.to_hex()
            ),
        ),
        ProtocolEvent::RecoveryWait { round, missing } => {
            ("recovery_wait", None, format!("round={round} missing={missing}"))
        }
        ProtocolEvent::EnquirySent { round, seq, missing } => (
            "enquiry",
            None,
            format!("round={round} seq={seq} missing={}", slot_list(missing)),
        ),
        ProtocolEvent::EnquiryAnswered { requester, seq } => {
            ("enquiry_answered", None, format!("requester={requester} seq={seq}"))
        }
        ProtocolEvent::StatusChanged { round, status } => {
            ("status", None, format!("round={round} status={}", status.as_str()))
        }
    };
    NodeEvent { event, vref, detail }
}

/// One dissemination participant.
#[derive(Debug)]
pub struct DisseminationNode {
    pub state: ParticipantState,
    payload: Vec<u8>,
}

impl DisseminationNode {
    pub fn new(state: ParticipantState, payload: Vec<u8>) -> Self {
        DisseminationNode { state, payload }
    }

    fn actions(&mut self, out: Result<Vec<Outgoing>, dagcast_core::ProtocolError>) -> Vec<Action<BroadcastMessage, ResponseTicket>> {
        match out {
            Ok(out) => out
                .into_iter()
                .map(|o| match o {
                    Outgoing::Broadcast(msg) => Action::Send { msg, to: None },
                    Outgoing::Respond(t) => Action::Backoff(t),
                })
                .collect(),
            // Malformed input is dropped.
            Err(_) => Vec::new(),
        }
    }
}

impl SimNode for DisseminationNode {
    type Msg = BroadcastMessage;
    type Ticket = ResponseTicket;

    fn id(&self) -> ParticipantId {
        self.state.id()
    }

    fn start(&mut self) -> Vec<Action<BroadcastMessage, ResponseTicket>> {
        let m = self.state.start_round0(self.payload.clone()).expect("fresh participant");
        vec![Action::Send { msg: m, to: None }]
    }

    fn on_receive(&mut self, msg: &BroadcastMessage) -> Vec<Action<BroadcastMessage, ResponseTicket>> {
        let out = self.state.on_receive(msg);
        self.actions(out)
    }

    fn on_slot(&mut self, slot: u64) -> Vec<Action<BroadcastMessage, ResponseTicket>> {
        let out = self.state.on_slot(slot);
        self.actions(out)
    }

    fn fire(&mut self, ticket: ResponseTicket) -> Vec<Action<BroadcastMessage, ResponseTicket>> {
        self.state
            .fire(ticket)
            .map(|msg| Action::Send { msg, to: None })
            .into_iter()
            .collect()
    }

    fn drain_events(&mut self) -> Vec<NodeEvent> {
        self.state.take_events().iter().map(protocol_event).collect()
    }

    fn finished(&self) -> bool {
        self.state.status() == Status::Complete || self.state.is_final()
    }

    fn work(&self) -> usize {
        self.state.dag().len()
    }
}

/// Ordering participant.
#[derive(Debug)]
pub struct OrderingSimNode {
    pub node: OrderingNode,
    max_steps: u32,
}

impl OrderingSimNode {
    pub fn new(node: OrderingNode, max_steps: u32) -> Self {
        OrderingSimNode { node, max_steps }
    }

    fn actions(
        out: Result<Vec<OrderingOutgoing>, dagcast_core::ProtocolError>,
    ) -> Vec<Action<OrderingMessage, (u32, ResponseTicket)>> {
        out.unwrap_or_default()
            .into_iter()
            .map(|o| match o {
                OrderingOutgoing::Broadcast(msg) => Action::Send { msg, to: None },
                OrderingOutgoing::Respond { step, ticket } => Action::Backoff((step, ticket)),
            })
            .collect()
    }
}

impl SimNode for OrderingSimNode {
    type Msg = OrderingMessage;
    type Ticket = (u32, ResponseTicket);

    fn id(&self) -> ParticipantId {
        self.node.id()
    }

    fn start(&mut self) -> Vec<Action<OrderingMessage, (u32, ResponseTicket)>> {
        Self::actions(self.node.start())
    }

    fn on_receive(&mut self, msg: &OrderingMessage) -> Vec<Action<OrderingMessage, (u32, ResponseTicket)>> {
        Self::actions(self.node.on_receive(msg))
    }

    fn on_slot(&mut self, slot: u64) -> Vec<Action<OrderingMessage, (u32, ResponseTicket)>> {
        Self::actions(self.node.on_slot(slot))
    }

    fn fire(&mut self, (step, ticket): (u32, ResponseTicket)) -> Vec<Action<OrderingMessage, (u32, ResponseTicket)>> {
        self.node
            .fire(step, ticket)
            .map(|msg| Action::Send { msg, to: None })
            .into_iter()
            .collect()
    }

    fn drain_events(&mut self) -> Vec<NodeEvent> {
        self.node
            .take_events()
            .into_iter()
            .map(|e| match e {
                OrderingEvent::Instance { step, event } => {
                    let mut ne = protocol_event(&event);
                    ne.detail = format!("step={step} {}", ne.detail).trim_end().to_string();
                    ne
                }
                OrderingEvent::StepCreated { href, back_edges } => NodeEvent {
                    event: "step",
                    vref: None,
                    detail: format!("step={} digest={} back_edges={back_edges}", href.step, href.digest.to_hex()),
                },
                OrderingEvent::Authenticated { step, count } => NodeEvent {
                    event: "authenticated",
                    vref: None,
                    detail: format!("step={step} count={count}"),
                },
                OrderingEvent::Committed { index, anchor, bundle } => NodeEvent {
                    event: "commit",
                    vref: None,
                    detail: format!(
                        "index={index} step={} anchor={} digest={} bundle={bundle}",
                        anchor.step,
                        anchor.owner,
                        anchor.digest.to_hex()
                    ),
                },
            })
            .collect()
    }

    fn finished(&self) -> bool {
        let last = self.max_steps.saturating_sub(1);
        self.node.own_step() == Some(last) && self.node.instance(last).is_some_and(|s| s.is_final())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    A,
    B,
}

/// Honest node or an equivocator running two branches under one identity.
/// Branch A talks only to `partition`, branch B to everybody else; both
/// hear everything.
#[derive(Debug)]
pub enum Agent<N> {
    Single(N),
    Split {
        a: N,
        b: N,
        partition: BTreeSet<ParticipantId>,
        n: usize,
    },
}

impl<N: SimNode> Agent<N> {
    pub fn primary(&self) -> &N {
        match self {
            Agent::Single(x) | Agent::Split { a: x, .. } => x,
        }
    }

    pub fn primary_mut(&mut self) -> &mut N {
        match self {
            Agent::Single(x) | Agent::Split { a: x, .. } => x,
        }
    }

    fn side(branch: Branch, partition: &BTreeSet<ParticipantId>, n: usize) -> BTreeSet<ParticipantId> {
        (0..n as u16)
            .map(ParticipantId)
            .filter(|j| partition.contains(j) == (branch == Branch::A))
            .collect()
    }

    fn tag(
        acts: Vec<Action<N::Msg, N::Ticket>>,
        branch: Branch,
        partition: &BTreeSet<ParticipantId>,
        n: usize,
    ) -> Vec<Action<N::Msg, (Branch, N::Ticket)>> {
        let side = Self::side(branch, partition, n);
        acts.into_iter()
            .map(|a| match a {
                Action::Send { msg, to } => Action::Send {
                    msg,
                    to: Some(match to {
                        Some(t) => t.intersection(&side).copied().collect(),
                        None => side.clone(),
                    }),
                },
                Action::Backoff(t) => Action::Backoff((branch, t)),
            })
            .collect()
    }

    fn both(
        &mut self,
        mut f: impl FnMut(&mut N) -> Vec<Action<N::Msg, N::Ticket>>,
    ) -> Vec<Action<N::Msg, (Branch, N::Ticket)>> {
        match self {
            Agent::Single(x) => Self::tag(f(x), Branch::B, &BTreeSet::new(), 0)
                .into_iter()
                .map(|a| match a {
                    Action::Send { msg, .. } => Action::Send { msg, to: None },
                    other => other,
                })
                .collect(),
            Agent::Split { a, b, partition, n } => {
                let mut out = Self::tag(f(a), Branch::A, partition, *n);
                out.extend(Self::tag(f(b), Branch::B, partition, *n));
                out
            }
        }
    }
}

impl<N: SimNode> SimNode for Agent<N> {
    type Msg = N::Msg;
    type Ticket = (Branch, N::Ticket);

    fn id(&self) -> ParticipantId {
        self.primary().id()
    }

    fn start(&mut self) -> Vec<Action<N::Msg, Self::Ticket>> {
        self.both(|x| x.start())
    }

    fn on_receive(&mut self, msg: &N::Msg) -> Vec<Action<N::Msg, Self::Ticket>> {
        self.both(|x| x.on_receive(msg))
    }

    fn on_slot(&mut self, slot: u64) -> Vec<Action<N::Msg, Self::Ticket>> {
        self.both(|x| x.on_slot(slot))
    }

    fn fire(&mut self, (branch, t): Self::Ticket) -> Vec<Action<N::Msg, Self::Ticket>> {
        match self {
            Agent::Single(x) => x
                .fire(t)
                .into_iter()
                .map(|a| match a {
                    Action::Send { msg, to } => Action::Send { msg, to },
                    Action::Backoff(t) => Action::Backoff((Branch::B, t)),
                })
                .collect(),
            Agent::Split { a, b, partition, n } => {
                let node = if branch == Branch::A { a } else { b };
                Self::tag(node.fire(t), branch, partition, *n)
            }
        }
    }

    fn drain_events(&mut self) -> Vec<NodeEvent> {
        match self {
            Agent::Single(x) => x.drain_events(),
            Agent::Split { a, b, .. } => {
                let mut out = Vec::new();
                for (tag, x) in [("a", a), ("b", b)] {
                    out.extend(x.drain_events().into_iter().map(|mut e| {
                        e.detail = format!("{} branch={tag}", e.detail).trim_start().to_string();
                        e
                    }));
                }
                out
            }
        }
    }

    fn finished(&self) -> bool {
        match self {
            Agent::Single(x) => x.finished(),
            Agent::Split { a, b, .. } => a.finished() && b.finished(),
        }
    }

    fn work(&self) -> usize {
        match self {
            Agent::Single(x) => x.work(),
            Agent::Split { a, b, .. } => a.work().max(b.work()),
        }
    }
}

/// Round-0 payload of an honest participant.
pub fn honest_payload(id: ParticipantId) -> Vec<u8> {
    format!("reading:{}", id.0).into_bytes()
}

fn wrong_payload(id: ParticipantId) -> Vec<u8> {
    format!("reading:{}:forged", id.0).into_bytes()
}

/// Builds the dissemination population for a simulation config. Keys are
/// derived from the simulation seed.
pub fn dissemination_agents(cfg: &SimConfig, params: ProtocolParams) -> Vec<Agent<DisseminationNode>> {
    let ring = Keyring::from_seed(cfg.seed, cfg.n);
    let make = |id: ParticipantId, payload: Vec<u8>| {
        DisseminationNode::new(ParticipantState::new(params, ring.signing_key(id), ring.clone()), payload)
    };
    params
        .participants()
        .map(|id| match cfg.adversary(id) {
            AdversaryKind::Honest | AdversaryKind::Crash { .. } => Agent::Single(make(id, honest_payload(id))),
            AdversaryKind::WrongValue => Agent::Single(make(id, wrong_payload(id))),
            AdversaryKind::Equivocator { partition } => Agent::Split {
                a: make(id, format!("reading:{}:variant-a", id.0).into_bytes()),
                b: make(id, format!("reading:{}:variant-b", id.0).into_bytes()),
                partition: partition.into_iter().map(ParticipantId).collect(),
                n: cfg.n,
            },
        })
        .collect()
}

/// Builds the ordering population for a simulation config.
pub fn ordering_agents(cfg: &SimConfig, params: ProtocolParams, ocfg: &OrderingConfig) -> Vec<Agent<OrderingSimNode>> {
    let ring = Keyring::from_seed(cfg.seed, cfg.n);
    let make = |id: ParticipantId, salt: &[u8]| {
        OrderingSimNode::new(
            OrderingNode::new(params, ocfg.clone(), ring.signing_key(id), ring.clone(), salt.to_vec()),
            ocfg.max_steps,
        )
    };
    params
        .participants()
        .map(|id| match cfg.adversary(id) {
            AdversaryKind::Honest | AdversaryKind::Crash { .. } => Agent::Single(make(id, b"")),
            AdversaryKind::WrongValue => Agent::Single(make(id, b"forged:")),
            AdversaryKind::Equivocator { partition } => Agent::Split {
                a: make(id, b"variant-a:"),
                b: make(id, b"variant-b:"),
                partition: partition.into_iter().map(ParticipantId).collect(),
                n: cfg.n,
            },
        })
        .collect()
}
