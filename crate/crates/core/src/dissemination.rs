//! Per-participant round state machine.
//!
//! The driver (a simulator or a real radio loop) calls
//! [`ParticipantState::start_round0`] once, [`ParticipantState::on_receive`]
//! for every delivered message and [`ParticipantState::on_slot`] at every
//! slot boundary. Round `r` vertices are created at slot boundaries, so in a
//! lossless run slot `k` carries round `k`.
//!
//! A new vertex names the participant's previous vertex, every vertex
//! received directly since, and enough further tips that everything held
//! from earlier rounds is reachable from it. Late arrivals therefore get
//! folded into the next vertex (retrospection) and peers' deltas extend the
//! history (collaborative assistance). If the own frontier is still
//! incomplete one slot after the first check, enquiries go out, at most
//! `e_max` of them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::auth::{Keyring, SigningKey};
use crate::dag::{CompletenessReport, DagError, LocalDag, Slot};
use crate::equivocation::{self, EquivocationEvidence};
use crate::params::{ParticipantId, ProtocolParams};
use crate::vertex::{SignedRef, Vertex, VertexRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Status {
    Active,
    Complete,
    /// Enquiry budget spent without completeness, or, after the round budget,
    /// complete only once participants never heard from are left out.
    Degraded,
    /// Round budget spent without completeness.
    Halted,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Complete => "complete",
            Status::Degraded => "degraded",
            Status::Halted => "halted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MessageKind {
    RoundBroadcast,
    /// Broadcast request for history covering `missing`.
    EnquiryRequest { seq: u32, missing: BTreeSet<Slot> },
    /// Answer to the request `seq` of `requester`, carrying the whole DAG.
    EnquiryResponse { requester: ParticipantId, seq: u32 },
}

impl MessageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::RoundBroadcast => "round_broadcast",
            MessageKind::EnquiryRequest { .. } => "enquiry_request",
            MessageKind::EnquiryResponse { .. } => "enquiry_response",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BroadcastMessage {
    pub sender: ParticipantId,
    pub round: u32,
    /// The sender's latest vertex.
    pub new_vertex: Vertex,
    /// Vertices the sender learned since its previous broadcast, or its
    /// whole DAG for enquiry responses. Edges travel inside full vertices.
    pub delta: Vec<Vertex>,
    pub kind: MessageKind,
}

impl BroadcastMessage {
    /// Encoded size in bytes, used by delay models.
    pub fn wire_size(&self) -> usize {
        fn vsize(v: &Vertex) -> usize {
            71 + v
                .body
                .as_ref()
                .map_or(0, |b| 8 + b.payload.len() + 70 * b.parents.len())
        }
        16 + vsize(&self.new_vertex) + self.delta.iter().map(vsize).sum::<usize>()
    }
}

/// A deferred enquiry response. The driver waits a random backoff and then
/// calls [`ParticipantState::fire`]; the response is dropped if another
/// participant answered first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResponseTicket {
    pub requester: ParticipantId,
    pub seq: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outgoing {
    Broadcast(BroadcastMessage),
    Respond(ResponseTicket),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdvanceDecision {
    Advance(BroadcastMessage),
    Wait { have: usize, need: usize },
    Halt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecoveryAction {
    /// Rely on retrospection and assistance until `round` is assembled.
    WaitPassive { round: u32 },
    /// Broadcast an enquiry serving `round`.
    Enquire { round: u32, missing: BTreeSet<Slot> },
    /// Enquiry budget exhausted.
    Degrade,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecoveryPlan {
    pub actions: Vec<RecoveryAction>,
}

impl RecoveryPlan {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProtocolEvent {
    Started { vref: VertexRef },
    Advanced { vref: VertexRef, originals: usize },
    Waiting { round: u32, have: usize, need: usize },
    /// `round` is the round being assembled when the evidence appeared.
    EquivocationDetected { round: u32, evidence: EquivocationEvidence },
    RecoveryWait { round: u32, missing: usize },
    EnquirySent { round: u32, seq: u32, missing: BTreeSet<Slot> },
    EnquiryAnswered { requester: ParticipantId, seq: u32 },
    StatusChanged { round: u32, status: Status },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("round 0 already started")]
    AlreadyStarted,
    #[error("round 0 not started yet")]
    NotStarted,
    #[error("round-0 payload must be non-empty")]
    EmptyPayload,
    #[error("round broadcast from {sender} carries a vertex of {origin} round {round}")]
    SenderMismatch {
        sender: ParticipantId,
        origin: ParticipantId,
        round: u32,
    },
    #[error(transparent)]
    Dag(#[from] DagError),
}

#[derive(Clone, Debug)]
pub struct ParticipantState {
    id: ParticipantId,
    params: ProtocolParams,
    key: SigningKey,
    ring: Keyring,
    dag: LocalDag,
    current_round: u32,
    /// Own vertex per round.
    own: BTreeMap<u32, VertexRef>,
    last_broadcast: BTreeMap<u32, BroadcastMessage>,
    /// Slots asked for in enquiries that are still missing.
    pending_enquiries: BTreeSet<Slot>,
    status: Status,
    /// Vertices received directly since the last own vertex.
    received: BTreeSet<VertexRef>,
    /// Refs learned since the last broadcast.
    unsent: BTreeSet<VertexRef>,
    /// Slot of the first incomplete evaluation of the current episode.
    incomplete_since: Option<u64>,
    enquiries: u32,
    waiting_since: Option<u64>,
    origin_enquiries: u32,
    next_seq: u32,
    tickets: BTreeSet<ResponseTicket>,
    complete_round: Option<u32>,
    /// Set once the round budget is spent.
    finished: bool,
    /// Rounds to keep broadcasting after completion; `None` means until the
    /// round budget.
    linger: Option<u32>,
    events: Vec<ProtocolEvent>,
}

impl ParticipantState {
    pub fn new(params: ProtocolParams, key: SigningKey, ring: Keyring) -> Self {
        ParticipantState {
            id: key.owner(),
            params,
            key,
            ring,
            dag: LocalDag::new(),
            current_round: 0,
            own: BTreeMap::new(),
            last_broadcast: BTreeMap::new(),
            pending_enquiries: BTreeSet::new(),
            status: Status::Active,
            received: BTreeSet::new(),
            unsent: BTreeSet::new(),
            incomplete_since: None,
            enquiries: 0,
            waiting_since: None,
            origin_enquiries: 0,
            next_seq: 0,
            tickets: BTreeSet::new(),
            complete_round: None,
            finished: false,
            linger: None,
            events: Vec::new(),
        }
    }

    pub fn with_linger(mut self, rounds: Option<u32>) -> Self {
        self.linger = rounds;
        self
    }

    pub fn id(&self) -> ParticipantId {
        self.id
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn dag(&self) -> &LocalDag {
        &self.dag
    }

    pub fn current_round(&self) -> u32 {
        self.current_round
    }

    pub fn status(&self) -> Status {
        self.status
    }

    /// Round whose vertex first satisfied completeness.
    pub fn complete_round(&self) -> Option<u32> {
        self.complete_round
    }

    pub fn frontier(&self) -> Option<VertexRef> {
        self.own.values().next_back().copied()
    }

    pub fn own_vertex(&self, round: u32) -> Option<&Vertex> {
        self.own.get(&round).and_then(|r| self.dag.get(r))
    }

    pub fn last_broadcast(&self) -> &BTreeMap<u32, BroadcastMessage> {
        &self.last_broadcast
    }

    pub fn pending_enquiries(&self) -> &BTreeSet<Slot> {
        &self.pending_enquiries
    }

    pub fn take_events(&mut self) -> Vec<ProtocolEvent> {
        core::mem::take(&mut self.events)
    }

    /// Creates the round-0 vertex and its broadcast.
    pub fn start_round0(&mut self, payload: Vec<u8>) -> Result<BroadcastMessage, ProtocolError> {
        if !self.own.is_empty() {
            return Err(ProtocolError::AlreadyStarted);
        }
        if payload.is_empty() {
            return Err(ProtocolError::EmptyPayload);
        }
        let v = Vertex::create(&self.key, 0, payload, BTreeSet::new());
        self.events.push(ProtocolEvent::Started { vref: v.vref });
        Ok(self.adopt(v))
    }

    /// Merges a delivered message. Returns a deferred response when the
    /// message is an enquiry this participant can help with.
    pub fn on_receive(&mut self, msg: &BroadcastMessage) -> Result<Vec<Outgoing>, ProtocolError> {
        let nv = &msg.new_vertex;
        if nv.vref.origin != msg.sender
            || (msg.kind == MessageKind::RoundBroadcast && nv.vref.round != msg.round)
        {
            return Err(ProtocolError::SenderMismatch {
                sender: msg.sender,
                origin: nv.vref.origin,
                round: nv.vref.round,
            });
        }
        let learned = self
            .dag
            .absorb_vertices(msg.delta.iter().chain(core::iter::once(nv)), &self.ring)?;
        if msg.sender != self.id {
            self.received.insert(nv.vref);
        }
        self.learn(&learned);

        let mut out = Vec::new();
        match &msg.kind {
            MessageKind::RoundBroadcast => {}
            MessageKind::EnquiryRequest { seq, missing } => {
                if msg.sender != self.id && self.frontier().is_some() && self.can_help(missing) {
                    let t = ResponseTicket {
                        requester: msg.sender,
                        seq: *seq,
                    };
                    if self.tickets.insert(t) {
                        out.push(Outgoing::Respond(t));
                    }
                }
            }
            MessageKind::EnquiryResponse { requester, seq } => {
                self.tickets.remove(&ResponseTicket {
                    requester: *requester,
                    seq: *seq,
                });
            }
        }
        if !learned.is_empty() && self.status != Status::Complete {
            // Filled placeholders can complete the current frontier.
            self.check_complete();
        }
        Ok(out)
    }

    /// Merges vertices obtained outside round broadcasts, e.g. fetched by a
    /// layer above.
    pub fn absorb(&mut self, vertices: &[Vertex]) -> Result<(), ProtocolError> {
        let learned = self.dag.absorb_vertices(vertices, &self.ring)?;
        self.learn(&learned);
        if !learned.is_empty() && self.status != Status::Complete {
            self.check_complete();
        }
        Ok(())
    }

    /// Builds the response for a ticket unless someone else answered first.
    pub fn fire(&mut self, ticket: ResponseTicket) -> Option<BroadcastMessage> {
        if !self.tickets.remove(&ticket) {
            return None;
        }
        let frontier = self.dag.get(&self.frontier()?)?.clone();
        let delta: Vec<Vertex> = self
            .dag
            .vertices()
            .filter(|v| v.vref != frontier.vref)
            .cloned()
            .collect();
        self.unsent.clear();
        self.events.push(ProtocolEvent::EnquiryAnswered {
            requester: ticket.requester,
            seq: ticket.seq,
        });
        Some(BroadcastMessage {
            sender: self.id,
            round: self.current_round,
            new_vertex: frontier,
            delta,
            kind: MessageKind::EnquiryResponse {
                requester: ticket.requester,
                seq: ticket.seq,
            },
        })
    }

    /// Slot boundary `slot` (slot 0 is the start). Advances if possible,
    /// re-broadcasts the frontier otherwise, then runs recovery. Round
    /// `r_max` gets a full slot; the boundary after it finalizes.
    pub fn on_slot(&mut self, slot: u64) -> Result<Vec<Outgoing>, ProtocolError> {
        if self.own.is_empty() {
            return Err(ProtocolError::NotStarted);
        }
        let mut out = Vec::new();
        if self.is_final() {
            return Ok(out);
        }
        if slot > u64::from(self.params.r_max) {
            self.finalize();
            return Ok(out);
        }
        if let (Some(l), Some(c)) = (self.linger, self.complete_round) {
            if self.current_round >= c + l {
                self.finished = true;
                return Ok(out);
            }
        }
        match self.try_advance() {
            AdvanceDecision::Advance(m) => {
                self.waiting_since = None;
                out.push(Outgoing::Broadcast(m));
            }
            AdvanceDecision::Wait { have, need } => {
                self.events.push(ProtocolEvent::Waiting {
                    round: self.current_round + 1,
                    have,
                    need,
                });
                let since = *self.waiting_since.get_or_insert(slot);
                if slot > since && self.origin_enquiries < self.params.e_max {
                    let missing = self.missing_originals();
                    if !missing.is_empty() {
                        self.origin_enquiries += 1;
                        out.push(Outgoing::Broadcast(self.enquiry(missing)));
                    }
                }
                if out.is_empty() {
                    out.push(Outgoing::Broadcast(self.rebroadcast()));
                }
            }
            AdvanceDecision::Halt => {}
        }
        if self.status != Status::Complete {
            self.check_complete();
        }
        if self.status != Status::Complete && self.current_round >= 2 {
            out.extend(self.run_recovery(slot).map(Outgoing::Broadcast));
        }
        Ok(out)
    }

    /// Creates the next vertex if at least `2f+1` originals are reachable
    /// from the prospective parents.
    pub fn try_advance(&mut self) -> AdvanceDecision {
        if self.current_round >= self.params.r_max {
            self.finalize();
            return AdvanceDecision::Halt;
        }
        let next = self.current_round + 1;
        let parents = self.prospective_parents(next);
        let roots: Vec<VertexRef> = parents.iter().map(|p| p.vref).collect();
        let have = self.dag.extract_originals_from(&roots).len();
        let need = self.params.advance_quorum();
        if have < need {
            return AdvanceDecision::Wait { have, need };
        }
        let v = Vertex::create(&self.key, next, Vec::new(), parents);
        self.events.push(ProtocolEvent::Advanced {
            vref: v.vref,
            originals: have,
        });
        AdvanceDecision::Advance(self.adopt(v))
    }

    /// Recovery plan for the current frontier, empty when it is complete.
    pub fn plan_recovery(&self) -> RecoveryPlan {
        self.plan_at(self.incomplete_since.map_or(0, |s| s + 1))
    }

    fn plan_at(&self, slot: u64) -> RecoveryPlan {
        let mut plan = RecoveryPlan::default();
        let Some(report) = self.report() else {
            return plan;
        };
        if report.complete || self.current_round < 2 {
            return plan;
        }
        let waited = self.incomplete_since.is_some_and(|s| slot > s);
        let mut round = self.current_round + 1;
        if !waited {
            plan.actions.push(RecoveryAction::WaitPassive { round });
            round += 1;
        }
        for _ in self.enquiries..self.params.e_max {
            plan.actions.push(RecoveryAction::Enquire {
                round,
                missing: report.missing.clone(),
            });
            round += 1;
        }
        plan.actions.push(RecoveryAction::Degrade);
        plan
    }

    fn run_recovery(&mut self, slot: u64) -> Option<BroadcastMessage> {
        let plan = self.plan_at(slot);
        let first = plan.actions.into_iter().next()?;
        self.incomplete_since.get_or_insert(slot);
        match first {
            RecoveryAction::WaitPassive { round } => {
                let missing = self.report().map_or(0, |r| r.missing.len());
                self.events.push(ProtocolEvent::RecoveryWait { round, missing });
                None
            }
            RecoveryAction::Enquire { missing, .. } => {
                self.enquiries += 1;
                Some(self.enquiry(missing))
            }
            RecoveryAction::Degrade => {
                if self.status == Status::Active {
                    self.set_status(Status::Degraded);
                }
                None
            }
        }
    }

    fn enquiry(&mut self, missing: BTreeSet<Slot>) -> BroadcastMessage {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending_enquiries.extend(missing.iter().copied());
        self.events.push(ProtocolEvent::EnquirySent {
            round: self.current_round + 1,
            seq,
            missing: missing.clone(),
        });
        let mut m = self.rebroadcast();
        m.kind = MessageKind::EnquiryRequest { seq, missing };
        m
    }

    /// The frontier again, with whatever was learned since.
    fn rebroadcast(&mut self) -> BroadcastMessage {
        let frontier = self.frontier().expect("started");
        let m = BroadcastMessage {
            sender: self.id,
            round: self.current_round,
            new_vertex: self.dag.get(&frontier).expect("own vertex").clone(),
            delta: self.drain_unsent(Some(frontier)),
            kind: MessageKind::RoundBroadcast,
        };
        self.last_broadcast.insert(self.current_round, m.clone());
        m
    }

    fn adopt(&mut self, v: Vertex) -> BroadcastMessage {
        let round = v.vref.round;
        let mut learned = Vec::new();
        self.dag
            .insert(v.clone(), &self.ring, &mut learned)
            .expect("own vertex verifies");
        self.own.insert(round, v.vref);
        self.current_round = round;
        self.received.clear();
        let m = BroadcastMessage {
            sender: self.id,
            round,
            delta: self.drain_unsent(Some(v.vref)),
            new_vertex: v,
            kind: MessageKind::RoundBroadcast,
        };
        self.last_broadcast.insert(round, m.clone());
        m
    }

    fn drain_unsent(&mut self, skip: Option<VertexRef>) -> Vec<Vertex> {
        let refs = core::mem::take(&mut self.unsent);
        refs.into_iter()
            .filter(|r| Some(*r) != skip)
            .filter_map(|r| self.dag.get(&r).cloned())
            .collect()
    }

    fn learn(&mut self, learned: &[VertexRef]) {
        self.unsent.extend(learned.iter().copied());
        let mut slots: Vec<Slot> = learned.iter().map(|r| r.slot()).collect();
        slots.dedup();
        for slot in slots {
            if self.dag.byzantine().contains(&slot.origin) {
                continue;
            }
            let mut vs = self.dag.variants(slot).map(Vertex::to_digest_only);
            let (Some(variant_a), Some(variant_b)) = (vs.next(), vs.next()) else {
                continue;
            };
            drop(vs);
            let evidence = EquivocationEvidence {
                offender: slot.origin,
                round: slot.round,
                variant_a,
                variant_b,
            };
            equivocation::invalidate_in_place(&mut self.dag, &evidence, &self.ring)
                .expect("variants held in the DAG are valid evidence");
            self.events.push(ProtocolEvent::EquivocationDetected {
                round: self.current_round + 1,
                evidence,
            });
        }
        if !self.pending_enquiries.is_empty() {
            let dag = &self.dag;
            self.pending_enquiries.retain(|s| !covers(dag, *s));
        }
    }

    /// Own frontier, direct receipts, then the newest held vertices not yet
    /// reachable, until every held vertex below `next` is covered.
    fn prospective_parents(&self, next: u32) -> BTreeSet<SignedRef> {
        let mut covered = BTreeSet::new();
        let mut parents = BTreeSet::new();
        let frontier = self.frontier().into_iter();
        let direct = self.received.iter().copied();
        let rest = self.dag.refs().rev().copied();
        for r in frontier.chain(direct).chain(rest) {
            if r.round >= next || covered.contains(&r) {
                continue;
            }
            if let Some(v) = self.dag.get(&r) {
                parents.insert(v.signed_ref());
                self.dag.ancestors_into(&r, &mut covered);
            }
        }
        parents
    }

    fn report(&self) -> Option<CompletenessReport> {
        let f = self.frontier()?;
        Some(self.dag.completeness_from(&[f], &self.params, false))
    }

    fn check_complete(&mut self) {
        if self.current_round < 2 || self.status == Status::Complete || self.finished {
            return;
        }
        if self.report().is_some_and(|r| r.complete) {
            self.complete_round = Some(self.current_round);
            self.pending_enquiries.clear();
            self.set_status(Status::Complete);
        }
    }

    /// Whether the round budget is spent.
    pub fn is_final(&self) -> bool {
        self.finished
    }

    fn finalize(&mut self) {
        if self.finished {
            return;
        }
        self.finished = true;
        if self.status == Status::Complete {
            return;
        }
        let f = self.frontier().expect("started");
        let rep = self.dag.completeness_from(&[f], &self.params, true);
        let status = if self.current_round >= 2 && rep.complete {
            Status::Degraded
        } else {
            Status::Halted
        };
        self.set_status(status);
    }

    fn set_status(&mut self, status: Status) {
        if self.status != status {
            self.status = status;
            self.events.push(ProtocolEvent::StatusChanged {
                round: self.current_round,
                status,
            });
        }
    }

    fn missing_originals(&self) -> BTreeSet<Slot> {
        self.params
            .participants()
            .map(|id| Slot::new(id, 0))
            .filter(|s| !self.dag.variants(*s).any(|v| v.is_full()))
            .collect()
    }

    fn can_help(&self, missing: &BTreeSet<Slot>) -> bool {
        missing.iter().any(|s| self.dag.variants(*s).any(|v| v.is_full()))
    }
}

fn covers(dag: &LocalDag, slot: Slot) -> bool {
    dag.variants(slot).any(|v| v.is_full())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    struct Net {
        ps: Vec<ParticipantState>,
    }

    impl Net {
        fn new(n: usize) -> Self {
            let params = ProtocolParams::for_n(n).unwrap();
            let ring = Keyring::from_seed(42, n);
            let ps = (0..n as u16)
                .map(|i| ParticipantState::new(params, ring.signing_key(ParticipantId(i)), ring.clone()))
                .collect();
            Net { ps }
        }

        /// Delivers `msgs` to everybody except the sender, unless `drop`.
        fn deliver(&mut self, msgs: &[BroadcastMessage], drop: impl Fn(&BroadcastMessage, usize) -> bool) {
            for m in msgs {
                for (j, p) in self.ps.iter_mut().enumerate() {
                    if j != m.sender.index() && !drop(m, j) {
                        p.on_receive(m).unwrap();
                    }
                }
            }
        }

        fn slot(&mut self, k: u64) -> Vec<BroadcastMessage> {
            let mut out = Vec::new();
            for p in &mut self.ps {
                for o in p.on_slot(k).unwrap() {
                    if let Outgoing::Broadcast(m) = o {
                        out.push(m);
                    }
                }
            }
            out
        }
    }

    #[test]
    fn start_twice_is_an_error() {
        let mut net = Net::new(4);
        let m = net.ps[0].start_round0(b"v0".to_vec()).unwrap();
        assert_eq!(m.new_vertex.vref.round, 0);
        assert_eq!(m.new_vertex.parents().count(), 0);
        assert_eq!(net.ps[0].start_round0(b"v0".to_vec()), Err(ProtocolError::AlreadyStarted));
        assert_eq!(net.ps[1].start_round0(Vec::new()), Err(ProtocolError::EmptyPayload));
    }

    #[test]
    fn lossless_run_completes_at_round_two() {
        let mut net = Net::new(4);
        let mut msgs: Vec<_> = (0..4)
            .map(|i| net.ps[i].start_round0(vec![i as u8 + 1]).unwrap())
            .collect();
        for k in 1..=2 {
            net.deliver(&msgs, |_, _| false);
            msgs = net.slot(k);
        }
        for p in &net.ps {
            assert_eq!(p.status(), Status::Complete);
            assert_eq!(p.complete_round(), Some(2));
            assert!(p.plan_recovery().is_empty());
        }
    }

    #[test]
    fn duplicate_delivery_changes_nothing() {
        let mut net = Net::new(4);
        let m = net.ps[1].start_round0(b"x".to_vec()).unwrap();
        net.ps[0].on_receive(&m).unwrap();
        let before = net.ps[0].dag().clone();
        net.ps[0].on_receive(&m).unwrap();
        assert_eq!(net.ps[0].dag(), &before);
    }

    #[test]
    fn advance_needs_quorum_of_originals() {
        let mut net = Net::new(4);
        let msgs: Vec<_> = (0..4).map(|i| net.ps[i].start_round0(vec![1]).unwrap()).collect();
        // p0 hears only from p1: 2 originals < 3.
        net.ps[0].on_receive(&msgs[1]).unwrap();
        assert_eq!(net.ps[0].try_advance(), AdvanceDecision::Wait { have: 2, need: 3 });
        net.ps[0].on_receive(&msgs[2]).unwrap();
        assert!(matches!(net.ps[0].try_advance(), AdvanceDecision::Advance(_)));
        assert_eq!(net.ps[0].current_round(), 1);
    }

    #[test]
    fn rejects_mismatched_sender() {
        let mut net = Net::new(4);
        let mut m = net.ps[1].start_round0(b"x".to_vec()).unwrap();
        m.sender = ParticipantId(2);
        assert!(matches!(net.ps[0].on_receive(&m), Err(ProtocolError::SenderMismatch { .. })));
    }
}
