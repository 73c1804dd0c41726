use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::commit::{CommitRecord, Committer};
use super::hdag::HorizontalDag;
use super::hvertex::{HRef, HVertex};
use crate::auth::{Keyring, SigningKey};
use crate::dissemination::{
    BroadcastMessage, Outgoing, ParticipantState, ProtocolError, ProtocolEvent, ResponseTicket,
    Status,
};
use crate::params::{ParticipantId, ProtocolParams};
use crate::vertex::Vertex;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderingConfig {
    pub coin_seed: u64,
    /// Steps `0..max_steps` are proposed.
    pub max_steps: u32,
    pub batch_size: usize,
    /// Rounds each dissemination instance keeps running after completion.
    pub linger: Option<u32>,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        OrderingConfig {
            coin_seed: 0,
            max_steps: 8,
            batch_size: 2,
            linger: Some(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderingMessage {
    Instance { step: u32, msg: BroadcastMessage },
    /// Request for the step-`step` vertices of `owners`.
    Fetch {
        sender: ParticipantId,
        step: u32,
        owners: BTreeSet<ParticipantId>,
    },
    /// Authenticated round-0 vertices of a step instance.
    Supply {
        sender: ParticipantId,
        step: u32,
        originals: Vec<Vertex>,
    },
}

impl OrderingMessage {
    pub fn sender(&self) -> ParticipantId {
        match self {
            OrderingMessage::Instance { msg, .. } => msg.sender,
            OrderingMessage::Fetch { sender, .. } | OrderingMessage::Supply { sender, .. } => *sender,
        }
    }

    pub fn step(&self) -> u32 {
        match self {
            OrderingMessage::Instance { step, .. }
            | OrderingMessage::Fetch { step, .. }
            | OrderingMessage::Supply { step, .. } => *step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderingOutgoing {
    Broadcast(OrderingMessage),
    Respond { step: u32, ticket: ResponseTicket },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderingEvent {
    Instance { step: u32, event: ProtocolEvent },
    StepCreated { href: HRef, back_edges: usize },
    Authenticated { step: u32, count: usize },
    Committed { index: usize, anchor: HRef, bundle: usize },
}

/// Authentications a participant grants for step `step`: full originals
/// of the instance that are not invalidated, decode to a well-formed
/// vertex of their origin and step, and are acknowledged by at least
/// `f + 1` other participants. A participant acknowledges an original when
/// one of its later full vertices reaches it; instances of different
/// participants may start a slot apart, so the round is not fixed.
pub fn authenticate(state: &ParticipantState, step: u32) -> BTreeSet<HRef> {
    let dag = state.dag();
    let p = state.params();
    let mut seen: BTreeMap<ParticipantId, BTreeSet<crate::vertex::VertexRef>> = BTreeMap::new();
    for c in dag.vertices().filter(|c| c.vref.round > 0 && c.is_full() && !dag.is_invalidated(&c.vref)) {
        dag.ancestors_into(&c.vref, seen.entry(c.vref.origin).or_default());
    }
    let mut out = BTreeSet::new();
    for v in dag.vertices().take_while(|v| v.vref.round == 0) {
        if dag.is_invalidated(&v.vref) {
            continue;
        }
        let Some(h) = v.payload().and_then(|b| HVertex::decode(b).ok()) else {
            continue;
        };
        if h.owner != v.vref.origin || h.step != step {
            continue;
        }
        let citers = seen
            .iter()
            .filter(|(c, anc)| **c != v.vref.origin && anc.contains(&v.vref))
            .count();
        if citers > p.f {
            out.insert(h.href());
        }
    }
    out
}

#[derive(Clone, Debug)]
struct Instance {
    state: ParticipantState,
    /// Global slot at which the own vertex was proposed.
    start: Option<u64>,
    harvested: BTreeSet<crate::vertex::VertexRef>,
}

/// One participant of the ordering layer: a dissemination instance per
/// step, the horizontal view built from their originals, and the
/// committer.
#[derive(Clone, Debug)]
pub struct OrderingNode {
    id: ParticipantId,
    params: ProtocolParams,
    cfg: OrderingConfig,
    salt: Vec<u8>,
    key: SigningKey,
    ring: Keyring,
    instances: BTreeMap<u32, Instance>,
    own_step: Option<u32>,
    view: HorizontalDag,
    committer: Committer,
    slot: u64,
    last_fetch: BTreeMap<u32, u64>,
    events: Vec<OrderingEvent>,
}

impl OrderingNode {
    /// `salt` prefixes every transaction; honest nodes use an empty salt.
    pub fn new(params: ProtocolParams, cfg: OrderingConfig, key: SigningKey, ring: Keyring, salt: Vec<u8>) -> Self {
        OrderingNode {
            id: key.owner(),
            view: HorizontalDag::new(params),
            committer: Committer::new(params, cfg.coin_seed),
            params,
            cfg,
            salt,
            key,
            ring,
            instances: BTreeMap::new(),
            own_step: None,
            slot: 0,
            last_fetch: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    pub fn id(&self) -> ParticipantId {
        self.id
    }

    pub fn view(&self) -> &HorizontalDag {
        &self.view
    }

    pub fn own_step(&self) -> Option<u32> {
        self.own_step
    }

    pub fn committer(&self) -> &Committer {
        &self.committer
    }

    pub fn commit_log(&self) -> &[CommitRecord] {
        self.committer.records()
    }

    pub fn instance(&self, step: u32) -> Option<&ParticipantState> {
        self.instances.get(&step).map(|i| &i.state)
    }

    pub fn take_events(&mut self) -> Vec<OrderingEvent> {
        let mut out = core::mem::take(&mut self.events);
        for (step, inst) in &mut self.instances {
            out.extend(
                inst.state
                    .take_events()
                    .into_iter()
                    .map(|event| OrderingEvent::Instance { step: *step, event }),
            );
        }
        out
    }

    fn batch(&self, step: u32) -> Vec<Vec<u8>> {
        (0..self.cfg.batch_size as u32)
            .map(|k| {
                let mut tx = self.salt.clone();
                tx.extend_from_slice(&self.id.0.to_le_bytes());
                tx.extend_from_slice(&step.to_le_bytes());
                tx.extend_from_slice(&k.to_le_bytes());
                tx
            })
            .collect()
    }

    fn instance_mut(&mut self, step: u32) -> &mut Instance {
        let (params, key, ring, linger) = (self.params, &self.key, &self.ring, self.cfg.linger);
        self.instances.entry(step).or_insert_with(|| Instance {
            state: ParticipantState::new(params, key.derive(u64::from(step)), ring.derive(u64::from(step)))
                .with_linger(linger),
            start: None,
            harvested: BTreeSet::new(),
        })
    }

    /// Proposes the step-0 vertex. GST is the start of the run.
    pub fn start(&mut self) -> Result<Vec<OrderingOutgoing>, ProtocolError> {
        self.step_advance(0, BTreeSet::new())
    }

    /// Creates the own vertex for `step` and launches its instance.
    fn step_advance(&mut self, step: u32, back_edges: BTreeSet<HRef>) -> Result<Vec<OrderingOutgoing>, ProtocolError> {
        let v = HVertex {
            owner: self.id,
            step,
            tx_batch: self.batch(step),
            back_edges,
        };
        self.events.push(OrderingEvent::StepCreated {
            href: v.href(),
            back_edges: v.back_edges.len(),
        });
        let slot = self.slot;
        let inst = self.instance_mut(step);
        let m = inst.state.start_round0(v.encode())?;
        inst.start = Some(slot);
        self.own_step = Some(step);
        self.harvest(step);
        Ok(alloc::vec![OrderingOutgoing::Broadcast(OrderingMessage::Instance { step, msg: m })])
    }

    pub fn on_receive(&mut self, msg: &OrderingMessage) -> Result<Vec<OrderingOutgoing>, ProtocolError> {
        let mut out = Vec::new();
        match msg {
            OrderingMessage::Instance { step, msg } => {
                let step = *step;
                for o in self.instance_mut(step).state.on_receive(msg)? {
                    out.push(wrap(step, o));
                }
                self.harvest(step);
            }
            OrderingMessage::Fetch { sender, step, owners } => {
                if *sender != self.id {
                    if let Some(inst) = self.instances.get(step) {
                        let originals: Vec<Vertex> = inst
                            .state
                            .dag()
                            .vertices()
                            .take_while(|v| v.vref.round == 0)
                            .filter(|v| v.is_full() && owners.contains(&v.vref.origin))
                            .cloned()
                            .collect();
                        if !originals.is_empty() {
                            out.push(OrderingOutgoing::Broadcast(OrderingMessage::Supply {
                                sender: self.id,
                                step: *step,
                                originals,
                            }));
                        }
                    }
                }
            }
            OrderingMessage::Supply { step, originals, .. } => {
                self.instance_mut(*step).state.absorb(originals)?;
                self.harvest(*step);
            }
        }
        out.extend(self.maybe_advance()?);
        Ok(out)
    }

    pub fn fire(&mut self, step: u32, ticket: ResponseTicket) -> Option<OrderingMessage> {
        let msg = self.instances.get_mut(&step)?.state.fire(ticket)?;
        Some(OrderingMessage::Instance { step, msg })
    }

    /// Global slot boundary.
    pub fn on_slot(&mut self, slot: u64) -> Result<Vec<OrderingOutgoing>, ProtocolError> {
        self.slot = slot;
        let mut out = Vec::new();
        let steps: Vec<u32> = self.instances.keys().copied().collect();
        for step in steps {
            let inst = self.instances.get_mut(&step).expect("listed");
            let Some(start) = inst.start else {
                continue;
            };
            for o in inst.state.on_slot(slot - start)? {
                out.push(wrap(step, o));
            }
        }
        out.extend(self.maybe_advance()?);
        out.extend(self.fetch_missing());
        self.commit();
        Ok(out)
    }

    /// Last commit evaluation, after the run has drained.
    pub fn finish(&mut self) {
        self.commit();
    }

    fn commit(&mut self) {
        let before = self.committer.records().len();
        self.committer.advance(&self.view);
        for (i, r) in self.committer.records().iter().enumerate().skip(before) {
            self.events.push(OrderingEvent::Committed {
                index: i,
                anchor: r.anchor,
                bundle: r.bundle.len(),
            });
        }
    }

    /// Moves every decodable original of a step instance into the view.
    fn harvest(&mut self, step: u32) {
        let Some(inst) = self.instances.get_mut(&step) else {
            return;
        };
        let mut fresh = Vec::new();
        for v in inst.state.dag().vertices().take_while(|v| v.vref.round == 0) {
            if !v.is_full() || inst.harvested.contains(&v.vref) {
                continue;
            }
            inst.harvested.insert(v.vref);
            if let Some(h) = v.payload().and_then(|b| HVertex::decode(b).ok()) {
                if h.owner == v.vref.origin && h.step == step {
                    fresh.push(h);
                }
            }
        }
        for h in fresh {
            self.view.insert(h);
        }
    }

    fn settled(state: &ParticipantState) -> bool {
        state.status() == Status::Complete || (state.is_final() && state.status() == Status::Degraded)
    }

    fn maybe_advance(&mut self) -> Result<Vec<OrderingOutgoing>, ProtocolError> {
        let Some(t) = self.own_step else {
            return Ok(Vec::new());
        };
        if t + 1 >= self.cfg.max_steps {
            return Ok(Vec::new());
        }
        let Some(inst) = self.instances.get(&t) else {
            return Ok(Vec::new());
        };
        if !Self::settled(&inst.state) {
            return Ok(Vec::new());
        }
        let auths = authenticate(&inst.state, t);
        if auths.len() < self.params.auth_quorum() {
            return Ok(Vec::new());
        }
        self.events.push(OrderingEvent::Authenticated {
            step: t,
            count: auths.len(),
        });
        self.step_advance(t + 1, auths)
    }

    /// Asks peers for back-referenced vertices missing from the view, at
    /// most once per slot and step.
    fn fetch_missing(&mut self) -> Vec<OrderingOutgoing> {
        let mut by_step: BTreeMap<u32, BTreeSet<ParticipantId>> = BTreeMap::new();
        for r in self.view.missing() {
            by_step.entry(r.step).or_default().insert(r.owner);
        }
        let mut out = Vec::new();
        for (step, owners) in by_step {
            if self.last_fetch.get(&step).is_some_and(|s| *s >= self.slot) {
                continue;
            }
            self.last_fetch.insert(step, self.slot);
            out.push(OrderingOutgoing::Broadcast(OrderingMessage::Fetch {
                sender: self.id,
                step,
                owners,
            }));
        }
        out
    }
}

fn wrap(step: u32, o: Outgoing) -> OrderingOutgoing {
    match o {
        Outgoing::Broadcast(msg) => OrderingOutgoing::Broadcast(OrderingMessage::Instance { step, msg }),
        Outgoing::Respond(ticket) => OrderingOutgoing::Respond { step, ticket },
    }
}
