//! Deterministic discrete-event simulator of a lossy broadcast medium.
//!
//! Time is kept in integer microseconds. Events are processed in
//! `(time, class, seq)` order where deliveries come before deferred
//! responses and those before slot boundaries at the same instant, and
//! `seq` is the scheduling order. All randomness comes from one ChaCha
//! stream seeded by the config, so a config fully determines the trace.
//!
//! A broadcast is `n - 1` independent unicast fates. Every transmission ends
//! in the trace exactly once, as `deliver` or `drop`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt::Debug;
use std::rc::Rc;

use dagcast_core::{ParticipantId, VertexRef};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Microseconds.
pub type Micros = u64;

pub fn ms(v: f64) -> Micros {
    (v * 1000.0).round() as Micros
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LossModel {
    /// Each transmission is lost independently with probability `p`.
    Bernoulli { p: f64 },
    /// Transmissions are grouped in blocks of `block` consecutive
    /// transmissions; exactly `floor(rho * block)` of each block are dropped,
    /// chosen uniformly.
    Budget { rho: f64, block: u64 },
    /// Same budget, spent on round-0 and round-1 transmissions first.
    BudgetGreedy { rho: f64, block: u64 },
    /// Every receiver loses `k` of the round broadcasts sent to it in each
    /// slot, the senders chosen uniformly.
    PerReceiverRound { k: usize },
}

impl LossModel {
    pub fn none() -> Self {
        LossModel::Bernoulli { p: 0.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            LossModel::Bernoulli { p } if !(0.0..=1.0).contains(p) => Err(format!("p = {p} outside [0, 1]")),
            LossModel::Budget { rho, block } | LossModel::BudgetGreedy { rho, block } => {
                if !(0.0..=1.0).contains(rho) {
                    Err(format!("rho = {rho} outside [0, 1]"))
                } else if *block == 0 {
                    Err("budget block must be positive".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub base_ms: f64,
    pub jitter_ms: f64,
    pub straggler_prob: f64,
    pub straggler_extra_ms: f64,
    /// Serialization delay per KiB of message.
    #[serde(default)]
    pub per_kib_ms: f64,
    /// Time to build a round vertex, per vertex in the local DAG. The
    /// vertex leaves this long after the slot boundary.
    #[serde(default)]
    pub build_us_per_vertex: f64,
}

impl DelayModel {
    pub fn zero() -> Self {
        DelayModel {
            base_ms: 0.0,
            jitter_ms: 0.0,
            straggler_prob: 0.0,
            straggler_extra_ms: 0.0,
            per_kib_ms: 0.0,
            build_us_per_vertex: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.base_ms, self.jitter_ms, self.straggler_prob, self.straggler_extra_ms, self.per_kib_ms, self.build_us_per_vertex];
        if all.iter().any(|v| *v < 0.0 || !v.is_finite()) || self.straggler_prob > 1.0 {
            return Err("delay parameters must be finite and non-negative".into());
        }
        Ok(())
    }
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel {
            base_ms: 2.0,
            jitter_ms: 6.0,
            straggler_prob: 0.02,
            straggler_extra_ms: 30.0,
            per_kib_ms: 0.0,
            build_us_per_vertex: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    Honest,
    /// Stops sending and receiving from slot `at_slot` on.
    Crash { at_slot: u64 },
    /// Consistently proposes a wrong payload.
    WrongValue,
    /// Runs two branches with different payloads; branch A talks to
    /// `partition`, branch B to everybody else.
    Equivocator { partition: Vec<u16> },
}

/// Scripted fate for matching transmissions. Unset fields match anything.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub from: Option<u16>,
    pub to: Option<u16>,
    pub round: Option<u32>,
    pub kind: Option<String>,
    pub step: Option<u32>,
    /// Drop when true, otherwise add `delay_ms`.
    #[serde(default)]
    pub drop: bool,
    #[serde(default)]
    pub delay_ms: f64,
}

impl ScriptRule {
    pub fn drop(from: u16, to: u16, round: u32) -> Self {
        ScriptRule {
            from: Some(from),
            to: Some(to),
            round: Some(round),
            kind: Some("round_broadcast".into()),
            drop: true,
            ..Default::default()
        }
    }

    pub fn delay(from: u16, to: u16, round: u32, delay_ms: f64) -> Self {
        ScriptRule {
            drop: false,
            delay_ms,
            ..ScriptRule::drop(from, to, round)
        }
    }

    fn matches<M: Wire>(&self, m: &M, to: ParticipantId) -> bool {
        self.from.is_none_or(|f| f == m.sender().0)
            && self.to.is_none_or(|t| t == to.0)
            && self.round.is_none_or(|r| r == m.round())
            && self.kind.as_deref().is_none_or(|k| k == m.kind())
            && self.step.is_none_or(|s| Some(s) == m.step())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub t_slot_ms: f64,
    pub loss: LossModel,
    pub delay: DelayModel,
    #[serde(default)]
    pub adversaries: BTreeMap<u16, AdversaryKind>,
    /// Last slot boundary.
    pub max_slots: u64,
    #[serde(default)]
    pub script: Vec<ScriptRule>,
    /// Stop as soon as every honest participant reports finished.
    /// Random loss applies only to transmissions sent before this slot.
    #[serde(default)]
    pub loss_until_slot: Option<u64>,
    #[serde(default = "yes")]
    pub stop_when_finished: bool,
    #[serde(default = "yes")]
    pub record_trace: bool,
}

fn yes() -> bool {
    true
}

impl SimConfig {
    pub fn new(seed: u64, n: usize, f: usize) -> Self {
        SimConfig {
            seed,
            n,
            f,
            t_slot_ms: 25.0,
            loss: LossModel::none(),
            delay: DelayModel::default(),
            adversaries: BTreeMap::new(),
            max_slots: 8,
            script: Vec::new(),
            loss_until_slot: None,
            stop_when_finished: true,
            record_trace: true,
        }
    }

    pub fn adversary(&self, id: ParticipantId) -> AdversaryKind {
        self.adversaries.get(&id.0).cloned().unwrap_or(AdversaryKind::Honest)
    }

    pub fn is_honest(&self, id: ParticipantId) -> bool {
        self.adversary(id) == AdversaryKind::Honest
    }

    pub fn validate(&self) -> Result<(), String> {
        self.loss.validate()?;
        self.delay.validate()?;
        if self.t_slot_ms <= 0.0 {
            return Err("t_slot must be positive".into());
        }
        let bad = self.adversaries.values().filter(|a| **a != AdversaryKind::Honest).count();
        if bad > self.f {
            return Err(format!("{bad} adversaries exceed f = {}", self.f));
        }
        for (id, a) in &self.adversaries {
            if usize::from(*id) >= self.n {
                return Err(format!("adversary p{id} out of range"));
            }
            if let AdversaryKind::Equivocator { partition } = a {
                let honest: BTreeSet<u16> = (0..self.n as u16)
                    .filter(|j| self.is_honest(ParticipantId(*j)))
                    .collect();
                let side_a = honest.iter().filter(|j| partition.contains(j)).count();
                if side_a == 0 || side_a == honest.len() {
                    return Err("equivocator partition must split honest receivers into two non-empty sets".into());
                }
            }
        }
        Ok(())
    }

    pub fn t_slot(&self) -> Micros {
        ms(self.t_slot_ms)
    }
}

/// What the medium needs to know about a message.
pub trait Wire: Clone + Debug {
    fn sender(&self) -> ParticipantId;
    fn round(&self) -> u32;
    fn kind(&self) -> &'static str;
    fn size(&self) -> usize;
    fn step(&self) -> Option<u32> {
        None
    }
    /// The vertex named in trace lines.
    fn vref(&self) -> Option<VertexRef>;
}

#[derive(Clone, Debug)]
pub enum Action<M, T> {
    /// Broadcast, optionally restricted to some receivers.
    Send { msg: M, to: Option<BTreeSet<ParticipantId>> },
    /// Wait a random backoff in `[0, t_slot)`, then fire the ticket.
    Backoff(T),
}

/// A protocol event destined for the trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeEvent {
    pub event: &'static str,
    pub vref: Option<VertexRef>,
    pub detail: String,
}

pub trait SimNode {
    type Msg: Wire;
    type Ticket: Copy + Debug;

    fn id(&self) -> ParticipantId;
    fn start(&mut self) -> Vec<Action<Self::Msg, Self::Ticket>>;
    fn on_receive(&mut self, msg: &Self::Msg) -> Vec<Action<Self::Msg, Self::Ticket>>;
    fn on_slot(&mut self, slot: u64) -> Vec<Action<Self::Msg, Self::Ticket>>;
    /// A backoff elapsed.
    fn fire(&mut self, ticket: Self::Ticket) -> Vec<Action<Self::Msg, Self::Ticket>>;
    fn drain_events(&mut self) -> Vec<NodeEvent>;
    /// Whether the node's measured goal is reached.
    fn finished(&self) -> bool;
    /// Vertices held locally; scales the build time of a round vertex.
    fn work(&self) -> usize {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub time_us: Micros,
    pub participant: u16,
    pub event: String,
    pub origin: Option<u16>,
    pub round: Option<u32>,
    pub digest: Option<String>,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub transmissions: u64,
    pub drops: u64,
    pub deliveries: u64,
    pub bytes: u64,
}

#[derive(Debug)]
pub struct RunOutput<N> {
    pub nodes: Vec<N>,
    pub trace: Vec<TraceRecord>,
    pub counters: Counters,
    /// First time each node reported finished.
    pub finished_at: Vec<Option<Micros>>,
    pub end_time: Micros,
    pub last_slot: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Class {
    Deliver = 0,
    Fire = 1,
    Boundary = 2,
}

enum Payload<M, T> {
    Deliver { to: usize, msg: Rc<M> },
    Fire { node: usize, ticket: T },
    Boundary { slot: u64 },
}

struct Budget {
    block: u64,
    drops: usize,
    greedy: bool,
    current: u64,
    chosen: BTreeSet<u64>,
    spent: usize,
}

struct Medium<M: Wire> {
    cfg: SimConfig,
    rng: ChaCha20Rng,
    budget: Option<Budget>,
    per_receiver: HashMap<(usize, u64), BTreeSet<u16>>,
    counters: Counters,
    _m: std::marker::PhantomData<M>,
}

enum Fate {
    Drop(&'static str),
    Deliver(Micros),
}

impl<M: Wire> Medium<M> {
    fn new(cfg: SimConfig) -> Self {
        let budget = match cfg.loss {
            LossModel::Budget { rho, block } | LossModel::BudgetGreedy { rho, block } => Some(Budget {
                block,
                drops: (rho * block as f64 + 1e-9).floor() as usize,
                greedy: matches!(cfg.loss, LossModel::BudgetGreedy { .. }),
                current: u64::MAX,
                chosen: BTreeSet::new(),
                spent: 0,
            }),
            _ => None,
        };
        Medium {
            rng: ChaCha20Rng::seed_from_u64(cfg.seed),
            cfg,
            budget,
            per_receiver: HashMap::new(),
            counters: Counters::default(),
            _m: std::marker::PhantomData,
        }
    }

    fn fate(&mut self, m: &M, to: ParticipantId, slot: u64) -> Fate {
        let index = self.counters.transmissions;
        self.counters.transmissions += 1;
        let mut extra = 0.0;
        for rule in &self.cfg.script {
            if rule.matches(m, to) {
                if rule.drop {
                    return Fate::Drop("script");
                }
                extra += rule.delay_ms;
            }
        }
        let window = self.cfg.loss_until_slot.is_none_or(|u| slot < u);
        let lost = window && match &self.cfg.loss {
            LossModel::Bernoulli { p } => *p > 0.0 && self.rng.random_bool(*p),
            LossModel::Budget { .. } | LossModel::BudgetGreedy { .. } => {
                let b = self.budget.as_mut().expect("budget state");
                let blk = index / b.block;
                if blk != b.current {
                    b.current = blk;
                    b.spent = 0;
                    b.chosen = if b.greedy {
                        BTreeSet::new()
                    } else {
                        sample(&mut self.rng, b.block as usize, b.drops)
                            .into_iter()
                            .map(|i| i as u64)
                            .collect()
                    };
                }
                if b.greedy {
                    let take = m.round() <= 1 && b.spent < b.drops;
                    b.spent += usize::from(take);
                    take
                } else {
                    b.chosen.contains(&(index % b.block))
                }
            }
            LossModel::PerReceiverRound { k } => {
                if m.kind() != "round_broadcast" {
                    false
                } else {
                    let n = self.cfg.n;
                    let k = (*k).min(n - 1);
                    let rng = &mut self.rng;
                    let set = self.per_receiver.entry((to.index(), slot)).or_insert_with(|| {
                        let others: Vec<u16> = (0..n as u16).filter(|j| *j != to.0).collect();
                        sample(rng, others.len(), k).into_iter().map(|i| others[i]).collect()
                    });
                    set.contains(&m.sender().0)
                }
            }
        };
        if lost {
            return Fate::Drop("loss");
        }
        let d = &self.cfg.delay;
        let mut delay = d.base_ms + extra + d.per_kib_ms * m.size() as f64 / 1024.0;
        if d.jitter_ms > 0.0 {
            delay += self.rng.random_range(0.0..=d.jitter_ms);
        }
        if d.straggler_prob > 0.0 && self.rng.random_bool(d.straggler_prob) {
            delay += d.straggler_extra_ms;
        }
        Fate::Deliver(ms(delay))
    }
}

/// Runs the nodes until the last slot boundary, or earlier once every
/// honest node is finished when the config asks for that.
pub fn run<N: SimNode>(cfg: &SimConfig, mut nodes: Vec<N>) -> RunOutput<N> {
    cfg.validate().expect("valid simulation config");
    assert_eq!(nodes.len(), cfg.n);
    let t_slot = cfg.t_slot();
    let mut medium: Medium<N::Msg> = Medium::new(cfg.clone());
    let mut queue: BinaryHeap<Reverse<(Micros, Class, u64)>> = BinaryHeap::new();
    let mut payloads: HashMap<u64, Payload<N::Msg, N::Ticket>> = HashMap::new();
    let mut seq = 0u64;
    let mut trace = Vec::new();
    let mut finished_at: Vec<Option<Micros>> = vec![None; cfg.n];
    let crash_slot: Vec<Option<u64>> = (0..cfg.n)
        .map(|i| match cfg.adversary(ParticipantId(i as u16)) {
            AdversaryKind::Crash { at_slot } => Some(at_slot),
            _ => None,
        })
        .collect();
    let honest: Vec<bool> = (0..cfg.n).map(|i| cfg.is_honest(ParticipantId(i as u16))).collect();

    let mut push = |queue: &mut BinaryHeap<_>, payloads: &mut HashMap<_, _>, t: Micros, c: Class, p| {
        queue.push(Reverse((t, c, seq)));
        payloads.insert(seq, p);
        seq += 1;
    };

    for k in 1..=cfg.max_slots {
        push(&mut queue, &mut payloads, k * t_slot, Class::Boundary, Payload::Boundary { slot: k });
    }

    let mut slot = 0u64;
    let mut now: Micros = 0;
    let mut pending: Vec<(usize, Micros, Vec<Action<N::Msg, N::Ticket>>)> = Vec::new();
    for (i, node) in nodes.iter_mut().enumerate() {
        let acts = if crash_slot[i] == Some(0) { Vec::new() } else { node.start() };
        pending.push((i, 0, acts));
    }

    loop {
        // Drain node events and dispatch actions produced at `now`.
        for (i, lag, acts) in pending.drain(..) {
            let at = now + lag;
            let alive = crash_slot[i].is_none_or(|c| slot < c);
            if cfg.record_trace {
                for e in nodes[i].drain_events() {
                    trace.push(TraceRecord {
                        time_us: at,
                        participant: i as u16,
                        event: e.event.into(),
                        origin: e.vref.map(|r| r.origin.0),
                        round: e.vref.map(|r| r.round),
                        digest: e.vref.map(|r| r.digest.to_hex()),
                        detail: e.detail,
                    });
                }
            } else {
                nodes[i].drain_events();
            }
            if finished_at[i].is_none() && nodes[i].finished() {
                finished_at[i] = Some(at);
            }
            if !alive {
                continue;
            }
            for a in acts {
                match a {
                    Action::Send { msg, to } => {
                        let msg = Rc::new(msg);
                        medium.counters.bytes += msg.size() as u64;
                        for j in 0..cfg.n {
                            let rid = ParticipantId(j as u16);
                            if j == i || to.as_ref().is_some_and(|t| !t.contains(&rid)) {
                                continue;
                            }
                            let fate = medium.fate(&msg, rid, slot);
                            let (event, detail) = match fate {
                                Fate::Drop(why) => {
                                    medium.counters.drops += 1;
                                    ("drop", why.to_string())
                                }
                                Fate::Deliver(d) => {
                                    push(&mut queue, &mut payloads, at + d, Class::Deliver, Payload::Deliver {
                                        to: j,
                                        msg: msg.clone(),
                                    });
                                    ("send", format!("to=p{j} delay_us={d}"))
                                }
                            };
                            if cfg.record_trace {
                                let v = msg.vref();
                                trace.push(TraceRecord {
                                    time_us: at,
                                    participant: i as u16,
                                    event: event.into(),
                                    origin: v.map(|r| r.origin.0),
                                    round: v.map(|r| r.round),
                                    digest: v.map(|r| r.digest.to_hex()),
                                    detail: if event == "drop" {
                                        format!("to=p{j} kind={} cause={detail}", msg.kind())
                                    } else {
                                        format!("{detail} kind={}", msg.kind())
                                    },
                                });
                            }
                        }
                    }
                    Action::Backoff(ticket) => {
                        let wait = medium.rng.random_range(0..t_slot.max(1));
                        push(&mut queue, &mut payloads, at + wait, Class::Fire, Payload::Fire { node: i, ticket });
                    }
                }
            }
        }

        if cfg.stop_when_finished
            && (0..cfg.n).all(|i| !honest[i] || finished_at[i].is_some())
        {
            break;
        }
        let Some(Reverse((t, _class, id))) = queue.pop() else {
            break;
        };
        now = t;
        match payloads.remove(&id).expect("scheduled payload") {
            Payload::Deliver { to, msg } => {
                let alive = crash_slot[to].is_none_or(|c| slot < c);
                if !alive {
                    continue;
                }
                medium.counters.deliveries += 1;
                if cfg.record_trace {
                    let v = msg.vref();
                    trace.push(TraceRecord {
                        time_us: now,
                        participant: to as u16,
                        event: "deliver".into(),
                        origin: v.map(|r| r.origin.0),
                        round: v.map(|r| r.round),
                        digest: v.map(|r| r.digest.to_hex()),
                        detail: format!("from={} kind={}", msg.sender(), msg.kind()),
                    });
                }
                let acts = nodes[to].on_receive(&msg);
                pending.push((to, 0, acts));
            }
            Payload::Fire { node, ticket } => {
                let acts = nodes[node].fire(ticket);
                pending.push((node, 0, acts));
            }
            Payload::Boundary { slot: k } => {
                slot = k;
                for (i, node) in nodes.iter_mut().enumerate() {
                    let alive = crash_slot[i].is_none_or(|c| k < c);
                    let acts = if alive { node.on_slot(k) } else { Vec::new() };
                    let build = cfg.delay.build_us_per_vertex * node.work() as f64;
                    let lag = if acts.is_empty() { 0 } else { build.round() as Micros };
                    pending.push((i, lag, acts));
                }
            }
        }
    }

    // Build lags stamp boundary actions later than the boundary itself.
    trace.sort_by_key(|r| r.time_us);
    RunOutput {
        nodes,
        trace,
        counters: medium.counters,
        finished_at,
        end_time: now,
        last_slot: slot,
    }
}

/// SHA-256 over the CSV rendering of a trace.
pub fn trace_hash(trace: &[TraceRecord]) -> String {
    use sha2::{Digest as _, Sha256};
    let mut h = Sha256::new();
    for r in trace {
        h.update(crate::formats::trace_line(r).as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
