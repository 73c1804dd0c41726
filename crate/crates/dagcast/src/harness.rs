//! Experiments over the simulator.

use std::collections::{BTreeMap, BTreeSet};

use dagcast_core::ordering::{elect_anchor, Committer, HRef, HVertex, HorizontalDag, OrderingConfig};
use dagcast_core::{ParticipantId, ProtocolParams, Slot, Status};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::formats::commit_log_jsonl;
use crate::netsim::{self, AdversaryKind, DelayModel, LossModel, RunOutput, ScriptRule, SimConfig, TraceRecord};
use crate::nodes::{dissemination_agents, ordering_agents, Agent, DisseminationNode, OrderingSimNode};

/// Per-run record of a dissemination experiment.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub rho: f64,
    /// Every honest participant ended complete.
    pub success: bool,
    pub statuses: Vec<String>,
    pub complete_rounds: Vec<Option<u32>>,
    /// Time the last honest participant completed.
    pub latency_last_ms: Option<f64>,
    /// Mean completion time over honest participants that completed.
    pub latency_mean_ms: Option<f64>,
    pub transmissions: u64,
    pub drops: u64,
    /// Bytes put on the medium, each broadcast counted once.
    pub bytes: u64,
    /// Honest participants flagged by some honest participant.
    pub false_flags: usize,
    pub trace_hash: Option<String>,
}

pub fn run_dissemination(cfg: &SimConfig, params: ProtocolParams) -> RunOutput<Agent<DisseminationNode>> {
    netsim::run(cfg, dissemination_agents(cfg, params))
}

pub fn summarize(cfg: &SimConfig, rho: f64, out: &RunOutput<Agent<DisseminationNode>>) -> RunSummary {
    let honest: Vec<usize> = (0..cfg.n).filter(|i| cfg.is_honest(ParticipantId(*i as u16))).collect();
    let state = |i: usize| &out.nodes[i].primary().state;
    let success = honest.iter().all(|&i| state(i).status() == Status::Complete);
    let times: Vec<f64> = honest
        .iter()
        .filter(|&&i| state(i).status() == Status::Complete)
        .filter_map(|&i| out.finished_at[i])
        .map(|t| t as f64 / 1000.0)
        .collect();
    let false_flags: BTreeSet<ParticipantId> = honest
        .iter()
        .flat_map(|&i| state(i).dag().byzantine().iter().copied())
        .filter(|p| cfg.is_honest(*p))
        .collect();
    RunSummary {
        seed: cfg.seed,
        n: cfg.n,
        f: cfg.f,
        rho,
        success,
        statuses: (0..cfg.n).map(|i| state(i).status().as_str().to_string()).collect(),
        complete_rounds: (0..cfg.n).map(|i| state(i).complete_round()).collect(),
        latency_last_ms: success.then(|| times.iter().copied().fold(0.0, f64::max)),
        latency_mean_ms: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        transmissions: out.counters.transmissions,
        drops: out.counters.drops,
        bytes: out.counters.bytes,
        false_flags: false_flags.len(),
        trace_hash: cfg.record_trace.then(|| netsim::trace_hash(&out.trace)),
    }
}

pub fn sim_config(ec: &ExperimentConfig, n: usize, seed: u64, loss: LossModel) -> SimConfig {
    let mut c = SimConfig::new(seed, n, ec.f_for(n));
    c.t_slot_ms = ec.t_slot_ms;
    c.delay = ec.delay.clone();
    c.loss = loss;
    c.max_slots = u64::from(ec.r_max) + 1;
    c.record_trace = false;
    c
}

pub fn seeds(ec: &ExperimentConfig) -> impl Iterator<Item = u64> + Clone {
    let base = ec.base_seed;
    (0..ec.seeds as u64).map(move |i| base.wrapping_add(i))
}

/// Aggregate over the seeds of one `(n, rho)` point.
#[derive(Clone, Debug, Serialize)]
pub struct PointResult {
    pub n: usize,
    pub f: usize,
    pub rho: f64,
    pub seeds: usize,
    pub success_rate: f64,
    /// Mean over successful seeds of the last honest completion time.
    pub latency_last_ms: Option<f64>,
    /// Mean over successful seeds of the mean honest completion time.
    pub latency_mean_ms: Option<f64>,
    pub runs: Vec<RunSummary>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

pub fn run_point(ec: &ExperimentConfig, n: usize, rho: f64) -> PointResult {
    let params = ec.params(n).expect("validated config");
    let loss = ec.loss(n, rho);
    let mut runs: Vec<RunSummary> = seeds(ec)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|seed| {
            let cfg = sim_config(ec, n, seed, loss.clone());
            let out = run_dissemination(&cfg, params);
            summarize(&cfg, rho, &out)
        })
        .collect();
    runs.sort_by_key(|r| r.seed);
    let ok: Vec<&RunSummary> = runs.iter().filter(|r| r.success).collect();
    PointResult {
        n,
        f: params.f,
        rho,
        seeds: runs.len(),
        success_rate: ok.len() as f64 / runs.len() as f64,
        latency_last_ms: mean(ok.iter().filter_map(|r| r.latency_last_ms)),
        latency_mean_ms: mean(ok.iter().filter_map(|r| r.latency_mean_ms)),
        runs,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxLossRow {
    pub n: usize,
    pub f: usize,
    pub rho_max: f64,
    pub success_rate: f64,
    pub latency_last_ms: Option<f64>,
    pub latency_mean_ms: Option<f64>,
    pub t_slot_ms: f64,
    pub seeds: usize,
    /// Every evaluated `(rho, success_rate)`.
    pub probes: Vec<(f64, f64)>,
    /// The point at `rho_max`.
    #[serde(skip)]
    pub point: Option<PointResult>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("n = {0}: the protocol fails without loss")]
    LosslessFailure(usize),
    #[error("{0}")]
    Config(String),
}

/// Largest rho on the resolution grid whose success rate meets the
/// threshold, by binary search between the configured bounds.
pub fn max_loss_search(ec: &ExperimentConfig, n: usize) -> Result<MaxLossRow, HarnessError> {
    ec.validate().map_err(HarnessError::Config)?;
    let grid = |k: u64| (k as f64 * ec.resolution * 1e6).round() / 1e6;
    let mut lo = (ec.rho_lo / ec.resolution).round() as u64;
    let mut hi = (ec.rho_hi / ec.resolution).round() as u64;
    let mut probes = Vec::new();
    let eval = |k: u64, probes: &mut Vec<(f64, f64)>| {
        let p = run_point(ec, n, grid(k));
        probes.push((p.rho, p.success_rate));
        p
    };
    let mut best = eval(lo, &mut probes);
    if best.success_rate < ec.success_threshold {
        return Err(HarnessError::LosslessFailure(n));
    }
    let top = eval(hi, &mut probes);
    if top.success_rate >= ec.success_threshold {
        best = top;
        lo = hi;
    }
    while hi > lo + 1 {
        let mid = lo + (hi - lo) / 2;
        let p = eval(mid, &mut probes);
        if p.success_rate >= ec.success_threshold {
            lo = mid;
            best = p;
        } else {
            hi = mid;
        }
    }
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(MaxLossRow {
        n,
        f: best.f,
        rho_max: best.rho,
        success_rate: best.success_rate,
        latency_last_ms: best.latency_last_ms,
        latency_mean_ms: best.latency_mean_ms,
        t_slot_ms: ec.t_slot_ms,
        seeds: best.seeds,
        probes,
        point: Some(best),
    })
}

/// `max_loss_search` for every configured n.
pub fn loss_table(ec: &ExperimentConfig) -> Result<Vec<MaxLossRow>, HarnessError> {
    let mut rows: Vec<MaxLossRow> = ec
        .n_values
        .par_iter()
        .map(|&n| max_loss_search(ec, n))
        .collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| r.n);
    Ok(rows)
}

/// Mean completion latency at one loss level.
pub fn latency_at(ec: &ExperimentConfig, n: usize, rho: f64) -> Option<f64> {
    run_point(ec, n, rho).latency_last_ms
}

pub fn sweep(ec: &ExperimentConfig) -> Vec<PointResult> {
    let pts: Vec<(usize, f64)> = ec
        .n_values
        .iter()
        .flat_map(|&n| ec.rho_values.iter().map(move |&r| (n, r)))
        .collect();
    let mut out: Vec<PointResult> = pts.into_par_iter().map(|(n, r)| run_point(ec, n, r)).collect();
    out.sort_by(|a, b| (a.n, a.rho).partial_cmp(&(b.n, b.rho)).expect("finite"));
    out
}

/// Latency of a lossless run when every delay stays inside its slot:
/// round 2 is created at the second slot boundary.
/// Closed form of the lossless latency: two slots plus the build time of
/// the round-2 vertex over `2n + 1` held vertices.
pub fn lossless_latency_ms(t_slot_ms: f64, delay: &DelayModel, n: usize) -> f64 {
    2.0 * t_slot_ms + (delay.build_us_per_vertex * (2 * n + 1) as f64).round() / 1000.0
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Delays that never cross a slot boundary.
pub fn in_slot_delay() -> DelayModel {
    DelayModel {
        base_ms: 2.0,
        jitter_ms: 6.0,
        straggler_prob: 0.0,
        straggler_extra_ms: 0.0,
        per_kib_ms: 0.0,
        build_us_per_vertex: 0.0,
    }
}

fn replay_config(seed: u64, n: usize) -> (SimConfig, ProtocolParams) {
    let params = ProtocolParams::for_n(n).expect("valid n");
    let mut cfg = SimConfig::new(seed, n, params.f);
    cfg.delay = in_slot_delay();
    cfg.max_slots = u64::from(params.r_max) + 1;
    (cfg, params)
}

fn p(i: u16) -> ParticipantId {
    ParticipantId(i)
}

/// Rounds at which `who` first flagged `offender`, from the trace.
pub fn detection_round(trace: &[TraceRecord], who: u16, offender: u16) -> Option<u32> {
    let tag = format!("offender=p{offender} ");
    trace
        .iter()
        .filter(|r| r.participant == who && r.event == "equivocation" && r.detail.contains(&tag))
        .filter_map(|r| {
            r.detail
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix("detected_round="))
                .and_then(|v| v.parse().ok())
        })
        .min()
}

/// Loses `p2[0]` on its way to `p0` and `p3`, and every round-1 or
/// round-2 vertex that would carry it to `p0`. `p0[2]` then has no path to
/// `p2[0]`; round-2 deltas of the others repair `p0[3]`.
pub fn fig2_replay(seed: u64) -> ReplayReport {
    let (mut cfg, params) = replay_config(seed, 4);
    cfg.script = vec![
        ScriptRule::drop(2, 0, 0),
        ScriptRule::drop(2, 3, 0),
        ScriptRule::drop(1, 0, 1),
        ScriptRule::drop(2, 0, 1),
        ScriptRule::drop(2, 0, 2),
    ];
    let out = run_dissemination(&cfg, params);
    let s0 = &out.nodes[0].primary().state;
    let mut checks = Vec::new();
    let r2 = s0.own_vertex(2).map(|v| v.vref);
    let missing = r2.map(|r| s0.dag().completeness_from(&[r], &params, false));
    let lacks = missing.as_ref().is_some_and(|m| !m.complete && m.missing.contains(&Slot::new(p(2), 0)));
    checks.push(Check::new(
        "p0[2] has no path to p2[0]",
        lacks,
        format!("missing {:?}", missing.map(|m| m.missing)),
    ));
    let direct = out
        .trace
        .iter()
        .any(|r| r.participant == 0 && r.event == "deliver" && r.origin == Some(2) && r.round == Some(0));
    checks.push(Check::new("p0 never receives p2[0] directly", !direct, ""));
    checks.push(Check::new(
        "p0 complete at round 3",
        s0.status() == Status::Complete && s0.complete_round() == Some(3),
        format!("status {} at round {:?}", s0.status().as_str(), s0.complete_round()),
    ));
    let enquiries = out.trace.iter().filter(|r| r.event == "enquiry").count();
    checks.push(Check::new("no enquiry sent", enquiries == 0, format!("{enquiries} enquiries")));
    let others: Vec<Option<u32>> = (1..4).map(|i| out.nodes[i].primary().state.complete_round()).collect();
    checks.push(Check::new(
        "p1..p3 complete at round 2",
        others.iter().all(|r| *r == Some(2)),
        format!("{others:?}"),
    ));
    ReplayReport {
        scenario: "fig2".into(),
        seed,
        checks,
        trace: out.trace,
    }
}

/// `p3` sends variant A to `p0, p1` and variant B to `p2`; `p2[1]` is lost
/// on its way to `p1`.
pub fn fig3_replay(seed: u64) -> ReplayReport {
    let (mut cfg, params) = replay_config(seed, 4);
    cfg.adversaries.insert(3, AdversaryKind::Equivocator { partition: vec![0, 1] });
    cfg.script = vec![ScriptRule::drop(2, 1, 1)];
    cfg.stop_when_finished = false;
    let out = run_dissemination(&cfg, params);
    let mut checks = Vec::new();
    let d2 = detection_round(&out.trace, 2, 3);
    let d1 = detection_round(&out.trace, 1, 3);
    checks.push(Check::new("p2 flags p3 at round 2", d2 == Some(2), format!("{d2:?}")));
    checks.push(Check::new("p1 flags p3 at round 3", d1 == Some(3), format!("{d1:?}")));
    let mut flagged_all = true;
    let mut excluded = true;
    let mut false_flag = false;
    for i in 0..3 {
        let s = &out.nodes[i].primary().state;
        flagged_all &= s.dag().byzantine().contains(&p(3));
        false_flag |= s.dag().byzantine().iter().any(|b| b.0 != 3);
        let front = s.frontier().expect("started");
        excluded &= s
            .dag()
            .extract_originals(&front)
            .map(|o| o.iter().all(|v| v.vref.origin != p(3)))
            .unwrap_or(false);
    }
    checks.push(Check::new("every honest participant flags p3", flagged_all, ""));
    checks.push(Check::new("no honest participant flagged", !false_flag, ""));
    checks.push(Check::new("p3 excluded from originals", excluded, ""));
    ReplayReport {
        scenario: "fig3".into(),
        seed,
        checks,
        trace: out.trace,
    }
}

/// Each receiver loses the round broadcasts of `k = n - 2f` senders in
/// every slot, so it hears at most `2f` round messages including its own,
/// below the `2f + 1` a direct-quorum protocol needs.
#[derive(Clone, Debug, Serialize)]
pub struct ContrastResult {
    pub n: usize,
    pub f: usize,
    pub k: usize,
    pub direct_per_round: usize,
    pub direct_quorum: usize,
    pub success_rate: f64,
    pub latency_last_ms: Option<f64>,
    pub seeds: usize,
}

pub fn per_receiver_contrast(ec: &ExperimentConfig, n: usize) -> ContrastResult {
    let params = ec.params(n).expect("valid n");
    let k = n - 2 * params.f;
    let runs: Vec<RunSummary> = seeds(ec)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|seed| {
            let cfg = sim_config(ec, n, seed, LossModel::PerReceiverRound { k });
            summarize(&cfg, k as f64 / (n - 1) as f64, &run_dissemination(&cfg, params))
        })
        .collect();
    let ok = runs.iter().filter(|r| r.success).count();
    ContrastResult {
        n,
        f: params.f,
        k,
        direct_per_round: n - k,
        direct_quorum: params.advance_quorum(),
        success_rate: ok as f64 / runs.len() as f64,
        latency_last_ms: mean(runs.iter().filter_map(|r| r.latency_last_ms)),
        seeds: runs.len(),
    }
}

/// One randomized ordering run.
#[derive(Clone, Debug, Serialize)]
pub struct OrderingScenario {
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub loss_p: f64,
    pub adversaries: BTreeMap<u16, AdversaryKind>,
    pub max_steps: u32,
    /// Random loss stops at this slot; the rest of the run drains.
    pub loss_until_slot: u64,
    pub max_slots: u64,
}

impl OrderingScenario {
    /// Random `n` in 4..=7, loss below `loss_cap`, up to `f` adversaries
    /// of random kinds.
    pub fn random(seed: u64, loss_cap: f64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x6f72_6465_7269_6e67);
        let n = rng.random_range(4..=7usize);
        let f = (n - 1) / 3;
        let bad = rng.random_range(0..=f);
        let mut ids: Vec<u16> = (0..n as u16).collect();
        ids.shuffle(&mut rng);
        let mut adversaries = BTreeMap::new();
        for &id in &ids[..bad] {
            let kind = match rng.random_range(0..3) {
                0 => AdversaryKind::Crash {
                    at_slot: rng.random_range(0..12),
                },
                1 => AdversaryKind::WrongValue,
                _ => {
                    let honest: Vec<u16> = ids[bad..].to_vec();
                    let cut = rng.random_range(1..honest.len());
                    AdversaryKind::Equivocator {
                        partition: honest[..cut].to_vec(),
                    }
                }
            };
            adversaries.insert(id, kind);
        }
        OrderingScenario {
            seed,
            n,
            f,
            loss_p: rng.random_range(0.0..=loss_cap),
            adversaries,
            max_steps: 10,
            loss_until_slot: 40,
            max_slots: 160,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut c = SimConfig::new(self.seed, self.n, self.f);
        c.loss = LossModel::Bernoulli { p: self.loss_p };
        c.delay = DelayModel::default();
        c.adversaries = self.adversaries.clone();
        c.loss_until_slot = Some(self.loss_until_slot);
        c.max_slots = self.max_slots;
        c.record_trace = false;
        c
    }

    pub fn ordering_config(&self) -> OrderingConfig {
        OrderingConfig {
            coin_seed: self.seed,
            max_steps: self.max_steps,
            ..OrderingConfig::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderingOutcome {
    pub scenario: OrderingScenario,
    /// Commit log per honest participant.
    pub logs: BTreeMap<u16, String>,
    pub commits: Vec<usize>,
    /// All honest logs are byte-identical.
    pub identical: bool,
    /// Every pair of honest logs is prefix-consistent.
    pub prefix_consistent: bool,
    pub false_flags: usize,
}

pub fn ordering_run(sc: &OrderingScenario) -> OrderingOutcome {
    let cfg = sc.sim_config();
    let params = ProtocolParams::new(sc.n, sc.f, 8).expect("valid params");
    let mut out = netsim::run(&cfg, ordering_agents(&cfg, params, &sc.ordering_config()));
    let honest: Vec<usize> = (0..sc.n).filter(|i| cfg.is_honest(p(*i as u16))).collect();
    let mut logs = BTreeMap::new();
    let mut commits = Vec::new();
    let mut false_flags = BTreeSet::new();
    for &i in &honest {
        let node: &mut OrderingSimNode = out.nodes[i].primary_mut();
        node.node.finish();
        logs.insert(i as u16, commit_log_jsonl(node.node.commit_log()));
        commits.push(node.node.commit_log().len());
        for step in 0..sc.max_steps {
            if let Some(s) = node.node.instance(step) {
                false_flags.extend(s.dag().byzantine().iter().filter(|b| cfg.is_honest(**b)).copied());
            }
        }
    }
    let values: Vec<&String> = logs.values().collect();
    let identical = values.windows(2).all(|w| w[0] == w[1]);
    let prefix_consistent = values.iter().all(|a| values.iter().all(|b| a.starts_with(b.as_str()) || b.starts_with(a.as_str())));
    OrderingOutcome {
        scenario: sc.clone(),
        logs,
        commits,
        identical,
        prefix_consistent,
        false_flags: false_flags.len(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementReport {
    pub runs: usize,
    pub identical: usize,
    pub prefix_consistent: usize,
    /// Runs in which every honest participant committed at least once.
    pub nonempty: usize,
    pub mean_commits: f64,
    pub false_flags: usize,
    pub divergent_seeds: Vec<u64>,
}

pub fn ordering_agreement(runs: usize, base_seed: u64, loss_cap: f64) -> AgreementReport {
    let outcomes: Vec<OrderingOutcome> = (0..runs as u64)
        .into_par_iter()
        .map(|i| ordering_run(&OrderingScenario::random(base_seed.wrapping_add(i), loss_cap)))
        .collect();
    let all_commits: Vec<usize> = outcomes.iter().flat_map(|o| o.commits.iter().copied()).collect();
    AgreementReport {
        runs,
        identical: outcomes.iter().filter(|o| o.identical).count(),
        prefix_consistent: outcomes.iter().filter(|o| o.prefix_consistent).count(),
        nonempty: outcomes.iter().filter(|o| o.commits.iter().all(|c| *c > 0)).count(),
        mean_commits: mean(all_commits.iter().map(|c| *c as f64)).unwrap_or(0.0),
        false_flags: outcomes.iter().map(|o| o.false_flags).sum(),
        divergent_seeds: outcomes.iter().filter(|o| !o.identical).map(|o| o.scenario.seed).collect(),
    }
}

/// How an adversary shapes the two steps above an anchor step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EdgePattern {
    /// Owners with a vertex at the anchor step.
    pub present: BTreeSet<u16>,
    /// Back edges of each next-step vertex, by owner.
    pub edges: BTreeMap<u16, BTreeSet<u16>>,
}

fn vertex(owner: u16, step: u32, edges: BTreeSet<HRef>) -> HVertex {
    HVertex {
        owner: p(owner),
        step,
        tx_batch: vec![vec![owner as u8, step as u8]],
        back_edges: edges,
    }
}

/// Builds steps 0..=2 from a pattern (step 2 is complete and cites every
/// step-1 vertex) and asks a committer whether the step-0 anchor commits.
pub fn commits_with(params: ProtocolParams, coin_seed: u64, pat: &EdgePattern) -> bool {
    let mut view = HorizontalDag::new(params);
    let mut s0 = BTreeMap::new();
    for &o in &pat.present {
        let v = vertex(o, 0, BTreeSet::new());
        s0.insert(o, v.href());
        view.insert(v);
    }
    let mut s1 = BTreeSet::new();
    for (&o, es) in &pat.edges {
        let v = vertex(o, 1, es.iter().filter_map(|e| s0.get(e).copied()).collect());
        s1.insert(v.href());
        view.insert(v);
    }
    for o in 0..params.n as u16 {
        view.insert(vertex(o, 2, s1.clone()));
    }
    Committer::new(params, coin_seed).try_commit(&view, 0)
}

fn subsets(items: &[u16], min: usize) -> Vec<BTreeSet<u16>> {
    (0u32..1 << items.len())
        .filter(|m| m.count_ones() as usize >= min)
        .map(|m| (0..items.len()).filter(|i| m & (1 << i) != 0).map(|i| items[i]).collect())
        .collect()
}

/// Every pattern allowed by the protocol: at least `n - f` vertices on each
/// step, each next-step vertex citing at least `n - f` present ones.
pub fn all_patterns(n: usize, f: usize) -> Vec<EdgePattern> {
    let ids: Vec<u16> = (0..n as u16).collect();
    let q = n - f;
    let mut out = Vec::new();
    for present in subsets(&ids, q) {
        let pv: Vec<u16> = present.iter().copied().collect();
        let choices = subsets(&pv, q);
        for owners in subsets(&ids, q) {
            let owners: Vec<u16> = owners.into_iter().collect();
            let total = choices.len().pow(owners.len() as u32);
            for mut code in 0..total {
                let mut edges = BTreeMap::new();
                for &o in &owners {
                    edges.insert(o, choices[code % choices.len()].clone());
                    code /= choices.len();
                }
                out.push(EdgePattern {
                    present: present.clone(),
                    edges,
                });
            }
        }
    }
    out
}

/// A coin seed electing each owner at step 0.
pub fn seeds_electing_each(n: usize) -> Vec<u64> {
    (0..n as u16)
        .map(|o| (0u64..).find(|s| elect_anchor(*s, 0, n) == p(o)).expect("coin covers all owners"))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AnchorReport {
    pub n: usize,
    pub f: usize,
    pub patterns: usize,
    /// Minimum over patterns of the fraction of elected owners that commit.
    pub worst_case: f64,
    pub worst_pattern: Option<EdgePattern>,
    pub trials: usize,
    pub commits: usize,
    pub frequency: f64,
}

/// Exhaustive worst case plus a Monte Carlo estimate under an adversary
/// that does not know the coin and starves one step-0 vertex of support:
/// it withholds one vertex at each step with probability 1/2 and has every
/// step-1 vertex cite exactly `n - f` present vertices, avoiding the victim.
pub fn anchor_monte_carlo(n: usize, trials: usize, seed: u64) -> AnchorReport {
    let f = (n - 1) / 3;
    let params = ProtocolParams::for_n(n).expect("valid n");
    let q = n - f;
    let per_owner = seeds_electing_each(n);
    let patterns = all_patterns(n, f);
    let mut worst = (f64::INFINITY, None);
    for pat in &patterns {
        let c = per_owner.iter().filter(|s| commits_with(params, **s, pat)).count();
        let frac = c as f64 / n as f64;
        if frac < worst.0 {
            worst = (frac, Some(pat.clone()));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ids: Vec<u16> = (0..n as u16).collect();
    let mut commits = 0;
    for _ in 0..trials {
        let mut present: BTreeSet<u16> = ids.iter().copied().collect();
        if rng.random_bool(0.5) {
            present.remove(ids.choose(&mut rng).expect("non-empty"));
        }
        let mut owners: Vec<u16> = ids.clone();
        if rng.random_bool(0.5) {
            owners.remove(rng.random_range(0..owners.len()));
        }
        let victim = **present.iter().collect::<Vec<_>>().choose(&mut rng).expect("non-empty");
        let edges = owners
            .iter()
            .map(|&o| {
                let mut pool: Vec<u16> = present.iter().copied().filter(|x| *x != victim).collect();
                pool.shuffle(&mut rng);
                let mut es: BTreeSet<u16> = pool.into_iter().take(q).collect();
                if es.len() < q {
                    es.insert(victim);
                }
                (o, es)
            })
            .collect();
        let pat = EdgePattern { present, edges };
        let coin = rng.random::<u64>();
        commits += usize::from(commits_with(params, coin, &pat));
    }
    AnchorReport {
        n,
        f,
        patterns: patterns.len(),
        worst_case: worst.0,
        worst_pattern: worst.1,
        trials,
        commits,
        frequency: commits as f64 / trials.max(1) as f64,
    }
}

/// Lossless run of every participant count, returning the complete rounds
/// and the last completion time.
pub fn lossless_run(n: usize, seed: u64) -> RunSummary {
    let params = ProtocolParams::for_n(n).expect("valid n");
    let mut cfg = SimConfig::new(seed, n, params.f);
    cfg.delay = DelayModel {
        build_us_per_vertex: DelayModel::default().build_us_per_vertex,
        ..in_slot_delay()
    };
    cfg.max_slots = u64::from(params.r_max) + 1;
    cfg.record_trace = false;
    summarize(&cfg, 0.0, &run_dissemination(&cfg, params))
}
