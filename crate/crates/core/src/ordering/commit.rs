use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::hdag::HorizontalDag;
use super::hvertex::HRef;
use crate::hash::{Digest, Hasher};
use crate::params::{ParticipantId, ProtocolParams};

const COIN_DOMAIN: &[u8] = b"dagcast/coin/v1";
const BLOCK_DOMAIN: &[u8] = b"dagcast/block/v1";

/// Anchors sit on every second step.
pub fn is_anchor_step(step: u32) -> bool {
    step % 2 == 0
}

/// Shared coin: `H(seed, step) mod n`.
pub fn elect_anchor(seed: u64, step: u32, n: usize) -> ParticipantId {
    let mut h = Hasher::new(COIN_DOMAIN);
    h.u64(seed).u32(step);
    let d = h.finish();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d.0[..8]);
    ParticipantId((u64::from_le_bytes(b) % n as u64) as u16)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub step: u32,
    pub owner: ParticipantId,
    /// The elected owner's vertex at `step`, if the view has one.
    pub vertex: Option<HRef>,
    pub support: usize,
    pub committed: bool,
}

/// One committed block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitRecord {
    pub anchor: HRef,
    /// Bundled vertices in total order.
    pub bundle: Vec<HRef>,
    /// Owners whose vertices are left out because the committed history
    /// holds two variants of one of their steps.
    pub excluded: BTreeSet<ParticipantId>,
}

impl CommitRecord {
    pub fn block_digest(&self) -> Digest {
        let mut h = Hasher::new(BLOCK_DOMAIN);
        for r in core::iter::once(&self.anchor).chain(&self.bundle) {
            h.u32(r.step).u16(r.owner.0).bytes(&r.digest.0);
        }
        h.finish()
    }
}

/// Blocks of vertices: block `i` is everything in the history of anchor `i`
/// that is not in the history of an earlier anchor.
pub fn partial_order(view: &HorizontalDag, anchors: &[HRef]) -> Vec<BTreeSet<HRef>> {
    let mut seen = BTreeSet::new();
    anchors
        .iter()
        .map(|a| {
            let block: BTreeSet<HRef> = view.history(a).difference(&seen).copied().collect();
            seen.extend(block.iter().copied());
            block
        })
        .collect()
}

/// Kahn's algorithm on the subgraph induced by `block`; among ready
/// vertices the smallest `(step, owner, digest)` goes first.
pub fn total_order(view: &HorizontalDag, block: &BTreeSet<HRef>) -> Vec<HRef> {
    let mut indegree: BTreeMap<HRef, usize> = block.iter().map(|r| (*r, 0)).collect();
    let mut children: BTreeMap<HRef, Vec<HRef>> = BTreeMap::new();
    for r in block {
        if let Some(v) = view.get(r) {
            for e in v.back_edges.iter().filter(|e| block.contains(e)) {
                *indegree.get_mut(r).expect("in block") += 1;
                children.entry(*e).or_default().push(*r);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<HRef>> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(r, _)| Reverse(*r))
        .collect();
    let mut out = Vec::with_capacity(block.len());
    while let Some(Reverse(r)) = ready.pop() {
        out.push(r);
        for c in children.get(&r).into_iter().flatten() {
            let d = indegree.get_mut(c).expect("in block");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(*c));
            }
        }
    }
    out
}

/// Anchor commitment with chaining of earlier anchors.
#[derive(Clone, Debug)]
pub struct Committer {
    params: ProtocolParams,
    seed: u64,
    records: Vec<CommitRecord>,
    delivered: BTreeSet<HRef>,
    variants: BTreeMap<(ParticipantId, u32), BTreeSet<Digest>>,
    excluded: BTreeSet<ParticipantId>,
    last_step: Option<u32>,
}

impl Committer {
    pub fn new(params: ProtocolParams, seed: u64) -> Self {
        Committer {
            params,
            seed,
            records: Vec::new(),
            delivered: BTreeSet::new(),
            variants: BTreeMap::new(),
            excluded: BTreeSet::new(),
            last_step: None,
        }
    }

    pub fn records(&self) -> &[CommitRecord] {
        &self.records
    }

    pub fn last_committed_step(&self) -> Option<u32> {
        self.last_step
    }

    pub fn committed_anchors(&self) -> Vec<HRef> {
        self.records.iter().map(|r| r.anchor).collect()
    }

    /// Flattened sequence over all committed blocks.
    pub fn total_order(&self) -> Vec<HRef> {
        self.records.iter().flat_map(|r| r.bundle.iter().copied()).collect()
    }

    pub fn elected(&self, step: u32) -> ParticipantId {
        elect_anchor(self.seed, step, self.params.n)
    }

    /// The elected owner's vertex at `step` with the most support; ties go
    /// to the smaller ref.
    pub fn anchor(&self, view: &HorizontalDag, step: u32) -> Anchor {
        let owner = self.elected(step);
        let best = view
            .step(step)
            .filter(|v| v.owner == owner)
            .map(|v| {
                let r = v.href();
                (view.supporters(&r).len(), Reverse(r))
            })
            .max();
        Anchor {
            step,
            owner,
            vertex: best.map(|(_, Reverse(r))| r),
            support: best.map_or(0, |(s, _)| s),
            committed: self.records.iter().any(|c| c.anchor.step == step),
        }
    }

    /// Whether the view holds `n - f` vertices two steps above `step`.
    pub fn decidable(&self, view: &HorizontalDag, step: u32) -> bool {
        let owners: BTreeSet<ParticipantId> = view.step(step + 2).map(|v| v.owner).collect();
        owners.len() >= self.params.auth_quorum()
    }

    /// Commits the anchor of `step` if it has `f + 1` supporters, first
    /// committing earlier uncommitted anchors that it reaches.
    pub fn try_commit(&mut self, view: &HorizontalDag, step: u32) -> bool {
        if !is_anchor_step(step)
            || self.last_step.is_some_and(|l| step <= l)
            || !self.decidable(view, step)
        {
            return false;
        }
        let a = self.anchor(view, step);
        match a.vertex {
            Some(r) if a.support >= self.params.commit_support() => {
                self.commit_chain(view, r);
                true
            }
            _ => false,
        }
    }

    /// Tries every undecided anchor step in order. Returns the number of new
    /// blocks.
    pub fn advance(&mut self, view: &HorizontalDag) -> usize {
        let before = self.records.len();
        let Some(max) = view.max_step() else {
            return 0;
        };
        let mut s = self.last_step.map_or(0, |l| l + 2);
        while s + 2 <= max {
            self.try_commit(view, s);
            s = self.last_step.map_or(s + 2, |l| (l + 2).max(s + 2));
        }
        self.records.len() - before
    }

    fn commit_chain(&mut self, view: &HorizontalDag, anchor: HRef) {
        let mut chain = alloc::vec![anchor];
        let mut head = anchor;
        let floor = self.last_step.map_or(0, |l| l + 2);
        let mut s = anchor.step;
        while s >= floor + 2 {
            s -= 2;
            let owner = self.elected(s);
            let prev = view
                .step(s)
                .filter(|v| v.owner == owner)
                .map(|v| v.href())
                .find(|r| view.reachable(&head, r));
            if let Some(p) = prev {
                chain.push(p);
                head = p;
            }
        }
        for a in chain.into_iter().rev() {
            self.deliver(view, a);
        }
    }

    fn deliver(&mut self, view: &HorizontalDag, anchor: HRef) {
        let hist = view.history(&anchor);
        for r in &hist {
            let set = self.variants.entry((r.owner, r.step)).or_default();
            set.insert(r.digest);
            if set.len() > 1 {
                self.excluded.insert(r.owner);
            }
        }
        let fresh: BTreeSet<HRef> = hist.difference(&self.delivered).copied().collect();
        self.delivered.extend(fresh.iter().copied());
        let kept: BTreeSet<HRef> = fresh
            .into_iter()
            .filter(|r| !self.excluded.contains(&r.owner))
            .collect();
        self.records.push(CommitRecord {
            anchor,
            bundle: total_order(view, &kept),
            excluded: self.excluded.clone(),
        });
        self.last_step = Some(anchor.step);
    }
}
