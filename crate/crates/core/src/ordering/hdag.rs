use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::hvertex::{AuthCertificate, HRef, HVertex};
use crate::params::{ParticipantId, ProtocolParams};

/// A participant's view of the horizontal process. A vertex enters the view
/// only once every vertex it back-references is in the view, so histories
/// inside the view are always complete. Vertices waiting for ancestors are
/// parked.
#[derive(Clone, Debug)]
pub struct HorizontalDag {
    params: ProtocolParams,
    vertices: BTreeMap<HRef, HVertex>,
    parked: BTreeMap<HRef, HVertex>,
}

impl HorizontalDag {
    pub fn new(params: ProtocolParams) -> Self {
        HorizontalDag {
            params,
            vertices: BTreeMap::new(),
            parked: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, r: &HRef) -> bool {
        self.vertices.contains_key(r)
    }

    pub fn get(&self, r: &HRef) -> Option<&HVertex> {
        self.vertices.get(r)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &HVertex> {
        self.vertices.values()
    }

    pub fn max_step(&self) -> Option<u32> {
        self.vertices.keys().next_back().map(|r| r.step)
    }

    /// Vertices of one step.
    pub fn step(&self, step: u32) -> impl Iterator<Item = &HVertex> {
        let lo = HRef {
            step,
            owner: ParticipantId(0),
            digest: crate::hash::Digest([0; 32]),
        };
        let hi = HRef {
            step,
            owner: ParticipantId(u16::MAX),
            digest: crate::hash::Digest([0xff; 32]),
        };
        self.vertices.range(lo..=hi).map(|(_, v)| v)
    }

    /// Structural validity: back edges point one step down, and from step 1
    /// on there are at least `n - f` of them from distinct owners.
    pub fn well_formed(&self, v: &HVertex) -> bool {
        if v.step == 0 {
            return v.back_edges.is_empty();
        }
        let owners: BTreeSet<ParticipantId> = v.back_edges.iter().map(|e| e.owner).collect();
        v.back_edges.iter().all(|e| e.step + 1 == v.step && e.owner.index() < self.params.n)
            && owners.len() >= self.params.auth_quorum()
            && v.owner.index() < self.params.n
    }

    /// Adds a vertex, returning every ref that entered the view as a
    /// consequence (the vertex itself and unparked descendants).
    pub fn insert(&mut self, v: HVertex) -> Vec<HRef> {
        let r = v.href();
        if self.vertices.contains_key(&r) || self.parked.contains_key(&r) || !self.well_formed(&v) {
            return Vec::new();
        }
        self.parked.insert(r, v);
        self.unpark()
    }

    fn unpark(&mut self) -> Vec<HRef> {
        let mut added = Vec::new();
        loop {
            let ready: Vec<HRef> = self
                .parked
                .iter()
                .filter(|(_, v)| v.back_edges.iter().all(|e| self.vertices.contains_key(e)))
                .map(|(r, _)| *r)
                .collect();
            if ready.is_empty() {
                return added;
            }
            for r in ready {
                let v = self.parked.remove(&r).expect("parked");
                self.vertices.insert(r, v);
                added.push(r);
            }
        }
    }

    /// Back-referenced refs that are neither in the view nor parked.
    pub fn missing(&self) -> BTreeSet<HRef> {
        self.parked
            .values()
            .flat_map(|v| v.back_edges.iter())
            .filter(|e| !self.vertices.contains_key(e) && !self.parked.contains_key(e))
            .copied()
            .collect()
    }

    pub fn parked(&self) -> impl Iterator<Item = &HRef> {
        self.parked.keys()
    }

    /// Owners of next-step vertices carrying a back edge to `target`.
    pub fn supporters(&self, target: &HRef) -> BTreeSet<ParticipantId> {
        self.step(target.step + 1)
            .filter(|v| v.back_edges.contains(target))
            .map(|v| v.owner)
            .collect()
    }

    pub fn certificate(&self, target: &HRef) -> Option<AuthCertificate> {
        let signers = self.supporters(target);
        (signers.len() >= self.params.auth_quorum()).then(|| AuthCertificate {
            subject: *target,
            signers,
        })
    }

    /// Causal history of `from`, itself included.
    pub fn history(&self, from: &HRef) -> BTreeSet<HRef> {
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![*from];
        while let Some(r) = stack.pop() {
            let Some(v) = self.vertices.get(&r) else {
                continue;
            };
            if seen.insert(r) {
                stack.extend(v.back_edges.iter().filter(|e| !seen.contains(e)));
            }
        }
        seen
    }

    pub fn reachable(&self, from: &HRef, to: &HRef) -> bool {
        if from == to {
            return self.contains(from);
        }
        if to.step >= from.step {
            return false;
        }
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![*from];
        while let Some(r) = stack.pop() {
            let Some(v) = self.vertices.get(&r) else {
                continue;
            };
            for e in &v.back_edges {
                if e == to {
                    return true;
                }
                if e.step > to.step && seen.insert(*e) {
                    stack.push(*e);
                }
            }
        }
        false
    }
}
