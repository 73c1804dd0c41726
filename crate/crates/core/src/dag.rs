//! The local communication-history DAG.
//!
//! Every participant keeps a grow-only set of authenticated vertices. Edges
//! run from a parent to the child that names it, so "`from` reaches `to`"
//! means `from` transitively references `to` through parent links. Merging
//! two DAGs is set union, with full copies winning over digest-only ones,
//! which makes [`LocalDag`] a join-semilattice.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::auth::Keyring;
use crate::params::{ParticipantId, ProtocolParams};
use crate::vertex::{SignedRef, Vertex, VertexError, VertexRef};

/// One `(participant, round)` position of the history grid.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Slot {
    pub round: u32,
    pub origin: ParticipantId,
}

impl Slot {
    pub fn new(origin: ParticipantId, round: u32) -> Self {
        Slot { round, origin }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DagError {
    /// A vertex failed verification. Authenticators cannot be forged in the
    /// threat model, so this always points at a bug in whoever produced it.
    #[error("rejected forged vertex: {0}")]
    Forged(#[from] VertexError),
    #[error("vertex {0:?} is not in the DAG")]
    UnknownVertex(VertexRef),
}

/// What an insertion changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    Unchanged,
    Added,
    Upgraded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletenessReport {
    pub complete: bool,
    /// Slots with no qualifying vertex reachable from the evaluated vertex.
    pub missing: BTreeSet<Slot>,
    /// Participants left out of the target because nothing of theirs was
    /// ever seen.
    pub excluded: BTreeSet<ParticipantId>,
}

#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct LocalDag {
    vertices: BTreeMap<VertexRef, Vertex>,
    byzantine: BTreeSet<ParticipantId>,
    invalidated: BTreeSet<VertexRef>,
}

impl LocalDag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, vref: &VertexRef) -> bool {
        self.vertices.contains_key(vref)
    }

    pub fn get(&self, vref: &VertexRef) -> Option<&Vertex> {
        self.vertices.get(vref)
    }

    /// Vertices in canonical `(round, origin, digest)` order.
    pub fn vertices(&self) -> impl DoubleEndedIterator<Item = &Vertex> {
        self.vertices.values()
    }

    pub fn refs(&self) -> impl DoubleEndedIterator<Item = &VertexRef> {
        self.vertices.keys()
    }

    /// `(parent, child)` pairs. Only full vertices know their parents.
    pub fn edges(&self) -> impl Iterator<Item = (VertexRef, VertexRef)> + '_ {
        self.vertices
            .values()
            .flat_map(|v| v.parents().map(move |p| (p.vref, v.vref)))
    }

    pub fn byzantine(&self) -> &BTreeSet<ParticipantId> {
        &self.byzantine
    }

    pub fn invalidated(&self) -> &BTreeSet<VertexRef> {
        &self.invalidated
    }

    pub fn is_invalidated(&self, vref: &VertexRef) -> bool {
        self.invalidated.contains(vref)
    }

    /// All authenticated variants held for a slot.
    pub fn variants(&self, slot: Slot) -> impl Iterator<Item = &Vertex> {
        let lo = VertexRef {
            round: slot.round,
            origin: slot.origin,
            digest: crate::hash::Digest([0; 32]),
        };
        let hi = VertexRef {
            digest: crate::hash::Digest([0xff; 32]),
            ..lo
        };
        self.vertices.range(lo..=hi).map(|(_, v)| v)
    }

    /// Highest round for which any vertex is held.
    pub fn max_round(&self) -> Option<u32> {
        self.vertices.keys().next_back().map(|r| r.round)
    }

    /// Verifies and inserts one vertex. Parents of a full vertex that are
    /// not yet known are added as digest-only entries; their refs are
    /// appended to `learned` along with the vertex itself when anything
    /// changed.
    pub fn insert(
        &mut self,
        vertex: Vertex,
        ring: &Keyring,
        learned: &mut Vec<VertexRef>,
    ) -> Result<Insertion, DagError> {
        let existing_full = match self.vertices.get(&vertex.vref) {
            // Same digest means same contents, nothing new to learn.
            Some(v) if v.is_full() || !vertex.is_full() => return Ok(Insertion::Unchanged),
            Some(_) => true,
            None => false,
        };
        vertex.verify(ring)?;
        self.insert_verified(vertex, learned);
        Ok(if existing_full {
            Insertion::Upgraded
        } else {
            Insertion::Added
        })
    }

    fn insert_verified(&mut self, vertex: Vertex, learned: &mut Vec<VertexRef>) {
        let placeholders: Vec<SignedRef> = vertex
            .parents()
            .filter(|p| !self.vertices.contains_key(&p.vref))
            .copied()
            .collect();
        for p in placeholders {
            self.note(p.vref);
            self.vertices.insert(p.vref, Vertex::digest_only(p));
            learned.push(p.vref);
        }
        self.note(vertex.vref);
        learned.push(vertex.vref);
        self.vertices.insert(vertex.vref, vertex);
    }

    fn note(&mut self, vref: VertexRef) {
        if self.byzantine.contains(&vref.origin) {
            self.invalidated.insert(vref);
        }
    }

    /// In-place join with another DAG. Every vertex of `other` is verified
    /// before anything is changed, so a forged input leaves `self` intact.
    pub fn absorb(&mut self, other: &LocalDag, ring: &Keyring) -> Result<Vec<VertexRef>, DagError> {
        let learned = self.absorb_vertices(other.vertices.values(), ring)?;
        for id in &other.byzantine {
            self.mark_byzantine(*id);
        }
        self.invalidated.extend(other.invalidated.iter().copied());
        Ok(learned)
    }

    /// Verifies all of `vertices`, then inserts them. Returns the sorted refs
    /// that were added or upgraded.
    pub fn absorb_vertices<'a, I>(&mut self, vertices: I, ring: &Keyring) -> Result<Vec<VertexRef>, DagError>
    where
        I: IntoIterator<Item = &'a Vertex>,
        I::IntoIter: Clone,
    {
        let it = vertices.into_iter();
        for v in it.clone() {
            if self.needs(v) {
                v.verify(ring)?;
            }
        }
        let mut learned = Vec::new();
        for v in it {
            if self.needs(v) {
                self.insert_verified(v.clone(), &mut learned);
            }
        }
        learned.sort();
        learned.dedup();
        Ok(learned)
    }

    fn needs(&self, v: &Vertex) -> bool {
        match self.vertices.get(&v.vref) {
            Some(mine) => !mine.is_full() && v.is_full(),
            None => true,
        }
    }

    /// Join of two DAGs: union of vertices, edges, Byzantine and invalidated
    /// sets, with full copies winning over digest-only ones.
    pub fn merge(&self, other: &LocalDag, ring: &Keyring) -> Result<LocalDag, DagError> {
        let mut out = self.clone();
        out.absorb(other, ring)?;
        Ok(out)
    }

    /// Records `id` as Byzantine and invalidates everything it authored.
    /// Vertices stay in the DAG as evidence.
    pub fn mark_byzantine(&mut self, id: ParticipantId) -> bool {
        let fresh = self.byzantine.insert(id);
        let refs: Vec<VertexRef> = self
            .vertices
            .keys()
            .filter(|r| r.origin == id)
            .copied()
            .collect();
        self.invalidated.extend(refs);
        fresh
    }

    /// Every vertex reachable from `roots` by following parent links,
    /// roots included. Unknown roots are ignored.
    pub fn ancestors<'a>(&self, roots: impl IntoIterator<Item = &'a VertexRef>) -> BTreeSet<VertexRef> {
        let mut seen = BTreeSet::new();
        for r in roots {
            self.ancestors_into(r, &mut seen);
        }
        seen
    }

    /// Adds the history of `root` to `seen`, not descending below refs that
    /// are already there.
    pub fn ancestors_into(&self, root: &VertexRef, seen: &mut BTreeSet<VertexRef>) {
        if !self.vertices.contains_key(root) || seen.contains(root) {
            return;
        }
        let mut stack = alloc::vec![*root];
        while let Some(r) = stack.pop() {
            if !seen.insert(r) {
                continue;
            }
            if let Some(v) = self.vertices.get(&r) {
                for p in v.parents() {
                    if !seen.contains(&p.vref) {
                        stack.push(p.vref);
                    }
                }
            }
        }
    }

    /// Whether `from` transitively references `to`.
    pub fn reachable(&self, from: &VertexRef, to: &VertexRef) -> Result<bool, DagError> {
        if !self.contains(from) {
            return Err(DagError::UnknownVertex(*from));
        }
        if from == to {
            return Ok(true);
        }
        if to.round >= from.round || !self.contains(to) {
            return Ok(false);
        }
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![*from];
        while let Some(r) = stack.pop() {
            if !seen.insert(r) {
                continue;
            }
            for p in self.vertices[&r].parents() {
                if p.vref == *to {
                    return Ok(true);
                }
                // Parents are strictly earlier, so nothing below `to`'s round
                // can lead back up to it.
                if p.vref.round > to.round && !seen.contains(&p.vref) {
                    stack.push(p.vref);
                }
            }
        }
        Ok(false)
    }

    /// History completeness of `own`: for every participant, some round-0
    /// vertex and a full vertex for each round `1..=history_depth` must be
    /// reachable. Byzantine participants count through any authenticated
    /// variant.
    pub fn completeness(
        &self,
        own: &VertexRef,
        params: &ProtocolParams,
    ) -> Result<CompletenessReport, DagError> {
        if !self.contains(own) {
            return Err(DagError::UnknownVertex(*own));
        }
        Ok(self.completeness_from(core::slice::from_ref(own), params, false))
    }

    /// Completeness evaluated over the union of histories of `roots`. With
    /// `exclude_vanished`, participants of whom not a single vertex is held
    /// are dropped from the target and reported in `excluded`.
    pub fn completeness_from(
        &self,
        roots: &[VertexRef],
        params: &ProtocolParams,
        exclude_vanished: bool,
    ) -> CompletenessReport {
        let reach = self.ancestors(roots);
        let mut covered: BTreeSet<Slot> = BTreeSet::new();
        for r in &reach {
            if r.round > params.history_depth {
                continue;
            }
            let full = self.vertices[r].is_full();
            if r.round == 0 || full {
                covered.insert(r.slot());
            }
        }
        let mut excluded = BTreeSet::new();
        if exclude_vanished {
            for id in params.participants() {
                if !self.vertices.keys().any(|r| r.origin == id) {
                    excluded.insert(id);
                }
            }
        }
        let mut missing = BTreeSet::new();
        for id in params.participants().filter(|id| !excluded.contains(id)) {
            for round in 0..=params.history_depth {
                let slot = Slot::new(id, round);
                if !covered.contains(&slot) {
                    missing.insert(slot);
                }
            }
        }
        CompletenessReport {
            complete: missing.is_empty(),
            missing,
            excluded,
        }
    }

    /// Full-payload round-0 vertices reachable from `own`, minus invalidated
    /// ones.
    pub fn extract_originals(&self, own: &VertexRef) -> Result<Vec<&Vertex>, DagError> {
        if !self.contains(own) {
            return Err(DagError::UnknownVertex(*own));
        }
        Ok(self.extract_originals_from(core::slice::from_ref(own)))
    }

    pub fn extract_originals_from(&self, roots: &[VertexRef]) -> Vec<&Vertex> {
        self.ancestors(roots)
            .into_iter()
            .filter(|r| r.round == 0 && !self.invalidated.contains(r))
            .map(|r| &self.vertices[&r])
            .filter(|v| v.is_full())
            .collect()
    }

    /// Rebuilds a DAG from decoded parts, verifying every vertex.
    pub fn from_parts(
        vertices: impl IntoIterator<Item = Vertex>,
        byzantine: impl IntoIterator<Item = ParticipantId>,
        invalidated: impl IntoIterator<Item = VertexRef>,
        ring: &Keyring,
    ) -> Result<LocalDag, DagError> {
        let mut dag = LocalDag::new();
        let mut scratch = Vec::new();
        // Full vertices first so that parents named by them are not left as
        // digest-only entries when the full copy is also present.
        let mut all: Vec<Vertex> = vertices.into_iter().collect();
        all.sort_by_key(|v| (!v.is_full(), v.vref));
        for v in all {
            dag.insert(v, ring, &mut scratch)?;
        }
        for id in byzantine {
            dag.mark_byzantine(id);
        }
        for r in invalidated {
            if dag.contains(&r) && dag.byzantine.contains(&r.origin) {
                dag.invalidated.insert(r);
            }
        }
        Ok(dag)
    }
}
