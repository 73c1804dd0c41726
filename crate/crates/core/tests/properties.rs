//! Property tests against small independent models: a ref→fullness map for
//! merges, DFS over the generator's own edge lists for reachability and
//! completeness, and brute-force counting for quorum sizes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use dagcast_core::{
    detect, invalidate, Keyring, LocalDag, ParticipantId, ProtocolParams, SignedRef, Slot, Vertex,
    VertexRef,
};
use proptest::prelude::*;

const SEED: u64 = 11;

/// A random history: vertices created round by round, each full vertex
/// citing a random subset of earlier ones.
#[derive(Clone, Debug)]
struct Universe {
    n: usize,
    ring: Keyring,
    vertices: Vec<Vertex>,
    parents: HashMap<VertexRef, Vec<VertexRef>>,
}

#[derive(Clone, Debug)]
struct Draft {
    origin: u16,
    round: u32,
    variant: u8,
    parent_bits: u64,
}

fn draft_strategy(n: u16, rounds: u32) -> impl Strategy<Value = Vec<Draft>> {
    prop::collection::vec(
        (0..n, 0..rounds, 0u8..2, any::<u64>()).prop_map(|(origin, round, variant, parent_bits)| Draft {
            origin,
            round,
            variant,
            parent_bits,
        }),
        1..24,
    )
}

impl Universe {
    fn build(n: usize, mut drafts: Vec<Draft>) -> Universe {
        let ring = Keyring::from_seed(SEED, n);
        drafts.sort_by_key(|s| (s.round, s.origin, s.variant));
        drafts.dedup_by_key(|s| (s.round, s.origin, s.variant));
        let mut vertices: Vec<Vertex> = Vec::new();
        let mut parents = HashMap::new();
        for s in drafts {
            let earlier: Vec<&Vertex> = vertices.iter().filter(|v| v.vref.round < s.round).collect();
            let chosen: BTreeSet<SignedRef> = earlier
                .iter()
                .enumerate()
                .filter(|(i, _)| s.parent_bits >> (i % 64) & 1 == 1)
                .map(|(_, v)| v.signed_ref())
                .collect();
            let payload = vec![s.origin as u8, s.round as u8, s.variant];
            let v = Vertex::create(&ring.signing_key(ParticipantId(s.origin)), s.round, payload, chosen.clone());
            parents.insert(v.vref, chosen.iter().map(|p| p.vref).collect());
            vertices.push(v);
        }
        Universe {
            n,
            ring,
            vertices,
            parents,
        }
    }

    /// Subset of the universe; `mask` picks vertices, `full` keeps bodies.
    fn pick(&self, mask: u64, full: u64) -> Vec<Vertex> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> (i % 64) & 1 == 1)
            .map(|(i, v)| if full >> (i % 64) & 1 == 1 { v.clone() } else { v.to_digest_only() })
            .collect()
    }

    fn dag(&self, mask: u64, full: u64) -> LocalDag {
        LocalDag::from_parts(self.pick(mask, full), [], [], &self.ring).expect("authentic vertices")
    }

    /// Ref → held in full, including the placeholders full vertices imply.
    fn model(&self, held: &[Vertex]) -> BTreeMap<VertexRef, bool> {
        let mut m = BTreeMap::new();
        for v in held {
            *m.entry(v.vref).or_insert(false) |= v.is_full();
            if v.is_full() {
                for p in &self.parents[&v.vref] {
                    m.entry(*p).or_insert(false);
                }
            }
        }
        m
    }
}

fn dag_model(d: &LocalDag) -> BTreeMap<VertexRef, bool> {
    d.vertices().map(|v| (v.vref, v.is_full())).collect()
}

fn universe() -> impl Strategy<Value = Universe> {
    (3usize..6).prop_flat_map(|n| draft_strategy(n as u16, 4).prop_map(move |s| Universe::build(n, s)))
}

/// Refs reachable from `from` through parents of vertices held in full.
fn dfs(edges: &HashMap<VertexRef, Vec<VertexRef>>, from: VertexRef) -> BTreeSet<VertexRef> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(r) = stack.pop() {
        if seen.insert(r) {
            if let Some(ps) = edges.get(&r) {
                stack.extend(ps.iter().copied());
            }
        }
    }
    seen
}

fn held_edges(u: &Universe, d: &LocalDag) -> HashMap<VertexRef, Vec<VertexRef>> {
    d.vertices()
        .filter(|v| v.is_full())
        .map(|v| (v.vref, u.parents[&v.vref].clone()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merge_is_a_semilattice(u in universe(), m in any::<[u64; 3]>(), f in any::<[u64; 3]>()) {
        let [a, b, c] = [0, 1, 2].map(|i| u.dag(m[i], f[i]));
        let ab = a.merge(&b, &u.ring).unwrap();
        prop_assert_eq!(&a.merge(&a, &u.ring).unwrap(), &a);
        prop_assert_eq!(&ab, &b.merge(&a, &u.ring).unwrap());
        prop_assert_eq!(
            ab.merge(&c, &u.ring).unwrap(),
            a.merge(&b.merge(&c, &u.ring).unwrap(), &u.ring).unwrap()
        );
        let mut held = u.pick(m[0], f[0]);
        held.extend(u.pick(m[1], f[1]));
        prop_assert_eq!(dag_model(&ab), u.model(&held));
    }

    #[test]
    fn merge_unions_byzantine_marks(u in universe(), m in any::<[u64; 2]>(), x in 0u16..3, y in 0u16..3) {
        let mut a = u.dag(m[0], u64::MAX);
        let mut b = u.dag(m[1], u64::MAX);
        a.mark_byzantine(ParticipantId(x));
        b.mark_byzantine(ParticipantId(y));
        let ab = a.merge(&b, &u.ring).unwrap();
        let want: BTreeSet<ParticipantId> = [x, y].into_iter().map(ParticipantId).collect();
        prop_assert_eq!(ab.byzantine(), &want);
        for v in ab.vertices() {
            prop_assert_eq!(ab.is_invalidated(&v.vref), want.contains(&v.vref.origin));
        }
    }

    #[test]
    fn reachability_matches_dfs(u in universe(), m in any::<u64>(), f in any::<u64>()) {
        let d = u.dag(m, f);
        let edges = held_edges(&u, &d);
        let refs: Vec<VertexRef> = d.refs().copied().collect();
        for from in &refs {
            let oracle = dfs(&edges, *from);
            for to in &refs {
                prop_assert_eq!(d.reachable(from, to).unwrap(), oracle.contains(to), "{:?} -> {:?}", from, to);
            }
            prop_assert_eq!(d.ancestors([from]), oracle);
        }
    }

    #[test]
    fn completeness_matches_path_enumeration(u in universe(), m in any::<u64>(), f in any::<u64>()) {
        let d = u.dag(m, f);
        let edges = held_edges(&u, &d);
        let params = ProtocolParams::new(u.n.max(4), 1, 5).unwrap();
        for own in d.refs() {
            let reached = dfs(&edges, *own);
            let mut missing = BTreeSet::new();
            for j in 0..params.n as u16 {
                for round in 0..=1 {
                    let hit = reached.iter().any(|r| {
                        r.origin.0 == j && r.round == round && (round == 0 || d.get(r).unwrap().is_full())
                    });
                    if !hit {
                        missing.insert(Slot::new(ParticipantId(j), round));
                    }
                }
            }
            let rep = d.completeness(own, &params).unwrap();
            prop_assert_eq!(rep.complete, missing.is_empty());
            prop_assert_eq!(rep.missing, missing);
        }
    }

    #[test]
    fn detect_flags_exactly_the_double_slots(u in universe(), m in any::<u64>(), f in any::<u64>()) {
        let d = u.dag(m, f);
        let mut per_slot: BTreeMap<(u16, u32), usize> = BTreeMap::new();
        for r in d.refs() {
            *per_slot.entry((r.origin.0, r.round)).or_default() += 1;
        }
        let want: BTreeSet<(u16, u32)> = per_slot.into_iter().filter(|(_, c)| *c > 1).map(|(k, _)| k).collect();
        let got: BTreeSet<(u16, u32)> = detect(&d).iter().map(|e| (e.offender.0, e.round)).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn evidence_transfers_to_any_dag(u in universe(), m in any::<[u64; 2]>(), f in any::<u64>()) {
        let source = u.dag(m[0], f);
        let other = u.dag(m[1], u64::MAX);
        for ev in detect(&source) {
            prop_assert!(ev.verify(&u.ring).is_ok());
            let out = invalidate(&other, &ev, &u.ring).unwrap();
            prop_assert!(out.byzantine().contains(&ev.offender));
            for v in out.vertices() {
                prop_assert_eq!(out.is_invalidated(&v.vref), out.byzantine().contains(&v.vref.origin));
            }
            // A different ring does not accept it.
            prop_assert!(ev.verify(&Keyring::from_seed(SEED + 1, u.n)).is_err());
            let mut same = ev.clone();
            same.variant_b = same.variant_a.clone();
            prop_assert!(same.verify(&u.ring).is_err());
        }
    }
}

/// Smallest overlap of two sets of size `q` out of `n`, by placing them at
/// opposite ends and counting.
fn min_overlap(n: usize, q: usize) -> usize {
    (0..n).filter(|i| *i < q && *i >= n - q).count()
}

#[test]
fn quorums_intersect_in_an_honest_participant_up_to_40() {
    for n in 1..=40usize {
        for f in 0..=n {
            let Ok(p) = ProtocolParams::new(n, f, 5) else {
                assert!(n < 3 * f + 1, "n = {n}, f = {f} rejected");
                continue;
            };
            assert!(n >= 3 * f + 1);
            assert!(min_overlap(n, p.auth_quorum()) > f, "n = {n}, f = {f}");
            assert!(p.advance_quorum() <= n - f, "honest participants alone reach the advance quorum");
            assert!(p.commit_support() > f);
        }
    }
}
