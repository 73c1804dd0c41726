//! Commit decisions must not depend on the order in which horizontal
//! vertices arrive, and the total order must respect back edges.

use std::collections::{BTreeMap, BTreeSet};

use dagcast_core::ordering::{Committer, HRef, HVertex, HorizontalDag};
use dagcast_core::{ParticipantId, ProtocolParams};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Plan {
    n: usize,
    seed: u64,
    /// Per step and owner: present, an optional second variant, and edge
    /// choice bits.
    cells: Vec<Vec<(bool, bool, u64)>>,
}

fn plan() -> impl Strategy<Value = Plan> {
    (4usize..8, any::<u64>()).prop_flat_map(|(n, seed)| {
        prop::collection::vec(prop::collection::vec((prop::bool::weighted(0.85), prop::bool::weighted(0.08), any::<u64>()), n), 8)
            .prop_map(move |cells| Plan { n, seed, cells })
    })
}

fn build(p: &Plan) -> (ProtocolParams, Vec<HVertex>) {
    let params = ProtocolParams::new(p.n, (p.n - 1) / 3, 5).unwrap();
    let q = params.auth_quorum();
    let mut prev: Vec<HRef> = Vec::new();
    let mut all = Vec::new();
    for (step, row) in p.cells.iter().enumerate() {
        let step = step as u32;
        let mut cur = Vec::new();
        for (o, &(present, twin, bits)) in row.iter().enumerate() {
            if !present {
                continue;
            }
            for variant in 0..=u8::from(twin) {
                let mut edges: BTreeSet<HRef> = prev
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits >> (i % 64) & 1 == 1)
                    .map(|(_, r)| *r)
                    .collect();
                // Top up to a quorum of owners in a fixed order.
                for r in &prev {
                    let owners: BTreeSet<ParticipantId> = edges.iter().map(|e| e.owner).collect();
                    if owners.len() >= q {
                        break;
                    }
                    if !owners.contains(&r.owner) {
                        edges.insert(*r);
                    }
                }
                if step > 0 && edges.iter().map(|e| e.owner).collect::<BTreeSet<_>>().len() < q {
                    continue;
                }
                let v = HVertex {
                    owner: ParticipantId(o as u16),
                    step,
                    tx_batch: vec![vec![o as u8, step as u8, variant]],
                    back_edges: if step == 0 { BTreeSet::new() } else { edges },
                };
                cur.push(v.href());
                all.push(v);
            }
        }
        prev = cur;
    }
    (params, all)
}

fn run(params: ProtocolParams, seed: u64, order: &[HVertex]) -> (Vec<String>, Vec<HRef>) {
    let mut view = HorizontalDag::new(params);
    let mut c = Committer::new(params, seed);
    for v in order {
        view.insert(v.clone());
        c.advance(&view);
    }
    let log = c
        .records()
        .iter()
        .map(|r| format!("{:?} {:?} {:?}", r.anchor, r.bundle, r.excluded))
        .collect();
    (log, c.total_order())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn arrival_order_does_not_change_commits(p in plan(), perm in any::<u64>()) {
        let (params, vs) = build(&p);
        let (one, total) = run(params, p.seed, &vs);
        let mut shuffled = vs.clone();
        // Deterministic shuffle from `perm`.
        let mut x = perm | 1;
        for i in (1..shuffled.len()).rev() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            shuffled.swap(i, (x % (i as u64 + 1)) as usize);
        }
        let (two, _) = run(params, p.seed, &shuffled);
        prop_assert_eq!(&one, &two);

        // Each ref appears once and after every back edge that is ordered.
        let pos: BTreeMap<HRef, usize> = total.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        prop_assert_eq!(pos.len(), total.len());
        let by_ref: BTreeMap<HRef, &HVertex> = vs.iter().map(|v| (v.href(), v)).collect();
        for (r, i) in &pos {
            for e in &by_ref[r].back_edges {
                if let Some(j) = pos.get(e) {
                    prop_assert!(j < i, "{:?} ordered before its back edge {:?}", r, e);
                }
            }
        }
    }
}

#[test]
fn full_plan_commits_every_decidable_anchor() {
    let p = Plan {
        n: 4,
        seed: 3,
        cells: vec![vec![(true, false, u64::MAX); 4]; 8],
    };
    let (params, vs) = build(&p);
    let (log, total) = run(params, p.seed, &vs);
    // Anchors at steps 0, 2 and 4; step 6 would need step 8. The last
    // block reaches all of steps 0..=3 plus its own anchor.
    assert_eq!(log.len(), 3);
    assert_eq!(total.len(), 4 * 4 + 1);
}
