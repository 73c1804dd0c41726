//! Acceptance suite. Prints one line per criterion and fails if any fails.
//! Runs without the libtest harness so the lines always show.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dagcast::config::ExperimentConfig;
use dagcast::harness;
use dagcast::netsim::{trace_hash, SimConfig};
use dagcast_core::{Keyring, LocalDag, ProtocolParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const LOSSLESS_BUDGET: Duration = Duration::from_secs(5);
const TABLE_BUDGET: Duration = Duration::from_secs(600);
const RHO4_BAND: (f64, f64) = (0.25, 0.45);
const RHO20_MIN: f64 = 0.70;
const ORDERING_RUNS: usize = 1000;
/// Half of rho_max(4) at the default configuration, rounded down.
const ORDERING_LOSS_CAP: f64 = 0.18;
const ANCHOR_TRIALS: usize = 10_000;
const ANCHOR_FREQ_MIN: f64 = 0.33 - 0.02;
const ANCHOR_WORST_MIN: f64 = 1.0 / 3.0;
const MERGE_CASES: usize = 200;

struct Line {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn lossless() -> (bool, String) {
    let t = Instant::now();
    let mut bad = Vec::new();
    let delay = dagcast::netsim::DelayModel::default();
    for n in 4..=32 {
        let s = harness::lossless_run(n, 1);
        let want = harness::lossless_latency_ms(25.0, &delay, n);
        let at_two = s.complete_rounds.iter().all(|r| *r == Some(2));
        let on_time = s.latency_last_ms.is_some_and(|l| (l - want).abs() < 1e-9);
        if !(s.success && at_two && on_time) {
            bad.push(format!("n={n} rounds={:?} latency={:?} want={want}", s.complete_rounds, s.latency_last_ms));
        }
    }
    let took = t.elapsed();
    let pass = bad.is_empty() && took < LOSSLESS_BUDGET;
    (pass, format!("n=4..32 complete at round 2 in {:.2}s {}", took.as_secs_f64(), bad.join("; ")))
}

fn replay(r: harness::ReplayReport) -> (bool, String) {
    let failed: Vec<String> = r.checks.iter().filter(|c| !c.pass).map(|c| format!("{}: {}", c.name, c.detail)).collect();
    (r.passed(), if failed.is_empty() { format!("{} checks", r.checks.len()) } else { failed.join("; ") })
}

fn table(ec: &ExperimentConfig) -> (Line, Line, usize) {
    let t = Instant::now();
    let rows = match harness::loss_table(ec) {
        Ok(r) => r,
        Err(e) => {
            let l4 = Line { id: 4, name: "tolerable loss trend", pass: false, detail: e.to_string() };
            let l5 = Line { id: 5, name: "latency trend", pass: false, detail: "no table".into() };
            return (l4, l5, 0);
        }
    };
    let took = t.elapsed();
    let rho: Vec<f64> = rows.iter().map(|r| r.rho_max).collect();
    let at = |n: usize| rows.iter().find(|r| r.n == n).map(|r| r.rho_max);
    let band = at(4).is_some_and(|x| x >= RHO4_BAND.0 && x <= RHO4_BAND.1);
    let top = at(20).is_some_and(|x| x >= RHO20_MIN);
    let monotone = rho.windows(2).all(|w| w[0] <= w[1]);
    let l4 = Line {
        id: 4,
        name: "tolerable loss trend",
        pass: band && top && monotone && took < TABLE_BUDGET,
        detail: format!(
            "rho_max {:?} band={band} n20>={RHO20_MIN}:{top} monotone={monotone} in {:.1}s",
            rho,
            took.as_secs_f64()
        ),
    };
    let last: Vec<f64> = rows.iter().map(|r| r.latency_last_ms.unwrap_or(f64::NAN)).collect();
    let mean: Vec<f64> = rows.iter().map(|r| r.latency_mean_ms.unwrap_or(f64::NAN)).collect();
    let strict = last.windows(2).all(|w| w[0] < w[1]);
    let l5 = Line {
        id: 5,
        name: "latency trend",
        pass: strict,
        detail: format!(
            "last-honest ms {:?} (per-participant mean {:?}), t_slot {} ms",
            last.iter().map(|x| (x * 10.0).round() / 10.0).collect::<Vec<_>>(),
            mean.iter().map(|x| (x * 10.0).round() / 10.0).collect::<Vec<_>>(),
            ec.t_slot_ms
        ),
    };
    let flags = rows
        .iter()
        .flat_map(|r| r.point.iter().flat_map(|p| p.runs.iter()))
        .map(|s| s.false_flags)
        .sum();
    (l4, l5, flags)
}

fn contrast(ec: &ExperimentConfig) -> (bool, String) {
    let mut parts = Vec::new();
    let mut any = false;
    for n in [12, 16, 20] {
        let c = harness::per_receiver_contrast(ec, n);
        let regime = c.k * 3 > n && c.direct_per_round < c.direct_quorum;
        let ok = regime && c.success_rate >= ec.success_threshold;
        any |= ok;
        parts.push(format!("n={n} lost/round={} success={:.2}{}", c.k, c.success_rate, if ok { " ok" } else { "" }));
    }
    (any, parts.join(", "))
}

fn ordering() -> (bool, String, usize) {
    let r = harness::ordering_agreement(ORDERING_RUNS, 1, ORDERING_LOSS_CAP);
    let pass = r.identical == r.runs && r.prefix_consistent == r.runs;
    (
        pass,
        format!(
            "{}/{} identical, {} with commits everywhere, mean {:.2} blocks, divergent {:?}",
            r.identical, r.runs, r.nonempty, r.mean_commits, r.divergent_seeds
        ),
        r.false_flags,
    )
}

fn anchors() -> (bool, String) {
    let r = harness::anchor_monte_carlo(4, ANCHOR_TRIALS, 1);
    let pass = r.trials >= 10_000 && r.frequency >= ANCHOR_FREQ_MIN && r.worst_case >= ANCHOR_WORST_MIN;
    (
        pass,
        format!(
            "worst case {:.4} over {} patterns, frequency {}/{} = {:.4}",
            r.worst_case, r.patterns, r.commits, r.trials, r.frequency
        ),
    )
}

/// Merge laws on DAGs taken from lossy simulated runs.
fn merge_laws() -> Result<usize, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let mut cases = 0;
    while cases < MERGE_CASES {
        let n = rng.random_range(4..=10usize);
        let params = ProtocolParams::for_n(n).expect("valid n");
        let mut cfg = SimConfig::new(rng.random(), n, params.f);
        cfg.loss = dagcast::netsim::LossModel::Bernoulli { p: rng.random_range(0.0..0.6) };
        cfg.max_slots = rng.random_range(1..=u64::from(params.r_max) + 1);
        cfg.stop_when_finished = false;
        cfg.record_trace = false;
        let ring = Keyring::from_seed(cfg.seed, n);
        let out = harness::run_dissemination(&cfg, params);
        let dags: Vec<&LocalDag> = out.nodes.iter().map(|a| a.primary().state.dag()).collect();
        let pick = |r: &mut ChaCha20Rng| dags[r.random_range(0..n)];
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let m = |x: &LocalDag, y: &LocalDag| x.merge(y, &ring).map_err(|e| e.to_string());
        if m(a, a)? != *a {
            return Err(format!("idempotence, seed {}", cfg.seed));
        }
        if m(a, b)? != m(b, a)? {
            return Err(format!("commutativity, seed {}", cfg.seed));
        }
        if m(&m(a, b)?, c)? != m(a, &m(b, c)?)? {
            return Err(format!("associativity, seed {}", cfg.seed));
        }
        cases += 1;
    }
    Ok(cases)
}

fn quorum_arithmetic() -> bool {
    (4..=40usize).all(|n| {
        (0..=(n - 1) / 3).all(|f| {
            let p = ProtocolParams::new(n, f, 5).expect("valid");
            let q = p.auth_quorum();
            // Two quorums placed at opposite ends of 0..n.
            let overlap = (0..n).filter(|i| *i < q && *i >= n - q).count();
            overlap > f && p.advance_quorum() <= n - f && p.commit_support() > f
        })
    })
}

fn determinism() -> bool {
    let a = harness::fig3_replay(7);
    let b = harness::fig3_replay(7);
    let lossy = |seed| {
        let ec = ExperimentConfig::default();
        let mut cfg = harness::sim_config(&ec, 8, seed, ec.loss(8, 0.5));
        cfg.record_trace = true;
        let out = harness::run_dissemination(&cfg, ec.params(8).expect("valid"));
        trace_hash(&out.trace)
    };
    trace_hash(&a.trace) == trace_hash(&b.trace) && lossy(5) == lossy(5) && lossy(5) != lossy(6)
}

fn main() -> ExitCode {
    let ec = ExperimentConfig::default();
    let mut lines = Vec::new();

    let (pass, detail) = lossless();
    lines.push(Line { id: 1, name: "lossless base case", pass, detail });
    let (pass, detail) = replay(harness::fig2_replay(7));
    lines.push(Line { id: 2, name: "fig2 replay", pass, detail });
    let (pass, detail) = replay(harness::fig3_replay(7));
    lines.push(Line { id: 3, name: "fig3 replay", pass, detail });
    let (l4, l5, table_flags) = table(&ec);
    lines.push(l4);
    lines.push(l5);
    let (pass, detail) = contrast(&ec);
    lines.push(Line { id: 6, name: "per-round loss contrast", pass, detail });
    let (pass, detail, order_flags) = ordering();
    lines.push(Line { id: 7, name: "ordering agreement", pass, detail });
    let (pass, detail) = anchors();
    lines.push(Line { id: 8, name: "anchor commit probability", pass, detail });

    let merge = merge_laws();
    let quorum = quorum_arithmetic();
    let flags = table_flags + order_flags;
    let det = determinism();
    lines.push(Line {
        id: 9,
        name: "property suites",
        pass: merge.is_ok() && quorum && flags == 0 && det,
        detail: format!(
            "merge laws {:?}, quorum n<=40 {quorum}, honest flagged {flags}, same-seed trace hash {det}",
            merge
        ),
    });

    let mut ok = true;
    for l in &lines {
        println!("[{}] {} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.name, l.detail);
        ok &= l.pass;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
