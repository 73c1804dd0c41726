use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dagcast::config::{ExperimentConfig, LossMode};
use dagcast::formats;
use dagcast::harness::{self, MaxLossRow, PointResult, ReplayReport};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "dagcast", version, about = "Lossy-broadcast DAG dissemination experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; its values override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON results.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Participant counts, comma separated.
    #[arg(short, long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Fixed f instead of floor((n-1)/3).
    #[arg(short, long, global = true)]
    f: Option<usize>,
    #[arg(long, global = true)]
    seeds: Option<usize>,
    #[arg(long, global = true)]
    base_seed: Option<u64>,
    #[arg(long, global = true)]
    rho_lo: Option<f64>,
    #[arg(long, global = true)]
    rho_hi: Option<f64>,
    #[arg(long, global = true)]
    resolution: Option<f64>,
    /// Loss levels for `sweep`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long, global = true)]
    t_slot: Option<f64>,
    #[arg(long, global = true)]
    r_max: Option<u32>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true, value_enum)]
    loss_mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Budget,
    BudgetGreedy,
    Bernoulli,
}

#[derive(Subcommand)]
enum Cmd {
    /// Success rate and latency over a grid of n and rho.
    Sweep,
    /// Tolerable loss proportion and latency per n.
    MaxLoss,
    /// Scripted scenarios; fails on any unmet expectation.
    Replay {
        #[arg(value_enum)]
        scenario: Scenario,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Randomized ordering runs; fails on any commit-log divergence.
    Order {
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        /// Upper bound of the random loss probability; half of rho_max at n = 4.
        #[arg(long, default_value_t = 0.18)]
        loss_cap: f64,
    },
    /// Anchor commit probability under adversarial edge removal.
    AnchorMc {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        nodes: usize,
    },
    /// Prints the effective configuration as TOML.
    ShowConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Fig2,
    Fig3,
    Contrast,
}

fn effective_config(c: &Common) -> Result<ExperimentConfig> {
    let mut ec = ExperimentConfig::default();
    macro_rules! set {
        ($field:ident, $v:expr) => {
            if let Some(v) = $v.clone() {
                ec.$field = v;
            }
        };
    }
    set!(n_values, c.n);
    set!(seeds, c.seeds);
    set!(base_seed, c.base_seed);
    set!(rho_lo, c.rho_lo);
    set!(rho_hi, c.rho_hi);
    set!(resolution, c.resolution);
    set!(rho_values, c.rho);
    set!(t_slot_ms, c.t_slot);
    set!(r_max, c.r_max);
    set!(success_threshold, c.threshold);
    if c.f.is_some() {
        ec.f = c.f;
    }
    if let Some(m) = c.loss_mode {
        ec.loss_mode = match m {
            Mode::Budget => LossMode::Budget,
            Mode::BudgetGreedy => LossMode::BudgetGreedy,
            Mode::Bernoulli => LossMode::Bernoulli,
        };
    }
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        ec = ExperimentConfig::from_toml(&text)?;
    }
    ec.validate().map_err(anyhow::Error::msg)?;
    Ok(ec)
}

fn write_json(dir: &Path, name: &str, v: &impl Serialize) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(name))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.1}"))
}

#[derive(Serialize)]
struct TableRow {
    n: usize,
    f: usize,
    rho_max: f64,
    success_rate: f64,
    latency_last_ms: Option<f64>,
    latency_mean_ms: Option<f64>,
    t_slot_ms: f64,
    seeds: usize,
}

fn max_loss(ec: &ExperimentConfig, out: &Path) -> Result<bool> {
    let rows: Vec<MaxLossRow> = harness::loss_table(ec)?;
    let flat: Vec<TableRow> = rows
        .iter()
        .map(|r| TableRow {
            n: r.n,
            f: r.f,
            rho_max: r.rho_max,
            success_rate: r.success_rate,
            latency_last_ms: r.latency_last_ms,
            latency_mean_ms: r.latency_mean_ms,
            t_slot_ms: r.t_slot_ms,
            seeds: r.seeds,
        })
        .collect();
    write_csv(out, "max_loss.csv", &flat)?;
    write_json(out, "max_loss.json", &serde_json::json!({ "config": ec, "rows": rows }))?;
    let mut head = format!("{:<28}", "participants");
    let mut loss = format!("{:<28}", "tolerable loss proportion");
    let mut lat = format!("{:<28}", "average latency (ms)");
    for r in &rows {
        head.push_str(&format!("{:>9}", r.n));
        loss.push_str(&format!("{:>9.3}", r.rho_max));
        lat.push_str(&format!("{:>9}", fmt_opt(r.latency_last_ms)));
    }
    let table = format!("{head}\n{loss}\n{lat}\n(t_slot = {} ms, {} seeds, threshold {})\n", ec.t_slot_ms, ec.seeds, ec.success_threshold);
    fs::write(out.join("max_loss.txt"), &table)?;
    print!("{table}");
    Ok(true)
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    f: usize,
    rho: f64,
    seeds: usize,
    success_rate: f64,
    latency_last_ms: Option<f64>,
    latency_mean_ms: Option<f64>,
}

fn sweep(ec: &ExperimentConfig, out: &Path) -> Result<bool> {
    let pts: Vec<PointResult> = harness::sweep(ec);
    let rows: Vec<SweepRow> = pts
        .iter()
        .map(|p| SweepRow {
            n: p.n,
            f: p.f,
            rho: p.rho,
            seeds: p.seeds,
            success_rate: p.success_rate,
            latency_last_ms: p.latency_last_ms,
            latency_mean_ms: p.latency_mean_ms,
        })
        .collect();
    write_csv(out, "sweep.csv", &rows)?;
    let runs: Vec<_> = pts.iter().flat_map(|p| p.runs.iter()).collect();
    write_csv(out, "sweep_runs.csv", &runs.iter().map(|r| RunRow::from(*r)).collect::<Vec<_>>())?;
    write_json(out, "sweep.json", &serde_json::json!({ "config": ec, "points": pts }))?;
    println!("{:>4} {:>6} {:>9} {:>12} {:>12}", "n", "rho", "success", "last (ms)", "mean (ms)");
    for r in &rows {
        println!(
            "{:>4} {:>6.2} {:>9.2} {:>12} {:>12}",
            r.n,
            r.rho,
            r.success_rate,
            fmt_opt(r.latency_last_ms),
            fmt_opt(r.latency_mean_ms)
        );
    }
    Ok(true)
}

#[derive(Serialize)]
struct RunRow {
    seed: u64,
    n: usize,
    f: usize,
    rho: f64,
    success: bool,
    latency_last_ms: Option<f64>,
    latency_mean_ms: Option<f64>,
    transmissions: u64,
    drops: u64,
    statuses: String,
}

impl From<&harness::RunSummary> for RunRow {
    fn from(r: &harness::RunSummary) -> Self {
        RunRow {
            seed: r.seed,
            n: r.n,
            f: r.f,
            rho: r.rho,
            success: r.success,
            latency_last_ms: r.latency_last_ms,
            latency_mean_ms: r.latency_mean_ms,
            transmissions: r.transmissions,
            drops: r.drops,
            statuses: r.statuses.join(" "),
        }
    }
}

fn print_report(r: &ReplayReport) {
    println!("{} (seed {})", r.scenario, r.seed);
    for c in &r.checks {
        println!("  [{}] {} {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail);
    }
}

fn replay(ec: &ExperimentConfig, out: &Path, scenario: Scenario, seed: u64) -> Result<bool> {
    let report = match scenario {
        Scenario::Fig2 => harness::fig2_replay(seed),
        Scenario::Fig3 => harness::fig3_replay(seed),
        Scenario::Contrast => {
            let mut ok = false;
            let mut rows = Vec::new();
            for &n in &ec.n_values {
                let c = harness::per_receiver_contrast(ec, n);
                println!(
                    "n={:<3} f={:<2} lost per receiver per round={:<3} heard={} < quorum {}  success {:.2}",
                    c.n, c.f, c.k, c.direct_per_round, c.direct_quorum, c.success_rate
                );
                ok |= c.n >= 12 && c.success_rate >= ec.success_threshold;
                rows.push(c);
            }
            write_csv(out, "contrast.csv", &rows)?;
            return Ok(ok);
        }
    };
    print_report(&report);
    fs::create_dir_all(out)?;
    let f = fs::File::create(out.join(format!("{}_trace.csv", report.scenario)))?;
    formats::write_trace(std::io::BufWriter::new(f), &report.trace)?;
    write_json(out, &format!("{}.json", report.scenario), &report)?;
    Ok(report.passed())
}

fn order(out: &Path, runs: usize, loss_cap: f64, base_seed: u64) -> Result<bool> {
    let r = harness::ordering_agreement(runs, base_seed, loss_cap);
    write_json(out, "ordering.json", &r)?;
    println!(
        "{} runs: {} identical, {} prefix-consistent, {} with commits at every honest node, mean {:.2} blocks",
        r.runs, r.identical, r.prefix_consistent, r.nonempty, r.mean_commits
    );
    if !r.divergent_seeds.is_empty() {
        println!("divergent seeds: {:?}", r.divergent_seeds);
        let sc = harness::OrderingScenario::random(r.divergent_seeds[0], loss_cap);
        let o = harness::ordering_run(&sc);
        for (id, log) in &o.logs {
            fs::write(out.join(format!("commits_seed{}_p{id}.jsonl", sc.seed)), log)?;
        }
    } else if runs > 0 {
        let o = harness::ordering_run(&harness::OrderingScenario::random(base_seed, loss_cap));
        if let Some((id, log)) = o.logs.iter().next() {
            fs::write(out.join(format!("commits_seed{base_seed}_p{id}.jsonl")), log)?;
        }
    }
    Ok(r.identical == r.runs)
}

fn anchor_mc(out: &Path, trials: usize, n: usize, seed: u64) -> Result<bool> {
    if n < 4 || n > 7 {
        bail!("exhaustive enumeration supports 4 <= n <= 7");
    }
    let r = harness::anchor_monte_carlo(n, trials, seed);
    write_json(out, "anchor_mc.json", &r)?;
    println!(
        "n={} f={}: worst case over {} patterns {:.4}; Monte Carlo {}/{} = {:.4}",
        r.n, r.f, r.patterns, r.worst_case, r.commits, r.trials, r.frequency
    );
    Ok(r.worst_case >= 1.0 / 3.0 && r.frequency >= 1.0 / 3.0 - 0.02)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<bool> {
        let ec = effective_config(&cli.common)?;
        let out = &cli.common.out;
        match &cli.cmd {
            Cmd::Sweep => sweep(&ec, out),
            Cmd::MaxLoss => max_loss(&ec, out),
            Cmd::Replay { scenario, seed } => replay(&ec, out, *scenario, *seed),
            Cmd::Order { runs, loss_cap } => order(out, *runs, *loss_cap, ec.base_seed),
            Cmd::AnchorMc { trials, nodes } => anchor_mc(out, *trials, *nodes, ec.base_seed),
            Cmd::ShowConfig => {
                print!("{}", ec.to_toml());
                Ok(true)
            }
        }
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("assertion failure");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
