//! File formats: trace CSV, DAG JSON and the commit log.

use std::io::Write;

use dagcast_core::ordering::CommitRecord;
use dagcast_core::LocalDag;
use serde::Serialize;

use crate::netsim::TraceRecord;

pub const TRACE_HEADER: &str = "time_ms,participant,event,origin,round,digest,detail";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row. The detail column is quoted when it needs to be.
pub fn trace_line(r: &TraceRecord) -> String {
    let detail = if r.detail.contains([',', '"']) {
        format!("\"{}\"", r.detail.replace('"', "\"\""))
    } else {
        r.detail.clone()
    };
    format!(
        "{}.{:03},p{},{},{},{},{},{}",
        r.time_us / 1000,
        r.time_us % 1000,
        r.participant,
        r.event,
        r.origin.map(|o| format!("p{o}")).unwrap_or_default(),
        opt(r.round),
        r.digest.as_deref().unwrap_or(""),
        detail
    )
}

pub fn write_trace(mut w: impl Write, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(w, "{}", trace_line(r))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonVertex {
    origin: u16,
    round: u32,
    digest: String,
    full: bool,
    invalidated: bool,
    payload_hex: Option<String>,
    parents: Vec<String>,
}

#[derive(Serialize)]
struct JsonDag {
    byzantine: Vec<u16>,
    vertices: Vec<JsonVertex>,
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

pub fn dag_json(dag: &LocalDag) -> serde_json::Value {
    let d = JsonDag {
        byzantine: dag.byzantine().iter().map(|p| p.0).collect(),
        vertices: dag
            .vertices()
            .map(|v| JsonVertex {
                origin: v.vref.origin.0,
                round: v.vref.round,
                digest: v.vref.digest.to_hex(),
                full: v.is_full(),
                invalidated: dag.is_invalidated(&v.vref),
                payload_hex: v.payload().map(hex),
                parents: v
                    .parents()
                    .map(|p| format!("p{}[{}]:{}", p.vref.origin.0, p.vref.round, p.vref.digest.to_hex()))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_value(d).expect("plain data")
}

#[derive(Serialize)]
struct CommitLine {
    index: usize,
    step: u32,
    anchor_owner: u16,
    anchor_digest: String,
    block_digest: String,
    bundle: Vec<String>,
    order: Vec<String>,
    excluded: Vec<u16>,
}

fn href_str(r: &dagcast_core::ordering::HRef) -> String {
    format!("p{}@{}:{}", r.owner.0, r.step, r.digest.to_hex())
}

/// Commit log as JSON lines. `order` is the flattened block, `bundle` the
/// same refs sorted.
pub fn commit_log_jsonl(records: &[CommitRecord]) -> String {
    let mut out = String::new();
    for (index, r) in records.iter().enumerate() {
        let mut bundle = r.bundle.clone();
        bundle.sort();
        let line = CommitLine {
            index,
            step: r.anchor.step,
            anchor_owner: r.anchor.owner.0,
            anchor_digest: r.anchor.digest.to_hex(),
            block_digest: r.block_digest().to_hex(),
            bundle: bundle.iter().map(href_str).collect(),
            order: r.bundle.iter().map(href_str).collect(),
            excluded: r.excluded.iter().map(|p| p.0).collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("plain data"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detail_with_comma_is_quoted() {
        let r = TraceRecord {
            time_us: 25_004,
            participant: 3,
            event: "x".into(),
            origin: Some(1),
            round: Some(2),
            digest: None,
            detail: "a,b".into(),
        };
        assert_eq!(trace_line(&r), "25.004,p3,x,p1,2,,\"a,b\"");
    }
}
