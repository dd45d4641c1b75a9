//! CSV and JSON rendering. Column orders are fixed:
//!
//! - backlog/delay tables: `x,analytical_bound,empirical_tail`
//! - sweeps: `lambda,stable,mean_backlog,time_avg_backlog,mean_packet_delay_s,per_node_throughput`
//! - saturation: `n,tau_sim,tau_model,gamma_sim,gamma_model,throughput_sim,throughput_model`
//! - traces: `slot,node,arrivals,departures`

use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;

use dcf_snc::report::{SweepReport, TableRow};
use dcf_snc::sim::{Replication, SaturationReport};

/// Writes to `dir/name` when an output directory is set, else to stdout.
pub fn emit(dir: &Option<PathBuf>, name: &str, contents: &str) -> Result<()> {
    match dir {
        Some(dir) => crate::write_file(dir, name, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn table_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "analytical_bound", "empirical_tail"])?;
    for r in rows {
        w.write_record([num(r.x), num(r.analytical_bound), r.empirical_tail.map_or_else(String::new, num)])?;
    }
    finish(w)
}

pub fn sweep_csv(r: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "lambda",
        "stable",
        "mean_backlog",
        "time_avg_backlog",
        "mean_packet_delay_s",
        "per_node_throughput",
    ])?;
    for p in &r.points {
        w.write_record([
            num(p.lambda),
            p.stable.to_string(),
            num(p.mean_backlog),
            num(p.time_avg_backlog),
            num(p.mean_packet_delay),
            num(p.per_node_throughput),
        ])?;
    }
    finish(w)
}

pub fn saturation_csv(r: &SaturationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "tau_sim", "tau_model", "gamma_sim", "gamma_model", "throughput_sim", "throughput_model"])?;
    w.write_record([
        r.n.to_string(),
        num(r.tau_sim),
        num(r.tau_model),
        num(r.gamma_sim),
        num(r.gamma_model),
        num(r.throughput_sim),
        num(r.throughput_model),
    ])?;
    finish(w)
}

pub fn traces_csv(rep: &Replication) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["slot", "node", "arrivals", "departures"])?;
    for (node, pair) in rep.traces.iter().enumerate() {
        for t in 0..=pair.horizon() {
            w.write_record([
                t.to_string(),
                node.to_string(),
                num(pair.arrival().at(t)),
                num(pair.departure().at(t)),
            ])?;
        }
    }
    finish(w)
}
