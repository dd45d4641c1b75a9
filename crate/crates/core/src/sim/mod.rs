//! Slotted DCF simulator used to validate the analytical bounds.
//!
//! Each replication runs the MAC in [`mac`], then converts the per-node
//! packet logs into cumulative arrival/departure traces on the calculus
//! slot grid. Backlog and virtual delay are read off those traces at the
//! snapshot slot and pooled across nodes and replications.

pub mod mac;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcf::{slot_length, solve_fixed_point, stability_threshold, Scenario};
use crate::error::{Error, Result};
use crate::minplus::{Delay, Trace, TracePair};

pub use mac::{CbrPhase, Departure, MacRun, NodeLog, TickTiming, Transmission};

/// Censoring above this fraction flags a run.
pub const CENSORING_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    /// Simulated time per replication, seconds.
    pub duration: f64,
    pub replications: u32,
    /// Time at which backlog and delay are sampled, seconds.
    pub snapshot: f64,
    pub seed: u64,
    #[serde(default)]
    pub cbr_phase: CbrPhase,
    /// Test hook: every backoff draw returns this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_backoff: Option<u32>,
}

impl SimConfig {
    /// Desk-scale defaults: 20 s runs, 50 replications, snapshot at 10 s.
    pub fn new(scenario: Scenario) -> Self {
        SimConfig {
            scenario,
            duration: 20.0,
            replications: 50,
            snapshot: 10.0,
            seed: 1,
            cbr_phase: CbrPhase::default(),
            forced_backoff: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::param("duration", "must be finite and > 0"));
        }
        if !(self.snapshot.is_finite() && self.snapshot >= 0.0 && self.snapshot <= self.duration) {
            return Err(Error::param("snapshot", "must lie in [0, duration]"));
        }
        if self.replications == 0 {
            return Err(Error::param("replications", "at least one is required"));
        }
        Ok(())
    }

    fn end_tick(&self) -> u64 {
        (self.duration * 1e6 * mac::TICKS_PER_US).round() as u64
    }

    fn l_ticks(&self) -> u64 {
        TickTiming::of(&self.scenario).calculus_slot()
    }

    /// Number of calculus slots covered by a replication.
    pub fn horizon_slots(&self) -> usize {
        (self.end_tick() / self.l_ticks()) as usize
    }

    pub fn snapshot_slot(&self) -> usize {
        let tick = (self.snapshot * 1e6 * mac::TICKS_PER_US).round() as u64;
        ((tick / self.l_ticks()) as usize).min(self.horizon_slots())
    }
}

/// Output of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: u32,
    pub traces: Vec<TracePair>,
    pub mac: MacRun,
    /// Per-node backlog at the snapshot slot, read from the traces.
    pub backlog: Vec<u64>,
    /// Per-node queue length at the snapshot instant, counted directly.
    pub queue_at_snapshot: Vec<u64>,
    pub delay: Vec<Delay>,
}

/// Cumulative count of `times` strictly before each slot boundary.
fn cumulative(times: &[u64], l_ticks: u64, horizon: usize) -> Trace {
    let mut values = Vec::with_capacity(horizon + 1);
    let mut k = 0usize;
    for t in 0..=horizon {
        let boundary = t as u64 * l_ticks;
        while k < times.len() && times[k] < boundary {
            k += 1;
        }
        values.push(k as f64);
    }
    Trace::new(values).expect("counts are increasing")
}

/// Runs replication `index`, seeded by `seed + index`.
pub fn run_replication(config: &SimConfig, index: u32) -> Result<Replication> {
    config.validate()?;
    let params = mac::MacParams {
        scenario: config.scenario,
        end_tick: config.end_tick(),
        cbr_phase: config.cbr_phase,
        forced_backoff: config.forced_backoff,
        seed: config.seed.wrapping_add(u64::from(index)),
    };
    let run = mac::simulate(&params);
    let l_ticks = config.l_ticks();
    let horizon = config.horizon_slots();
    let snap = config.snapshot_slot();
    let snap_tick = snap as u64 * l_ticks;

    let mut traces = Vec::with_capacity(run.nodes.len());
    let mut backlog = Vec::new();
    let mut queue_at_snapshot = Vec::new();
    let mut delay = Vec::new();
    for node in &run.nodes {
        let mut leaving: Vec<u64> = node.departures.iter().map(|d| d.at).collect();
        leaving.sort_unstable();
        let pair = TracePair::new(
            cumulative(&node.arrivals, l_ticks, horizon),
            cumulative(&leaving, l_ticks, horizon),
        )?;
        backlog.push(pair.backlog(snap)? as u64);
        delay.push(pair.delay(snap)?);
        let arrived = node.arrivals.partition_point(|t| *t < snap_tick);
        let left = leaving.partition_point(|t| *t < snap_tick);
        queue_at_snapshot.push((arrived - left) as u64);
        traces.push(pair);
    }
    Ok(Replication {
        index,
        traces,
        mac: run,
        backlog,
        queue_at_snapshot,
        delay,
    })
}

/// Replication-aggregated statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub slot_seconds: f64,
    pub horizon_slots: usize,
    pub snapshot_slot: usize,
    /// Number of pooled (node, replication) samples.
    pub samples: usize,
    /// `P{B > x}` at the snapshot for `x = 0, 1, ...`, ending at 0.
    pub backlog_tail: Vec<f64>,
    pub mean_backlog: f64,
    /// Backlog averaged over every slot of the second half of each run.
    pub time_avg_backlog: f64,
    /// `P{D >= x}` over uncensored virtual delays, `x` in slots, ending at 0.
    pub delay_tail: Vec<f64>,
    pub mean_delay_slots: f64,
    /// Mean virtual delay at the snapshot, seconds.
    pub mean_delay: f64,
    /// Mean arrival-to-delivery time of delivered packets, seconds.
    pub mean_packet_delay: f64,
    pub censored_fraction: f64,
    /// Censoring above [`CENSORING_LIMIT`].
    pub flagged: bool,
    /// Delivered packets per calculus slot, averaged over nodes.
    pub per_node_throughput: f64,
    /// Offered packets per calculus slot, averaged over nodes.
    pub per_node_offered: f64,
    pub drops: u64,
    pub arrivals: u64,
    pub delivered: u64,
}

impl SimResult {
    /// `P{B > x}`, zero beyond the table.
    pub fn backlog_tail_at(&self, x: usize) -> f64 {
        self.backlog_tail.get(x).copied().unwrap_or(0.0)
    }

    /// `P{D >= x}`, zero beyond the table.
    pub fn delay_tail_at(&self, x: usize) -> f64 {
        self.delay_tail.get(x).copied().unwrap_or(0.0)
    }
}

/// `P{X > x}` for `x = 0..=max`, from integer samples.
fn exceedance(samples: &[u64]) -> Vec<f64> {
    let max = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 2];
    for &s in samples {
        counts[s as usize] += 1;
    }
    let n = samples.len().max(1) as f64;
    let mut above = samples.len() as u64;
    (0..=max)
        .map(|x| {
            above -= counts[x];
            above as f64 / n
        })
        .collect()
}

fn mean(samples: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = samples.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Aggregates already-computed replications, in the order given.
pub fn aggregate(config: &SimConfig, reps: &[Replication]) -> SimResult {
    let timing = slot_length(&config.scenario);
    let slot_seconds = timing.slot_seconds();
    let horizon = config.horizon_slots();
    let secs_per_tick = 1e-6 / mac::TICKS_PER_US;

    let backlog: Vec<u64> = reps.iter().flat_map(|r| r.backlog.iter().copied()).collect();
    let delays: Vec<Delay> = reps.iter().flat_map(|r| r.delay.iter().copied()).collect();
    let uncensored: Vec<u64> = delays.iter().filter_map(|d| d.slots()).map(|d| d as u64).collect();
    let censored = delays.len() - uncensored.len();
    let censored_fraction = if delays.is_empty() {
        0.0
    } else {
        censored as f64 / delays.len() as f64
    };

    // P{D >= x} = P{D > x - 1}.
    let mut delay_tail = vec![if uncensored.is_empty() { 0.0 } else { 1.0 }];
    if !uncensored.is_empty() {
        delay_tail.extend(exceedance(&uncensored));
    }

    let half = horizon / 2;
    let time_avg_backlog = mean(reps.iter().flat_map(|r| {
        r.traces.iter().map(move |p| {
            mean((half..=horizon).map(|t| p.backlog(t).expect("within horizon")))
        })
    }));

    let packet_delays = reps.iter().flat_map(|r| {
        r.mac.nodes.iter().flat_map(|n| {
            n.departures
                .iter()
                .filter(|d| d.delivered)
                .map(|d| (d.at - d.arrived) as f64 * secs_per_tick)
        })
    });
    let mean_packet_delay = mean(packet_delays);

    let node_logs = reps.iter().flat_map(|r| r.mac.nodes.iter());
    let (mut arrivals, mut delivered, mut drops) = (0u64, 0u64, 0u64);
    for n in node_logs {
        arrivals += n.arrivals.len() as u64;
        delivered += n.delivered;
        drops += n.dropped;
    }
    let node_slots = (backlog.len().max(1) * horizon.max(1)) as f64;
    let mean_delay_slots = mean(uncensored.iter().map(|d| *d as f64));

    SimResult {
        config: *config,
        slot_seconds,
        horizon_slots: horizon,
        snapshot_slot: config.snapshot_slot(),
        samples: backlog.len(),
        backlog_tail: exceedance(&backlog),
        mean_backlog: mean(backlog.iter().map(|b| *b as f64)),
        time_avg_backlog,
        delay_tail,
        mean_delay_slots,
        mean_delay: mean_delay_slots * slot_seconds,
        mean_packet_delay,
        censored_fraction,
        flagged: censored_fraction > CENSORING_LIMIT,
        per_node_throughput: delivered as f64 / node_slots,
        per_node_offered: arrivals as f64 / node_slots,
        drops,
        arrivals,
        delivered,
    }
}

/// Runs every replication (in parallel) and aggregates them.
pub fn run_experiment(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let reps = (0..config.replications)
        .into_par_iter()
        .map(|i| run_replication(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, &reps))
}

/// Simulated versus analytical saturation quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub n: u32,
    /// Attempts per backoff counter step.
    pub tau_sim: f64,
    pub tau_model: f64,
    /// Fraction of attempts that collided.
    pub gamma_sim: f64,
    pub gamma_model: f64,
    /// Successful packets per calculus slot, per node.
    pub throughput_sim: f64,
    pub throughput_model: f64,
}

impl SaturationReport {
    pub fn tau_rel_error(&self) -> f64 {
        (self.tau_sim - self.tau_model).abs() / self.tau_model
    }

    pub fn gamma_abs_error(&self) -> f64 {
        (self.gamma_sim - self.gamma_model).abs()
    }

    pub fn throughput_rel_error(&self) -> f64 {
        (self.throughput_sim - self.throughput_model).abs() / self.throughput_model
    }
}

/// Runs the configured scenario with every node saturated and compares the
/// attempt rate, collision probability and throughput with the model.
pub fn saturation_validate(config: &SimConfig) -> Result<SaturationReport> {
    let mut config = *config;
    config.scenario.traffic = None;
    config.validate()?;
    let sol = solve_fixed_point(&config.scenario)?;
    let runs = (0..config.replications)
        .into_par_iter()
        .map(|i| {
            mac::simulate(&mac::MacParams {
                scenario: config.scenario,
                end_tick: config.end_tick(),
                cbr_phase: config.cbr_phase,
                forced_backoff: config.forced_backoff,
                seed: config.seed.wrapping_add(u64::from(i)),
            })
        })
        .collect::<Vec<_>>();
    let (mut attempts, mut collisions, mut steps, mut delivered) = (0u64, 0u64, 0u64, 0u64);
    for node in runs.iter().flat_map(|r| r.nodes.iter()) {
        attempts += node.attempts;
        collisions += node.collisions;
        steps += node.backoff_steps;
        delivered += node.delivered;
    }
    let node_slots = f64::from(config.scenario.n)
        * f64::from(config.replications)
        * (config.end_tick() as f64 / config.l_ticks() as f64);
    Ok(SaturationReport {
        n: config.scenario.n,
        tau_sim: attempts as f64 / steps.max(1) as f64,
        tau_model: sol.tau,
        gamma_sim: collisions as f64 / attempts.max(1) as f64,
        gamma_model: sol.gamma,
        throughput_sim: delivered as f64 / node_slots,
        throughput_model: stability_threshold(&sol),
    })
}
