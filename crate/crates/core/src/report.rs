//! Machine-readable reports combining the analytical pipeline, simulation
//! statistics and the verdicts comparing them.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    delay_mean_bound, delay_tail_bound, expected_backlog_bound, fit_impairment,
    optimize_backlog_tail, BoundReport, ConstraintFit, ExpectedBacklog,
};
use crate::config::ScenarioFile;
use crate::dcf::{slot_length, solve_fixed_point, stability_threshold, DcfSolution, SlotTiming};
use crate::error::{Error, Result};
use crate::sim::{run_experiment, SimResult};

/// Relative tolerance for calling the Little's-law estimate close to the
/// measured mean delay.
pub const LITTLE_CLOSENESS: f64 = 0.15;

/// One row of a paired table. `x` is packets for backlog tables and
/// slots for delay tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub x: f64,
    pub analytical_bound: f64,
    pub empirical_tail: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Analytical results for one scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub solution: DcfSolution,
    pub timing: SlotTiming,
    pub stability_threshold: f64,
    pub stable: bool,
    /// Impairment fit at the exponent chosen for the largest backlog.
    pub impairment_fit: Option<ConstraintFit>,
    pub bound: Option<BoundReport>,
    pub expected_backlog: Option<ExpectedBacklog>,
    /// `E B / λ` from the analytical expected backlog, seconds.
    pub mean_delay_bound: Option<f64>,
}

/// Mean-delay comparison between `E B / λ` and the measured mean delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LittleComparison {
    /// Time-averaged simulated backlog over λ, seconds.
    pub little_estimate: f64,
    /// Mean per-packet delay, seconds.
    pub measured: f64,
    pub relative_gap: f64,
    pub dominates: bool,
    pub close: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub name: Option<String>,
    pub scenario: ScenarioFile,
    /// The same scenario in its file syntax.
    pub scenario_toml: String,
    pub analysis: Analysis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimResult>,
    pub backlog_table: Vec<TableRow>,
    pub delay_table: Vec<TableRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub little: Option<LittleComparison>,
    pub verdicts: Vec<Verdict>,
    /// Wall-clock seconds per stage.
    pub runtimes: Vec<(String, f64)>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let report: Report = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        report.scenario.validate()?;
        Ok(report)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Runs the analytical pipeline: fixed point, stability, optimized backlog
/// tail, expected backlog and the Little delay bound.
pub fn analyze(file: &ScenarioFile) -> Result<Analysis> {
    file.validate()?;
    let network = file.network();
    let solution = solve_fixed_point(&network)?;
    let timing = slot_length(&network);
    let threshold = stability_threshold(&solution);
    let mut analysis = Analysis {
        stable: true,
        solution,
        timing,
        stability_threshold: threshold,
        impairment_fit: None,
        bound: None,
        expected_backlog: None,
        mean_delay_bound: None,
    };
    let Some(traffic) = file.traffic else {
        return Ok(analysis);
    };
    let search = &file.bounds.search;
    let report = optimize_backlog_tail(&traffic, &analysis.solution, &file.bounds.x_grid(), search)?;
    analysis.stable = report.stable;
    if let Some(theta2) = report.theta2 {
        analysis.impairment_fit = Some(fit_impairment(
            &analysis.solution,
            theta2,
            search.fit_epsilon,
            search.fit_t_max,
        )?);
    }
    if report.feasible {
        let eb = expected_backlog_bound(&report, file.bounds.i_max)?;
        if traffic.lambda() > 0.0 {
            analysis.mean_delay_bound =
                Some(delay_mean_bound(eb.value, traffic.lambda())? * timing.slot_seconds());
        }
        analysis.expected_backlog = Some(eb);
    }
    analysis.bound = Some(report);
    Ok(analysis)
}

fn backlog_rows(file: &ScenarioFile, analysis: &Analysis, sim: Option<&SimResult>) -> Vec<TableRow> {
    let Some(bound) = &analysis.bound else {
        return Vec::new();
    };
    if bound.points.is_empty() {
        if !bound.feasible {
            return Vec::new();
        }
        // Silent source: nothing is ever backlogged.
        return file
            .bounds
            .x_grid()
            .into_iter()
            .map(|x| TableRow {
                x,
                analytical_bound: 0.0,
                empirical_tail: sim.map(|s| s.backlog_tail_at(x.floor() as usize)),
            })
            .collect();
    }
    bound
        .points
        .iter()
        .map(|p| TableRow {
            x: p.x,
            analytical_bound: p.bound,
            empirical_tail: sim.map(|s| s.backlog_tail_at(p.x.floor() as usize)),
        })
        .collect()
}

/// Markov delay tail at `x = step, 2·step, ..., len·step` slots, fed `eb`
/// packets.
fn delay_rows(
    eb: f64,
    lambda: f64,
    len: usize,
    step: usize,
    sim: Option<&SimResult>,
) -> Result<Vec<TableRow>> {
    (1..=len)
        .map(|k| k * step)
        .map(|x| {
            Ok(TableRow {
                x: x as f64,
                analytical_bound: delay_tail_bound(eb, lambda, x as f64)?,
                empirical_tail: sim.map(|s| s.delay_tail_at(x)),
            })
        })
        .collect()
}

fn base_report(file: &ScenarioFile, analysis: Analysis) -> Report {
    Report {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        name: file.name.clone(),
        scenario: file.clone(),
        scenario_toml: file.to_toml(),
        analysis,
        simulation: None,
        backlog_table: Vec::new(),
        delay_table: Vec::new(),
        little: None,
        verdicts: Vec::new(),
        runtimes: Vec::new(),
    }
}

/// Analytical-only report.
pub fn bound_report(file: &ScenarioFile) -> Result<Report> {
    let start = Instant::now();
    let analysis = analyze(file)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = base_report(file, analysis);
    report.runtimes.push(("analysis".into(), elapsed));
    report.backlog_table = backlog_rows(file, &report.analysis, None);
    let lambda = file.traffic.map_or(0.0, |t| t.lambda());
    if let (Some(eb), true) = (report.analysis.expected_backlog, lambda > 0.0) {
        // 200 rows reaching four times the mean-delay bound.
        let reach = (4.0 * eb.value / lambda).ceil().max(1.0) as usize;
        report.delay_table = delay_rows(eb.value, lambda, 200, reach.div_ceil(200), None)?;
    }
    report.verdicts.push(stability_verdict(&report.analysis));
    Ok(report)
}

fn stability_verdict(a: &Analysis) -> Verdict {
    Verdict {
        name: "stable".into(),
        passed: a.stable,
        detail: format!("threshold {:.6} packets/slot", a.stability_threshold),
    }
}

/// Simulation, analysis and the verdicts comparing them.
pub fn experiment_report(file: &ScenarioFile) -> Result<Report> {
    let start = Instant::now();
    let analysis = analyze(file)?;
    let t_analysis = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let sim = run_experiment(&file.sim_config())?;
    let t_sim = start.elapsed().as_secs_f64();

    let mut report = base_report(file, analysis);
    report.runtimes.push(("analysis".into(), t_analysis));
    report.runtimes.push(("simulation".into(), t_sim));
    report.verdicts.push(stability_verdict(&report.analysis));
    report.backlog_table = backlog_rows(file, &report.analysis, Some(&sim));

    let lambda = file.traffic.map_or(0.0, |t| t.lambda());
    if lambda > 0.0 {
        report.delay_table = delay_rows(sim.mean_backlog, lambda, sim.delay_tail.len(), 1, Some(&sim))?;
        let little_estimate = sim.time_avg_backlog / lambda * sim.slot_seconds;
        let measured = sim.mean_packet_delay;
        let relative_gap = if measured > 0.0 {
            (little_estimate - measured).abs() / measured
        } else {
            0.0
        };
        report.little = Some(LittleComparison {
            little_estimate,
            measured,
            relative_gap,
            dominates: little_estimate >= measured,
            close: relative_gap < LITTLE_CLOSENESS,
        });
    }

    if report.analysis.bound.as_ref().is_some_and(|b| b.feasible) {
        let worst = report
            .backlog_table
            .iter()
            .filter_map(|r| r.empirical_tail.map(|e| (r.x, r.analytical_bound - e)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        report.verdicts.push(Verdict {
            name: "backlog_dominance".into(),
            passed: worst.is_none_or(|w| w.1 >= 0.0),
            detail: worst.map_or_else(
                || "no grid points".into(),
                |(x, m)| format!("smallest margin {m:.3e} at x = {x}"),
            ),
        });
    }
    if lambda > 0.0 {
        let worst = report
            .delay_table
            .iter()
            .filter_map(|r| r.empirical_tail.map(|e| (r.x, r.analytical_bound - e)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        report.verdicts.push(Verdict {
            name: "markov_delay_dominance".into(),
            passed: worst.is_none_or(|w| w.1 >= 0.0),
            detail: worst.map_or_else(
                || "no delay samples".into(),
                |(x, m)| format!("smallest margin {m:.3e} at x = {x} slots"),
            ),
        });
    }
    report.verdicts.push(Verdict {
        name: "censoring".into(),
        passed: !sim.flagged,
        detail: format!("censored fraction {:.4}", sim.censored_fraction),
    });
    report.simulation = Some(sim);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub stable: bool,
    pub mean_backlog: f64,
    pub time_avg_backlog: f64,
    /// Seconds.
    pub mean_packet_delay: f64,
    pub per_node_throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario: ScenarioFile,
    pub stability_threshold: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Ratio of the mean backlog at the largest rate to that at the
    /// smallest.
    pub fn knee_ratio(&self) -> f64 {
        let first = self.points.first().map_or(0.0, |p| p.mean_backlog);
        let last = self.points.last().map_or(0.0, |p| p.mean_backlog);
        last / first
    }
}

/// Simulates every rate of the file's `[sweep]` section.
pub fn sweep_report(file: &ScenarioFile) -> Result<SweepReport> {
    file.validate()?;
    let Some(sweep) = &file.sweep else {
        return Err(Error::Config {
            field: "sweep".into(),
            reason: "the file has no [sweep] section".into(),
        });
    };
    let sol = solve_fixed_point(&file.network())?;
    let threshold = stability_threshold(&sol);
    let mut lambdas = sweep.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let points = lambdas
        .iter()
        .map(|&lambda| {
            let f = file.with_lambda(lambda)?;
            let sim = run_experiment(&f.sim_config())?;
            Ok(SweepPoint {
                lambda,
                stable: lambda < threshold,
                mean_backlog: sim.mean_backlog,
                time_avg_backlog: sim.time_avg_backlog,
                mean_packet_delay: sim.mean_packet_delay,
                per_node_throughput: sim.per_node_throughput,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        scenario: file.clone(),
        stability_threshold: threshold,
        points,
    })
}
