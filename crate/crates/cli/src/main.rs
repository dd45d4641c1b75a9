use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dcf_snc::config::ScenarioFile;
use dcf_snc::dcf::{slot_length, solve_fixed_point, stability_threshold};
use dcf_snc::report::{bound_report, experiment_report, sweep_report, Report, TableRow};
use dcf_snc::sim::{run_experiment, run_replication, saturation_validate};
use dcf_snc::Error;

mod output;

/// Network calculus bounds and simulation for 802.11 DCF nodes.
#[derive(Debug, Parser)]
#[command(name = "dcf-snc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the MAC fixed point and print the per-slot probabilities.
    Solve(Common),
    /// Compute analytical backlog and delay bounds.
    Bound(Common),
    /// Run the simulator only.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the traces of replication 0 as CSV.
        #[arg(long)]
        traces: bool,
    },
    /// Simulate every node saturated and compare with the model.
    Saturation(Common),
    /// Run simulation and analysis and compare them.
    Experiment(Common),
    /// Simulate each rate of the file's [sweep] section.
    Sweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    /// Simulated seconds per replication.
    #[arg(long)]
    duration: Option<f64>,
    /// Output directory; files are named after the scenario.
    #[arg(long, env = "DCF_SNC_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failures split by exit code.
enum Failure {
    /// Bad arguments or input files.
    Usage(anyhow::Error),
    /// An internal invariant did not hold.
    Internal(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let input = e.chain().any(|c| {
            c.downcast_ref::<std::io::Error>().is_some()
                || matches!(
                    c.downcast_ref::<Error>(),
                    Some(Error::Parse(_) | Error::Config { .. } | Error::InvalidParameter { .. })
                )
        });
        if input {
            Failure::Usage(e)
        } else {
            Failure::Internal(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common) -> Result<ScenarioFile> {
    let text = fs::read_to_string(&common.scenario)
        .with_context(|| format!("reading {}", common.scenario.display()))?;
    let mut file = ScenarioFile::parse(&text)
        .with_context(|| format!("in {}", common.scenario.display()))?;
    if let Some(seed) = common.seed {
        file.simulation.seed = seed;
    }
    if let Some(r) = common.replications {
        file.simulation.replications = r;
    }
    if let Some(d) = common.duration {
        file.simulation.duration = d;
        if file.simulation.snapshot > d {
            file.simulation.snapshot = d / 2.0;
        }
    }
    file.validate().context("after applying command-line overrides")?;
    Ok(file)
}

fn stem(common: &Common, file: &ScenarioFile) -> String {
    file.name.clone().unwrap_or_else(|| {
        common
            .scenario
            .file_stem()
            .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(c) => solve(&c)?,
        Command::Bound(c) => {
            let file = load(&c)?;
            let report = bound_report(&file)?;
            emit_report(&c, &stem(&c, &file), &report)?;
            summarize(&report);
        }
        Command::Experiment(c) => {
            let file = load(&c)?;
            let report = experiment_report(&file)?;
            emit_report(&c, &stem(&c, &file), &report)?;
            summarize(&report);
        }
        Command::Simulate { common, traces } => simulate(&common, traces)?,
        Command::Saturation(c) => {
            let file = load(&c)?;
            let r = saturation_validate(&file.sim_config())?;
            let name = stem(&c, &file);
            match c.format {
                Format::Json => output::emit(&c.out, &format!("{name}-saturation.json"), &output::json(&r)?)?,
                Format::Csv => output::emit(&c.out, &format!("{name}-saturation.csv"), &output::saturation_csv(&r)?)?,
            }
        }
        Command::Sweep(c) => {
            let file = load(&c)?;
            let r = sweep_report(&file)?;
            let name = stem(&c, &file);
            match c.format {
                Format::Json => output::emit(&c.out, &format!("{name}-sweep.json"), &output::json(&r)?)?,
                Format::Csv => output::emit(&c.out, &format!("{name}-sweep.csv"), &output::sweep_csv(&r)?)?,
            }
            eprintln!(
                "threshold {:.4} packets/slot; mean backlog ratio last/first {:.2}",
                r.stability_threshold,
                r.knee_ratio()
            );
        }
    }
    Ok(())
}

fn solve(c: &Common) -> Result<()> {
    let file = load(c)?;
    let network = file.network();
    let sol = solve_fixed_point(&network)?;
    let timing = slot_length(&network);
    let threshold = stability_threshold(&sol);
    if c.format == Format::Json {
        let doc = serde_json::json!({
            "solution": sol,
            "timing": timing,
            "stability_threshold": threshold,
        });
        let name = stem(c, &file);
        return output::emit(&c.out, &format!("{name}-solve.json"), &output::json(&doc)?);
    }
    println!("n                   {}", sol.n);
    println!("tau                 {:.6}", sol.tau);
    println!("gamma               {:.6}", sol.gamma);
    println!("P_nt                {:.6}", sol.p_nt);
    println!("P_t                 {:.6}", sol.p_t);
    println!("P_s                 {:.6}", sol.p_s);
    println!("P_o                 {:.6}", sol.p_o);
    println!("L (idle slots)      {:.4}", timing.l);
    println!("L_int (idle slots)  {}", timing.l_int);
    println!("slot (s)            {:.7}", timing.slot_seconds());
    println!("threshold (pkt/slot) {:.6}", threshold);
    Ok(())
}

fn simulate(c: &Common, traces: bool) -> Result<()> {
    let file = load(c)?;
    let config = file.sim_config();
    let result = run_experiment(&config)?;
    let name = stem(c, &file);
    match c.format {
        Format::Json => output::emit(&c.out, &format!("{name}-sim.json"), &output::json(&result)?)?,
        Format::Csv => {
            let backlog: Vec<TableRow> = (0..result.backlog_tail.len())
                .map(|x| TableRow {
                    x: x as f64,
                    analytical_bound: f64::NAN,
                    empirical_tail: Some(result.backlog_tail[x]),
                })
                .collect();
            output::emit(&c.out, &format!("{name}-sim-backlog.csv"), &output::table_csv(&backlog)?)?;
        }
    }
    if traces {
        let rep = run_replication(&config, 0)?;
        let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
        write_file(&dir, &format!("{name}-traces-rep0.csv"), &output::traces_csv(&rep)?)?;
    }
    eprintln!(
        "mean backlog {:.4} packets, mean packet delay {:.6} s, censored {:.4}",
        result.mean_backlog, result.mean_packet_delay, result.censored_fraction
    );
    Ok(())
}

fn emit_report(c: &Common, name: &str, report: &Report) -> Result<()> {
    match c.format {
        Format::Json => output::emit(&c.out, &format!("{name}.json"), &report.to_json()),
        Format::Csv => {
            let backlog = output::table_csv(&report.backlog_table)?;
            match &c.out {
                Some(dir) => {
                    write_file(dir, &format!("{name}-backlog.csv"), &backlog)?;
                    write_file(dir, &format!("{name}-delay.csv"), &output::table_csv(&report.delay_table)?)
                }
                None => {
                    print!("{backlog}");
                    Ok(())
                }
            }
        }
    }
}

fn summarize(report: &Report) {
    for v in &report.verdicts {
        eprintln!("{:<24} {}  {}", v.name, if v.passed { "pass" } else { "FAIL" }, v.detail);
    }
    if let Some(l) = &report.little {
        eprintln!(
            "little: E B/lambda = {:.6} s, measured E D = {:.6} s, gap {:.1}% ({}, {})",
            l.little_estimate,
            l.measured,
            100.0 * l.relative_gap,
            if l.close { "close" } else { "not close" },
            if l.dominates { "dominating" } else { "not dominating" },
        );
    }
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}
