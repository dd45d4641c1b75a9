//! Scenario files: one TOML document describing the network, the traffic,
//! the simulation and the bound search.
//!
//! ```toml
//! schema_version = 1
//! name = "experiment1"
//!
//! [scenario]
//! n = 10
//! payload = 256
//!
//! [traffic]
//! kind = "poisson"
//! lambda = 0.04
//!
//! [simulation]
//! duration = 20.0
//! replications = 50
//! ```

use serde::{Deserialize, Serialize};

use crate::bounds::{SearchControls, DEFAULT_I_MAX};
use crate::dcf::{PhyParams, Scenario};
use crate::error::{Error, Result};
use crate::sim::{CbrPhase, SimConfig};
use crate::traffic::TrafficModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scenario: NetworkSection,
    /// Absent for saturated nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<TrafficModel>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub bounds: BoundSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub n: u32,
    pub payload: u32,
    #[serde(default)]
    pub phy: PhyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub duration: f64,
    pub replications: u32,
    pub snapshot: f64,
    pub seed: u64,
    pub cbr_phase: CbrPhase,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimConfig::new(Scenario::scenario1());
        SimulationSection {
            duration: d.duration,
            replications: d.replications,
            snapshot: d.snapshot,
            seed: d.seed,
            cbr_phase: d.cbr_phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    /// Backlog values at which the tail bound is computed. Defaults to
    /// [`default_x_grid`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    pub i_max: usize,
    pub search: SearchControls,
}

impl Default for BoundSection {
    fn default() -> Self {
        BoundSection {
            x: None,
            i_max: DEFAULT_I_MAX,
            search: SearchControls::default(),
        }
    }
}

impl BoundSection {
    pub fn x_grid(&self) -> Vec<f64> {
        self.x.clone().unwrap_or_else(default_x_grid)
    }
}

/// Every integer up to 100, then every 10 up to 1000.
pub fn default_x_grid() -> Vec<f64> {
    (0..=100)
        .map(f64::from)
        .chain((11..=100).map(|k| f64::from(k * 10)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Arrival rates in packets per slot; the traffic kind comes from
    /// `[traffic]`.
    pub lambdas: Vec<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.network().validate().map_err(|e| scoped("scenario", e))?;
        self.sim_config().validate().map_err(|e| scoped("simulation", e))?;
        self.bounds.search.validate().map_err(|e| scoped("bounds.search", e))?;
        if let Some(x) = &self.bounds.x {
            if x.is_empty() || x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(config_error("bounds.x", "need at least one finite value >= 0"));
            }
        }
        if self.bounds.i_max == 0 {
            return Err(config_error("bounds.i_max", "must be > 0"));
        }
        if let Some(sweep) = &self.sweep {
            if self.traffic.is_none() {
                return Err(config_error("sweep", "a sweep needs a [traffic] kind"));
            }
            if sweep.lambdas.is_empty() {
                return Err(config_error("sweep.lambdas", "must not be empty"));
            }
            for &l in &sweep.lambdas {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(config_error("sweep.lambdas", format!("invalid rate {l}")));
                }
            }
        }
        Ok(())
    }

    /// The network with this file's traffic.
    pub fn network(&self) -> Scenario {
        Scenario {
            n: self.scenario.n,
            payload: self.scenario.payload,
            phy: self.scenario.phy,
            traffic: self.traffic,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            scenario: self.network(),
            duration: s.duration,
            replications: s.replications,
            snapshot: s.snapshot,
            seed: s.seed,
            cbr_phase: s.cbr_phase,
            forced_backoff: None,
        }
    }

    /// This file with the traffic rate replaced by `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let traffic = match self.traffic {
            Some(TrafficModel::Poisson { .. }) => TrafficModel::poisson(lambda)?,
            Some(TrafficModel::Cbr { .. }) => TrafficModel::cbr(lambda)?,
            None => return Err(config_error("traffic", "no traffic kind to vary")),
        };
        let mut file = self.clone();
        file.traffic = Some(traffic);
        file.sweep = None;
        Ok(file)
    }
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn scoped(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => config_error(&format!("{section}.{name}"), reason),
        other => config_error(section, other.to_string()),
    }
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().trim_end().to_string();
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let line_start = before.rfind('\n').map_or(0, |i| i + 1);
            let column = before.len() - line_start + 1;
            let source = text[line_start..].lines().next().unwrap_or("").trim();
            Error::Parse(format!("line {line}, column {column}: {message} (in `{source}`)"))
        }
        None => Error::Parse(message),
    }
}
