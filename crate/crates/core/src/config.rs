//! Job files.
//!
//! A job is one TOML document. Top-level keys pick the mode and protocol;
//! tables hold the antennas, multiplexing gains, SNR grid, trial plan and
//! output settings:
//!
//! ```toml
//! mode = "simulate"          # analytic | simulate | optimize | region
//! protocol = "CF"            # CF | DF | DCF
//!
//! [antennas]
//! m1 = 1
//! mr = 1
//! m2 = 1
//!
//! [multiplexing]             # simulate: a pair
//! r1 = 0.25
//! r2 = 0.25
//! # analytic / optimize: a grid, either start/stop/step or values = [...]
//!
//! [snr]                      # simulate only; or points_db = [...]
//! start_db = 25.0
//! stop_db = 40.0
//! step_db = 5.0
//!
//! [plan]                     # simulate only; every key optional
//! trials = 1000000
//! seed = 0
//! workers = 8
//!
//! [dcf]                      # DCF only
//! fixed_listen_fraction = 0.5
//!
//! [region]                   # region only
//! diversity = 0.5
//!
//! [optimizer]                # optimize only; every key optional
//! step = 0.01
//! refine = true
//! tolerance = 1e-4
//!
//! [output]
//! path = "out.csv"
//! format = "csv"             # csv | json
//! ```
//!
//! Unknown keys are rejected. Omitted plan keys fall back to one million
//! trials, seed 0 and one worker per available core.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::MultiplexingPair;
use crate::channel::AntennaConfig;
use crate::exponent::SearchMethod;
use crate::montecarlo::{SnrGrid, TrialPlan};
use crate::protocols::{ListenRule, Protocol};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("missing required key `{key}` for mode {mode}")]
    Missing { key: &'static str, mode: Mode },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("job file says mode = \"{file}\" but the command asks for {requested}")]
    ModeMismatch { file: Mode, requested: Mode },
    #[error("no metadata block found in output")]
    NoMetadata,
}

fn invalid(key: &'static str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Simulate,
    Optimize,
    Region,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Simulate => "simulate",
            Mode::Optimize => "optimize",
            Mode::Region => "region",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProtocolName {
    Cf,
    Df,
    Dcf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format `{other}`, expected csv or json")),
        }
    }
}

/// Multiplexing gains: one pair for a simulation, or a list of symmetric
/// gains for curve sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Multiplexing {
    Pair(MultiplexingPair),
    Grid(Vec<f64>),
}

/// A validated job.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub antennas: AntennaConfig,
    pub protocol: Protocol,
    pub multiplexing: Option<Multiplexing>,
    pub snr_grid: Option<SnrGrid>,
    pub plan: Option<TrialPlan>,
    pub diversity: Option<f64>,
    pub optimizer: SearchMethod,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

// On-disk layout. Every table denies unknown keys so typos surface by name.

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct Document {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    protocol: Option<ProtocolName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    antennas: Option<AntennaConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiplexing: Option<MultiplexingDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snr: Option<SnrDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<PlanDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dcf: Option<DcfDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<RegionDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<OutputDoc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiplexingDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnrDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    start_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DcfDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    fixed_listen_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    diversity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<OutputFormat>,
}

/// Parses a job whose `mode` key is set.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Document = toml::from_str(text)?;
    resolve(doc, None)
}

/// Parses a job for `mode`; a `mode` key in the file must agree.
pub fn parse_config_for(text: &str, mode: Mode) -> Result<RunConfig, ConfigError> {
    let doc: Document = toml::from_str(text)?;
    resolve(doc, Some(mode))
}

fn resolve_grid(m: &MultiplexingDoc) -> Result<Vec<f64>, ConfigError> {
    if let Some(values) = &m.values {
        if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("multiplexing.values", "expected a nonempty list of nonnegative gains"));
        }
        return Ok(values.clone());
    }
    let start = m.start.unwrap_or(0.0);
    let stop = m.stop.ok_or(ConfigError::Invalid {
        key: "multiplexing.stop",
        reason: "a grid needs `stop` (or a `values` list)".into(),
    })?;
    let step = m.step.ok_or(ConfigError::Invalid {
        key: "multiplexing.step",
        reason: "a grid needs `step` (or a `values` list)".into(),
    })?;
    if !(step > 0.0 && start >= 0.0 && stop >= start && stop.is_finite()) {
        return Err(invalid("multiplexing", format!("bad grid start={start} stop={stop} step={step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // multiply rather than accumulate so grid points land on round values
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn resolve_snr(s: &SnrDoc) -> Result<SnrGrid, ConfigError> {
    if let Some(points) = &s.points_db {
        return SnrGrid::new(points.clone()).map_err(|e| invalid("snr.points_db", e));
    }
    match (s.start_db, s.stop_db, s.step_db) {
        (Some(a), Some(b), Some(c)) => SnrGrid::from_range(a, b, c).map_err(|e| invalid("snr", e)),
        _ => Err(invalid("snr", "expected start_db, stop_db and step_db, or points_db")),
    }
}

fn resolve(doc: Document, requested: Option<Mode>) -> Result<RunConfig, ConfigError> {
    let mode = match (doc.mode, requested) {
        (Some(file), Some(req)) if file != req => {
            return Err(ConfigError::ModeMismatch { file, requested: req })
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(ConfigError::Missing { key: "mode", mode: Mode::Analytic }),
    };
    let antennas = doc.antennas.ok_or(ConfigError::Missing { key: "antennas", mode })?;

    let listen = match doc.dcf.as_ref().and_then(|d| d.fixed_listen_fraction) {
        Some(t) => ListenRule::fixed(t).map_err(|e| invalid("dcf.fixed_listen_fraction", e))?,
        None => ListenRule::Dynamic,
    };
    let protocol = match doc.protocol.unwrap_or(ProtocolName::Cf) {
        ProtocolName::Cf => Protocol::Cf,
        ProtocolName::Df => Protocol::Df,
        ProtocolName::Dcf => Protocol::Dcf(listen),
    };
    if doc.dcf.is_some() && !matches!(protocol, Protocol::Dcf(_)) {
        return Err(invalid("dcf", "the [dcf] table only applies to protocol = \"DCF\""));
    }

    let multiplexing = match (mode, &doc.multiplexing) {
        (Mode::Simulate, Some(m)) => {
            let r1 = m.r1.ok_or(ConfigError::Missing { key: "multiplexing.r1", mode })?;
            let r2 = match (m.r2, protocol) {
                (Some(r2), Protocol::Dcf(_)) if r2 != 0.0 => {
                    return Err(invalid(
                        "multiplexing.r2",
                        format!("DCF is one-way, so r2 must be 0 (got {r2})"),
                    ))
                }
                (Some(r2), _) => r2,
                (None, Protocol::Dcf(_)) => 0.0,
                (None, _) => return Err(ConfigError::Missing { key: "multiplexing.r2", mode }),
            };
            let pair = MultiplexingPair::new(r1, r2).map_err(|e| invalid("multiplexing", e))?;
            pair.validate(&antennas).map_err(|e| invalid("multiplexing", e))?;
            Some(Multiplexing::Pair(pair))
        }
        (Mode::Analytic | Mode::Optimize, Some(m)) => Some(Multiplexing::Grid(resolve_grid(m)?)),
        (Mode::Region, _) => None,
        (_, None) => return Err(ConfigError::Missing { key: "multiplexing", mode }),
    };

    let (snr_grid, plan) = if mode == Mode::Simulate {
        let snr = doc.snr.as_ref().ok_or(ConfigError::Missing { key: "snr", mode })?;
        let grid = resolve_snr(snr)?;
        if let Some(&low) = grid.points_db().iter().find(|&&db| db <= 0.0) {
            return Err(invalid(
                "snr",
                format!("rates scale with log2(snr), so points must exceed 0 dB (got {low})"),
            ));
        }
        let p = doc.plan.clone().unwrap_or_default();
        let seed = p.seed.unwrap_or_else(|| {
            log::info!("no plan.seed given, using seed {DEFAULT_SEED}");
            DEFAULT_SEED
        });
        let plan = TrialPlan::new(
            p.trials.unwrap_or(DEFAULT_TRIALS),
            seed,
            p.workers.unwrap_or_else(TrialPlan::default_workers),
        )
        .map_err(|e| invalid("plan", e))?;
        (Some(grid), Some(plan))
    } else {
        (None, None)
    };

    let diversity = if mode == Mode::Region {
        let d = doc
            .region
            .as_ref()
            .and_then(|r| r.diversity)
            .ok_or(ConfigError::Missing { key: "region.diversity", mode })?;
        let max = (antennas.m_star() * antennas.mr()) as f64;
        if !(0.0..=max).contains(&d) {
            return Err(invalid("region.diversity", format!("{d} outside [0, {max}]")));
        }
        Some(d)
    } else {
        None
    };

    let opt = doc.optimizer.clone().unwrap_or_default();
    let defaults = SearchMethod::default();
    let step = opt.step.unwrap_or(defaults.step());
    if !(step > 0.0 && step <= 1.0) {
        return Err(invalid("optimizer.step", format!("{step} outside (0, 1]")));
    }
    let optimizer = if opt.refine.unwrap_or(true) {
        let tol = opt.tolerance.unwrap_or(1e-4);
        if tol.is_nan() || tol <= 0.0 {
            return Err(invalid("optimizer.tolerance", "must be positive"));
        }
        SearchMethod::GridRefine { step, tol }
    } else {
        SearchMethod::Grid { step }
    };

    let output = doc.output.clone().unwrap_or_default();
    Ok(RunConfig {
        mode,
        antennas,
        protocol,
        multiplexing,
        snr_grid,
        plan,
        diversity,
        optimizer,
        output_path: output.path,
        output_format: output.format.unwrap_or_default(),
    })
}

impl RunConfig {
    pub(crate) fn to_document(&self) -> Document {
        let (protocol, dcf) = match self.protocol {
            Protocol::Cf => (ProtocolName::Cf, None),
            Protocol::Df => (ProtocolName::Df, None),
            Protocol::Dcf(ListenRule::Dynamic) => (ProtocolName::Dcf, None),
            Protocol::Dcf(ListenRule::Fixed(t)) => {
                (ProtocolName::Dcf, Some(DcfDoc { fixed_listen_fraction: Some(t) }))
            }
        };
        let multiplexing = self.multiplexing.as_ref().map(|m| match m {
            Multiplexing::Pair(p) => MultiplexingDoc { r1: Some(p.r1), r2: Some(p.r2), ..Default::default() },
            Multiplexing::Grid(v) => MultiplexingDoc { values: Some(v.clone()), ..Default::default() },
        });
        let optimizer = match self.optimizer {
            SearchMethod::Grid { step } => {
                OptimizerDoc { step: Some(step), refine: Some(false), tolerance: None }
            }
            SearchMethod::GridRefine { step, tol } => {
                OptimizerDoc { step: Some(step), refine: Some(true), tolerance: Some(tol) }
            }
        };
        // protocol and optimizer only matter to some modes and default on parse
        let simulate = self.mode == Mode::Simulate;
        Document {
            mode: Some(self.mode),
            protocol: simulate.then_some(protocol),
            antennas: Some(self.antennas),
            multiplexing,
            snr: self
                .snr_grid
                .as_ref()
                .map(|g| SnrDoc { points_db: Some(g.points_db().to_vec()), ..Default::default() }),
            plan: self.plan.map(|p| PlanDoc {
                trials: Some(p.trials_per_point),
                seed: Some(p.seed),
                workers: Some(p.workers),
            }),
            dcf,
            region: self.diversity.map(|d| RegionDoc { diversity: Some(d) }),
            optimizer: (self.mode == Mode::Optimize).then_some(optimizer),
            output: Some(OutputDoc { path: self.output_path.clone(), format: Some(self.output_format) }),
        }
    }

    /// The fully resolved job as TOML; parses back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("config document serializes")
    }

    pub(crate) fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_document()).expect("config document serializes")
    }

    pub(crate) fn from_json_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let doc: Document = serde_json::from_value(value)?;
        resolve(doc, None)
    }

    pub fn pair(&self) -> Option<MultiplexingPair> {
        match self.multiplexing {
            Some(Multiplexing::Pair(p)) => Some(p),
            _ => None,
        }
    }

    pub fn grid(&self) -> Option<&[f64]> {
        match &self.multiplexing {
            Some(Multiplexing::Grid(v)) => Some(v),
            _ => None,
        }
    }
}
