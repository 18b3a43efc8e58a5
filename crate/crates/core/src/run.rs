//! Executes a [`RunConfig`] and renders the result as CSV or JSON.
//!
//! Every output carries the resolved job, so [`extract_metadata`] recovers a
//! config that reproduces it. CSV puts the job in a `# `-prefixed TOML block
//! ahead of the tables; tables are separated by a blank line and each starts
//! with its header row. JSON nests the same job under `"config"` and each
//! table under `"tables"`, as a list of row objects.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::analytic::{
    self, df_region, df_symmetric_dmt, df_threshold, DmtError, MultiplexingPair, RateRegion,
};
use crate::config::{ConfigError, Mode, OutputFormat, RunConfig};
use crate::exponent::{DcfCurve, ExponentError};
use crate::montecarlo::{fit_diversity, sweep, Message, MonteCarloError};

const TOOL: &str = env!("CARGO_PKG_NAME");
const VERSION: &str = env!("CARGO_PKG_VERSION");
const BEGIN_CONFIG: &str = "# begin config";
const END_CONFIG: &str = "# end config";

/// Points along the sampled region boundary.
pub const BOUNDARY_SAMPLES: usize = 21;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dmt(#[from] DmtError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
    #[error("{0}")]
    Incomplete(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => x.to_string(),
            Cell::Int(n) => n.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => json!(x),
            Cell::Int(n) => json!(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    /// The named column as floats.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        Some(
            self.rows
                .iter()
                .map(|row| match row[idx] {
                    Cell::Float(x) => x,
                    Cell::Int(n) => n as f64,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub mode: Mode,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn execute(config: &RunConfig) -> Result<Report, RunError> {
    let tables = match config.mode {
        Mode::Analytic => analytic_tables(config)?,
        Mode::Simulate => simulate_tables(config)?,
        Mode::Optimize => optimize_tables(config)?,
        Mode::Region => {
            let d = config.diversity.ok_or(RunError::Incomplete("region mode needs a diversity"))?;
            region_tables(&df_region(&config.antennas, d)?)
        }
    };
    Ok(Report { mode: config.mode, tables })
}

fn grid(config: &RunConfig) -> Result<&[f64], RunError> {
    config.grid().ok_or(RunError::Incomplete("this mode needs a multiplexing grid"))
}

fn analytic_tables(config: &RunConfig) -> Result<Vec<Table>, RunError> {
    let a = &config.antennas;
    let mut curves =
        Table::new("curves", &["r", "cf_dmt", "outer_bound_d1", "outer_bound_d2", "df_symmetric_dmt"]);
    for &r in grid(config)? {
        let ob = analytic::outer_bound(a, &MultiplexingPair::symmetric(r)?)?;
        curves.rows.push(vec![
            Cell::Float(r),
            Cell::Float(analytic::cf_dmt(a, r)?),
            Cell::Float(ob.d1),
            Cell::Float(ob.d2),
            Cell::Float(df_symmetric_dmt(a, r)?),
        ]);
    }
    let d_star = df_threshold(a);
    let mut threshold = Table::new("df_threshold", &["d_star"]);
    threshold.rows.push(vec![Cell::Float(d_star)]);
    let mut tables = vec![curves, threshold];
    let region = df_region(a, d_star)?;
    let mut vertices = Table::new("df_region_at_threshold", &["r1", "r2"]);
    vertices.rows =
        region.vertices().into_iter().map(|(x, y)| vec![Cell::Float(x), Cell::Float(y)]).collect();
    tables.push(vertices);
    Ok(tables)
}

fn simulate_tables(config: &RunConfig) -> Result<Vec<Table>, RunError> {
    let pair = config.pair().ok_or(RunError::Incomplete("simulate mode needs an (r1, r2) pair"))?;
    let snr = config.snr_grid.as_ref().ok_or(RunError::Incomplete("simulate mode needs an SNR grid"))?;
    let plan = config.plan.ok_or(RunError::Incomplete("simulate mode needs a trial plan"))?;
    let messages: &[Message] = if config.protocol.two_way() { &Message::BOTH } else { &[Message::One] };

    let estimates = sweep(config.protocol, &config.antennas, &pair, snr, &plan)?;
    let mut outage = Table::new("outage", &["snr_db", "message", "trials", "failures", "p_hat", "stderr"]);
    for e in &estimates {
        for &m in messages {
            outage.rows.push(vec![
                Cell::Float(e.snr().db()),
                Cell::Int(u64::from(m.number())),
                Cell::Int(e.trials()),
                Cell::Int(e.failures(m)),
                Cell::Float(e.p_hat(m)),
                Cell::Float(e.stderr(m)),
            ]);
        }
    }
    let mut fit = Table::new("fit", &["message", "d_hat", "stderr", "points_used"]);
    for &m in messages {
        match fit_diversity(&estimates, m) {
            Ok(f) => fit.rows.push(vec![
                Cell::Int(u64::from(m.number())),
                Cell::Float(f.d_hat),
                Cell::Float(f.stderr),
                Cell::Int(f.points_used as u64),
            ]),
            Err(e) => log::warn!("no slope fit for message {}: {e}", m.number()),
        }
    }
    Ok(vec![outage, fit])
}

fn optimize_tables(config: &RunConfig) -> Result<Vec<Table>, RunError> {
    let curve = DcfCurve::new(&config.antennas, config.optimizer)?;
    let mut t = Table::new("dcf_dmt", &["r", "dcf_dmt"]);
    for &r in grid(config)? {
        t.rows.push(vec![Cell::Float(r), Cell::Float(curve.value(r)?)]);
    }
    Ok(vec![t])
}

fn region_tables(region: &RateRegion) -> Vec<Table> {
    let mut constraints = Table::new("constraints", &["a", "b", "c"]);
    constraints.rows = region
        .constraints
        .iter()
        .map(|c| vec![Cell::Int(u64::from(c.a)), Cell::Int(u64::from(c.b)), Cell::Float(c.c)])
        .collect();
    let mut vertices = Table::new("vertices", &["r1", "r2"]);
    vertices.rows =
        region.vertices().into_iter().map(|(x, y)| vec![Cell::Float(x), Cell::Float(y)]).collect();
    let mut boundary = Table::new("boundary", &["r1", "r2_max"]);
    let top = region.max_r1().max(0.0);
    for i in 0..BOUNDARY_SAMPLES {
        let r1 = top * i as f64 / (BOUNDARY_SAMPLES - 1) as f64;
        if let Some(r2) = region.max_r2(r1) {
            boundary.rows.push(vec![Cell::Float(r1), Cell::Float(r2)]);
        }
    }
    vec![constraints, vertices, boundary]
}

/// Seconds since the Unix epoch, for the optional timestamp line.
pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Renders `report` with `config` as metadata. Without a timestamp the
/// output is a pure function of its inputs.
pub fn render(report: &Report, config: &RunConfig, format: OutputFormat, timestamp: Option<u64>) -> String {
    match format {
        OutputFormat::Csv => render_csv(report, config, timestamp),
        OutputFormat::Json => render_json(report, config, timestamp),
    }
}

fn render_csv(report: &Report, config: &RunConfig, timestamp: Option<u64>) -> String {
    let mut out = String::new();
    writeln!(out, "# {TOOL} {VERSION} {}", report.mode).unwrap();
    if let Some(ts) = timestamp {
        writeln!(out, "# generated_unix_seconds {ts}").unwrap();
    }
    out.push_str(BEGIN_CONFIG);
    out.push('\n');
    for line in config.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            writeln!(out, "# {line}").unwrap();
        }
    }
    out.push_str(END_CONFIG);
    out.push('\n');
    for (i, table) in report.tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&table.columns.join(","));
        out.push('\n');
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    out
}

fn render_json(report: &Report, config: &RunConfig, timestamp: Option<u64>) -> String {
    let mut tables = Map::new();
    for table in &report.tables {
        let rows: Vec<Value> = table
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    table.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        tables.insert(table.name.to_string(), Value::Array(rows));
    }
    let mut doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "mode": report.mode,
        "config": config.to_json_value(),
        "tables": tables,
    });
    if let Some(ts) = timestamp {
        doc["generated_unix_seconds"] = json!(ts);
    }
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// Recovers the job embedded in a rendered output, CSV or JSON.
pub fn extract_metadata(output: &str) -> Result<RunConfig, ConfigError> {
    if output.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(output)?;
        let config = doc.get("config").cloned().ok_or(ConfigError::NoMetadata)?;
        return RunConfig::from_json_value(config);
    }
    let mut lines = output.lines().skip_while(|l| *l != BEGIN_CONFIG);
    if lines.next().is_none() {
        return Err(ConfigError::NoMetadata);
    }
    let mut toml = String::new();
    for line in lines {
        if line == END_CONFIG {
            return crate::config::parse_config(&toml);
        }
        let body =
            line.strip_prefix("# ").or_else(|| line.strip_prefix('#')).ok_or(ConfigError::NoMetadata)?;
        toml.push_str(body);
        toml.push('\n');
    }
    Err(ConfigError::NoMetadata)
}
