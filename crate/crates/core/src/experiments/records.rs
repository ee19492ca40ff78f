use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{StateVector, Termination};
use crate::solvers::Method;

use super::config::OutputFormat;

/// One solver run. Fields are written in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub experiment: String,
    pub n_stocks: Option<usize>,
    pub n_agents: usize,
    pub scenario: u64,
    /// `plain` or `transformed`.
    pub variant: String,
    pub method: Method,
    pub oracle_mode: String,
    /// Comparisons per direction query; absent for exact oracles.
    pub queries: Option<usize>,
    pub x0: Vec<f64>,
    pub final_state: Vec<f64>,
    pub final_costs: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub stationarity_residual: f64,
    pub relative_error: Option<f64>,
    pub wall_time_s: Option<f64>,
    #[serde(skip)]
    pub trajectory: Option<Vec<StateVector>>,
}

pub const CSV_HEADER: [&str; 16] = [
    "experiment",
    "n_stocks",
    "n_agents",
    "scenario",
    "variant",
    "method",
    "oracle_mode",
    "queries",
    "x0",
    "final_state",
    "final_costs",
    "iterations",
    "termination",
    "stationarity_residual",
    "relative_error",
    "wall_time_s",
];

impl ResultRecord {
    fn sort_key(&self) -> (Option<usize>, usize, u64, &str, Method, Option<usize>) {
        (self.n_stocks, self.n_agents, self.scenario, &self.variant, self.method, self.queries)
    }
}

/// Deterministic record order: cell, scenario, variant, method, then query count.
pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_floats(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| format_float(x)).collect();
    format!("[{}]", items.join(","))
}

fn json_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "null".to_string(), |x| x.to_string())
}

pub fn to_json_line(r: &ResultRecord) -> String {
    let mut line = String::from("{");
    let fields: [(&str, String); 16] = [
        ("experiment", json_string(&r.experiment)),
        ("n_stocks", json_opt(r.n_stocks)),
        ("n_agents", r.n_agents.to_string()),
        ("scenario", r.scenario.to_string()),
        ("variant", json_string(&r.variant)),
        ("method", json_string(r.method.label())),
        ("oracle_mode", json_string(&r.oracle_mode)),
        ("queries", json_opt(r.queries)),
        ("x0", json_floats(&r.x0)),
        ("final_state", json_floats(&r.final_state)),
        ("final_costs", json_floats(&r.final_costs)),
        ("iterations", r.iterations.to_string()),
        ("termination", json_string(r.termination.as_str())),
        ("stationarity_residual", format_float(r.stationarity_residual)),
        ("relative_error", r.relative_error.map_or_else(|| "null".into(), format_float)),
        ("wall_time_s", r.wall_time_s.map_or_else(|| "null".into(), format_float)),
    ];
    for (k, (name, value)) in fields.iter().enumerate() {
        if k > 0 {
            line.push(',');
        }
        let _ = write!(line, "{}:{}", json_string(name), value);
    }
    line.push('}');
    line
}

fn csv_floats(v: &[f64]) -> String {
    v.iter().map(|&x| format_float(x)).collect::<Vec<_>>().join(";")
}

fn csv_row(r: &ResultRecord) -> [String; 16] {
    let opt = |v: Option<usize>| v.map_or_else(String::new, |x| x.to_string());
    let optf = |v: Option<f64>| v.map_or_else(String::new, format_float);
    [
        r.experiment.clone(),
        opt(r.n_stocks),
        r.n_agents.to_string(),
        r.scenario.to_string(),
        r.variant.clone(),
        r.method.label().to_string(),
        r.oracle_mode.clone(),
        opt(r.queries),
        csv_floats(&r.x0),
        csv_floats(&r.final_state),
        csv_floats(&r.final_costs),
        r.iterations.to_string(),
        r.termination.as_str().to_string(),
        format_float(r.stationarity_residual),
        optf(r.relative_error),
        optf(r.wall_time_s),
    ]
}

pub fn write_records<W: Write>(records: &[ResultRecord], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in records {
                writeln!(out, "{}", to_json_line(r))?;
            }
            out.flush()?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER).map_err(csv_error)?;
            for r in records {
                w.write_record(csv_row(r)).map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// Writes one record per line to `path`.
pub fn emit_results(records: &[ResultRecord], path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let file = File::create(path)?;
    write_records(records, format, BufWriter::new(file))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", k + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 100]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let rank = p / 100.0 * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub const SUMMARY_PERCENTILES: [f64; 5] = [1.5, 25.0, 50.0, 75.0, 98.5];

/// Relative-error distribution of one sweep cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub n_stocks: Option<usize>,
    pub n_agents: usize,
    pub method: Method,
    pub queries: Option<usize>,
    pub count: usize,
    pub percentiles: [f64; 5],
    /// Scenarios outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`.
    pub outliers: Vec<u64>,
}

impl SummaryRow {
    pub fn median(&self) -> f64 {
        self.percentiles[2]
    }
}

/// Groups records carrying a relative error by cell and query count.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    type Key = (Option<usize>, usize, Method, Option<usize>);
    let mut groups: BTreeMap<Key, Vec<(u64, f64)>> = BTreeMap::new();
    for r in records {
        if let Some(e) = r.relative_error {
            groups
                .entry((r.n_stocks, r.n_agents, r.method, r.queries))
                .or_default()
                .push((r.scenario, e));
        }
    }
    groups
        .into_iter()
        .map(|((n_stocks, n_agents, method, queries), items)| {
            let mut values: Vec<f64> = items.iter().map(|(_, e)| *e).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let percentiles = SUMMARY_PERCENTILES.map(|p| percentile(&values, p));
            let q1 = percentile(&values, 25.0);
            let q3 = percentile(&values, 75.0);
            let iqr = q3 - q1;
            let outliers = items
                .iter()
                .filter(|(_, e)| *e < q1 - 1.5 * iqr || *e > q3 + 1.5 * iqr)
                .map(|(s, _)| *s)
                .collect();
            SummaryRow {
                n_stocks,
                n_agents,
                method,
                queries,
                count: values.len(),
                percentiles,
                outliers,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n_stocks", "n_agents", "method", "queries", "count", "p1.5", "p25", "p50", "p75", "p98.5", "outliers",
    ])
    .map_err(csv_error)?;
    for row in rows {
        let mut fields = vec![
            row.n_stocks.map_or_else(String::new, |v| v.to_string()),
            row.n_agents.to_string(),
            row.method.label().to_string(),
            row.queries.map_or_else(String::new, |v| v.to_string()),
            row.count.to_string(),
        ];
        fields.extend(row.percentiles.iter().map(|&p| format_float(p)));
        fields.push(row.outliers.iter().map(u64::to_string).collect::<Vec<_>>().join(";"));
        w.write_record(&fields).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format trajectory table: one row per (run, sample, coordinate).
pub fn write_trajectories<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_agents", "scenario", "variant", "method", "queries", "sample", "coordinate", "value"])
        .map_err(csv_error)?;
    for r in records {
        let Some(trajectory) = &r.trajectory else { continue };
        for (sample, state) in trajectory.iter().enumerate() {
            for (coordinate, value) in state.iter().enumerate() {
                w.write_record([
                    r.n_agents.to_string(),
                    r.scenario.to_string(),
                    r.variant.clone(),
                    r.method.label().to_string(),
                    r.queries.map_or_else(String::new, |v| v.to_string()),
                    sample.to_string(),
                    coordinate.to_string(),
                    format_float(*value),
                ])
                .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
