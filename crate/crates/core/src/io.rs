//! Parameter documents, dataset and curve files, and axis normalization.
//!
//! Parameters are JSON with fields `k1`..`k7`, `c_s`, `c_g`. Datasets are CSV
//! with header `n,x`; `#` starts a comment line. Every number written by this
//! module uses 17 significant digits with `.` as decimal separator.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{Dataset, FitResult};
use crate::model::{Contribution, Rates};
use crate::ssa::EnsembleStats;
use crate::steady::SweepResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    #[serde(flatten)]
    pub rates: Rates,
    #[serde(flatten)]
    pub contribution: Contribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl ParamsDocument {
    pub fn new(rates: Rates, contribution: Contribution) -> Self {
        Self { rates, contribution, label: None, provenance: None }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.contribution.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Fitted parameters plus fit diagnostics, as written by the `fit` command.
/// Readable back as a [`ParamsDocument`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    #[serde(flatten)]
    pub params: ParamsDocument,
    pub mse: f64,
    pub generations_used: usize,
    pub converged: bool,
    pub objective_evaluations: usize,
}

impl FitDocument {
    pub fn from_result(result: &FitResult, label: Option<String>) -> Self {
        let mut params = ParamsDocument::new(result.rates, result.contribution)
            .with_provenance("differential evolution fit");
        params.label = label;
        Self {
            params,
            mse: result.mse,
            generations_used: result.generations_used,
            converged: result.converged,
            objective_evaluations: result.objective_evaluations,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Formats like C's `%.17g`: enough digits to round-trip any `f64`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    if !(-4..17).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        let tail = tail.trim_end_matches('0');
        let exp_sign = if exp < 0 { '-' } else { '+' };
        let frac = if tail.is_empty() { String::new() } else { format!(".{tail}") };
        return format!("{sign}{head}{frac}e{exp_sign}{:02}", exp.abs());
    }

    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let (int, frac) = digits.split_at((exp + 1) as usize);
        format!("{int}.{frac}")
    };
    let body = body.trim_end_matches('0').trim_end_matches('.');
    format!("{sign}{body}")
}

/// Parses a `n,x` dataset. Rows are sorted by `n`; duplicates are rejected.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(csv_parse_error)?,
        None => return Err(Error::Parse { line: 1, message: "missing header `n,x`".into() }),
    };
    let header_line = header.position().map_or(1, |p| p.line());
    if header.len() != 2 || &header[0] != "n" || &header[1] != "x" {
        return Err(Error::Parse {
            line: header_line,
            message: format!("expected header `n,x`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    let mut last_line = header_line;
    for rec in records {
        let rec = rec.map_err(csv_parse_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        last_line = line;
        if rec.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, found {}", rec.len()) });
        }
        let n = parse_cell(&rec[0], "n", line)?;
        let x = parse_cell(&rec[1], "x", line)?;
        rows.push((n, x, line));
    }

    if rows.len() < 2 {
        return Err(Error::Parse { line: last_line, message: format!("need at least 2 data rows, found {}", rows.len()) });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse { line: w[1].2, message: format!("duplicate n = {}", w[1].0) });
    }
    Dataset::new(rows.into_iter().map(|(n, x, _)| (n, x)).collect(), "")
}

fn csv_parse_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

fn parse_cell(cell: &str, name: &str, line: u64) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse { line, message: format!("{name} is not a finite number: `{cell}`") }),
    }
}

pub fn dataset_csv(data: &Dataset) -> String {
    let mut out = String::from("n,x\n");
    for &(n, x) in data.points() {
        let _ = writeln!(out, "{},{}", format_g17(n), format_g17(x));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeMode {
    #[default]
    None,
    /// Divide every `n` by the first one.
    FirstToOne,
    /// Affine map taking the first and last `n` to 1 and 100.
    #[serde(rename = "range-1-100")]
    Range1To100,
}

impl FromStr for NormalizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "first-to-one" => Ok(Self::FirstToOne),
            "range-1-100" => Ok(Self::Range1To100),
            other => Err(Error::InvalidInput(format!(
                "unknown normalization '{other}', expected none, first-to-one or range-1-100"
            ))),
        }
    }
}

pub fn normalize_axis(data: &Dataset, mode: NormalizeMode) -> Result<Dataset> {
    let pts = data.points();
    let first = pts[0].0;
    let last = pts[pts.len() - 1].0;
    let map: Box<dyn Fn(f64) -> f64> = match mode {
        NormalizeMode::None => return Ok(data.clone()),
        NormalizeMode::FirstToOne => Box::new(move |n| n / first),
        NormalizeMode::Range1To100 => {
            if first == last {
                return Err(Error::DegenerateRange(first));
            }
            Box::new(move |n| 1.0 + 99.0 * (n - first) / (last - first))
        }
    };
    Dataset::new(pts.iter().map(|&(n, x)| (map(n), x)).collect(), data.label())
}

/// One row of a throughput curve file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: f64,
    pub s: f64,
    pub g: f64,
    pub f: f64,
    pub x: f64,
    pub speedup: Option<f64>,
}

impl CurveRow {
    pub fn from_sweep(sweep: &SweepResult) -> Vec<CurveRow> {
        sweep
            .rows
            .iter()
            .map(|r| CurveRow { n: r.n, s: r.s_star, g: r.g_star, f: r.f_star, x: r.throughput, speedup: r.speedup })
            .collect()
    }
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("n,s,g,f,x,speedup\n");
    for r in rows {
        let speedup = r.speedup.map(format_g17).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_g17(r.n),
            format_g17(r.s),
            format_g17(r.g),
            format_g17(r.f),
            format_g17(r.x),
            speedup
        );
    }
    out
}

/// Two-column CSV for analytic law curves.
pub fn law_csv(value_name: &str, rows: &[(f64, f64)]) -> String {
    let mut out = format!("n,{value_name}\n");
    for &(n, v) in rows {
        let _ = writeln!(out, "{},{}", format_g17(n), format_g17(v));
    }
    out
}

pub fn ssa_stats_csv(stats: &EnsembleStats) -> String {
    let mut out = String::from("t,mean_s,mean_g,mean_f,var_s,var_g,var_f\n");
    for ((t, m), v) in stats.times.iter().zip(&stats.mean).zip(&stats.variance) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_g17(*t),
            format_g17(m[0]),
            format_g17(m[1]),
            format_g17(m[2]),
            format_g17(v[0]),
            format_g17(v[1]),
            format_g17(v[2])
        );
    }
    out
}

/// Writes `contents` to a temporary file beside `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
