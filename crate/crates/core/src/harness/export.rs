//! CSV and JSON export of grid and Δ results, and re-import.
//!
//! Floats are written with 17 significant digits so that import reproduces
//! them bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{OpeError, Result};

use super::delta::{DeltaResult, DeltaRow};
use super::grid::{GridResult, GridRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = OpeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(OpeError::Parse(format!("unknown format `{s}`, expected csv or json"))),
        }
    }
}

/// A flat record with a fixed column order.
pub trait Record: Sized + Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
    fn parse(fields: &[&str]) -> Result<Self>;
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_field<T: FromStr>(fields: &[&str], i: usize, name: &str) -> Result<T> {
    fields[i].parse().map_err(|_| OpeError::Parse(format!("column {name}: cannot parse `{}`", fields[i])))
}

impl Record for GridRow {
    const HEADER: &'static [&'static str] =
        &["env", "pi_b", "pi_e", "estimator", "eps_g", "delta_g", "rmse", "bias", "std", "se_rmse", "se_bias", "se_std", "trials"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.env.clone(),
            self.pi_b.clone(),
            self.pi_e.clone(),
            self.estimator.clone(),
            float(self.eps_g),
            float(self.delta_g),
            float(self.rmse),
            float(self.bias),
            float(self.std),
            float(self.se_rmse),
            float(self.se_bias),
            float(self.se_std),
            self.trials.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        let h = Self::HEADER;
        Ok(Self {
            env: f[0].to_string(),
            pi_b: f[1].to_string(),
            pi_e: f[2].to_string(),
            estimator: f[3].to_string(),
            eps_g: parse_field(f, 4, h[4])?,
            delta_g: parse_field(f, 5, h[5])?,
            rmse: parse_field(f, 6, h[6])?,
            bias: parse_field(f, 7, h[7])?,
            std: parse_field(f, 8, h[8])?,
            se_rmse: parse_field(f, 9, h[9])?,
            se_bias: parse_field(f, 10, h[10])?,
            se_std: parse_field(f, 11, h[11])?,
            trials: parse_field(f, 12, h[12])?,
        })
    }
}

impl Record for DeltaRow {
    const HEADER: &'static [&'static str] = &["env", "eps_g", "delta_g", "mean_delta", "var_delta", "baseline", "trials"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.env.clone(),
            float(self.eps_g),
            float(self.delta_g),
            float(self.mean_delta),
            float(self.var_delta),
            self.baseline.clone(),
            self.trials.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        let h = Self::HEADER;
        Ok(Self {
            env: f[0].to_string(),
            eps_g: parse_field(f, 1, h[1])?,
            delta_g: parse_field(f, 2, h[2])?,
            mean_delta: parse_field(f, 3, h[3])?,
            var_delta: parse_field(f, 4, h[4])?,
            baseline: f[5].to_string(),
            trials: parse_field(f, 6, h[6])?,
        })
    }
}

/// Render rows as CSV text: a header line, then one line per row.
pub fn to_csv<R: Record>(rows: &[R]) -> Result<String> {
    if rows.is_empty() {
        return Err(OpeError::Empty("nothing to export".into()));
    }
    let mut out = R::HEADER.join(",");
    out.push('\n');
    for r in rows {
        let fields = r.fields();
        if fields.iter().any(|f| f.contains([',', '\n', '"'])) {
            return Err(OpeError::Parse("text fields may not contain commas, quotes or newlines".into()));
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    Ok(out)
}

pub fn from_csv<R: Record>(text: &str) -> Result<Vec<R>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| OpeError::Parse("missing CSV header".into()))?;
    if header.split(',').ne(R::HEADER.iter().copied()) {
        return Err(OpeError::Parse(format!("unexpected CSV header `{header}`")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != R::HEADER.len() {
                return Err(OpeError::Parse(format!("expected {} columns, found {}", R::HEADER.len(), fields.len())));
            }
            R::parse(&fields)
        })
        .collect()
}

/// Render rows as a JSON array of objects.
pub fn to_json<R: Record>(rows: &[R]) -> Result<String> {
    if rows.is_empty() {
        return Err(OpeError::Empty("nothing to export".into()));
    }
    let mut text = serde_json::to_string_pretty(rows).map_err(|e| OpeError::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn from_json<R: Record>(text: &str) -> Result<Vec<R>> {
    serde_json::from_str(text).map_err(|e| OpeError::Parse(e.to_string()))
}

pub fn render<R: Record>(rows: &[R], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows),
    }
}

pub fn parse<R: Record>(text: &str, format: Format) -> Result<Vec<R>> {
    match format {
        Format::Csv => from_csv(text),
        Format::Json => from_json(text),
    }
}

/// Write rows to `path`.
pub fn write_rows<R: Record>(rows: &[R], path: &Path, format: Format) -> Result<()> {
    let text = render(rows, format)?;
    std::fs::write(path, text).map_err(|e| OpeError::io(path, e))
}

pub fn read_rows<R: Record>(path: &Path, format: Format) -> Result<Vec<R>> {
    let text = std::fs::read_to_string(path).map_err(|e| OpeError::io(path, e))?;
    parse(&text, format)
}

/// `<dir>/<kind>_<env>.<ext>`.
pub fn output_path(dir: &Path, kind: &str, env: &str, format: Format) -> PathBuf {
    dir.join(format!("{kind}_{env}.{}", format.extension()))
}

/// Write a grid result as `grid_<env>` in `dir`.
pub fn export_grid(result: &GridResult, dir: &Path, format: Format) -> Result<PathBuf> {
    let env = result.rows.first().map(|r| r.env.clone()).ok_or_else(|| OpeError::Empty("empty grid result".into()))?;
    let path = output_path(dir, "grid", &env, format);
    write_rows(&result.rows, &path, format)?;
    Ok(path)
}

/// Write a Δ result as `delta_<env>` in `dir`.
pub fn export_delta(result: &DeltaResult, dir: &Path, format: Format) -> Result<PathBuf> {
    let env = result.rows.first().map(|r| r.env.clone()).ok_or_else(|| OpeError::Empty("empty delta result".into()))?;
    let path = output_path(dir, "delta", &env, format);
    write_rows(&result.rows, &path, format)?;
    Ok(path)
}
