//! Report rows and their CSV / JSON serialisation.
//!
//! The main file holds one row per (parameter point, mode). Histograms go to
//! a sidecar `<path>.hist.csv` whose `row` column indexes the main file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

pub const CSV_HEADER: [&str; 9] = [
    "vignette",
    "param_name",
    "param_value",
    "mode",
    "statistic",
    "p_value",
    "n",
    "seed",
    "wall_ms",
];

pub const HIST_HEADER: [&str; 4] = ["row", "bin_lo", "bin_hi", "count"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub vignette: String,
    pub param_name: String,
    pub param_value: f64,
    pub mode: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub seed: u64,
    pub wall_ms: u64,
    #[serde(skip)]
    pub histogram: Option<RowHistogram>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(CalibError::invalid(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CalibError {
    CalibError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn histogram_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hist.csv");
    PathBuf::from(s)
}

fn csv_err(e: csv::Error) -> CalibError {
    CalibError::invalid(format!("csv: {e}"))
}

fn write_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CalibError::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CalibError::invalid(e.to_string()))
}

/// CSV text for `rows`, header first.
pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    write_csv(
        &CSV_HEADER,
        rows.iter().map(|r| {
            vec![
                r.vignette.clone(),
                r.param_name.clone(),
                r.param_value.to_string(),
                r.mode.clone(),
                r.statistic.to_string(),
                r.p_value.to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                r.wall_ms.to_string(),
            ]
        }),
    )
    .expect("writing CSV to memory cannot fail")
}

pub fn rows_to_json(rows: &[ReportRow]) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(rows).map_err(|e| CalibError::invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn histograms_to_csv(rows: &[ReportRow]) -> String {
    let records = rows.iter().enumerate().flat_map(|(i, r)| {
        r.histogram.iter().flat_map(move |h| {
            h.counts.iter().enumerate().map(move |(b, c)| {
                vec![
                    i.to_string(),
                    h.edges[b].to_string(),
                    h.edges[b + 1].to_string(),
                    c.to_string(),
                ]
            })
        })
    });
    write_csv(&HIST_HEADER, records).expect("writing CSV to memory cannot fail")
}

/// Writes the report and its histogram sidecar.
pub fn emit_report(rows: &[ReportRow], path: &Path, format: ReportFormat) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => rows_to_csv(rows),
        ReportFormat::Json => rows_to_json(rows)?,
    };
    fs::write(path, body).map_err(|e| io_err(path, e))?;
    let hist = histogram_path(path);
    fs::write(&hist, histograms_to_csv(rows)).map_err(|e| io_err(&hist, e))
}

fn parse_field<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| CalibError::invalid(format!("cannot parse {what} from {s:?}")))
}

fn csv_records(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers().map_err(csv_err)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(CalibError::invalid(format!(
            "unexpected header {:?}",
            found.iter().collect::<Vec<_>>()
        )));
    }
    r.records().map(|x| x.map_err(csv_err)).collect()
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    csv_records(text, &CSV_HEADER)?
        .iter()
        .map(|f| {
            Ok(ReportRow {
                vignette: f[0].to_string(),
                param_name: f[1].to_string(),
                param_value: parse_field(&f[2], "param_value")?,
                mode: f[3].to_string(),
                statistic: parse_field(&f[4], "statistic")?,
                p_value: parse_field(&f[5], "p_value")?,
                n: parse_field(&f[6], "n")?,
                seed: parse_field(&f[7], "seed")?,
                wall_ms: parse_field(&f[8], "wall_ms")?,
                histogram: None,
            })
        })
        .collect()
}

/// Attaches sidecar histograms to parsed rows.
pub fn attach_histograms(rows: &mut [ReportRow], text: &str) -> Result<()> {
    for f in csv_records(text, &HIST_HEADER)? {
        let row: usize = parse_field(&f[0], "row")?;
        let lo: f64 = parse_field(&f[1], "bin_lo")?;
        let hi: f64 = parse_field(&f[2], "bin_hi")?;
        let count: usize = parse_field(&f[3], "count")?;
        let n_rows = rows.len();
        let target = rows.get_mut(row).ok_or(CalibError::IndexOutOfRange {
            index: row,
            dim: n_rows,
        })?;
        let h = target.histogram.get_or_insert(RowHistogram {
            edges: vec![lo],
            counts: Vec::new(),
        });
        h.edges.push(hi);
        h.counts.push(count);
    }
    Ok(())
}

/// Reads a report written by [`emit_report`], including its histograms.
pub fn read_report(path: &Path, format: ReportFormat) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows = match format {
        ReportFormat::Csv => rows_from_csv(&text)?,
        ReportFormat::Json => {
            serde_json::from_str(&text).map_err(|e| CalibError::invalid(e.to_string()))?
        }
    };
    let hist = histogram_path(path);
    if hist.exists() {
        let text = fs::read_to_string(&hist).map_err(|e| io_err(&hist, e))?;
        attach_histograms(&mut rows, &text)?;
    }
    Ok(rows)
}
