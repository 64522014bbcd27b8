//! Tab-separated data files. Lines starting with `#` are comments; the first
//! non-comment line is the header.

use std::fmt::Write as _;
use std::path::Path;

use super::ExperimentError;
use crate::observables::{OrderParameterCurve, Sample};

/// Fixed float format shared by every data file.
pub fn num(x: f64) -> String {
    format!("{:.12e}", x + 0.0)
}

/// File-name tag for a detuning point, e.g. `ld+0.7500`.
pub fn delta_tag(log_delta: f64) -> String {
    format!("ld{:+.4}", log_delta + 0.0)
}

pub fn window_tag(window: f64) -> String {
    let w = format!("{window}");
    format!("T{}", w.replace('.', "p"))
}

pub fn time_series_tsv(samples: &[Sample]) -> String {
    let mut out = String::from("time\tsite\tn\tn2\tsigma_pm\ta_dag_a\n");
    for s in samples {
        for i in 0..s.sites() {
            let _ = writeln!(
                out,
                "{}\t{i}\t{}\t{}\t{}\t{}",
                num(s.time),
                num(s.mean[i]),
                num(s.second[i]),
                num(s.tls[i]),
                num(s.photons[i])
            );
        }
    }
    out
}

pub fn curve_tsv(curve: &OrderParameterCurve) -> String {
    let sites = curve.points.first().map_or(0, |p| p.per_site.len());
    let mut out = format!("# graph={} protocol={}\n", curve.graph_id, curve.protocol);
    out.push_str("delta_over_g\torder_parameter");
    for i in 0..sites {
        let _ = write!(out, "\tvar_{i}");
    }
    out.push('\n');
    for p in &curve.points {
        out.push_str(&num(p.delta_over_g));
        out.push('\t');
        out.push_str(&num(p.order_parameter));
        for v in &p.per_site {
            out.push('\t');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

/// Parsed data file: header names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r.get(idx)?.parse().ok()).collect()
    }
}

pub fn parse_tsv(text: &str) -> Result<Table, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or("missing header")?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row: Vec<String> = line.split('\t').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(format!("row {k} has {} fields, header has {}", row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_tsv(path: &Path) -> Result<Table, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_tsv(&text).map_err(|m| ExperimentError::Io {
        path: path.to_path_buf(),
        message: m,
    })
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}
