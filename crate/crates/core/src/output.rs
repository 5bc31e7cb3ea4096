//! CSV and JSON emitters for samples, schedules and designs.
//!
//! Floats in CSV are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::design::TraceEntry;
use crate::error::{Error, Result};
use crate::region::Region;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn coord_header(d: usize) -> impl Iterator<Item = String> {
    (1..=d).map(|i| format!("x{i}"))
}

fn dev_header(k: usize) -> impl Iterator<Item = String> {
    (1..=k).map(|i| format!("dev{i}"))
}

/// `x1..xD, feasible, dev1..devK`, one row per point.
pub fn write_samples_csv(
    path: &Path,
    points: &Array2<f64>,
    region: &Region,
    eq_tol: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let (d, k) = (points.ncols(), region.n_constraints());
    let mut header: Vec<String> = coord_header(d).collect();
    header.push("feasible".into());
    header.extend(dev_header(k));
    w.write_record(&header)?;
    let mut dev = vec![0.0; k];
    let mut record: Vec<String> = Vec::with_capacity(d + 1 + k);
    for row in points.rows() {
        let x = row.as_slice().expect("standard layout");
        region.deviation_into(x, &mut dev)?;
        record.clear();
        record.extend(x.iter().map(|&v| fmt_f64(v)));
        record.push(region.deviation_is_feasible(&dev, eq_tol).to_string());
        record.extend(dev.iter().map(|&v| fmt_f64(v)));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the `x1..xD` columns of a samples file.
pub fn read_samples_csv(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = r.headers()?.clone();
    let cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            h.strip_prefix('x')
                .is_some_and(|n| n.parse::<usize>().is_ok())
        })
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        return Err(Error::Config(format!(
            "{}: no x1..xD columns in header",
            path.display()
        )));
    }
    let mut flat = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        for &c in &cols {
            let field = rec.get(c).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                Error::Config(format!(
                    "{}: row {}: `{field}` is not a number",
                    path.display(),
                    n + 2
                ))
            })?;
            flat.push(v);
        }
        n += 1;
    }
    Ok(Array2::from_shape_vec((n, cols.len()), flat).expect("shape"))
}

/// One emitted design point.
#[derive(Debug, Clone)]
pub struct DesignRow {
    /// Row of the samples file, or `None` for synthesized points.
    pub sample_row: Option<usize>,
    pub point: Vec<f64>,
}

/// `order, sample_row, x1..xD, feasible, dev1..devK`.
pub fn write_design_csv(
    path: &Path,
    rows: &[DesignRow],
    region: &Region,
    eq_tol: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let d = rows.first().map_or(region.dim(), |r| r.point.len());
    let k = region.n_constraints();
    let mut header = vec!["order".to_string(), "sample_row".to_string()];
    header.extend(coord_header(d));
    header.push("feasible".into());
    header.extend(dev_header(k));
    w.write_record(&header)?;
    let mut dev = vec![0.0; k];
    for (order, row) in rows.iter().enumerate() {
        region.deviation_into(&row.point, &mut dev)?;
        let mut record = vec![
            (order + 1).to_string(),
            row.sample_row.map(|r| r.to_string()).unwrap_or_default(),
        ];
        record.extend(row.point.iter().map(|&v| fmt_f64(v)));
        record.push(region.deviation_is_feasible(&dev, eq_tol).to_string());
        record.extend(dev.iter().map(|&v| fmt_f64(v)));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Contents of `design.json`.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub criterion: String,
    pub size: usize,
    pub seed: u64,
    pub metric: String,
    pub weights: Option<Vec<f64>>,
    /// Sample rows of the design points in selection order; `null` entries
    /// are synthesized points.
    pub sample_rows: Vec<Option<usize>>,
    /// Greedy trace; indices are sample rows.
    pub trace: Option<Vec<TraceEntry>>,
    /// Minimum pairwise distance under the design metric.
    pub mindist: Option<f64>,
    pub penalty_hits: usize,
    /// 1-based `order` of design points outside the region.
    pub infeasible: Vec<usize>,
    pub infeasible_count: usize,
    pub n_samples: usize,
    pub n_candidates: usize,
    pub subsampled: bool,
}

/// Contents of `comparison.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RejectionReport {
    pub n_draws: usize,
    pub rejection_accepted: usize,
    pub rejection_acceptance: f64,
    pub rejection_std_error: f64,
    pub scmc_particles: usize,
    pub scmc_feasible: usize,
    /// Particles SCMC returns per particle requested; 1 by construction.
    pub scmc_retained_fraction: f64,
    pub scmc_feasible_fraction: f64,
    pub eq_tol: f64,
}
