//! CSV writers and readers for curves, frontiers, sweeps and couplings.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every value bit for bit.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::curve::{Curve, Perception, RDPoint};
use crate::dal::DalSweepPoint;
use crate::entropic::Coupling;
use crate::error::{Error, Result};
use crate::two_stage::Frontier;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad {what} value {field:?}")))
}

/// Writes a curve with the multiplier column named `multiplier_name`
/// (`beta` or `lambda`).
pub fn write_curve_csv(path: &Path, curve: &Curve, multiplier_name: &str) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        multiplier_name,
        "rate_bits",
        "distortion",
        "perception",
        "iterations",
        "converged",
    ])?;
    for p in curve.points() {
        w.write_record([
            p.multiplier.map(|m| m.to_string()).unwrap_or_default(),
            p.rate_bits.to_string(),
            p.distortion.to_string(),
            p.perception.to_string(),
            p.iterations.to_string(),
            p.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path, label: &str) -> Result<Curve> {
    let mut r = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(Error::InvalidArgument(format!(
                "{}: expected 6 columns",
                path.display()
            )));
        }
        let perception = match &rec[3] {
            "unconstrained" => Perception::Unconstrained,
            v => Perception::Value(parse_f64(v, "perception")?),
        };
        points.push(RDPoint {
            multiplier: if rec[0].is_empty() {
                None
            } else {
                Some(parse_f64(&rec[0], "multiplier")?)
            },
            rate_bits: parse_f64(&rec[1], "rate")?,
            distortion: parse_f64(&rec[2], "distortion")?,
            perception,
            iterations: rec[4]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad iterations {:?}", &rec[4])))?,
            converged: rec[5] == *"true",
        });
    }
    Ok(Curve::new(label, "", points))
}

/// Writes the envelope points of one side of a frontier, tagged with the
/// encoder that produced each.
pub fn write_frontier_csv(path: &Path, frontier: &Frontier, posterior: bool) -> Result<()> {
    let (curve, tag) = if posterior {
        (&frontier.perception, "posterior")
    } else {
        (&frontier.unconstrained, "cond_mean")
    };
    let mut w = writer(path)?;
    w.write_record(["encoder_id", "rate_bits", "distortion", "decoder"])?;
    for (p, id) in curve.points().iter().zip(frontier.envelope_ids(posterior)) {
        w.write_record([
            id.to_string(),
            p.rate_bits.to_string(),
            p.distortion.to_string(),
            tag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dal_csv(path: &Path, sweep: &[DalSweepPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "lambda",
        "mse",
        "divergence",
        "objective",
        "iterations",
        "converged",
    ])?;
    for p in sweep {
        w.write_record([
            p.lambda.to_string(),
            p.mse.to_string(),
            p.divergence.to_string(),
            p.objective.to_string(),
            p.iterations.to_string(),
            p.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Coupling matrix as comma-separated rows under a `# coupling m=<m>` line.
pub fn write_coupling_csv(path: &Path, coupling: &Coupling) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    let m = coupling.matrix().nrows();
    writeln!(out, "# coupling m={m}")?;
    for row in coupling.matrix().rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_coupling_csv(path: &Path) -> Result<Coupling> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let m: usize = header
        .strip_prefix("# coupling m=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{}: missing coupling header", path.display()))
        })?;
    let mut values = Vec::with_capacity(m * m);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for v in line.split(',') {
            values.push(parse_f64(v.trim(), "coupling")?);
        }
    }
    let matrix = Array2::from_shape_vec((m, m), values).map_err(|_| {
        Error::InvalidArgument(format!("{}: coupling is not {m}x{m}", path.display()))
    })?;
    Coupling::new(matrix)
}
