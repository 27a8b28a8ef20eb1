//! Single long-format CSV for plotting the curve comparison.

use std::path::Path;

use serde::Serialize;

use super::compare::{compare_halved, GapStats};
use crate::curve::Curve;
use crate::error::{Error, Result};

pub const SERIES_UNCONSTRAINED: &str = "unconstrained";
pub const SERIES_PERCEPTION: &str = "perception";
pub const SERIES_HALVED: &str = "unconstrained_halved";

/// One row of the plot file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub series: String,
    pub distortion: f64,
    pub rate_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSummary {
    pub series: Vec<String>,
    pub rows: usize,
    pub gap: Option<GapStats>,
    pub warnings: Vec<String>,
}

/// Writes `series,distortion,rate_bits` rows for the unconstrained envelope,
/// the perception envelope and the unconstrained envelope with distortion
/// doubled (the curve `D ↦ R(D/2, ∞)`).
pub fn emit_plot_data(
    unconstrained: &Curve,
    perception: &Curve,
    path: &Path,
) -> Result<PlotSummary> {
    let mut warnings = Vec::new();
    let unconstrained = unconstrained.envelope();
    let halved = unconstrained.scale_distortion(2.0, SERIES_HALVED);
    let mut series = vec![(SERIES_UNCONSTRAINED, unconstrained.clone())];
    if perception.is_empty() {
        warnings.push("perception curve is empty; plot has no perception series".to_string());
    } else {
        series.push((SERIES_PERCEPTION, perception.envelope()));
    }
    series.push((SERIES_HALVED, halved));

    let gap = if perception.is_empty() {
        None
    } else {
        match compare_halved(&unconstrained, perception) {
            Ok(g) => Some(g),
            Err(Error::EmptyOverlap) => {
                warnings.push("perception and halved curves do not overlap".to_string());
                None
            }
            Err(e) => return Err(e),
        }
    };

    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "distortion", "rate_bits"])?;
    let mut rows = 0;
    for (name, curve) in &series {
        for p in curve.points() {
            w.write_record([
                name.to_string(),
                p.distortion.to_string(),
                p.rate_bits.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(PlotSummary {
        series: series.iter().map(|(n, _)| n.to_string()).collect(),
        rows,
        gap,
        warnings,
    })
}

pub fn read_plot_data(path: &Path) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
                    Error::InvalidArgument(format!("{}: bad plot row", path.display()))
                })
            };
            Ok(PlotRow {
                series: rec.get(0).unwrap_or_default().to_string(),
                distortion: num(1)?,
                rate_bits: num(2)?,
            })
        })
        .collect()
}
