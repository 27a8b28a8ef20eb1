//! Config-driven computations and the files they write.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::export::{
    read_curve_csv, write_coupling_csv, write_curve_csv, write_dal_csv, write_frontier_csv,
};
use super::plot::{emit_plot_data, PlotSummary};
use crate::ba::{rd_curve_refined, rd_curve_unconstrained};
use crate::curve::Curve;
use crate::dal::{dal_sweep, DalSweepPoint};
use crate::entropic::{rdp_sweep, Coupling};
use crate::error::Result;
use crate::source::{DistortionKind, Source};
use crate::two_stage::{lloyd_encoder, operational_frontier, Frontier};

pub const RD_FILE: &str = "rd_unconstrained.csv";
pub const RDP_FILE: &str = "rdp_perfect.csv";
pub const FRONTIER_COND_MEAN_FILE: &str = "frontier_cond_mean.csv";
pub const FRONTIER_POSTERIOR_FILE: &str = "frontier_posterior.csv";
pub const DAL_FILE: &str = "dal_sweep.csv";
pub const PLOT_FILE: &str = "plot_data.csv";
pub const PLOT_SUMMARY_FILE: &str = "plot_summary.json";

/// Files written by a command and any solver points that hit their cap.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunOutputs {
    pub files: Vec<PathBuf>,
    /// One entry per non-converged point, e.g. `rd_unconstrained beta=0.5`.
    pub nonconverged: Vec<String>,
}

impl RunOutputs {
    fn merge(&mut self, other: RunOutputs) {
        self.files.extend(other.files);
        self.nonconverged.extend(other.nonconverged);
    }

    fn note_curve(&mut self, curve: &Curve, multiplier: &str) {
        for p in curve.points().iter().filter(|p| !p.converged) {
            let m = p.multiplier.map(|v| v.to_string()).unwrap_or_default();
            self.nonconverged
                .push(format!("{} {multiplier}={m}", curve.label()));
        }
    }
}

/// Unconstrained curve as configured (refined when `refine_rounds > 0`).
pub fn compute_rd_curve(cfg: &RunConfig, src: &Source) -> Result<Curve> {
    let alphabet = cfg.ba.alphabet(src)?;
    let betas = cfg.ba.beta.values();
    if cfg.ba.refine_rounds > 0 && cfg.distortion == DistortionKind::SquaredError {
        rd_curve_refined(
            src,
            &alphabet,
            &betas,
            cfg.ba.refine_rounds,
            &cfg.ba.solver(),
        )
    } else {
        let w = cfg.distortion.matrix(src.symbols(), &alphabet)?;
        rd_curve_unconstrained(src, &alphabet, &w, &betas, &cfg.ba.solver())
    }
}

pub fn compute_rdp_curve(cfg: &RunConfig, src: &Source) -> Result<(Curve, Vec<Coupling>)> {
    let w = cfg.distortion.matrix(src.symbols(), src.symbols())?;
    rdp_sweep(
        src,
        &w,
        &cfg.entropic.lambda.values(),
        &cfg.entropic.solver(),
    )
}

pub fn compute_frontier(cfg: &RunConfig, src: &Source) -> Result<Frontier> {
    operational_frontier(
        src,
        cfg.two_stage.max_codewords,
        &cfg.two_stage.frontier(cfg.seed),
    )
}

/// λ sweep for the Lloyd encoder with `dal.codewords` codes; also returns
/// that encoder's conditional-mean MSE.
pub fn compute_dal(cfg: &RunConfig, src: &Source) -> Result<(Vec<DalSweepPoint>, f64)> {
    let n = cfg.dal.codewords.min(src.len());
    let enc = lloyd_encoder(src, n, &cfg.two_stage.lloyd(cfg.seed))?;
    let d1 = crate::two_stage::verify_doubling(src, &enc)?.d1;
    Ok((
        dal_sweep(src, &enc, &cfg.dal.lambda.values(), &cfg.dal.solver())?,
        d1,
    ))
}

pub fn run_rd_curve(cfg: &RunConfig, src: &Source, out: &Path) -> Result<RunOutputs> {
    let curve = compute_rd_curve(cfg, src)?;
    let path = out.join(RD_FILE);
    write_curve_csv(&path, &curve, "beta")?;
    let mut outputs = RunOutputs {
        files: vec![path],
        ..RunOutputs::default()
    };
    outputs.note_curve(&curve, "beta");
    Ok(outputs)
}

pub fn run_rdp_curve(cfg: &RunConfig, src: &Source, out: &Path) -> Result<RunOutputs> {
    let (curve, couplings) = compute_rdp_curve(cfg, src)?;
    let path = out.join(RDP_FILE);
    write_curve_csv(&path, &curve, "lambda")?;
    let mut outputs = RunOutputs {
        files: vec![path],
        ..RunOutputs::default()
    };
    if cfg.entropic.dump_couplings {
        for (k, b) in couplings.iter().enumerate() {
            let path = out.join("couplings").join(format!("coupling_{k:03}.csv"));
            write_coupling_csv(&path, b)?;
            outputs.files.push(path);
        }
    }
    outputs.note_curve(&curve, "lambda");
    Ok(outputs)
}

pub fn run_two_stage(cfg: &RunConfig, src: &Source, out: &Path) -> Result<RunOutputs> {
    let frontier = compute_frontier(cfg, src)?;
    let cond = out.join(FRONTIER_COND_MEAN_FILE);
    let post = out.join(FRONTIER_POSTERIOR_FILE);
    write_frontier_csv(&cond, &frontier, false)?;
    write_frontier_csv(&post, &frontier, true)?;
    Ok(RunOutputs {
        files: vec![cond, post],
        ..RunOutputs::default()
    })
}

pub fn run_dal(cfg: &RunConfig, src: &Source, out: &Path) -> Result<RunOutputs> {
    let (sweep, _) = compute_dal(cfg, src)?;
    let path = out.join(DAL_FILE);
    write_dal_csv(&path, &sweep)?;
    let nonconverged = sweep
        .iter()
        .filter(|p| !p.converged)
        .map(|p| format!("dal_sweep lambda={}", p.lambda))
        .collect();
    Ok(RunOutputs {
        files: vec![path],
        nonconverged,
    })
}

/// Both information curves, plus both frontiers when two-stage is enabled.
pub fn run_curves(cfg: &RunConfig, src: &Source, out: &Path) -> Result<RunOutputs> {
    let mut outputs = run_rd_curve(cfg, src, out)?;
    outputs.merge(run_rdp_curve(cfg, src, out)?);
    if cfg.two_stage.enabled {
        outputs.merge(run_two_stage(cfg, src, out)?);
    }
    Ok(outputs)
}

/// Plot data from the curve files in `out`, computing any that are missing.
pub fn run_plot_data(
    cfg: &RunConfig,
    src: &Source,
    out: &Path,
) -> Result<(RunOutputs, PlotSummary)> {
    let mut outputs = RunOutputs::default();
    let rd_path = out.join(RD_FILE);
    if !rd_path.exists() {
        outputs.merge(run_rd_curve(cfg, src, out)?);
    }
    let rdp_path = out.join(RDP_FILE);
    if !rdp_path.exists() {
        outputs.merge(run_rdp_curve(cfg, src, out)?);
    }
    let unconstrained = read_curve_csv(&rd_path, "rd_unconstrained")?;
    let perception = read_curve_csv(&rdp_path, "rdp_perfect")?;
    let plot = out.join(PLOT_FILE);
    let summary = emit_plot_data(&unconstrained, &perception, &plot)?;
    let summary_path = out.join(PLOT_SUMMARY_FILE);
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    outputs.files.push(plot);
    outputs.files.push(summary_path);
    Ok((outputs, summary))
}
