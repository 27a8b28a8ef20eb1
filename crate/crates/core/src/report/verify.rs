//! Verification battery behind the `verify` command.
//!
//! Every check is run on the configured source and on a fixed internal
//! battery of small sources. A solver error fails the affected check but
//! never stops the battery.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::compare::compare_halved;
use super::config::{Reconstruction, RunConfig};
use super::run::{compute_frontier, compute_rd_curve, compute_rdp_curve};
use crate::curve::Curve;
use crate::entropic::{check_symmetry, Coupling};
use crate::error::{Error, Result};
use crate::kernel::{ConditionalKernel, Orientation};
use crate::source::{make_source, DistortionKind, Source};
use crate::two_stage::{
    coupling_payoff, decoder_output_pmf, posterior_sampling_decoder, verify_doubling,
};

pub const ANCHOR_SYMMETRY: &str = "lemma1_symmetry";
pub const ANCHOR_DOUBLING: &str = "eq17_doubling";
pub const ANCHOR_PAYOFF: &str = "appendixB_payoff";
pub const ANCHOR_GAP: &str = "thm2_curve_gap";
pub const ANCHOR_EXACTNESS: &str = "perception_exactness";
pub const ANCHOR_SHAPE: &str = "curve_shape";

pub const VERIFY_FILE: &str = "verify.json";

/// Measured value reported for a check whose computation failed.
pub const FAILED_MEASUREMENT: f64 = f64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One named check. It passes when `measured <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub anchor: &'static str,
    pub source: String,
    pub status: Status,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn new(
        anchor: &'static str,
        name: &str,
        source: &str,
        measured: Result<(f64, String)>,
        threshold: f64,
    ) -> Self {
        let (measured, detail) = match measured {
            Ok(v) => v,
            Err(e) => (FAILED_MEASUREMENT, format!("error: {e}")),
        };
        Self {
            name: name.to_string(),
            anchor,
            source: source.to_string(),
            status: if measured <= threshold {
                Status::Pass
            } else {
                Status::Fail
            },
            measured,
            threshold,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub status: Status,
    pub checks: Vec<Check>,
    /// Solver points that stopped at their iteration cap.
    pub nonconverged: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}

/// Fault injection for negative-control tests.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyHooks {
    /// Shift mass across the diagonal of the first coupling of every sweep.
    pub corrupt_coupling: bool,
}

/// The fixed internal battery: binary uniform, skewed binary, uniform on
/// four points and `random` seeded 8-symbol scalar sources.
pub fn battery_sources(seed: u64, random: usize) -> Vec<(String, Source)> {
    let scalar = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    let mut out = vec![
        (
            "binary_uniform".to_string(),
            make_source(scalar(&[0.0, 1.0]), vec![0.5, 0.5]),
        ),
        (
            "skewed_binary".to_string(),
            make_source(scalar(&[0.0, 1.0]), vec![0.3, 0.7]),
        ),
        (
            "uniform_4".to_string(),
            make_source(scalar(&[0.0, 1.0, 2.0, 3.0]), vec![0.25; 4]),
        ),
    ];
    for k in 0..random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut xs: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        xs.sort_by(f64::total_cmp);
        let pmf: Vec<f64> = (0..8).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = pmf.iter().sum();
        out.push((
            format!("random_8_seed{}", seed.wrapping_add(k as u64)),
            make_source(scalar(&xs), pmf.into_iter().map(|p| p / total).collect()),
        ));
    }
    out.into_iter()
        .map(|(name, src)| (name, src.expect("battery sources are valid")))
        .collect()
}

/// Scales a positive matrix to the given row and column sums.
pub(crate) fn scale_to_marginals(
    mut m: Array2<f64>,
    rows: &[f64],
    cols: &[f64],
) -> Result<Array2<f64>> {
    for _ in 0..100_000 {
        for (mut r, &target) in m.rows_mut().into_iter().zip(rows) {
            let s = r.sum();
            r.mapv_inplace(|v| v * target / s);
        }
        for (mut c, &target) in m.columns_mut().into_iter().zip(cols) {
            let s = c.sum();
            c.mapv_inplace(|v| v * target / s);
        }
        let err: f64 = m
            .rows()
            .into_iter()
            .zip(rows)
            .map(|(r, &t)| (r.sum() - t).abs())
            .sum();
        if err < 1e-14 {
            return Ok(m);
        }
    }
    Err(Error::Solver("marginal scaling did not converge".into()))
}

/// Random joint law with both marginals `pmf`, almost surely asymmetric.
pub(crate) fn random_equal_marginal_coupling(pmf: &[f64], rng: &mut impl Rng) -> Result<Coupling> {
    let m = pmf.len();
    let raw = Array2::from_shape_fn((m, m), |_| rng.gen_range(0.01..1.0));
    let b = scale_to_marginals(raw, pmf, pmf)?;
    let total = b.sum();
    Coupling::new(b / total)
}

fn random_pmf(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Random decoder-oriented kernel `p(y | z)` whose pushforward of `h` is `p`.
fn random_feasible_kernel(p: &[f64], h: &[f64], rng: &mut impl Rng) -> Result<ConditionalKernel> {
    let raw = Array2::from_shape_fn((h.len(), p.len()), |_| rng.gen_range(0.01..1.0));
    let joint = scale_to_marginals(raw, h, p)?;
    let mut k = Array2::from_shape_fn(joint.dim(), |(z, y)| joint[[z, y]] / h[z]);
    for mut row in k.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    ConditionalKernel::new(k, Orientation::Decoder)
}

fn shape_violation(curves: &[&Curve]) -> (f64, String) {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for c in curves {
        let s = c.envelope().check_shape(0.0);
        worst = worst.max(s.max_violation);
        parts.push(format!(
            "{}: {} points",
            c.label(),
            c.envelope().points().len()
        ));
    }
    (worst, parts.join("; "))
}

fn verify_source(
    cfg: &RunConfig,
    name: &str,
    src: &Source,
    hooks: VerifyHooks,
    checks: &mut Vec<Check>,
    nonconverged: &mut Vec<String>,
) {
    let v = &cfg.verify;
    let rd = compute_rd_curve(cfg, src);
    let rdp = compute_rdp_curve(cfg, src);
    let frontier = compute_frontier(cfg, src);

    for curve in [rd.as_ref().ok(), rdp.as_ref().ok().map(|(c, _)| c)]
        .into_iter()
        .flatten()
    {
        for p in curve.points().iter().filter(|p| !p.converged) {
            nonconverged.push(format!(
                "{name}: {} multiplier={}",
                curve.label(),
                p.multiplier.map(|m| m.to_string()).unwrap_or_default()
            ));
        }
    }

    // symmetric optimal couplings
    let measured = rdp.as_ref().map_err(clone_err).and_then(|(_, couplings)| {
        let mut worst = 0.0f64;
        for (k, b) in couplings.iter().enumerate() {
            let b = if hooks.corrupt_coupling && k == 0 {
                corrupt(b)?
            } else {
                b.clone()
            };
            worst = worst.max(check_symmetry(&b, v.symmetry_tol)?.max_asymmetry);
        }
        Ok((worst, format!("{} couplings", couplings.len())))
    });
    checks.push(Check::new(
        ANCHOR_SYMMETRY,
        "optimal couplings are symmetric",
        name,
        measured,
        v.symmetry_tol,
    ));

    let measured = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let b = random_equal_marginal_coupling(src.pmf(), &mut rng)?;
            let r = check_symmetry(&b, v.symmetry_tol)?;
            worst = worst.max(r.symmetrized_objective_bits - r.objective_bits);
        }
        Ok((worst.max(0.0), "100 random feasible couplings".to_string()))
    })();
    checks.push(Check::new(
        ANCHOR_SYMMETRY,
        "symmetrizing never raises the objective",
        name,
        measured,
        1e-12,
    ));

    // two-stage identities over every evaluated encoder
    let measured = frontier.as_ref().map_err(clone_err).and_then(|f| {
        let mut worst = 0.0f64;
        let mut worst_ratio: Option<f64> = None;
        for e in &f.entries {
            let r = verify_doubling(src, &e.encoder)?;
            worst = worst.max(r.abs_error);
            if let Some(q) = r.ratio {
                if worst_ratio.is_none_or(|w| (q - 2.0).abs() > (w - 2.0).abs()) {
                    worst_ratio = Some(q);
                }
            }
        }
        let ratio = worst_ratio.map_or("none (all encoders lossless)".to_string(), |q| {
            q.to_string()
        });
        Ok((
            worst,
            format!(
                "{} encoders; ratio farthest from 2: {ratio}",
                f.entries.len()
            ),
        ))
    });
    checks.push(Check::new(
        ANCHOR_DOUBLING,
        "posterior MSE is twice conditional-mean MSE",
        name,
        measured,
        v.doubling_tol,
    ));

    let measured = frontier.as_ref().map_err(clone_err).and_then(|f| {
        let mut worst = 0.0f64;
        for e in &f.entries {
            let dec = posterior_sampling_decoder(src, &e.encoder)?;
            let q = decoder_output_pmf(src, &e.encoder, &dec)?;
            for (a, b) in q.iter().zip(src.pmf()) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok((worst, format!("{} encoders", f.entries.len())))
    });
    checks.push(Check::new(
        ANCHOR_EXACTNESS,
        "posterior decoder output equals source pmf",
        name,
        measured,
        v.exactness_tol,
    ));

    let measured = frontier.as_ref().map_err(clone_err).and_then(|f| {
        let g = compare_halved(&f.unconstrained, &f.perception)?;
        let informational = match (&rd, &rdp) {
            (Ok(u), Ok((p, _))) => compare_halved(u, p)
                .map(|g| format!("{:.6} bits max", g.max_gap_bits))
                .unwrap_or_else(|e| e.to_string()),
            _ => "unavailable".to_string(),
        };
        Ok((
            g.max_gap_bits,
            format!(
                "overlap [{}, {}]; informational curves (reported only): {informational}",
                g.overlap.0, g.overlap.1
            ),
        ))
    });
    checks.push(Check::new(
        ANCHOR_GAP,
        "perception frontier is the doubled unconstrained frontier",
        name,
        measured,
        v.frontier_gap_tol,
    ));

    let measured = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
        let mut worst = 0.0f64;
        for _ in 0..v.payoff_trials {
            let n = rng.gen_range(1..=src.len().min(4));
            let h = random_pmf(n, &mut rng);
            let l = random_feasible_kernel(src.pmf(), &h, &mut rng)?;
            let q = random_feasible_kernel(src.pmf(), &h, &mut rng)?;
            let f_ll = coupling_payoff(&l, &l, &h, src)?;
            let f_qq = coupling_payoff(&q, &q, &h, src)?;
            let f_lq = coupling_payoff(&l, &q, &h, src)?;
            worst = worst.max(2.0 * f_lq - f_ll - f_qq);
        }
        Ok((worst.max(0.0), format!("{} random pairs", v.payoff_trials)))
    })();
    checks.push(Check::new(
        ANCHOR_PAYOFF,
        "F(L,L) + F(Q,Q) >= 2 F(L,Q)",
        name,
        measured,
        v.payoff_tol,
    ));

    let measured = (|| {
        let rd = rd.as_ref().map_err(clone_err)?;
        let (rdp, _) = rdp.as_ref().map_err(clone_err)?;
        let f = frontier.as_ref().map_err(clone_err)?;
        Ok(shape_violation(&[rd, rdp, &f.unconstrained, &f.perception]))
    })();
    checks.push(Check::new(
        ANCHOR_SHAPE,
        "envelopes are non-increasing and convex",
        name,
        measured,
        v.shape_tol,
    ));
}

fn clone_err(e: &Error) -> Error {
    Error::Solver(e.to_string())
}

/// Moves half the mass of `b[0][1]` (or `b[0][0]` if empty) onto `b[1][0]`.
fn corrupt(b: &Coupling) -> Result<Coupling> {
    let mut m = b.matrix().clone();
    if m.nrows() < 2 {
        return Ok(b.clone());
    }
    let from = if m[[0, 1]] > 0.0 { (0, 1) } else { (0, 0) };
    let shift = 0.5 * m[from];
    m[from] -= shift;
    m[[1, 0]] += shift;
    Coupling::new(m)
}

pub fn run_verify(cfg: &RunConfig, src: &Source) -> VerificationReport {
    run_verify_with_hooks(cfg, src, VerifyHooks::default())
}

pub fn run_verify_with_hooks(
    cfg: &RunConfig,
    src: &Source,
    hooks: VerifyHooks,
) -> VerificationReport {
    let mut checks = Vec::new();
    let mut nonconverged = Vec::new();
    verify_source(
        cfg,
        "configured",
        src,
        hooks,
        &mut checks,
        &mut nonconverged,
    );
    if cfg.verify.battery {
        let mut battery_cfg = cfg.clone();
        battery_cfg.distortion = DistortionKind::SquaredError;
        battery_cfg.ba.reconstruction = Reconstruction::Source;
        battery_cfg.ba.refine_rounds = 0;
        for (name, s) in battery_sources(cfg.seed, cfg.verify.random_sources) {
            verify_source(
                &battery_cfg,
                &name,
                &s,
                hooks,
                &mut checks,
                &mut nonconverged,
            );
        }
    }
    let status = if checks.iter().all(|c| c.status == Status::Pass) {
        Status::Pass
    } else {
        Status::Fail
    };
    VerificationReport {
        status,
        checks,
        nonconverged,
    }
}

pub fn write_verify_json(report: &VerificationReport, out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let path = out.join(VERIFY_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(path)
}
