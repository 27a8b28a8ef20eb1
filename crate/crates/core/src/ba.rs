//! Blahut–Arimoto computation of the classic rate-distortion function over a
//! fixed reconstruction alphabet, with optional centroid refinement of that
//! alphabet for squared-error distortion.

use ndarray::Array2;
use rayon::prelude::*;

use crate::curve::{Curve, Perception, RDPoint};
use crate::error::{Error, Result};
use crate::info::{log_sum_exp, nats_to_bits};
use crate::kernel::{ConditionalKernel, Orientation};
use crate::source::{squared_error_matrix, DistortionMatrix, Source};

#[derive(Debug, Clone, PartialEq)]
pub struct BaConfig {
    /// Max-norm change of the reconstruction marginal that counts as converged.
    pub tol: f64,
    pub max_iters: usize,
    /// Record the Blahut–Arimoto objective at every iteration.
    pub trace: bool,
}

impl Default for BaConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 100_000,
            trace: false,
        }
    }
}

/// Output of a single Blahut–Arimoto solve.
#[derive(Debug, Clone)]
pub struct BaSolution {
    pub point: RDPoint,
    /// Test channel `p(x̂ | x)`, rows indexed by source symbols.
    pub kernel: ConditionalKernel,
    /// Final reconstruction marginal.
    pub marginal: Vec<f64>,
    /// `rate + beta·distortion` in nats at the fixed point.
    pub lagrangian: f64,
    /// Objective `−Σ_i p_i ln Σ_j q_j exp(−β w_ij)` per iteration, if traced.
    pub objective_trace: Vec<f64>,
}

fn check_inputs(src: &Source, rec: &[Vec<f64>], w: &DistortionMatrix, beta: f64) -> Result<()> {
    if w.src_dim() != src.len() {
        return Err(Error::DimensionMismatch {
            expected: src.len(),
            found: w.src_dim(),
        });
    }
    if w.rec_dim() != rec.len() {
        return Err(Error::DimensionMismatch {
            expected: rec.len(),
            found: w.rec_dim(),
        });
    }
    if rec.is_empty() {
        return Err(Error::InvalidArgument(
            "empty reconstruction alphabet".into(),
        ));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be finite and >= 0, got {beta}"
        )));
    }
    Ok(())
}

/// Solves for the point of the rate-distortion curve with slope `−beta`
/// (nats per distortion unit), starting from a uniform reconstruction marginal.
pub fn ba_solve(
    src: &Source,
    rec: &[Vec<f64>],
    w: &DistortionMatrix,
    beta: f64,
    cfg: &BaConfig,
) -> Result<BaSolution> {
    ba_solve_from(src, rec, w, beta, cfg, None)
}

/// Like [`ba_solve`], optionally warm-started from a reconstruction marginal.
pub fn ba_solve_from(
    src: &Source,
    rec: &[Vec<f64>],
    w: &DistortionMatrix,
    beta: f64,
    cfg: &BaConfig,
    init: Option<&[f64]>,
) -> Result<BaSolution> {
    check_inputs(src, rec, w, beta)?;
    let p = src.pmf();
    let (m, n) = (src.len(), rec.len());

    if beta == 0.0 {
        return Ok(collapsed_solution(p, w));
    }

    let mut q: Vec<f64> = match init {
        Some(q) if q.len() == n => q.to_vec(),
        Some(q) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.len(),
            })
        }
        None => vec![1.0 / n as f64; n],
    };

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut log_kernel = Array2::<f64>::zeros((m, n));
    if let Some(done) = iterate_linear(p, w, beta, cfg, &mut q, &mut iterations, &mut trace) {
        converged = done;
    } else {
        let mut log_q: Vec<f64> = q.iter().map(|v| v.ln()).collect();
        while iterations < cfg.max_iters {
            let objective = update_kernel(p, w, beta, &log_q, &mut log_kernel);
            if cfg.trace {
                trace.push(objective);
            }
            let q_new = marginal_of(p, &log_kernel);
            let change = log_q
                .iter()
                .zip(&q_new)
                .map(|(lq, q)| (lq.exp() - q).abs())
                .fold(0.0, f64::max);
            log_q = q_new.iter().map(|q| q.ln()).collect();
            iterations += 1;
            if change <= cfg.tol {
                converged = true;
                break;
            }
        }
        q = log_q.iter().map(|v| v.exp()).collect();
    }
    let log_q: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    update_kernel(p, w, beta, &log_q, &mut log_kernel);
    let kernel = log_kernel.mapv(f64::exp);
    Ok(finish(p, w, beta, kernel, iterations, converged, trace))
}

/// Alternating updates with the row-shifted kernel `exp(−β(w_ij − min_j w_ij))`
/// exponentiated once. Kernel entries below 1e-100 and marginal entries below
/// 1e-200 are flushed to zero so that no product goes subnormal. Returns `None`, leaving `q` at the last safe iterate,
/// as soon as a row normalizer gets small enough that dropping underflowed
/// kernel entries could matter; the caller then continues in the log domain.
fn iterate_linear(
    p: &[f64],
    w: &DistortionMatrix,
    beta: f64,
    cfg: &BaConfig,
    q: &mut [f64],
    iterations: &mut usize,
    trace: &mut Vec<f64>,
) -> Option<bool> {
    const MIN_NORMALIZER: f64 = 1e-250;
    const KERNEL_FLOOR: f64 = 1e-100;
    const MARGINAL_FLOOR: f64 = 1e-200;
    let (m, n) = (p.len(), q.len());
    let mut row_min = vec![0.0; m];
    let mut kernel = vec![0.0; m * n];
    for i in 0..m {
        row_min[i] = (0..n).map(|j| w.get(i, j)).fold(f64::INFINITY, f64::min);
        for j in 0..n {
            let k = (-beta * (w.get(i, j) - row_min[i])).exp();
            kernel[i * n + j] = if k < KERNEL_FLOOR { 0.0 } else { k };
        }
    }
    let mut weight = vec![0.0; m];
    let mut q_new = vec![0.0; n];
    while *iterations < cfg.max_iters {
        for (i, row) in kernel.chunks_exact(n).enumerate() {
            let z: f64 = row.iter().zip(q.iter()).map(|(k, qj)| k * qj).sum();
            if !(z >= MIN_NORMALIZER) {
                return None;
            }
            weight[i] = p[i] / z;
        }
        if cfg.trace {
            let objective = -(0..m)
                .map(|i| p[i] * ((p[i] / weight[i]).ln() - beta * row_min[i]))
                .sum::<f64>();
            trace.push(if m > 0 { objective } else { 0.0 });
        }
        q_new.fill(0.0);
        for (row, &wi) in kernel.chunks_exact(n).zip(&weight) {
            for (acc, k) in q_new.iter_mut().zip(row) {
                *acc += wi * k;
            }
        }
        let mut change: f64 = 0.0;
        for (qj, f) in q.iter_mut().zip(&q_new) {
            let mut next = *qj * f;
            if next < MARGINAL_FLOOR {
                next = 0.0;
            }
            change = change.max((next - *qj).abs());
            *qj = next;
        }
        *iterations += 1;
        if change <= cfg.tol {
            return Some(true);
        }
    }
    Some(false)
}

/// Rate-zero endpoint: every symbol maps to the single reconstruction with
/// the lowest expected distortion (lowest index on ties).
fn collapsed_solution(p: &[f64], w: &DistortionMatrix) -> BaSolution {
    let expected: Vec<f64> = (0..w.rec_dim())
        .map(|j| p.iter().enumerate().map(|(i, pi)| pi * w.get(i, j)).sum())
        .collect();
    let best = expected
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let mut kernel = Array2::zeros((p.len(), w.rec_dim()));
    kernel.column_mut(best).fill(1.0);
    finish(p, w, 0.0, kernel, 0, true, Vec::new())
}

/// Recomputes `ln k_ij = ln q_j − β w_ij − ln Σ_j' q_j' exp(−β w_ij')` and
/// returns the objective `−Σ_i p_i ln Σ_j q_j exp(−β w_ij)` for this `q`.
fn update_kernel(
    p: &[f64],
    w: &DistortionMatrix,
    beta: f64,
    log_q: &[f64],
    log_kernel: &mut Array2<f64>,
) -> f64 {
    let mut objective = 0.0;
    for (i, mut row) in log_kernel.rows_mut().into_iter().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = log_q[j] - beta * w.get(i, j);
        }
        let norm = log_sum_exp(row.iter().copied());
        row.mapv_inplace(|v| v - norm);
        objective -= p[i] * norm;
    }
    objective
}

fn marginal_of(p: &[f64], log_kernel: &Array2<f64>) -> Vec<f64> {
    let mut q = vec![0.0; log_kernel.ncols()];
    for (row, &pi) in log_kernel.rows().into_iter().zip(p) {
        for (qj, lk) in q.iter_mut().zip(row) {
            *qj += pi * lk.exp();
        }
    }
    q
}

fn finish(
    p: &[f64],
    w: &DistortionMatrix,
    beta: f64,
    mut kernel: Array2<f64>,
    iterations: usize,
    converged: bool,
    objective_trace: Vec<f64>,
) -> BaSolution {
    // exp of normalized logs can drift from 1 by an ulp or two
    for mut row in kernel.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    let q: Vec<f64> = {
        let mut q = vec![0.0; kernel.ncols()];
        for (row, &pi) in kernel.rows().into_iter().zip(p) {
            for (qj, k) in q.iter_mut().zip(row) {
                *qj += pi * k;
            }
        }
        q
    };
    let mut rate = 0.0;
    let mut distortion = 0.0;
    for (i, row) in kernel.rows().into_iter().enumerate() {
        for (j, &k) in row.iter().enumerate() {
            let mass = p[i] * k;
            if mass > 0.0 {
                rate += mass * (k.ln() - q[j].ln());
                distortion += mass * w.get(i, j);
            }
        }
    }
    let rate = rate.max(0.0);
    let point = RDPoint {
        rate_bits: nats_to_bits(rate),
        distortion,
        perception: Perception::Unconstrained,
        multiplier: Some(beta),
        iterations,
        converged,
    };
    BaSolution {
        point,
        kernel: ConditionalKernel::new(kernel, Orientation::Encoder)
            .expect("normalized rows are stochastic"),
        marginal: q,
        lagrangian: rate + beta * distortion,
        objective_trace,
    }
}

fn check_schedule(schedule: &[f64], name: &str) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument(format!("empty {name} schedule")));
    }
    if schedule.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "{name} schedule has negative or non-finite values"
        )));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "{name} schedule must be strictly increasing"
        )));
    }
    Ok(())
}

/// One Blahut–Arimoto point per `beta`, solved in parallel and assembled in
/// schedule order.
pub fn rd_curve_unconstrained(
    src: &Source,
    rec: &[Vec<f64>],
    w: &DistortionMatrix,
    beta_schedule: &[f64],
    cfg: &BaConfig,
) -> Result<Curve> {
    check_schedule(beta_schedule, "beta")?;
    let points = beta_schedule
        .par_iter()
        .map(|&beta| ba_solve(src, rec, w, beta, cfg).map(|s| s.point))
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve::new("rd_unconstrained", src.fingerprint(), points))
}

/// Conditional mean `Σ_y p(y|z)·y` of every code with positive mass.
///
/// Codes that receive no probability mass have no centroid and are dropped.
pub fn centroid_refine(src: &Source, encoder: &ConditionalKernel) -> Result<Vec<Vec<f64>>> {
    if encoder.rows() != src.len() {
        return Err(Error::DimensionMismatch {
            expected: src.len(),
            found: encoder.rows(),
        });
    }
    let mut centroids = Vec::with_capacity(encoder.cols());
    for j in 0..encoder.cols() {
        let mut mass = 0.0;
        let mut acc = vec![0.0; src.dim()];
        for (i, (x, &p)) in src.symbols().iter().zip(src.pmf()).enumerate() {
            let wgt = p * encoder.get(i, j);
            mass += wgt;
            for (a, v) in acc.iter_mut().zip(x) {
                *a += wgt * v;
            }
        }
        if mass > 0.0 {
            centroids.push(acc.into_iter().map(|a| a / mass).collect());
        }
    }
    Ok(centroids)
}

/// Result of alternating Blahut–Arimoto with centroid refinement.
#[derive(Debug, Clone)]
pub struct RefinedSolution {
    pub solution: BaSolution,
    pub alphabet: Vec<Vec<f64>>,
    /// Expected squared error after each Blahut–Arimoto solve (round 0 first).
    pub distortion_by_round: Vec<f64>,
    /// `rate + beta·distortion` in nats after each solve.
    pub lagrangian_by_round: Vec<f64>,
}

/// Blahut–Arimoto under squared error, followed by `rounds` passes that
/// replace the reconstruction alphabet with the conditional means of the
/// current test channel and re-solve, warm-started from the current marginal.
pub fn ba_solve_refined(
    src: &Source,
    initial_alphabet: &[Vec<f64>],
    beta: f64,
    rounds: usize,
    cfg: &BaConfig,
) -> Result<RefinedSolution> {
    let mut alphabet = initial_alphabet.to_vec();
    let w = squared_error_matrix(src.symbols(), &alphabet)?;
    let mut solution = ba_solve(src, &alphabet, &w, beta, cfg)?;
    let mut distortion_by_round = vec![solution.point.distortion];
    let mut lagrangian_by_round = vec![solution.lagrangian];
    let mut iterations = solution.point.iterations;
    for _ in 0..rounds {
        if beta == 0.0 {
            break;
        }
        let keep: Vec<usize> = (0..solution.marginal.len())
            .filter(|&j| solution.marginal[j] > 0.0)
            .collect();
        let centroids = centroid_refine(src, &solution.kernel)?;
        debug_assert_eq!(centroids.len(), keep.len());
        let init: Vec<f64> = keep.iter().map(|&j| solution.marginal[j]).collect();
        let total: f64 = init.iter().sum();
        let init: Vec<f64> = init.into_iter().map(|q| q / total).collect();
        let w = squared_error_matrix(src.symbols(), &centroids)?;
        let next = ba_solve_from(src, &centroids, &w, beta, cfg, Some(&init))?;
        iterations += next.point.iterations;
        alphabet = centroids;
        solution = next;
        distortion_by_round.push(solution.point.distortion);
        lagrangian_by_round.push(solution.lagrangian);
    }
    solution.point.iterations = iterations;
    Ok(RefinedSolution {
        solution,
        alphabet,
        distortion_by_round,
        lagrangian_by_round,
    })
}

/// Uniform grid of `points` reconstruction values spanning the source's
/// bounding box in every coordinate (scalar sources: the symbol range).
pub fn uniform_grid(src: &Source, points: usize) -> Result<Vec<Vec<f64>>> {
    if src.dim() != 1 {
        return Err(Error::InvalidArgument(
            "uniform reconstruction grids are only built for scalar sources".into(),
        ));
    }
    let (lo, hi) = src
        .symbols()
        .iter()
        .map(|x| x[0])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if points < 2 || lo == hi {
        return Ok(vec![vec![lo]]);
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|k| vec![lo + (hi - lo) * k as f64 / last])
        .collect())
}

/// Curve traced with [`ba_solve_refined`] at every `beta`.
pub fn rd_curve_refined(
    src: &Source,
    initial_alphabet: &[Vec<f64>],
    beta_schedule: &[f64],
    rounds: usize,
    cfg: &BaConfig,
) -> Result<Curve> {
    check_schedule(beta_schedule, "beta")?;
    let points = beta_schedule
        .par_iter()
        .map(|&beta| {
            ba_solve_refined(src, initial_alphabet, beta, rounds, cfg).map(|s| s.solution.point)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve::new("rd_unconstrained", src.fingerprint(), points))
}

pub(crate) fn validate_schedule(schedule: &[f64], name: &str) -> Result<()> {
    check_schedule(schedule, name)
}
