//! Decoder-side distortion plus divergence baseline.
//!
//! For a fixed deterministic encoder, a stochastic decoder `r(· | z)` over the
//! source alphabet is chosen to minimize
//! `E‖Y − Ŷ‖² / t + λ · d(p_Y, p_Ŷ)`.
//! Total variation makes this a linear program, solved exactly. The smoothed
//! KL divergence is convex in the decoder and handled by entropic mirror
//! descent on each row with step halving.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::squared_distance;
use crate::kernel::{ConditionalKernel, Orientation};
use crate::source::Source;
use crate::two_stage::{decoder_output_pmf, expected_mse, Decoder, DeterministicEncoder};

/// Divergence between the source and output distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Divergence {
    /// `½ Σ |p − q|`.
    TotalVariation,
    /// `KL(p_ε ‖ q_ε)` with `x_ε = (1 − ε) x + ε / m`.
    SmoothedKl { epsilon: f64 },
}

impl Divergence {
    pub fn evaluate(&self, p: &[f64], q: &[f64]) -> f64 {
        match *self {
            Divergence::TotalVariation => {
                0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
            }
            Divergence::SmoothedKl { epsilon } => {
                let u = epsilon / p.len() as f64;
                p.iter()
                    .zip(q)
                    .map(|(&a, &b)| {
                        let (a, b) = ((1.0 - epsilon) * a + u, (1.0 - epsilon) * b + u);
                        a * (a / b).ln()
                    })
                    .sum::<f64>()
                    .max(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DalConfig {
    pub lambda: f64,
    pub divergence: Divergence,
    /// Initial mirror-descent step, divided by the largest initial gradient entry.
    pub step0: f64,
    pub max_iters: usize,
    /// Frank–Wolfe gap at which mirror descent stops; bounds the suboptimality.
    pub tolerance: f64,
}

impl Default for DalConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            divergence: Divergence::TotalVariation,
            step0: 0.5,
            max_iters: 100_000,
            tolerance: 1e-9,
        }
    }
}

impl DalConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if let Divergence::SmoothedKl { epsilon } = self.divergence {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "KL smoothing must lie in (0, 1), got {epsilon}"
                )));
            }
        }
        if !(self.step0 > 0.0) || !(self.tolerance > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "step0, tolerance and max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Exact evaluation of an optimized decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DalOutcome {
    pub mse: f64,
    pub divergence: f64,
    /// `mse + λ · divergence`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every accepted iterate.
    pub objective_trace: Vec<f64>,
}

/// One row of a λ sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DalSweepPoint {
    pub lambda: f64,
    pub mse: f64,
    pub divergence: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `c[z][j] = Σ_{y: E(y)=z} p(y) ‖y − s_j‖² / t`, the distortion of emitting
/// symbol `j` for code `z`, weighted by the code's mass.
fn cost_matrix(src: &Source, enc: &DeterministicEncoder) -> Array2<f64> {
    let mut c = Array2::zeros((enc.code_count(), src.len()));
    let t = src.block_len() as f64;
    for (i, (y, &p)) in src.symbols().iter().zip(src.pmf()).enumerate() {
        let z = enc.code_of(i);
        for (j, s) in src.symbols().iter().enumerate() {
            c[[z, j]] += p * squared_distance(y, s) / t;
        }
    }
    c
}

fn tv_linear_program(c: &Array2<f64>, h: &[f64], p: &[f64], lambda: f64) -> Result<Array2<f64>> {
    let (n, m) = c.dim();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let r: Vec<Vec<_>> = (0..n)
        .map(|z| (0..m).map(|j| lp.add_var(c[[z, j]], (0.0, 1.0))).collect())
        .collect();
    // e_j ≥ |q_j − p_j|, weighted by λ/2 in the objective
    let e: Vec<_> = (0..m)
        .map(|_| lp.add_var(0.5 * lambda, (0.0, f64::INFINITY)))
        .collect();
    for row in &r {
        lp.add_constraint(
            row.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Eq,
            1.0,
        );
    }
    for j in 0..m {
        let q: Vec<_> = (0..n).map(|z| (r[z][j], h[z])).collect();
        let mut above = q.clone();
        above.push((e[j], -1.0));
        lp.add_constraint(above, ComparisonOp::Le, p[j]);
        let mut below = q;
        below.push((e[j], 1.0));
        lp.add_constraint(below, ComparisonOp::Ge, p[j]);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Solver(format!("decoder LP: {e}")))?;
    Ok(Array2::from_shape_fn((n, m), |(z, j)| sol[r[z][j]]))
}

fn kl_objective(
    c: &Array2<f64>,
    h: &[f64],
    p: &[f64],
    r: &Array2<f64>,
    lambda: f64,
    div: &Divergence,
) -> f64 {
    let q = output_pmf(h, r);
    (c * r).sum() + lambda * div.evaluate(p, &q)
}

fn output_pmf(h: &[f64], r: &Array2<f64>) -> Vec<f64> {
    let mut q = vec![0.0; r.ncols()];
    for (row, &hz) in r.rows().into_iter().zip(h) {
        for (qj, v) in q.iter_mut().zip(row) {
            *qj += hz * v;
        }
    }
    q
}

fn kl_gradient(
    c: &Array2<f64>,
    h: &[f64],
    p: &[f64],
    r: &Array2<f64>,
    lambda: f64,
    epsilon: f64,
) -> Array2<f64> {
    let m = p.len();
    let u = epsilon / m as f64;
    let q = output_pmf(h, r);
    let dq: Vec<f64> = p
        .iter()
        .zip(&q)
        .map(|(&a, &b)| -(1.0 - epsilon) * ((1.0 - epsilon) * a + u) / ((1.0 - epsilon) * b + u))
        .collect();
    Array2::from_shape_fn(c.dim(), |(z, j)| c[[z, j]] + lambda * h[z] * dq[j])
}

/// `Σ_z (⟨g_z, r_z⟩ − min_j g_zj)`, an upper bound on suboptimality.
fn frank_wolfe_gap(g: &Array2<f64>, r: &Array2<f64>) -> f64 {
    g.rows()
        .into_iter()
        .zip(r.rows())
        .map(|(gz, rz)| {
            let lin: f64 = gz.iter().zip(rz).map(|(a, b)| a * b).sum();
            lin - gz.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        .max(0.0)
}

fn mirror_step(r: &Array2<f64>, g: &Array2<f64>, eta: f64) -> Array2<f64> {
    let mut next = r.clone();
    for (mut row, grow) in next.rows_mut().into_iter().zip(g.rows()) {
        let shift = grow.iter().copied().fold(f64::INFINITY, f64::min);
        for (v, gv) in row.iter_mut().zip(grow) {
            *v *= (-eta * (gv - shift)).exp();
        }
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    next
}

const FLAT_STEP_LIMIT: usize = 50;

struct MirrorResult {
    rows: Array2<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn kl_mirror_descent(
    c: &Array2<f64>,
    h: &[f64],
    p: &[f64],
    cfg: &DalConfig,
    epsilon: f64,
) -> MirrorResult {
    let (n, m) = c.dim();
    let mut r = Array2::from_elem((n, m), 1.0 / m as f64);
    let mut value = kl_objective(c, h, p, &r, cfg.lambda, &cfg.divergence);
    let g0 = kl_gradient(c, h, p, &r, cfg.lambda, epsilon);
    let scale = g0
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut eta = cfg.step0 / scale;
    let mut trace = vec![value];
    let mut iterations = 0;
    let mut converged = false;
    let mut flat_steps = 0;
    while iterations < cfg.max_iters {
        let g = kl_gradient(c, h, p, &r, cfg.lambda, epsilon);
        if frank_wolfe_gap(&g, &r) <= cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = mirror_step(&r, &g, eta);
            let v = kl_objective(c, h, p, &cand, cfg.lambda, &cfg.divergence);
            if v <= value {
                flat_steps = if v < value { 0 } else { flat_steps + 1 };
                r = cand;
                value = v;
                accepted = true;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // no descent at any representable step: stationary to machine precision
            break;
        }
        trace.push(value);
        if flat_steps >= FLAT_STEP_LIMIT {
            // the objective no longer resolves the remaining gap in f64
            converged = true;
            break;
        }
    }
    MirrorResult {
        rows: r,
        iterations,
        converged,
        trace,
    }
}

fn stochastic_rows(mut rows: Array2<f64>) -> Result<ConditionalKernel> {
    for mut row in rows.rows_mut() {
        row.mapv_inplace(|v| v.max(0.0));
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    ConditionalKernel::new(rows, Orientation::Decoder)
}

/// Optimizes a stochastic decoder for `enc` and evaluates it exactly.
pub fn dal_optimize_decoder(
    src: &Source,
    enc: &DeterministicEncoder,
    cfg: &DalConfig,
) -> Result<(Decoder, DalOutcome)> {
    cfg.validate()?;
    if enc.symbol_count() != src.len() {
        return Err(Error::DimensionMismatch {
            expected: src.len(),
            found: enc.symbol_count(),
        });
    }
    let h = enc.code_pmf(src.pmf());
    let c = cost_matrix(src, enc);
    let (rows, iterations, converged, mut trace) = match cfg.divergence {
        Divergence::TotalVariation => (
            tv_linear_program(&c, &h, src.pmf(), cfg.lambda)?,
            1,
            true,
            Vec::new(),
        ),
        Divergence::SmoothedKl { epsilon } => {
            let res = kl_mirror_descent(&c, &h, src.pmf(), cfg, epsilon);
            (res.rows, res.iterations, res.converged, res.trace)
        }
    };
    let dec = Decoder::Stochastic(stochastic_rows(rows)?);
    let mse = expected_mse(src, enc, &dec)?;
    let divergence = cfg
        .divergence
        .evaluate(src.pmf(), &decoder_output_pmf(src, enc, &dec)?);
    let objective = mse + cfg.lambda * divergence;
    if trace.is_empty() {
        trace.push(objective);
    }
    Ok((
        dec,
        DalOutcome {
            mse,
            divergence,
            objective,
            iterations,
            converged,
            objective_trace: trace,
        },
    ))
}

/// One optimized decoder per λ (`lambdas` non-negative and increasing).
pub fn dal_sweep(
    src: &Source,
    enc: &DeterministicEncoder,
    lambdas: &[f64],
    cfg: &DalConfig,
) -> Result<Vec<DalSweepPoint>> {
    crate::ba::validate_schedule(lambdas, "lambda")?;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let cfg = DalConfig {
                lambda,
                ..cfg.clone()
            };
            let (_, o) = dal_optimize_decoder(src, enc, &cfg)?;
            Ok(DalSweepPoint {
                lambda,
                mse: o.mse,
                divergence: o.divergence,
                objective: o.objective,
                iterations: o.iterations,
                converged: o.converged,
            })
        })
        .collect()
}
