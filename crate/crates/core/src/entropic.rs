//! Rate-distortion under a perfect-perception constraint.
//!
//! With the reconstruction distribution pinned to the source distribution the
//! test channel is a joint distribution matrix `B` whose row and column sums
//! both equal the source pmf, and the mutual information reduces to
//! `2 H(X) + Σ b_ij ln b_ij`. Minimizing that plus `λ ⟨W, B⟩` gives
//! `b_ij = u_i exp(−λ w_ij) u_j`, with a single scaling vector when `W` is
//! symmetric. The scaling is found by a damped symmetric Sinkhorn iteration
//! in the log domain.

use ndarray::Array2;

use crate::ba::validate_schedule;
use crate::curve::{Curve, Perception, RDPoint};
use crate::error::{Error, Result};
use crate::info::{entropy_nats, log_sum_exp, nats_to_bits, xlogx};
use crate::source::{DistortionMatrix, Source};

const MASS_TOL: f64 = 1e-12;

/// Joint distribution matrix of (X, X̂) with cached marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    matrix: Array2<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl Coupling {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        if matrix.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidArgument(
                "coupling entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = matrix.sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!(
                "coupling mass {total} is not 1"
            )));
        }
        let rows = matrix.rows().into_iter().map(|r| r.sum()).collect();
        let cols = matrix.columns().into_iter().map(|c| c.sum()).collect();
        Ok(Self { matrix, rows, cols })
    }

    /// Independent coupling `p pᵀ`.
    pub fn independent(pmf: &[f64]) -> Result<Self> {
        Self::new(Array2::from_shape_fn((pmf.len(), pmf.len()), |(i, j)| {
            pmf[i] * pmf[j]
        }))
    }

    /// Diagonal coupling `diag(p)`, i.e. X̂ = X.
    pub fn diagonal(pmf: &[f64]) -> Result<Self> {
        Self::new(Array2::from_diag(&ndarray::arr1(pmf)))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.rows
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.cols
    }

    pub fn is_square(&self) -> bool {
        self.matrix.is_square()
    }

    /// `⟨W, B⟩`.
    pub fn expected_distortion(&self, w: &DistortionMatrix) -> f64 {
        self.matrix
            .indexed_iter()
            .map(|((i, j), b)| b * w.get(i, j))
            .sum()
    }

    /// Largest L1 distance between either marginal and `pmf`.
    pub fn marginal_error(&self, pmf: &[f64]) -> f64 {
        let l1 = |m: &[f64]| m.iter().zip(pmf).map(|(a, b)| (a - b).abs()).sum::<f64>();
        l1(&self.rows).max(l1(&self.cols))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropicConfig {
    /// L1 tolerance on both marginals.
    pub marginal_tol: f64,
    pub max_iters: usize,
}

impl Default for EntropicConfig {
    fn default() -> Self {
        Self {
            marginal_tol: 1e-10,
            max_iters: 100_000,
        }
    }
}

/// Coupling plus the solver state that produced it.
#[derive(Debug, Clone)]
pub struct EntropicSolution {
    pub coupling: Coupling,
    /// Log scaling vector `ln u`; reusable as a warm start.
    pub potential: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_error: f64,
}

/// Minimizer of `I(X;X̂) + λ⟨W,B⟩` over couplings with both marginals equal to `pmf`.
pub fn entropic_coupling(
    w: &DistortionMatrix,
    pmf: &[f64],
    lambda: f64,
    cfg: &EntropicConfig,
) -> Result<Coupling> {
    Ok(entropic_solve(w, pmf, lambda, cfg, None)?.coupling)
}

/// Full solver entry point, optionally warm-started from a previous potential.
pub fn entropic_solve(
    w: &DistortionMatrix,
    pmf: &[f64],
    lambda: f64,
    cfg: &EntropicConfig,
    warm: Option<&[f64]>,
) -> Result<EntropicSolution> {
    if !w.values().is_square() {
        return Err(Error::InvalidArgument(
            "distortion matrix must be square".into(),
        ));
    }
    if !w.is_symmetric() {
        return Err(Error::InvalidArgument(
            "distortion matrix must be symmetric".into(),
        ));
    }
    let m = pmf.len();
    if w.src_dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: w.src_dim(),
        });
    }
    if pmf.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidArgument(
            "pmf must be strictly positive".into(),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }

    let log_p: Vec<f64> = pmf.iter().map(|p| p.ln()).collect();
    let mut f: Vec<f64> = match warm {
        Some(f0) if f0.len() == m => f0.to_vec(),
        Some(f0) => {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: f0.len(),
            })
        }
        None => log_p.iter().map(|lp| 0.5 * lp).collect(),
    };

    // Stop a little inside the tolerance so the final mass normalization
    // cannot push the reported error over it.
    let target = 0.25 * cfg.marginal_tol;
    let mut log_row_sum = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    loop {
        for i in 0..m {
            let lse = log_sum_exp((0..m).map(|j| f[j] - lambda * w.get(i, j)));
            log_row_sum[i] = f[i] + lse;
        }
        let err: f64 = log_row_sum
            .iter()
            .zip(pmf)
            .map(|(lr, p)| (lr.exp() - p).abs())
            .sum();
        if err <= target {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        // geometric-mean damping of u ← p / (K u)
        for i in 0..m {
            f[i] += 0.5 * (log_p[i] - log_row_sum[i]);
        }
        iterations += 1;
    }

    let mut b = Array2::from_shape_fn((m, m), |(i, j)| (f[i] + f[j] - lambda * w.get(i, j)).exp());
    let total = b.sum();
    b.mapv_inplace(|v| v / total);
    let coupling = Coupling::new(b)?;
    let marginal_error = coupling.marginal_error(pmf);
    Ok(EntropicSolution {
        coupling,
        potential: f,
        iterations,
        converged: converged && marginal_error <= cfg.marginal_tol,
        marginal_error,
    })
}

/// `I(X;X̂)` of a coupling in bits, computed against its own marginals.
pub fn mutual_information_bits(b: &Coupling) -> f64 {
    let (rows, cols) = (b.row_marginal(), b.col_marginal());
    let mut mi = 0.0;
    for ((i, j), &v) in b.matrix().indexed_iter() {
        if v > 0.0 {
            mi += v * (v / (rows[i] * cols[j])).ln();
        }
    }
    nats_to_bits(mi)
}

/// `2 H(p) + Σ b ln b` in bits: the mutual information of a coupling whose
/// marginals both equal `pmf`.
pub fn equal_marginal_objective_bits(b: &Coupling, pmf: &[f64]) -> f64 {
    let neg_joint: f64 = b.matrix().iter().map(|&v| xlogx(v)).sum();
    nats_to_bits(2.0 * entropy_nats(pmf) + neg_joint)
}

/// Tolerance on marginal agreement accepted by [`rdp_point`].
pub const RDP_MARGINAL_TOL: f64 = 1e-8;

/// Rate, distortion and (zero) perception of a perfect-perception coupling.
pub fn rdp_point(b: &Coupling, pmf: &[f64], w: &DistortionMatrix) -> Result<RDPoint> {
    if b.row_marginal().len() != pmf.len() || b.col_marginal().len() != pmf.len() {
        return Err(Error::DimensionMismatch {
            expected: pmf.len(),
            found: b.row_marginal().len(),
        });
    }
    let error = b.marginal_error(pmf);
    if error > RDP_MARGINAL_TOL {
        return Err(Error::MarginalMismatch {
            error,
            tolerance: RDP_MARGINAL_TOL,
        });
    }
    let mut rate = equal_marginal_objective_bits(b, pmf);
    if (-1e-9..0.0).contains(&rate) {
        rate = 0.0;
    }
    Ok(RDPoint::new(
        rate,
        b.expected_distortion(w),
        Perception::Value(0.0),
    ))
}

/// Perfect-perception curve for `src`, one point per `lambda`, each solve
/// warm-started from the previous one.
pub fn rdp_curve_perfect_perception(
    src: &Source,
    w: &DistortionMatrix,
    lambda_schedule: &[f64],
    cfg: &EntropicConfig,
) -> Result<Curve> {
    Ok(rdp_sweep(src, w, lambda_schedule, cfg)?.0)
}

/// Like [`rdp_curve_perfect_perception`], also returning the coupling behind
/// every point in schedule order.
pub fn rdp_sweep(
    src: &Source,
    w: &DistortionMatrix,
    lambda_schedule: &[f64],
    cfg: &EntropicConfig,
) -> Result<(Curve, Vec<Coupling>)> {
    validate_schedule(lambda_schedule, "lambda")?;
    let mut warm: Option<Vec<f64>> = None;
    let mut points = Vec::with_capacity(lambda_schedule.len());
    let mut couplings = Vec::with_capacity(lambda_schedule.len());
    for &lambda in lambda_schedule {
        let sol = entropic_solve(w, src.pmf(), lambda, cfg, warm.as_deref())?;
        let mut point = rdp_point(&sol.coupling, src.pmf(), w)?;
        point.multiplier = Some(lambda);
        point.iterations = sol.iterations;
        point.converged = sol.converged;
        points.push(point);
        couplings.push(sol.coupling);
        warm = Some(sol.potential);
    }
    Ok((
        Curve::new("rdp_perfect", src.fingerprint(), points),
        couplings,
    ))
}

/// Symmetry check for an optimal perfect-perception coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    pub max_asymmetry: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Objective `2H + Σ b log b` (bits) of the coupling as given.
    pub objective_bits: f64,
    /// Same objective for `(B + Bᵀ)/2`.
    pub symmetrized_objective_bits: f64,
    /// Whether symmetrizing did not increase the objective (1e-12 slack).
    pub symmetrization_not_worse: bool,
}

pub fn check_symmetry(b: &Coupling, tol: f64) -> Result<SymmetryReport> {
    if !b.is_square() {
        return Err(Error::InvalidArgument(
            "symmetry check needs a square coupling".into(),
        ));
    }
    let mat = b.matrix();
    let max_asymmetry = mat
        .indexed_iter()
        .map(|((i, j), v)| (v - mat[[j, i]]).abs())
        .fold(0.0, f64::max);
    let sym = Array2::from_shape_fn(mat.dim(), |(i, j)| 0.5 * (mat[[i, j]] + mat[[j, i]]));
    let pmf = b.row_marginal().to_vec();
    let objective_bits = equal_marginal_objective_bits(b, &pmf);
    let neg_joint: f64 = sym.iter().map(|&v| xlogx(v)).sum();
    let symmetrized_objective_bits = nats_to_bits(2.0 * entropy_nats(&pmf) + neg_joint);
    Ok(SymmetryReport {
        max_asymmetry,
        tolerance: tol,
        passed: max_asymmetry <= tol,
        objective_bits,
        symmetrized_objective_bits,
        symmetrization_not_worse: symmetrized_objective_bits <= objective_bits + 1e-12,
    })
}

/// Log-spaced schedule `[0] ∪ {lo·(hi/lo)^(k/(count−1))}`.
pub fn log_spaced(lo: f64, hi: f64, count: usize, include_zero: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(count + 1);
    if include_zero {
        out.push(0.0);
    }
    if count == 1 {
        out.push(lo);
    } else {
        let ratio = (hi / lo).ln();
        out.extend((0..count).map(|k| lo * (ratio * k as f64 / (count - 1) as f64).exp()));
    }
    out
}

/// Default multiplier schedule: 60 log-spaced values in `[1e-3, 1e3]` plus 0.
pub fn default_lambda_schedule() -> Vec<f64> {
    log_spaced(1e-3, 1e3, 60, true)
}
