//! Lloyd (weighted k-means) design of an `n`-code encoder.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DeterministicEncoder;
use crate::error::{Error, Result};
use crate::info::squared_distance;
use crate::source::Source;

#[derive(Debug, Clone, PartialEq)]
pub struct LloydConfig {
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for LloydConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 1000,
            seed: 0,
        }
    }
}

/// One restart: the final assignment and the MSE after every iteration.
pub(crate) struct LloydRun {
    pub assignment: Vec<usize>,
    pub mse_trace: Vec<f64>,
}

fn centroids(src: &Source, assignment: &[usize], n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut mass = vec![0.0; n];
    for (&p, &z) in src.pmf().iter().zip(assignment) {
        mass[z] += p;
    }
    let mut means = vec![vec![0.0; src.dim()]; n];
    for ((y, &p), &z) in src.symbols().iter().zip(src.pmf()).zip(assignment) {
        let w = p / mass[z];
        for (s, v) in means[z].iter_mut().zip(y) {
            *s += w * v;
        }
    }
    (means, mass)
}

fn mse(src: &Source, assignment: &[usize], centers: &[Vec<f64>]) -> f64 {
    src.symbols()
        .iter()
        .zip(src.pmf())
        .zip(assignment)
        .map(|((y, &p), &z)| p * squared_distance(y, &centers[z]))
        .sum()
}

/// Moves the worst-fitting symbol of the costliest cell into each empty cell.
/// A symbol alone in a cell costs nothing, so this never raises the MSE.
fn repair_empty_cells(src: &Source, assignment: &mut [usize], n: usize) {
    loop {
        let (centers, mass) = centroids(src, assignment, n);
        let Some(empty) = mass.iter().position(|&w| w == 0.0) else {
            return;
        };
        let mut cost = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for ((y, &p), &z) in src.symbols().iter().zip(src.pmf()).zip(assignment.iter()) {
            cost[z] += p * squared_distance(y, &centers[z]);
            counts[z] += 1;
        }
        let donor = (0..n)
            .filter(|&z| counts[z] > 1)
            .max_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(b.cmp(&a)))
            .expect("n <= m leaves a cell with two symbols");
        let moved = (0..assignment.len())
            .filter(|&i| assignment[i] == donor)
            .max_by(|&a, &b| {
                let da = src.pmf()[a] * squared_distance(&src.symbols()[a], &centers[donor]);
                let db = src.pmf()[b] * squared_distance(&src.symbols()[b], &centers[donor]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("donor cell is non-empty");
        assignment[moved] = empty;
    }
}

pub(crate) fn lloyd_run(src: &Source, n: usize, initial: &[usize], max_iters: usize) -> LloydRun {
    let mut centers: Vec<Vec<f64>> = initial.iter().map(|&i| src.symbols()[i].clone()).collect();
    let mut assignment = vec![usize::MAX; src.len()];
    let mut mse_trace = Vec::new();
    for _ in 0..max_iters {
        let next: Vec<usize> = src
            .symbols()
            .iter()
            .enumerate()
            .map(|(i, y)| {
                // keep the current cell on ties so the iteration cannot cycle
                let mut best = assignment[i];
                let mut best_d = if best < n {
                    squared_distance(y, &centers[best])
                } else {
                    f64::INFINITY
                };
                for (z, c) in centers.iter().enumerate() {
                    let d = squared_distance(y, c);
                    if d < best_d {
                        best = z;
                        best_d = d;
                    }
                }
                best
            })
            .collect();
        let changed = next != assignment;
        assignment = next;
        repair_empty_cells(src, &mut assignment, n);
        centers = centroids(src, &assignment, n).0;
        mse_trace.push(mse(src, &assignment, &centers));
        if !changed {
            break;
        }
    }
    LloydRun {
        assignment,
        mse_trace,
    }
}

/// Best of `cfg.restarts` Lloyd runs from distinct random symbols, judged by
/// MSE under conditional-mean decoding (earliest restart wins ties).
pub fn lloyd_encoder(src: &Source, n: usize, cfg: &LloydConfig) -> Result<DeterministicEncoder> {
    let m = src.len();
    if n == 0 || n > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n <= {m}, got {n}"
        )));
    }
    if cfg.restarts == 0 || cfg.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "Lloyd needs at least one restart and iteration".into(),
        ));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
        let mut init = sample(&mut rng, m, n).into_vec();
        init.sort_unstable();
        let run = lloyd_run(src, n, &init, cfg.max_iters);
        let value = *run.mse_trace.last().expect("at least one iteration");
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, run.assignment));
        }
    }
    DeterministicEncoder::new(best.expect("at least one restart").1)
}
