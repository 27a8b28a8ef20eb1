//! Solver outputs against closed forms and brute-force searches.

use rdp_core::ba::{ba_solve, BaConfig};
use rdp_core::entropic::{entropic_coupling, equal_marginal_objective_bits, EntropicConfig};
use rdp_core::info::binary_entropy_bits;
use rdp_core::source::{hamming_matrix, make_source, squared_error_matrix};
use rdp_core::two_stage::{
    conditional_mean_decoder, decoder_output_pmf, posterior_sampling_decoder,
    sample_reconstruction, DeterministicEncoder,
};
use rdp_core::{DistortionMatrix, Source};

fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|&x| vec![x]).collect()
}

fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v * v.log2())
        .sum::<f64>()
}

/// `I + λ·E[w]` (I in nats) of a symmetric coupling given by its
/// off-diagonal entries, or `None` when a diagonal entry would go negative.
fn lagrangian(
    pmf: &[f64],
    off: &[((usize, usize), f64)],
    w: &DistortionMatrix,
    lambda: f64,
) -> Option<f64> {
    let m = pmf.len();
    let mut b = vec![vec![0.0; m]; m];
    for &((i, j), v) in off {
        b[i][j] = v;
        b[j][i] = v;
    }
    for i in 0..m {
        let rest: f64 = (0..m).filter(|&j| j != i).map(|j| b[i][j]).sum();
        b[i][i] = pmf[i] - rest;
        if b[i][i] < 0.0 {
            return None;
        }
    }
    let mut value = 0.0;
    for i in 0..m {
        for j in 0..m {
            if b[i][j] > 0.0 {
                value +=
                    b[i][j] * (b[i][j] / (pmf[i] * pmf[j])).ln() + lambda * b[i][j] * w.get(i, j);
            }
        }
    }
    Some(value)
}

fn solver_lagrangian(src: &Source, w: &DistortionMatrix, lambda: f64) -> f64 {
    let b = entropic_coupling(w, src.pmf(), lambda, &EntropicConfig::default()).unwrap();
    let rate_nats = equal_marginal_objective_bits(&b, src.pmf()) * std::f64::consts::LN_2;
    rate_nats + lambda * b.expected_distortion(w)
}

#[test]
fn entropic_matches_brute_force_on_two_symbols() {
    let src = make_source(scalars(&[0.0, 1.5]), vec![0.35, 0.65]).unwrap();
    let w = squared_error_matrix(src.symbols(), src.symbols()).unwrap();
    for lambda in [0.0, 0.1, 0.7, 2.0, 10.0] {
        let hi = 0.35;
        // golden-section search on the single free entry, which is convex
        let f = |x: f64| lagrangian(src.pmf(), &[((0, 1), x)], &w, lambda).unwrap();
        let (mut a, mut b) = (0.0, hi);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (c, d) = (b - g * (b - a), a + g * (b - a));
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let brute = f(0.5 * (a + b));
        let solved = solver_lagrangian(&src, &w, lambda);
        assert!(
            (solved - brute).abs() < 1e-9,
            "lambda {lambda}: {solved} vs {brute}"
        );
    }
}

#[test]
fn entropic_matches_grid_search_on_three_symbols() {
    let src = make_source(scalars(&[-1.0, 0.2, 2.0]), vec![0.5, 0.2, 0.3]).unwrap();
    let w = squared_error_matrix(src.symbols(), src.symbols()).unwrap();
    let steps = 120;
    for lambda in [0.3, 1.5, 6.0] {
        let mut best = f64::INFINITY;
        let mut at = [0.0; 3];
        let cap = |i: usize, j: usize| src.pmf()[i].min(src.pmf()[j]);
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    let x = [
                        cap(0, 1) * a as f64 / steps as f64,
                        cap(0, 2) * b as f64 / steps as f64,
                        cap(1, 2) * c as f64 / steps as f64,
                    ];
                    if let Some(v) = lagrangian(
                        src.pmf(),
                        &[((0, 1), x[0]), ((0, 2), x[1]), ((1, 2), x[2])],
                        &w,
                        lambda,
                    ) {
                        if v < best {
                            best = v;
                            at = x;
                        }
                    }
                }
            }
        }
        // refine around the best grid cell by coordinate descent
        let mut step = cap(0, 1).max(cap(0, 2)).max(cap(1, 2)) / steps as f64;
        let eval = |x: &[f64; 3]| {
            lagrangian(
                src.pmf(),
                &[((0, 1), x[0]), ((0, 2), x[1]), ((1, 2), x[2])],
                &w,
                lambda,
            )
            .filter(|_| x.iter().all(|&v| v >= 0.0))
            .unwrap_or(f64::INFINITY)
        };
        while step > 1e-13 {
            let mut moved = false;
            for k in 0..3 {
                for s in [step, -step] {
                    let mut y = at;
                    y[k] += s;
                    let v = eval(&y);
                    if v < best {
                        best = v;
                        at = y;
                        moved = true;
                    }
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        let solved = solver_lagrangian(&src, &w, lambda);
        assert!(
            solved <= best + 1e-9,
            "lambda {lambda}: solver {solved} above search {best}"
        );
        assert!(
            best - solved < 1e-7,
            "lambda {lambda}: search {best} far above solver {solved}"
        );
    }
}

#[test]
fn skewed_binary_hamming_closed_form() {
    // R(D) = H(p) − H(D) for D ≤ min(p, 1 − p)
    let p1 = 0.3;
    let src = make_source(scalars(&[0.0, 1.0]), vec![1.0 - p1, p1]).unwrap();
    let w = hamming_matrix(src.symbols(), src.symbols()).unwrap();
    for beta in [1.0, 2.0, 3.0, 5.0, 8.0] {
        let sol = ba_solve(&src, src.symbols(), &w, beta, &BaConfig::default()).unwrap();
        let d = sol.point.distortion;
        assert!(d > 0.0 && d < p1);
        let expected = binary_entropy_bits(p1) - binary_entropy_bits(d);
        assert!((sol.point.rate_bits - expected).abs() < 1e-8, "beta {beta}");
        // the slope at the optimum is −β nats: D = 1 / (1 + e^β)
        assert!((d - 1.0 / (1.0 + beta.exp())).abs() < 1e-9, "beta {beta}");
    }
}

#[test]
fn uniform_binary_hits_the_documented_point() {
    let src = make_source(scalars(&[0.0, 1.0]), vec![0.5, 0.5]).unwrap();
    let w = hamming_matrix(src.symbols(), src.symbols()).unwrap();
    let beta = (0.9f64 / 0.1).ln();
    let sol = ba_solve(&src, src.symbols(), &w, beta, &BaConfig::default()).unwrap();
    assert!((sol.point.distortion - 0.1).abs() < 1e-9);
    assert!((sol.point.rate_bits - 0.5310).abs() < 5e-5);
}

#[test]
fn lossless_endpoint_reaches_source_entropy() {
    let src = make_source(scalars(&[0.0, 1.0, 3.0, 4.0]), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let w = squared_error_matrix(src.symbols(), src.symbols()).unwrap();
    let sol = ba_solve(&src, src.symbols(), &w, 200.0, &BaConfig::default()).unwrap();
    assert!(sol.point.distortion < 1e-3);
    assert!((sol.point.rate_bits - entropy_bits(src.pmf())).abs() < 1e-3);
}

#[test]
fn sampled_histogram_tracks_output_pmf() {
    let src = make_source(
        scalars(&[0.0, 1.0, 2.0, 5.0, 6.0]),
        vec![0.1, 0.3, 0.2, 0.25, 0.15],
    )
    .unwrap();
    let enc = DeterministicEncoder::new(vec![0, 0, 0, 1, 1]).unwrap();
    let dec = posterior_sampling_decoder(&src, &enc).unwrap();
    let want = decoder_output_pmf(&src, &enc, &dec).unwrap();
    let count = 100_000;
    let draws = sample_reconstruction(&src, &enc, &dec, 1, count).unwrap();
    let mut hist = vec![0.0; src.len()];
    for y in &draws {
        let k = src.symbols().iter().position(|s| s == y).unwrap();
        hist[k] += 1.0 / count as f64;
    }
    let l1: f64 = hist.iter().zip(&want).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 <= 0.01, "L1 {l1}");
    assert_eq!(
        draws,
        sample_reconstruction(&src, &enc, &dec, 1, count).unwrap()
    );
}

#[test]
fn conditional_mean_samples_are_cell_means() {
    let src = make_source(scalars(&[0.0, 1.0, 2.0, 5.0]), vec![0.25; 4]).unwrap();
    let enc = DeterministicEncoder::new(vec![0, 0, 1, 1]).unwrap();
    let dec = conditional_mean_decoder(&src, &enc).unwrap();
    let draws = sample_reconstruction(&src, &enc, &dec, 3, 1000).unwrap();
    assert!(draws.iter().all(|y| *y == vec![0.5] || *y == vec![3.5]));
}
