use proptest::prelude::*;

use rdp_core::ba::{ba_solve, centroid_refine, BaConfig};
use rdp_core::dal::{dal_optimize_decoder, DalConfig, Divergence};
use rdp_core::entropic::{check_symmetry, entropic_solve, EntropicConfig};
use rdp_core::source::{make_source, product_source, squared_error_matrix};
use rdp_core::two_stage::{
    conditional_mean_decoder, coupling_payoff, decoder_output_pmf, enumerate_encoders,
    expected_mse, lloyd_encoder, posterior_sampling_decoder, verify_doubling, DeterministicEncoder,
    LloydConfig,
};
use rdp_core::{Curve, Perception, RDPoint, Source};

fn source_strategy(max_m: usize, max_dim: usize) -> impl Strategy<Value = Source> {
    (1..=max_m, 1..=max_dim).prop_flat_map(|(m, dim)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), m),
            prop::collection::vec(0.01f64..1.0, m),
        )
            .prop_map(|(symbols, pmf)| make_source(symbols, pmf).unwrap())
    })
}

fn source_and_encoder(max_m: usize) -> impl Strategy<Value = (Source, DeterministicEncoder)> {
    source_strategy(max_m, 2).prop_flat_map(|src| {
        let m = src.len();
        (Just(src), prop::collection::vec(0..m, m))
            .prop_map(|(src, a)| (src, DeterministicEncoder::new(a).unwrap()))
    })
}

fn scalar_source(max_m: usize) -> impl Strategy<Value = Source> {
    source_strategy(max_m, 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_sampling_doubles_mse((src, enc) in source_and_encoder(16)) {
        let rec = verify_doubling(&src, &enc).unwrap();
        prop_assert!(rec.abs_error <= 1e-12);
        if rec.d1 > 1e-9 {
            prop_assert!((rec.ratio.unwrap() - 2.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn posterior_sampling_reproduces_source_pmf((src, enc) in source_and_encoder(16)) {
        let out = decoder_output_pmf(&src, &enc, &posterior_sampling_decoder(&src, &enc).unwrap()).unwrap();
        for (a, b) in out.iter().zip(src.pmf()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn conditional_mean_beats_any_fixed_reconstruction(
        (src, enc) in source_and_encoder(8),
        shift in -1.0f64..1.0,
    ) {
        let d1 = expected_mse(&src, &enc, &conditional_mean_decoder(&src, &enc).unwrap()).unwrap();
        let means = match conditional_mean_decoder(&src, &enc).unwrap() {
            rdp_core::two_stage::Decoder::ConditionalMean(v) => v,
            _ => unreachable!(),
        };
        let moved: Vec<Vec<f64>> = means.iter().map(|c| c.iter().map(|v| v + shift).collect()).collect();
        let other = expected_mse(&src, &enc, &rdp_core::two_stage::Decoder::ConditionalMean(moved)).unwrap();
        prop_assert!(other >= d1 - 1e-12);
    }

    #[test]
    fn diagonal_payoff_is_second_moment_minus_d1((src, enc) in source_and_encoder(6)) {
        // F(L, L) = E||E[Y|Z]||^2 = E||Y||^2 - d1 for the posterior kernel L
        let h = enc.code_pmf(src.pmf());
        let l = match posterior_sampling_decoder(&src, &enc).unwrap() {
            rdp_core::two_stage::Decoder::Stochastic(k) => k,
            _ => unreachable!(),
        };
        let f = coupling_payoff(&l, &l, &h, &src).unwrap();
        let second: f64 = src
            .symbols()
            .iter()
            .zip(src.pmf())
            .map(|(y, p)| p * y.iter().map(|v| v * v).sum::<f64>())
            .sum();
        let d1 = verify_doubling(&src, &enc).unwrap().d1;
        prop_assert!((f - (second - d1)).abs() <= 1e-10, "{} vs {}", f, second - d1);
    }

    #[test]
    fn ba_objective_never_increases(src in scalar_source(8), beta in 0.05f64..30.0) {
        let w = squared_error_matrix(src.symbols(), src.symbols()).unwrap();
        let cfg = BaConfig { trace: true, max_iters: 5_000, ..BaConfig::default() };
        let sol = ba_solve(&src, src.symbols(), &w, beta, &cfg).unwrap();
        for pair in sol.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn ba_distortion_falls_with_beta(src in scalar_source(6), lo in 0.1f64..5.0, factor in 1.1f64..4.0) {
        let w = squared_error_matrix(src.symbols(), src.symbols()).unwrap();
        let cfg = BaConfig::default();
        let a = ba_solve(&src, src.symbols(), &w, lo, &cfg).unwrap();
        let b = ba_solve(&src, src.symbols(), &w, lo * factor, &cfg).unwrap();
        if a.point.converged && b.point.converged {
            prop_assert!(b.point.distortion <= a.point.distortion + 1e-9);
        }
    }

    #[test]
    fn centroids_never_increase_mse(src in scalar_source(8), beta in 0.1f64..20.0) {
        let w = squared_error_matrix(src.symbols(), src.symbols()).unwrap();
        let sol = ba_solve(&src, src.symbols(), &w, beta, &BaConfig::default()).unwrap();
        let centroids = centroid_refine(&src, &sol.kernel).unwrap();
        let live: Vec<usize> = (0..sol.marginal.len()).filter(|&j| sol.marginal[j] > 0.0).collect();
        prop_assert_eq!(centroids.len(), live.len());
        let mut after = 0.0;
        for (i, (y, p)) in src.symbols().iter().zip(src.pmf()).enumerate() {
            for (&j, c) in live.iter().zip(&centroids) {
                after += p * sol.kernel.get(i, j) * (y[0] - c[0]).powi(2);
            }
        }
        prop_assert!(after <= sol.point.distortion + 1e-12);
    }

    #[test]
    fn entropic_couplings_are_symmetric_with_pinned_marginals(src in scalar_source(12), lambda in 0.0f64..200.0) {
        let w = squared_error_matrix(src.symbols(), src.symbols()).unwrap();
        let sol = entropic_solve(&w, src.pmf(), lambda, &EntropicConfig::default(), None).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.marginal_error <= 1e-10);
        let report = check_symmetry(&sol.coupling, 1e-8).unwrap();
        prop_assert!(report.passed, "asymmetry {}", report.max_asymmetry);
    }

    #[test]
    fn dal_never_worse_than_posterior_sampling(
        (src, enc) in source_and_encoder(6),
        lambda in 0.0f64..100.0,
        kl in any::<bool>(),
    ) {
        let divergence = if kl { Divergence::SmoothedKl { epsilon: 1e-3 } } else { Divergence::TotalVariation };
        let cfg = DalConfig { lambda, divergence, ..DalConfig::default() };
        let (_, out) = dal_optimize_decoder(&src, &enc, &cfg).unwrap();
        let d2 = verify_doubling(&src, &enc).unwrap().d2;
        prop_assert!(out.objective <= d2 + 1e-6, "{} > {}", out.objective, d2);
        for pair in out.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn lloyd_with_one_code_per_symbol_is_lossless(src in source_strategy(10, 2), seed in any::<u64>()) {
        let cfg = LloydConfig { seed, ..LloydConfig::default() };
        let enc = lloyd_encoder(&src, src.len(), &cfg).unwrap();
        prop_assert!(verify_doubling(&src, &enc).unwrap().d1 <= 1e-15);
    }

    #[test]
    fn product_entropy_adds(src in source_strategy(5, 2), t in 1usize..=3) {
        let h = rdp_core::source::entropy_bits(&src);
        let prod = product_source(&src, t).unwrap();
        prop_assert!((rdp_core::source::entropy_bits(&prod) - t as f64 * h).abs() <= 1e-10);
    }

    #[test]
    fn envelope_is_convex_and_non_increasing(
        pts in prop::collection::vec((0.0f64..10.0, 0.0f64..5.0), 1..40),
    ) {
        let points = pts.iter().map(|&(d, r)| RDPoint::new(r, d, Perception::Unconstrained)).collect();
        let env = Curve::new("c", "", points).envelope();
        let shape = env.check_shape(1e-9);
        prop_assert!(shape.non_increasing && shape.convex);
        // no input point lies strictly below the envelope inside its range
        let (lo, hi) = env.distortion_range().unwrap();
        for &(d, r) in &pts {
            if d >= lo && d <= hi {
                prop_assert!(r >= env.rate_at(d).unwrap() - 1e-9);
            }
        }
    }
}

#[test]
fn enumeration_counts_match_stirling_numbers() {
    // S(6, n) for n = 1..=6
    let expected = [1, 31, 90, 65, 15, 1];
    for (n, &count) in (1..=6).zip(&expected) {
        assert_eq!(enumerate_encoders(6, n).unwrap().count(), count);
    }
}
