//! Operational rate-distortion frontiers of deterministic encoders.

use rayon::prelude::*;

use super::{
    conditional_mean_decoder, encoder_rate_bits, enumerate_encoders_with_cap, expected_mse,
    lloyd_encoder, posterior_sampling_decoder, DeterministicEncoder, LloydConfig,
    DEFAULT_ENUMERATION_CAP,
};
use crate::curve::{Curve, Perception, RDPoint};
use crate::error::{Error, Result};
use crate::source::Source;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierConfig {
    /// Largest `nᵐ` enumerated exhaustively for a given code count `n`.
    pub enumeration_cap: u128,
    /// Use a Lloyd encoder for code counts whose enumeration exceeds the cap.
    pub lloyd_fallback: bool,
    pub lloyd: LloydConfig,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            lloyd_fallback: true,
            lloyd: LloydConfig::default(),
        }
    }
}

/// One evaluated encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierEntry {
    /// Position in the evaluation order (code count, then lexicographic).
    pub encoder_id: usize,
    pub encoder: DeterministicEncoder,
    pub rate_bits: f64,
    /// MSE with the conditional-mean decoder.
    pub d1: f64,
    /// MSE with the posterior-sampling decoder, computed independently.
    pub d2: f64,
    /// Found by Lloyd iteration rather than enumeration.
    pub from_lloyd: bool,
}

#[derive(Debug, Clone)]
pub struct Frontier {
    /// Lower envelope of `(H(Z), d1)`.
    pub unconstrained: Curve,
    /// Lower envelope of `(H(Z), 2·d1)`.
    pub perception: Curve,
    pub entries: Vec<FrontierEntry>,
}

impl Frontier {
    /// Id of the first entry producing each envelope point.
    pub fn envelope_ids(&self, perception: bool) -> Vec<usize> {
        let (curve, scale) = if perception {
            (&self.perception, 2.0)
        } else {
            (&self.unconstrained, 1.0)
        };
        curve
            .points()
            .iter()
            .map(|p| {
                self.entries
                    .iter()
                    .find(|e| e.rate_bits == p.rate_bits && scale * e.d1 == p.distortion)
                    .map(|e| e.encoder_id)
                    .expect("envelope points come from entries")
            })
            .collect()
    }

    /// Largest `|d2 − 2·d1|` over all entries.
    pub fn max_doubling_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (e.d2 - 2.0 * e.d1).abs())
            .fold(0.0, f64::max)
    }
}

fn evaluate(
    src: &Source,
    encoder: DeterministicEncoder,
    from_lloyd: bool,
) -> Result<FrontierEntry> {
    let d1 = expected_mse(src, &encoder, &conditional_mean_decoder(src, &encoder)?)?;
    let d2 = expected_mse(src, &encoder, &posterior_sampling_decoder(src, &encoder)?)?;
    Ok(FrontierEntry {
        encoder_id: 0,
        rate_bits: encoder_rate_bits(src, &encoder),
        encoder,
        d1,
        d2,
        from_lloyd,
    })
}

/// Evaluates every encoder with up to `max_codewords` codes (enumerated, or
/// one Lloyd encoder per code count past the cap) and returns both envelopes.
///
/// The perception curve uses `2·d1` so that it is exactly the unconstrained
/// envelope with distortion doubled; `d2` is kept per entry for checking.
pub fn operational_frontier(
    src: &Source,
    max_codewords: usize,
    cfg: &FrontierConfig,
) -> Result<Frontier> {
    if max_codewords == 0 {
        return Err(Error::InvalidArgument("max_codewords must be >= 1".into()));
    }
    let m = src.len();
    let mut entries = Vec::new();
    for n in 1..=max_codewords.min(m) {
        match enumerate_encoders_with_cap(m, n, cfg.enumeration_cap) {
            Ok(iter) => {
                let encoders: Vec<DeterministicEncoder> = iter.collect();
                let evaluated = encoders
                    .into_par_iter()
                    .map(|e| evaluate(src, e, false))
                    .collect::<Result<Vec<_>>>()?;
                entries.extend(evaluated);
            }
            Err(Error::CapExceeded { .. }) if cfg.lloyd_fallback => {
                entries.push(evaluate(src, lloyd_encoder(src, n, &cfg.lloyd)?, true)?);
            }
            Err(e) => return Err(e),
        }
    }
    for (id, e) in entries.iter_mut().enumerate() {
        e.encoder_id = id;
    }

    let fingerprint = src.fingerprint();
    let raw = |scale: f64, perception: Perception| -> Vec<RDPoint> {
        entries
            .iter()
            .map(|e| RDPoint::new(e.rate_bits, scale * e.d1, perception))
            .collect()
    };
    let unconstrained = Curve::new(
        "frontier_cond_mean",
        fingerprint.clone(),
        raw(1.0, Perception::Unconstrained),
    )
    .envelope();
    let perception = Curve::new(
        "frontier_posterior",
        fingerprint,
        raw(2.0, Perception::Value(0.0)),
    )
    .envelope();
    Ok(Frontier {
        unconstrained,
        perception,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{make_source, quantized_gaussian_source};

    fn uniform(m: usize) -> Source {
        make_source(
            (0..m).map(|i| vec![i as f64]).collect(),
            vec![1.0 / m as f64; m],
        )
        .unwrap()
    }

    fn pairs(c: &Curve) -> Vec<(f64, f64)> {
        c.points()
            .iter()
            .map(|p| (p.rate_bits, p.distortion))
            .collect()
    }

    #[test]
    fn uniform_binary() {
        let f = operational_frontier(&uniform(2), 2, &FrontierConfig::default()).unwrap();
        assert_eq!(pairs(&f.unconstrained), vec![(1.0, 0.0), (0.0, 0.25)]);
        assert_eq!(pairs(&f.perception), vec![(1.0, 0.0), (0.0, 0.5)]);
        assert_eq!(f.envelope_ids(false), vec![1, 0]);
    }

    #[test]
    fn uniform_four_contains_one_bit_point() {
        let f = operational_frontier(&uniform(4), 4, &FrontierConfig::default()).unwrap();
        assert!(pairs(&f.unconstrained).contains(&(1.0, 0.25)));
        assert!(pairs(&f.perception).contains(&(1.0, 0.5)));
        assert_eq!(f.entries.len(), 1 + 7 + 6 + 1);
    }

    #[test]
    fn deterministic_source() {
        let src = make_source(vec![vec![3.0]], vec![1.0]).unwrap();
        let f = operational_frontier(&src, 3, &FrontierConfig::default()).unwrap();
        assert_eq!(pairs(&f.unconstrained), vec![(0.0, 0.0)]);
        assert_eq!(pairs(&f.perception), vec![(0.0, 0.0)]);
    }

    #[test]
    fn perception_envelope_is_doubled_unconstrained() {
        for m in 2..=6 {
            let f = operational_frontier(&uniform(m), m, &FrontierConfig::default()).unwrap();
            let doubled = f.unconstrained.scale_distortion(2.0, "x");
            assert_eq!(pairs(&doubled), pairs(&f.perception));
            assert!(f.max_doubling_error() < 1e-12);
        }
    }

    #[test]
    fn lloyd_fallback_past_cap() {
        let src = quantized_gaussian_source(0.0, 1.0, 12, 3.0).unwrap();
        let cfg = FrontierConfig {
            enumeration_cap: 5000,
            ..FrontierConfig::default()
        };
        let f = operational_frontier(&src, 4, &cfg).unwrap();
        assert!(f.entries.iter().any(|e| e.from_lloyd));
        assert!(f.unconstrained.check_shape(1e-9).passed());

        let strict = FrontierConfig {
            lloyd_fallback: false,
            ..cfg
        };
        assert!(matches!(
            operational_frontier(&src, 4, &strict),
            Err(Error::CapExceeded { .. })
        ));
    }
}
