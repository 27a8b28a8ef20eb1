//! Two-stage coding over deterministic encoders.
//!
//! Stage one picks an encoder `Z = E(Y)` and decodes with the conditional
//! mean `E[Y | Z]`. Stage two keeps the encoder and instead draws the
//! reconstruction from the posterior `p(y | z)`, which makes the output
//! distribution equal to the source distribution and exactly doubles the
//! expected squared error.
//!
//! All expectations are exact finite sums taken in row-major symbol order.

mod enumerate;
mod frontier;
mod lloyd;
mod payoff;

pub use enumerate::{
    enumerate_encoders, enumerate_encoders_with_cap, EncoderIter, DEFAULT_ENUMERATION_CAP,
};
pub use frontier::{operational_frontier, Frontier, FrontierConfig, FrontierEntry};
pub use lloyd::{lloyd_encoder, LloydConfig};
pub use payoff::coupling_payoff;

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{entropy_of_pmf_bits, squared_distance};
use crate::kernel::{ConditionalKernel, Orientation};
use crate::source::Source;

/// Deterministic map from source symbols to codes `0..n`.
///
/// Codes are always numbered by first occurrence, so two encoders that
/// induce the same partition compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DeterministicEncoder {
    assignment: Vec<usize>,
    codes: usize,
}

impl DeterministicEncoder {
    /// Relabels `assignment` by first occurrence, dropping unused labels.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidArgument("encoder has no symbols".into()));
        }
        let mut relabel = std::collections::HashMap::new();
        let assignment: Vec<usize> = assignment
            .into_iter()
            .map(|c| {
                let next = relabel.len();
                *relabel.entry(c).or_insert(next)
            })
            .collect();
        let codes = relabel.len();
        Ok(Self { assignment, codes })
    }

    /// Input already in canonical form.
    pub(crate) fn from_canonical(assignment: Vec<usize>, codes: usize) -> Self {
        Self { assignment, codes }
    }

    pub fn constant(m: usize) -> Result<Self> {
        Self::new(vec![0; m])
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::new((0..m).collect())
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Number of distinct codes `n`.
    pub fn code_count(&self) -> usize {
        self.codes
    }

    pub fn symbol_count(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    pub fn code_of(&self, symbol: usize) -> usize {
        self.assignment[symbol]
    }

    /// Symbols of each code cell, in increasing order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.codes];
        for (i, &z) in self.assignment.iter().enumerate() {
            cells[z].push(i);
        }
        cells
    }

    /// Distribution of `Z` under the symbol pmf.
    pub fn code_pmf(&self, pmf: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.codes];
        for (&z, &p) in self.assignment.iter().zip(pmf) {
            h[z] += p;
        }
        h
    }

    fn check(&self, src: &Source) -> Result<()> {
        if self.assignment.len() != src.len() {
            return Err(Error::DimensionMismatch {
                expected: src.len(),
                found: self.assignment.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for DeterministicEncoder {
    type Error = Error;

    fn try_from(assignment: Vec<usize>) -> Result<Self> {
        Self::new(assignment)
    }
}

impl From<DeterministicEncoder> for Vec<usize> {
    fn from(enc: DeterministicEncoder) -> Self {
        enc.assignment
    }
}

/// Maps a code to a reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    /// One reconstruction vector per code.
    ConditionalMean(Vec<Vec<f64>>),
    /// Row `z` is a distribution over the source alphabet.
    Stochastic(ConditionalKernel),
}

/// `H(Z) / t` in bits, with `t` the source's block length.
pub fn encoder_rate_bits(src: &Source, enc: &DeterministicEncoder) -> f64 {
    let h = entropy_of_pmf_bits(&enc.code_pmf(src.pmf()));
    h.max(0.0) / src.block_len() as f64
}

fn code_masses(src: &Source, enc: &DeterministicEncoder) -> Result<Vec<f64>> {
    enc.check(src)?;
    let h = enc.code_pmf(src.pmf());
    if let Some(z) = h.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "code {z} has no source mass"
        )));
    }
    Ok(h)
}

/// Decoder reconstructing each code as `E[Y | Z = z]`.
pub fn conditional_mean_decoder(src: &Source, enc: &DeterministicEncoder) -> Result<Decoder> {
    let h = code_masses(src, enc)?;
    // posterior weights p/h, so a singleton cell reproduces its symbol exactly
    let mut means = vec![vec![0.0; src.dim()]; enc.code_count()];
    for ((y, &p), &z) in src.symbols().iter().zip(src.pmf()).zip(enc.assignment()) {
        let w = p / h[z];
        for (m, v) in means[z].iter_mut().zip(y) {
            *m += w * v;
        }
    }
    Ok(Decoder::ConditionalMean(means))
}

/// Decoder drawing the reconstruction from `p(y | z)`.
pub fn posterior_sampling_decoder(src: &Source, enc: &DeterministicEncoder) -> Result<Decoder> {
    let h = code_masses(src, enc)?;
    let mut rows = Array2::zeros((enc.code_count(), src.len()));
    for (i, (&p, &z)) in src.pmf().iter().zip(enc.assignment()).enumerate() {
        rows[[z, i]] = p / h[z];
    }
    Ok(Decoder::Stochastic(ConditionalKernel::new(
        rows,
        Orientation::Decoder,
    )?))
}

fn check_decoder(src: &Source, enc: &DeterministicEncoder, dec: &Decoder) -> Result<()> {
    enc.check(src)?;
    match dec {
        Decoder::ConditionalMean(means) => {
            if means.len() != enc.code_count() {
                return Err(Error::DimensionMismatch {
                    expected: enc.code_count(),
                    found: means.len(),
                });
            }
            if let Some(bad) = means.iter().find(|v| v.len() != src.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: src.dim(),
                    found: bad.len(),
                });
            }
        }
        Decoder::Stochastic(k) => {
            if k.rows() != enc.code_count() {
                return Err(Error::DimensionMismatch {
                    expected: enc.code_count(),
                    found: k.rows(),
                });
            }
            if k.cols() != src.len() {
                return Err(Error::DimensionMismatch {
                    expected: src.len(),
                    found: k.cols(),
                });
            }
        }
    }
    Ok(())
}

/// Exact `E‖Y − Ŷ‖² / t`.
///
/// For a stochastic decoder `Y` and `Ŷ` are independent given `Z`, so the
/// sum runs over `(y, ŷ)` with weight `p(y) · dec(ŷ | E(y))`.
pub fn expected_mse(src: &Source, enc: &DeterministicEncoder, dec: &Decoder) -> Result<f64> {
    check_decoder(src, enc, dec)?;
    let symbols = src.symbols();
    let mut total = 0.0;
    match dec {
        Decoder::ConditionalMean(means) => {
            for ((y, &p), &z) in symbols.iter().zip(src.pmf()).zip(enc.assignment()) {
                total += p * squared_distance(y, &means[z]);
            }
        }
        Decoder::Stochastic(k) => {
            for ((y, &p), &z) in symbols.iter().zip(src.pmf()).zip(enc.assignment()) {
                let mut inner = 0.0;
                for (j, yh) in symbols.iter().enumerate() {
                    let q = k.get(z, j);
                    if q > 0.0 {
                        inner += q * squared_distance(y, yh);
                    }
                }
                total += p * inner;
            }
        }
    }
    Ok(total / src.block_len() as f64)
}

/// Output distribution `Σ_z p(z) · dec(· | z)` of a stochastic decoder.
pub fn decoder_output_pmf(
    src: &Source,
    enc: &DeterministicEncoder,
    dec: &Decoder,
) -> Result<Vec<f64>> {
    check_decoder(src, enc, dec)?;
    match dec {
        Decoder::Stochastic(k) => Ok(k.push_forward(&enc.code_pmf(src.pmf()))),
        Decoder::ConditionalMean(_) => Err(Error::InvalidArgument(
            "output pmf over the source alphabet needs a stochastic decoder".into(),
        )),
    }
}

/// Both stage distortions for one encoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingRecord {
    /// MSE under the conditional-mean decoder.
    pub d1: f64,
    /// MSE under the posterior-sampling decoder.
    pub d2: f64,
    /// `|d2 − 2 d1|`.
    pub abs_error: f64,
    /// `d2 / d1`, undefined when `d1 == 0`.
    pub ratio: Option<f64>,
}

impl DoublingRecord {
    pub fn holds(&self, tol: f64) -> bool {
        self.abs_error <= tol
    }
}

pub fn verify_doubling(src: &Source, enc: &DeterministicEncoder) -> Result<DoublingRecord> {
    let d1 = expected_mse(src, enc, &conditional_mean_decoder(src, enc)?)?;
    let d2 = expected_mse(src, enc, &posterior_sampling_decoder(src, enc)?)?;
    Ok(DoublingRecord {
        d1,
        d2,
        abs_error: (d2 - 2.0 * d1).abs(),
        ratio: (d1 > 0.0).then(|| d2 / d1),
    })
}

/// Draws `count` reconstructions of fresh source samples.
pub fn sample_reconstruction(
    src: &Source,
    enc: &DeterministicEncoder,
    dec: &Decoder,
    seed: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    check_decoder(src, enc, dec)?;
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source_draw =
        WeightedIndex::new(src.pmf()).map_err(|e| Error::InvalidSource(e.to_string()))?;
    let row_draws = match dec {
        Decoder::Stochastic(k) => k
            .matrix()
            .rows()
            .into_iter()
            .map(|row| WeightedIndex::new(row.iter().copied()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        Decoder::ConditionalMean(_) => Vec::new(),
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z = enc.code_of(source_draw.sample(&mut rng));
        let yh = match dec {
            Decoder::ConditionalMean(means) => means[z].clone(),
            Decoder::Stochastic(_) => src.symbols()[row_draws[z].sample(&mut rng)].clone(),
        };
        out.push(yh);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::make_source;

    fn uniform(m: usize) -> Source {
        make_source(
            (0..m).map(|i| vec![i as f64]).collect(),
            vec![1.0 / m as f64; m],
        )
        .unwrap()
    }

    #[test]
    fn encoder_is_canonicalized() {
        let a = DeterministicEncoder::new(vec![5, 5, 2, 9, 2]).unwrap();
        assert_eq!(a.assignment(), &[0, 0, 1, 2, 1]);
        assert_eq!(a.code_count(), 3);
        assert_eq!(a, DeterministicEncoder::new(vec![1, 1, 0, 7, 0]).unwrap());
        assert!(DeterministicEncoder::new(vec![]).is_err());
    }

    #[test]
    fn encoder_json_is_plain_array() {
        let enc = DeterministicEncoder::new(vec![0, 1, 1, 0]).unwrap();
        let s = serde_json::to_string(&enc).unwrap();
        assert_eq!(s, "[0,1,1,0]");
        let back: DeterministicEncoder = serde_json::from_str("[3,3,1]").unwrap();
        assert_eq!(back.assignment(), &[0, 0, 1]);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(
            encoder_rate_bits(&uniform(2), &DeterministicEncoder::identity(2).unwrap()),
            1.0
        );
        assert_eq!(
            encoder_rate_bits(&uniform(2), &DeterministicEncoder::constant(2).unwrap()),
            0.0
        );
        let pairs = DeterministicEncoder::new(vec![0, 0, 1, 1]).unwrap();
        assert_eq!(encoder_rate_bits(&uniform(4), &pairs), 1.0);
    }

    #[test]
    fn rate_is_per_letter_on_products() {
        let base = uniform(2);
        let prod = crate::source::product_source(&base, 2).unwrap();
        let id = DeterministicEncoder::identity(4).unwrap();
        assert!((encoder_rate_bits(&prod, &id) - 1.0).abs() < 1e-15);
        let d = verify_doubling(&prod, &DeterministicEncoder::constant(4).unwrap()).unwrap();
        assert!((d.d1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn conditional_mean_examples() {
        let src = uniform(2);
        let c = DeterministicEncoder::constant(2).unwrap();
        assert_eq!(
            conditional_mean_decoder(&src, &c).unwrap(),
            Decoder::ConditionalMean(vec![vec![0.5]])
        );

        let src4 = uniform(4);
        let g = DeterministicEncoder::new(vec![0, 0, 1, 1]).unwrap();
        let dec = conditional_mean_decoder(&src4, &g).unwrap();
        assert_eq!(dec, Decoder::ConditionalMean(vec![vec![0.5], vec![2.5]]));
        // each outcome is 0.5 away from its cell mean
        assert_eq!(expected_mse(&src4, &g, &dec).unwrap(), 0.25);
    }

    #[test]
    fn posterior_examples() {
        let src4 = uniform(4);
        let g = DeterministicEncoder::new(vec![0, 0, 1, 1]).unwrap();
        let Decoder::Stochastic(k) = posterior_sampling_decoder(&src4, &g).unwrap() else {
            panic!("expected stochastic decoder")
        };
        assert_eq!(k.matrix().row(0).to_vec(), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(k.matrix().row(1).to_vec(), vec![0.0, 0.0, 0.5, 0.5]);

        let src = uniform(2);
        let c = DeterministicEncoder::constant(2).unwrap();
        let dec = posterior_sampling_decoder(&src, &c).unwrap();
        assert_eq!(decoder_output_pmf(&src, &c, &dec).unwrap(), vec![0.5, 0.5]);
        // outcomes (y, ŷ) each with mass 1/4; two of them cost 1
        assert_eq!(expected_mse(&src, &c, &dec).unwrap(), 0.5);
    }

    #[test]
    fn identity_encoder_is_lossless() {
        let src = uniform(5);
        let id = DeterministicEncoder::identity(5).unwrap();
        let r = verify_doubling(&src, &id).unwrap();
        assert_eq!((r.d1, r.d2), (0.0, 0.0));
        assert_eq!(r.ratio, None);
        let Decoder::Stochastic(k) = posterior_sampling_decoder(&src, &id).unwrap() else {
            unreachable!()
        };
        assert_eq!(k.matrix(), &Array2::<f64>::eye(5));
    }

    #[test]
    fn doubling_on_constant_binary() {
        let r = verify_doubling(&uniform(2), &DeterministicEncoder::constant(2).unwrap()).unwrap();
        assert_eq!((r.d1, r.d2), (0.25, 0.5));
        assert!(r.holds(1e-12));
    }

    #[test]
    fn output_pmf_of_fixed_decoders() {
        let src = uniform(3);
        let enc = DeterministicEncoder::new(vec![0, 1, 1]).unwrap();
        let point = Array2::from_shape_vec((2, 3), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let dec = Decoder::Stochastic(ConditionalKernel::new(point, Orientation::Decoder).unwrap());
        assert_eq!(
            decoder_output_pmf(&src, &enc, &dec).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        let flat = Array2::from_elem((2, 3), 1.0 / 3.0);
        let dec = Decoder::Stochastic(ConditionalKernel::new(flat, Orientation::Decoder).unwrap());
        for v in decoder_output_pmf(&src, &enc, &dec).unwrap() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let cm = conditional_mean_decoder(&src, &enc).unwrap();
        assert!(decoder_output_pmf(&src, &enc, &cm).is_err());
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let src = uniform(3);
        let enc = DeterministicEncoder::identity(2).unwrap();
        assert!(conditional_mean_decoder(&src, &enc).is_err());
        let enc = DeterministicEncoder::identity(3).unwrap();
        let dec = Decoder::ConditionalMean(vec![vec![0.0]; 2]);
        assert!(expected_mse(&src, &enc, &dec).is_err());
    }

    #[test]
    fn rate_ignores_decoder_choice() {
        let src = uniform(4);
        let enc = DeterministicEncoder::new(vec![0, 1, 1, 1]).unwrap();
        let r = encoder_rate_bits(&src, &enc);
        let d1 = expected_mse(&src, &enc, &conditional_mean_decoder(&src, &enc).unwrap()).unwrap();
        let d2 =
            expected_mse(&src, &enc, &posterior_sampling_decoder(&src, &enc).unwrap()).unwrap();
        assert_ne!(d1, d2);
        assert_eq!(r, encoder_rate_bits(&src, &enc));
    }

    #[test]
    fn sampling_is_seeded() {
        let src = uniform(4);
        let enc = DeterministicEncoder::new(vec![0, 0, 1, 1]).unwrap();
        let dec = posterior_sampling_decoder(&src, &enc).unwrap();
        let a = sample_reconstruction(&src, &enc, &dec, 7, 500).unwrap();
        let b = sample_reconstruction(&src, &enc, &dec, 7, 500).unwrap();
        assert_eq!(a, b);
        assert!(sample_reconstruction(&src, &enc, &dec, 7, 0).is_err());
    }

    #[test]
    fn conditional_mean_samples_are_cell_means() {
        let src = uniform(4);
        let enc = DeterministicEncoder::new(vec![0, 0, 1, 1]).unwrap();
        let dec = conditional_mean_decoder(&src, &enc).unwrap();
        for s in sample_reconstruction(&src, &enc, &dec, 1, 200).unwrap() {
            assert!(s == vec![0.5] || s == vec![2.5]);
        }
    }
}
