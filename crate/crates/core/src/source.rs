//! Discrete memoryless sources and distortion matrices.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::info::{entropy_of_pmf_bits, squared_distance};

/// Default cap on the alphabet size of a product source.
pub const DEFAULT_PRODUCT_CAP: usize = 4096;

const PMF_SUM_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-14;

/// A finite alphabet of real vectors with a strictly positive pmf.
///
/// Zero-mass symbols are pruned and duplicate symbols merged at
/// construction, so every symbol is distinct and carries positive mass.
/// `block_len` is the number of base-source letters each symbol stands for
/// (1 for a base source, `t` for a `t`-fold product source).
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    symbols: Vec<Vec<f64>>,
    pmf: Vec<f64>,
    dim: usize,
    block_len: usize,
}

/// JSON shape accepted and produced for source definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFile {
    pub symbols: Vec<Vec<f64>>,
    pub pmf: Vec<f64>,
}

impl Source {
    pub fn symbols(&self) -> &[Vec<f64>] {
        &self.symbols
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Alphabet size `m`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Dimension `N` of every symbol vector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn is_deterministic(&self) -> bool {
        self.symbols.len() == 1
    }

    /// Expected squared distance to the mean (trace of the covariance).
    pub fn variance(&self) -> f64 {
        let mut mean = vec![0.0; self.dim];
        for (x, &p) in self.symbols.iter().zip(&self.pmf) {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += p * v;
            }
        }
        self.symbols
            .iter()
            .zip(&self.pmf)
            .map(|(x, &p)| p * squared_distance(x, &mean))
            .sum()
    }

    /// Short hex digest of the alphabet and pmf, used to tag curves.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        hasher.update((self.block_len as u64).to_le_bytes());
        for (x, p) in self.symbols.iter().zip(&self.pmf) {
            for v in x {
                hasher.update(v.to_bits().to_le_bytes());
            }
            hasher.update(p.to_bits().to_le_bytes());
        }
        hasher.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_file(&self) -> SourceFile {
        SourceFile {
            symbols: self.symbols.clone(),
            pmf: self.pmf.clone(),
        }
    }
}

impl TryFrom<SourceFile> for Source {
    type Error = Error;

    fn try_from(file: SourceFile) -> Result<Self> {
        make_source(file.symbols, file.pmf)
    }
}

/// Builds a source, merging duplicate symbols and pruning zero-mass ones.
pub fn make_source(symbols: Vec<Vec<f64>>, pmf: Vec<f64>) -> Result<Source> {
    if symbols.len() != pmf.len() {
        return Err(Error::InvalidSource(format!(
            "{} symbols but {} probabilities",
            symbols.len(),
            pmf.len()
        )));
    }
    if let Some(p) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidSource(format!("invalid probability {p}")));
    }
    let dim = symbols.first().map_or(0, Vec::len);
    if dim == 0 && !symbols.is_empty() {
        return Err(Error::InvalidSource(
            "symbols must have dimension >= 1".into(),
        ));
    }
    for x in &symbols {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSource("non-finite symbol value".into()));
        }
    }

    let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(symbols.len());
    for (x, p) in symbols.into_iter().zip(pmf) {
        match merged.iter_mut().find(|(y, _)| *y == x) {
            Some((_, mass)) => *mass += p,
            None => merged.push((x, p)),
        }
    }
    merged.retain(|(_, p)| *p > 0.0);
    if merged.is_empty() {
        return Err(Error::InvalidSource(
            "empty alphabet after removing zero-probability symbols".into(),
        ));
    }
    let total: f64 = merged.iter().map(|(_, p)| p).sum();
    let (symbols, pmf): (Vec<_>, Vec<_>) = merged.into_iter().map(|(x, p)| (x, p / total)).unzip();
    debug_assert!((pmf.iter().sum::<f64>() - 1.0).abs() <= PMF_SUM_TOL);
    Ok(Source {
        symbols,
        pmf,
        dim,
        block_len: 1,
    })
}

/// Scalar source on a uniform grid over `mean ± half_width_stds·std`,
/// with mass proportional to the Gaussian density at each grid point.
pub fn quantized_gaussian_source(
    mean: f64,
    std: f64,
    grid_points: usize,
    half_width_stds: f64,
) -> Result<Source> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "std must be positive, got {std}"
        )));
    }
    if !(half_width_stds > 0.0 && half_width_stds.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "half width must be positive, got {half_width_stds}"
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 grid points, got {grid_points}"
        )));
    }
    let last = (grid_points - 1) as f64;
    // Offsets in units of the half width; exactly antisymmetric about the center.
    let offsets: Vec<f64> = (0..grid_points)
        .map(|k| (2.0 * k as f64 - last) / last)
        .collect();
    let symbols = offsets
        .iter()
        .map(|u| vec![mean + std * half_width_stds * u])
        .collect();
    let weights = offsets
        .iter()
        .map(|u| {
            let z = u * half_width_stds;
            (-0.5 * z * z).exp()
        })
        .collect();
    make_source(symbols, weights)
}

/// The `t`-fold memoryless extension of `src`, with symbols in
/// lexicographic order (first letter most significant).
pub fn product_source(src: &Source, t: usize) -> Result<Source> {
    product_source_with_cap(src, t, DEFAULT_PRODUCT_CAP)
}

pub fn product_source_with_cap(src: &Source, t: usize, cap: usize) -> Result<Source> {
    if t == 0 {
        return Err(Error::InvalidArgument(
            "sequence length must be >= 1".into(),
        ));
    }
    let m = src.len() as u128;
    let size = (0..t).try_fold(1u128, |acc, _| acc.checked_mul(m));
    match size {
        Some(n) if n <= cap as u128 => {}
        other => {
            return Err(Error::CapExceeded {
                what: "product alphabet",
                requested: other.unwrap_or(u128::MAX),
                cap: cap as u128,
            })
        }
    }

    let mut symbols = vec![Vec::new()];
    let mut pmf = vec![1.0];
    for _ in 0..t {
        let mut next_symbols = Vec::with_capacity(symbols.len() * src.len());
        let mut next_pmf = Vec::with_capacity(symbols.len() * src.len());
        for (prefix, &q) in symbols.iter().zip(&pmf) {
            for (x, &p) in src.symbols.iter().zip(&src.pmf) {
                let mut s = prefix.clone();
                s.extend_from_slice(x);
                next_symbols.push(s);
                next_pmf.push(q * p);
            }
        }
        symbols = next_symbols;
        pmf = next_pmf;
    }
    Ok(Source {
        symbols,
        pmf,
        dim: src.dim * t,
        block_len: src.block_len * t,
    })
}

/// Entropy of the source in bits (per symbol of this alphabet, not per letter).
pub fn entropy_bits(src: &Source) -> f64 {
    entropy_of_pmf_bits(&src.pmf)
}

/// Pairwise distortion costs between a source and a reconstruction alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMatrix {
    values: Array2<f64>,
    symmetric: bool,
}

impl DistortionMatrix {
    /// Wraps a raw cost matrix; entries must be finite and non-negative.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "distortion entries must be finite and non-negative".into(),
            ));
        }
        let symmetric = values.is_square()
            && values
                .indexed_iter()
                .all(|((i, j), w)| (w - values[[j, i]]).abs() <= SYMMETRY_TOL);
        Ok(Self { values, symmetric })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn src_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn rec_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }
}

/// Supported per-symbol distortion measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    SquaredError,
    Hamming,
}

impl DistortionKind {
    pub fn matrix(self, src: &[Vec<f64>], rec: &[Vec<f64>]) -> Result<DistortionMatrix> {
        match self {
            DistortionKind::SquaredError => squared_error_matrix(src, rec),
            DistortionKind::Hamming => hamming_matrix(src, rec),
        }
    }
}

fn check_common_dim(src: &[Vec<f64>], rec: &[Vec<f64>]) -> Result<()> {
    let dim = src.iter().chain(rec).map(Vec::len).next().unwrap_or(0);
    match src.iter().chain(rec).find(|x| x.len() != dim) {
        Some(x) => Err(Error::DimensionMismatch {
            expected: dim,
            found: x.len(),
        }),
        None => Ok(()),
    }
}

/// `w_ij = ‖x_i − x̂_j‖²`.
pub fn squared_error_matrix(src: &[Vec<f64>], rec: &[Vec<f64>]) -> Result<DistortionMatrix> {
    check_common_dim(src, rec)?;
    let values = Array2::from_shape_fn((src.len(), rec.len()), |(i, j)| {
        squared_distance(&src[i], &rec[j])
    });
    DistortionMatrix::from_values(values)
}

/// `w_ij = 0` when the symbols are equal, `1` otherwise.
pub fn hamming_matrix(src: &[Vec<f64>], rec: &[Vec<f64>]) -> Result<DistortionMatrix> {
    check_common_dim(src, rec)?;
    let values = Array2::from_shape_fn((src.len(), rec.len()), |(i, j)| {
        if src[i] == rec[j] {
            0.0
        } else {
            1.0
        }
    });
    DistortionMatrix::from_values(values)
}
