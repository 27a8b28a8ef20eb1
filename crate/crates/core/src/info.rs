//! Entropy helpers shared by the solvers.
//!
//! Everything here works in nats; conversion to bits happens at the
//! reporting boundary through [`nats_to_bits`].

use std::f64::consts::LN_2;

/// `x ln x` with `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

#[inline]
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// Shannon entropy of a probability vector, in nats.
pub fn entropy_nats(pmf: &[f64]) -> f64 {
    -pmf.iter().map(|&p| xlogx(p)).sum::<f64>()
}

/// Shannon entropy of a probability vector, in bits.
pub fn entropy_of_pmf_bits(pmf: &[f64]) -> f64 {
    nats_to_bits(entropy_nats(pmf))
}

/// Binary entropy `H_b(d)` in bits.
pub fn binary_entropy_bits(d: f64) -> f64 {
    entropy_of_pmf_bits(&[d, 1.0 - d])
}

/// Numerically stable `ln Σ exp(v)`; returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
