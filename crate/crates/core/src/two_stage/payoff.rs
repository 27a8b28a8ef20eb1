//! Bilinear payoff between two joint laws of (symbol, code).
//!
//! For joint laws sharing the code marginal `h` and the symbol marginal,
//! `F(L, Q) = Σ_j h_j ⟨f_j(L), f_j(Q)⟩` where `f_j` is the conditional mean
//! of the symbol vector given code `j`. Since
//! `F(L,L) + F(Q,Q) − 2 F(L,Q) = Σ_j h_j ‖f_j(L) − f_j(Q)‖² ≥ 0`, a pair
//! maximizing `F` can always be taken with `L = Q`.

use crate::error::{Error, Result};
use crate::kernel::{ConditionalKernel, Orientation};
use crate::source::Source;

const MARGINAL_TOL: f64 = 1e-10;

/// Conditional means `f_j` of the symbol given each code.
fn code_means(k: &ConditionalKernel, h: &[f64], src: &Source) -> Result<Vec<Vec<f64>>> {
    let (m, n) = (src.len(), h.len());
    let p = src.pmf();
    // posterior(j, i) = p(y_i | z_j)
    let posterior: Box<dyn Fn(usize, usize) -> f64 + '_> = match k.orientation() {
        Orientation::Decoder => {
            check_shape(k, n, m)?;
            let sym = k.push_forward(h);
            check_marginal(&sym, p)?;
            Box::new(|j, i| k.get(j, i))
        }
        Orientation::Encoder => {
            check_shape(k, m, n)?;
            let codes = k.push_forward(p);
            check_marginal(&codes, h)?;
            Box::new(move |j, i| {
                if h[j] > 0.0 {
                    p[i] * k.get(i, j) / h[j]
                } else {
                    0.0
                }
            })
        }
    };
    Ok((0..n)
        .map(|j| {
            let mut f = vec![0.0; src.dim()];
            for (i, y) in src.symbols().iter().enumerate() {
                let w = posterior(j, i);
                for (fv, yv) in f.iter_mut().zip(y) {
                    *fv += w * yv;
                }
            }
            f
        })
        .collect())
}

fn check_shape(k: &ConditionalKernel, rows: usize, cols: usize) -> Result<()> {
    if k.rows() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            found: k.rows(),
        });
    }
    if k.cols() != cols {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: k.cols(),
        });
    }
    Ok(())
}

fn check_marginal(got: &[f64], want: &[f64]) -> Result<()> {
    let error: f64 = got.iter().zip(want).map(|(a, b)| (a - b).abs()).sum();
    if error > MARGINAL_TOL {
        return Err(Error::MarginalMismatch {
            error,
            tolerance: MARGINAL_TOL,
        });
    }
    Ok(())
}

/// `F(L, Q)` for two kernels linking the source to codes with law `code_pmf`.
///
/// A kernel with [`Orientation::Decoder`] holds `p(y | z)` (rows are codes);
/// one with [`Orientation::Encoder`] holds `p(z | y)` (rows are symbols).
pub fn coupling_payoff(
    l: &ConditionalKernel,
    q: &ConditionalKernel,
    code_pmf: &[f64],
    src: &Source,
) -> Result<f64> {
    let mass: f64 = code_pmf.iter().sum();
    if code_pmf.iter().any(|v| !(*v >= 0.0)) || (mass - 1.0).abs() > MARGINAL_TOL {
        return Err(Error::InvalidArgument(
            "code pmf is not a distribution".into(),
        ));
    }
    let fl = code_means(l, code_pmf, src)?;
    let fq = code_means(q, code_pmf, src)?;
    Ok(code_pmf
        .iter()
        .zip(fl.iter().zip(&fq))
        .map(|(h, (a, b))| h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::make_source;
    use ndarray::array;

    fn centred_binary() -> Source {
        make_source(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn equal_kernels_are_tight() {
        let src = centred_binary();
        let l = ConditionalKernel::new(array![[0.75, 0.25], [0.25, 0.75]], Orientation::Decoder)
            .unwrap();
        let h = [0.5, 0.5];
        let f = coupling_payoff(&l, &l, &h, &src).unwrap();
        assert!((f - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_mean_cells_give_zero() {
        let src = centred_binary();
        let l =
            ConditionalKernel::new(array![[0.5, 0.5], [0.5, 0.5]], Orientation::Decoder).unwrap();
        let q =
            ConditionalKernel::new(array![[1.0, 0.0], [0.0, 1.0]], Orientation::Decoder).unwrap();
        assert_eq!(coupling_payoff(&l, &q, &[0.5, 0.5], &src).unwrap(), 0.0);
    }

    #[test]
    fn encoder_orientation_agrees_with_decoder_orientation() {
        let src = centred_binary();
        let dec = ConditionalKernel::new(array![[0.75, 0.25], [0.25, 0.75]], Orientation::Decoder)
            .unwrap();
        // Bayes with uniform marginals leaves the matrix transposed
        let enc = ConditionalKernel::new(array![[0.75, 0.25], [0.25, 0.75]], Orientation::Encoder)
            .unwrap();
        let a = coupling_payoff(&dec, &dec, &[0.5, 0.5], &src).unwrap();
        let b = coupling_payoff(&enc, &enc, &[0.5, 0.5], &src).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn marginal_mismatch_is_rejected() {
        let src = centred_binary();
        let l =
            ConditionalKernel::new(array![[1.0, 0.0], [1.0, 0.0]], Orientation::Decoder).unwrap();
        assert!(matches!(
            coupling_payoff(&l, &l, &[0.5, 0.5], &src),
            Err(Error::MarginalMismatch { .. })
        ));
        assert!(coupling_payoff(&l, &l, &[0.6, 0.6], &src).is_err());
    }
}
