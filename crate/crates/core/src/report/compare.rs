//! Rate gaps between curves.

use serde::Serialize;

use crate::curve::Curve;
use crate::error::{Error, Result};

/// Vertical distance between two curves over their common distortion range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapStats {
    pub max_gap_bits: f64,
    /// Mean of `|gap|` over the breakpoints inside the overlap.
    pub mean_gap_bits: f64,
    /// Signed gap `a − b` where `|gap|` is largest.
    pub signed_gap_at_max_bits: f64,
    pub overlap: (f64, f64),
    pub breakpoints: usize,
}

/// Compares the envelopes of `a` and `b`, both read as piecewise-linear
/// functions of distortion, at every breakpoint of either inside the overlap.
pub fn compare_curves(a: &Curve, b: &Curve) -> Result<GapStats> {
    let (a, b) = (a.envelope(), b.envelope());
    let (Some((a_lo, a_hi)), Some((b_lo, b_hi))) = (a.distortion_range(), b.distortion_range())
    else {
        return Err(Error::EmptyOverlap);
    };
    let (lo, hi) = (a_lo.max(b_lo), a_hi.min(b_hi));
    if lo > hi {
        return Err(Error::EmptyOverlap);
    }
    let mut xs: Vec<f64> = a
        .points()
        .iter()
        .chain(b.points())
        .map(|p| p.distortion)
        .filter(|d| (lo..=hi).contains(d))
        .collect();
    xs.push(lo);
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut max_gap = 0.0;
    let mut signed = 0.0;
    let mut total = 0.0;
    for &x in &xs {
        let gap = a.rate_at(x).expect("inside range") - b.rate_at(x).expect("inside range");
        total += gap.abs();
        if gap.abs() > max_gap {
            max_gap = gap.abs();
            signed = gap;
        }
    }
    Ok(GapStats {
        max_gap_bits: max_gap,
        mean_gap_bits: total / xs.len() as f64,
        signed_gap_at_max_bits: signed,
        overlap: (lo, hi),
        breakpoints: xs.len(),
    })
}

/// Gap between the perception curve `R(D, 0)` and the unconstrained curve
/// evaluated at half the distortion, `R(D/2, ∞)`.
pub fn compare_halved(unconstrained: &Curve, perception: &Curve) -> Result<GapStats> {
    let halved = unconstrained.scale_distortion(2.0, "unconstrained_halved");
    compare_curves(perception, &halved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Perception, RDPoint};
    use crate::info::binary_entropy_bits;

    fn curve(pts: &[(f64, f64)]) -> Curve {
        Curve::new(
            "c",
            "",
            pts.iter()
                .map(|&(d, r)| RDPoint::new(r, d, Perception::Unconstrained))
                .collect(),
        )
    }

    #[test]
    fn doubled_copy_has_zero_gap() {
        let u = curve(&[(0.0, 2.0), (0.1, 1.0), (0.3, 0.4), (0.6, 0.0)]);
        let p = u.scale_distortion(2.0, "p");
        let g = compare_halved(&u, &p).unwrap();
        assert_eq!(g.max_gap_bits, 0.0);
        assert_eq!(g.overlap, (0.0, 1.2));
    }

    #[test]
    fn binary_closed_forms_agree() {
        let pts: Vec<(f64, f64)> = (1..50)
            .map(|k| k as f64 / 100.0)
            .map(|d| (d, 1.0 - binary_entropy_bits(d)))
            .collect();
        let g = compare_curves(&curve(&pts), &curve(&pts)).unwrap();
        assert!(g.max_gap_bits <= 1e-15);
    }

    #[test]
    fn constant_offset_is_measured() {
        let a = curve(&[(0.0, 2.0), (1.0, 1.0)]);
        let b = curve(&[(0.5, 1.25), (2.0, 0.0)]);
        // a − b is 1.5 − 1.25 at D = 0.5 and 1 − 5/6 at D = 1
        let g = compare_curves(&a, &b).unwrap();
        assert_eq!(g.overlap, (0.5, 1.0));
        assert!((g.max_gap_bits - 0.25).abs() < 1e-15);
        assert!(g.signed_gap_at_max_bits > 0.0);
        assert_eq!(g.breakpoints, 2);
    }

    #[test]
    fn disjoint_ranges_error() {
        let a = curve(&[(0.0, 1.0), (0.1, 0.0)]);
        let b = curve(&[(0.5, 1.0), (0.7, 0.0)]);
        assert!(matches!(compare_curves(&a, &b), Err(Error::EmptyOverlap)));
        assert!(matches!(
            compare_curves(&a, &curve(&[])),
            Err(Error::EmptyOverlap)
        ));
    }

    #[test]
    fn degenerate_point_curves_overlap_at_zero() {
        let z = curve(&[(0.0, 0.0)]);
        let g = compare_halved(&z, &z).unwrap();
        assert_eq!((g.max_gap_bits, g.overlap), (0.0, (0.0, 0.0)));
    }
}
