//! Rate-distortion points, swept curves and their lower convex envelopes.

use std::fmt;

/// Perception coordinate of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perception {
    /// No constraint on the reconstruction distribution.
    Unconstrained,
    /// Divergence between source and reconstruction distributions.
    Value(f64),
}

impl fmt::Display for Perception {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perception::Unconstrained => f.write_str("unconstrained"),
            Perception::Value(v) => write!(f, "{v}"),
        }
    }
}

/// One point of a rate-distortion(-perception) curve plus solver metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RDPoint {
    pub rate_bits: f64,
    pub distortion: f64,
    pub perception: Perception,
    /// Lagrange multiplier the point was traced with, if any.
    pub multiplier: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl RDPoint {
    pub fn new(rate_bits: f64, distortion: f64, perception: Perception) -> Self {
        Self {
            rate_bits,
            distortion,
            perception,
            multiplier: None,
            iterations: 0,
            converged: true,
        }
    }
}

/// Result of [`Curve::check_shape`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeCheck {
    pub non_increasing: bool,
    pub convex: bool,
    /// Largest violation of either property (0 when both hold exactly).
    pub max_violation: f64,
}

impl ShapeCheck {
    pub fn passed(&self) -> bool {
        self.non_increasing && self.convex
    }
}

/// Points sorted by distortion ascending, tagged with a label and the
/// fingerprint of the source they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    label: String,
    fingerprint: String,
    points: Vec<RDPoint>,
}

impl Curve {
    pub fn new(
        label: impl Into<String>,
        fingerprint: impl Into<String>,
        mut points: Vec<RDPoint>,
    ) -> Self {
        points.sort_by(|a, b| {
            a.distortion
                .total_cmp(&b.distortion)
                .then(a.rate_bits.total_cmp(&b.rate_bits))
        });
        Self {
            label: label.into(),
            fingerprint: fingerprint.into(),
            points,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn points(&self) -> &[RDPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    /// Lower convex envelope restricted to its non-increasing part.
    ///
    /// Dominated, duplicated and collinear points are dropped. Hull decisions
    /// depend only on signs of cross products, so scaling either axis by a
    /// power of two yields the identically scaled envelope.
    pub fn envelope(&self) -> Curve {
        let mut hull: Vec<RDPoint> = Vec::with_capacity(self.points.len());
        for p in &self.points {
            if !(p.distortion.is_finite() && p.rate_bits.is_finite()) {
                continue;
            }
            // sorted by (distortion, rate): the first point at a distortion is the lowest
            if hull.last().is_some_and(|q| q.distortion == p.distortion) {
                continue;
            }
            while hull.len() >= 2 {
                let o = &hull[hull.len() - 2];
                let a = &hull[hull.len() - 1];
                let cross = (a.distortion - o.distortion) * (p.rate_bits - o.rate_bits)
                    - (a.rate_bits - o.rate_bits) * (p.distortion - o.distortion);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p.clone());
        }
        if let Some(lowest) = hull
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.rate_bits.total_cmp(&b.1.rate_bits).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
        {
            hull.truncate(lowest + 1);
        }
        Curve {
            label: self.label.clone(),
            fingerprint: self.fingerprint.clone(),
            points: hull,
        }
    }

    /// Checks that rate is non-increasing in distortion and that every
    /// interior point lies on or below the chord of its neighbours.
    pub fn check_shape(&self, tol: f64) -> ShapeCheck {
        let mut check = ShapeCheck {
            non_increasing: true,
            convex: true,
            max_violation: 0.0,
        };
        for w in self.points.windows(2) {
            let excess = w[1].rate_bits - w[0].rate_bits;
            if excess > 0.0 {
                check.max_violation = check.max_violation.max(excess);
            }
            if excess > tol {
                check.non_increasing = false;
            }
        }
        for w in self.points.windows(3) {
            let (a, b, c) = (&w[0], &w[1], &w[2]);
            let span = c.distortion - a.distortion;
            if span <= 0.0 {
                continue;
            }
            let chord =
                a.rate_bits + (c.rate_bits - a.rate_bits) * (b.distortion - a.distortion) / span;
            let excess = b.rate_bits - chord;
            if excess > 0.0 {
                check.max_violation = check.max_violation.max(excess);
            }
            if excess > tol {
                check.convex = false;
            }
        }
        check
    }

    pub fn distortion_range(&self) -> Option<(f64, f64)> {
        Some((
            self.points.first()?.distortion,
            self.points.last()?.distortion,
        ))
    }

    /// Piecewise-linear rate at `distortion`; `None` outside the curve's range.
    pub fn rate_at(&self, distortion: f64) -> Option<f64> {
        let (lo, hi) = self.distortion_range()?;
        if distortion < lo || distortion > hi {
            return None;
        }
        let idx = self.points.partition_point(|p| p.distortion < distortion);
        let right = &self.points[idx.min(self.points.len() - 1)];
        if right.distortion == distortion || idx == 0 {
            return Some(right.rate_bits);
        }
        let left = &self.points[idx - 1];
        let t = (distortion - left.distortion) / (right.distortion - left.distortion);
        Some(left.rate_bits + t * (right.rate_bits - left.rate_bits))
    }

    /// Same curve with every distortion multiplied by `factor`.
    pub fn scale_distortion(&self, factor: f64, label: impl Into<String>) -> Curve {
        let points = self
            .points
            .iter()
            .map(|p| RDPoint {
                distortion: p.distortion * factor,
                ..p.clone()
            })
            .collect();
        Curve::new(label, self.fingerprint.clone(), points)
    }
}
