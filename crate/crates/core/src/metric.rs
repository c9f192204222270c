//! Metric spaces on which trajectories live.
//!
//! Two concrete instances are provided: Euclidean `R^n` with the `l2` distance
//! and the unit circle `S^1` with the geodesic (arc-length) distance.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: space has dimension {expected}, point has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point kind does not match the space ({0})")]
    KindMismatch(&'static str),
    #[error("non-finite coordinate in point")]
    NonFinite,
    #[error("euclidean dimension must be positive")]
    ZeroDimension,
}

/// A point of a [`MetricSpace`].
///
/// Angles are always stored normalized to `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpacePoint {
    Vector(Vec<f64>),
    Angle(f64),
}

impl SpacePoint {
    pub fn vector(coords: impl Into<Vec<f64>>) -> Self {
        SpacePoint::Vector(coords.into())
    }

    pub fn scalar(x: f64) -> Self {
        SpacePoint::Vector(vec![x])
    }

    pub fn angle(theta: f64) -> Self {
        SpacePoint::Angle(normalize_angle(theta))
    }

    /// Raw coordinates: the vector itself, or the single angle.
    pub fn coords(&self) -> &[f64] {
        match self {
            SpacePoint::Vector(v) => v,
            SpacePoint::Angle(a) => std::slice::from_ref(a),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }
}

/// Reduce an angle to `[0, 2pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MetricSpace {
    Euclidean { dim: usize },
    Circle,
}

impl MetricSpace {
    pub fn euclidean(dim: usize) -> Result<Self, MetricError> {
        if dim == 0 {
            return Err(MetricError::ZeroDimension);
        }
        Ok(MetricSpace::Euclidean { dim })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, MetricSpace::Euclidean { .. })
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricSpace::Euclidean { dim } => *dim,
            MetricSpace::Circle => 1,
        }
    }

    /// Check that `p` belongs to this space.
    pub fn check(&self, p: &SpacePoint) -> Result<(), MetricError> {
        if !p.is_finite() {
            return Err(MetricError::NonFinite);
        }
        match (self, p) {
            (MetricSpace::Euclidean { dim }, SpacePoint::Vector(v)) => {
                if v.len() != *dim {
                    Err(MetricError::DimensionMismatch {
                        expected: *dim,
                        found: v.len(),
                    })
                } else {
                    Ok(())
                }
            }
            (MetricSpace::Circle, SpacePoint::Angle(_)) => Ok(()),
            (MetricSpace::Euclidean { .. }, SpacePoint::Angle(_)) => Err(
                MetricError::KindMismatch("angle given for a euclidean space"),
            ),
            (MetricSpace::Circle, SpacePoint::Vector(_)) => {
                Err(MetricError::KindMismatch("vector given for the circle"))
            }
        }
    }

    /// Build a point of this space from raw coordinates.
    pub fn point(&self, coords: &[f64]) -> Result<SpacePoint, MetricError> {
        let p = match self {
            MetricSpace::Euclidean { .. } => SpacePoint::Vector(coords.to_vec()),
            MetricSpace::Circle => {
                if coords.len() != 1 {
                    return Err(MetricError::DimensionMismatch {
                        expected: 1,
                        found: coords.len(),
                    });
                }
                SpacePoint::angle(coords[0])
            }
        };
        self.check(&p)?;
        Ok(p)
    }

    pub fn distance(&self, a: &SpacePoint, b: &SpacePoint) -> Result<f64, MetricError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.distance_unchecked(a, b))
    }

    /// Distance without membership checks. Callers must have validated both points.
    pub(crate) fn distance_unchecked(&self, a: &SpacePoint, b: &SpacePoint) -> f64 {
        match (a, b) {
            (SpacePoint::Angle(x), SpacePoint::Angle(y)) => {
                let d = (x - y).abs();
                d.min(TAU - d)
            }
            _ => l2_distance(a.coords(), b.coords()),
        }
    }

    /// Signed displacement taking `from` to `to`: the vector difference in
    /// `R^n`, the shortest signed arc on the circle.
    pub(crate) fn displacement(&self, from: &SpacePoint, to: &SpacePoint) -> Vec<f64> {
        match (from, to) {
            (SpacePoint::Angle(x), SpacePoint::Angle(y)) => {
                let mut d = y - x;
                if d > std::f64::consts::PI {
                    d -= TAU;
                } else if d < -std::f64::consts::PI {
                    d += TAU;
                }
                vec![d]
            }
            _ => to
                .coords()
                .iter()
                .zip(from.coords())
                .map(|(t, f)| t - f)
                .collect(),
        }
    }

    /// Move `p` by `step` (inverse of [`MetricSpace::displacement`]).
    pub(crate) fn offset(&self, p: &SpacePoint, step: &[f64], scale: f64) -> SpacePoint {
        match p {
            SpacePoint::Angle(a) => SpacePoint::angle(a + scale * step[0]),
            SpacePoint::Vector(v) => {
                SpacePoint::Vector(v.iter().zip(step).map(|(x, s)| x + scale * s).collect())
            }
        }
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pythagorean_distance() {
        let s = MetricSpace::euclidean(2).unwrap();
        let d = s
            .distance(
                &SpacePoint::vector([0.0, 0.0]),
                &SpacePoint::vector([3.0, 4.0]),
            )
            .unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn circle_wraps_around() {
        let d = MetricSpace::Circle
            .distance(&SpacePoint::angle(0.1), &SpacePoint::angle(TAU - 0.1))
            .unwrap();
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn identity_has_zero_distance() {
        let e = MetricSpace::euclidean(3).unwrap();
        let p = SpacePoint::vector([1.0, -2.0, 0.5]);
        assert_eq!(e.distance(&p, &p).unwrap(), 0.0);
        let q = SpacePoint::angle(4.0);
        assert_eq!(MetricSpace::Circle.distance(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = MetricSpace::euclidean(2).unwrap();
        let err = s
            .distance(&SpacePoint::vector([0.0]), &SpacePoint::vector([1.0, 1.0]))
            .unwrap_err();
        assert_eq!(
            err,
            MetricError::DimensionMismatch {
                expected: 2,
                found: 1
            }
        );
        assert!(MetricSpace::Circle
            .distance(&SpacePoint::vector([0.0]), &SpacePoint::angle(0.0))
            .is_err());
        assert!(MetricSpace::euclidean(0).is_err());
    }

    #[test]
    fn angles_are_normalized() {
        assert_eq!(SpacePoint::angle(-1e-300), SpacePoint::Angle(0.0));
        match SpacePoint::angle(-0.5) {
            SpacePoint::Angle(a) => assert!((a - (TAU - 0.5)).abs() < 1e-15),
            _ => unreachable!(),
        }
        match SpacePoint::angle(10.0) {
            SpacePoint::Angle(a) => assert!((0.0..TAU).contains(&a)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn displacement_round_trips() {
        let c = MetricSpace::Circle;
        let a = SpacePoint::angle(6.2);
        let b = SpacePoint::angle(0.1);
        let d = c.displacement(&a, &b);
        assert!(d[0] > 0.0 && d[0] < 0.2);
        let back = c.offset(&a, &d, 1.0);
        assert!(c.distance(&back, &b).unwrap() < 1e-14);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0f64, 3)
    }

    proptest! {
        #[test]
        fn euclidean_metric_axioms(a in vec3(), b in vec3(), c in vec3()) {
            let s = MetricSpace::euclidean(3).unwrap();
            let (a, b, c) = (SpacePoint::Vector(a), SpacePoint::Vector(b), SpacePoint::Vector(c));
            let ab = s.distance(&a, &b).unwrap();
            prop_assert_eq!(ab, s.distance(&b, &a).unwrap());
            prop_assert!(ab >= 0.0);
            let ac = s.distance(&a, &c).unwrap();
            let bc = s.distance(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn circle_metric_axioms(a in -20.0..20.0f64, b in -20.0..20.0f64, c in -20.0..20.0f64) {
            let s = MetricSpace::Circle;
            let (a, b, c) = (SpacePoint::angle(a), SpacePoint::angle(b), SpacePoint::angle(c));
            let ab = s.distance(&a, &b).unwrap();
            prop_assert_eq!(ab, s.distance(&b, &a).unwrap());
            prop_assert!((0.0..=std::f64::consts::PI + 1e-15).contains(&ab));
            let ac = s.distance(&a, &c).unwrap();
            let bc = s.distance(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
