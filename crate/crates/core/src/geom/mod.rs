//! Planar projective geometry: homographies, conics, fitting, and the
//! circle-to-ellipse homography refinement.
//!
//! Marker-plane coordinates are unitless with the detection square at
//! `[0, 1]^2`; image coordinates are pixels with `y` pointing down.

mod conic;
mod fit;
mod homography;
pub mod nelder_mead;
mod perspective;
mod refine;

pub use conic::{transform_conic, Conic, Ellipse, TransformDirection};
pub use fit::{fit_ellipse, fit_line, fit_line_segments, LineSegment};
pub use homography::{homography_from_corners, Homography};
pub use nelder_mead::NelderMeadOptions;
pub use perspective::{line_at_infinity_image, relative_depth, vanishing_line_from_quad};
pub use refine::{
    circle_ellipse_discrepancy, ellipse_discrepancy, refine_homography, RefinementMetricInputs, RefinementOutcome,
};

use nalgebra::{Point2, Vector3};

/// A point in homogeneous coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomPoint(pub Vector3<f64>);

/// A line `l` with `l . x = 0` for incident points `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomLine(pub Vector3<f64>);

impl HomPoint {
    pub fn new(x: f64, y: f64, w: f64) -> Self {
        Self(Vector3::new(x, y, w))
    }

    pub fn from_euclidean(p: &Point2<f64>) -> Self {
        Self(Vector3::new(p.x, p.y, 1.0))
    }

    pub fn is_finite(&self) -> bool {
        self.0.z.abs() > f64::EPSILON * self.0.xy().norm()
    }

    pub fn to_euclidean(&self) -> Option<Point2<f64>> {
        self.is_finite()
            .then(|| Point2::new(self.0.x / self.0.z, self.0.y / self.0.z))
    }

    /// Line through two points.
    pub fn join(&self, other: &HomPoint) -> HomLine {
        HomLine(self.0.cross(&other.0))
    }
}

impl HomLine {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self(Vector3::new(a, b, c))
    }

    pub fn at_infinity() -> Self {
        Self(Vector3::new(0.0, 0.0, 1.0))
    }

    pub fn through(p: &Point2<f64>, q: &Point2<f64>) -> Self {
        HomPoint::from_euclidean(p).join(&HomPoint::from_euclidean(q))
    }

    /// Intersection point of two lines.
    pub fn meet(&self, other: &HomLine) -> HomPoint {
        HomPoint(self.0.cross(&other.0))
    }

    /// Scaled so that `(a, b)` is a unit normal. `None` for the line at infinity.
    pub fn normalized(&self) -> Option<HomLine> {
        let n = self.0.xy().norm();
        (n > f64::EPSILON * self.0.z.abs()).then(|| HomLine(self.0 / n))
    }

    pub fn is_at_infinity(&self) -> bool {
        self.0.xy().norm() <= 1e-12 * self.0.z.abs()
    }

    /// Unsigned Euclidean distance from `p`; infinite for the line at infinity.
    pub fn distance(&self, p: &Point2<f64>) -> f64 {
        match self.normalized() {
            Some(l) => (l.0.x * p.x + l.0.y * p.y + l.0.z).abs(),
            None => f64::INFINITY,
        }
    }
}

/// The marker-plane corners in canonical order.
pub const UNIT_SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

pub fn unit_square() -> [Point2<f64>; 4] {
    UNIT_SQUARE.map(|[x, y]| Point2::new(x, y))
}

/// Twice the signed area of a polygon (positive for the canonical corner order
/// in a `y`-down frame).
pub fn signed_area2(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_and_meet() {
        let l1 = HomLine::through(&Point2::new(0.0, 0.0), &Point2::new(1.0, 1.0));
        let l2 = HomLine::through(&Point2::new(0.0, 2.0), &Point2::new(2.0, 0.0));
        let p = l1.meet(&l2).to_euclidean().unwrap();
        assert!((p - Point2::new(1.0, 1.0)).norm() < 1e-12);
        assert!((l1.distance(&Point2::new(1.0, 0.0)) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parallel_lines_meet_at_infinity() {
        let l1 = HomLine::through(&Point2::new(0.0, 0.0), &Point2::new(1.0, 0.0));
        let l2 = HomLine::through(&Point2::new(0.0, 1.0), &Point2::new(1.0, 1.0));
        assert!(!l1.meet(&l2).is_finite());
        assert!(HomLine::at_infinity().is_at_infinity());
        assert_eq!(HomLine::at_infinity().distance(&Point2::origin()), f64::INFINITY);
    }

    #[test]
    fn unit_square_is_positively_oriented() {
        assert!((signed_area2(&unit_square()) - 2.0).abs() < 1e-15);
    }
}
