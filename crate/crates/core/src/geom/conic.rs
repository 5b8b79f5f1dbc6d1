use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Homography;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformDirection {
    /// Marker plane to image: `C' = H^-T C H^-1`.
    Forward,
    /// Image to marker plane: `C = H^T C' H`.
    Backward,
}

/// A conic `x^T C x = 0` with symmetric `C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conic(Matrix3<f64>);

/// Geometric parameters of a real ellipse. `angle` is the direction of the
/// major axis in `(-pi/2, pi/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle: f64,
}

impl Conic {
    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        Self((m + m.transpose()) * 0.5)
    }

    /// `a x^2 + b xy + c y^2 + d x + e y + f = 0`.
    pub fn from_coefficients(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        Self(Matrix3::new(
            a,
            b / 2.0,
            d / 2.0,
            b / 2.0,
            c,
            e / 2.0,
            d / 2.0,
            e / 2.0,
            f,
        ))
    }

    pub fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Self::from_coefficients(1.0, 0.0, 1.0, -2.0 * cx, -2.0 * cy, cx * cx + cy * cy - r * r)
    }

    pub fn from_ellipse(e: &Ellipse) -> Self {
        let (s, c) = e.angle.sin_cos();
        let (a2, b2) = (e.semi_major.powi(2), e.semi_minor.powi(2));
        // Quadratic form in the centred frame: R diag(1/a^2, 1/b^2) R^T.
        let qa = c * c / a2 + s * s / b2;
        let qb = s * c * (1.0 / a2 - 1.0 / b2);
        let qc = s * s / a2 + c * c / b2;
        let q = nalgebra::Matrix2::new(qa, qb, qb, qc);
        let x0 = Vector2::new(e.center[0], e.center[1]);
        let lin = -(q * x0);
        let f = x0.dot(&(q * x0)) - 1.0;
        Self(Matrix3::new(qa, qb, lin.x, qb, qc, lin.y, lin.x, lin.y, f))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Same conic scaled to unit Frobenius norm.
    pub fn normalized(&self) -> Conic {
        let n = self.0.norm();
        if n > 0.0 {
            Conic(self.0 / n)
        } else {
            *self
        }
    }

    /// `x^T C x` for a homogeneous point.
    pub fn evaluate(&self, x: &Vector3<f64>) -> f64 {
        x.dot(&(self.0 * x))
    }

    pub fn evaluate_point(&self, p: &Point2<f64>) -> f64 {
        self.evaluate(&Vector3::new(p.x, p.y, 1.0))
    }

    pub fn transform(&self, h: &Homography, direction: TransformDirection) -> Result<Conic> {
        transform_conic(self, h, direction)
    }

    pub fn is_ellipse(&self) -> bool {
        self.ellipse().is_some()
    }

    /// Ellipse parameters, or `None` if the conic is not a real ellipse.
    pub fn ellipse(&self) -> Option<Ellipse> {
        let m = &self.0;
        let (mut a, mut b, mut c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let (mut d, mut e, mut f) = (m[(0, 2)], m[(1, 2)], m[(2, 2)]);
        let det2 = a * c - b * b;
        if !(det2 > 0.0) {
            return None;
        }
        if a + c < 0.0 {
            (a, b, c, d, e, f) = (-a, -b, -c, -d, -e, -f);
        }
        let cx = (b * e - c * d) / det2;
        let cy = (b * d - a * e) / det2;
        let f0 = f + d * cx + e * cy;
        if !(f0 < 0.0) {
            return None;
        }
        let mean = 0.5 * (a + c);
        let half_diff = (0.25 * (a - c).powi(2) + b * b).sqrt();
        let (lmin, lmax) = (mean - half_diff, mean + half_diff);
        if !(lmin > 0.0) {
            return None;
        }
        let semi_major = (-f0 / lmin).sqrt();
        let semi_minor = (-f0 / lmax).sqrt();
        let angle = if half_diff <= 1e-14 * mean {
            0.0
        } else {
            // Direction of the eigenvector of the larger eigenvalue, turned by
            // a quarter to get the major axis.
            wrap_half_pi(0.5 * (2.0 * b).atan2(a - c) + FRAC_PI_2)
        };
        let out = Ellipse {
            center: [cx, cy],
            semi_major,
            semi_minor,
            angle,
        };
        (out.semi_major.is_finite() && out.center.iter().all(|v| v.is_finite())).then_some(out)
    }
}

fn wrap_half_pi(mut t: f64) -> f64 {
    while t <= -FRAC_PI_2 {
        t += PI;
    }
    while t > FRAC_PI_2 {
        t -= PI;
    }
    t
}

pub fn transform_conic(c: &Conic, h: &Homography, direction: TransformDirection) -> Result<Conic> {
    let hm = h.matrix();
    let out = match direction {
        TransformDirection::Forward => {
            let inv = hm.try_inverse().ok_or(Error::Degenerate("singular homography"))?;
            inv.transpose() * c.0 * inv
        }
        TransformDirection::Backward => hm.transpose() * c.0 * hm,
    };
    Ok(Conic::from_matrix(out).normalized())
}

impl Ellipse {
    pub fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Self {
            center: [cx, cy],
            semi_major: r,
            semi_minor: r,
            angle: 0.0,
        }
    }

    pub fn center_point(&self) -> Point2<f64> {
        Point2::new(self.center[0], self.center[1])
    }

    pub fn point_at(&self, t: f64) -> Point2<f64> {
        let (s, c) = self.angle.sin_cos();
        let (x, y) = (self.semi_major * t.cos(), self.semi_minor * t.sin());
        Point2::new(self.center[0] + c * x - s * y, self.center[1] + s * x + c * y)
    }

    /// `n` points at equally spaced parameter values.
    pub fn sample(&self, n: usize) -> Vec<Point2<f64>> {
        (0..n).map(|k| self.point_at(2.0 * PI * k as f64 / n as f64)).collect()
    }

    /// Euclidean distance from `p` to the ellipse curve.
    pub fn distance_to(&self, p: &Point2<f64>) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let dx = p.x - self.center[0];
        let dy = p.y - self.center[1];
        let u = (c * dx + s * dy).abs();
        let v = (-s * dx + c * dy).abs();
        distance_to_axis_aligned(self.semi_major, self.semi_minor, u, v)
    }
}

/// Distance from `(y0, y1)`, both non-negative, to the ellipse with semi-axes
/// `e0 >= e1` centred at the origin. Bisection on the Lagrange multiplier.
fn distance_to_axis_aligned(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if e0 - e1 <= 1e-15 * e0 {
        return ((y0 * y0 + y1 * y1).sqrt() - e0).abs();
    }
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1).powi(2);
                let sbar = bisect_root(r0, z0, z1, g);
                let x0 = r0 * y0 / (sbar + r0);
                let x1 = y1 / (sbar + 1.0);
                return ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt();
            }
            return 0.0;
        }
        return (y1 - e1).abs();
    }
    let numer0 = e0 * y0;
    let denom0 = e0 * e0 - e1 * e1;
    if numer0 < denom0 {
        let xde0 = numer0 / denom0;
        let x0 = e0 * xde0;
        let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
        ((x0 - y0).powi(2) + x1 * x1).sqrt()
    } else {
        (y0 - e0).abs()
    }
}

fn bisect_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { (n0 * n0 + z1 * z1).sqrt() - 1.0 };
    let mut s = 0.0;
    for _ in 0..200 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_parameters() {
        let e = Conic::circle(2.0, -1.0, 3.0).ellipse().unwrap();
        assert_relative_eq!(e.center[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(e.center[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(e.semi_major, 3.0, epsilon = 1e-12);
        assert_relative_eq!(e.semi_minor, 3.0, epsilon = 1e-12);
        assert_eq!(e.angle, 0.0);
    }

    #[test]
    fn ellipse_round_trip() {
        for angle in [-1.2, -0.3, 0.0, 0.4, 1.5] {
            let e = Ellipse {
                center: [2.0, -1.0],
                semi_major: 3.0,
                semi_minor: 1.0,
                angle,
            };
            let c = Conic::from_ellipse(&e);
            for p in e.sample(16) {
                assert!(c.evaluate_point(&p).abs() < 1e-12);
            }
            let back = c.normalized().ellipse().unwrap();
            assert_relative_eq!(back.semi_major, 3.0, epsilon = 1e-12);
            assert_relative_eq!(back.semi_minor, 1.0, epsilon = 1e-12);
            assert_relative_eq!(back.angle, angle, epsilon = 1e-12);
            assert_relative_eq!(back.center[0], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hyperbola_and_imaginary_are_not_ellipses() {
        assert!(!Conic::from_coefficients(1.0, 0.0, -1.0, 0.0, 0.0, -1.0).is_ellipse());
        assert!(!Conic::from_coefficients(1.0, 0.0, 1.0, 0.0, 0.0, 1.0).is_ellipse());
        assert!(Conic::from_coefficients(-1.0, 0.0, -2.0, 0.0, 0.0, 1.0).is_ellipse());
    }

    #[test]
    fn identity_transform_is_noop() {
        let c = Conic::circle(0.5, 0.5, 0.35).normalized();
        let out = transform_conic(&c, &Homography::identity(), TransformDirection::Forward).unwrap();
        assert!((out.matrix() - c.matrix()).norm() < 1e-12);
    }

    #[test]
    fn distance_to_circle_and_ellipse() {
        let c = Ellipse::circle(0.0, 0.0, 1.0);
        assert_relative_eq!(c.distance_to(&Point2::new(2.0, 0.0)), 1.0, epsilon = 1e-12);
        let e = Ellipse {
            center: [0.0, 0.0],
            semi_major: 2.0,
            semi_minor: 1.0,
            angle: 0.0,
        };
        assert_relative_eq!(e.distance_to(&Point2::new(0.0, 3.0)), 2.0, epsilon = 1e-9);
        assert_relative_eq!(e.distance_to(&Point2::new(5.0, 0.0)), 3.0, epsilon = 1e-9);
        assert_relative_eq!(e.distance_to(&Point2::new(0.0, 0.0)), 1.0, epsilon = 1e-9);
        for p in e.sample(20) {
            assert!(e.distance_to(&p) < 1e-9);
        }
        // Brute-force oracle over a dense parameter sweep.
        let q = Point2::new(1.3, 1.7);
        let brute = (0..200_000)
            .map(|k| (e.point_at(2.0 * PI * k as f64 / 200_000.0) - q).norm())
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(e.distance_to(&q), brute, epsilon = 1e-8);
    }
}
