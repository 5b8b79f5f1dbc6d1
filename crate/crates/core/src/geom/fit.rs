use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use super::{Conic, HomLine};
use crate::error::{Error, Result};

/// A straight run of an ordered point chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    /// Index of the first point in the source chain.
    pub start: usize,
    /// One past the index of the last point.
    pub end: usize,
    /// `(a, b, c)` with unit normal `(a, b)`.
    pub line: [f64; 3],
    /// Projections of the first and last points onto the line.
    pub p0: [f64; 2],
    pub p1: [f64; 2],
}

impl LineSegment {
    pub fn hom_line(&self) -> HomLine {
        HomLine::new(self.line[0], self.line[1], self.line[2])
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn length(&self) -> f64 {
        (self.p1[0] - self.p0[0]).hypot(self.p1[1] - self.p0[1])
    }

    /// Unit direction from `p0` to `p1`.
    pub fn direction(&self) -> [f64; 2] {
        let (dx, dy) = (self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]);
        let n = dx.hypot(dy).max(f64::MIN_POSITIVE);
        [dx / n, dy / n]
    }
}

/// Running first and second moments of a point set.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

impl Moments {
    fn push(&mut self, p: &Point2<f64>) {
        self.n += 1.0;
        self.sx += p.x;
        self.sy += p.y;
        self.sxx += p.x * p.x;
        self.sxy += p.x * p.y;
        self.syy += p.y * p.y;
    }

    /// Total least squares line `(a, b, c)` with unit normal.
    fn line(&self) -> Option<[f64; 3]> {
        if self.n < 2.0 {
            return None;
        }
        let (mx, my) = (self.sx / self.n, self.sy / self.n);
        let cxx = self.sxx / self.n - mx * mx;
        let cxy = self.sxy / self.n - mx * my;
        let cyy = self.syy / self.n - my * my;
        if cxx + cyy <= 0.0 {
            return None;
        }
        // Direction of largest spread; the normal is perpendicular to it.
        let theta = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        let (s, c) = theta.sin_cos();
        let (a, b) = (-s, c);
        Some([a, b, -(a * mx + b * my)])
    }
}

fn line_distance(l: &[f64; 3], p: &Point2<f64>) -> f64 {
    (l[0] * p.x + l[1] * p.y + l[2]).abs()
}

fn project(l: &[f64; 3], p: &Point2<f64>) -> [f64; 2] {
    let d = l[0] * p.x + l[1] * p.y + l[2];
    [p.x - d * l[0], p.y - d * l[1]]
}

/// Total least squares line through `points`.
pub fn fit_line(points: &[Point2<f64>]) -> Result<HomLine> {
    let mut m = Moments::default();
    points.iter().for_each(|p| m.push(p));
    m.line()
        .map(|[a, b, c]| HomLine::new(a, b, c))
        .ok_or(Error::Degenerate("line fit needs two distinct points"))
}

/// Greedy split of an ordered chain into straight segments.
///
/// A line is fitted to the first `min_length` points; when every one of them
/// lies within `tolerance` the segment grows point by point, refitting as it
/// goes, until the next point is further than `tolerance`. Otherwise the
/// window slides forward by one.
pub fn fit_line_segments(points: &[Point2<f64>], tolerance: f64, min_length: usize) -> Vec<LineSegment> {
    let min_length = min_length.max(2);
    let n = points.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i + min_length <= n {
        let mut m = Moments::default();
        points[i..i + min_length].iter().for_each(|p| m.push(p));
        let Some(mut line) = m.line() else {
            i += 1;
            continue;
        };
        if points[i..i + min_length]
            .iter()
            .any(|p| line_distance(&line, p) > tolerance)
        {
            i += 1;
            continue;
        }
        let mut j = i + min_length;
        while j < n && line_distance(&line, &points[j]) <= tolerance {
            m.push(&points[j]);
            line = m.line().unwrap_or(line);
            j += 1;
        }
        out.push(LineSegment {
            start: i,
            end: j,
            line,
            p0: project(&line, &points[i]),
            p1: project(&line, &points[j - 1]),
        });
        i = j;
    }
    out
}

/// Direct least-squares ellipse fit: minimises the algebraic distance subject
/// to `4ac - b^2 = 1`, which always yields an ellipse.
pub fn fit_ellipse(points: &[Point2<f64>]) -> Result<Conic> {
    if points.len() < 6 {
        return Err(Error::invalid("ellipse fit needs at least 6 points"));
    }
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x / n, y + p.y / n));
    let spread = points.iter().map(|p| (p.x - mx).hypot(p.y - my)).sum::<f64>() / n;
    if !(spread > 0.0) {
        return Err(Error::Degenerate("coincident points"));
    }
    let s = std::f64::consts::SQRT_2 / spread;

    // Scatter blocks for the quadratic (x^2, xy, y^2) and linear (x, y, 1) parts.
    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let (x, y) = (s * (p.x - mx), s * (p.y - my));
        let q = Vector3::new(x * x, x * y, y * y);
        let l = Vector3::new(x, y, 1.0);
        s1 += q * q.transpose();
        s2 += q * l.transpose();
        s3 += l * l.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or(Error::Degenerate("ellipse fit: collinear points"))?;
    let t = -s3_inv * s2.transpose();
    let reduced = s1 + s2 * t;
    // Premultiply by the inverse of the constraint matrix.
    let m = Matrix3::new(
        reduced[(2, 0)] / 2.0,
        reduced[(2, 1)] / 2.0,
        reduced[(2, 2)] / 2.0,
        -reduced[(1, 0)],
        -reduced[(1, 1)],
        -reduced[(1, 2)],
        reduced[(0, 0)] / 2.0,
        reduced[(0, 1)] / 2.0,
        reduced[(0, 2)] / 2.0,
    );

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in m.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * (1.0 + lambda.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(m - Matrix3::identity() * lambda.re)) else {
            continue;
        };
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 0.0 && best.is_none_or(|(l, _)| lambda.re.abs() < l) {
            best = Some((lambda.re.abs(), v));
        }
    }
    let (_, a1) = best.ok_or(Error::Degenerate("ellipse fit found no elliptic solution"))?;
    let a2 = t * a1;
    let cn = Conic::from_coefficients(a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]);
    let tn = Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0);
    let conic = Conic::from_matrix(tn.transpose() * cn.matrix() * tn).normalized();
    if conic.ellipse().is_none() {
        return Err(Error::Degenerate("ellipse fit is not a real ellipse"));
    }
    Ok(conic)
}

/// Unit vector spanning the null space of a rank-2 3x3 matrix.
fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| rows[i].cross(&rows[j]))
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .filter(|v| v.norm() > 0.0)
        .map(|v| v.normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Ellipse;
    use approx::assert_relative_eq;

    #[test]
    fn collinear_points_give_one_segment() {
        let pts: Vec<_> = (0..100)
            .map(|i| Point2::new(3.0 + 0.7 * i as f64, -2.0 + 0.3 * i as f64))
            .collect();
        let segs = fit_line_segments(&pts, 1.0, 12);
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start, segs[0].end), (0, 100));
    }

    #[test]
    fn l_shape_splits_at_corner() {
        let mut pts: Vec<_> = (0..50).map(|i| Point2::new(i as f64, 0.0)).collect();
        pts.extend((1..=50).map(|i| Point2::new(49.0, i as f64)));
        let segs = fit_line_segments(&pts, 1.0, 12);
        assert_eq!(segs.len(), 2);
        assert!((segs[0].end as i64 - 50).abs() <= 2, "{segs:?}");
    }

    #[test]
    fn short_chain_yields_nothing() {
        let pts: Vec<_> = (0..5).map(|i| Point2::new(i as f64, 0.0)).collect();
        assert!(fit_line_segments(&pts, 1.0, 12).is_empty());
    }

    #[test]
    fn exact_circle_fit() {
        let pts = Ellipse::circle(0.0, 0.0, 1.0).sample(40);
        let e = fit_ellipse(&pts).unwrap().ellipse().unwrap();
        assert_relative_eq!(e.semi_major, 1.0, epsilon = 1e-7);
        assert_relative_eq!(e.semi_minor, 1.0, epsilon = 1e-7);
        assert!(e.center[0].abs() < 1e-7 && e.center[1].abs() < 1e-7);
    }

    #[test]
    fn exact_ellipse_fit() {
        let truth = Ellipse {
            center: [2.0, -1.0],
            semi_major: 3.0,
            semi_minor: 1.0,
            angle: 30f64.to_radians(),
        };
        let e = fit_ellipse(&truth.sample(40)).unwrap().ellipse().unwrap();
        assert_relative_eq!(e.center[0], 2.0, epsilon = 1e-7);
        assert_relative_eq!(e.center[1], -1.0, epsilon = 1e-7);
        assert_relative_eq!(e.semi_major, 3.0, epsilon = 1e-7);
        assert_relative_eq!(e.semi_minor, 1.0, epsilon = 1e-7);
        assert_relative_eq!(e.angle, truth.angle, epsilon = 1e-7);
    }

    #[test]
    fn degenerate_sets_fail() {
        let line: Vec<_> = (0..10).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(fit_ellipse(&line).is_err());
        assert!(fit_ellipse(&line[..4]).is_err());
    }
}
