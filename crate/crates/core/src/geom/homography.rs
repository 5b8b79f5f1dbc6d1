use nalgebra::{Matrix3, Point2, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use super::{HomLine, HomPoint};
use crate::error::{Error, Result};

/// A plane-to-plane projective map, stored with unit Frobenius norm and a
/// non-negative bottom-right entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let norm = m.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Degenerate("homography matrix is zero or not finite"));
        }
        let mut m = m / norm;
        if m.determinant().abs() < 1e-12 {
            return Err(Error::Degenerate("singular homography"));
        }
        if m[(2, 2)] < 0.0 {
            m = -m;
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self::from_matrix(Matrix3::identity()).expect("identity is regular")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// The matrix scaled so that `h33 == 1`, or `None` when `h33` vanishes.
    pub fn matrix_unit_h33(&self) -> Option<Matrix3<f64>> {
        let h33 = self.0[(2, 2)];
        (h33.abs() > 1e-12).then(|| self.0 / h33)
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.0.try_inverse().ok_or(Error::Degenerate("singular homography"))?;
        Self::from_matrix(inv)
    }

    pub fn apply(&self, p: &Point2<f64>) -> Point2<f64> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        Point2::new(v.x / v.z, v.y / v.z)
    }

    pub fn apply_hom(&self, p: &HomPoint) -> HomPoint {
        HomPoint(self.0 * p.0)
    }

    /// Image of a line: `l' = H^-T l`.
    pub fn apply_line(&self, l: &HomLine) -> Result<HomLine> {
        let inv = self.0.try_inverse().ok_or(Error::Degenerate("singular homography"))?;
        Ok(HomLine(inv.transpose() * l.0))
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Homography> {
        Self::from_matrix(self.0 * first.0)
    }

    /// Normalised DLT from four or more correspondences `src[i] -> dst[i]`.
    pub fn from_point_pairs(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<Self> {
        if src.len() != dst.len() || src.len() < 4 {
            return Err(Error::invalid("need at least 4 point correspondences"));
        }
        let (ts, ns) = normalize_points(src)?;
        let (td, nd) = normalize_points(dst)?;
        if has_collinear_triple(&ns) || has_collinear_triple(&nd) {
            return Err(Error::Degenerate("three correspondence points are collinear"));
        }

        // Accumulate A^T A so any number of pairs gives a 9x9 system.
        let mut ata = SMatrix::<f64, 9, 9>::zeros();
        for (s, d) in ns.iter().zip(&nd) {
            let rows = [
                [-s.x, -s.y, -1.0, 0.0, 0.0, 0.0, d.x * s.x, d.x * s.y, d.x],
                [0.0, 0.0, 0.0, -s.x, -s.y, -1.0, d.y * s.x, d.y * s.y, d.y],
            ];
            for r in rows {
                let v = SMatrix::<f64, 9, 1>::from_row_slice(&r);
                ata += v * v.transpose();
            }
        }
        let eig = ata.symmetric_eigen();
        let (k, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let h = eig.eigenvectors.column(k);
        let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
        let td_inv = td
            .try_inverse()
            .ok_or(Error::Degenerate("degenerate destination points"))?;
        Self::from_matrix(td_inv * hn * ts)
    }
}

/// Homography taking the four marker corners to the four image corners.
pub fn homography_from_corners(
    marker_corners: &[Point2<f64>; 4],
    image_corners: &[Point2<f64>; 4],
) -> Result<Homography> {
    Homography::from_point_pairs(marker_corners, image_corners)
}

/// Isotropic normalisation: centroid to the origin, mean distance `sqrt(2)`.
fn normalize_points(pts: &[Point2<f64>]) -> Result<(Matrix3<f64>, Vec<Point2<f64>>)> {
    let n = pts.len() as f64;
    let c = pts
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::new(p.x, p.y, 0.0))
        / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p.x - c.x).powi(2) + (p.y - c.y).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::Degenerate("coincident correspondence points"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0);
    let out = pts
        .iter()
        .map(|p| Point2::new(s * (p.x - c.x), s * (p.y - c.y)))
        .collect();
    Ok((t, out))
}

fn has_collinear_triple(pts: &[Point2<f64>]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let a = pts[j] - pts[i];
                let b = pts[k] - pts[i];
                if (a.x * b.y - a.y * b.x).abs() < 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}
