//! Camera pose from a marker homography and frame-to-frame jitter statistics.
//!
//! The object frame has its origin at the marker centre, `X` along the marker
//! `u` axis and `Y` along `v`; the marker lies on `Z = 0`. A unit-square
//! marker point `(u, v)` sits at `(side (u - 1/2), side (v - 1/2), 0)`.

use nalgebra::{Matrix3, Point2, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::nelder_mead::{minimize, NelderMeadOptions};
use crate::geom::{unit_square, Homography};

/// Pinhole intrinsics with zero skew.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Square pixels, principal point at the image centre.
    pub fn centered(focal: f64, width: u32, height: u32) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Pixel coordinates of a camera-frame point, `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Point2<f64>> {
        (p.z > 0.0).then(|| Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

/// Maps unit-square marker coordinates to the metric object plane.
pub fn marker_scale(side: f64) -> Matrix3<f64> {
    Matrix3::new(side, 0.0, -side / 2.0, 0.0, side, -side / 2.0, 0.0, 0.0, 1.0)
}

/// Object-frame coordinates of the unit-square marker corners.
pub fn object_corners(side: f64) -> [Vector3<f64>; 4] {
    unit_square().map(|p| Vector3::new(side * (p.x - 0.5), side * (p.y - 0.5), 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// RMS corner reprojection error in pixels.
    pub reprojection_error: f64,
    /// Reprojection error of the rejected ambiguous solution over that of the
    /// selected one; infinite when the alternative violates cheirality.
    pub ambiguity_gap: f64,
}

impl Pose {
    /// A pose known exactly, e.g. ground truth.
    pub fn exact(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
            reprojection_error: 0.0,
            ambiguity_gap: 1.0,
        }
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Homography from the unit-square marker to pixels.
    pub fn homography(&self, k: &CameraIntrinsics, side: f64) -> Result<Homography> {
        let mut rt = self.rotation;
        rt.set_column(2, &self.translation);
        Homography::from_matrix(k.matrix() * rt * marker_scale(side))
    }

    /// Pixel projections of the four marker corners.
    pub fn project_corners(&self, k: &CameraIntrinsics, side: f64) -> Option<[Point2<f64>; 4]> {
        let c = object_corners(side);
        Some([
            k.project(&self.transform(&c[0]))?,
            k.project(&self.transform(&c[1]))?,
            k.project(&self.transform(&c[2]))?,
            k.project(&self.transform(&c[3]))?,
        ])
    }
}

fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

fn in_front(r: &Matrix3<f64>, t: &Vector3<f64>, side: f64) -> bool {
    t.z > 0.0 && object_corners(side).iter().all(|c| (r * c + t).z > 0.0)
}

fn rms_reprojection(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    k: &CameraIntrinsics,
    side: f64,
    targets: &[Point2<f64>; 4],
) -> f64 {
    let sum: f64 = object_corners(side)
        .iter()
        .zip(targets)
        .map(|(c, x)| match k.project(&(r * c + t)) {
            Some(p) => (p - x).norm_squared(),
            None => f64::INFINITY,
        })
        .sum();
    (sum / 4.0).sqrt()
}

/// Least-squares translation for a fixed rotation from the corner rays.
fn solve_translation(
    r: &Matrix3<f64>,
    k: &CameraIntrinsics,
    side: f64,
    targets: &[Point2<f64>; 4],
) -> Option<Vector3<f64>> {
    let kinv = k.inverse_matrix();
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for (c, x) in object_corners(side).iter().zip(targets) {
        let ray = kinv * Vector3::new(x.x, x.y, 1.0);
        let (u, v) = (ray.x / ray.z, ray.y / ray.z);
        let rc = r * c;
        // u (rc.z + tz) = rc.x + tx and the same for v.
        for (row, rhs) in [
            (Vector3::new(1.0, 0.0, -u), u * rc.z - rc.x),
            (Vector3::new(0.0, 1.0, -v), v * rc.z - rc.y),
        ] {
            ata += row * row.transpose();
            atb += row * rhs;
        }
    }
    ata.try_inverse().map(|inv| inv * atb)
}

/// Local minimum of the corner reprojection error near `(r, t)`, searched
/// over a rotation vector applied on the left and the translation.
fn polish(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    k: &CameraIntrinsics,
    side: f64,
    targets: &[Point2<f64>; 4],
) -> (Matrix3<f64>, Vector3<f64>) {
    let build = |x: &[f64]| {
        let turn = Rotation3::new(Vector3::new(x[0], x[1], x[2]));
        (turn.matrix() * r, Vector3::new(x[3], x[4], x[5]))
    };
    let cost = |x: &[f64]| {
        let (r, t) = build(x);
        rms_reprojection(&r, &t, k, side, targets)
    };
    let ts = 1e-3 * t.norm().max(side);
    let options = NelderMeadOptions {
        xtol: 1e-12,
        ftol: 1e-12,
        max_iters: 3000,
    };
    let x0 = [0.0, 0.0, 0.0, t.x, t.y, t.z];
    let m = minimize(cost, &x0, &[1e-2, 1e-2, 1e-2, ts, ts, ts], &options);
    // A restart from the first minimum shakes off a collapsed simplex.
    let m = minimize(cost, &m.x, &[1e-3, 1e-3, 1e-3, 0.1 * ts, 0.1 * ts, 0.1 * ts], &options);
    let (r2, t2) = build(&m.x);
    if m.value.is_finite() && m.value <= cost(&x0) {
        (nearest_rotation(&r2), t2)
    } else {
        (*r, *t)
    }
}

/// Both planar-pose candidates consistent with `h`, best first.
///
/// `h` maps the unit-square marker to pixels and `side` is the physical
/// marker side. The first candidate comes from the direct decomposition of
/// `K^-1 H`; the second tilts the marker normal to its mirror image about the
/// line of sight and re-fits the translation. Each is then polished to a
/// local minimum of the corner reprojection error, since a noisy `h` is not
/// exactly the image of a rigid square.
pub fn pose_candidates(h: &Homography, k: &CameraIntrinsics, side: f64) -> Result<Vec<Pose>> {
    if !(side > 0.0) {
        return Err(Error::invalid("marker side must be positive"));
    }
    let targets = unit_square().map(|p| h.apply(&p));
    let scale_inv = marker_scale(side)
        .try_inverse()
        .ok_or(Error::Degenerate("marker scale"))?;
    let a = k.inverse_matrix() * h.matrix() * scale_inv;
    let (a1, a2, a3) = (a.column(0), a.column(1), a.column(2));
    let mut lambda = 2.0 / (a1.norm() + a2.norm());
    if a3.z * lambda < 0.0 {
        lambda = -lambda;
    }
    let r1 = a1 * lambda;
    let r2 = a2 * lambda;
    let r = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
    let t: Vector3<f64> = a3 * lambda;

    let mut out = Vec::with_capacity(2);
    if in_front(&r, &t, side) {
        out.push((r, t));
    }

    let n = r.column(2).into_owned();
    let sight = t.normalize();
    let n_flip = sight * (2.0 * sight.dot(&n)) - n;
    let turn = Rotation3::rotation_between(&n, &n_flip).unwrap_or_else(|| {
        // Antiparallel only when the marker is seen edge-on.
        Rotation3::from_axis_angle(&Unit::new_normalize(r.column(0).into_owned()), std::f64::consts::PI)
    });
    let r_alt = nearest_rotation(&(turn.matrix() * r));
    if let Some(t_alt) = solve_translation(&r_alt, k, side, &targets) {
        if in_front(&r_alt, &t_alt, side) {
            out.push((r_alt, t_alt));
        }
    }
    for (r, t) in out.iter_mut() {
        let (pr, pt) = polish(r, t, k, side, &targets);
        if in_front(&pr, &pt, side) {
            (*r, *t) = (pr, pt);
        }
    }
    if out.is_empty() {
        return Err(Error::BehindCamera);
    }

    let errors: Vec<f64> = out
        .iter()
        .map(|(r, t)| rms_reprojection(r, t, k, side, &targets))
        .collect();
    let mut poses: Vec<Pose> = out
        .into_iter()
        .zip(&errors)
        .map(|((rotation, translation), &e)| Pose {
            rotation,
            translation,
            reprojection_error: e,
            ambiguity_gap: f64::INFINITY,
        })
        .collect();
    poses.sort_by(|a, b| a.reprojection_error.total_cmp(&b.reprojection_error));
    if poses.len() == 2 {
        const EPS: f64 = 1e-9;
        let gap = (poses[1].reprojection_error + EPS) / (poses[0].reprojection_error + EPS);
        poses[0].ambiguity_gap = gap;
        poses[1].ambiguity_gap = 1.0 / gap;
    }
    Ok(poses)
}

/// The candidate pose with the smaller corner reprojection error.
pub fn pose_from_homography(h: &Homography, k: &CameraIntrinsics, side: f64) -> Result<Pose> {
    Ok(pose_candidates(h, k, side)?.remove(0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterStats {
    /// Degrees.
    pub rotation_std: f64,
    /// Same unit as the pose translations.
    pub translation_std: f64,
    /// Pixels.
    pub center_std: f64,
    pub sample_count: usize,
}

/// Root mean square deviation with the `n - 1` normaliser.
fn rms(squares: impl Iterator<Item = f64>, n: usize) -> f64 {
    (squares.sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Spread of projected points around their mean in pixels.
pub fn point_spread(points: &[Point2<f64>]) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("jitter needs at least two samples"));
    }
    let mean = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::new(p.x, p.y, 0.0))
        / n as f64;
    Ok(rms(
        points.iter().map(|p| (p.x - mean.x).powi(2) + (p.y - mean.y).powi(2)),
        n,
    ))
}

/// Angle of a rotation matrix in radians.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    (0.5 * s.norm()).atan2(0.5 * (r.trace() - 1.0))
}

/// Chordal mean: the rotation closest to the element-wise mean matrix.
pub fn mean_rotation(rotations: &[Matrix3<f64>]) -> Matrix3<f64> {
    let sum = rotations.iter().fold(Matrix3::zeros(), |acc, r| acc + r);
    nearest_rotation(&(sum / rotations.len().max(1) as f64))
}

/// Jitter of a nominally static marker. `marker_center` is in the object
/// frame (the origin for the marker centre).
pub fn jitter_stats(poses: &[Pose], k: &CameraIntrinsics, marker_center: &Point2<f64>) -> Result<JitterStats> {
    let n = poses.len();
    if n < 2 {
        return Err(Error::invalid("jitter needs at least two samples"));
    }
    let rotations: Vec<Matrix3<f64>> = poses.iter().map(|p| p.rotation).collect();
    let r_mean = mean_rotation(&rotations);
    let rotation_std = rms(
        rotations
            .iter()
            .map(|r| rotation_angle(&(r_mean.transpose() * r)).to_degrees().powi(2)),
        n,
    );
    let t_mean = poses.iter().fold(Vector3::zeros(), |acc, p| acc + p.translation) / n as f64;
    let translation_std = rms(poses.iter().map(|p| (p.translation - t_mean).norm_squared()), n);
    let c = Vector3::new(marker_center.x, marker_center.y, 0.0);
    let centers = poses
        .iter()
        .map(|p| k.project(&p.transform(&c)).ok_or(Error::BehindCamera))
        .collect::<Result<Vec<_>>>()?;
    Ok(JitterStats {
        rotation_std,
        translation_std,
        center_std: point_spread(&centers)?,
        sample_count: n,
    })
}

/// Centre jitter measured through the homographies alone.
pub fn homography_center_spread(hs: &[Homography], center: &Point2<f64>) -> Result<f64> {
    point_spread(&hs.iter().map(|h| h.apply(center)).collect::<Vec<_>>())
}
