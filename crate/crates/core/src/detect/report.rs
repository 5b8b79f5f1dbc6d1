//! Detection reports (JSON and plain text) and overlay drawing.

use std::fmt::Write as _;

use image::{GrayImage, Rgb, RgbImage};
use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

use super::MarkerDetection;
use crate::geom::Ellipse;
use crate::pose::{pose_from_homography, CameraIntrinsics, Pose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: usize,
    pub rotation: u32,
    pub corners: [[f64; 2]; 4],
    /// Row-major.
    pub h_initial: [f64; 9],
    pub h_refined: [f64; 9],
    pub ellipse: Option<Ellipse>,
    pub decode_distance: u32,
    pub refinement_skipped: bool,
    pub pose: Option<ReportPose>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportPose {
    /// Row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub reprojection_error: f64,
    /// `null` in JSON when the alternative solution is behind the camera.
    pub ambiguity_gap: Option<f64>,
}

impl From<&Pose> for ReportPose {
    fn from(p: &Pose) -> Self {
        Self {
            rotation: std::array::from_fn(|i| p.rotation[(i / 3, i % 3)]),
            translation: [p.translation.x, p.translation.y, p.translation.z],
            reprojection_error: p.reprojection_error,
            ambiguity_gap: p.ambiguity_gap.is_finite().then_some(p.ambiguity_gap),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub camera: CameraIntrinsics,
    pub marker_side: f64,
    pub markers: Vec<ReportEntry>,
}

fn row_major(h: &crate::geom::Homography) -> [f64; 9] {
    let m = h.matrix();
    std::array::from_fn(|i| m[(i / 3, i % 3)])
}

impl DetectionReport {
    /// Builds a report; poses use the refined homography and `marker_side`
    /// as the metric unit.
    pub fn new(
        image: impl Into<String>,
        size: (u32, u32),
        camera: CameraIntrinsics,
        marker_side: f64,
        detections: &[MarkerDetection],
    ) -> Self {
        let markers = detections
            .iter()
            .map(|d| ReportEntry {
                id: d.marker_id,
                rotation: d.rotation,
                corners: d.corners,
                h_initial: row_major(&d.h_initial),
                h_refined: row_major(&d.h_refined),
                ellipse: d.ellipse,
                decode_distance: d.decode_distance,
                refinement_skipped: d.refinement_skipped,
                pose: pose_from_homography(&d.h_refined, &camera, marker_side)
                    .ok()
                    .map(|p| ReportPose::from(&p)),
            })
            .collect();
        Self {
            image: image.into(),
            width: size.0,
            height: size.1,
            camera,
            marker_side,
            markers,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "image {} {}x{} markers {}",
            self.image,
            self.width,
            self.height,
            self.markers.len()
        );
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
        for m in &self.markers {
            let _ = writeln!(
                out,
                "marker {} rotation {} distance {} refined {}",
                m.id, m.rotation, m.decode_distance, !m.refinement_skipped
            );
            let _ = writeln!(out, "  corners {}", join(m.corners.as_flattened()));
            let _ = writeln!(out, "  h_initial {}", join(&m.h_initial));
            let _ = writeln!(out, "  h_refined {}", join(&m.h_refined));
            if let Some(e) = &m.ellipse {
                let _ = writeln!(
                    out,
                    "  ellipse {}",
                    join(&[e.center[0], e.center[1], e.semi_major, e.semi_minor, e.angle])
                );
            }
            if let Some(p) = &m.pose {
                let _ = writeln!(out, "  rotation {}", join(&p.rotation));
                let _ = writeln!(out, "  translation {}", join(&p.translation));
                let _ = writeln!(
                    out,
                    "  reprojection_error {:.6} ambiguity_gap {}",
                    p.reprojection_error,
                    p.ambiguity_gap.map_or("inf".to_string(), |g| format!("{g:.6}"))
                );
            }
        }
        out
    }
}

fn put(img: &mut RgbImage, x: f64, y: f64, c: Rgb<u8>) {
    let (xi, yi) = (x.round(), y.round());
    if xi >= 0.0 && yi >= 0.0 && (xi as u32) < img.width() && (yi as u32) < img.height() {
        img.put_pixel(xi as u32, yi as u32, c);
    }
}

fn line(img: &mut RgbImage, a: Point2<f64>, b: Point2<f64>, c: Rgb<u8>) {
    let steps = (b - a).norm().ceil().clamp(1.0, 1e5) as usize;
    for i in 0..=steps {
        let p = a + (b - a) * (i as f64 / steps as f64);
        for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)] {
            put(img, p.x + dx, p.y + dy, c);
        }
    }
}

/// Grey image with each marker outlined, its first corner marked, the fitted
/// ring drawn and, when a pose is available, the marker axes projected.
pub fn draw_overlay(image: &GrayImage, report: &DetectionReport) -> RgbImage {
    let mut out = RgbImage::from_fn(image.width(), image.height(), |x, y| {
        let v = image.get_pixel(x, y)[0];
        Rgb([v, v, v])
    });
    let (green, red, blue, yellow) = (
        Rgb([0, 220, 0]),
        Rgb([230, 0, 0]),
        Rgb([0, 80, 255]),
        Rgb([240, 200, 0]),
    );
    for m in &report.markers {
        let c = m.corners.map(|p| Point2::new(p[0], p[1]));
        for i in 0..4 {
            line(&mut out, c[i], c[(i + 1) % 4], green);
        }
        for d in -3..=3 {
            for e in -3..=3 {
                put(&mut out, c[0].x + d as f64, c[0].y + e as f64, red);
            }
        }
        if let Some(e) = &m.ellipse {
            let pts = e.sample(180);
            for i in 0..pts.len() {
                line(&mut out, pts[i], pts[(i + 1) % pts.len()], yellow);
            }
        }
        if let Some(p) = &m.pose {
            let r = nalgebra::Matrix3::from_row_slice(&p.rotation);
            let t = Vector3::from_row_slice(&p.translation);
            let s = report.marker_side;
            let project = |v: Vector3<f64>| report.camera.project(&(r * v + t));
            let o = project(Vector3::zeros());
            let axes = [
                (Vector3::new(0.5 * s, 0.0, 0.0), red),
                (Vector3::new(0.0, 0.5 * s, 0.0), green),
                (Vector3::new(0.0, 0.0, -0.5 * s), blue),
            ];
            for (v, col) in axes {
                if let (Some(a), Some(b)) = (o, project(v)) {
                    line(&mut out, a, b, col);
                }
            }
        }
    }
    out
}
