//! Marker layout, rasterisation and synthetic scenes.
//!
//! Marker-plane coordinates: the outer edge of the black square border is the
//! unit square, `u` to the right and `v` down, matching image axes.

mod io;
mod marker;
mod morphology;
mod pack;
mod scene;

pub use io::{format_sidecar, load_gray, parse_sidecar, read_sidecar, save_gray, write_sidecar, SceneRecord};
pub use marker::{disk_center, render_marker, render_sheet, MarkerRaster, MarkerTemplate, MIN_MARKER_SIDE};
pub use morphology::{apply_code_morphology, BinaryRaster};
pub use pack::{pack_disks, DiskLayout, PackOptions};
pub use scene::{
    corner_depths, render_scene, viewing_angle_deg, Background, CleanScene, MarkerGroundTruth, MarkerPlacement,
    NoiseSpec, Occluder, SceneSpec, SyntheticScene,
};

use std::sync::{Arc, OnceLock};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::codec::ROTATIONS;
use crate::geom::Conic;

/// Disks per marker; one bit each.
pub const DISK_COUNT: usize = 48;
/// Seed for the default disk layout.
pub const DEFAULT_LAYOUT_SEED: u64 = 1;

/// Every dimension of the marker design, shared by rendering and detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerGeometry {
    /// Width of the black square border as a fraction of the marker side.
    pub border_thickness: f64,
    /// Centre of the circular ring and of the coding area.
    pub circle_center: [f64; 2],
    /// Radius of the mid-line of the black ring.
    pub circle_radius: f64,
    pub ring_thickness: f64,
    /// Coding disks lie inside this radius around the centre.
    pub code_radius: f64,
    /// White margin outside the border, as a fraction of the marker side.
    pub quiet_zone: f64,
    /// Closing rounds applied to the code pattern.
    pub morphology_iterations: u32,
    pub disks: DiskLayout,
}

impl Default for MarkerGeometry {
    fn default() -> Self {
        static LAYOUT: OnceLock<DiskLayout> = OnceLock::new();
        let code_radius = 0.30;
        let disks = LAYOUT
            .get_or_init(|| {
                pack_disks(DISK_COUNT, code_radius, DEFAULT_LAYOUT_SEED, &PackOptions::default())
                    .expect("default layout")
                    .translated(0.5, 0.5)
            })
            .clone();
        Self {
            border_thickness: 0.1,
            circle_center: [0.5, 0.5],
            circle_radius: 0.35,
            ring_thickness: 0.04,
            code_radius,
            quiet_zone: 0.1,
            morphology_iterations: 1,
            disks,
        }
    }
}

impl MarkerGeometry {
    /// The default geometry, shared.
    pub fn shared() -> Arc<MarkerGeometry> {
        static SHARED: OnceLock<Arc<MarkerGeometry>> = OnceLock::new();
        SHARED.get_or_init(|| Arc::new(MarkerGeometry::default())).clone()
    }

    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.circle_center[0], self.circle_center[1])
    }

    pub fn ring_inner_radius(&self) -> f64 {
        self.circle_radius - self.ring_thickness / 2.0
    }

    pub fn ring_outer_radius(&self) -> f64 {
        self.circle_radius + self.ring_thickness / 2.0
    }

    /// Mid-line circle of the ring.
    pub fn circle(&self) -> Conic {
        self.circle_with_radius(self.circle_radius)
    }

    pub fn circle_with_radius(&self, r: f64) -> Conic {
        Conic::circle(self.circle_center[0], self.circle_center[1], r)
    }

    /// Whether the marker-plane point is printed black. Points outside the
    /// border are white paper.
    pub fn is_black_static(&self, u: f64, v: f64) -> Option<bool> {
        let b = self.border_thickness;
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Some(false);
        }
        if u < b || v < b || u > 1.0 - b || v > 1.0 - b {
            return Some(true);
        }
        let r = (u - self.circle_center[0]).hypot(v - self.circle_center[1]);
        if (r - self.circle_radius).abs() <= self.ring_thickness / 2.0 {
            return Some(true);
        }
        if r <= self.code_radius {
            // Decided by the code pattern.
            return None;
        }
        Some(false)
    }

    /// Structural checks: disks inside the coding area, no overlap, 4-fold
    /// symmetry with a quarter turn shifting indices by a quarter of the count.
    pub fn validate(&self) -> Result<(), String> {
        let d = &self.disks;
        let n = d.centers.len();
        if !n.is_multiple_of(ROTATIONS as usize) {
            return Err(format!("disk count {n} is not divisible by 4"));
        }
        let c = self.center();
        for (i, p) in d.centers.iter().enumerate() {
            let r = (Point2::new(p[0], p[1]) - c).norm();
            if r + d.radius > self.code_radius + 1e-9 || r + d.radius >= self.ring_inner_radius() {
                return Err(format!("disk {i} leaves the coding area"));
            }
            let q = d.centers[(i + n / 4) % n];
            let rotated = quarter_turn(p, &self.circle_center);
            if (rotated[0] - q[0]).abs() > 1e-9 || (rotated[1] - q[1]).abs() > 1e-9 {
                return Err(format!("disk {i} breaks the quarter-turn symmetry"));
            }
            for (j, q) in d.centers.iter().enumerate().skip(i + 1) {
                if (p[0] - q[0]).hypot(p[1] - q[1]) < 2.0 * d.radius - 1e-9 {
                    return Err(format!("disks {i} and {j} overlap"));
                }
            }
        }
        let b = self.border_thickness;
        if self.ring_outer_radius() >= 0.5 - b {
            return Err("ring touches the square border".into());
        }
        Ok(())
    }
}

/// Quarter turn about `c` in the marker plane: the corner order
/// `(0,0) -> (1,0) -> (1,1) -> (0,1)` advances by one.
pub fn quarter_turn(p: &[f64; 2], c: &[f64; 2]) -> [f64; 2] {
    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
    [c[0] - dy, c[1] + dx]
}
