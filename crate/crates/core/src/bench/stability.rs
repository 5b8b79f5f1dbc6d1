//! Viewing-angle and distance sweeps over a static synthetic marker.
//!
//! Each sweep point renders one clean scene and draws `trials` frames from
//! it with fresh sensor noise, so any spread in the estimates is jitter.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::{library_for, MIN_TRIALS_FOR_STD};
use crate::detect::{detect_markers_with_stats, DetectorConfig, MarkerDetection, StageTimings};
use crate::error::{Error, Result};
use crate::geom::Homography;
use crate::pose::{homography_center_spread, jitter_stats, pose_from_homography, Pose};
use crate::render::{
    viewing_angle_deg, Background, MarkerGeometry, MarkerGroundTruth, MarkerPlacement, NoiseSpec, SceneSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Values are viewing angles in degrees at a fixed distance.
    Angle,
    /// Values are distances in metres at a fixed angle.
    Distance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub sweep: SweepKind,
    pub values: Vec<f64>,
    /// Frames per sweep point.
    pub trials: usize,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Selects the built-in library.
    pub min_hd: u32,
    pub marker_id: usize,
    /// Metres.
    pub marker_side: f64,
    /// Distance used by angle sweeps, metres.
    pub distance: f64,
    /// Angle used by distance sweeps, degrees.
    pub angle: f64,
    /// In-plane rotation of the marker, degrees.
    pub spin: f64,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub background: u8,
    pub detector: DetectorConfig,
}

fn steps(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| from + step * k as f64).collect()
}

impl StabilityConfig {
    /// 15 cm marker at 1 m on a 1280x720 camera, 0 to 85 degrees in 5 degree
    /// steps, 200 frames per angle with sensor noise of 2 grey levels.
    pub fn angle_sweep() -> Self {
        Self {
            sweep: SweepKind::Angle,
            values: steps(0.0, 85.0, 5.0),
            trials: 200,
            noise: NoiseSpec::sensor(2.0),
            seed: 1,
            min_hd: 19,
            marker_id: 3,
            marker_side: 0.15,
            distance: 1.0,
            angle: 0.0,
            spin: 0.0,
            width: 1280,
            height: 720,
            focal: 1000.0,
            background: 190,
            detector: DetectorConfig::default(),
        }
    }

    /// The same rig facing the camera from 0.5 m to 2.5 m in 25 cm steps.
    pub fn distance_sweep() -> Self {
        Self {
            sweep: SweepKind::Distance,
            values: steps(0.5, 2.5, 0.25),
            ..Self::angle_sweep()
        }
    }

    pub fn placement(&self, value: f64) -> MarkerPlacement {
        let (distance, angle) = match self.sweep {
            SweepKind::Angle => (self.distance, value),
            SweepKind::Distance => (value, self.angle),
        };
        MarkerPlacement::tilted(self.marker_id, self.marker_side, distance, angle, self.spin, [0.0, 0.0])
    }

    pub fn scene(&self, value: f64) -> SceneSpec {
        let mut spec = SceneSpec::new(self.width, self.height, self.focal);
        spec.background = Background::Flat(self.background);
        spec.markers.push(self.placement(value));
        spec.noise = self.noise;
        spec
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub value: f64,
    pub viewing_angle: f64,
    /// Longest and shortest imaged side, pixels.
    pub span_px: f64,
    pub min_side_px: f64,
    pub frames: usize,
    pub detected: usize,
    pub detection_rate: f64,
    pub false_negatives: usize,
    /// Detections that are not the placed marker.
    pub false_positives: usize,
    /// Frames where the ring was found and refinement ran.
    pub refined: usize,
    /// Degrees. `NaN` below the minimum frame count.
    pub rotation_std_pre: f64,
    pub rotation_std_post: f64,
    /// Metres.
    pub translation_std_pre: f64,
    pub translation_std_post: f64,
    /// Pixels; the marker centre mapped through each frame's homography.
    pub center_std_pre: f64,
    pub center_std_post: f64,
    /// Mean milliseconds per frame.
    pub ms_edges: f64,
    pub ms_lines: f64,
    pub ms_candidates: f64,
    pub ms_validation: f64,
    pub ms_ellipse: f64,
    pub ms_refinement: f64,
    pub ms_total: f64,
}

fn centre(c: &[[f64; 2]; 4]) -> [f64; 2] {
    let s = c.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
    [s[0] / 4.0, s[1] / 4.0]
}

fn side_lengths(c: &[[f64; 2]; 4]) -> [f64; 4] {
    std::array::from_fn(|i| {
        let (a, b) = (c[i], c[(i + 1) % 4]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    })
}

/// Whether a detection is the ground-truth marker.
fn matches(d: &MarkerDetection, gt: &MarkerGroundTruth) -> bool {
    let (a, b) = (centre(&d.corners), centre(&gt.corners));
    let size = side_lengths(&gt.corners).into_iter().fold(0.0, f64::max);
    d.marker_id == gt.id && (a[0] - b[0]).hypot(a[1] - b[1]) < 0.25 * size
}

struct Track {
    h_pre: Vec<Homography>,
    h_post: Vec<Homography>,
    pose_pre: Vec<Pose>,
    pose_post: Vec<Pose>,
}

fn spreads(
    track: &Track,
    camera: &crate::pose::CameraIntrinsics,
    centre: &Point2<f64>,
    row: &mut StabilityRow,
) -> Result<()> {
    let nan = f64::NAN;
    (row.rotation_std_pre, row.rotation_std_post) = (nan, nan);
    (row.translation_std_pre, row.translation_std_post) = (nan, nan);
    (row.center_std_pre, row.center_std_post) = (nan, nan);
    if track.h_pre.len() < MIN_TRIALS_FOR_STD {
        return Ok(());
    }
    row.center_std_pre = homography_center_spread(&track.h_pre, centre)?;
    row.center_std_post = homography_center_spread(&track.h_post, centre)?;
    // Pose origin is the marker centre.
    let origin = Point2::origin();
    if track.pose_pre.len() >= MIN_TRIALS_FOR_STD {
        let j = jitter_stats(&track.pose_pre, camera, &origin)?;
        (row.rotation_std_pre, row.translation_std_pre) = (j.rotation_std, j.translation_std);
    }
    if track.pose_post.len() >= MIN_TRIALS_FOR_STD {
        let j = jitter_stats(&track.pose_post, camera, &origin)?;
        (row.rotation_std_post, row.translation_std_post) = (j.rotation_std, j.translation_std);
    }
    Ok(())
}

/// One row per sweep value. Frame `t` of point `i` uses noise seed
/// `seed + i * trials + t`.
pub fn run_stability_sweep(config: &StabilityConfig) -> Result<Vec<StabilityRow>> {
    if config.trials < 2 {
        return Err(Error::invalid("stability sweeps need at least two frames per point"));
    }
    let library = library_for(config.min_hd)?;
    if config.marker_id >= library.len() {
        return Err(Error::IdOutOfRange {
            id: config.marker_id,
            len: library.len(),
        });
    }
    let geometry = MarkerGeometry::shared();
    let mut rows = Vec::with_capacity(config.values.len());
    for (i, &value) in config.values.iter().enumerate() {
        let spec = config.scene(value);
        let clean = spec.render_clean(&library, geometry.clone())?;
        let gt = &clean.ground_truth[0];
        let sides = side_lengths(&gt.corners);
        let mut row = StabilityRow {
            value,
            viewing_angle: viewing_angle_deg(&gt.pose),
            span_px: sides.iter().copied().fold(0.0, f64::max),
            min_side_px: sides.iter().copied().fold(f64::INFINITY, f64::min),
            frames: config.trials,
            ..StabilityRow::default()
        };
        let mut track = Track {
            h_pre: Vec::new(),
            h_post: Vec::new(),
            pose_pre: Vec::new(),
            pose_post: Vec::new(),
        };
        let mut times = StageTimings::default();
        for t in 0..config.trials {
            let seed = config.seed.wrapping_add((i * config.trials + t) as u64);
            let image = clean.with_noise(&config.noise, seed);
            let run = detect_markers_with_stats(&image, &library, &geometry, &config.detector);
            let tv = run.timings.values();
            times.edges += tv[0];
            times.lines += tv[1];
            times.candidates += tv[2];
            times.validation += tv[3];
            times.ellipse += tv[4];
            times.refinement += tv[5];
            let mut found = false;
            for d in &run.detections {
                if !found && matches(d, gt) {
                    found = true;
                    row.refined += usize::from(!d.refinement_skipped);
                    track.h_pre.push(d.h_initial);
                    track.h_post.push(d.h_refined);
                    if let Ok(p) = pose_from_homography(&d.h_initial, &clean.camera, config.marker_side) {
                        track.pose_pre.push(p);
                    }
                    if let Ok(p) = pose_from_homography(&d.h_refined, &clean.camera, config.marker_side) {
                        track.pose_post.push(p);
                    }
                } else {
                    row.false_positives += 1;
                }
            }
            row.detected += usize::from(found);
        }
        row.false_negatives = row.frames - row.detected;
        row.detection_rate = row.detected as f64 / row.frames as f64;
        let n = config.trials as f64;
        row.ms_edges = times.edges / n;
        row.ms_lines = times.lines / n;
        row.ms_candidates = times.candidates / n;
        row.ms_validation = times.validation / n;
        row.ms_ellipse = times.ellipse / n;
        row.ms_refinement = times.refinement / n;
        row.ms_total = times.total() / n;
        spreads(&track, &clean.camera, &geometry.center(), &mut row)?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweeps() {
        let a = StabilityConfig::angle_sweep();
        assert_eq!(a.values.len(), 18);
        assert_eq!(a.values[17], 85.0);
        let d = StabilityConfig::distance_sweep();
        assert_eq!(d.values, vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5]);
    }

    #[test]
    fn noiseless_frontal_marker_has_no_jitter() {
        let config = StabilityConfig {
            values: vec![0.0],
            trials: MIN_TRIALS_FOR_STD,
            noise: NoiseSpec::default(),
            ..StabilityConfig::angle_sweep()
        };
        let rows = run_stability_sweep(&config).unwrap();
        let r = &rows[0];
        assert_eq!((r.detected, r.false_positives), (config.trials, 0));
        for s in [
            r.center_std_pre,
            r.center_std_post,
            r.rotation_std_post,
            r.translation_std_post,
        ] {
            assert!(s.abs() < 1e-9, "{r:?}");
        }
        assert!((r.span_px - 150.0).abs() < 1.0);
    }

    #[test]
    fn too_few_frames_report_no_spread() {
        let config = StabilityConfig {
            values: vec![20.0],
            trials: 4,
            ..StabilityConfig::angle_sweep()
        };
        let r = &run_stability_sweep(&config).unwrap()[0];
        assert_eq!(r.detected, 4);
        assert!(r.center_std_pre.is_nan() && r.rotation_std_post.is_nan());
    }
}
