//! Per-stage wall-clock profile of the detector on one image.

use std::sync::Arc;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::corpus::{corpus_image, CorpusSpec};
use super::median;
use crate::codec::MarkerLibrary;
use crate::detect::{detect_markers_with_stats, DetectorConfig, StageTimings};
use crate::error::Result;
use crate::render::{render_scene, Background, MarkerGeometry, MarkerPlacement, NoiseSpec, SceneSpec, SyntheticScene};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    pub runs: usize,
    pub detections: usize,
    /// Median milliseconds per stage, in pipeline order.
    pub stages: StageTimings,
    /// Median of the per-run totals.
    pub total: f64,
}

impl TimingProfile {
    /// Name of the stage with the largest median.
    pub fn dominant_stage(&self) -> &'static str {
        let v = self.stages.values();
        let i = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
        StageTimings::NAMES[i]
    }

    pub fn fraction(&self, stage: usize) -> f64 {
        self.stages.values()[stage] / self.total.max(f64::MIN_POSITIVE)
    }
}

/// A 1280x720 frame: clutter background with four markers at assorted poses
/// and sensor noise of 2 grey levels.
pub fn timing_scene(library: &MarkerLibrary, seed: u64) -> Result<SyntheticScene> {
    let clutter = corpus_image(
        &CorpusSpec {
            count: 1,
            width: 1280,
            height: 720,
            shapes: 60,
            seed,
        },
        0,
    );
    let mut spec = SceneSpec::new(1280, 720, 1000.0);
    spec.background = Background::Image(Arc::new(clutter));
    let n = library.len();
    spec.markers = vec![
        MarkerPlacement::tilted(0, 0.15, 1.2, 20.0, 15.0, [-0.35, -0.1]),
        MarkerPlacement::tilted(1 % n, 0.15, 1.5, 45.0, 100.0, [0.3, 0.12]),
        MarkerPlacement::tilted(2 % n, 0.1, 0.9, 0.0, 250.0, [0.05, -0.15]),
        MarkerPlacement::tilted(3 % n, 0.12, 2.0, 60.0, 40.0, [-0.1, 0.3]),
    ];
    spec.noise = NoiseSpec::sensor(2.0);
    spec.seed = seed;
    render_scene(&spec, library, MarkerGeometry::shared())
}

/// Runs the full pipeline `runs` times on one thread.
pub fn run_timing_profile(
    image: &GrayImage,
    library: &MarkerLibrary,
    config: &DetectorConfig,
    runs: usize,
) -> TimingProfile {
    let geometry = MarkerGeometry::shared();
    let runs = runs.max(1);
    let mut per_stage: [Vec<f64>; 6] = Default::default();
    let mut totals = Vec::with_capacity(runs);
    let mut detections = 0;
    for _ in 0..runs {
        let run = detect_markers_with_stats(image, library, &geometry, config);
        detections = run.detections.len();
        for (acc, v) in per_stage.iter_mut().zip(run.timings.values()) {
            acc.push(v);
        }
        totals.push(run.timings.total());
    }
    let m: Vec<f64> = per_stage.iter_mut().map(|v| median(v)).collect();
    TimingProfile {
        runs,
        detections,
        stages: StageTimings {
            edges: m[0],
            lines: m[1],
            candidates: m[2],
            validation: m[3],
            ellipse: m[4],
            refinement: m[5],
        },
        total: median(&mut totals),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::builtin_library;

    #[test]
    fn blank_image_is_all_edges() {
        let lib = builtin_library(19).unwrap();
        let img = GrayImage::from_pixel(320, 240, image::Luma([90]));
        let p = run_timing_profile(&img, &lib, &DetectorConfig::default(), 5);
        assert_eq!(p.detections, 0);
        assert_eq!(p.dominant_stage(), "edges");
    }

    #[test]
    fn timing_scene_markers_are_found() {
        let lib = builtin_library(19).unwrap();
        let scene = timing_scene(&lib, 3).unwrap();
        let p = run_timing_profile(&scene.image, &lib, &DetectorConfig::default(), 3);
        assert_eq!(p.detections, 4);
    }
}
