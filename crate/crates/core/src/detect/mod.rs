//! Marker detection: edge chains, lines, corners and quads, perspective
//! validation, decoding, ring localisation and homography refinement.

mod decode;
mod edges;
mod ellipse;
mod quads;
mod report;

pub use decode::{
    bilinear, otsu_threshold, read_bits, sample_and_decode, validate_perspective, BitReading, DecodedQuad,
    DEFAULT_ALPHA_REL_MAX,
};
pub use edges::{detect_edge_segments, segments_from_gradient, EdgeParams, EdgeSegment, GradientMap};
pub use ellipse::{localize_ellipse, EllipseParams, RingMatch};
pub use quads::{
    canonical_order, chain_corners, dedup_quads, extract_quads, segment_lines, Corner, QuadCandidate, QuadParams,
    QuadProvenance,
};
pub use report::{draw_overlay, DetectionReport, ReportEntry};

use web_time::Instant;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::codec::MarkerLibrary;
use crate::geom::{refine_homography, Conic, Ellipse, Homography, NelderMeadOptions};
use crate::render::MarkerGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub edges: EdgeParams,
    pub quads: QuadParams,
    pub ellipse: EllipseParams,
    pub refinement: NelderMeadOptions,
    pub alpha_rel_max: f64,
    pub validate_perspective: bool,
    /// Correction budget; `None` uses the library maximum.
    pub max_correct: Option<u32>,
    /// Minimum grey-level difference between the white and black reference
    /// patches of a candidate.
    pub min_contrast: f64,
    pub refine: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            edges: EdgeParams::default(),
            quads: QuadParams::default(),
            ellipse: EllipseParams::default(),
            refinement: NelderMeadOptions::default(),
            alpha_rel_max: DEFAULT_ALPHA_REL_MAX,
            validate_perspective: true,
            max_correct: None,
            min_contrast: 10.0,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerDetection {
    pub marker_id: usize,
    pub rotation: u32,
    /// Image corner `k` corresponds to marker corner `k` of the unit square.
    pub corners: [[f64; 2]; 4],
    pub h_initial: Homography,
    pub h_refined: Homography,
    pub refinement_skipped: bool,
    pub ellipse: Option<Ellipse>,
    pub ellipse_conic: Option<Conic>,
    /// Ring edge radius the ellipse was matched to.
    pub ring_radius: Option<f64>,
    pub decode_distance: u32,
    /// Circle/ellipse discrepancy before and after refinement.
    pub initial_error: f64,
    pub refined_error: f64,
    pub provenance: QuadProvenance,
}

impl MarkerDetection {
    /// The homography to use downstream.
    pub fn homography(&self) -> &Homography {
        &self.h_refined
    }
}

/// Wall-clock time per stage, milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub edges: f64,
    pub lines: f64,
    pub candidates: f64,
    pub validation: f64,
    pub ellipse: f64,
    pub refinement: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.edges + self.lines + self.candidates + self.validation + self.ellipse + self.refinement
    }

    pub const NAMES: [&'static str; 6] = ["edges", "lines", "candidates", "validation", "ellipse", "refinement"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.edges,
            self.lines,
            self.candidates,
            self.validation,
            self.ellipse,
            self.refinement,
        ]
    }
}

/// Fate of one quad candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub quad: QuadCandidate,
    pub perspective_ok: bool,
    /// `(id, rotation, distance)` when the codeword matched.
    pub decoded: Option<(usize, u32, u32)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    pub detections: Vec<MarkerDetection>,
    pub edge_segments: usize,
    pub quads: usize,
    pub validated: usize,
    pub decoded: usize,
    pub refined: usize,
    pub timings: StageTimings,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Lines per chain, then quads from corner runs.
fn candidates(segments: &[EdgeSegment], params: &QuadParams, timings: &mut StageTimings) -> Vec<QuadCandidate> {
    let t = Instant::now();
    let lines: Vec<_> = segments.iter().map(|s| segment_lines(s, params)).collect();
    timings.lines = ms(t);
    let t = Instant::now();
    let quads = quads::quads_from_lines(segments, &lines, params);
    timings.candidates = ms(t);
    quads
}

fn budget(library: &MarkerLibrary, config: &DetectorConfig) -> u32 {
    config.max_correct.unwrap_or_else(|| library.max_correctable())
}

/// Full pipeline with per-stage counts and timings.
pub fn detect_markers_with_stats(
    image: &GrayImage,
    library: &MarkerLibrary,
    geometry: &MarkerGeometry,
    config: &DetectorConfig,
) -> DetectionRun {
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let segments = detect_edge_segments(image, &config.edges);
    timings.edges = ms(t);
    let quads = candidates(&segments, &config.quads, &mut timings);

    let t = Instant::now();
    let max_correct = budget(library, config);
    let validated: Vec<&QuadCandidate> = quads
        .iter()
        .filter(|q| !config.validate_perspective || validate_perspective(q, config.alpha_rel_max))
        .collect();
    let mut decoded: Vec<(DecodedQuad, QuadProvenance)> = validated
        .iter()
        .filter_map(|q| {
            sample_and_decode(image, q, library, geometry, max_correct, config.min_contrast).map(|d| (d, q.provenance))
        })
        .collect();
    let decoded_count = decoded.len();
    decoded = dedup_decoded(decoded);
    timings.validation = ms(t);

    let mut detections = Vec::with_capacity(decoded.len());
    let mut refined = 0;
    for (d, provenance) in decoded {
        let t = Instant::now();
        let ring = localize_ellipse(&segments, &d.corners, &d.homography, geometry, &config.ellipse);
        timings.ellipse += ms(t);
        let t = Instant::now();
        let circle = ring.as_ref().map(|r| geometry.circle_with_radius(r.radius));
        let outcome = match (&ring, &circle, config.refine) {
            (Some(r), Some(c), true) => Some(refine_homography(&d.homography, Some(&r.conic), c, &config.refinement)),
            _ => None,
        };
        timings.refinement += ms(t);
        let (h_refined, skipped, e0, e1) = match outcome {
            Some(o) => (o.homography, o.skipped, o.initial_error, o.final_error),
            None => (d.homography, true, f64::INFINITY, f64::INFINITY),
        };
        refined += usize::from(!skipped);
        detections.push(MarkerDetection {
            marker_id: d.result.marker_id,
            rotation: d.result.rotation,
            corners: d.corners,
            h_initial: d.homography,
            h_refined,
            refinement_skipped: skipped,
            ellipse: ring.as_ref().map(|r| r.ellipse),
            ellipse_conic: ring.as_ref().map(|r| r.conic),
            ring_radius: ring.as_ref().map(|r| r.radius),
            decode_distance: d.result.hamming_distance,
            initial_error: e0,
            refined_error: e1,
            provenance,
        });
    }
    detections.sort_by(|a, b| {
        a.marker_id
            .cmp(&b.marker_id)
            .then(a.corners[0][1].total_cmp(&b.corners[0][1]))
            .then(a.corners[0][0].total_cmp(&b.corners[0][0]))
    });
    DetectionRun {
        detections,
        edge_segments: segments.len(),
        quads: quads.len(),
        validated: validated.len(),
        decoded: decoded_count,
        refined,
        timings,
    }
}

/// Detected markers sorted by id, then by position.
pub fn detect_markers(
    image: &GrayImage,
    library: &MarkerLibrary,
    geometry: &MarkerGeometry,
    config: &DetectorConfig,
) -> Vec<MarkerDetection> {
    detect_markers_with_stats(image, library, geometry, config).detections
}

/// Drops repeated reads of one physical marker: same id and nearby centre.
fn dedup_decoded(mut all: Vec<(DecodedQuad, QuadProvenance)>) -> Vec<(DecodedQuad, QuadProvenance)> {
    // Four-corner quads and lower decode distances win.
    all.sort_by_key(|(d, p)| ((*p != QuadProvenance::FourCorner) as u8, d.result.hamming_distance));
    let centre = |c: &[[f64; 2]; 4]| [(c[0][0] + c[2][0]) / 2.0, (c[0][1] + c[2][1]) / 2.0];
    let size = |c: &[[f64; 2]; 4]| (c[0][0] - c[2][0]).hypot(c[0][1] - c[2][1]);
    let mut kept: Vec<(DecodedQuad, QuadProvenance)> = Vec::new();
    for (d, p) in all {
        let (cd, sd) = (centre(&d.corners), size(&d.corners));
        let dup = kept.iter().any(|(k, _)| {
            let ck = centre(&k.corners);
            k.result.marker_id == d.result.marker_id
                && (ck[0] - cd[0]).hypot(ck[1] - cd[1]) < 0.25 * sd.min(size(&k.corners))
        });
        if !dup {
            kept.push((d, p));
        }
    }
    kept
}

/// Quad candidates of an image, before validation and decoding.
pub fn extract_candidates(image: &GrayImage, config: &DetectorConfig) -> Vec<QuadCandidate> {
    let segments = detect_edge_segments(image, &config.edges);
    candidates(&segments, &config.quads, &mut StageTimings::default())
}

/// Validation and decoding outcome of each quad, decoding regardless of
/// validation. Used for validation ablations.
pub fn evaluate_quads(
    image: &GrayImage,
    quads: &[QuadCandidate],
    library: &MarkerLibrary,
    geometry: &MarkerGeometry,
    config: &DetectorConfig,
) -> Vec<CandidateOutcome> {
    let max_correct = budget(library, config);
    quads
        .iter()
        .map(|quad| CandidateOutcome {
            perspective_ok: validate_perspective(quad, config.alpha_rel_max),
            decoded: sample_and_decode(image, quad, library, geometry, max_correct, config.min_contrast)
                .map(|d| (d.result.marker_id, d.result.rotation, d.result.hamming_distance)),
            quad: *quad,
        })
        .collect()
}

/// [`extract_candidates`] followed by [`evaluate_quads`].
pub fn evaluate_candidates(
    image: &GrayImage,
    library: &MarkerLibrary,
    geometry: &MarkerGeometry,
    config: &DetectorConfig,
) -> Vec<CandidateOutcome> {
    let quads = extract_candidates(image, config);
    evaluate_quads(image, &quads, library, geometry, config)
}
