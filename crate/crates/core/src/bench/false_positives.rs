//! False positive counts on marker-free images, with and without the
//! perspective validation step, for several libraries at once.
//!
//! Quads are extracted once per image and then decoded against each library
//! at its maximum correction. Counts are per candidate: every quad that
//! decodes is a false positive, so the validated set is a subset of the
//! unvalidated one by construction.

use std::path::{Path, PathBuf};

use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::library_for;
use super::vfp::{published_row, validation_failure_probability, validation_failure_probability_full_ec};
use crate::codec::MarkerLibrary;
use crate::detect::{evaluate_quads, extract_candidates, CandidateOutcome, DetectorConfig};
use crate::error::{Error, Result};
use crate::render::{load_gray, MarkerGeometry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsePositiveConfig {
    /// Minimum distances of the built-in libraries to scan.
    pub libraries: Vec<u32>,
    pub detector: DetectorConfig,
}

impl Default for FalsePositiveConfig {
    fn default() -> Self {
        Self {
            libraries: crate::codec::BUILTIN_DISTANCES.to_vec(),
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FalsePositiveRow {
    pub min_hd: u32,
    pub library_size: usize,
    pub max_correct: u32,
    pub images: usize,
    /// All quad candidates.
    pub quads: usize,
    /// Quads that pass perspective validation.
    pub candidates: usize,
    pub candidates_per_image: f64,
    pub false_positives_unvalidated: usize,
    pub false_positives: usize,
    /// The normalisation exactly as printed; `NaN` without candidates.
    pub vfp_formula: f64,
    /// The same with the correction as a plain power of two.
    pub vfp_full_ec: f64,
    pub published_library_size: u64,
    pub published_candidates: u64,
    pub published_false_positives_unvalidated: u64,
    pub published_false_positives: u64,
    pub published_vfp: f64,
}

/// Per-image, per-library outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageScan {
    pub quads: usize,
    /// Indexed like the configured libraries.
    pub outcomes: Vec<Vec<CandidateOutcome>>,
}

pub fn scan_image(
    image: &GrayImage,
    libraries: &[MarkerLibrary],
    geometry: &MarkerGeometry,
    detector: &DetectorConfig,
) -> ImageScan {
    let quads = extract_candidates(image, detector);
    ImageScan {
        quads: quads.len(),
        outcomes: libraries
            .iter()
            .map(|lib| evaluate_quads(image, &quads, lib, geometry, detector))
            .collect(),
    }
}

fn load_libraries(config: &FalsePositiveConfig) -> Result<Vec<MarkerLibrary>> {
    config.libraries.iter().map(|&d| library_for(d)).collect()
}

/// One row per library over any sequence of images.
pub fn run_false_positive_scan_images(
    images: impl IntoIterator<Item = GrayImage>,
    config: &FalsePositiveConfig,
) -> Result<Vec<FalsePositiveRow>> {
    let libraries = load_libraries(config)?;
    let geometry = MarkerGeometry::shared();
    let mut rows: Vec<FalsePositiveRow> = libraries
        .iter()
        .map(|lib| FalsePositiveRow {
            min_hd: lib.min_hamming_distance(),
            library_size: lib.len(),
            max_correct: config.detector.max_correct.unwrap_or_else(|| lib.max_correctable()),
            ..FalsePositiveRow::default()
        })
        .collect();
    let mut images_seen = 0;
    for image in images {
        images_seen += 1;
        let scan = scan_image(&image, &libraries, &geometry, &config.detector);
        for (row, outcomes) in rows.iter_mut().zip(&scan.outcomes) {
            row.quads += scan.quads;
            for o in outcomes {
                let ok = !config.detector.validate_perspective || o.perspective_ok;
                row.candidates += usize::from(ok);
                row.false_positives_unvalidated += usize::from(o.decoded.is_some());
                row.false_positives += usize::from(ok && o.decoded.is_some());
            }
        }
    }
    for (row, lib) in rows.iter_mut().zip(&libraries) {
        row.images = images_seen;
        row.candidates_per_image = row.candidates as f64 / images_seen.max(1) as f64;
        let (fp, cand, size) = (
            row.false_positives as u64,
            row.candidates as u64,
            row.library_size as u64,
        );
        row.vfp_formula =
            validation_failure_probability(fp, cand, size, row.max_correct, lib.code_length()).unwrap_or(f64::NAN);
        row.vfp_full_ec = validation_failure_probability_full_ec(fp, cand, size, row.max_correct).unwrap_or(f64::NAN);
        if let Some(p) = published_row(row.min_hd) {
            row.published_library_size = p.library_size;
            row.published_candidates = p.candidates;
            row.published_false_positives_unvalidated = p.false_positives_unvalidated;
            row.published_false_positives = p.false_positives;
            row.published_vfp = p.printed_probability;
        }
    }
    Ok(rows)
}

/// PNG and PGM files directly inside `dir`, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Scans every image in `dir`; any unreadable file aborts the scan.
pub fn run_false_positive_scan(dir: &Path, config: &FalsePositiveConfig) -> Result<Vec<FalsePositiveRow>> {
    let files = corpus_files(dir)?;
    let mut error = None;
    let images = files.iter().map_while(|p| match load_gray(p) {
        Ok(img) => Some(img),
        Err(e) => {
            error = Some(e);
            None
        }
    });
    let rows = run_false_positive_scan_images(images, config)?;
    match error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}
