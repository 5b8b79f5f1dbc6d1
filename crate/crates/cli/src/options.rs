//! Flags shared by several subcommands.

use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use ringmark::bench::library_for;
use ringmark::codec::{read_library, MarkerLibrary};
use ringmark::detect::DetectorConfig;

/// Overrides the default library when neither `--library` nor `--min-hd` is given.
pub const LIBRARY_ENV: &str = "RINGMARK_LIBRARY";
pub const DEFAULT_MIN_HD: u32 = 19;

#[derive(clap::Args, Serialize, Debug)]
pub struct LibraryArgs {
    /// STAGLIB library file.
    #[arg(long, conflicts_with = "min_hd")]
    pub library: Option<PathBuf>,
    /// Built-in library with this minimum distance (11, 13, ..., 23).
    #[arg(long)]
    pub min_hd: Option<u32>,
}

impl LibraryArgs {
    /// `--library`, then `--min-hd`, then `$RINGMARK_LIBRARY`, then the
    /// built-in HD19 library.
    pub fn load(&self) -> Result<MarkerLibrary> {
        let env = std::env::var_os(LIBRARY_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        let (lib, source) = match (&self.library, self.min_hd, env) {
            (Some(p), _, _) => (read(p)?, p.display().to_string()),
            (None, Some(hd), _) => (library_for(hd)?, format!("built-in HD{hd}")),
            (None, None, Some(p)) => (read(&p)?, format!("{} (from {LIBRARY_ENV})", p.display())),
            (None, None, None) => (library_for(DEFAULT_MIN_HD)?, format!("built-in HD{DEFAULT_MIN_HD}")),
        };
        info!(
            "library {source}: {} codewords, {} bits, minimum distance {}",
            lib.len(),
            lib.code_length(),
            lib.min_hamming_distance()
        );
        Ok(lib)
    }
}

fn read(path: &PathBuf) -> Result<MarkerLibrary> {
    read_library(path).with_context(|| format!("loading library {}", path.display()))
}

/// Detector overrides; unset flags keep the library defaults.
#[derive(clap::Args, Serialize, Debug, Default)]
pub struct DetectorArgs {
    /// Skip homography refinement from the ring.
    #[arg(long)]
    pub no_refine: bool,
    /// Skip the relative depth check on quads.
    #[arg(long)]
    pub no_validate: bool,
    /// Largest accepted far-to-near corner depth ratio.
    #[arg(long)]
    pub alpha_rel_max: Option<f64>,
    /// Bit errors corrected when decoding; defaults to the library maximum.
    #[arg(long)]
    pub max_correct: Option<u32>,
    /// Minimum grey-level gap between the white and black reference patches.
    #[arg(long)]
    pub min_contrast: Option<f64>,
    /// Gaussian smoothing before gradients, pixels.
    #[arg(long)]
    pub edge_sigma: Option<f64>,
    /// Minimum gradient magnitude for edge pixels.
    #[arg(long)]
    pub gradient_threshold: Option<f32>,
    /// Minimum rise of an anchor over its neighbours.
    #[arg(long)]
    pub anchor_threshold: Option<f32>,
    /// Anchor scan interval, rows and columns.
    #[arg(long)]
    pub scan_interval: Option<usize>,
    /// Shortest kept edge chain, pixels.
    #[arg(long)]
    pub min_segment: Option<usize>,
}

impl DetectorArgs {
    pub fn config(&self) -> DetectorConfig {
        let mut c = DetectorConfig {
            refine: !self.no_refine,
            validate_perspective: !self.no_validate,
            max_correct: self.max_correct,
            ..DetectorConfig::default()
        };
        if let Some(v) = self.alpha_rel_max {
            c.alpha_rel_max = v;
        }
        if let Some(v) = self.min_contrast {
            c.min_contrast = v;
        }
        let e = &mut c.edges;
        if let Some(v) = self.edge_sigma {
            e.smoothing_sigma = v;
        }
        if let Some(v) = self.gradient_threshold {
            e.gradient_threshold = v;
        }
        if let Some(v) = self.anchor_threshold {
            e.anchor_threshold = v;
        }
        if let Some(v) = self.scan_interval {
            e.scan_interval = v.max(1);
        }
        if let Some(v) = self.min_segment {
            e.min_segment_pixels = v;
        }
        c
    }
}

/// Logs the effective configuration of a run as one JSON line.
pub fn echo(what: &str, config: &impl Serialize) {
    info!("{what} config {}", serde_json::to_string(config).unwrap_or_default());
}
