//! Experiment harness: localisation Monte Carlo, stability sweeps, false
//! positive scans with the validation ablation, and per-stage timing.
//!
//! Every experiment writes one or more CSV tables plus a JSON manifest that
//! echoes the configuration, the seed and the desk-scale substitutions.

pub mod corpus;
pub mod false_positives;
pub mod localization;
pub mod stability;
pub mod timing;
pub mod vfp;

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::{builtin_library, MarkerLibrary};
use crate::error::{Error, Result};

pub use corpus::{generate_corpus, write_corpus, CorpusSpec};
pub use false_positives::{
    run_false_positive_scan, run_false_positive_scan_images, FalsePositiveConfig, FalsePositiveRow,
};
pub use localization::{run_localization_sim, LocalizationPoint};
pub use stability::{run_stability_sweep, StabilityConfig, StabilityRow, SweepKind};
pub use timing::{run_timing_profile, timing_scene, TimingProfile};
pub use vfp::{validation_failure_probability, validation_failure_probability_full_ec, PUBLISHED};

/// Smallest frame count for which a standard deviation is reported.
pub const MIN_TRIALS_FOR_STD: usize = 30;

/// Machine-readable record of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Ways the run is scaled down or substituted relative to the full study.
    pub scaling: Vec<String>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64, config: &impl Serialize, scaling: Vec<String>) -> Self {
        Self {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config).expect("config serialises"),
            scaling,
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.experiment));
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Writes `rows` as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Embedded library for a minimum distance, or an error naming the valid ones.
pub fn library_for(min_hd: u32) -> Result<MarkerLibrary> {
    builtin_library(min_hd).ok_or_else(|| {
        Error::invalid(format!(
            "no built-in library with minimum distance {min_hd} (have {:?})",
            crate::codec::BUILTIN_DISTANCES
        ))
    })
}

/// Median of a non-empty sample.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn csv_and_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &[Row { a: 1, b: 0.5 }, Row { a: 2, b: 1.5 }]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,0.5\n2,1.5\n");
        let mut m = Manifest::new("demo", 3, &serde_json::json!({"k": 1}), vec!["x".into()]);
        m.files.push("t.csv".into());
        let path = m.write(dir.path()).unwrap();
        let back: Manifest = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(library_for(12).is_err());
    }
}
