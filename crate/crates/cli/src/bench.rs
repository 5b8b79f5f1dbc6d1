//! `ringmark bench <experiment>`: each experiment writes its CSV tables and a
//! JSON manifest into `--out`, and prints the written paths on stdout.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use ringmark::bench::corpus::corpus_image;
use ringmark::bench::localization::default_sigmas;
use ringmark::bench::{
    library_for, run_false_positive_scan, run_false_positive_scan_images, run_localization_sim, run_stability_sweep,
    run_timing_profile, timing_scene, write_corpus, write_csv, CorpusSpec, FalsePositiveConfig, Manifest,
    StabilityConfig, SweepKind,
};
use ringmark::codec::BUILTIN_DISTANCES;
use ringmark::detect::StageTimings;
use ringmark::render::{load_gray, save_gray, NoiseSpec};

use crate::options::{echo, DetectorArgs};

#[derive(Subcommand)]
pub enum Experiment {
    /// Square versus circle localisation under boundary noise.
    LocalizationSim {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Comma-separated noise levels in units of the shape size.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Detection rate and jitter over a viewing angle or distance sweep.
    Stability {
        #[arg(long, value_enum, default_value_t = Sweep::Angle)]
        sweep: Sweep,
        /// Comma-separated sweep values (degrees or metres).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Sensor noise, grey levels.
        #[arg(long, default_value_t = 2.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        blur: f64,
        #[arg(long, default_value_t = 19)]
        min_hd: u32,
        #[arg(long, default_value_t = 3)]
        id: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// False positives on marker-free images with and without validation.
    FalsePositives {
        /// Directory of PNG/PGM images; procedural clutter when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Procedural images to generate when no corpus is given.
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Comma-separated minimum distances of built-in libraries.
        #[arg(long, value_delimiter = ',')]
        libraries: Option<Vec<u32>>,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Median per-stage detection time on one image.
    Timing {
        /// Image to time; a synthetic 1280x720 clutter scene when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 19)]
        min_hd: u32,
        #[arg(long, default_value_t = 10)]
        seed: u64,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Write the procedural clutter corpus as PNG files.
    Corpus {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum Sweep {
    Angle,
    Distance,
}

#[derive(Serialize)]
struct StageRow {
    stage: &'static str,
    median_ms: f64,
    fraction: f64,
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes the manifest and reports every file on stdout.
fn finish(mut manifest: Manifest, dir: &Path, files: Vec<PathBuf>) -> Result<()> {
    manifest.files = files.iter().map(|p| p.display().to_string()).collect();
    let path = manifest.write(dir)?;
    for f in files.iter().chain([&path]) {
        println!("{}", f.display());
    }
    Ok(())
}

pub fn run(experiment: &Experiment) -> Result<()> {
    match experiment {
        Experiment::LocalizationSim {
            trials,
            sigmas,
            seed,
            out,
        } => {
            let sigmas = sigmas.clone().unwrap_or_else(default_sigmas);
            #[derive(Serialize)]
            struct Config<'a> {
                trials: usize,
                sigmas: &'a [f64],
            }
            let config = Config {
                trials: *trials,
                sigmas: &sigmas,
            };
            echo("localization-sim", &config);
            prepare(out)?;
            let points = run_localization_sim(&sigmas, *trials, *seed);
            for p in &points {
                info!(
                    "sigma {:.3}: quad {:.5} ellipse {:.5}",
                    p.sigma, p.quad_error, p.ellipse_error
                );
            }
            let csv = out.join("localization.csv");
            write_csv(&csv, &points)?;
            finish(
                Manifest::new("localization", *seed, &config, Vec::new()),
                out,
                vec![csv],
            )
        }
        Experiment::Stability {
            sweep,
            values,
            trials,
            noise,
            blur,
            min_hd,
            id,
            seed,
            detector,
            out,
        } => {
            let base = match sweep {
                Sweep::Angle => StabilityConfig::angle_sweep(),
                Sweep::Distance => StabilityConfig::distance_sweep(),
            };
            let config = StabilityConfig {
                values: values.clone().unwrap_or(base.values.clone()),
                trials: *trials,
                noise: NoiseSpec {
                    blur_sigma: *blur,
                    ..NoiseSpec::sensor(*noise)
                },
                seed: *seed,
                min_hd: *min_hd,
                marker_id: *id,
                detector: detector.config(),
                ..base
            };
            echo("stability", &config);
            prepare(out)?;
            let rows = run_stability_sweep(&config)?;
            for r in &rows {
                info!(
                    "{:>5.2}: detected {}/{}, centre jitter {:.4} -> {:.4} px",
                    r.value, r.detected, r.frames, r.center_std_pre, r.center_std_post
                );
            }
            let name = match config.sweep {
                SweepKind::Angle => "stability_angle",
                SweepKind::Distance => "stability_distance",
            };
            let csv = out.join(format!("{name}.csv"));
            write_csv(&csv, &rows)?;
            let scaling = vec!["rendered frames with synthetic sensor noise instead of camera footage".to_string()];
            finish(Manifest::new(name, *seed, &config, scaling), out, vec![csv])
        }
        Experiment::FalsePositives {
            corpus,
            count,
            seed,
            libraries,
            detector,
            out,
        } => {
            let config = FalsePositiveConfig {
                libraries: libraries.clone().unwrap_or(BUILTIN_DISTANCES.to_vec()),
                detector: detector.config(),
            };
            echo("false-positives", &config);
            prepare(out)?;
            let (rows, scaling) = match corpus {
                Some(dir) => {
                    info!("scanning {}", dir.display());
                    (run_false_positive_scan(dir, &config)?, Vec::new())
                }
                None => {
                    let spec = CorpusSpec {
                        count: *count,
                        seed: *seed,
                        ..CorpusSpec::default()
                    };
                    echo("corpus", &spec);
                    let images = (0..spec.count).map(|i| corpus_image(&spec, i));
                    let note = format!(
                        "{} procedural clutter images instead of a photographic corpus",
                        spec.count
                    );
                    (run_false_positive_scan_images(images, &config)?, vec![note])
                }
            };
            for r in &rows {
                info!(
                    "HD{}: {} candidates, false positives {} validated / {} unvalidated",
                    r.min_hd, r.candidates, r.false_positives, r.false_positives_unvalidated
                );
            }
            let csv = out.join("false_positives.csv");
            write_csv(&csv, &rows)?;
            finish(
                Manifest::new("false_positives", *seed, &config, scaling),
                out,
                vec![csv],
            )
        }
        Experiment::Timing {
            image,
            runs,
            min_hd,
            seed,
            detector,
            out,
        } => {
            let lib = library_for(*min_hd)?;
            let config = detector.config();
            echo("timing", &config);
            prepare(out)?;
            let mut files = Vec::new();
            let (frame, scaling) = match image {
                Some(p) => (load_gray(p)?, Vec::new()),
                None => {
                    let frame = timing_scene(&lib, *seed)?.image;
                    let path = out.join("timing_scene.png");
                    save_gray(&frame, &path)?;
                    files.push(path);
                    (
                        frame,
                        vec!["synthetic 1280x720 clutter frame with four markers".to_string()],
                    )
                }
            };
            let profile = run_timing_profile(&frame, &lib, &config, *runs);
            info!(
                "median {:.2} ms over {} runs, {} markers, largest stage {}",
                profile.total,
                profile.runs,
                profile.detections,
                profile.dominant_stage()
            );
            let mut rows: Vec<StageRow> = StageTimings::NAMES
                .iter()
                .zip(profile.stages.values())
                .enumerate()
                .map(|(i, (stage, ms))| StageRow {
                    stage,
                    median_ms: ms,
                    fraction: profile.fraction(i),
                })
                .collect();
            rows.push(StageRow {
                stage: "total",
                median_ms: profile.total,
                fraction: 1.0,
            });
            let csv = out.join("timing.csv");
            write_csv(&csv, &rows)?;
            files.insert(0, csv);
            finish(Manifest::new("timing", *seed, &config, scaling), out, files)
        }
        Experiment::Corpus {
            count,
            seed,
            width,
            height,
            out,
        } => {
            let spec = CorpusSpec {
                count: *count,
                seed: *seed,
                width: *width,
                height: *height,
                ..CorpusSpec::default()
            };
            echo("corpus", &spec);
            let files = write_corpus(&spec, out)?;
            info!("wrote {} images to {}", files.len(), out.display());
            finish(Manifest::new("corpus", *seed, &spec, Vec::new()), out, Vec::new())
        }
    }
}
