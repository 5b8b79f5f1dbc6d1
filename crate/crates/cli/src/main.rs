//! `ringmark`: generate libraries, render markers and scenes, detect markers
//! in images and run the benchmark experiments.
//!
//! Machine-readable output goes to stdout or files; logs, including the
//! effective configuration of every run, go to stderr.

mod bench;
mod options;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use ringmark::codec::{format_library, generate_library, max_ber_correction, write_library, GenerationMode};
use ringmark::detect::{detect_markers_with_stats, draw_overlay, DetectionReport};
use ringmark::pose::CameraIntrinsics;
use ringmark::render::{
    load_gray, read_sidecar, render_marker, render_scene, render_sheet, save_gray, write_sidecar, Background,
    MarkerGeometry, MarkerPlacement, NoiseSpec, SceneRecord, SceneSpec, MIN_MARKER_SIDE,
};

use options::{echo, DetectorArgs, LibraryArgs};

#[derive(Parser)]
#[command(name = "ringmark", version, about = "Square fiducial markers with an inner ring")]
struct Cli {
    /// Log filter for stderr (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a codeword library and write it in STAGLIB format.
    Generate(GenerateArgs),
    /// Render one marker, or a printable sheet of markers.
    Render(RenderArgs),
    /// Render a synthetic camera view of a marker with a ground-truth sidecar.
    Scene(SceneArgs),
    /// Detect markers in an image.
    Detect(DetectArgs),
    /// Run a benchmark experiment and write CSV tables plus a manifest.
    Bench {
        #[command(subcommand)]
        experiment: bench::Experiment,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Hierarchical,
    Direct,
}

fn code_bits(s: &str) -> std::result::Result<u32, String> {
    let n: u32 = s.parse().map_err(|e| format!("{e}"))?;
    if n == 0 || !n.is_multiple_of(4) || n > 64 {
        return Err(format!("{n} is not a positive multiple of 4 up to 64"));
    }
    Ok(n)
}

#[derive(clap::Args, Serialize)]
struct GenerateArgs {
    /// Codeword length in bits.
    #[arg(long, default_value = "48", value_parser = code_bits)]
    bits: u32,
    /// Minimum Hamming distance over all rotations.
    #[arg(long)]
    min_hd: u32,
    #[arg(long, value_enum, default_value_t = Mode::Hierarchical)]
    mode: Mode,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
struct RenderArgs {
    #[command(flatten)]
    library: LibraryArgs,
    /// Marker id; the first id of a sheet.
    #[arg(long, default_value_t = 0)]
    id: usize,
    /// Tile side in pixels, quiet zone included.
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u32).range(MIN_MARKER_SIDE as i64..))]
    side: u32,
    /// Render this many consecutive ids as a grid instead of one marker.
    #[arg(long)]
    sheet: Option<usize>,
    /// Sheet columns; defaults to a near-square grid.
    #[arg(long)]
    columns: Option<usize>,
    /// PNG or PGM, chosen by extension.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(clap::Args, Serialize)]
struct SceneArgs {
    #[command(flatten)]
    library: LibraryArgs,
    #[arg(long, default_value_t = 0)]
    id: usize,
    /// Marker side, metres.
    #[arg(long, default_value_t = 0.15)]
    marker_side: f64,
    /// Metres from the camera.
    #[arg(long, default_value_t = 1.0)]
    distance: f64,
    /// Viewing angle, degrees.
    #[arg(long, default_value_t = 30.0)]
    angle: f64,
    /// In-plane rotation, degrees.
    #[arg(long, default_value_t = 0.0)]
    spin: f64,
    #[arg(long, default_value_t = 1280)]
    width: u32,
    #[arg(long, default_value_t = 720)]
    height: u32,
    /// Focal length, pixels.
    #[arg(long, default_value_t = 1000.0)]
    focal: f64,
    /// Sensor noise standard deviation, grey levels.
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
    /// Gaussian blur, pixels.
    #[arg(long, default_value_t = 0.0)]
    blur: f64,
    #[arg(long, default_value_t = 190)]
    background: u8,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// PNG or PGM, chosen by extension.
    #[arg(long, short)]
    out: PathBuf,
    /// Ground-truth sidecar; defaults to the image path with `.gt.txt`.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Text,
}

#[derive(clap::Args, Serialize)]
struct DetectArgs {
    /// PNG or PGM image.
    image: PathBuf,
    #[command(flatten)]
    library: LibraryArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Focal length in pixels for pose; defaults to the sidecar camera, then
    /// the image width.
    #[arg(long)]
    focal: Option<f64>,
    /// Marker side for pose translations; 1 reports them in marker sides.
    #[arg(long, default_value_t = 1.0)]
    marker_side: f64,
    /// Ground-truth sidecar to score the detections against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write a colour image with outlines, rings and pose axes.
    #[arg(long)]
    overlay: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let outcome = match cli.command {
        Command::Generate(a) => generate(&a).map(|()| ExitCode::SUCCESS),
        Command::Render(a) => render(&a).map(|()| ExitCode::SUCCESS),
        Command::Scene(a) => scene(&a).map(|()| ExitCode::SUCCESS),
        Command::Detect(a) => detect(&a),
        Command::Bench { experiment } => bench::run(&experiment).map(|()| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        // Library errors already embed their cause; skip repeats.
        let mut msg = e.to_string();
        for cause in e.chain().skip(1) {
            let c = cause.to_string();
            if !msg.contains(&c) {
                msg = format!("{msg}: {c}");
            }
        }
        log::error!("{msg}");
        ExitCode::from(2)
    })
}

fn generate(a: &GenerateArgs) -> Result<()> {
    echo("generate", a);
    let mode = match a.mode {
        Mode::Hierarchical => GenerationMode::Hierarchical,
        Mode::Direct => GenerationMode::Direct,
    };
    let lib = generate_library(a.bits, a.min_hd, mode)?;
    info!(
        "{} codewords of {} bits, minimum distance {}, corrects {} bits (max BER {:.4})",
        lib.len(),
        lib.code_length(),
        lib.min_hamming_distance(),
        lib.max_correctable(),
        max_ber_correction(&lib)
    );
    match &a.out {
        Some(path) => {
            write_library(&lib, path)?;
            info!("wrote {}", path.display());
        }
        None => print!("{}", format_library(&lib)),
    }
    Ok(())
}

fn render(a: &RenderArgs) -> Result<()> {
    echo("render", a);
    let lib = a.library.load()?;
    let geometry = MarkerGeometry::shared();
    let image = match a.sheet {
        Some(n) => {
            if n == 0 || a.id + n > lib.len() {
                bail!(
                    "sheet of {n} from id {} exceeds the library ({} codewords)",
                    a.id,
                    lib.len()
                );
            }
            let ids: Vec<usize> = (a.id..a.id + n).collect();
            let columns = a.columns.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
            render_sheet(&lib, geometry, &ids, a.side, columns)?.0
        }
        None => render_marker(&lib, geometry, a.id, a.side)?.image,
    };
    save_gray(&image, &a.out)?;
    info!("wrote {} ({}x{})", a.out.display(), image.width(), image.height());
    Ok(())
}

fn default_sidecar(image: &Path) -> PathBuf {
    image.with_extension("gt.txt")
}

fn scene(a: &SceneArgs) -> Result<()> {
    echo("scene", a);
    let lib = a.library.load()?;
    let mut spec = SceneSpec::new(a.width, a.height, a.focal);
    spec.background = Background::Flat(a.background);
    spec.markers.push(MarkerPlacement::tilted(
        a.id,
        a.marker_side,
        a.distance,
        a.angle,
        a.spin,
        [0.0, 0.0],
    ));
    spec.noise = NoiseSpec {
        blur_sigma: a.blur,
        ..NoiseSpec::sensor(a.noise)
    };
    spec.seed = a.seed;
    let scene = render_scene(&spec, &lib, MarkerGeometry::shared())?;
    save_gray(&scene.image, &a.out)?;
    let sidecar = a.sidecar.clone().unwrap_or_else(|| default_sidecar(&a.out));
    write_sidecar(&SceneRecord::from_scene(&scene), &sidecar)?;
    info!("wrote {} and {}", a.out.display(), sidecar.display());
    Ok(())
}

fn detect(a: &DetectArgs) -> Result<ExitCode> {
    echo("detect", a);
    let lib = a.library.load()?;
    let config = a.detector.config();
    echo("detector", &config);
    let image = load_gray(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let truth = a.truth.as_ref().map(read_sidecar).transpose()?;
    let camera = match (a.focal, &truth) {
        (Some(f), _) => CameraIntrinsics::centered(f, image.width(), image.height()),
        (None, Some(t)) => t.camera,
        (None, None) => CameraIntrinsics::centered(image.width() as f64, image.width(), image.height()),
    };
    let run = detect_markers_with_stats(&image, &lib, &MarkerGeometry::shared(), &config);
    info!(
        "{} edge chains, {} quads, {} validated, {} decoded, {} markers, {} refined in {:.1} ms",
        run.edge_segments,
        run.quads,
        run.validated,
        run.decoded,
        run.detections.len(),
        run.refined,
        run.timings.total()
    );
    let report = DetectionReport::new(
        a.image.display().to_string(),
        image.dimensions(),
        camera,
        a.marker_side,
        &run.detections,
    );
    if let Some(t) = &truth {
        score(&report, t);
    }
    let text = match a.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_text(),
    };
    match &a.report {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(path) = &a.overlay {
        draw_overlay(&image, &report)
            .save(path)
            .with_context(|| format!("writing {}", path.display()))?;
        info!("wrote overlay {}", path.display());
    }
    Ok(if report.markers.is_empty() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

/// Logs the corner error of each ground-truth marker that was found.
fn score(report: &DetectionReport, truth: &SceneRecord) {
    for gt in &truth.markers {
        let found = report.markers.iter().find(|m| m.id == gt.id);
        match found {
            Some(m) => {
                let err = m
                    .corners
                    .iter()
                    .zip(&gt.corners)
                    .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
                    .fold(0.0, f64::max);
                info!("truth marker {}: found, worst corner error {err:.3} px", gt.id);
            }
            None => warn!("truth marker {}: missed", gt.id),
        }
    }
    for m in &report.markers {
        if !truth.markers.iter().any(|gt| gt.id == m.id) {
            warn!("marker {} is not in the ground truth", m.id);
        }
    }
}
