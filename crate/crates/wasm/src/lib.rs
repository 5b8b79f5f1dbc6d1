//! Browser bindings for the demo page in `www/`.
//!
//! The plain functions hold the logic and report errors as strings so they
//! can be tested natively; the `js_*` exports wrap them for JavaScript.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ringmark::bench::library_for;
use ringmark::codec::MarkerLibrary;
use ringmark::detect::{detect_markers_with_stats, DetectionReport, DetectorConfig};
use ringmark::render::{
    render_marker, render_scene, Background, MarkerGeometry, MarkerPlacement, NoiseSpec, SceneSpec,
};

/// Size of the synthetic camera frame.
pub const SCENE_WIDTH: u32 = 640;
pub const SCENE_HEIGHT: u32 = 480;
pub const SCENE_FOCAL: f64 = 700.0;

fn library(min_hd: u32) -> Result<MarkerLibrary, String> {
    library_for(min_hd).map_err(|e| e.to_string())
}

/// Codewords in the built-in library with this minimum distance.
pub fn library_size(min_hd: u32) -> Result<usize, String> {
    Ok(library(min_hd)?.len())
}

/// A `side` x `side` greyscale marker, row-major.
pub fn marker_pixels(min_hd: u32, id: usize, side: u32) -> Result<Vec<u8>, String> {
    let lib = library(min_hd)?;
    let m = render_marker(&lib, MarkerGeometry::shared(), id, side).map_err(|e| e.to_string())?;
    Ok(m.image.into_raw())
}

/// A 10 cm marker 40 cm from a 640x480 camera, turned by `angle` degrees
/// away from the viewer, with sensor noise of `noise` grey levels.
pub fn scene_pixels(min_hd: u32, id: usize, angle: f64, spin: f64, noise: f64, seed: u64) -> Result<Vec<u8>, String> {
    let lib = library(min_hd)?;
    let mut spec = SceneSpec::new(SCENE_WIDTH, SCENE_HEIGHT, SCENE_FOCAL);
    spec.background = Background::Texture {
        seed,
        scale: 48.0,
        mean: 150.0,
        contrast: 40.0,
    };
    spec.markers
        .push(MarkerPlacement::tilted(id, 0.1, 0.4, angle, spin, [0.0, 0.0]));
    spec.noise = NoiseSpec::sensor(noise);
    spec.seed = seed;
    let scene = render_scene(&spec, &lib, MarkerGeometry::shared()).map_err(|e| e.to_string())?;
    Ok(scene.image.into_raw())
}

#[derive(Serialize)]
struct DemoReport {
    #[serde(flatten)]
    report: DetectionReport,
    quads: usize,
    validated: usize,
    decoded: usize,
    millis: f64,
}

/// Detects markers in an RGBA (4 bytes per pixel) or greyscale buffer and
/// returns the report as JSON. Pose uses a centred camera with focal length
/// `focal` pixels, or `width` when `focal` is not positive, and reports
/// translations in marker sides.
pub fn detect_json(
    width: u32,
    height: u32,
    pixels: &[u8],
    min_hd: u32,
    refine: bool,
    focal: f64,
) -> Result<String, String> {
    let n = width as usize * height as usize;
    let gray: Vec<u8> = match pixels.len() {
        l if l == n => pixels.to_vec(),
        l if l == 4 * n => pixels
            .chunks_exact(4)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
            .collect(),
        l => return Err(format!("{l} bytes do not fit a {width}x{height} image")),
    };
    let image = image::GrayImage::from_raw(width, height, gray).ok_or("bad image size")?;
    let lib = library(min_hd)?;
    let config = DetectorConfig {
        refine,
        ..DetectorConfig::default()
    };
    let run = detect_markers_with_stats(&image, &lib, &MarkerGeometry::shared(), &config);
    let focal = if focal > 0.0 { focal } else { width as f64 };
    let camera = ringmark::pose::CameraIntrinsics::centered(focal, width, height);
    let out = DemoReport {
        report: DetectionReport::new("canvas", (width, height), camera, 1.0, &run.detections),
        quads: run.quads,
        validated: run.validated,
        decoded: run.decoded,
        millis: run.timings.total(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = librarySize)]
pub fn js_library_size(min_hd: u32) -> Result<usize, JsError> {
    js(library_size(min_hd))
}

#[wasm_bindgen(js_name = renderMarker)]
pub fn js_render_marker(min_hd: u32, id: usize, side: u32) -> Result<Vec<u8>, JsError> {
    js(marker_pixels(min_hd, id, side))
}

#[wasm_bindgen(js_name = renderScene)]
pub fn js_render_scene(
    min_hd: u32,
    id: usize,
    angle: f64,
    spin: f64,
    noise: f64,
    seed: u32,
) -> Result<Vec<u8>, JsError> {
    js(scene_pixels(min_hd, id, angle, spin, noise, seed as u64))
}

#[wasm_bindgen(js_name = detect)]
pub fn js_detect(
    width: u32,
    height: u32,
    pixels: &[u8],
    min_hd: u32,
    refine: bool,
    focal: f64,
) -> Result<String, JsError> {
    js(detect_json(width, height, pixels, min_hd, refine, focal))
}

#[wasm_bindgen(js_name = sceneFocal)]
pub fn js_scene_focal() -> f64 {
    SCENE_FOCAL
}

#[wasm_bindgen(js_name = sceneWidth)]
pub fn js_scene_width() -> u32 {
    SCENE_WIDTH
}

#[wasm_bindgen(js_name = sceneHeight)]
pub fn js_scene_height() -> u32 {
    SCENE_HEIGHT
}
