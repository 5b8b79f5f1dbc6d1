//! Procedural marker-free clutter images for false positive scans.
//!
//! Each image is a textured background covered with random polygons, frames
//! with dotted interiors, ellipses, bars and stripe patches, then blurred and
//! given sensor noise. The frames are the interesting case: dark quadrilateral
//! borders around busy interiors are what a decoder can mistake for a marker.

use std::path::{Path, PathBuf};

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{save_gray, Background, NoiseSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub width: u32,
    pub height: u32,
    /// Shapes drawn per image.
    pub shapes: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 500,
            width: 640,
            height: 480,
            shapes: 40,
            seed: 2024,
        }
    }
}

const SS: [f64; 3] = [-1.0 / 3.0, 0.0, 1.0 / 3.0];

struct Canvas {
    w: usize,
    h: usize,
    px: Vec<f32>,
}

impl Canvas {
    /// Blends `value` by the supersampled coverage of `inside` over `bbox`.
    fn paint(&mut self, bbox: [f64; 4], value: f32, inside: impl Fn(f64, f64) -> bool) {
        let x0 = (bbox[0].floor().max(0.0)) as usize;
        let y0 = (bbox[1].floor().max(0.0)) as usize;
        let x1 = (bbox[2].ceil() + 1.0).clamp(0.0, self.w as f64) as usize;
        let y1 = (bbox[3].ceil() + 1.0).clamp(0.0, self.h as f64) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let mut hit = 0;
                for dy in SS {
                    for dx in SS {
                        hit += usize::from(inside(x as f64 + dx, y as f64 + dy));
                    }
                }
                if hit > 0 {
                    let f = hit as f32 / 9.0;
                    let p = &mut self.px[y * self.w + x];
                    *p = (1.0 - f) * *p + f * value;
                }
            }
        }
    }

    fn polygon(&mut self, pts: &[[f64; 2]], value: f32) {
        let bbox = pts.iter().fold([f64::MAX, f64::MAX, f64::MIN, f64::MIN], |b, p| {
            [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])]
        });
        self.paint(bbox, value, |x, y| contains(pts, x, y));
    }

    fn ellipse(&mut self, c: [f64; 2], a: f64, b: f64, angle: f64, value: f32) {
        let (s, co) = angle.sin_cos();
        let r = a.max(b);
        self.paint([c[0] - r, c[1] - r, c[0] + r, c[1] + r], value, |x, y| {
            let (dx, dy) = (x - c[0], y - c[1]);
            let (u, v) = (co * dx + s * dy, -s * dx + co * dy);
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        });
    }
}

/// Even-odd point-in-polygon test.
fn contains(pts: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + n - 1) % n]);
        if (a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
    }
    inside
}

/// A rectangle of half-extents `(a, b)` turned by `angle` with corners
/// jittered by up to `skew` of its size, mimicking mild perspective.
fn quad(rng: &mut ChaCha8Rng, c: [f64; 2], a: f64, b: f64, angle: f64, skew: f64) -> [[f64; 2]; 4] {
    let (s, co) = angle.sin_cos();
    let base = [[-a, -b], [a, -b], [a, b], [-a, b]];
    base.map(|[u, v]| {
        let (u, v) = (
            u + skew * a * rng.random_range(-1.0..1.0),
            v + skew * b * rng.random_range(-1.0..1.0),
        );
        [c[0] + co * u - s * v, c[1] + s * u + co * v]
    })
}

/// Interpolates between the corners of `q` at `(s, t)` in `[0, 1]^2`.
fn bilerp(q: &[[f64; 2]; 4], s: f64, t: f64) -> [f64; 2] {
    let top = [q[0][0] + s * (q[1][0] - q[0][0]), q[0][1] + s * (q[1][1] - q[0][1])];
    let bot = [q[3][0] + s * (q[2][0] - q[3][0]), q[3][1] + s * (q[2][1] - q[3][1])];
    [top[0] + t * (bot[0] - top[0]), top[1] + t * (bot[1] - top[1])]
}

fn draw_shape(canvas: &mut Canvas, rng: &mut ChaCha8Rng) {
    let (w, h) = (canvas.w as f64, canvas.h as f64);
    let c = [rng.random_range(0.0..w), rng.random_range(0.0..h)];
    let size = rng.random_range(10.0..(0.25 * w.min(h)));
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let value = rng.random_range(0.0..255.0) as f32;
    match rng.random_range(0..10) {
        0..=2 => {
            let b = size * rng.random_range(0.3..1.0);
            let q = quad(rng, c, size, b, angle, 0.15);
            canvas.polygon(&q, value);
        }
        3..=4 => {
            // Dark frame around a lighter, dotted interior.
            let a = size.max(20.0);
            let b = a * rng.random_range(0.6..1.0);
            let q = quad(rng, c, a, b, angle, 0.1);
            canvas.polygon(&q, rng.random_range(0.0..60.0) as f32);
            let inset = rng.random_range(0.08..0.2);
            let inner: [[f64; 2]; 4] = [
                bilerp(&q, inset, inset),
                bilerp(&q, 1.0 - inset, inset),
                bilerp(&q, 1.0 - inset, 1.0 - inset),
                bilerp(&q, inset, 1.0 - inset),
            ];
            canvas.polygon(&inner, rng.random_range(170.0..255.0) as f32);
            for _ in 0..rng.random_range(0..40) {
                let p = bilerp(&inner, rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
                let r = rng.random_range(0.02..0.08) * size;
                canvas.ellipse(p, r, r, 0.0, rng.random_range(0.0..90.0) as f32);
            }
        }
        5..=6 => {
            let b = size * rng.random_range(0.3..1.0);
            canvas.ellipse(c, size, b, angle, value);
        }
        7..=8 => {
            let b = rng.random_range(1.0..4.0);
            let q = quad(rng, c, size, b, angle, 0.0);
            canvas.polygon(&q, value);
        }
        _ => {
            let n = rng.random_range(3..9);
            let q = quad(rng, c, size, size, angle, 0.05);
            let dark = rng.random_range(0.0..80.0) as f32;
            for k in 0..n {
                let (s0, s1) = (k as f64 / n as f64, (k as f64 + 0.5) / n as f64);
                canvas.polygon(
                    &[
                        bilerp(&q, s0, 0.0),
                        bilerp(&q, s1, 0.0),
                        bilerp(&q, s1, 1.0),
                        bilerp(&q, s0, 1.0),
                    ],
                    dark,
                );
            }
        }
    }
}

/// Image `index` of the corpus; independent of every other index.
pub fn corpus_image(spec: &CorpusSpec, index: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let bg = Background::Texture {
        seed: rng.random(),
        scale: rng.random_range(16.0..96.0),
        mean: rng.random_range(70.0..190.0),
        contrast: rng.random_range(10.0..70.0),
    };
    let (w, h) = (spec.width as usize, spec.height as usize);
    let mut px = Vec::with_capacity(w * h);
    for y in 0..spec.height {
        for x in 0..spec.width {
            px.push(bg.value(x, y, spec.width, spec.height));
        }
    }
    let mut canvas = Canvas { w, h, px };
    for _ in 0..spec.shapes {
        draw_shape(&mut canvas, &mut rng);
    }
    let noise = NoiseSpec {
        gaussian_sigma: rng.random_range(1.0..4.0),
        blur_sigma: rng.random_range(0.5..1.2),
        gradient: rng.random_range(-0.3..0.3),
        gradient_angle: rng.random_range(0.0..std::f64::consts::TAU),
    };
    let clean = crate::render::CleanScene {
        width: spec.width,
        height: spec.height,
        pixels: canvas.px,
        camera: crate::pose::CameraIntrinsics::centered(1.0, spec.width, spec.height),
        ground_truth: Vec::new(),
    };
    clean.with_noise(&noise, rng.random())
}

/// Lazily yields all images of the corpus.
pub fn generate_corpus(spec: &CorpusSpec) -> impl Iterator<Item = GrayImage> + '_ {
    (0..spec.count).map(move |i| corpus_image(spec, i))
}

/// Writes `clutter_NNNN.png` files into `dir`, creating it if needed.
pub fn write_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..spec.count)
        .map(|i| {
            let path = dir.join(format!("clutter_{i:04}.png"));
            save_gray(&corpus_image(spec, i), &path)?;
            Ok(path)
        })
        .collect()
}
