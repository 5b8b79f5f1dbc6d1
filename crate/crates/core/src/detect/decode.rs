//! Perspective validation and codeword sampling.

use image::GrayImage;
use nalgebra::Point2;

use super::quads::QuadCandidate;
use crate::codec::{Codeword, DecodeResult, MarkerLibrary};
use crate::error::Result;
use crate::geom::{homography_from_corners, relative_depth, unit_square, Homography};
use crate::render::MarkerGeometry;

/// Largest farthest/nearest depth ratio for a 10 cm marker seen from no
/// closer than 20 cm: `(20 + 10 sqrt 2) / 20`.
pub const DEFAULT_ALPHA_REL_MAX: f64 = 1.0 + std::f64::consts::SQRT_2 / 2.0;

/// Accepts a quad whose corner depth ratio is plausible for a marker.
pub fn validate_perspective(quad: &QuadCandidate, alpha_rel_max: f64) -> bool {
    relative_depth(&quad.corner_points(), &quad.homography) <= alpha_rel_max
}

/// Bilinear grey value at a pixel-centred coordinate, clamped to the image.
pub fn bilinear(image: &GrayImage, x: f64, y: f64) -> f64 {
    let (w, h) = (image.width() as f64, image.height() as f64);
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(image.width() - 1);
    let y1 = (y0 + 1).min(image.height() - 1);
    let p = |x: u32, y: u32| image.get_pixel(x, y)[0] as f64;
    let a = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let b = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    a * (1.0 - fy) + b * fy
}

/// Mean of a 3x3 grid of bilinear samples around a marker-plane point.
fn patch(image: &GrayImage, h: &Homography, u: f64, v: f64, spacing: f64) -> f64 {
    let mut sum = 0.0;
    for j in -1..=1 {
        for i in -1..=1 {
            let p = h.apply(&Point2::new(u + i as f64 * spacing, v + j as f64 * spacing));
            sum += bilinear(image, p.x, p.y);
        }
    }
    sum / 9.0
}

/// Threshold maximising the between-class variance of `values`.
pub fn otsu_threshold(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n < 2 {
        return v.first().copied().unwrap_or(0.0);
    }
    let total: f64 = v.iter().sum();
    let mut below = 0.0;
    let mut best = (f64::NEG_INFINITY, 0.5 * (v[0] + v[n - 1]));
    for k in 1..n {
        below += v[k - 1];
        if v[k] == v[k - 1] {
            continue;
        }
        let (w0, w1) = (k as f64, (n - k) as f64);
        let (m0, m1) = (below / w0, (total - below) / w1);
        let score = w0 * w1 * (m0 - m1).powi(2);
        if score > best.0 {
            best = (score, 0.5 * (v[k - 1] + v[k]));
        }
    }
    best.1
}

/// Marker-plane points known to be black (border) and white (gap between
/// border and ring).
fn reference_points(g: &MarkerGeometry) -> ([[f64; 2]; 8], [[f64; 2]; 4]) {
    let b = g.border_thickness / 2.0;
    let black = [
        [b, 0.5],
        [1.0 - b, 0.5],
        [0.5, b],
        [0.5, 1.0 - b],
        [b, b],
        [1.0 - b, b],
        [1.0 - b, 1.0 - b],
        [b, 1.0 - b],
    ];
    // Inner corners of the white frame, halfway between border and ring.
    let c = g.circle_center;
    let r_out = g.ring_outer_radius();
    let corner = g.border_thickness;
    let mid = |t: f64| t + 0.5 * ((c[0] - t) - r_out / std::f64::consts::SQRT_2);
    let white = [
        [mid(corner), mid(corner)],
        [1.0 - mid(corner), mid(corner)],
        [1.0 - mid(corner), 1.0 - mid(corner)],
        [mid(corner), 1.0 - mid(corner)],
    ];
    (black, white)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BitReading {
    pub word: Codeword,
    pub threshold: f64,
    /// Mean white reference minus mean black reference.
    pub contrast: f64,
}

/// Samples every coding disk through `h` and binarises with Otsu's threshold
/// over the disk and reference samples.
pub fn read_bits(image: &GrayImage, h: &Homography, g: &MarkerGeometry) -> Result<BitReading> {
    let spacing = 0.3 * g.disks.radius;
    let disks: Vec<f64> = g
        .disks
        .centers
        .iter()
        .map(|c| patch(image, h, c[0], c[1], spacing))
        .collect();
    let (black, white) = reference_points(g);
    let ref_spacing = 0.15 * g.border_thickness;
    let blacks: Vec<f64> = black.iter().map(|p| patch(image, h, p[0], p[1], ref_spacing)).collect();
    let whites: Vec<f64> = white.iter().map(|p| patch(image, h, p[0], p[1], ref_spacing)).collect();
    let mut all = disks.clone();
    all.extend(&blacks);
    all.extend(&whites);
    let threshold = otsu_threshold(&all);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let bits: Vec<bool> = disks.iter().map(|&v| v < threshold).collect();
    Ok(BitReading {
        word: Codeword::from_bools(&bits)?,
        threshold,
        contrast: mean(&whites) - mean(&blacks),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodedQuad {
    pub result: DecodeResult,
    /// Corners in marker order: corner `k` images marker corner `k`.
    pub corners: [[f64; 2]; 4],
    pub homography: Homography,
}

/// Reads and decodes a quad; on success the corners and homography are
/// re-indexed for the decoded rotation.
pub fn sample_and_decode(
    image: &GrayImage,
    quad: &QuadCandidate,
    library: &MarkerLibrary,
    geometry: &MarkerGeometry,
    max_correct: u32,
    min_contrast: f64,
) -> Option<DecodedQuad> {
    let reading = read_bits(image, &quad.homography, geometry).ok()?;
    if reading.contrast < min_contrast {
        return None;
    }
    let result = library.decode(reading.word, max_correct)?;
    let r = result.rotation as usize;
    let corners: [[f64; 2]; 4] = std::array::from_fn(|k| quad.corners[(k + r) % 4]);
    let homography = if r == 0 {
        quad.homography
    } else {
        homography_from_corners(&unit_square(), &corners.map(|p| Point2::new(p[0], p[1]))).ok()?
    };
    Some(DecodedQuad {
        result,
        corners,
        homography,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_default_matches_worked_example() {
        let (near, side) = (20.0, 10.0);
        let far = near + side * std::f64::consts::SQRT_2;
        assert!((DEFAULT_ALPHA_REL_MAX - far / near).abs() < 1e-12);
    }

    #[test]
    fn otsu_splits_two_clusters() {
        let v = [10.0, 12.0, 11.0, 200.0, 190.0, 210.0, 13.0];
        let t = otsu_threshold(&v);
        assert!(t > 13.0 && t < 190.0);
    }

    #[test]
    fn reference_points_have_expected_colours() {
        let g = MarkerGeometry::default();
        let (black, white) = reference_points(&g);
        for p in black {
            assert_eq!(g.is_black_static(p[0], p[1]), Some(true));
        }
        for p in white {
            assert_eq!(g.is_black_static(p[0], p[1]), Some(false));
        }
    }
}
