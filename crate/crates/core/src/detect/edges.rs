//! Edge-drawing style segment detector.
//!
//! Gaussian smoothing, Sobel gradients, anchors on gradient ridges, then
//! routing from the strongest anchors along the ridge in both directions.
//! Chains stop at pixels already claimed by another chain, so junctions
//! split them. Each chain pixel also gets a sub-pixel location from a
//! parabola through the gradient magnitude across the edge.

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::blur::gaussian_blur;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub smoothing_sigma: f64,
    /// Minimum gradient magnitude (grey levels per pixel) for a pixel to be
    /// routed through.
    pub gradient_threshold: f32,
    /// How far an anchor must rise above a neighbour across the edge; it may
    /// not fall below the other.
    pub anchor_threshold: f32,
    /// Anchors are looked for on every `scan_interval`-th row and column.
    pub scan_interval: usize,
    /// Chains shorter than this are dropped.
    pub min_segment_pixels: usize,
    /// Chains with a lower mean gradient magnitude are dropped.
    pub validation_threshold: f32,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            smoothing_sigma: 1.0,
            gradient_threshold: 5.0,
            anchor_threshold: 1.0,
            scan_interval: 2,
            min_segment_pixels: 10,
            validation_threshold: 8.0,
        }
    }
}

/// A contiguous 8-connected pixel chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub pixels: Vec<[u32; 2]>,
    /// Sub-pixel edge locations, one per pixel.
    pub points: Vec<[f64; 2]>,
    /// The last pixel is an 8-neighbour of the first.
    pub closed: bool,
    pub mean_gradient: f32,
}

impl EdgeSegment {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Smoothed Sobel gradients; magnitudes in grey levels per pixel.
pub struct GradientMap {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
    pub magnitude: Vec<f32>,
}

impl GradientMap {
    pub fn new(image: &GrayImage, sigma: f64) -> Self {
        let (w, h) = (image.width() as usize, image.height() as usize);
        let raw: Vec<f32> = image.as_raw().iter().map(|&v| v as f32).collect();
        let s = gaussian_blur(&raw, w, h, sigma);
        let mut gx = vec![0f32; w * h];
        let mut gy = vec![0f32; w * h];
        let mut magnitude = vec![0f32; w * h];
        if w >= 3 && h >= 3 {
            for y in 1..h - 1 {
                let (r0, r1, r2) = ((y - 1) * w, y * w, (y + 1) * w);
                for x in 1..w - 1 {
                    let dx = (s[r0 + x + 1] + 2.0 * s[r1 + x + 1] + s[r2 + x + 1])
                        - (s[r0 + x - 1] + 2.0 * s[r1 + x - 1] + s[r2 + x - 1]);
                    let dy = (s[r2 + x - 1] + 2.0 * s[r2 + x] + s[r2 + x + 1])
                        - (s[r0 + x - 1] + 2.0 * s[r0 + x] + s[r0 + x + 1]);
                    let i = r1 + x;
                    gx[i] = dx / 8.0;
                    gy[i] = dy / 8.0;
                    magnitude[i] = gx[i].hypot(gy[i]);
                }
            }
        }
        Self {
            width: w,
            height: h,
            gx,
            gy,
            magnitude,
        }
    }

    fn at(&self, x: usize, y: usize) -> f32 {
        self.magnitude[y * self.width + x]
    }

    /// Ridge of the gradient magnitude through pixel `(x, y)`, searched along
    /// whichever image axis is closer to the gradient. Sampling whole-pixel
    /// neighbours avoids interpolation bias; the result still lies on the edge.
    fn subpixel(&self, x: usize, y: usize) -> [f64; 2] {
        let i = y * self.width + x;
        let g = self.magnitude[i] as f64;
        let (xf, yf) = (x as f64, y as f64);
        if g <= 0.0 || x == 0 || y == 0 || x + 1 >= self.width || y + 1 >= self.height {
            return [xf, yf];
        }
        let horizontal = self.gx[i].abs() >= self.gy[i].abs();
        let (minus, plus) = if horizontal {
            (self.at(x - 1, y) as f64, self.at(x + 1, y) as f64)
        } else {
            (self.at(x, y - 1) as f64, self.at(x, y + 1) as f64)
        };
        let curvature = minus - 2.0 * g + plus;
        let offset = if curvature < 0.0 {
            (0.5 * (minus - plus) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        if horizontal {
            [xf + offset, yf]
        } else {
            [xf, yf + offset]
        }
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// `cos(67.5 deg)`: offsets within this cone of the tangent are candidates.
const FORWARD_CONE: f64 = 0.382_683_432;

struct Router<'a> {
    grad: &'a GradientMap,
    params: &'a EdgeParams,
    /// Owning chain + 1 per pixel, 0 when free.
    owner: Vec<u32>,
}

impl Router<'_> {
    fn tangent(&self, i: usize) -> [f64; 2] {
        let g = self.grad.magnitude[i].max(f32::MIN_POSITIVE) as f64;
        [-self.grad.gy[i] as f64 / g, self.grad.gx[i] as f64 / g]
    }

    /// Walks from `start` along `sign * tangent`, claiming pixels for `id`.
    fn walk(&mut self, start: (usize, usize), sign: f64, id: u32) -> Vec<(usize, usize)> {
        let (w, h) = (self.grad.width as isize, self.grad.height as isize);
        let mut out = Vec::new();
        let (mut x, mut y) = start;
        let t0 = self.tangent(y * self.grad.width + x);
        let mut heading = [sign * t0[0], sign * t0[1]];
        let mut recent = [start; 4];
        loop {
            let i = y * self.grad.width + x;
            let t = self.tangent(i);
            let s = if t[0] * heading[0] + t[1] * heading[1] >= 0.0 {
                1.0
            } else {
                -1.0
            };
            let fwd = [s * t[0], s * t[1]];
            let (gx, gy) = (self.grad.gx[i], self.grad.gy[i]);
            let mut best: Option<(f32, f64, usize, usize)> = None;
            for &(dx, dy) in &NEIGHBOURS {
                let norm = ((dx * dx + dy * dy) as f64).sqrt();
                if (dx as f64 * fwd[0] + dy as f64 * fwd[1]) / norm < FORWARD_CONE {
                    continue;
                }
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 1 || ny < 1 || nx >= w - 1 || ny >= h - 1 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let j = ny * self.grad.width + nx;
                // Back beside our own chain: the loop has closed, or we would
                // only run alongside it on the second row of a wide ridge.
                if self.owner[j] == id && !recent.contains(&(nx, ny)) {
                    return out;
                }
                let m = self.grad.magnitude[j];
                // Opposite polarity means a different edge.
                if m < self.params.gradient_threshold || gx * self.grad.gx[j] + gy * self.grad.gy[j] <= 0.0 {
                    continue;
                }
                // Ties (a ridge two pixels wide) go to the straightest step.
                let align = (dx as f64 * heading[0] + dy as f64 * heading[1]) / norm;
                if best.is_none_or(|(bm, ba, _, _)| m > bm || (m == bm && align > ba)) {
                    best = Some((m, align, nx, ny));
                }
            }
            let Some((_, _, nx, ny)) = best else { break };
            let j = ny * self.grad.width + nx;
            if self.owner[j] != 0 {
                break;
            }
            self.owner[j] = id;
            heading = [nx as f64 - x as f64, ny as f64 - y as f64];
            recent[out.len() % 4] = (nx, ny);
            (x, y) = (nx, ny);
            out.push((x, y));
        }
        out
    }
}

fn is_anchor(grad: &GradientMap, x: usize, y: usize, threshold: f32, rise: f32) -> bool {
    let i = y * grad.width + x;
    let m = grad.magnitude[i];
    if m < threshold {
        return false;
    }
    // A mostly vertical gradient means a horizontal edge: compare across rows.
    let (before, after) = if grad.gy[i].abs() >= grad.gx[i].abs() {
        (grad.at(x, y - 1), grad.at(x, y + 1))
    } else {
        (grad.at(x - 1, y), grad.at(x + 1, y))
    };
    // A two-pixel plateau yields one anchor, on its first pixel.
    let (d1, d2) = (m - before, m - after);
    d1 > 0.0 && d2 >= 0.0 && d1.max(d2) >= rise
}

/// Edge chains of `image`, strongest anchors first.
pub fn detect_edge_segments(image: &GrayImage, params: &EdgeParams) -> Vec<EdgeSegment> {
    let grad = GradientMap::new(image, params.smoothing_sigma);
    segments_from_gradient(&grad, params)
}

pub fn segments_from_gradient(grad: &GradientMap, params: &EdgeParams) -> Vec<EdgeSegment> {
    let (w, h) = (grad.width, grad.height);
    if w < 3 || h < 3 {
        return Vec::new();
    }
    let k = params.scan_interval.max(1);
    let mut anchors: Vec<(f32, usize, usize)> = Vec::new();
    for y in 1..h - 1 {
        let row_scanned = y % k == 0;
        for x in 1..w - 1 {
            if (row_scanned || x % k == 0) && is_anchor(grad, x, y, params.gradient_threshold, params.anchor_threshold)
            {
                anchors.push((grad.at(x, y), x, y));
            }
        }
    }
    anchors.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));

    let mut router = Router {
        grad,
        params,
        owner: vec![0; w * h],
    };
    let mut out = Vec::new();
    let mut next_id = 1u32;
    for &(_, x, y) in &anchors {
        if router.owner[y * w + x] != 0 {
            continue;
        }
        let id = next_id;
        next_id += 1;
        router.owner[y * w + x] = id;
        let ahead = router.walk((x, y), 1.0, id);
        let behind = router.walk((x, y), -1.0, id);
        let mut chain: Vec<(usize, usize)> = behind.into_iter().rev().collect();
        chain.push((x, y));
        chain.extend(ahead);
        if chain.len() < params.min_segment_pixels {
            continue;
        }
        let mean = chain.iter().map(|&(x, y)| grad.at(x, y)).sum::<f32>() / chain.len() as f32;
        if mean < params.validation_threshold {
            continue;
        }
        let (a, b) = (chain[0], chain[chain.len() - 1]);
        let closed = chain.len() >= 8 && a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1;
        out.push(EdgeSegment {
            points: chain.iter().map(|&(x, y)| grad.subpixel(x, y)).collect(),
            pixels: chain.iter().map(|&(x, y)| [x as u32, y as u32]).collect(),
            closed,
            mean_gradient: mean,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    fn square_image(size: u32, x0: u32, side: u32) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let inside = (x0..x0 + side).contains(&x) && (x0..x0 + side).contains(&y);
            Luma([if inside { 0 } else { 255 }])
        })
    }

    #[test]
    fn blank_image_has_no_edges() {
        let img = GrayImage::from_pixel(64, 48, Luma([128]));
        assert!(detect_edge_segments(&img, &EdgeParams::default()).is_empty());
    }

    #[test]
    fn chains_are_connected_without_repeats() {
        let img = square_image(300, 50, 200);
        let segs = detect_edge_segments(&img, &EdgeParams::default());
        assert!(!segs.is_empty());
        for s in &segs {
            let mut seen = std::collections::HashSet::new();
            for w in s.pixels.windows(2) {
                assert!(w[0][0].abs_diff(w[1][0]) <= 1 && w[0][1].abs_diff(w[1][1]) <= 1);
            }
            assert!(s.pixels.iter().all(|p| seen.insert(*p)));
        }
    }

    #[test]
    fn square_boundary_is_one_closed_chain() {
        // Black pixels 50..=249: the step lies half a pixel outside them.
        let img = square_image(300, 50, 200);
        let segs = detect_edge_segments(&img, &EdgeParams::default());
        let closed: Vec<_> = segs.iter().filter(|s| s.closed).collect();
        assert!(!closed.is_empty());
        let s = closed.iter().max_by_key(|s| s.len()).unwrap();
        assert!(s.len() > 700, "{}", s.len());
        let (lo, hi) = (49.5, 249.5);
        let dist = |p: [f64; 2]| {
            let dx = (p[0] - lo).abs().min((p[0] - hi).abs());
            let dy = (p[1] - lo).abs().min((p[1] - hi).abs());
            let inside_x = (lo..=hi).contains(&p[0]);
            let inside_y = (lo..=hi).contains(&p[1]);
            match (inside_x, inside_y) {
                (true, true) => dx.min(dy),
                (true, false) => dy,
                (false, true) => dx,
                _ => dx.hypot(dy),
            }
        };
        let near = s.points.iter().filter(|&&p| dist(p) <= 1.5).count();
        assert!(near as f64 >= 0.95 * s.len() as f64);
        let px_near = s
            .pixels
            .iter()
            .filter(|p| dist([p[0] as f64, p[1] as f64]) <= 1.5)
            .count();
        assert!(px_near as f64 >= 0.95 * s.len() as f64);
    }

    #[test]
    fn noisy_step_edge_is_accurate() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let mut sq = 0.0;
        let mut n = 0usize;
        for seed in 0..5u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Step between columns 59 and 60: true edge at x = 59.5.
            let img = GrayImage::from_fn(120, 80, |x, _| {
                let v: f64 = if x < 60 { 60.0 } else { 190.0 };
                let noise: f64 = rng.sample(StandardNormal);
                Luma([(v + 5.0 * noise).round().clamp(0.0, 255.0) as u8])
            });
            let segs = detect_edge_segments(&img, &EdgeParams::default());
            let s = segs.iter().max_by_key(|s| s.len()).unwrap();
            assert!(s.len() >= 60);
            for p in &s.points {
                sq += (p[0] - 59.5).powi(2);
                n += 1;
            }
        }
        let rms = (sq / n as f64).sqrt();
        assert!(rms < 1.0, "rms {rms}");
    }
}
