use std::sync::Arc;

use image::GrayImage;
use nalgebra::{Point2, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::marker::MarkerTemplate;
use super::MarkerGeometry;
use crate::codec::MarkerLibrary;
use crate::error::{Error, Result};
use crate::geom::{transform_conic, unit_square, Ellipse, Homography, TransformDirection};
use crate::pose::{CameraIntrinsics, Pose};

/// Samples per pixel along each axis.
pub const SUPERSAMPLING: usize = 4;

/// A marker of physical side `side` at a camera-frame pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerPlacement {
    pub id: usize,
    pub pose: Pose,
    pub side: f64,
}

impl MarkerPlacement {
    /// Marker centred at `(offset, distance)` in the camera frame, turned by
    /// `angle_deg` about the camera's vertical axis after an in-plane spin.
    pub fn tilted(id: usize, side: f64, distance: f64, angle_deg: f64, spin_deg: f64, offset: [f64; 2]) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), angle_deg.to_radians())
            * Rotation3::from_axis_angle(&Vector3::z_axis(), spin_deg.to_radians());
        Self {
            id,
            pose: Pose::exact(*r.matrix(), Vector3::new(offset[0], offset[1], distance)),
            side,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Additive Gaussian noise, grey levels.
    pub gaussian_sigma: f64,
    /// Gaussian blur standard deviation in pixels; 0 disables.
    pub blur_sigma: f64,
    /// Relative brightness change across the image along `gradient_angle`.
    pub gradient: f64,
    /// Radians from the `+x` axis.
    pub gradient_angle: f64,
}

impl NoiseSpec {
    pub fn sensor(sigma: f64) -> Self {
        Self {
            gaussian_sigma: sigma,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Background {
    Flat(u8),
    /// Multi-octave value noise: `mean +- contrast`, coarsest cell `scale` px.
    Texture {
        seed: u64,
        scale: f64,
        mean: f64,
        contrast: f64,
    },
    /// Resampled to the scene size by nearest neighbour.
    Image(Arc<GrayImage>),
}

impl Default for Background {
    fn default() -> Self {
        Background::Flat(128)
    }
}

fn lattice(seed: u64, x: i64, y: i64) -> f64 {
    // SplitMix64 on the packed coordinates.
    let mut z = seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (tx, ty) = (x - fx, y - fy);
    let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
    let (ix, iy) = (fx as i64, fy as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + sx * (b - a);
    let bottom = c + sx * (d - c);
    top + sy * (bottom - top)
}

impl Background {
    pub fn value(&self, x: u32, y: u32, width: u32, height: u32) -> f32 {
        match self {
            Background::Flat(v) => *v as f32,
            Background::Texture {
                seed,
                scale,
                mean,
                contrast,
            } => {
                let mut sum = 0.0;
                let mut amp = 1.0;
                let mut norm = 0.0;
                let mut cell = scale.max(1.0);
                for octave in 0..4u64 {
                    sum += amp * value_noise(seed.wrapping_add(octave), x as f64 / cell, y as f64 / cell);
                    norm += amp;
                    amp *= 0.5;
                    cell /= 2.0;
                }
                (mean + contrast * (2.0 * sum / norm - 1.0)).clamp(0.0, 255.0) as f32
            }
            Background::Image(img) => {
                let sx = (x as u64 * img.width() as u64 / width.max(1) as u64) as u32;
                let sy = (y as u64 * img.height() as u64 / height.max(1) as u64) as u32;
                img.get_pixel(sx.min(img.width() - 1), sy.min(img.height() - 1))[0] as f32
            }
        }
    }
}

/// A filled disk drawn over the markers, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub center: [f64; 2],
    pub radius: f64,
    pub value: u8,
}

#[derive(Clone, Debug)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub camera: CameraIntrinsics,
    pub markers: Vec<MarkerPlacement>,
    pub background: Background,
    pub occluders: Vec<Occluder>,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl SceneSpec {
    /// Empty scene with a centred camera of focal length `focal`.
    pub fn new(width: u32, height: u32, focal: f64) -> Self {
        Self {
            width,
            height,
            camera: CameraIntrinsics::centered(focal, width, height),
            markers: Vec::new(),
            background: Background::default(),
            occluders: Vec::new(),
            noise: NoiseSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerGroundTruth {
    pub id: usize,
    /// Unit-square marker to pixels.
    pub homography: Homography,
    pub pose: Pose,
    pub side: f64,
    pub corners: [[f64; 2]; 4],
    /// Image of the ring mid-line circle.
    pub ellipse: Ellipse,
}

/// Rendered markers and occluders before any noise.
#[derive(Clone, Debug)]
pub struct CleanScene {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<f32>,
    pub camera: CameraIntrinsics,
    pub ground_truth: Vec<MarkerGroundTruth>,
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub image: GrayImage,
    pub camera: CameraIntrinsics,
    pub ground_truth: Vec<MarkerGroundTruth>,
    pub noise: NoiseSpec,
}

fn sample_offsets() -> [f64; SUPERSAMPLING] {
    std::array::from_fn(|i| (i as f64 + 0.5) / SUPERSAMPLING as f64 - 0.5)
}

/// Draws markers over a background with `SUPERSAMPLING^2` samples per pixel.
/// Each marker is painted together with its white quiet zone.
pub(crate) fn rasterize_markers(
    width: u32,
    height: u32,
    background: &dyn Fn(u32, u32) -> f32,
    markers: &[(&MarkerTemplate, Homography)],
) -> Result<Vec<f32>> {
    let (w, h) = (width as usize, height as usize);
    let mut buf = vec![0f32; w * h];
    for y in 0..height {
        for x in 0..width {
            buf[y as usize * w + x as usize] = background(x, y);
        }
    }
    let offsets = sample_offsets();
    let n_samples = (SUPERSAMPLING * SUPERSAMPLING) as f32;
    for (template, hom) in markers {
        let q = template.geometry().quiet_zone;
        let mut inv = hom.inverse()?.matrix().to_owned();
        // Homographies are defined up to sign; make the marker side positive.
        let c = hom.apply(&Point2::new(0.5, 0.5));
        if (inv * Vector3::new(c.x, c.y, 1.0)).z < 0.0 {
            inv = -inv;
        }
        let outline =
            [[-q, -q], [1.0 + q, -q], [1.0 + q, 1.0 + q], [-q, 1.0 + q]].map(|[u, v]| hom.apply(&Point2::new(u, v)));
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &outline {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let xs = (x0.floor() as i64).clamp(0, w as i64) as usize;
        let xe = ((x1.ceil() as i64) + 1).clamp(0, w as i64) as usize;
        let ys = (y0.floor() as i64).clamp(0, h as i64) as usize;
        let ye = ((y1.ceil() as i64) + 1).clamp(0, h as i64) as usize;
        for py in ys..ye {
            for px in xs..xe {
                let prev = buf[py * w + px];
                let mut acc = 0f32;
                for oy in offsets {
                    for ox in offsets {
                        let v = inv * Vector3::new(px as f64 + ox, py as f64 + oy, 1.0);
                        let inside = v.z > 0.0 && {
                            let (u, t) = (v.x / v.z, v.y / v.z);
                            u >= -q && u <= 1.0 + q && t >= -q && t <= 1.0 + q
                        };
                        acc += if inside {
                            if template.is_black(v.x / v.z, v.y / v.z) {
                                0.0
                            } else {
                                255.0
                            }
                        } else {
                            prev
                        };
                    }
                }
                buf[py * w + px] = acc / n_samples;
            }
        }
    }
    Ok(buf)
}

fn draw_occluder(buf: &mut [f32], width: u32, height: u32, o: &Occluder) {
    let offsets = sample_offsets();
    let (w, h) = (width as i64, height as i64);
    let xs = ((o.center[0] - o.radius).floor() as i64).clamp(0, w);
    let xe = ((o.center[0] + o.radius).ceil() as i64 + 1).clamp(0, w);
    let ys = ((o.center[1] - o.radius).floor() as i64).clamp(0, h);
    let ye = ((o.center[1] + o.radius).ceil() as i64 + 1).clamp(0, h);
    let n = (SUPERSAMPLING * SUPERSAMPLING) as f32;
    for y in ys..ye {
        for x in xs..xe {
            let mut inside = 0;
            for oy in offsets {
                for ox in offsets {
                    let (dx, dy) = (x as f64 + ox - o.center[0], y as f64 + oy - o.center[1]);
                    if dx * dx + dy * dy <= o.radius * o.radius {
                        inside += 1;
                    }
                }
            }
            let f = inside as f32 / n;
            let i = (y * w + x) as usize;
            buf[i] = (1.0 - f) * buf[i] + f * o.value as f32;
        }
    }
}

pub(crate) fn quantize(buf: &[f32], width: u32, height: u32) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| {
        image::Luma([buf[(y * width + x) as usize].round().clamp(0.0, 255.0) as u8])
    })
}

impl CleanScene {
    /// Blur, illumination gradient and sensor noise, then 8-bit quantisation.
    pub fn with_noise(&self, noise: &NoiseSpec, seed: u64) -> GrayImage {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut buf = if noise.blur_sigma > 0.0 {
            crate::blur::gaussian_blur(&self.pixels, w, h, noise.blur_sigma)
        } else {
            self.pixels.clone()
        };
        if noise.gradient != 0.0 {
            let (s, c) = noise.gradient_angle.sin_cos();
            let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
            let extent = w.max(h) as f64;
            for y in 0..h {
                for x in 0..w {
                    let along = ((x as f64 - cx) * c + (y as f64 - cy) * s) / extent;
                    buf[y * w + x] *= (1.0 + noise.gradient * along) as f32;
                }
            }
        }
        if noise.gaussian_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, noise.gaussian_sigma).expect("finite sigma");
            for v in &mut buf {
                *v += normal.sample(&mut rng) as f32;
            }
        }
        quantize(&buf, self.width, self.height)
    }
}

fn ground_truth(
    placement: &MarkerPlacement,
    camera: &CameraIntrinsics,
    geometry: &MarkerGeometry,
) -> Result<MarkerGroundTruth> {
    let pose = &placement.pose;
    let corners = pose
        .project_corners(camera, placement.side)
        .ok_or(Error::BehindCamera)?;
    let normal = pose.rotation.column(2);
    if normal.dot(&pose.translation) <= 0.0 {
        return Err(Error::invalid("marker faces away from the camera"));
    }
    let homography = pose.homography(camera, placement.side)?;
    let ellipse = transform_conic(&geometry.circle(), &homography, TransformDirection::Forward)?
        .ellipse()
        .ok_or(Error::Degenerate("ring does not image to an ellipse"))?;
    Ok(MarkerGroundTruth {
        id: placement.id,
        homography,
        pose: *pose,
        side: placement.side,
        corners: corners.map(|p| [p.x, p.y]),
        ellipse,
    })
}

impl SceneSpec {
    pub fn render_clean(&self, library: &MarkerLibrary, geometry: Arc<MarkerGeometry>) -> Result<CleanScene> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("scene must have a positive size"));
        }
        let mut truths = Vec::with_capacity(self.markers.len());
        let mut templates = Vec::with_capacity(self.markers.len());
        for m in &self.markers {
            let gt = ground_truth(m, &self.camera, &geometry)?;
            templates.push(MarkerTemplate::from_library(geometry.clone(), library, m.id)?);
            truths.push(gt);
        }
        let refs: Vec<(&MarkerTemplate, Homography)> = templates
            .iter()
            .zip(&truths)
            .map(|(t, gt)| (t, gt.homography))
            .collect();
        let bg = |x, y| self.background.value(x, y, self.width, self.height);
        let mut pixels = rasterize_markers(self.width, self.height, &bg, &refs)?;
        for o in &self.occluders {
            draw_occluder(&mut pixels, self.width, self.height, o);
        }
        Ok(CleanScene {
            width: self.width,
            height: self.height,
            pixels,
            camera: self.camera,
            ground_truth: truths,
        })
    }
}

/// Renders the scene and applies its noise, seeded by `spec.seed`.
pub fn render_scene(
    spec: &SceneSpec,
    library: &MarkerLibrary,
    geometry: Arc<MarkerGeometry>,
) -> Result<SyntheticScene> {
    let clean = spec.render_clean(library, geometry)?;
    Ok(SyntheticScene {
        image: clean.with_noise(&spec.noise, spec.seed),
        camera: spec.camera,
        ground_truth: clean.ground_truth,
        noise: spec.noise,
    })
}

/// Angle between the marker normal and the line of sight to its centre.
pub fn viewing_angle_deg(pose: &Pose) -> f64 {
    let n = pose.rotation.column(2).into_owned();
    let sight = pose.translation.normalize();
    n.dot(&sight).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Camera-frame corner depths.
pub fn corner_depths(pose: &Pose, side: f64) -> [f64; 4] {
    unit_square().map(|p| {
        let obj = Vector3::new(side * (p.x - 0.5), side * (p.y - 0.5), 0.0);
        (pose.rotation * obj + pose.translation).z
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::builtin_library;
    use crate::geom::relative_depth;

    fn library() -> MarkerLibrary {
        builtin_library(19).unwrap()
    }

    #[test]
    fn empty_scene_is_background() {
        let mut spec = SceneSpec::new(64, 48, 100.0);
        spec.background = Background::Flat(77);
        let s = render_scene(&spec, &library(), MarkerGeometry::shared()).unwrap();
        assert!(s.image.pixels().all(|p| p[0] == 77));
        assert!(s.ground_truth.is_empty());
    }

    #[test]
    fn ground_truth_depth_ratio_matches_pose() {
        let lib = library();
        let mut spec = SceneSpec::new(640, 480, 600.0);
        spec.markers
            .push(MarkerPlacement::tilted(1, 0.1, 0.4, 50.0, 20.0, [0.01, -0.02]));
        let s = render_scene(&spec, &lib, MarkerGeometry::shared()).unwrap();
        let gt = &s.ground_truth[0];
        let quad = gt.corners.map(|[x, y]| Point2::new(x, y));
        let depths = corner_depths(&gt.pose, gt.side);
        let expected =
            depths.iter().copied().fold(0.0, f64::max) / depths.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((relative_depth(&quad, &gt.homography) - expected).abs() < 1e-6);
        assert!((viewing_angle_deg(&gt.pose) - 50.0).abs() < 2.0);
    }

    #[test]
    fn ellipse_ground_truth_is_image_of_ring() {
        let lib = library();
        let mut spec = SceneSpec::new(640, 480, 800.0);
        spec.markers
            .push(MarkerPlacement::tilted(0, 0.1, 0.5, 30.0, 0.0, [0.0, 0.0]));
        let s = render_scene(&spec, &lib, MarkerGeometry::shared()).unwrap();
        let gt = &s.ground_truth[0];
        let g = MarkerGeometry::shared();
        let image_conic = crate::geom::Conic::from_ellipse(&gt.ellipse);
        for k in 0..36 {
            let a = k as f64 * 10f64.to_radians();
            let p = Point2::new(0.5 + g.circle_radius * a.cos(), 0.5 + g.circle_radius * a.sin());
            let q = gt.homography.apply(&p);
            assert!(gt.ellipse.distance_to(&q) < 1e-6, "{}", image_conic.evaluate_point(&q));
        }
    }

    #[test]
    fn marker_behind_or_facing_away_fails() {
        let lib = library();
        let mut spec = SceneSpec::new(64, 64, 100.0);
        spec.markers
            .push(MarkerPlacement::tilted(0, 0.1, -1.0, 0.0, 0.0, [0.0, 0.0]));
        assert!(render_scene(&spec, &lib, MarkerGeometry::shared()).is_err());
        spec.markers[0] = MarkerPlacement::tilted(0, 0.1, 1.0, 120.0, 0.0, [0.0, 0.0]);
        assert!(render_scene(&spec, &lib, MarkerGeometry::shared()).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let mut spec = SceneSpec::new(32, 32, 100.0);
        spec.noise = NoiseSpec {
            gaussian_sigma: 3.0,
            blur_sigma: 1.0,
            gradient: 0.2,
            gradient_angle: 0.3,
        };
        let lib = library();
        let a = render_scene(&spec, &lib, MarkerGeometry::shared()).unwrap();
        let b = render_scene(&spec, &lib, MarkerGeometry::shared()).unwrap();
        assert_eq!(a.image, b.image);
        spec.seed = 1;
        let c = render_scene(&spec, &lib, MarkerGeometry::shared()).unwrap();
        assert_ne!(a.image, c.image);
    }
}
