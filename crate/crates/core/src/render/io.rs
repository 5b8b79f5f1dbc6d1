//! Grayscale image files and the scene ground-truth sidecar.
//!
//! Sidecar layout, one record per line, `#` starts a comment:
//!
//! ```text
//! size <width> <height>
//! camera <fx> <fy> <cx> <cy>
//! noise <gaussian_sigma> <blur_sigma> <gradient> <gradient_angle>
//! marker <id> <side> <H: 9 row-major> <[R|t]: 12 row-major> <corners: 8> <ellipse: cx cy a b angle>
//! ```

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{GrayImage, ImageEncoder, ImageFormat};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::scene::{MarkerGroundTruth, NoiseSpec, SyntheticScene};
use crate::error::{Error, Result};
use crate::geom::{Ellipse, Homography};
use crate::pose::{CameraIntrinsics, Pose};

/// Reads any supported image and converts it to 8-bit grey.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    Ok(reader.decode()?.to_luma8())
}

/// Writes PNG, or binary PGM (`P5`) for `.pgm`/`.pnm` paths.
pub fn save_gray(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match ImageFormat::from_path(path)? {
        ImageFormat::Pnm => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            PnmEncoder::new(BufWriter::new(file))
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(
                    image.as_raw(),
                    image.width(),
                    image.height(),
                    image::ExtendedColorType::L8,
                )?;
            Ok(())
        }
        ImageFormat::Png => Ok(image.save_with_format(path, ImageFormat::Png)?),
        other => Err(Error::invalid(format!("unsupported image format {other:?}"))),
    }
}

/// Parsed sidecar contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub width: u32,
    pub height: u32,
    pub camera: CameraIntrinsics,
    pub noise: NoiseSpec,
    pub markers: Vec<MarkerGroundTruth>,
}

impl SceneRecord {
    pub fn from_scene(scene: &SyntheticScene) -> Self {
        Self {
            width: scene.image.width(),
            height: scene.image.height(),
            camera: scene.camera,
            noise: scene.noise,
            markers: scene.ground_truth.clone(),
        }
    }
}

fn push_all(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        let _ = write!(out, " {v:e}");
    }
}

pub fn format_sidecar(record: &SceneRecord) -> String {
    let mut out = String::from("# ringmark scene ground truth\n");
    let _ = writeln!(out, "size {} {}", record.width, record.height);
    let c = &record.camera;
    let _ = writeln!(out, "camera {:e} {:e} {:e} {:e}", c.fx, c.fy, c.cx, c.cy);
    let n = &record.noise;
    let _ = writeln!(
        out,
        "noise {:e} {:e} {:e} {:e}",
        n.gaussian_sigma, n.blur_sigma, n.gradient, n.gradient_angle
    );
    for m in &record.markers {
        let _ = write!(out, "marker {} {:e}", m.id, m.side);
        let h = m.homography.matrix();
        push_all(&mut out, (0..3).flat_map(|r| (0..3).map(move |c| h[(r, c)])));
        let (rot, t) = (&m.pose.rotation, &m.pose.translation);
        push_all(
            &mut out,
            (0..3).flat_map(|r| [rot[(r, 0)], rot[(r, 1)], rot[(r, 2)], t[r]]),
        );
        push_all(&mut out, m.corners.iter().flat_map(|p| *p));
        let e = &m.ellipse;
        push_all(
            &mut out,
            [e.center[0], e.center[1], e.semi_major, e.semi_minor, e.angle],
        );
        out.push('\n');
    }
    out
}

pub fn parse_sidecar(text: &str) -> Result<SceneRecord> {
    let mut size = None;
    let mut camera = None;
    let mut noise = NoiseSpec::default();
    let mut markers = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::LibraryParse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let mut fields = line.split_whitespace();
        let key = fields.next().unwrap_or_default();
        let nums: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| err("bad number")))
            .collect::<Result<_>>()?;
        let expect = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(err(&format!("`{key}` needs {n} values, got {}", nums.len())))
            }
        };
        match key {
            "size" => {
                expect(2)?;
                size = Some((nums[0] as u32, nums[1] as u32));
            }
            "camera" => {
                expect(4)?;
                camera = Some(CameraIntrinsics::new(nums[0], nums[1], nums[2], nums[3])?);
            }
            "noise" => {
                expect(4)?;
                noise = NoiseSpec {
                    gaussian_sigma: nums[0],
                    blur_sigma: nums[1],
                    gradient: nums[2],
                    gradient_angle: nums[3],
                };
            }
            "marker" => {
                expect(2 + 9 + 12 + 8 + 5)?;
                let h = Matrix3::from_row_slice(&nums[2..11]);
                let p = &nums[11..23];
                let rotation = Matrix3::new(p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]);
                let translation = Vector3::new(p[3], p[7], p[11]);
                let c = &nums[23..31];
                let e = &nums[31..36];
                markers.push(MarkerGroundTruth {
                    id: nums[0] as usize,
                    side: nums[1],
                    homography: Homography::from_matrix(h)?,
                    pose: Pose::exact(rotation, translation),
                    corners: [[c[0], c[1]], [c[2], c[3]], [c[4], c[5]], [c[6], c[7]]],
                    ellipse: Ellipse {
                        center: [e[0], e[1]],
                        semi_major: e[2],
                        semi_minor: e[3],
                        angle: e[4],
                    },
                });
            }
            _ => return Err(err(&format!("unknown record `{key}`"))),
        }
    }
    let missing = |what: &str| Error::LibraryParse {
        line: 0,
        msg: format!("missing `{what}` record"),
    };
    let (width, height) = size.ok_or_else(|| missing("size"))?;
    Ok(SceneRecord {
        width,
        height,
        camera: camera.ok_or_else(|| missing("camera"))?,
        noise,
        markers,
    })
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<SceneRecord> {
    let path = path.as_ref();
    parse_sidecar(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_sidecar(record: &SceneRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_sidecar(record)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::builtin_library;
    use crate::render::{render_scene, MarkerGeometry, MarkerPlacement, SceneSpec};

    #[test]
    fn sidecar_round_trip() {
        let lib = builtin_library(19).unwrap();
        let mut spec = SceneSpec::new(320, 240, 400.0);
        spec.markers
            .push(MarkerPlacement::tilted(2, 0.1, 0.6, 35.0, 10.0, [0.02, 0.0]));
        spec.noise = NoiseSpec::sensor(2.0);
        let scene = render_scene(&spec, &lib, MarkerGeometry::shared()).unwrap();
        let rec = SceneRecord::from_scene(&scene);
        let text = format_sidecar(&rec);
        assert_eq!(text.lines().filter(|l| l.starts_with("marker")).count(), 1);
        let back = parse_sidecar(&text).unwrap();
        assert_eq!(back.markers.len(), 1);
        let (a, b) = (&rec.markers[0], &back.markers[0]);
        assert_eq!(a.id, b.id);
        assert!((a.homography.matrix() - b.homography.matrix()).norm() < 1e-12);
        assert!((a.pose.rotation - b.pose.rotation).norm() < 1e-12);
        assert_eq!(a.corners, b.corners);
        assert_eq!(a.ellipse, b.ellipse);
        assert_eq!(back.camera, rec.camera);
        assert_eq!(back.noise, rec.noise);
    }

    #[test]
    fn sidecar_rejects_garbage() {
        assert!(parse_sidecar("size 1 2\n").is_err());
        assert!(parse_sidecar("size 1 2\ncamera 1 1 0 0\nmarker 1 2 3\n").is_err());
        assert!(parse_sidecar("bogus 1\n").is_err());
    }

    #[test]
    fn image_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_fn(13, 7, |x, y| image::Luma([(x * 19 + y * 7) as u8]));
        for name in ["a.png", "a.pgm"] {
            let path = dir.path().join(name);
            save_gray(&img, &path).unwrap();
            assert_eq!(load_gray(&path).unwrap(), img);
        }
        let raw = std::fs::read(dir.path().join("a.pgm")).unwrap();
        assert_eq!(&raw[..2], b"P5");
    }
}
