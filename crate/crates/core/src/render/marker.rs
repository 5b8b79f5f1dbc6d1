use std::sync::Arc;

use image::GrayImage;
use nalgebra::{Matrix3, Point2};

use super::morphology::{apply_code_morphology, BinaryRaster};
use super::scene::rasterize_markers;
use super::MarkerGeometry;
use crate::codec::{Codeword, MarkerLibrary};
use crate::error::{Error, Result};
use crate::geom::Homography;

/// Code-pattern samples across the coding-area diameter.
const MASK_RESOLUTION: usize = 768;

/// One marker's printed pattern in the marker plane, with the smoothed code
/// area rasterised once.
#[derive(Clone, Debug)]
pub struct MarkerTemplate {
    geometry: Arc<MarkerGeometry>,
    codeword: Codeword,
    mask: BinaryRaster,
    origin: f64,
    scale: f64,
}

impl MarkerTemplate {
    pub fn new(geometry: Arc<MarkerGeometry>, codeword: Codeword) -> Result<Self> {
        let disks = &geometry.disks;
        if codeword.width() as usize != disks.centers.len() {
            return Err(Error::invalid(format!(
                "codeword has {} bits but the layout has {} disks",
                codeword.width(),
                disks.centers.len()
            )));
        }
        let extent = 2.0 * geometry.code_radius;
        let scale = MASK_RESOLUTION as f64 / extent;
        let origin = geometry.circle_center[0] - geometry.code_radius;
        debug_assert_eq!(geometry.circle_center[0], geometry.circle_center[1]);
        let mut mask = BinaryRaster::new(MASK_RESOLUTION, MASK_RESOLUTION);
        for (i, c) in disks.centers.iter().enumerate() {
            if codeword.bit(i as u32) {
                // Pixel `k` has its centre at `origin + (k + 0.5) / scale`.
                mask.fill_disk(
                    (c[0] - origin) * scale - 0.5,
                    (c[1] - origin) * scale - 0.5,
                    disks.radius * scale,
                );
            }
        }
        let mask = apply_code_morphology(&mask, geometry.morphology_iterations, 0.25 * disks.radius * scale);
        Ok(Self {
            geometry,
            codeword,
            mask,
            origin,
            scale,
        })
    }

    pub fn from_library(geometry: Arc<MarkerGeometry>, library: &MarkerLibrary, id: usize) -> Result<Self> {
        let cw = library
            .codeword(id)
            .ok_or(Error::IdOutOfRange { id, len: library.len() })?;
        Self::new(geometry, cw)
    }

    pub fn geometry(&self) -> &MarkerGeometry {
        &self.geometry
    }

    pub fn codeword(&self) -> Codeword {
        self.codeword
    }

    /// Printed colour at a marker-plane point: `true` for black.
    pub fn is_black(&self, u: f64, v: f64) -> bool {
        if let Some(b) = self.geometry.is_black_static(u, v) {
            return b;
        }
        let x = ((u - self.origin) * self.scale).floor();
        let y = ((v - self.origin) * self.scale).floor();
        let n = MASK_RESOLUTION as f64;
        if x < 0.0 || y < 0.0 || x >= n || y >= n {
            return false;
        }
        self.mask.get(x as usize, y as usize)
    }
}

/// A rendered marker with its placement in the raster.
#[derive(Clone, Debug)]
pub struct MarkerRaster {
    pub image: GrayImage,
    pub marker_id: usize,
    /// Unit-square marker coordinates to pixel coordinates.
    pub homography: Homography,
}

/// Minimum raster side in pixels.
pub const MIN_MARKER_SIDE: u32 = 64;

/// Affine map placing the unit square inside a `side`-pixel tile with the
/// geometry's quiet zone. Pixel `k` is centred at coordinate `k`.
pub(crate) fn tile_homography(geometry: &MarkerGeometry, side: u32, x0: f64, y0: f64) -> Matrix3<f64> {
    let s = side as f64;
    let margin = geometry.quiet_zone * s;
    let span = s - 2.0 * margin;
    Matrix3::new(
        span,
        0.0,
        x0 + margin - 0.5,
        0.0,
        span,
        y0 + margin - 0.5,
        0.0,
        0.0,
        1.0,
    )
}

/// Renders marker `id` on white with a quiet zone of `quiet_zone * side`
/// pixels on each side.
pub fn render_marker(
    library: &MarkerLibrary,
    geometry: Arc<MarkerGeometry>,
    id: usize,
    side: u32,
) -> Result<MarkerRaster> {
    if side < MIN_MARKER_SIDE {
        return Err(Error::invalid(format!(
            "side must be at least {MIN_MARKER_SIDE} pixels"
        )));
    }
    let template = MarkerTemplate::from_library(geometry.clone(), library, id)?;
    let h = Homography::from_matrix(tile_homography(&geometry, side, 0.0, 0.0))?;
    let buf = rasterize_markers(side, side, &|_, _| 255.0, &[(&template, h)])?;
    Ok(MarkerRaster {
        image: super::scene::quantize(&buf, side, side),
        marker_id: id,
        homography: h,
    })
}

/// A printable grid of markers, `columns` per row, each in a `side`-pixel tile.
pub fn render_sheet(
    library: &MarkerLibrary,
    geometry: Arc<MarkerGeometry>,
    ids: &[usize],
    side: u32,
    columns: usize,
) -> Result<(GrayImage, Vec<Homography>)> {
    if side < MIN_MARKER_SIDE {
        return Err(Error::invalid(format!(
            "side must be at least {MIN_MARKER_SIDE} pixels"
        )));
    }
    if ids.is_empty() || columns == 0 {
        return Err(Error::invalid("sheet needs at least one marker and one column"));
    }
    let rows = ids.len().div_ceil(columns);
    let (w, h) = (side * columns.min(ids.len()) as u32, side * rows as u32);
    let mut placed = Vec::with_capacity(ids.len());
    for (k, &id) in ids.iter().enumerate() {
        let template = MarkerTemplate::from_library(geometry.clone(), library, id)?;
        let (col, row) = ((k % columns) as f64, (k / columns) as f64);
        let hom = Homography::from_matrix(tile_homography(&geometry, side, col * side as f64, row * side as f64))?;
        placed.push((template, hom));
    }
    let refs: Vec<(&MarkerTemplate, Homography)> = placed.iter().map(|(t, h)| (t, *h)).collect();
    let buf = rasterize_markers(w, h, &|_, _| 255.0, &refs)?;
    Ok((
        super::scene::quantize(&buf, w, h),
        placed.into_iter().map(|(_, h)| h).collect(),
    ))
}

/// Marker-plane centre of disk `index`.
pub fn disk_center(geometry: &MarkerGeometry, index: usize) -> Point2<f64> {
    let c = geometry.disks.centers[index];
    Point2::new(c[0], c[1])
}
