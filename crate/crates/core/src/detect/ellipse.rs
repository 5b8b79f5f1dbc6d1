//! Finding the imaged ring among the closed chains inside a decoded quad.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::edges::EdgeSegment;
use crate::geom::{fit_ellipse, Conic, Ellipse, Homography};
use crate::render::MarkerGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    /// Points of each loop compared against the ring radius.
    pub samples: usize,
    /// Largest accepted mean radial deviation, marker-plane units.
    pub similarity_threshold: f64,
    /// Angular bins around the centre that a loop must visit.
    pub coverage_bins: usize,
    /// Also fit the points of the other ring edge when both are found.
    pub merge_edges: bool,
}

impl Default for EllipseParams {
    fn default() -> Self {
        Self {
            samples: 16,
            similarity_threshold: 0.05,
            coverage_bins: 16,
            merge_edges: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingMatch {
    /// Fitted conic in image coordinates.
    pub conic: Conic,
    pub ellipse: Ellipse,
    /// Which ring edge the loop traces, marker-plane radius.
    pub radius: f64,
    pub score: f64,
    pub segment: usize,
    /// Loop of the other ring edge whose points joined the fit.
    pub merged: Option<usize>,
}

fn inside_convex(quad: &[[f64; 2]; 4], p: [f64; 2]) -> bool {
    let mut sign = 0.0;
    for i in 0..4 {
        let (a, b) = (quad[i], quad[(i + 1) % 4]);
        let c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if c == 0.0 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

/// Mean deviation of sparse loop samples from `radius`.
fn loop_score(marker_pts: &[Point2<f64>], centre: Point2<f64>, radius: f64, samples: usize) -> f64 {
    let n = marker_pts.len();
    let k = samples.clamp(1, n);
    (0..k)
        .map(|i| ((marker_pts[i * n / k] - centre).norm() - radius).abs())
        .sum::<f64>()
        / k as f64
}

/// Whether the loop goes all the way round the centre.
fn covers(marker_pts: &[Point2<f64>], centre: Point2<f64>, bins: usize) -> bool {
    let bins = bins.max(1);
    let mut seen = vec![false; bins];
    for p in marker_pts {
        let a = (p.y - centre.y).atan2(p.x - centre.x) + std::f64::consts::PI;
        let b = ((a / std::f64::consts::TAU) * bins as f64) as usize;
        seen[b.min(bins - 1)] = true;
    }
    seen.iter().all(|&s| s)
}

/// Picks the closed chain inside `corners` whose back-projection lies
/// closest to one of the ring's edge circles and fits an ellipse to it.
///
/// Each loop counts for whichever edge it is closer to. The outer edge,
/// which borders plain white, is the primary match whenever a loop traces
/// it; the inner edge is the fallback. A fixed preference keeps the choice
/// from flipping between frames of a static marker.
///
/// With `merge_edges`, points of the other edge are scaled radially onto the
/// chosen one in the marker plane of `homography` and fitted together with
/// it. The scaling moves them by only the radius ratio minus one times the
/// error of `homography`, while the extra points roughly halve the noise of
/// the fitted ellipse.
pub fn localize_ellipse(
    segments: &[EdgeSegment],
    corners: &[[f64; 2]; 4],
    homography: &Homography,
    geometry: &MarkerGeometry,
    params: &EllipseParams,
) -> Option<RingMatch> {
    let inv = homography.inverse().ok()?;
    let centre = geometry.center();
    let radii = [geometry.ring_outer_radius(), geometry.ring_inner_radius()];
    let mut best: [Option<(f64, usize)>; 2] = [None, None];
    for (i, seg) in segments.iter().enumerate() {
        if !seg.closed || seg.len() < 6 || !seg.points.iter().all(|&p| inside_convex(corners, p)) {
            continue;
        }
        let marker: Vec<Point2<f64>> = seg.points.iter().map(|p| inv.apply(&Point2::new(p[0], p[1]))).collect();
        if !covers(&marker, centre, params.coverage_bins) {
            continue;
        }
        let scores = radii.map(|r| loop_score(&marker, centre, r, params.samples));
        let k = usize::from(scores[1] < scores[0]);
        let s = scores[k];
        if s <= params.similarity_threshold && best[k].is_none_or(|(b, _)| s < b) {
            best[k] = Some((s, i));
        }
    }
    let (k, (score, segment)) = best.iter().enumerate().find_map(|(k, b)| b.map(|b| (k, b)))?;
    let radius = radii[k];
    let mut pts: Vec<Point2<f64>> = segments[segment]
        .points
        .iter()
        .map(|p| Point2::new(p[0], p[1]))
        .collect();
    let other = best[1 - k].filter(|_| params.merge_edges).map(|(_, seg)| seg);
    if let Some(seg) = other {
        let scale = radius / radii[1 - k];
        pts.extend(segments[seg].points.iter().map(|p| {
            let m = inv.apply(&Point2::new(p[0], p[1]));
            homography.apply(&(centre + (m - centre) * scale))
        }));
    }
    let conic = fit_ellipse(&pts).ok()?;
    let ellipse = conic.ellipse()?;
    Some(RingMatch {
        conic,
        ellipse,
        radius,
        score,
        segment,
        merged: other,
    })
}
