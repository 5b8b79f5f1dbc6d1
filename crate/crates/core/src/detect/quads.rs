//! Line segments, corners and quadrilateral candidates.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::edges::EdgeSegment;
use crate::geom::{
    fit_line, fit_line_segments, homography_from_corners, signed_area2, unit_square, HomLine, Homography, LineSegment,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadParams {
    /// Maximum point-to-line distance while growing a line, pixels.
    pub line_tolerance: f64,
    /// Points needed to start a line.
    pub min_line_length: usize,
    /// Minimum angle between consecutive lines for a corner, degrees.
    pub min_corner_angle: f64,
    /// A completed fourth corner must lie within this many triangle
    /// bounding-box diagonals of the box centre.
    pub completion_reach: f64,
    /// Quads whose corners all agree within this distance are duplicates.
    pub dedup_distance: f64,
    /// Shortest accepted quad side, pixels.
    pub min_side: f64,
    /// Points dropped from each end of a line before its final fit. Ends run
    /// into the rounded, blurred corners.
    pub end_trim: usize,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            line_tolerance: 1.0,
            min_line_length: 12,
            min_corner_angle: 20.0,
            completion_reach: 1.5,
            dedup_distance: 2.0,
            min_side: 12.0,
            end_trim: 3,
        }
    }
}

/// Meeting point of two consecutive lines of one chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub location: [f64; 2],
    pub incoming: LineSegment,
    pub outgoing: LineSegment,
    /// Index of the source edge segment.
    pub segment: usize,
    /// Index of `outgoing` in the segment's line list.
    line_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadProvenance {
    FourCorner,
    ThreeCornerCompleted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadCandidate {
    /// Positive signed area, starting at the corner with the smallest `x + y`.
    pub corners: [[f64; 2]; 4],
    /// Unit square to `corners`.
    pub homography: Homography,
    pub provenance: QuadProvenance,
}

impl QuadCandidate {
    pub fn corner_points(&self) -> [Point2<f64>; 4] {
        self.corners.map(|c| Point2::new(c[0], c[1]))
    }
}

/// Splits each chain into straight runs. Closed chains are rotated so that
/// they start where the first run ends, so no side is cut at the seam.
pub fn segment_lines(segment: &EdgeSegment, params: &QuadParams) -> Vec<LineSegment> {
    let pts: Vec<Point2<f64>> = segment.points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let lines = fit_line_segments(&pts, params.line_tolerance, params.min_line_length);
    if !segment.closed || lines.is_empty() || lines[0].end >= pts.len() {
        return trimmed(&pts, lines, params.end_trim);
    }
    let shift = lines[0].end;
    let mut rotated = pts[shift..].to_vec();
    rotated.extend_from_slice(&pts[..shift]);
    let n = pts.len();
    let lines = fit_line_segments(&rotated, params.line_tolerance, params.min_line_length);
    trimmed(&rotated, lines, params.end_trim)
        .into_iter()
        .map(|mut l| {
            // Indices back into the original chain, modulo its length.
            l.start = (l.start + shift) % n;
            l.end = (l.end + shift - 1) % n + 1;
            l
        })
        .collect()
}

/// Refits each line without `trim` points at either end when it is long
/// enough to spare them. Extents stay those of the untrimmed run.
fn trimmed(pts: &[Point2<f64>], mut lines: Vec<LineSegment>, trim: usize) -> Vec<LineSegment> {
    for l in &mut lines {
        if trim == 0 || l.len() < 4 * trim {
            continue;
        }
        if let Ok(h) = fit_line(&pts[l.start + trim..l.end - trim]) {
            let Some(h) = h.normalized() else { continue };
            let line = [h.0.x, h.0.y, h.0.z];
            // Keep the orientation of the original normal.
            let sign = if line[0] * l.line[0] + line[1] * l.line[1] < 0.0 {
                -1.0
            } else {
                1.0
            };
            l.line = line.map(|v| sign * v);
            let project = |p: &Point2<f64>| {
                let d = l.line[0] * p.x + l.line[1] * p.y + l.line[2];
                [p.x - d * l.line[0], p.y - d * l.line[1]]
            };
            l.p0 = project(&pts[l.start]);
            l.p1 = project(&pts[l.end - 1]);
        }
    }
    lines
}

fn intersect(a: &LineSegment, b: &LineSegment) -> Option<[f64; 2]> {
    let p = a.hom_line().meet(&b.hom_line()).to_euclidean()?;
    Some([p.x, p.y])
}

/// Acute angle between two lines in degrees.
fn line_angle(a: &LineSegment, b: &LineSegment) -> f64 {
    let (da, db) = (a.direction(), b.direction());
    let c = (da[0] * db[0] + da[1] * db[1]).abs().min(1.0);
    c.acos().to_degrees()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Corners between consecutive lines of one chain (and across the seam of a
/// closed chain). The lines must turn by at least the minimum angle and meet
/// near the ends that face each other.
pub fn chain_corners(segment_index: usize, closed: bool, lines: &[LineSegment], params: &QuadParams) -> Vec<Corner> {
    let n = lines.len();
    let pairs = if closed && n >= 3 { n } else { n.saturating_sub(1) };
    let mut out = Vec::new();
    for k in 0..pairs {
        let (a, b) = (&lines[k], &lines[(k + 1) % n]);
        if line_angle(a, b) < params.min_corner_angle {
            continue;
        }
        let Some(p) = intersect(a, b) else { continue };
        let reach = 6.0f64.max(0.25 * a.length().min(b.length()));
        if dist(p, a.p1) > reach || dist(p, b.p0) > reach {
            continue;
        }
        out.push(Corner {
            location: p,
            incoming: *a,
            outgoing: *b,
            segment: segment_index,
            line_index: (k + 1) % n,
        });
    }
    out
}

/// Interior angles in degrees of a positively oriented quad.
fn interior_angles(c: &[[f64; 2]; 4]) -> [f64; 4] {
    std::array::from_fn(|i| {
        let p = c[i];
        let (a, b) = (c[(i + 3) % 4], c[(i + 1) % 4]);
        let (u, v) = ([a[0] - p[0], a[1] - p[1]], [b[0] - p[0], b[1] - p[1]]);
        let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
        cos.clamp(-1.0, 1.0).acos().to_degrees()
    })
}

fn is_convex(c: &[[f64; 2]; 4]) -> bool {
    let signs: Vec<f64> = (0..4)
        .map(|i| {
            let (p, q, r) = (c[i], c[(i + 1) % 4], c[(i + 2) % 4]);
            (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0])
        })
        .collect();
    signs.iter().all(|&s| s > 0.0) || signs.iter().all(|&s| s < 0.0)
}

/// Orders corners with positive signed area, starting at the smallest `x + y`.
pub fn canonical_order(mut c: [[f64; 2]; 4]) -> [[f64; 2]; 4] {
    let pts = c.map(|p| Point2::new(p[0], p[1]));
    if signed_area2(&pts) < 0.0 {
        c.reverse();
    }
    let start = (0..4)
        .min_by(|&i, &j| (c[i][0] + c[i][1]).total_cmp(&(c[j][0] + c[j][1])))
        .unwrap_or(0);
    std::array::from_fn(|k| c[(start + k) % 4])
}

fn make_quad(corners: [[f64; 2]; 4], provenance: QuadProvenance, params: &QuadParams) -> Option<QuadCandidate> {
    if corners.iter().flatten().any(|v| !v.is_finite()) || !is_convex(&corners) {
        return None;
    }
    let corners = canonical_order(corners);
    if (0..4).any(|i| dist(corners[i], corners[(i + 1) % 4]) < params.min_side) {
        return None;
    }
    let lo = params.min_corner_angle;
    if interior_angles(&corners).iter().any(|&a| a <= lo || a >= 180.0 - lo) {
        return None;
    }
    let homography = homography_from_corners(&unit_square(), &corners.map(|p| Point2::new(p[0], p[1]))).ok()?;
    Some(QuadCandidate {
        corners,
        homography,
        provenance,
    })
}

/// Fourth corner of a three-corner run: where the first corner's incoming
/// line meets the third corner's outgoing line.
fn complete(c: &[Corner; 3], params: &QuadParams) -> Option<[f64; 2]> {
    let l1: HomLine = c[0].incoming.hom_line();
    let l3: HomLine = c[2].outgoing.hom_line();
    let p = l1.meet(&l3).to_euclidean()?;
    let xs = c.map(|k| k.location[0]);
    let ys = c.map(|k| k.location[1]);
    let (x0, x1) = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = (
        ys.iter().copied().fold(f64::INFINITY, f64::min),
        ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let diag = (x1 - x0).hypot(y1 - y0);
    let centre = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
    (dist([p.x, p.y], centre) <= params.completion_reach * diag).then_some([p.x, p.y])
}

fn same_quad(a: &QuadCandidate, b: &QuadCandidate, tol: f64) -> bool {
    (0..4).any(|s| (0..4).all(|k| dist(a.corners[k], b.corners[(k + s) % 4]) <= tol))
}

/// Quads from runs of consecutive corners on each chain.
pub fn extract_quads(segments: &[EdgeSegment], params: &QuadParams) -> Vec<QuadCandidate> {
    let lines: Vec<_> = segments.iter().map(|s| segment_lines(s, params)).collect();
    quads_from_lines(segments, &lines, params)
}

/// As [`extract_quads`] with the per-chain lines already fitted.
pub(crate) fn quads_from_lines(
    segments: &[EdgeSegment],
    lines: &[Vec<LineSegment>],
    params: &QuadParams,
) -> Vec<QuadCandidate> {
    let mut raw = Vec::new();
    for (si, (seg, lines)) in segments.iter().zip(lines).enumerate() {
        let corners = chain_corners(si, seg.closed, lines, params);
        raw.extend(quads_from_corners(&corners, lines.len(), seg.closed, params));
    }
    dedup_quads(raw, params.dedup_distance)
}

/// Whether corner `b` directly follows corner `a` on the same chain.
fn follows(a: &Corner, b: &Corner, line_count: usize) -> bool {
    a.segment == b.segment && (a.line_index + 1) % line_count.max(1) == b.line_index
}

fn quads_from_corners(corners: &[Corner], line_count: usize, closed: bool, params: &QuadParams) -> Vec<QuadCandidate> {
    let m = corners.len();
    let mut out = Vec::new();
    if m < 3 {
        return out;
    }
    let runs = if closed { m } else { m.saturating_sub(2) };
    for i in 0..runs {
        let c = [corners[i], corners[(i + 1) % m], corners[(i + 2) % m]];
        if !follows(&c[0], &c[1], line_count) || !follows(&c[1], &c[2], line_count) {
            continue;
        }
        // Four corners closing the loop: the fourth's outgoing line is the
        // first's incoming line.
        if m >= 4 && (closed || i + 3 < m) {
            let d = corners[(i + 3) % m];
            if follows(&c[2], &d, line_count) && follows(&d, &c[0], line_count) {
                let q = [c[0].location, c[1].location, c[2].location, d.location];
                if let Some(q) = make_quad(q, QuadProvenance::FourCorner, params) {
                    out.push(q);
                }
            }
        }
        if let Some(p) = complete(&c, params) {
            let q = [c[0].location, c[1].location, c[2].location, p];
            if let Some(q) = make_quad(q, QuadProvenance::ThreeCornerCompleted, params) {
                out.push(q);
            }
        }
    }
    out
}

/// Keeps the first of every group of matching quads, preferring four-corner
/// ones; output order is deterministic.
pub fn dedup_quads(mut quads: Vec<QuadCandidate>, tol: f64) -> Vec<QuadCandidate> {
    quads.sort_by(|a, b| {
        let key = |q: &QuadCandidate| (q.provenance != QuadProvenance::FourCorner) as u8;
        key(a)
            .cmp(&key(b))
            .then(a.corners[0][1].total_cmp(&b.corners[0][1]))
            .then(a.corners[0][0].total_cmp(&b.corners[0][0]))
    });
    let mut kept: Vec<QuadCandidate> = Vec::new();
    for q in quads {
        if !kept.iter().any(|k| same_quad(k, &q, tol)) {
            kept.push(q);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::edges::{detect_edge_segments, EdgeParams};
    use image::{GrayImage, Luma};

    fn square_image() -> GrayImage {
        GrayImage::from_fn(300, 300, |x, y| {
            let inside = (60..260).contains(&x) && (50..250).contains(&y);
            Luma([if inside { 20 } else { 230 }])
        })
    }

    #[test]
    fn square_gives_one_four_corner_quad() {
        let segs = detect_edge_segments(&square_image(), &EdgeParams::default());
        let quads = extract_quads(&segs, &QuadParams::default());
        assert_eq!(quads.len(), 1, "{quads:?}");
        let q = &quads[0];
        assert_eq!(q.provenance, QuadProvenance::FourCorner);
        let truth = [[59.5, 49.5], [259.5, 49.5], [259.5, 249.5], [59.5, 249.5]];
        for (c, t) in q.corners.iter().zip(truth) {
            assert!(dist(*c, t) < 0.5, "{c:?} vs {t:?}");
        }
    }

    #[test]
    fn occluded_corner_is_completed() {
        let mut img = square_image();
        // White blob over the bottom-right corner.
        for y in 0..300u32 {
            for x in 0..300u32 {
                if (x as f64 - 259.5).hypot(y as f64 - 249.5) < 30.0 {
                    img.put_pixel(x, y, Luma([230]));
                }
            }
        }
        let segs = detect_edge_segments(&img, &EdgeParams::default());
        let quads = extract_quads(&segs, &QuadParams::default());
        let hit = quads
            .iter()
            .find(|q| dist(q.corners[2], [259.5, 249.5]) < 1.5)
            .expect("completed quad");
        assert_eq!(hit.provenance, QuadProvenance::ThreeCornerCompleted);
    }

    #[test]
    fn circle_gives_no_quads() {
        let img = GrayImage::from_fn(300, 300, |x, y| {
            let r = (x as f64 - 150.0).hypot(y as f64 - 150.0);
            Luma([if r < 100.0 { 20 } else { 230 }])
        });
        let segs = detect_edge_segments(&img, &EdgeParams::default());
        assert!(extract_quads(&segs, &QuadParams::default()).is_empty());
    }

    #[test]
    fn extraction_is_idempotent() {
        let segs = detect_edge_segments(&square_image(), &EdgeParams::default());
        let a = extract_quads(&segs, &QuadParams::default());
        let b = extract_quads(&segs, &QuadParams::default());
        assert_eq!(a, b);
        assert_eq!(dedup_quads(a.clone(), 2.0), a);
    }

    #[test]
    fn canonical_order_is_positive_from_top_left() {
        let c = canonical_order([[10.0, 0.0], [0.0, 0.0], [0.0, 10.0], [10.0, 10.0]]);
        assert_eq!(c[0], [0.0, 0.0]);
        let pts = c.map(|p| Point2::new(p[0], p[1]));
        assert!(signed_area2(&pts) > 0.0);
    }
}
