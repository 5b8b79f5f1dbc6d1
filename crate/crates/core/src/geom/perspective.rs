use nalgebra::Point2;

use super::{HomLine, Homography};

/// Image of the marker plane's line at infinity, `H^-T (0, 0, 1)`. An affine
/// `H` yields the line at infinity itself.
pub fn line_at_infinity_image(h: &Homography) -> HomLine {
    match h.apply_line(&HomLine::at_infinity()) {
        Ok(l) if !l.is_at_infinity() => l,
        _ => HomLine::at_infinity(),
    }
}

/// The same line from the image alone: join of the two vanishing points
/// where opposite quad sides meet.
pub fn vanishing_line_from_quad(quad: &[Point2<f64>; 4]) -> HomLine {
    let side = |i: usize| HomLine::through(&quad[i], &quad[(i + 1) % 4]);
    let v1 = side(0).meet(&side(2));
    let v2 = side(1).meet(&side(3));
    let l = v1.join(&v2);
    if l.is_at_infinity() || l.0.norm() == 0.0 {
        HomLine::at_infinity()
    } else {
        l
    }
}

/// Ratio of the largest to the smallest distance from a quad corner to the
/// imaged line at infinity. Distance to that line is inversely proportional
/// to camera depth, so this is the farthest/nearest depth ratio of the
/// corners. Returns 1 for an affine `H` and infinity when a corner lies on
/// the line.
pub fn relative_depth(quad: &[Point2<f64>; 4], h: &Homography) -> f64 {
    let l = line_at_infinity_image(h);
    if l.is_at_infinity() {
        return 1.0;
    }
    let d = quad.map(|p| l.distance(&p));
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let dmax = d.iter().copied().fold(0.0, f64::max);
    if !(dmin > 0.0) {
        return f64::INFINITY;
    }
    dmax / dmin
}
