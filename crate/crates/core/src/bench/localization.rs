//! Monte Carlo comparison of square and circle localisation from noisy
//! boundary samples.
//!
//! Both shapes have unit area. The square is sampled 10 times per side and
//! recovered by intersecting per-side least-squares lines; the circle is
//! sampled at 40 angles and recovered with a direct ellipse fit. The error of
//! a fit is the mean distance from 40 noise-free boundary samples to it.

use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geom::{fit_ellipse, fit_line, HomLine};

pub const SAMPLES: usize = 40;
const PER_SIDE: usize = SAMPLES / 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationPoint {
    pub sigma: f64,
    pub quad_error: f64,
    pub ellipse_error: f64,
    pub trials: usize,
    /// Trials where a fit was degenerate; excluded from the means.
    pub quad_failures: usize,
    pub ellipse_failures: usize,
}

/// `0.005, 0.010, ..., 0.040`.
pub fn default_sigmas() -> Vec<f64> {
    (1..=8).map(|k| 0.005 * k as f64).collect()
}

fn square_samples() -> [Vec<Point2<f64>>; 4] {
    let corners = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
    std::array::from_fn(|s| {
        let (a, b) = (corners[s], corners[(s + 1) % 4]);
        (0..PER_SIDE)
            .map(|k| {
                let t = (k as f64 + 0.5) / PER_SIDE as f64;
                Point2::new(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
            })
            .collect()
    })
}

fn circle_radius() -> f64 {
    (1.0 / std::f64::consts::PI).sqrt()
}

fn circle_samples() -> Vec<Point2<f64>> {
    let r = circle_radius();
    (0..SAMPLES)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / SAMPLES as f64;
            Point2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

fn segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn jitter(p: &Point2<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> Point2<f64> {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    Point2::new(p.x + sigma * dx, p.y + sigma * dy)
}

fn quad_error(sides: &[Vec<Point2<f64>>; 4], truth: &[Point2<f64>], sigma: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
    let lines: Vec<HomLine> = sides
        .iter()
        .map(|side| {
            let noisy: Vec<_> = side.iter().map(|p| jitter(p, sigma, rng)).collect();
            fit_line(&noisy).ok()
        })
        .collect::<Option<_>>()?;
    let corners: Vec<Point2<f64>> = (0..4)
        .map(|i| lines[(i + 3) % 4].meet(&lines[i]).to_euclidean())
        .collect::<Option<_>>()?;
    let sum: f64 = truth
        .iter()
        .map(|p| {
            (0..4)
                .map(|i| segment_distance(p, &corners[i], &corners[(i + 1) % 4]))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some(sum / truth.len() as f64)
}

fn ellipse_error(samples: &[Point2<f64>], sigma: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
    let noisy: Vec<_> = samples.iter().map(|p| jitter(p, sigma, rng)).collect();
    let e = fit_ellipse(&noisy).ok()?.ellipse()?;
    Some(samples.iter().map(|p| e.distance_to(p)).sum::<f64>() / samples.len() as f64)
}

/// One point per `sigma`, `trials` trials each. Trial `t` at sigma index `s`
/// draws from its own generator seeded with `seed`, `s` and `t`.
pub fn run_localization_sim(sigmas: &[f64], trials: usize, seed: u64) -> Vec<LocalizationPoint> {
    let sides = square_samples();
    let square_truth: Vec<Point2<f64>> = sides.iter().flatten().copied().collect();
    let circle = circle_samples();
    sigmas
        .iter()
        .enumerate()
        .map(|(s, &sigma)| {
            let (mut q_sum, mut e_sum) = (0.0, 0.0);
            let (mut q_fail, mut e_fail) = (0, 0);
            for t in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((s as u64) << 40) ^ t as u64);
                match quad_error(&sides, &square_truth, sigma, &mut rng) {
                    Some(v) => q_sum += v,
                    None => q_fail += 1,
                }
                match ellipse_error(&circle, sigma, &mut rng) {
                    Some(v) => e_sum += v,
                    None => e_fail += 1,
                }
            }
            LocalizationPoint {
                sigma,
                quad_error: q_sum / (trials - q_fail).max(1) as f64,
                ellipse_error: e_sum / (trials - e_fail).max(1) as f64,
                trials,
                quad_failures: q_fail,
                ellipse_failures: e_fail,
            }
        })
        .collect()
}
