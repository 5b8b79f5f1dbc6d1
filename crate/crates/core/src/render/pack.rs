use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::quarter_turn;
use crate::codec::ROTATIONS;
use crate::error::{Error, Result};

/// Equal disks in canonical bit order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskLayout {
    pub centers: Vec<[f64; 2]>,
    pub radius: f64,
}

impl DiskLayout {
    pub fn translated(mut self, dx: f64, dy: f64) -> Self {
        for c in &mut self.centers {
            c[0] += dx;
            c[1] += dy;
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackOptions {
    pub proposals: usize,
    /// Temperature factor applied after every sweep over the free disks.
    pub cooling: f64,
    /// Starting temperature relative to the region radius.
    pub initial_temperature: f64,
}

impl Default for PackOptions {
    fn default() -> Self {
        Self {
            proposals: 100_000,
            cooling: 0.995,
            initial_temperature: 0.01,
        }
    }
}

const ORIGIN: [f64; 2] = [0.0, 0.0];

fn turn(p: [f64; 2], quarters: usize) -> [f64; 2] {
    (0..quarters).fold(p, |q, _| quarter_turn(&q, &ORIGIN))
}

/// Per-disk clearance: the largest radius disk `k` could take given the
/// region boundary and every other disk or rotated copy.
fn clearances(free: &[[f64; 2]], region: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(free.iter().map(|p| region - p[0].hypot(p[1])));
    for (i, p) in free.iter().enumerate() {
        for (j, q) in free.iter().enumerate().skip(i) {
            for d in 0..ROTATIONS as usize {
                if i == j && d == 0 {
                    continue;
                }
                let q = turn(*q, d);
                let half = 0.5 * (p[0] - q[0]).hypot(p[1] - q[1]);
                out[i] = out[i].min(half);
                out[j] = out[j].min(half);
            }
        }
    }
}

/// Largest common radius for the free disks and their rotated copies.
#[cfg(test)]
fn common_radius(free: &[[f64; 2]], region: f64) -> f64 {
    let mut c = Vec::with_capacity(free.len());
    clearances(free, region, &mut c);
    c.into_iter().fold(f64::INFINITY, f64::min)
}

/// Weight of the mean clearance in the annealing energy. The common radius
/// alone only responds to the bottleneck disk, so moves of the others would
/// be blind.
const SPREAD_WEIGHT: f64 = 0.1;

/// Returns `(common radius, energy)`.
fn score(free: &[[f64; 2]], region: f64, scratch: &mut Vec<f64>) -> (f64, f64) {
    clearances(free, region, scratch);
    let min = scratch.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = scratch.iter().sum::<f64>() / scratch.len() as f64;
    (min, min + SPREAD_WEIGHT * mean)
}

/// Starting layout on concentric rings; every disk is distinct from every
/// rotated copy, so the common radius is positive.
fn ring_layout(free: usize, region: f64) -> Vec<[f64; 2]> {
    let mut sizes = Vec::new();
    let mut left = free;
    let mut next = 1;
    while left > 0 {
        let take = next.min(left);
        sizes.push(take);
        left -= take;
        next += 1;
    }
    let rings = sizes.len() as f64;
    let mut out = Vec::with_capacity(free);
    for (j, &n) in sizes.iter().enumerate() {
        let rho = region * (j as f64 + 1.0) / (rings + 1.0);
        for i in 0..n {
            let a = FRAC_PI_2 * (i as f64 + 0.5) / n as f64;
            out.push([rho * a.cos(), rho * a.sin()]);
        }
    }
    out
}

/// Rotate onto the representative with angle in `[0, pi/2)`.
fn representative(p: [f64; 2]) -> [f64; 2] {
    let mut q = p;
    for _ in 0..ROTATIONS {
        let a = q[1].atan2(q[0]);
        if (0.0..FRAC_PI_2).contains(&a) {
            return q;
        }
        q = quarter_turn(&q, &ORIGIN);
    }
    q
}

/// Packs `count` equal disks into a circle of radius `region_radius` centred
/// at the origin, maximising their common radius by simulated annealing over
/// `count / 4` free disks replicated by quarter turns.
///
/// Index `q * count / 4 + k` holds the `k`-th free disk turned `q` times;
/// free disks are ordered by ring (inner first) and then by angle.
pub fn pack_disks(count: usize, region_radius: f64, seed: u64, options: &PackOptions) -> Result<DiskLayout> {
    if count == 0 || !count.is_multiple_of(ROTATIONS as usize) {
        return Err(Error::invalid("disk count must be a positive multiple of 4"));
    }
    if !(region_radius > 0.0) {
        return Err(Error::invalid("region radius must be positive"));
    }
    let m = count / ROTATIONS as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ring_layout(m, region_radius);
    let mut scratch = Vec::with_capacity(m);
    let (mut radius, mut energy) = score(&state, region_radius, &mut scratch);
    let mut best = (state.clone(), radius);
    // Proposal scale follows the current radius; acceptance temperature is
    // in energy units and decays geometrically.
    let mut temperature = options.initial_temperature * region_radius;
    let mut step_scale = 1.0;

    for step in 0..options.proposals {
        let k = rng.random_range(0..m);
        let old = state[k];
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let sigma = step_scale * radius.max(1e-3 * region_radius);
        state[k] = [old[0] + sigma * dx, old[1] + sigma * dy];
        let (r, e) = score(&state, region_radius, &mut scratch);
        let accept = r > 0.0 && (e >= energy || rng.random::<f64>() < ((e - energy) / temperature).exp());
        if accept {
            (radius, energy) = (r, e);
            if radius > best.1 {
                best = (state.clone(), radius);
            }
        } else {
            state[k] = old;
        }
        if (step + 1) % m == 0 {
            temperature *= options.cooling;
            step_scale = (step_scale * options.cooling.sqrt()).max(0.01);
        }
    }

    let (free, radius) = best;
    let mut reps: Vec<[f64; 2]> = free.into_iter().map(representative).collect();
    reps.sort_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])));
    let mut ring = 0usize;
    let mut keyed: Vec<(usize, f64, [f64; 2])> = Vec::with_capacity(m);
    for (i, p) in reps.iter().enumerate() {
        if i > 0 && p[0].hypot(p[1]) - reps[i - 1][0].hypot(reps[i - 1][1]) > radius {
            ring += 1;
        }
        keyed.push((ring, p[1].atan2(p[0]), *p));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut centers = Vec::with_capacity(count);
    for q in 0..ROTATIONS as usize {
        centers.extend(keyed.iter().map(|(_, _, p)| turn(*p, q)));
    }
    Ok(DiskLayout { centers, radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_disks_beat_grid_oracle() {
        // Oracle: best symmetric placement of one free disk on a fine grid.
        let mut oracle = 0.0f64;
        for i in 0..=400 {
            for j in 0..=400 {
                let p = [i as f64 / 400.0, j as f64 / 400.0];
                oracle = oracle.max(common_radius(&[p], 1.0));
            }
        }
        let layout = pack_disks(4, 1.0, 7, &PackOptions::default()).unwrap();
        assert!(layout.radius >= 0.29);
        assert!(layout.radius >= oracle - 1e-3, "{} vs {oracle}", layout.radius);
        let c = layout.centers;
        for q in 0..4 {
            let r = quarter_turn(&c[q], &ORIGIN);
            let n = c[(q + 1) % 4];
            assert!((r[0] - n[0]).abs() < 1e-12 && (r[1] - n[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let opts = PackOptions {
            proposals: 5_000,
            ..Default::default()
        };
        let a = pack_disks(48, 0.3, 3, &opts).unwrap();
        let b = pack_disks(48, 0.3, 3, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_layout_is_feasible() {
        let layout = pack_disks(48, 0.3, 1, &PackOptions::default()).unwrap();
        assert_eq!(layout.centers.len(), 48);
        for (i, p) in layout.centers.iter().enumerate() {
            assert!(p[0].hypot(p[1]) + layout.radius <= 0.3 + 1e-12);
            for q in &layout.centers[i + 1..] {
                assert!((p[0] - q[0]).hypot(p[1] - q[1]) >= 2.0 * layout.radius - 1e-12);
            }
        }
        assert!(layout.radius > 0.03, "{}", layout.radius);
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(pack_disks(6, 1.0, 0, &PackOptions::default()).is_err());
        assert!(pack_disks(0, 1.0, 0, &PackOptions::default()).is_err());
    }
}
