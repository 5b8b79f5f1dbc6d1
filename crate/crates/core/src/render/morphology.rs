/// A binary image, `true` for black (ink).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryRaster {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Sets every pixel whose centre lies inside the disk.
    pub fn fill_disk(&mut self, cx: f64, cy: f64, r: f64) {
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as usize).min(self.height.saturating_sub(1));
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(self.width.saturating_sub(1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                    self.set(x, y, true);
                }
            }
        }
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Number of 8-connected components of set pixels.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.data.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as isize, (i / self.width) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                            continue;
                        }
                        let j = ny as usize * self.width + nx as usize;
                        if self.data[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }
}

/// Stand-in for an infinite distance that keeps the parabola algebra finite.
const FAR: f64 = 1e20;

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter =
        |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    for q in 1..n {
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *o = (q as f64 - p as f64).powi(2) + f[p];
    }
}

/// Squared Euclidean distance from every pixel to the nearest pixel equal to
/// `target`.
pub(crate) fn squared_distance_to(raster: &BinaryRaster, target: bool) -> Vec<f64> {
    let (w, h) = (raster.width, raster.height);
    let mut grid: Vec<f64> = raster
        .data
        .iter()
        .map(|&b| if b == target { 0.0 } else { FAR })
        .collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        dt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        dt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

fn dilate(raster: &BinaryRaster, radius: f64) -> BinaryRaster {
    let d = squared_distance_to(raster, true);
    BinaryRaster {
        width: raster.width,
        height: raster.height,
        data: d.iter().map(|&v| v <= radius * radius).collect(),
    }
}

fn erode(raster: &BinaryRaster, radius: f64) -> BinaryRaster {
    let d = squared_distance_to(raster, false);
    BinaryRaster {
        width: raster.width,
        height: raster.height,
        data: d.iter().map(|&v| v > radius * radius).collect(),
    }
}

/// `iterations` rounds of dilation followed by erosion with a disk of
/// `radius` pixels. Gaps narrower than the element between black regions
/// close up.
pub fn apply_code_morphology(code: &BinaryRaster, iterations: u32, radius: f64) -> BinaryRaster {
    let mut out = code.clone();
    for _ in 0..iterations {
        out = erode(&dilate(&out, radius), radius);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_transform_matches_brute_force() {
        let mut r = BinaryRaster::new(23, 17);
        for (x, y) in [(3, 4), (20, 2), (11, 15)] {
            r.set(x, y, true);
        }
        let d = squared_distance_to(&r, true);
        for y in 0..17 {
            for x in 0..23 {
                let brute = [(3, 4), (20, 2), (11, 15)]
                    .iter()
                    .map(|&(px, py): &(i64, i64)| ((x as i64 - px).pow(2) + (y as i64 - py).pow(2)) as f64)
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(d[y * 23 + x], brute);
            }
        }
    }

    #[test]
    fn white_area_unchanged() {
        let r = BinaryRaster::new(40, 30);
        assert_eq!(apply_code_morphology(&r, 3, 4.0), r);
    }

    #[test]
    fn tangent_disks_merge() {
        let mut r = BinaryRaster::new(100, 60);
        // Tangent in the continuous plane, split by one pixel column once sampled.
        r.fill_disk(29.5, 30.0, 20.0);
        r.fill_disk(70.5, 30.0, 20.0);
        assert_eq!(r.components(), 2);
        let out = apply_code_morphology(&r, 1, 5.0);
        assert_eq!(out.components(), 1);
        // Closing only adds ink.
        assert!(r.data.iter().zip(&out.data).all(|(a, b)| !a || *b));
    }

    #[test]
    fn closing_converges() {
        let mut r = BinaryRaster::new(120, 120);
        for (x, y) in [(30.0, 30.0), (52.0, 33.0), (40.0, 70.0), (90.0, 90.0)] {
            r.fill_disk(x, y, 11.0);
        }
        let once = apply_code_morphology(&r, 1, 3.0);
        let twice = apply_code_morphology(&once, 1, 3.0);
        let changed = once.data.iter().zip(&twice.data).filter(|(a, b)| a != b).count();
        assert!((changed as f64) < 0.001 * once.data.len() as f64);
    }
}
