//! Separable Gaussian smoothing on `f32` rasters with clamped borders.

fn kernel(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
        .collect();
    let total: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// One 1-D pass along rows (`stride == 1`) or columns (`stride == width`).
fn pass(src: &[f32], dst: &mut [f32], width: usize, height: usize, k: &[f32], horizontal: bool) {
    let r = (k.len() / 2) as isize;
    let (n, lines, step) = if horizontal {
        (width, height, 1)
    } else {
        (height, width, width)
    };
    let base = |line: usize| if horizontal { line * width } else { line };
    let mut scratch = vec![0f32; n + 2 * r as usize];
    for line in 0..lines {
        let b = base(line);
        for (i, s) in scratch.iter_mut().enumerate() {
            let j = (i as isize - r).clamp(0, n as isize - 1) as usize;
            *s = src[b + j * step];
        }
        for i in 0..n {
            let window = &scratch[i..i + k.len()];
            dst[b + i * step] = window.iter().zip(k).map(|(a, w)| a * w).sum();
        }
    }
}

pub(crate) fn gaussian_blur(buf: &[f32], width: usize, height: usize, sigma: f64) -> Vec<f32> {
    if !(sigma > 0.0) || width == 0 || height == 0 {
        return buf.to_vec();
    }
    let k = kernel(sigma);
    let mut tmp = vec![0f32; buf.len()];
    let mut out = vec![0f32; buf.len()];
    pass(buf, &mut tmp, width, height, &k, true);
    pass(&tmp, &mut out, width, height, &k, false);
    out
}
