use nalgebra::Matrix3;

use super::nelder_mead::{minimize, NelderMeadOptions};
use super::{transform_conic, Conic, Homography, TransformDirection};

/// A marker-plane circle and the image ellipse pulled back to the marker plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinementMetricInputs {
    pub circle: Conic,
    pub backprojected: Conic,
}

/// Distance between a circle and an ellipse in the 4-vector of centre
/// coordinates and semi-axes:
/// `sqrt((ex - cx)^2 + (ey - cy)^2 + (a - r)^2 + (b - r)^2)`.
///
/// Orientation does not enter. Infinity if either conic is not an ellipse.
pub fn circle_ellipse_discrepancy(inputs: &RefinementMetricInputs) -> f64 {
    let (Some(c), Some(e)) = (inputs.circle.ellipse(), inputs.backprojected.ellipse()) else {
        return f64::INFINITY;
    };
    let r = 0.5 * (c.semi_major + c.semi_minor);
    ((e.center[0] - c.center[0]).powi(2)
        + (e.center[1] - c.center[1]).powi(2)
        + (e.semi_major - r).powi(2)
        + (e.semi_minor - r).powi(2))
    .sqrt()
}

/// Discrepancy between `circle` (marker plane) and the image ellipse
/// `detected` pulled back through `h`.
pub fn ellipse_discrepancy(h: &Homography, detected: &Conic, circle: &Conic) -> f64 {
    match transform_conic(detected, h, TransformDirection::Backward) {
        Ok(backprojected) => circle_ellipse_discrepancy(&RefinementMetricInputs {
            circle: *circle,
            backprojected,
        }),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinementOutcome {
    pub homography: Homography,
    /// No usable ellipse: `homography` is the input unchanged.
    pub skipped: bool,
    pub initial_error: f64,
    pub final_error: f64,
    pub iterations: usize,
}

/// Adjusts the eight free entries of `h0` (with `h33 = 1`) so that the image
/// ellipse maps back onto the marker circle. Never returns a homography with
/// a larger discrepancy than `h0`.
pub fn refine_homography(
    h0: &Homography,
    detected: Option<&Conic>,
    circle: &Conic,
    options: &NelderMeadOptions,
) -> RefinementOutcome {
    let passthrough = |initial_error: f64, skipped: bool| RefinementOutcome {
        homography: *h0,
        skipped,
        initial_error,
        final_error: initial_error,
        iterations: 0,
    };
    let Some(detected) = detected else {
        return passthrough(f64::INFINITY, true);
    };
    let initial_error = ellipse_discrepancy(h0, detected, circle);
    if !initial_error.is_finite() {
        return passthrough(initial_error, true);
    }
    let Some(m0) = h0.matrix_unit_h33() else {
        return passthrough(initial_error, false);
    };
    if initial_error <= options.ftol {
        return passthrough(initial_error, false);
    }

    // Column-major entries; the ninth is h33 = 1.
    let x0: Vec<f64> = m0.iter().take(8).copied().collect();
    let steps: Vec<f64> = x0.iter().map(|p| (1e-3 * p.abs()).max(1e-4)).collect();
    let build =
        |x: &[f64]| Homography::from_matrix(Matrix3::from_iterator(x.iter().copied().chain(std::iter::once(1.0))));
    let result = minimize(
        |x| match build(x) {
            Ok(h) => ellipse_discrepancy(&h, detected, circle),
            Err(_) => f64::INFINITY,
        },
        &x0,
        &steps,
        options,
    );
    match build(&result.x) {
        Ok(h) if result.value < initial_error => RefinementOutcome {
            homography: h,
            skipped: false,
            initial_error,
            final_error: result.value,
            iterations: result.iterations,
        },
        _ => RefinementOutcome {
            iterations: result.iterations,
            ..passthrough(initial_error, false)
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{homography_from_corners, unit_square};
    use approx::assert_relative_eq;
    use nalgebra::Point2;

    fn metric(circle: Conic, e: Conic) -> f64 {
        circle_ellipse_discrepancy(&RefinementMetricInputs {
            circle,
            backprojected: e,
        })
    }

    #[test]
    fn discrepancy_examples() {
        let c = Conic::circle(0.0, 0.0, 1.0);
        assert_eq!(metric(c, c), 0.0);
        assert_relative_eq!(metric(c, Conic::circle(0.3, 0.4, 1.0)), 0.5, epsilon = 1e-12);
        let e = Conic::from_ellipse(&crate::geom::Ellipse {
            center: [0.1, 0.0],
            semi_major: 1.2,
            semi_minor: 0.9,
            angle: 0.0,
        });
        assert_relative_eq!(metric(c, e), 0.06f64.sqrt(), epsilon = 1e-12);
        let hyperbola = Conic::from_coefficients(1.0, 0.0, -1.0, 0.0, 0.0, -1.0);
        assert_eq!(metric(c, hyperbola), f64::INFINITY);
    }

    fn scene() -> (Homography, Conic, Conic) {
        let quad = [
            Point2::new(210.0, 140.0),
            Point2::new(452.0, 171.0),
            Point2::new(431.0, 398.0),
            Point2::new(188.0, 377.0),
        ];
        let h = homography_from_corners(&unit_square(), &quad).unwrap();
        let circle = Conic::circle(0.5, 0.5, 0.35);
        let image = transform_conic(&circle, &h, TransformDirection::Forward).unwrap();
        (h, circle, image)
    }

    #[test]
    fn exact_start_is_kept() {
        let (h, circle, image) = scene();
        let out = refine_homography(&h, Some(&image), &circle, &NelderMeadOptions::default());
        assert!(!out.skipped);
        assert_eq!(out.iterations, 0);
        assert!(out.final_error < 1e-9);
        assert_eq!(out.homography, h);
    }

    #[test]
    fn perturbed_start_improves_tenfold() {
        use rand::{Rng, SeedableRng};
        let (h, circle, image) = scene();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = h.matrix().map(|v| v * (1.0 + 0.01 * rng.random_range(-1.0..1.0)));
            let h0 = Homography::from_matrix(m).unwrap();
            let out = refine_homography(&h0, Some(&image), &circle, &NelderMeadOptions::default());
            assert!(out.final_error < 0.1 * out.initial_error, "{out:?}");
            assert!(out.final_error <= ellipse_discrepancy(&h0, &image, &circle));
        }
    }

    #[test]
    fn missing_ellipse_skips() {
        let (h, circle, _) = scene();
        let out = refine_homography(&h, None, &circle, &NelderMeadOptions::default());
        assert!(out.skipped);
        assert_eq!(out.homography, h);
    }
}
