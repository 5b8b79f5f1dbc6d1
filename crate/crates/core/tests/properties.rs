//! Property tests for the invariants that tie the modules together.

use nalgebra::{Matrix3, Point2, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use ringmark::bench::{run_localization_sim, run_stability_sweep, StabilityConfig};
use ringmark::codec::{builtin_library, generate_library, Codeword, GenerationMode};
use ringmark::detect::{
    detect_edge_segments, detect_markers, detect_markers_with_stats, extract_quads, read_bits, DetectorConfig,
    EdgeParams, QuadParams,
};
use ringmark::geom::{
    ellipse_discrepancy, fit_ellipse, homography_from_corners, refine_homography, relative_depth, transform_conic,
    unit_square, Conic, Ellipse, Homography, NelderMeadOptions, TransformDirection,
};
use ringmark::pose::{jitter_stats, pose_candidates, CameraIntrinsics, Pose};
use ringmark::render::{render_marker, render_scene, MarkerGeometry, MarkerPlacement, NoiseSpec, Occluder, SceneSpec};

fn quad_strategy() -> impl Strategy<Value = [Point2<f64>; 4]> {
    // A convex quad: jittered corners of a box.
    (
        100.0..400.0f64,
        100.0..300.0f64,
        80.0..200.0f64,
        prop::array::uniform8(-0.25..0.25f64),
    )
        .prop_map(|(cx, cy, s, j)| {
            let base = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
            std::array::from_fn(|i| {
                Point2::new(
                    cx + s * (base[i][0] + j[2 * i]) / 2.0,
                    cy + s * (base[i][1] + j[2 * i + 1]) / 2.0,
                )
            })
        })
}

fn homography_strategy() -> impl Strategy<Value = Homography> {
    quad_strategy().prop_map(|q| homography_from_corners(&unit_square(), &q).unwrap())
}

fn ellipse_strategy() -> impl Strategy<Value = Ellipse> {
    (
        0.3..0.7f64,
        0.3..0.7f64,
        0.05..0.3f64,
        0.3..1.0f64,
        0.0..std::f64::consts::PI,
    )
        .prop_map(|(x, y, a, ratio, angle)| Ellipse {
            center: [x, y],
            semi_major: a,
            semi_minor: a * ratio,
            angle,
        })
}

/// Conics are equal up to scale and sign.
fn same_conic(a: &Conic, b: &Conic, tol: f64) -> bool {
    let (a, b) = (a.normalized(), b.normalized());
    let d = (a.matrix() - b.matrix()).norm().min((a.matrix() + b.matrix()).norm());
    d < tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conic_transport_round_trips(h in homography_strategy(), e in ellipse_strategy()) {
        let c = Conic::from_ellipse(&e);
        let img = transform_conic(&c, &h, TransformDirection::Forward).unwrap();
        let back = transform_conic(&img, &h, TransformDirection::Backward).unwrap();
        prop_assert!(same_conic(&c, &back, 1e-9));
    }

    #[test]
    fn incidence_is_preserved(h in homography_strategy(), e in ellipse_strategy(), t in 0.0..std::f64::consts::TAU) {
        let c = Conic::from_ellipse(&e);
        let img = transform_conic(&c, &h, TransformDirection::Forward).unwrap();
        let p = e.point_at(t);
        let x = h.matrix() * Vector3::new(p.x, p.y, 1.0);
        let x = x / x.norm();
        prop_assert!(img.evaluate(&x).abs() <= 1e-9 * img.matrix().norm());
    }

    #[test]
    fn relative_depth_ignores_similarities(q in quad_strategy(), k in 0.2..5.0f64, a in 0.0..std::f64::consts::TAU) {
        let h = homography_from_corners(&unit_square(), &q).unwrap();
        let (s, c) = a.sin_cos();
        let sim = Matrix3::new(k * c, -k * s, 13.0, k * s, k * c, -7.0, 0.0, 0.0, 1.0);
        let q2 = q.map(|p| {
            let v = sim * Vector3::new(p.x, p.y, 1.0);
            Point2::new(v.x, v.y)
        });
        let h2 = Homography::from_matrix(sim * h.matrix()).unwrap();
        let (d1, d2) = (relative_depth(&q, &h), relative_depth(&q2, &h2));
        prop_assert!(d1 >= 1.0);
        prop_assert!((d1 - d2).abs() <= 1e-9 * d1, "{} {}", d1, d2);
    }

    #[test]
    fn ellipse_fit_is_idempotent(e in ellipse_strategy()) {
        let first = fit_ellipse(&e.sample(60)).unwrap().ellipse().unwrap();
        let second = fit_ellipse(&first.sample(60)).unwrap().ellipse().unwrap();
        prop_assert!(same_conic(&Conic::from_ellipse(&first), &Conic::from_ellipse(&second), 1e-9));
        prop_assert!(same_conic(&Conic::from_ellipse(&e), &Conic::from_ellipse(&first), 1e-9));
    }

    #[test]
    fn refinement_never_increases_discrepancy(h in homography_strategy(), noise in prop::array::uniform8(-0.01..0.01f64)) {
        let circle = Conic::circle(0.5, 0.5, 0.35);
        let image = transform_conic(&circle, &h, TransformDirection::Forward).unwrap();
        let mut m = *h.matrix();
        for (i, n) in noise.iter().enumerate() {
            m[i] *= 1.0 + n;
        }
        let h0 = Homography::from_matrix(m).unwrap();
        let out = refine_homography(&h0, Some(&image), &circle, &NelderMeadOptions::default());
        prop_assert!(out.final_error <= out.initial_error);
        prop_assert!(ellipse_discrepancy(&out.homography, &image, &circle) <= ellipse_discrepancy(&h0, &image, &circle) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decode_recovers_id_and_rotation(
        lib_index in 0usize..7,
        pick in any::<prop::sample::Index>(),
        rotation in 0u32..4,
        flips in prop::collection::vec(0u32..48, 0..12),
    ) {
        let lib = builtin_library(11 + 2 * lib_index as u32).unwrap();
        let id = pick.index(lib.len());
        let budget = lib.max_correctable() as usize;
        let mut mask = 0u64;
        for &b in flips.iter().take(budget) {
            mask |= 1 << b;
        }
        let read = lib.codeword(id).unwrap().rotate(rotation).flip(mask);
        let d = lib.decode(read, lib.max_correctable()).unwrap();
        prop_assert_eq!((d.marker_id, d.rotation), (id, rotation));
    }

    #[test]
    fn small_direct_libraries_are_closed_and_deterministic(len in prop::sample::select(vec![8u32, 12, 16]), hd in 1u32..7) {
        let a = generate_library(len, hd, GenerationMode::Direct).unwrap();
        prop_assert!(a.verify_closure().is_ok());
        prop_assert_eq!(a, generate_library(len, hd, GenerationMode::Direct).unwrap());
    }
}

fn random_pose(rng: &mut impl Rng, max_tilt: f64) -> Pose {
    let axis = Unit::new_normalize(Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        0.0,
    ));
    let r = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..max_tilt).to_radians())
        * Rotation3::from_axis_angle(&Vector3::z_axis(), rng.random_range(-3.0..3.0));
    let t = Vector3::new(
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.1..0.1),
        rng.random_range(0.8..3.0),
    );
    Pose::exact(*r.matrix(), t)
}

#[test]
fn pose_reprojection_matches_the_homography() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let k = CameraIntrinsics::centered(900.0, 1280, 720);
    for _ in 0..300 {
        let truth = random_pose(&mut rng, 70.0);
        let corners = truth.project_corners(&k, 0.15).unwrap();
        let noisy: [Point2<f64>; 4] =
            corners.map(|c| Point2::new(c.x + rng.random_range(-0.5..0.5), c.y + rng.random_range(-0.5..0.5)));
        let h = homography_from_corners(&unit_square(), &noisy).unwrap();
        for p in pose_candidates(&h, &k, 0.15).unwrap() {
            let proj = p.project_corners(&k, 0.15).unwrap();
            let imaged = unit_square().map(|u| h.apply(&u));
            let rms = (proj
                .iter()
                .zip(&imaged)
                .map(|(a, b)| (a - b).norm_squared())
                .sum::<f64>()
                / 4.0)
                .sqrt();
            assert!(
                (rms - p.reprojection_error).abs() < 1e-9,
                "{rms} {}",
                p.reprojection_error
            );
        }
    }
}

#[test]
fn rotation_jitter_ignores_the_global_frame() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let k = CameraIntrinsics::centered(900.0, 1280, 720);
    let poses: Vec<Pose> = (0..50).map(|_| random_pose(&mut rng, 10.0)).collect();
    let turn = *Rotation3::from_euler_angles(0.3, -0.5, 1.1).matrix();
    let turned: Vec<Pose> = poses
        .iter()
        .map(|p| Pose::exact(turn * p.rotation, p.translation))
        .collect();
    let origin = Point2::origin();
    let (a, b) = (
        jitter_stats(&poses, &k, &origin).unwrap(),
        jitter_stats(&turned, &k, &origin).unwrap(),
    );
    assert!((a.rotation_std - b.rotation_std).abs() < 1e-9 * a.rotation_std.max(1.0));
}

#[test]
fn quarter_turned_marker_reads_one_rotation_on() {
    let lib = builtin_library(17).unwrap();
    let g = MarkerGeometry::shared();
    for id in 0..lib.len() {
        let m = render_marker(&lib, g.clone(), id, 160).unwrap();
        let turned = image::imageops::rotate90(&m.image);
        let word = read_bits(&turned, &m.homography, &g).unwrap().word;
        let d = lib.decode(word, 0).unwrap();
        assert_eq!((d.marker_id, d.rotation), (id, 1));
        let plain = lib
            .decode(read_bits(&m.image, &m.homography, &g).unwrap().word, 0)
            .unwrap();
        assert_eq!((plain.marker_id, plain.rotation), (id, 0));
    }
}

#[test]
fn noise_free_scenes_decode_exactly() {
    let lib = builtin_library(15).unwrap();
    let g = MarkerGeometry::shared();
    for (i, angle) in [0.0, 20.0, 40.0, 60.0].into_iter().enumerate() {
        let mut spec = SceneSpec::new(800, 600, 800.0);
        let id = 100 * i + 7;
        spec.markers.push(MarkerPlacement::tilted(
            id,
            0.12,
            0.6,
            angle,
            30.0 * i as f64,
            [0.0, 0.0],
        ));
        let scene = render_scene(&spec, &lib, g.clone()).unwrap();
        let dets = detect_markers(&scene.image, &lib, &g, &DetectorConfig::default());
        assert_eq!(dets.len(), 1, "angle {angle}");
        assert_eq!((dets[0].marker_id, dets[0].decode_distance), (id, 0));
    }
}

#[test]
fn pipeline_stages_only_filter() {
    let lib = builtin_library(13).unwrap();
    let g = MarkerGeometry::shared();
    let mut spec = SceneSpec::new(640, 480, 700.0);
    spec.background = ringmark::render::Background::Texture {
        seed: 3,
        scale: 30.0,
        mean: 140.0,
        contrast: 60.0,
    };
    spec.markers
        .push(MarkerPlacement::tilted(5, 0.1, 0.5, 30.0, 0.0, [-0.08, 0.0]));
    spec.markers
        .push(MarkerPlacement::tilted(9, 0.1, 0.6, 50.0, 45.0, [0.1, 0.02]));
    spec.noise = NoiseSpec::sensor(2.0);
    let scene = render_scene(&spec, &lib, g.clone()).unwrap();
    let run = detect_markers_with_stats(&scene.image, &lib, &g, &DetectorConfig::default());
    assert!(run.quads >= run.validated && run.validated >= run.decoded);
    assert!(run.decoded >= run.detections.len() && run.detections.len() >= run.refined);
    for d in &run.detections {
        if !d.refinement_skipped {
            assert!(d.refined_error <= d.initial_error);
        }
    }
    let segs = detect_edge_segments(&scene.image, &EdgeParams::default());
    let params = QuadParams::default();
    assert_eq!(extract_quads(&segs, &params), extract_quads(&segs, &params));
}

#[test]
fn marker_with_an_occluded_corner_is_detected_and_refined() {
    let lib = builtin_library(19).unwrap();
    let g = MarkerGeometry::shared();
    let mut spec = SceneSpec::new(640, 480, 800.0);
    spec.markers
        .push(MarkerPlacement::tilted(6, 0.1, 0.45, 20.0, 0.0, [0.0, 0.0]));
    let clean = render_scene(&spec, &lib, g.clone()).unwrap();
    let corner = clean.ground_truth[0].corners[2];
    spec.occluders.push(Occluder {
        center: corner,
        radius: 14.0,
        value: 160,
    });
    let scene = render_scene(&spec, &lib, g.clone()).unwrap();
    let dets = detect_markers(&scene.image, &lib, &g, &DetectorConfig::default());
    assert_eq!(dets.len(), 1);
    assert_eq!(dets[0].marker_id, 6);
    assert!(!dets[0].refinement_skipped);
}

#[test]
fn experiments_are_reproducible() {
    assert_eq!(
        run_localization_sim(&[0.01, 0.03], 200, 5),
        run_localization_sim(&[0.01, 0.03], 200, 5)
    );
    let config = StabilityConfig {
        values: vec![10.0, 40.0],
        trials: 6,
        ..StabilityConfig::angle_sweep()
    };
    let strip = |mut rows: Vec<ringmark::bench::StabilityRow>| {
        for r in &mut rows {
            (r.ms_edges, r.ms_lines, r.ms_candidates, r.ms_validation) = (0.0, 0.0, 0.0, 0.0);
            (r.ms_ellipse, r.ms_refinement, r.ms_total) = (0.0, 0.0, 0.0);
        }
        serde_json::to_string(&rows).unwrap()
    };
    let a = strip(run_stability_sweep(&config).unwrap());
    assert_eq!(a, strip(run_stability_sweep(&config).unwrap()));
}

#[test]
fn codeword_rotation_is_a_block_shift() {
    let w = Codeword::new(0xABC_DEF_123_456, 48).unwrap();
    assert_eq!(w.rotate(1).rotate(3), w);
    assert_eq!(w.rotate(2), w.rotate(1).rotate(1));
}
