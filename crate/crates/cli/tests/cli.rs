//! End-to-end runs of the `ringmark` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ringmark(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringmark"))
        .args(args)
        .current_dir(dir)
        .env_remove("RINGMARK_LIBRARY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn ids(report: &Value) -> Vec<u64> {
    report["markers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["id"].as_u64().unwrap())
        .collect()
}

/// Lexicographic greedy code over all rotations, straight from the definition.
fn greedy_code(bits: u32, min_hd: u32) -> Vec<u64> {
    let mask = (1u64 << bits) - 1;
    let q = bits / 4;
    let rot = |w: u64, r: u32| {
        if r == 0 {
            w
        } else {
            ((w << (q * r)) | (w >> (bits - q * r))) & mask
        }
    };
    let mut code: Vec<u64> = Vec::new();
    for w in 0..=mask {
        let self_ok = (1..4).all(|r| (w ^ rot(w, r)).count_ones() >= min_hd);
        let others_ok = code
            .iter()
            .all(|&c| (0..4).all(|r| (w ^ rot(c, r)).count_ones() >= min_hd));
        if self_ok && others_ok {
            code.push(w);
        }
    }
    code
}

fn library_words(text: &str) -> Vec<u64> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("STAGLIB v1 "));
    lines.map(|l| u64::from_str_radix(l.trim(), 16).unwrap()).collect()
}

#[test]
fn direct_generation_matches_the_greedy_definition() {
    let dir = tempfile::tempdir().unwrap();
    for (bits, hd) in [(4, 1), (8, 2), (12, 3), (12, 5)] {
        let o = ringmark(
            &[
                "generate",
                "--bits",
                &bits.to_string(),
                "--min-hd",
                &hd.to_string(),
                "--mode",
                "direct",
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        assert!(text.starts_with(&format!("STAGLIB v1 {bits} {hd}\n")));
        assert_eq!(
            library_words(&text),
            greedy_code(bits, hd),
            "{bits} bits, distance {hd}"
        );
        assert!(stderr(&o).contains("max BER"));
    }
}

#[test]
fn full_length_library_is_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringmark(
        &["generate", "--bits", "48", "--min-hd", "21", "-o", "hd21.staglib"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("hd21.staglib")).unwrap();
    let n = library_words(&text).len();
    // Published size 12; within a factor of two.
    assert!((6..=24).contains(&n), "{n}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["generate", "--bits", "6", "--min-hd", "1"][..],
        &["render", "--side", "10", "-o", "x.png"],
        &["detect", "x.png", "--no-such-flag"],
        &["bench", "no-such-experiment"],
    ] {
        let o = ringmark(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = ringmark(&["render", "--id", "999", "-o", "x.png"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("out of range"));
}

#[test]
fn rendered_marker_is_detected_with_its_id() {
    let dir = tempfile::tempdir().unwrap();
    for (hd, id, file) in [("17", "21", "m.png"), ("11", "1000", "m.pgm")] {
        let o = ringmark(
            &["render", "--min-hd", hd, "--id", id, "--side", "300", "-o", file],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let o = ringmark(&["detect", file, "--min-hd", hd], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let r = report(&o);
        assert_eq!(ids(&r), vec![id.parse::<u64>().unwrap()]);
        assert_eq!(r["markers"][0]["refinement_skipped"], Value::Bool(false));
        assert!(stderr(&o).contains("detector config"));
    }
}

#[test]
fn sheet_decodes_every_marker() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringmark(
        &[
            "render",
            "--min-hd",
            "15",
            "--id",
            "40",
            "--sheet",
            "7",
            "--side",
            "160",
            "-o",
            "sheet.png",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = ringmark(&["detect", "sheet.png", "--min-hd", "15"], dir.path());
    let mut found = ids(&report(&o));
    found.sort();
    assert_eq!(found, (40..47).collect::<Vec<u64>>());
}

#[test]
fn blank_image_reports_nothing_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blank = image::GrayImage::from_pixel(160, 120, image::Luma([128]));
    blank.save(dir.path().join("blank.png")).unwrap();
    let o = ringmark(&["detect", "blank.png"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(ids(&report(&o)).is_empty());
    let o = ringmark(&["detect", "missing.png"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn environment_overrides_the_default_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringmark(
        &["generate", "--bits", "48", "--min-hd", "23", "-o", "hd23.staglib"],
        dir.path(),
    );
    assert!(o.status.success());
    let o = ringmark(
        &["render", "--library", "hd23.staglib", "--id", "5", "-o", "m.png"],
        dir.path(),
    );
    assert!(o.status.success());
    // The default library does not hold this marker under id 5.
    let plain = ringmark(&["detect", "m.png"], dir.path());
    assert_ne!(ids(&report(&plain)), vec![5]);
    let o = Command::new(env!("CARGO_BIN_EXE_ringmark"))
        .args(["detect", "m.png"])
        .current_dir(dir.path())
        .env("RINGMARK_LIBRARY", "hd23.staglib")
        .output()
        .unwrap();
    assert_eq!(ids(&report(&o)), vec![5]);
    assert!(stderr(&o).contains("RINGMARK_LIBRARY"));
}

#[test]
fn scene_sidecar_and_text_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringmark(
        &["scene", "--id", "9", "--angle", "55", "--spin", "20", "-o", "s.pgm"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let sidecar = std::fs::read_to_string(dir.path().join("s.gt.txt")).unwrap();
    let marker = sidecar.lines().find(|l| l.starts_with("marker ")).unwrap();
    // id, side, 9 + 12 + 8 + 5 numbers.
    assert_eq!(marker.split_whitespace().count(), 1 + 2 + 34);
    let o = ringmark(
        &[
            "detect",
            "s.pgm",
            "--truth",
            "s.gt.txt",
            "--format",
            "text",
            "--overlay",
            "ov.png",
            "--marker-side",
            "0.15",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("marker 9 rotation 0"));
    assert!(stderr(&o).contains("truth marker 9: found"));
    let overlay = image::open(dir.path().join("ov.png")).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (1280, 720));
    // Pose uses the sidecar camera and the metric side: the marker is 1 m away.
    let o = ringmark(
        &["detect", "s.pgm", "--truth", "s.gt.txt", "--marker-side", "0.15"],
        dir.path(),
    );
    let z = report(&o)["markers"][0]["pose"]["translation"][2].as_f64().unwrap();
    assert!((z - 1.0).abs() < 0.01, "{z}");
}

fn centre_spread(reports: &[Value], key: &str) -> f64 {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| {
            let h: Vec<f64> = r["markers"][0][key]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            let w = h[6] * 0.5 + h[7] * 0.5 + h[8];
            (
                (h[0] * 0.5 + h[1] * 0.5 + h[2]) / w,
                (h[3] * 0.5 + h[4] * 0.5 + h[5]) / w,
            )
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    (pts.iter().map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2)).sum::<f64>() / n).sqrt()
}

#[test]
fn refinement_steadies_the_marker_centre() {
    let dir = tempfile::tempdir().unwrap();
    let (mut refined, mut raw) = (Vec::new(), Vec::new());
    for seed in 0..30 {
        let file = format!("f{seed}.png");
        let o = ringmark(
            &[
                "scene",
                "--id",
                "3",
                "--angle",
                "30",
                "--noise",
                "2",
                "--seed",
                &seed.to_string(),
                "-o",
                &file,
            ],
            dir.path(),
        );
        assert!(o.status.success());
        let a = ringmark(&["detect", &file], dir.path());
        let b = ringmark(&["detect", &file, "--no-refine"], dir.path());
        let (a, b) = (report(&a), report(&b));
        assert_eq!(b["markers"][0]["refinement_skipped"], Value::Bool(true));
        refined.push(a);
        raw.push(b);
    }
    let (post, pre) = (centre_spread(&refined, "h_refined"), centre_spread(&raw, "h_refined"));
    assert!(post < pre, "refined {post} unrefined {pre}");
}

#[test]
fn benchmarks_write_tables_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &[
            "bench",
            "localization-sim",
            "--trials",
            "300",
            "--sigmas",
            "0.01,0.03",
            "--out",
            "r",
        ],
        &[
            "bench",
            "stability",
            "--sweep",
            "distance",
            "--values",
            "0.8,1.6",
            "--trials",
            "3",
            "--out",
            "r",
        ],
        &[
            "bench",
            "false-positives",
            "--count",
            "3",
            "--libraries",
            "11,23",
            "--out",
            "r",
        ],
        &["bench", "timing", "--runs", "2", "--out", "r"],
    ];
    for args in runs {
        let o = ringmark(args, dir.path());
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        for line in stdout(&o).lines() {
            assert!(dir.path().join(line).exists(), "{line}");
        }
        assert!(stderr(&o).contains(" config {"), "{args:?}");
    }
    let r = dir.path().join("r");
    let csv = std::fs::read_to_string(r.join("localization.csv")).unwrap();
    assert!(csv.starts_with("sigma,quad_error,ellipse_error"));
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(
        std::fs::read_to_string(r.join("false_positives.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    assert_eq!(
        std::fs::read_to_string(r.join("stability_distance.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    let timing = std::fs::read_to_string(r.join("timing.csv")).unwrap();
    assert!(timing.lines().any(|l| l.starts_with("edges,")));
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(r.join("false_positives.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["libraries"], serde_json::json!([11, 23]));
    assert_eq!(manifest["scaling"].as_array().unwrap().len(), 1);

    // Same inputs and seed, same table.
    let o = ringmark(
        &[
            "bench",
            "localization-sim",
            "--trials",
            "300",
            "--sigmas",
            "0.01,0.03",
            "--out",
            "again",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("again/localization.csv")).unwrap(),
        csv
    );
}

#[test]
fn corpus_images_can_be_scanned_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringmark(
        &[
            "bench", "corpus", "--count", "2", "--width", "200", "--height", "150", "--out", "c",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = ringmark(
        &[
            "bench",
            "false-positives",
            "--corpus",
            "c",
            "--libraries",
            "19",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("r/false_positives.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let images = headers.iter().position(|h| h == "images").unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(&row[images], "2");
}
