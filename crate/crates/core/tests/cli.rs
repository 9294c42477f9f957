use std::fs;
use std::path::Path;
use std::process::Command;

use fisher_ot::cli::{run, EXIT_BAD_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};
use fisher_ot::io::{normalize_with_floor, read_pgm, write_frames, FRAME_MAXVAL};
use fisher_ot::recipes;
use tempfile::tempdir;

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("fisher-ot").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_column(path: &Path, values: &[f64]) {
    fs::write(path, values.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
}

/// Unfloored Example-1 bumps on 40 points over [0, 2].
fn gaussian_pair(dir: &Path) -> (String, String) {
    let bump = |c: f64| (0..40).map(|i| (-(2.0 * i as f64 / 39.0 - c).powi(2) / 0.01).exp()).collect::<Vec<_>>();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    write_column(&a, &bump(0.4));
    write_column(&b, &bump(1.6));
    (a.display().to_string(), b.display().to_string())
}

#[test]
fn oracle_on_identical_inputs_is_zero() {
    let dir = tempdir().unwrap();
    let (a, _) = gaussian_pair(dir.path());
    let (code, out, _) = call(&["oracle-1d", "--input0", &a, "--input1", &a]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "0");
}

#[test]
fn distance_matches_oracle() {
    let dir = tempdir().unwrap();
    let (a, b) = gaussian_pair(dir.path());
    let common = ["--input0", &a, "--input1", &b, "--domain", "0,2"];
    let (code, out, _) = call(&[&["distance", "--time-steps", "50"], &common[..]].concat());
    assert_eq!(code, EXIT_OK);
    let estimate: f64 = out.trim().parse().unwrap();
    let (code, out, _) = call(&[&["oracle-1d"], &common[..]].concat());
    assert_eq!(code, EXIT_OK);
    let exact: f64 = out.trim().parse().unwrap();
    assert!((estimate - exact).abs() / exact < 0.1, "{estimate} vs {exact}");
}

#[test]
fn solve_emits_frames_and_report() {
    let dir = tempdir().unwrap();
    let (a, b) = gaussian_pair(dir.path());
    let out_dir = dir.path().join("frames");
    let report = dir.path().join("report.json");
    let (code, out, _) = call(&[
        "solve", "--input0", &a, "--input1", &b, "--domain", "0,2", "--time-steps", "2",
        "--out-dir", out_dir.to_str().unwrap(), "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("termination: converged"));
    let mut names: Vec<String> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["frame_0000.csv", "frame_0001.csv", "frame_0002.csv", "frame_0003.csv", "trace.csv"]);

    // frame 0 is the normalized input, bit for bit
    let raw: Vec<f64> = fs::read_to_string(&a).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    let frame0: Vec<f64> = fs::read_to_string(out_dir.join("frame_0000.csv")).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(frame0, normalize_with_floor(&raw, 0.01).unwrap());

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["termination"], "converged");
    assert_eq!(json["config"]["time_steps"], 2);
    assert_eq!(json["config"]["beta2"], 1e-6);
    assert_eq!(json["config"]["solver"]["step_size"], 0.3);
    assert!(json["final_feasibility"].as_f64().unwrap() <= 1e-8);
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective\n0,"));
}

#[test]
fn repeated_solves_are_identical() {
    let dir = tempdir().unwrap();
    let (a, b) = gaussian_pair(dir.path());
    let solve = |tag: &str| {
        let out_dir = dir.path().join(tag);
        let report = dir.path().join(format!("{tag}.json"));
        let (code, _, _) = call(&[
            "solve", "--input0", &a, "--input1", &b, "--domain", "0,2", "--time-steps", "8",
            "--out-dir", out_dir.to_str().unwrap(), "--report", report.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
        let map = json.as_object_mut().unwrap();
        map.remove("wall_time_seconds");
        map.remove("trace_file");
        let frames: Vec<Vec<u8>> = (0..10).map(|l| fs::read(out_dir.join(format!("frame_{l:04}.csv"))).unwrap()).collect();
        (json, frames, fs::read(out_dir.join("trace.csv")).unwrap())
    };
    assert_eq!(solve("first"), solve("second"));
}

#[test]
fn pgm_frames_round_trip_within_quantization() {
    let dir = tempdir().unwrap();
    let exp = recipes::gaussian_2d(6, 3).unwrap();
    let result = fisher_ot::newton_solve(&exp.problem().unwrap(), &fisher_ot::SolverConfig::default()).unwrap();
    let frames = write_frames(&result, &exp.lattice, dir.path()).unwrap();
    assert_eq!(frames.frames.len(), 5);
    let scale = frames.intensity_scale.unwrap();
    let bound = scale / (2.0 * FRAME_MAXVAL as f64) * (1.0 + 1e-12);
    for (path, level) in frames.frames.iter().zip(result.density.levels()) {
        let back = read_pgm(path).unwrap().values;
        for (v, p) in back.iter().zip(level) {
            assert!((v * scale - p).abs() <= bound, "{} vs {p}", v * scale);
        }
    }
}

#[test]
fn solve_reads_pgm_inputs() {
    let dir = tempdir().unwrap();
    let (four, one) = recipes::digit_rasters();
    // downsample to 7 x 7 to keep the solve small
    let shrink = |img: &[u8]| -> Vec<u8> {
        (0..49).map(|k| {
            let (r, c) = (k / 7, k % 7);
            let sum: u32 = (0..4).flat_map(|dr| (0..4).map(move |dc| (dr, dc))).map(|(dr, dc)| img[(4 * r + dr) * 28 + 4 * c + dc] as u32).sum();
            (sum / 16) as u8
        }).collect()
    };
    let (a, b) = (dir.path().join("four.pgm"), dir.path().join("one.pgm"));
    fs::write(&a, recipes::encode_pgm(&shrink(&four), 7)).unwrap();
    fs::write(&b, recipes::encode_pgm(&shrink(&one), 7)).unwrap();
    let out_dir = dir.path().join("frames");
    let (code, out, err) = call(&[
        "solve", "--input0", a.to_str().unwrap(), "--input1", b.to_str().unwrap(), "--time-steps", "4",
        "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("frames: 6"));
    assert!(out_dir.join("frame_0005.pgm").exists());
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let (a, b) = gaussian_pair(dir.path());

    // usage errors
    assert_eq!(call(&["solve", "--input0", &a]).0, EXIT_BAD_INPUT);
    assert_eq!(call(&["frobnicate"]).0, EXIT_BAD_INPUT);
    assert_eq!(call(&["solve", "--input0", &a, "--input1", &b, "--alpha", "x"]).0, EXIT_BAD_INPUT);

    // bad inputs
    let neg = dir.path().join("neg.csv");
    fs::write(&neg, "1\n-1\n1\n").unwrap();
    let (code, _, err) = call(&["solve", "--input0", &neg.display().to_string(), "--input1", &neg.display().to_string()]);
    assert_eq!(code, EXIT_BAD_INPUT);
    assert!(err.contains("negative"), "{err}");
    let zeros = dir.path().join("zeros.csv");
    fs::write(&zeros, "0\n0\n0\n").unwrap();
    let z = zeros.display().to_string();
    assert_eq!(call(&["oracle-1d", "--input0", &z, "--input1", &z, "--floor", "0"]).0, EXIT_BAD_INPUT);
    assert_eq!(call(&["oracle-1d", "--input0", &z, "--input1", &z]).0, EXIT_OK);
    let short = dir.path().join("short.csv");
    fs::write(&short, "1\n2\n").unwrap();
    assert_eq!(call(&["solve", "--input0", &a, "--input1", &short.display().to_string()]).0, EXIT_BAD_INPUT);
    assert_eq!(call(&["solve", "--input0", &a, "--input1", &b, "--alpha", "0"]).0, EXIT_BAD_INPUT);

    // iteration budget exhausted
    let (code, out, _) = call(&["solve", "--input0", &a, "--input1", &b, "--max-iter", "2"]);
    assert_eq!(code, EXIT_NOT_CONVERGED);
    assert!(out.contains("max-iterations"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fisher-ot");
    let dir = tempdir().unwrap();
    let (a, _) = gaussian_pair(dir.path());
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let out = status(&["oracle-1d", "--input0", &a, "--input1", &a]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0");
    assert_eq!(status(&["--bogus"]).status.code(), Some(2));
    assert_eq!(status(&["oracle-1d", "--input0", "/missing.csv", "--input1", &a]).status.code(), Some(2));
    let out = status(&["verify", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 6);
}
