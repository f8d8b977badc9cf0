//! End-to-end runs of the `hemtkit` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use hemtkit::bandsolver::{solve_self_consistent, StackProblem};
use hemtkit::cli::summary_path;
use hemtkit::extraction::pipeline::{
    cv_report, device_report, dibl_report, load_device_dir, mobility_report, output_report,
    transfer_report, PipelineOptions, Region,
};
use hemtkit::measurement::{ingest_sweep_file, Metadata};
use hemtkit::synth::{synthesize, write_fixture, CompactModelParams, SweepPlan};
use tempfile::TempDir;

fn hemtkit(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_hemtkit"))
        .args(args)
        .output()
        .expect("binary runs");
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Reference-device fixture written by the CLI.
fn fixture(root: &Path) -> PathBuf {
    let dir = root.join("reference");
    assert_eq!(hemtkit(&["synth", "--out", s(&dir), "--device-id", "reference"]), 0);
    dir
}

fn sweep(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.meta.json")))
}

fn load(dir: &Path, stem: &str) -> (Metadata, hemtkit::measurement::SweepFamily) {
    let (csv, meta) = sweep(dir, stem);
    let meta = Metadata::from_path(&meta).unwrap();
    let fam = ingest_sweep_file(&csv, &meta).unwrap();
    (meta, fam)
}

/// Runs `args` twice with `{out}` replaced by two different paths and
/// returns both outputs.
fn twice(tmp: &Path, name: &str, args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let mut bodies = Vec::new();
    let mut code = None;
    for run in 0..2 {
        let out = tmp.join(format!("{name}.{run}.json"));
        let a: Vec<&str> = args.iter().map(|&x| if x == "{out}" { s(&out) } else { x }).collect();
        let c = hemtkit(&a);
        assert!(code.is_none_or(|k| k == c));
        code = Some(c);
        bodies.push(read(&out));
    }
    let b = bodies.pop().unwrap();
    (code.unwrap(), bodies.pop().unwrap(), b)
}

#[test]
fn synth_is_reproducible_and_matches_library() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let lib = tmp.path().join("lib");
    for d in [&a, &b] {
        assert_eq!(hemtkit(&["synth", "--out", s(d), "--noise", "0.01", "--seed", "3"]), 0);
    }
    let mut p = CompactModelParams::reference_device();
    p.noise_amplitude = 0.01;
    p.seed = 3;
    write_fixture(&synthesize(&p, &SweepPlan::reference()).unwrap(), &lib, "synthetic").unwrap();
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for n in names {
        let body = read(&a.join(&n));
        assert_eq!(body, read(&b.join(&n)), "{n:?}");
        assert_eq!(body, read(&lib.join(&n)), "{n:?}");
    }
}

#[test]
fn extraction_commands_are_deterministic_and_thin() {
    let tmp = TempDir::new().unwrap();
    let dir = fixture(tmp.path());
    let t = tmp.path();
    let opts = PipelineOptions::default();

    let (lin_csv, lin_meta) = sweep(&dir, "transfer_linear");
    let (sat_csv, sat_meta) = sweep(&dir, "transfer_saturation");
    let (out_csv, out_meta) = sweep(&dir, "output");
    let (cv_csv, cv_meta) = sweep(&dir, "cv");
    let (meta, lin) = load(&dir, "transfer_linear");
    let (_, sat) = load(&dir, "transfer_saturation");
    let (_, out) = load(&dir, "output");
    let (_, cv) = load(&dir, "cv");
    let g = meta.geometry().unwrap();
    let id = meta.device_id.as_str();

    let cases: Vec<(&str, Vec<&str>, String)> = vec![
        (
            "transfer",
            vec!["extract-transfer", "--in", s(&lin_csv), "--meta", s(&lin_meta), "--out", "{out}"],
            transfer_report(&lin, Region::Linear, &opts, id).unwrap().to_json(),
        ),
        (
            "saturation",
            vec![
                "extract-transfer", "--in", s(&sat_csv), "--meta", s(&sat_meta), "--region",
                "saturation", "--out", "{out}",
            ],
            transfer_report(&sat, Region::Saturation, &opts, id).unwrap().to_json(),
        ),
        (
            "output",
            vec!["extract-output", "--in", s(&out_csv), "--meta", s(&out_meta), "--out", "{out}"],
            output_report(&out, &g, &opts, id).unwrap().to_json(),
        ),
        (
            "cv",
            vec!["extract-cv", "--in", s(&cv_csv), "--meta", s(&cv_meta), "--out", "{out}"],
            cv_report(&cv, &g, &opts, id).unwrap().to_json(),
        ),
        (
            "mobility",
            vec![
                "mobility", "--in", s(&lin_csv), "--meta", s(&lin_meta), "--cv", s(&cv_csv),
                "--cv-meta", s(&cv_meta), "--out", "{out}",
            ],
            mobility_report(&lin, &cv, &g, id).unwrap().to_json(),
        ),
        (
            "dibl",
            vec![
                "dibl", "--in", s(&sat_csv), "--meta", s(&sat_meta), "--low", "0.1", "--high",
                "1.0", "--out", "{out}",
            ],
            dibl_report(&sat, 0.1, 1.0, &opts, id).unwrap().to_json(),
        ),
        (
            "report",
            vec!["report", "--in", s(&dir), "--out", "{out}"],
            device_report(&load_device_dir(&dir).unwrap(), &opts).unwrap().to_json(),
        ),
    ];
    for (name, args, lib) in cases {
        let (code, first, second) = twice(t, name, &args);
        assert_eq!(code, 0, "{name}");
        assert_eq!(first, second, "{name} differs between runs");
        assert_eq!(String::from_utf8(first).unwrap(), lib, "{name} differs from library");
    }
}

#[test]
fn plots_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = fixture(tmp.path());
    let (p0, p1) = (tmp.path().join("p0"), tmp.path().join("p1"));
    for p in [&p0, &p1] {
        let out = p.with_extension("json");
        assert_eq!(hemtkit(&["report", "--in", s(&dir), "--out", s(&out), "--plots", s(p)]), 0);
    }
    for f in ["gm.csv", "log_id.csv", "charge.csv", "mobility.csv"] {
        assert_eq!(read(&p0.join(f)), read(&p1.join(f)), "{f}");
    }
}

#[test]
fn stamp_is_opt_in() {
    let tmp = TempDir::new().unwrap();
    let dir = fixture(tmp.path());
    let plain = tmp.path().join("plain.json");
    let stamped = tmp.path().join("stamped.json");
    assert_eq!(hemtkit(&["report", "--in", s(&dir), "--out", s(&plain)]), 0);
    assert_eq!(
        hemtkit(&["report", "--in", s(&dir), "--out", s(&stamped), "--stamp", "lot-7"]),
        0
    );
    let v: serde_json::Value = serde_json::from_slice(&read(&plain)).unwrap();
    assert!(v.get("stamp").is_none());
    let v: serde_json::Value = serde_json::from_slice(&read(&stamped)).unwrap();
    assert_eq!(v["stamp"], "lot-7");
}

#[test]
fn batch_report_writes_one_file_per_directory() {
    let tmp = TempDir::new().unwrap();
    let a = fixture(tmp.path());
    let b = tmp.path().join("second");
    assert_eq!(hemtkit(&["synth", "--out", s(&b), "--noise", "0.001"]), 0);
    let out = tmp.path().join("reports");
    assert_eq!(hemtkit(&["--jobs", "2", "report", "--in", s(&a), "--in", s(&b), "--out", s(&out)]), 0);
    let single = tmp.path().join("single.json");
    assert_eq!(hemtkit(&["report", "--in", s(&a), "--out", s(&single)]), 0);
    assert_eq!(read(&out.join("reference.json")), read(&single));
    assert!(out.join("second.json").exists());
}

#[test]
fn invalid_input_exits_one_without_output() {
    let tmp = TempDir::new().unwrap();
    let dir = fixture(tmp.path());
    let (csv, meta) = sweep(&dir, "transfer_linear");
    let out = tmp.path().join("r.json");
    let missing = tmp.path().join("nope.meta.json");

    assert_eq!(hemtkit(&["extract-transfer", "--in", s(&csv), "--meta", s(&missing), "--out", s(&out)]), 1);
    assert!(!out.exists());
    assert_eq!(
        hemtkit(&["extract-transfer", "--in", s(&csv), "--meta", s(&meta), "--out", s(&out), "--window", "6"]),
        1
    );
    assert!(!out.exists());
    let (cv_csv, _) = sweep(&dir, "cv");
    assert_eq!(hemtkit(&["extract-transfer", "--in", s(&cv_csv), "--meta", s(&meta), "--out", s(&out)]), 1);
    assert!(!out.exists());
    let bad = tmp.path().join("stack.json");
    std::fs::write(&bad, r#"{"layers": []}"#).unwrap();
    assert_eq!(hemtkit(&["bandsim", "--stack", s(&bad), "--out", s(&out)]), 1);
    assert!(!out.exists());
    assert_eq!(hemtkit(&["no-such-command"]), 1);
    assert_eq!(hemtkit(&["--help"]), 0);
}

#[test]
fn failed_extractions_exit_two_with_report() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("flat.csv");
    let meta = tmp.path().join("flat.meta.json");
    let mut body = String::from("vgs_V,vds_V,id_A\n");
    for i in 0..50 {
        body.push_str(&format!("{:?},0.1,1e-6\n", -2.0 + 0.05 * i as f64));
    }
    std::fs::write(&csv, body).unwrap();
    std::fs::write(&meta, r#"{"device_id":"flat","kind":"transfer","w_um":10,"l_um":1}"#).unwrap();
    let out = tmp.path().join("r.json");
    assert_eq!(hemtkit(&["extract-transfer", "--in", s(&csv), "--meta", s(&meta), "--out", s(&out)]), 2);
    let v: serde_json::Value = serde_json::from_slice(&read(&out)).unwrap();
    let entries = v["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| e["error"].is_string()));
}

#[test]
fn bandsim_matches_library_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let stack = tmp.path().join("default.json");
    let problem = StackProblem::default_stack();
    std::fs::write(&stack, problem.to_json()).unwrap();
    let lib = solve_self_consistent(&problem, false).unwrap();

    let mut profiles = Vec::new();
    for run in 0..2 {
        let out = tmp.path().join(format!("band{run}.csv"));
        assert_eq!(hemtkit(&["bandsim", "--stack", s(&stack), "--out", s(&out)]), 0);
        let summary: serde_json::Value = serde_json::from_slice(&read(&summary_path(&out))).unwrap();
        assert_eq!(summary["ns_cm2"].as_f64().unwrap().to_bits(), lib.sheet_density.to_bits());
        let text = String::from_utf8(read(&out)).unwrap();
        assert!(text.starts_with("z_nm,ec_eV,n_cm3\n"));
        profiles.push(text);
    }
    assert_eq!(profiles[0], profiles[1]);
    let mut direct = Vec::new();
    lib.write_profile_csv(&mut direct).unwrap();
    assert_eq!(profiles[0].as_bytes(), direct.as_slice());
}

#[test]
fn bandsim_sweep_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let stack = tmp.path().join("default.json");
    std::fs::write(&stack, StackProblem::default_stack().to_json()).unwrap();
    let mut tables = Vec::new();
    for run in 0..2 {
        let out = tmp.path().join(format!("sweep{run}.csv"));
        let code = hemtkit(&[
            "--jobs", "3", "bandsim", "--stack", s(&stack), "--out", s(&out), "--sweep",
            "barrier-thickness", "--values", "15,20,25",
        ]);
        assert_eq!(code, 0);
        tables.push(read(&out));
    }
    assert_eq!(tables[0], tables[1]);
    let text = String::from_utf8(tables.pop().unwrap()).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("value,ns_cm2,converged,error\n"));
}
