//! End-to-end runs of the `phytotwin` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nalgebra::Point3;
use phytotwin::detect::Cluster;
use phytotwin::geom::{Frame, PointSet};
use phytotwin::ply::{read_ply, write_ply};
use phytotwin::sim::GroundTruth;
use phytotwin::twin::DigitalTwin;
use tempfile::TempDir;

fn phytotwin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phytotwin"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = phytotwin(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = phytotwin(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    String::from_utf8(out.stderr).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn full_run(dir: &Path, seed: &str, config: Option<&str>) -> String {
    let mut base = vec!["--seed", seed];
    if let Some(c) = config {
        fs::write(dir.join("run.cfg"), c).unwrap();
        base.extend(["--config", "run.cfg"]);
    }
    let with = |rest: &[&'static str]| [base.as_slice(), rest].concat();
    ok(dir, &with(&["synth"]));
    ok(dir, &with(&["twin", "cloud.ply"]));
    ok(dir, &with(&["plan", "twin.json", "plant.json"]));
    ok(dir, &with(&["simulate", "plan.json", "plant.json"]));
    ok(dir, &with(&["report", "twin.json", "rollouts.json"]));
    read(dir, "summary.txt")
}

#[test]
fn synth_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        ok(d.path(), &["--seed", "7", "synth", "--leaves", "8..12"]);
    }
    for name in ["plant.json", "truth.json", "cloud.ply"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn synth_rejects_bad_input() {
    let d = TempDir::new().unwrap();
    let err = fails(d.path(), &["--seed", "7", "synth", "--leaves", "12..8"], 2);
    assert!(err.contains("leaf_count"), "{err}");
    fails(d.path(), &["synth"], 2);
    fs::write(d.path().join("bad.cfg"), "margin_deg = 5\nwobble = 1\n").unwrap();
    let err = fails(d.path(), &["--seed", "1", "--config", "bad.cfg", "synth"], 2);
    assert!(err.contains("line 2") && err.contains("wobble"), "{err}");
}

#[test]
fn twin_finds_every_generated_leaf() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["--seed", "7", "synth"]);
    ok(d.path(), &["twin", "cloud.ply"]);
    let truth = GroundTruth::from_json(&read(d.path(), "truth.json")).unwrap();
    let twin = DigitalTwin::from_json(&read(d.path(), "twin.json")).unwrap();
    assert_eq!(twin.leaf_ids().len(), truth.leaves.len());
    let csv = read(d.path(), "report.csv");
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# units"));
    assert_eq!(lines.next(), Some("plant_id,leaf_id,height_cm,area_cm2,length_cm,width_cm"));
    assert_eq!(lines.count(), truth.leaves.len() + 2);
}

#[test]
fn ninety_nine_point_cluster_is_dropped() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["--seed", "7", "synth"]);
    let mut clusters = read_ply(&read(d.path(), "cloud.ply")).unwrap();
    let points = (0..99)
        .map(|i| Point3::new(0.1 + 1e-4 * i as f64, 0.05, 0.3 + 1e-4 * (i % 7) as f64))
        .collect();
    clusters.push(Cluster::new(999, PointSet::new(Frame::Plant, points).unwrap()).unwrap());
    fs::write(d.path().join("noisy.ply"), write_ply(&clusters)).unwrap();
    ok(d.path(), &["twin", "noisy.ply"]);
    let twin = DigitalTwin::from_json(&read(d.path(), "twin.json")).unwrap();
    let truth = GroundTruth::from_json(&read(d.path(), "truth.json")).unwrap();
    assert_eq!(twin.leaf_ids().len(), truth.leaves.len());
    assert!(twin.components().iter().all(|c| c.source_label != Some(999)));
}

#[test]
fn malformed_clouds_exit_2_with_diagnostics() {
    let d = TempDir::new().unwrap();
    let header = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n";
    fs::write(d.path().join("nolabel.ply"), format!("{header}end_header\n0 0 0\n")).unwrap();
    let err = fails(d.path(), &["twin", "nolabel.ply"], 2);
    assert!(err.contains("cluster_id"), "{err}");
    fs::write(
        d.path().join("badvalue.ply"),
        format!("{header}property int cluster_id\nend_header\n0 x 0 1\n"),
    )
    .unwrap();
    let err = fails(d.path(), &["twin", "badvalue.ply"], 2);
    assert!(err.contains("line 9"), "{err}");
    fails(d.path(), &["twin", "missing.ply"], 2);
}

#[test]
fn cloud_without_leaves_exits_3() {
    let d = TempDir::new().unwrap();
    let clusters: Vec<Cluster> = (0..5)
        .map(|k| {
            let pts = (0..150)
                .map(|i| Point3::new(0.001 * i as f64, 0.0, 0.05 * k as f64 + 1e-4 * i as f64))
                .collect();
            Cluster::new(k, PointSet::new(Frame::Plant, pts).unwrap()).unwrap()
        })
        .collect();
    fs::write(d.path().join("bare.ply"), write_ply(&clusters)).unwrap();
    let err = fails(d.path(), &["twin", "bare.ply"], 3);
    assert!(err.contains("non-rejected"), "{err}");
}

#[test]
fn version_mismatch_exits_2() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["--seed", "3", "synth"]);
    ok(d.path(), &["twin", "cloud.ply"]);
    let old = read(d.path(), "twin.json").replace("phytotwin/1", "phytotwin/0");
    fs::write(d.path().join("old.json"), old).unwrap();
    let err = fails(d.path(), &["plan", "old.json", "plant.json"], 2);
    assert!(err.contains("phytotwin/0"), "{err}");
    let err = fails(d.path(), &["plan", "twin.json", "twin.json"], 2);
    assert!(err.contains("phytosim/1"), "{err}");
}

#[test]
fn mismatched_plant_exits_4() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["--seed", "3", "synth", "--leaves", "10"]);
    ok(d.path(), &["twin", "cloud.ply"]);
    ok(d.path(), &["plan", "twin.json", "plant.json"]);
    let other = d.path().join("other");
    fs::create_dir(&other).unwrap();
    ok(&other, &["--seed", "4", "synth", "--leaves", "1"]);
    let err = fails(d.path(), &["simulate", "plan.json", "other/plant.json"], 4);
    assert!(err.contains("leaf"), "{err}");
}

const ISOLATED: &str = "leaves = 1\nleaf_length_min = 0.10\nleaf_length_max = 0.12\n\
                        pitch_deg_min = 0\npitch_deg_max = 0\nupward_probability = 0\n";

#[test]
fn isolated_leaf_is_lifted_and_observed() {
    let d = TempDir::new().unwrap();
    let summary = full_run(d.path(), "11", Some(ISOLATED));
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["1", "0", "1/1", "0/0", "1/1"], "{summary}");
}

#[test]
fn short_leaves_are_all_skipped() {
    let d = TempDir::new().unwrap();
    let cfg = "leaves = 4\nleaf_length_min = 0.03\nleaf_length_max = 0.045\n";
    let summary = full_run(d.path(), "12", Some(cfg));
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["4", "4", "0/0", "0/0", "0/0"], "{summary}");
    assert_eq!(summary.matches("leaf_too_small").count(), 4, "{summary}");
}

#[test]
fn rerun_gives_identical_summary() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = full_run(a.path(), "21", None);
    assert_eq!(first, full_run(b.path(), "21", None));
    let annotated = DigitalTwin::from_json(&read(a.path(), "twin_annotated.json")).unwrap();
    for id in annotated.leaf_ids() {
        assert!(!annotated.annotations_for(id).is_empty());
    }
}
