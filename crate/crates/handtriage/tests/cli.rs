mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn handtriage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handtriage"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = handtriage(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eval_writes_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, dets) = common::write_half_recall_fixture(dir.path());
    let out = dir.path().join("out");
    let stdout = ok(&["eval", "--gt", p(&gt), "--detections", p(&dets), "--out", p(&out)]);
    let cells: Vec<&str> = stdout.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(cells[1], "0.505");
    assert_eq!(cells[4], "-1.000");
    let report = json(&out.join("report.json"));
    assert_eq!(report["metrics"]["AP50"].as_f64().unwrap(), 51.0 / 101.0);
    assert_eq!(report["metrics"]["AR1"].as_f64().unwrap(), 0.5);
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), stdout);
}

#[test]
fn eval_with_label_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (gt_dir, dt_dir) = (dir.path().join("gt"), dir.path().join("dt"));
    fs::create_dir_all(&gt_dir).unwrap();
    fs::create_dir_all(&dt_dir).unwrap();
    fs::write(gt_dir.join("a.txt"), "0 0.5 0.5 0.5 0.5\n").unwrap();
    fs::write(dt_dir.join("a.txt"), "0 0.5 0.5 0.5 0.5 0.9\n").unwrap();
    fs::write(dir.path().join("sizes.txt"), "a.jpg 200 200\n").unwrap();
    let sizes = dir.path().join("sizes.txt");
    let stdout = ok(&[
        "eval",
        "--gt",
        p(&gt_dir),
        "--detections",
        p(&dt_dir),
        "--sizes",
        p(&sizes),
    ]);
    let cells: Vec<&str> = stdout.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(cells[0], "1.000");
    assert_eq!(cells[5], "1.000");

    let out = handtriage(&["eval", "--gt", p(&gt_dir), "--detections", p(&dt_dir)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sizes"));
}

#[test]
fn triage_writes_json_csv_and_stores_run() {
    let dir = tempfile::tempdir().unwrap();
    let (frames, dets) = common::four_frames(dir.path());
    let report = dir.path().join("report.json");
    let data = dir.path().join("data");
    let stdout = ok(&[
        "triage",
        "--frames",
        p(&frames),
        "--detections",
        p(&dets),
        "--threshold",
        "30000",
        "--out",
        p(&report),
        "--data-dir",
        p(&data),
    ]);
    assert!(stdout.contains("flagged 2 of 4"), "{stdout}");
    let r = json(&report);
    assert_eq!(
        (r["summary"]["flagged"].as_u64(), r["summary"]["total"].as_u64()),
        (Some(2), Some(4))
    );
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains(",true,")).count(), 2);
    assert_eq!(fs::read_dir(data.join("runs")).unwrap().count(), 1);

    let out = handtriage(&[
        "triage",
        "--frames",
        p(&frames),
        "--detections",
        p(&dets),
        "--threshold",
        "-1",
        "--out",
        p(&report),
    ]);
    assert!(!out.status.success());
}

#[test]
fn convert_round_trip_and_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    common::write_png(&images.join("a.png"), 640, 480);
    common::write_png(&images.join("sub/b.png"), 100, 50);
    let sizes = dir.path().join("sizes.txt");
    ok(&["sizes", "--images", p(&images), "--tag", "set", "--out", p(&sizes)]);
    assert_eq!(
        fs::read_to_string(&sizes).unwrap(),
        "set/a.png 640 480\nset/sub/b.png 100 50\n"
    );

    let labels = dir.path().join("labels");
    fs::create_dir_all(labels.join("sub")).unwrap();
    fs::write(labels.join("a.txt"), "0 0.5 0.5 0.25 0.5\n0 0.1 0.1 0.1 0.1\n").unwrap();
    fs::write(labels.join("sub/b.txt"), "").unwrap();
    let coco = dir.path().join("gt.json");
    let stdout = ok(&[
        "convert",
        "--input",
        p(&labels),
        "--output",
        p(&coco),
        "--sizes",
        p(&sizes),
        "--tag",
        "set",
    ]);
    assert!(stdout.contains("2 boxes"));
    let gt = json(&coco);
    assert_eq!(gt["images"].as_array().unwrap().len(), 2);
    assert_eq!(
        gt["annotations"][0]["bbox"],
        serde_json::json!([240.0, 120.0, 160.0, 240.0])
    );

    let back = dir.path().join("back");
    ok(&["convert", "--input", p(&coco), "--output", p(&back)]);
    assert_eq!(
        fs::read_to_string(back.join("set/a.txt")).unwrap(),
        fs::read_to_string(labels.join("a.txt")).unwrap()
    );
}

#[test]
fn manifests_build_and_merge() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, ids: &[&str]| {
        let path = dir.path().join(name);
        fs::write(&path, ids.join("\n")).unwrap();
        path
    };
    let (tr, va, te) = (
        write("tr", &["a/1", "a/2"]),
        write("va", &["a/3"]),
        write("te", &["a/4"]),
    );
    let m1 = dir.path().join("m1.json");
    ok(&[
        "manifest",
        "build",
        "--name",
        "A",
        "--train",
        p(&tr),
        "--val",
        p(&va),
        "--test",
        p(&te),
        "--out",
        p(&m1),
    ]);
    let (tr2, va2, te2) = (write("tr2", &["b/1"]), write("va2", &[]), write("te2", &["b/2"]));
    let m2 = dir.path().join("m2.json");
    ok(&[
        "manifest",
        "build",
        "--name",
        "B",
        "--train",
        p(&tr2),
        "--val",
        p(&va2),
        "--test",
        p(&te2),
        "--out",
        p(&m2),
    ]);
    let merged = dir.path().join("all.json");
    let stdout = ok(&[
        "manifest",
        "merge",
        "--name",
        "All",
        "--out",
        p(&merged),
        p(&m1),
        p(&m2),
    ]);
    assert_eq!(stdout.trim(), "All: train 3 val 1 test 2 total 6");

    let leak = write("leak", &["a/1"]);
    let out = handtriage(&[
        "manifest",
        "build",
        "--name",
        "L",
        "--train",
        p(&tr),
        "--val",
        p(&leak),
        "--test",
        p(&te),
        "--out",
        p(&m1),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("a/1"));
}

#[test]
fn bootstrap_helpers() {
    let stdout = ok(&[
        "bootstrap",
        "plan",
        "--plan",
        "seed=500,add=1000,rounds=2",
        "--corpus-size",
        "11076",
    ]);
    assert_eq!(
        stdout.lines().collect::<Vec<_>>(),
        [
            "round 0: train 500 predict 10576",
            "round 1: train 1500 predict 9576",
            "round 2: train 2500 predict 8576"
        ]
    );
    assert!(!handtriage(&[
        "bootstrap",
        "plan",
        "--plan",
        "seed=10,add=5,rounds=1",
        "--corpus-size",
        "12"
    ])
    .status
    .success());

    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, (0..50).map(|i| format!("img{i}.jpg\n")).collect::<String>()).unwrap();
    let seed = dir.path().join("seed.txt");
    ok(&[
        "bootstrap",
        "seed",
        "--corpus",
        p(&corpus),
        "--size",
        "5",
        "--rng-seed",
        "9",
        "--out",
        p(&seed),
    ]);
    let first = fs::read_to_string(&seed).unwrap();
    ok(&[
        "bootstrap",
        "seed",
        "--corpus",
        p(&corpus),
        "--size",
        "5",
        "--rng-seed",
        "9",
        "--out",
        p(&seed),
    ]);
    assert_eq!(first.lines().count(), 5);
    assert_eq!(first, fs::read_to_string(&seed).unwrap());

    let preds = dir.path().join("preds");
    fs::create_dir_all(&preds).unwrap();
    for (id, conf) in [("a", "0.99"), ("b", "0.42"), ("c", "0.87")] {
        fs::write(preds.join(format!("{id}.txt")), format!("0 0.5 0.5 0.1 0.1 {conf}\n")).unwrap();
    }
    let stdout = ok(&["bootstrap", "select", "--predictions", p(&preds), "--k", "2"]);
    assert_eq!(stdout, "a\t0.99\nc\t0.87\n");
    let out = handtriage(&["bootstrap", "select", "--predictions", p(&preds), "--k", "4"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('4') && err.contains('3'), "{err}");
}
