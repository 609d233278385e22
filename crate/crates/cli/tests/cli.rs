use std::path::Path;
use std::process::{Command, Output};

fn sslsod(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sslsod"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = sslsod(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn err_code(out: &Output) -> String {
    assert!(!out.status.success(), "expected failure");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().find(|l| l.starts_with("error[")).unwrap_or_else(|| panic!("no error line in {stderr}"));
    line["error[".len()..line.find(']').unwrap()].to_string()
}

fn count_files(dir: &Path) -> usize {
    std::fs::read_dir(dir).unwrap().count()
}

const TINY: [&str; 6] = ["--set", "iterations=2", "--set", "image_size=32", "--set", "batch_size=2"];

fn with_tiny<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(TINY).collect()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "data", "--count", "4", "--size", "32", "--seed", "3"]);
    for sub in ["rgb", "depth", "gt"] {
        assert_eq!(count_files(&d.join("data").join(sub)), 4);
    }
    assert!(d.join("data/manifest.json").is_file());

    ok(d, &["contour-gt", "--data", "data"]);
    assert_eq!(count_files(&d.join("data/contour")), 4);

    ok(d, &with_tiny(&["pretrain1", "--data", "data", "--out", "p1"]));
    for f in ["rgb2depth.ckpt", "depth2rgb.ckpt", "report.json", "config.toml", "command.txt"] {
        assert!(d.join("p1").join(f).is_file(), "missing {f}");
    }
    let report = std::fs::read_to_string(d.join("p1/report.json")).unwrap();
    assert!(report.contains("stage1_rgb2depth"));

    ok(d, &with_tiny(&["pretrain2", "--data", "data", "--out", "p2", "--stage1", "p1"]));
    assert!(d.join("p2/stage2.ckpt").is_file());

    ok(
        d,
        &with_tiny(&[
            "train", "--data", "data", "--val", "data", "--out", "sod", "--init", "p2", "--stage1", "p1", "--stage2",
            "p2",
        ]),
    );
    assert!(d.join("sod/sod.ckpt").is_file());
    assert_eq!(count_files(&d.join("sod/pred")), 4);
    let config = std::fs::read_to_string(d.join("sod/config.toml")).unwrap();
    assert!(config.contains("init_p1 = true") && config.contains("init_p2 = true"));
    assert!(config.contains("iterations = 2"));

    let out = ok(d, &["eval", "--dataset", "a=sod/pred,data/gt", "--dataset", "b=sod/pred,data/gt"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("dataset,count"));
    assert!(rows[3].starts_with("Ave-Metric,8,"));

    let stem = "synth_00000";
    let dump = ["dump-features", "--checkpoint", "sod/sod.ckpt", "--data", "data", "--sample", stem, "--size", "32"];
    ok(d, &[&dump[..], &["--out", "feats"]].concat());
    assert_eq!(count_files(&d.join("feats")), 36);
    assert!(d.join("feats").join(format!("{stem}_cm5_jd.png")).is_file());
    assert!(d.join("feats").join(format!("{stem}_cl1_fused.png")).is_file());
}

#[test]
fn nonempty_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "data", "--count", "2", "--size", "16"]);
    assert_eq!(err_code(&sslsod(d, &["synth", "--out", "data", "--count", "2", "--size", "16"])), "output-exists");
    ok(d, &["synth", "--out", "data", "--count", "2", "--size", "16", "--force"]);
}

#[test]
fn stage_two_without_stage_one_output_names_the_missing_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "data", "--count", "2", "--size", "32"]);
    std::fs::create_dir(d.join("empty")).unwrap();
    let out = sslsod(d, &with_tiny(&["pretrain2", "--data", "data", "--out", "p2", "--stage1", "empty"]));
    assert_eq!(err_code(&out), "missing-checkpoint");
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage1_rgb2depth"));
    assert!(!d.join("p2").exists(), "nothing is written before inputs are checked");
}

#[test]
fn training_with_pretext_init_needs_its_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "data", "--count", "2", "--size", "32"]);
    let out = sslsod(d, &with_tiny(&["train", "--data", "data", "--out", "sod", "--init", "p1"]));
    assert_eq!(err_code(&out), "missing-checkpoint");
}

#[test]
fn eval_reports_unpaired_stems() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "a", "--count", "3", "--size", "16"]);
    ok(d, &["synth", "--out", "b", "--count", "2", "--size", "16"]);
    let out = sslsod(d, &["eval", "--dataset", "x=a/gt,b/gt"]);
    assert_eq!(err_code(&out), "dataset");
    assert!(String::from_utf8_lossy(&out.stderr).contains("synth_00002"));
}

#[test]
fn eval_of_masks_against_themselves_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "a", "--count", "3", "--size", "16"]);
    ok(d, &["eval", "--dataset", "self=a/gt,a/gt", "--out", "m.csv"]);
    let csv = std::fs::read_to_string(d.join("m.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..2], ["self", "3"]);
    for v in &row[2..6] {
        assert!((v.parse::<f64>().unwrap() - 1.0).abs() < 1e-6, "{csv}");
    }
    assert_eq!(row[6].parse::<f64>().unwrap(), 0.0);
    assert_eq!(err_code(&sslsod(d, &["eval", "--dataset", "self=a/gt,a/gt", "--out", "m.csv"])), "output-exists");
}

#[test]
fn malformed_inputs_map_to_error_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(err_code(&sslsod(d, &["eval", "--dataset", "nodirs"])), "usage");
    assert_eq!(err_code(&sslsod(d, &["synth", "--out", "x", "--count", "0"])), "invalid-argument");
    assert_eq!(err_code(&sslsod(d, &["contour-gt", "--data", "."])), "dataset");
    ok(d, &["synth", "--out", "data", "--count", "2", "--size", "32"]);
    let bad_key = sslsod(d, &["pretrain1", "--data", "data", "--out", "o", "--set", "no_such_key=1"]);
    assert_eq!(err_code(&bad_key), "config");
    std::fs::write(d.join("junk.ckpt"), b"not a checkpoint").unwrap();
    let junk =
        sslsod(d, &["dump-features", "--checkpoint", "junk.ckpt", "--data", "data", "--sample", "x", "--out", "f"]);
    assert_eq!(err_code(&junk), "corrupt-checkpoint");
}
