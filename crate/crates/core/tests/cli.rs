use std::fs;
use std::path::{Path, PathBuf};

use tempoproj::cli::run;
use tempoproj::dataset::{save_ucr, synth_generate, SynthSpec};

fn tempoproj(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("tempoproj").chain(args.iter().copied());
    let code = run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn small_dataset(dir: &Path) -> PathBuf {
    let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(10, 32), 3).unwrap();
    let path = dir.join("small.tsv");
    save_ucr(&ds, &path).unwrap();
    path
}

fn run_dir(stdout: &str) -> PathBuf {
    let line = stdout
        .lines()
        .find_map(|l| l.strip_prefix("wrote "))
        .expect("run directory line");
    PathBuf::from(line)
}

#[test]
fn project_reuses_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let out = tmp.path().join("out");
    let args = [
        "project",
        "--data",
        data.to_str().unwrap(),
        "--pivots",
        "4",
        "--out",
        out.to_str().unwrap(),
    ];
    let (code, first) = tempoproj(&args);
    assert_eq!(code, 0);
    assert!(
        first.contains("N=30 p=4 W=1 metric=sbd") && first.contains("computed"),
        "{first}"
    );
    let (code, second) = tempoproj(&args);
    assert_eq!(code, 0);
    assert!(second.contains("cached"), "{second}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let (code, _) = tempoproj(&["project", "--data", data.to_str().unwrap(), "--pivots", "0"]);
    assert_eq!(code, 2);
    let (code, _) = tempoproj(&["cluster", "--data", data.to_str().unwrap(), "--pipeline", "nope"]);
    assert_eq!(code, 2);
    let missing = tmp.path().join("missing.tsv");
    let (code, _) = tempoproj(&["inspect", "--data", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn inspect_reports_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let (code, text) = tempoproj(&["inspect", "--data", data.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.contains("30") && text.contains("32"), "{text}");
}

#[test]
fn single_run_benchmark_has_zero_std_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let out = tmp.path().join("out");
    let args = [
        "benchmark",
        "--data",
        data.to_str().unwrap(),
        "--pipeline",
        "os,pr",
        "--algorithm",
        "kmeans",
        "--pivots",
        "4",
        "--runs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    let (code, text) = tempoproj(&args);
    assert_eq!(code, 0, "{text}");
    let dir = run_dir(&text);
    let csv = fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let std: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(std, 0.0, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 2);

    let report = fs::read(dir.join("report.json")).unwrap();
    let (code, again) = tempoproj(&args);
    assert_eq!(code, 0);
    assert_eq!(run_dir(&again), dir);
    assert_eq!(fs::read(dir.join("report.json")).unwrap(), report);
    assert!(dir.join("timings.json").exists());
}

#[test]
fn cluster_then_train_then_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let d = data.to_str().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();

    let (code, text) = tempoproj(&[
        "cluster",
        "--data",
        d,
        "--pipeline",
        "pr",
        "--pivots",
        "4",
        "--out",
        o,
    ]);
    assert_eq!(code, 0, "{text}");
    let assignments = fs::read_to_string(run_dir(&text).join("assignments.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 31);

    let (code, text) = tempoproj(&[
        "train",
        "--data",
        d,
        "--pipeline",
        "prls",
        "--pivots",
        "16",
        "--epochs",
        "2",
        "--out",
        o,
    ]);
    assert_eq!(code, 0, "{text}");
    let dir = run_dir(&text);
    for file in ["model.ckpt", "loss.csv", "latents.csv", "report.json"] {
        assert!(dir.join(file).exists(), "{file} missing");
    }

    let svg = tmp.path().join("latents.svg");
    let latents = dir.join("latents.csv");
    let (code, text) = tempoproj(&[
        "plot",
        "--latents",
        latents.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    let body = fs::read_to_string(&svg).unwrap();
    assert!(body.starts_with("<svg") && body.matches("<circle").count() >= 30);
}
