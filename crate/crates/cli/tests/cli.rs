use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srdm_core::{back_projection_error, load_image, Kernel};

fn srdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srdm")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = srdm(args);
    assert!(
        out.status.success(),
        "srdm {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new(generator: &str, count: &str, kernel: &str) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        ok(&[
            "synth",
            p(&root.join("d")),
            "--count",
            count,
            "--lr-width",
            "40",
            "--lr-height",
            "40",
            "--generator",
            generator,
            "--kernel",
            kernel,
        ]);
        Self { _tmp: tmp, root }
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.join("d").join(name)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn aggregate(stdout: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("aggregate "))
        .unwrap()
        .parse()
        .unwrap()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn evaluate_identity_prints_zero_and_embeds_manifest() {
    let f = Fixture::new("identity", "3", "bicubic");
    let out = ok(&[
        "evaluate",
        p(&f.dir("lr")),
        p(&f.dir("hr")),
        p(&f.dir("sr")),
        "--stride",
        "2",
        "--out-dir",
        p(&f.out("o")),
    ]);
    assert!(out.contains("aggregate 0.0"), "{out}");
    assert_eq!(aggregate(&out), 0.0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.out("o/report.json")).unwrap()).unwrap();
    assert_eq!(json["manifest"]["subcommand"], "evaluate");
    assert_eq!(json["manifest"]["config"]["stride"], 2);
    assert_eq!(json["report"]["aggregate"], 0.0);
    let csv = std::fs::read_to_string(f.out("o/report.csv")).unwrap();
    assert!(csv.starts_with("# manifest: {"));
    assert!(csv.contains("group,gt_count,gen_count,distance"));
}

#[test]
fn evaluate_reports_missing_stems_with_exit_2() {
    let f = Fixture::new("noise:8", "3", "bicubic");
    std::fs::remove_file(f.dir("sr").join("img_001.png")).unwrap();
    let out = srdm(&["evaluate", p(&f.dir("lr")), p(&f.dir("hr")), p(&f.dir("sr"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("img_001") && err.contains("sr_dir"), "{err}");
}

#[test]
fn input_errors_exit_2() {
    let f = Fixture::new("identity", "2", "bicubic");
    let (lr, hr) = (f.dir("lr"), f.dir("hr"));
    // Undecodable file.
    std::fs::write(f.dir("sr").join("img_000.png"), b"garbage").unwrap();
    assert_eq!(
        srdm(&["evaluate", p(&lr), p(&hr), p(&f.dir("sr"))]).status.code(),
        Some(2)
    );
    // Invalid configuration and unknown flag values.
    assert_eq!(
        srdm(&["evaluate", p(&lr), p(&hr), p(&hr), "--patch-size", "4"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        srdm(&["evaluate", p(&lr), p(&hr), p(&hr), "--distance", "l2"])
            .status
            .code(),
        Some(2)
    );
    // Scale mismatch: HR is 4x the LR.
    assert_eq!(
        srdm(&["backproject", p(&hr), p(&lr), "--scale", "3"]).status.code(),
        Some(2)
    );
}

#[test]
fn config_file_with_flag_override() {
    let f = Fixture::new("noise:16", "2", "bicubic");
    let cfg = f.out("run.cfg");
    std::fs::write(
        &cfg,
        "# settings\npatch_size = 5\nstride = 3\ndistance = tv\nseed = 4\n",
    )
    .unwrap();
    ok(&[
        "--config",
        p(&cfg),
        "evaluate",
        p(&f.dir("lr")),
        p(&f.dir("hr")),
        p(&f.dir("sr")),
        "--stride",
        "2",
        "--out-dir",
        p(&f.out("o")),
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.out("o/report.json")).unwrap()).unwrap();
    let c = &json["manifest"]["config"];
    assert_eq!((c["patch_size"].as_u64(), c["stride"].as_u64()), (Some(5), Some(2)));
    assert_eq!(c["distance"], "tv");
    assert_eq!(json["manifest"]["seed"], 4);

    std::fs::write(&cfg, "nonsense = 1\n").unwrap();
    let out = srdm(&[
        "--config",
        p(&cfg),
        "evaluate",
        p(&f.dir("lr")),
        p(&f.dir("hr")),
        p(&f.dir("sr")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn backproject_matches_library() {
    let f = Fixture::new("blur:1", "3", "box");
    let out = f.out("bp.csv");
    let stdout = ok(&[
        "backproject",
        p(&f.dir("sr")),
        p(&f.dir("lr")),
        "--kernel",
        "box",
        "--out",
        p(&out),
    ]);
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 4);
    let mut sum = 0.0;
    for row in &rows[..3] {
        let (stem, value) = row.split_once(',').unwrap();
        let sr = load_image(f.dir("sr").join(format!("{stem}.png"))).unwrap();
        let lr = load_image(f.dir("lr").join(format!("{stem}.png"))).unwrap();
        let expected = back_projection_error(&sr, &lr, 4, Kernel::Box).unwrap();
        assert_eq!(value.parse::<f64>().unwrap(), expected);
        sum += expected;
    }
    assert_eq!(rows[3], format!("mean,{}", sum / 3.0));
    assert!(stdout.starts_with("mean_rmse"));

    // Ground truth against box-produced LR inputs is exact.
    let stdout = ok(&[
        "backproject",
        p(&f.dir("hr")),
        p(&f.dir("lr")),
        "--kernel",
        "box",
        "--out",
        p(&out),
    ]);
    assert_eq!(stdout.trim(), "mean_rmse 0.0");
}

#[test]
fn rate_outputs_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let votes = tmp.path().join("votes.csv");
    std::fs::write(&votes, "winner,loser\nA,B\nA,C\nB,C\nA,C\n").unwrap();
    let out = tmp.path().join("r.csv");
    let stdout = ok(&["--seed", "2", "rate", p(&votes), "--shuffles", "20", "--out", p(&out)]);
    assert!(stdout.lines().next().unwrap().contains("1. A"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("method,rating,deviation"));
    assert_eq!(data_rows(&csv).len(), 3);
    let again = tmp.path().join("r2.csv");
    ok(&["--seed", "2", "rate", p(&votes), "--shuffles", "20", "--out", p(&again)]);
    assert_eq!(csv.replace("r.csv", "r2.csv"), std::fs::read_to_string(&again).unwrap());

    std::fs::write(&votes, "winner,loser\n").unwrap();
    assert_eq!(srdm(&["rate", p(&votes)]).status.code(), Some(2));
    std::fs::write(&votes, "winner,loser\nA,A\n").unwrap();
    assert_eq!(srdm(&["rate", p(&votes)]).status.code(), Some(2));
}

#[test]
fn correlate_ten_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores.csv");
    let mut text = String::from("method,metric,glicko,backproj\n");
    for i in 0..10 {
        let m = i as f64 * 0.7;
        text.push_str(&format!(
            "m{i},{m},{},{}\n",
            1700.0 - 40.0 * m + (i % 3) as f64,
            2.0 + 0.1 * i as f64
        ));
    }
    std::fs::write(&scores, text).unwrap();
    let (out, svg) = (tmp.path().join("c.csv"), tmp.path().join("plot.svg"));
    let stdout = ok(&["correlate", p(&scores), "--out", p(&out), "--svg", p(&svg)]);
    assert!(stdout.contains("metric_vs_glicko") && stdout.contains("metric_vs_backproj"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.iter().filter(|r| r.starts_with("point,")).count(), 10);
    assert_eq!(rows.iter().filter(|r| r.starts_with("summary,")).count(), 2);
    for plot in [svg, tmp.path().join("plot_backproj.svg")] {
        let text = std::fs::read_to_string(&plot).unwrap();
        assert!(text.contains("<!--") && text.contains("manifest:") && text.contains("<svg"));
    }
}

#[test]
fn loss_of_identical_samples_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    std::fs::write(&a, "value\n0.5\n1.5\n-2\n").unwrap();
    std::fs::write(&b, "1.5\n-2\n0.5\n").unwrap();
    let grad = tmp.path().join("g.csv");
    assert_eq!(ok(&["loss", p(&a), p(&b), "--grad", p(&grad)]).trim(), "loss 0.0");
    let g = std::fs::read_to_string(&grad).unwrap();
    assert!(g.starts_with("# manifest:"));
    assert!(data_rows(&g).iter().all(|r| r.ends_with(",0")));

    std::fs::write(&b, "1\n2\n").unwrap();
    assert!(ok(&["loss", p(&a), p(&b)]).starts_with("loss "));
    assert_eq!(srdm(&["loss", p(&a), p(&b), "--grad", p(&grad)]).status.code(), Some(2));
}

#[test]
fn sweeps_have_one_row_per_value() {
    let f = Fixture::new("identity", "3", "bicubic");
    let (lr, hr) = (f.dir("lr"), f.dir("hr"));
    let out = f.out("sweep.csv");
    ok(&[
        "sweep",
        p(&lr),
        p(&hr),
        p(&hr),
        "--vary",
        "distance",
        "--stride",
        "2",
        "--out",
        p(&out),
    ]);
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[2], "0", "{row}");
        assert_eq!(cells[6], "ok");
    }

    let sr = f.dir("sr");
    ok(&["sweep", p(&lr), p(&hr), p(&sr), "--vary", "r", "--out", p(&out)]);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(data_rows(&csv).len(), 12);
    ok(&[
        "sweep",
        p(&lr),
        p(&hr),
        p(&sr),
        "--vary",
        "pixel",
        "--stride",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(data_rows(&std::fs::read_to_string(&out).unwrap()).len(), 3);
    ok(&[
        "sweep",
        p(&lr),
        p(&hr),
        p(&sr),
        "--vary",
        "nsamples",
        "--values",
        "50,100",
        "--stride",
        "1",
        "--n-groups",
        "2",
        "--repetitions",
        "5",
        "--out",
        p(&out),
    ]);
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",ok")), "{rows:?}");
    assert_eq!(
        srdm(&["sweep", p(&lr), p(&hr), p(&sr), "--vary", "ngroups", "--values", "x"])
            .status
            .code(),
        Some(2)
    );
}
