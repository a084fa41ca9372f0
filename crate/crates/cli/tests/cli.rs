use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shotscore_cli::commands::{MetricsFile, ScoreRow};
use shotscore_cli::{RunConfig, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_VALIDATION};

fn shotscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shotscore"))
        .args(args)
        .env("SHOTSCORE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_scores(dir: &Path, id: &str, pred: &[f64], gt: &[f64]) {
    fs::create_dir_all(dir).unwrap();
    let mut w = csv::Writer::from_path(dir.join(format!("{id}.csv"))).unwrap();
    for (i, (&p, &g)) in pred.iter().zip(gt).enumerate() {
        w.serialize(ScoreRow {
            frame_index: i,
            predicted: p,
            smoothed: p,
            ground_truth: g,
        })
        .unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn zero_batch_size_is_config_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let res = shotscore(&[
        "train",
        "--data",
        path(tmp.path()),
        "--batch-size",
        "0",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&res), EXIT_CONFIG as i32);
    assert!(stderr(&res).contains("batch_size"));
    assert!(!out.exists());
}

#[test]
fn evaluate_perfect_prediction() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores");
    // Ten shots with distinct levels.
    let gt: Vec<f64> = (0..500).map(|i| (i / 50) as f64 * 0.5).collect();
    write_scores(&scores, "a", &gt, &gt);
    let out = tmp.path().join("eval");
    let res = shotscore(&[
        "evaluate",
        "--scores",
        path(&scores),
        "--f-variant",
        "standard",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let m: MetricsFile = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    let r = &m.videos[0];
    assert_eq!((r.mae, r.aev, r.f_measure), (0.0, 0.0, 1.0));
    assert!(out.join("run_config.toml").exists());
}

#[test]
fn evaluate_output_is_sorted_by_video_id() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores");
    let gt: Vec<f64> = (0..100).map(|i| i as f64 / 50.0).collect();
    for id in ["c", "a", "b"] {
        write_scores(&scores, id, &gt, &gt);
    }
    let out = tmp.path().join("eval");
    assert_eq!(
        code(&shotscore(&[
            "evaluate",
            "--scores",
            path(&scores),
            "--out",
            path(&out)
        ])),
        0
    );
    let m: MetricsFile = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    let ids: Vec<&str> = m.videos.iter().map(|r| r.video_id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
    assert_eq!(m.mean.video_id, "mean");
}

#[test]
fn archived_config_reproduces_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores");
    let gt = vec![1.0; 60];
    write_scores(&scores, "a", &gt, &gt);
    let cfg_path = tmp.path().join("base.toml");
    fs::write(&cfg_path, "profile = \"desk\"\nsummary_fraction = 0.3\nseed = 4\n").unwrap();
    let out = tmp.path().join("sum");
    let res = shotscore(&[
        "summarize",
        "--config",
        path(&cfg_path),
        "--seed",
        "9",
        "--smooth-window",
        "3",
        "--scores",
        path(&scores),
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(out.join("run_config.toml")).unwrap();
    let archived = RunConfig::from_toml(&text, Path::new("run_config.toml"), None).unwrap();
    assert_eq!(archived.seed, 9);
    assert_eq!(archived.smooth_window, 3);
    assert_eq!(archived.summary_fraction, 0.3);
    assert_eq!(archived.input_side, 32);
    assert!(out.join("summary.json").exists());
}

#[test]
fn exit_codes_are_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");

    let cfg_path = tmp.path().join("bad.toml");
    fs::write(&cfg_path, "batchsize = 4\n").unwrap();
    let res = shotscore(&["gradcheck", "--config", path(&cfg_path)]);
    assert_eq!(code(&res), EXIT_CONFIG as i32);

    let res = shotscore(&[
        "evaluate",
        "--scores",
        path(&tmp.path().join("missing")),
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&res), EXIT_IO as i32, "{}", stderr(&res));

    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let res = shotscore(&["evaluate", "--scores", path(&empty), "--out", path(&out)]);
    assert_eq!(code(&res), EXIT_VALIDATION as i32);

    let res = shotscore(&[
        "evaluate",
        "--scores",
        path(&empty),
        "--smooth-window",
        "4",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&res), EXIT_CONFIG as i32);
    assert!(stderr(&res).contains("smooth_window"));

    let res = shotscore(&["gradcheck", "--profile", "desk", "--input-side", "8"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    fs::write(
        &cfg_path,
        "profile = \"desk\"\ninput_side = 8\ngradcheck_tolerance = 1e-300\n",
    )
    .unwrap();
    let res = shotscore(&["gradcheck", "--config", path(&cfg_path)]);
    assert_eq!(code(&res), EXIT_NUMERIC as i32);
}

#[test]
fn bad_thread_count_is_config_error() {
    let res = Command::new(env!("CARGO_BIN_EXE_shotscore"))
        .args(["gradcheck", "--profile", "desk", "--input-side", "8"])
        .env("SHOTSCORE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&res), EXIT_CONFIG as i32);
    assert!(stderr(&res).contains("SHOTSCORE_THREADS"));
}

#[test]
fn small_pipeline_runs_and_does_not_touch_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let common = ["--profile", "desk", "--seed", "2"];
    let mut args = vec!["synth", "--out", path(&data)];
    args.extend(common);
    assert_eq!(code(&shotscore(&args)), 0);
    let before = fs::read(data.join("manifest.json")).unwrap();

    let run = tmp.path().join("run");
    let mut args = vec![
        "train",
        "--data",
        path(&data),
        "--max-iterations",
        "3",
        "--out",
        path(&run),
    ];
    args.extend(common);
    let res = shotscore(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let loss = fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("iteration,epoch,batch_loss"));
    assert_eq!(loss.lines().count(), 4);

    let pred = tmp.path().join("pred");
    let ckpt = run.join("checkpoint.fckp");
    let mut args = vec![
        "predict",
        "--data",
        path(&data),
        "--checkpoint",
        path(&ckpt),
        "--out",
        path(&pred),
    ];
    args.extend(common);
    let res = shotscore(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let split: serde_json::Value = serde_json::from_slice(&fs::read(run.join("split.json")).unwrap()).unwrap();
    let mut written: Vec<String> = fs::read_dir(pred.join("scores"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    written.sort();
    let test: Vec<String> = serde_json::from_value(split["test"].clone()).unwrap();
    assert_eq!(written, test);
    assert_eq!(fs::read(data.join("manifest.json")).unwrap(), before);

    // A checkpoint from a different input side is rejected as a validation error.
    let other = tmp.path().join("x");
    let mut args = vec![
        "predict",
        "--data",
        path(&data),
        "--checkpoint",
        path(&ckpt),
        "--input-side",
        "16",
    ];
    args.extend(["--out", path(&other)]);
    args.extend(common);
    assert_eq!(code(&shotscore(&args)), EXIT_VALIDATION as i32);
}
