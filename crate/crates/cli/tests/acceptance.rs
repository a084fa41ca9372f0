//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use shotscore::datapipe::{augment, AugmentCode};
use shotscore::io::{read_tensor, write_tensor};
use shotscore::network::{load_checkpoint, save_checkpoint};
use shotscore::scoring::{
    aggregate_shots, error_metrics, f_measure, relative_f, select_summary, smooth, FVariant, FrameScoreSeries,
    ShotScoreSeries, SummaryMask,
};
use shotscore::training::{adam_step, AdamConfig, AdamState};
use shotscore::{build_network, Network, NetworkConfig, Rng, Tensor};
use shotscore_cli::commands::MetricsFile;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn shotscore(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_shotscore"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`shotscore {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn gradient_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for seed in ["1", "2", "3"] {
        let start = Instant::now();
        let stdout = shotscore(&["gradcheck", "--profile", "desk", "--seed", seed])?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let err: f64 = stdout
            .split_whitespace()
            .nth(3)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format!("unparsable gradcheck output: {stdout}"))?;
        ensure(
            stdout.contains("over 50 parameters"),
            format!("unexpected sample count: {stdout}"),
        )?;
        worst = worst.max(err);
    }
    ensure(worst < 1e-4, format!("max relative error {worst:e}"))?;
    ensure(slowest < 60.0, format!("gradcheck took {slowest:.1} s"))?;
    Ok(format!(
        "side 32, f64, 50 params x 3 seeds: max rel err {worst:.2e}, slowest run {slowest:.1} s"
    ))
}

fn optimizer_oracle() -> Outcome {
    // Independent reference on flat vectors.
    fn reference(w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: i32, c: &AdamConfig) {
        for i in 0..w.len() {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - c.beta1.powi(t));
            let v_hat = v[i] / (1.0 - c.beta2.powi(t));
            w[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
    }
    let config = AdamConfig::default();
    let mut rng = Rng::new(41);
    let dims = [7usize, 3];
    let mut params = vec![Tensor::<f64>::random_uniform(&dims, -1.0, 1.0, &mut rng)];
    let mut w = params[0].data().to_vec();
    let (mut m, mut v) = (vec![0.0; w.len()], vec![0.0; w.len()]);
    let mut state = AdamState::new(&params, config);
    let mut max_diff: f64 = 0.0;
    for t in 1..=100 {
        let g = Tensor::<f64>::random_uniform(&dims, -3.0, 3.0, &mut rng);
        adam_step(&mut params, std::slice::from_ref(&g), &mut state).map_err(|e| e.to_string())?;
        reference(&mut w, g.data(), &mut m, &mut v, t, &config);
        for (a, b) in params[0].data().iter().zip(&w) {
            max_diff = max_diff.max((a - b).abs());
        }
    }
    ensure(max_diff <= 1e-12, format!("max deviation {max_diff:e}"))?;
    Ok(format!("100 steps, max deviation from reference {max_diff:.1e}"))
}

fn initialization() -> Outcome {
    let mut net: Network<f64> = build_network(&NetworkConfig::standard(32, 3)).map_err(|e| e.to_string())?;
    net.glorot_init(&mut Rng::new(5));
    for (i, p) in net.params().iter().enumerate() {
        let name = &net.param_names()[i];
        if i % 2 == 1 {
            ensure(p.data().iter().all(|&b| b == 0.0), format!("{name} has a nonzero bias"))?;
        } else {
            let bound = 1.0 / (net.fan_in(i) as f64).sqrt();
            let outside = p.data().iter().filter(|w| w.abs() > bound).count();
            ensure(outside == 0, format!("{outside} weights of {name} exceed 1/sqrt(M)"))?;
        }
    }
    let mut big: Network<f64> = build_network(&NetworkConfig::standard(64, 3)).map_err(|e| e.to_string())?;
    big.glorot_init(&mut Rng::new(6));
    let n = 100_000;
    let bound = 1.0 / 16384f64.sqrt();
    let sample = &big.param("W4").ok_or("no W4")?.data()[..n];
    let mean = sample.iter().sum::<f64>() / n as f64;
    let limit = 3.0 * (bound / 3f64.sqrt()) / (n as f64).sqrt();
    ensure(mean.abs() <= limit, format!("mean {mean:e} exceeds {limit:e}"))?;
    Ok(format!(
        "all weights within bound, biases zero; mean of 1e5 = {mean:.2e} (limit {limit:.2e})"
    ))
}

fn aggregation_oracle() -> Outcome {
    let brute = |block: &[f64]| {
        let mut v = block.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let kept = &v[5..45];
        (kept.iter().map(|x| x * x).sum::<f64>() / 40.0).sqrt()
    };
    let mut rng = Rng::new(9);
    let mut max_diff: f64 = 0.0;
    for _ in 0..1000 {
        let block: Vec<f64> = (0..50).map(|_| rng.uniform(0.0, 5.0)).collect();
        let s = FrameScoreSeries::new("v", block.clone()).map_err(|e| e.to_string())?;
        let got = aggregate_shots(&s, 50).map_err(|e| e.to_string())?.scores[0];
        max_diff = max_diff.max((got - brute(&block)).abs());
    }
    ensure(max_diff <= 1e-9, format!("max deviation {max_diff:e}"))?;
    let ramp = FrameScoreSeries::new("v", (1..=50).map(f64::from).collect()).map_err(|e| e.to_string())?;
    let got = aggregate_shots(&ramp, 50).map_err(|e| e.to_string())?.scores[0];
    ensure((got - 783.5f64.sqrt()).abs() <= 1e-6, format!("1..50 gave {got}"))?;
    Ok(format!(
        "1000 random shots, max deviation {max_diff:.1e}; 1..50 -> {got:.6}"
    ))
}

fn metric_oracles() -> Outcome {
    let shots = |v: &[f64]| ShotScoreSeries {
        video_id: "v".into(),
        scores: v.to_vec(),
        shot_length: 50,
    };
    let (mae, aev) = error_metrics(&shots(&[1.0, 2.0, 3.0]), &shots(&[1.0, 1.0, 1.0])).map_err(|e| e.to_string())?;
    ensure(
        mae == 1.0 && aev == 2.0 / 3.0,
        format!("error_metrics gave ({mae}, {aev})"),
    )?;
    let same = error_metrics(&shots(&[0.5, 4.0]), &shots(&[0.5, 4.0])).map_err(|e| e.to_string())?;
    ensure(same == (0.0, 0.0), "pred == gt is not (0, 0)")?;

    let mask = |range: std::ops::Range<usize>| SummaryMask {
        selected: (0..100).map(|i| range.contains(&i)).collect(),
    };
    // 40 predicted, 50 annotated, 30 shared.
    let (pred, gt) = (mask(20..60), mask(30..80));
    let std = f_measure(&pred, &gt, FVariant::Standard).map_err(|e| e.to_string())?;
    ensure(
        (std.precision, std.recall) == (0.75, 0.6) && (std.f - 2.0 / 3.0).abs() <= f64::EPSILON,
        format!("standard gave {std:?}"),
    )?;
    let lit = f_measure(&pred, &gt, FVariant::Literal).map_err(|e| e.to_string())?;
    ensure(
        (lit.precision, lit.recall) == (0.6, 0.3) && (lit.f - 0.4).abs() <= f64::EPSILON,
        format!("literal variant gave {lit:?}"),
    )?;
    let ident = f_measure(&gt, &gt, FVariant::Standard).map_err(|e| e.to_string())?;
    ensure(ident.f == 1.0, format!("identical masks gave F {}", ident.f))?;
    for variant in [FVariant::Standard, FVariant::Literal] {
        let f = f_measure(&mask(0..10), &mask(10..20), variant).map_err(|e| e.to_string())?;
        ensure(f.f == 0.0, "disjoint masks give nonzero F")?;
    }

    let sel = select_summary(&shots(&(1..=10).map(f64::from).collect::<Vec<_>>()), 0.2).map_err(|e| e.to_string())?;
    let picked: Vec<usize> = (0..10).filter(|&i| sel.selected[i]).collect();
    ensure(picked == [8, 9], format!("selection picked {picked:?}"))?;
    let flat = select_summary(&shots(&[2.0; 10]), 0.1).map_err(|e| e.to_string())?;
    ensure(flat.count() == 1 && flat.selected[0], "tie-break is not earliest")?;
    let sm = smooth(
        &FrameScoreSeries::new("v", vec![0.0, 3.0, 0.0]).map_err(|e| e.to_string())?,
        3,
    )
    .map_err(|e| e.to_string())?;
    ensure(sm.scores == [1.5, 1.0, 1.5], format!("smooth gave {:?}", sm.scores))?;
    ensure(
        relative_f(0.5, 0.5).map_err(|e| e.to_string())? == 1.0,
        "relative F of equals",
    )?;
    Ok("error_metrics, f_measure (both variants), selection, smoothing and relative F fixtures".into())
}

struct PipelineRun {
    root: PathBuf,
    seconds: f64,
}

const PIPELINE_ARGS: [&str; 12] = [
    "--profile",
    "desk",
    "--seed",
    "7",
    "--keep-prob",
    "1.0",
    "--epochs",
    "1000",
    "--max-iterations",
    "150",
    "--batch-size",
    "16",
];

fn run_pipeline(root: &Path) -> Result<PipelineRun, String> {
    let start = Instant::now();
    let mut args = vec!["pipeline", "--out", root.to_str().ok_or("non-UTF-8 temp path")?];
    args.extend(PIPELINE_ARGS);
    shotscore(&args)?;
    Ok(PipelineRun {
        root: root.to_path_buf(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn learnability(run: &Result<PipelineRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let loss_csv = fs::read_to_string(run.root.join("train/loss.csv")).map_err(|e| e.to_string())?;
    let losses: Vec<f64> = loss_csv
        .lines()
        .skip(1)
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or(format!("bad loss row {l}"))
        })
        .collect::<Result<_, _>>()?;
    const WINDOW: usize = 10;
    let reached = (WINDOW..=losses.len().min(500))
        .find(|&end| losses[end - WINDOW..end].iter().sum::<f64>() / (WINDOW as f64) < 1e-2);
    let it = reached.ok_or_else(|| {
        let tail = &losses[losses.len().saturating_sub(WINDOW)..];
        format!(
            "10-batch mean loss never below 1e-2; last {:.4}",
            tail.iter().sum::<f64>() / tail.len() as f64
        )
    })?;
    let metrics: MetricsFile =
        serde_json::from_slice(&fs::read(run.root.join("eval/metrics.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let worst = metrics.videos.iter().map(|r| r.mae).fold(0.0, f64::max);
    ensure(metrics.mean.mae < 0.5, format!("test MAE {:.4}", metrics.mean.mae))?;
    ensure(run.seconds < 600.0, format!("pipeline took {:.0} s", run.seconds))?;
    Ok(format!(
        "10-batch mean loss < 1e-2 at iteration {it}; test MAE {:.4} (worst video {worst:.4}); pipeline {:.0} s",
        metrics.mean.mae, run.seconds
    ))
}

fn artifacts(root: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let mut files = vec![
        PathBuf::from("train/loss.csv"),
        PathBuf::from("train/checkpoint.fckp"),
        PathBuf::from("eval/metrics.json"),
        PathBuf::from("summary/summary.json"),
    ];
    let scores = root.join("predict/scores");
    let mut csvs: Vec<PathBuf> = fs::read_dir(&scores)
        .map_err(|e| e.to_string())?
        .map(|e| {
            e.map(|e| Path::new("predict/scores").join(e.file_name()))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    csvs.sort();
    ensure(!csvs.is_empty(), "no score CSVs")?;
    files.extend(csvs);
    files
        .into_iter()
        .map(|f| fs::read(root.join(&f)).map(|b| (f, b)).map_err(|e| e.to_string()))
        .collect()
}

fn determinism(a: &Result<PipelineRun, String>, b: &Result<PipelineRun, String>) -> Outcome {
    let a = a.as_ref().map_err(Clone::clone)?;
    let b = b.as_ref().map_err(Clone::clone)?;
    let fa = artifacts(&a.root)?;
    let fb = artifacts(&b.root)?;
    ensure(fa.len() == fb.len(), "different artifact sets")?;
    for ((pa, ba), (pb, bb)) in fa.iter().zip(&fb) {
        ensure(pa == pb, format!("{} vs {}", pa.display(), pb.display()))?;
        ensure(ba == bb, format!("{} differs", pa.display()))?;
    }
    Ok(format!(
        "{} artifacts byte-identical across two runs (loss log, checkpoint, score CSVs, metrics, summary)",
        fa.len()
    ))
}

fn augmentation_group() -> Outcome {
    let t = Tensor::<f64>::from_fn(&[4, 4, 1], |i| i as f64);
    let outs: Vec<Tensor<f64>> = AugmentCode::all()
        .map(|c| augment(&t, c).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    ensure(outs.len() == 8, "not 8 codes")?;
    for i in 0..8 {
        for j in 0..i {
            ensure(
                !outs[i].bit_eq(&outs[j]),
                format!("codes {} and {} coincide", j + 1, i + 1),
            )?;
        }
    }
    for c in AugmentCode::all() {
        let back = augment(&augment(&t, c).map_err(|e| e.to_string())?, c.inverse()).map_err(|e| e.to_string())?;
        ensure(
            back.bit_eq(&t),
            format!("code {} then its inverse is not identity", c.get()),
        )?;
    }
    Ok("8 distinct images; every code composed with its inverse is the identity".into())
}

fn format_roundtrips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = Rng::new(12);
    for case in 0..100 {
        let rank = 1 + rng.below(4);
        let dims: Vec<usize> = (0..rank).map(|_| 1 + rng.below(7)).collect();
        let path = dir.path().join(format!("{case}.ftns"));
        let ok = if rng.bernoulli(0.5) {
            let t = Tensor::<f32>::from_fn(&dims, |_| f32::from_bits(rng.next_u64() as u32));
            write_tensor(&t, &path).map_err(|e| e.to_string())?;
            read_tensor::<f32>(&path).map_err(|e| e.to_string())?.bit_eq(&t)
        } else {
            let t = Tensor::<f64>::from_fn(&dims, |_| f64::from_bits(rng.next_u64()));
            write_tensor(&t, &path).map_err(|e| e.to_string())?;
            read_tensor::<f64>(&path).map_err(|e| e.to_string())?.bit_eq(&t)
        };
        ensure(ok, format!("FTNS case {case} ({dims:?}) not bit-exact"))?;
    }
    for case in 0..100 {
        let config = NetworkConfig::standard(4 * (1 + rng.below(4)), 1 + rng.below(3));
        let mut net: Network<f32> = build_network(&config).map_err(|e| e.to_string())?;
        for p in net.params_mut() {
            for v in p.data_mut() {
                *v = rng.uniform(-2.0, 2.0) as f32;
            }
        }
        let path = dir.path().join(format!("{case}.fckp"));
        save_checkpoint(&net, &path).map_err(|e| e.to_string())?;
        let back: Network<f32> = load_checkpoint(&path, &config).map_err(|e| e.to_string())?;
        let same = back.params().iter().zip(net.params()).all(|(a, b)| a.bit_eq(b));
        ensure(same, format!("FCKP case {case} not bit-exact"))?;
    }
    Ok("100 FTNS tensors (random dtype, rank, bit patterns) and 100 FCKP checkpoints bit-exact".into())
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut check = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {name} ({secs:.1} s): {detail}");
        results.push((name, outcome, secs));
    };

    check("gradient fidelity", &mut gradient_fidelity);
    check("optimizer oracle", &mut optimizer_oracle);
    check("initialization", &mut initialization);
    check("aggregation oracle", &mut aggregation_oracle);
    check("metric oracles", &mut metric_oracles);
    let mut run_a = Err("pipeline not run".to_string());
    check("learnability", &mut || {
        run_a = run_pipeline(&tmp.path().join("a"));
        learnability(&run_a)
    });
    check("determinism", &mut || {
        determinism(&run_a, &run_pipeline(&tmp.path().join("b")))
    });
    check("augmentation group", &mut augmentation_group);
    check("format round-trips", &mut format_roundtrips);

    let failed = results.iter().filter(|r| r.1.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
