//! Subcommand implementations. Each validates its resolved config before
//! touching the filesystem and writes only under `config.out`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shotscore::datapipe::{
    ingest, preprocess, sample_training_frames, split, synth_generate, VideoDataset, VideoRecord,
};
use shotscore::io::read_tensor;
use shotscore::network::{load_checkpoint, save_checkpoint};
use shotscore::scoring::{
    aggregate_shots, evaluate_video, mean_report, select_summary, smooth, FVariant, FrameScoreSeries, MetricsReport,
};
use shotscore::training::{gradcheck, train, GradcheckReport, TrainRun, TrainSample};
use shotscore::{build_network, Error, Network, Result, Rng, ScoreScale, Tensor};

use crate::args::{Cli, Command};
use crate::config::{RunConfig, RUN_CONFIG_FILE};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const LOSS_FILE: &str = "loss.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.fckp";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const SPLIT_FILE: &str = "split.json";
pub const SCORES_DIR: &str = "scores";
pub const METRICS_FILE: &str = "metrics.json";
pub const SUMMARY_FILE: &str = "summary.json";

// Independent RNG streams per stage, so that e.g. predict can rebuild the
// training split without replaying synthesis or training draws.
const STREAM_SYNTH: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_GRADCHECK: u64 = 4;

pub fn dispatch(cli: Cli) -> Result<()> {
    let cfg = cli.command.common().resolve()?;
    match cli.command {
        Command::Synth { .. } => {
            let ds = cmd_synth(&cfg)?;
            println!("wrote {} videos to {}", ds.len(), cfg.out.display());
        }
        Command::Train { data, .. } => {
            let run = cmd_train(&cfg, &data)?;
            let last = run.log.last().map_or(f64::NAN, |e| e.batch_loss);
            println!("trained {} iterations, final batch loss {last}", run.log.len());
        }
        Command::Predict {
            data, checkpoint, all, ..
        } => {
            let written = cmd_predict(&cfg, &data, &checkpoint, all)?;
            println!(
                "scored {} videos into {}",
                written.len(),
                cfg.out.join(SCORES_DIR).display()
            );
        }
        Command::Evaluate { scores, .. } => print_metrics(&cmd_evaluate(&cfg, &scores)?),
        Command::Summarize { scores, .. } => {
            let s = cmd_summarize(&cfg, &scores)?;
            for v in &s.videos {
                println!("{}: {} of {} shots", v.video_id, v.count, v.selected.len());
            }
        }
        Command::Gradcheck { .. } => {
            let report = cmd_gradcheck(&cfg)?;
            println!(
                "max relative error {:e} over {} parameters ({} kink-crossing draws redrawn)",
                report.max_rel_error,
                report.entries.len(),
                report.redrawn
            );
        }
        Command::Pipeline { .. } => print_metrics(&cmd_pipeline(&cfg)?),
    }
    Ok(())
}

fn print_metrics(m: &MetricsFile) {
    for r in m.videos.iter().chain(std::iter::once(&m.mean)) {
        println!(
            "{:>8}  MAE {:.4}  AEV {:.4}  F {:.4}  relative F {:.4}",
            r.video_id, r.mae, r.aev, r.f_measure, r.relative_f
        );
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    write_file(path, text)
}

/// Creates the output root and archives the resolved config in it.
fn prepare_out(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join(RUN_CONFIG_FILE), cfg.to_toml())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub fn load_dataset(data: &Path) -> Result<VideoDataset> {
    ingest(data.join(MANIFEST_FILE), data.join(ANNOTATIONS_FILE))
}

fn load_frame(cfg: &RunConfig, path: &Path) -> Result<Tensor<f32>> {
    preprocess(&read_tensor::<f32>(path)?, cfg.resize_side, cfg.input_side)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn split_dataset(cfg: &RunConfig, ds: &VideoDataset) -> Result<(VideoDataset, VideoDataset)> {
    split(ds, &cfg.split_config(), &mut Rng::new(cfg.seed).fork(STREAM_SPLIT))
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<VideoDataset> {
    cfg.validate()?;
    prepare_out(cfg)?;
    synth_generate(
        &cfg.synth_config(),
        &cfg.out,
        &mut Rng::new(cfg.seed).fork(STREAM_SYNTH),
    )
}

pub fn cmd_train(cfg: &RunConfig, data: &Path) -> Result<TrainRun> {
    cfg.validate()?;
    let ds = load_dataset(data)?;
    let (train_ds, test_ds) = split_dataset(cfg, &ds)?;
    let mut net: Network<f32> = build_network(&cfg.network_config(ds.score_scale))?;

    let picks: Vec<(&VideoRecord, usize, f64)> = train_ds
        .videos
        .iter()
        .flat_map(|v| sample_training_frames(v).into_iter().map(move |(i, t)| (v, i, t)))
        .collect();
    let samples = picks
        .par_iter()
        .map(|&(v, i, t)| {
            Ok(TrainSample {
                frame: load_frame(cfg, &v.frames[i])?,
                target: t as f32,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    prepare_out(cfg)?;
    let ids = |d: &VideoDataset| d.ids().into_iter().map(String::from).collect();
    write_json(
        &cfg.out.join(SPLIT_FILE),
        &SplitFile {
            train: ids(&train_ds),
            test: ids(&test_ds),
        },
    )?;

    net.glorot_init(&mut Rng::new(cfg.seed).fork(STREAM_INIT));
    let periodic = cfg.out.join(CHECKPOINT_DIR);
    let every = cfg.checkpoint_every;
    let run = train(
        &mut net,
        &samples,
        &cfg.train_config(),
        &mut Rng::new(cfg.seed).fork(STREAM_TRAIN),
        |iteration, net| {
            if every > 0 && iteration % every == 0 {
                create_dir(&periodic)?;
                save_checkpoint(net, periodic.join(format!("iter_{iteration:06}.fckp")))?;
            }
            Ok(())
        },
    )?;

    let loss_path = cfg.out.join(LOSS_FILE);
    let mut w = csv::Writer::from_path(&loss_path).map_err(|e| csv_error(&loss_path, e))?;
    if run.log.is_empty() {
        w.write_record(["iteration", "epoch", "batch_loss"])
            .map_err(|e| csv_error(&loss_path, e))?;
    }
    for entry in &run.log {
        w.serialize(entry).map_err(|e| csv_error(&loss_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&loss_path, e))?;
    save_checkpoint(&net, cfg.out.join(CHECKPOINT_FILE))?;
    Ok(run)
}

/// One line of a per-video score CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub frame_index: usize,
    pub predicted: f64,
    pub smoothed: f64,
    pub ground_truth: f64,
}

pub fn cmd_predict(cfg: &RunConfig, data: &Path, checkpoint: &Path, all: bool) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ds = load_dataset(data)?;
    let targets = if all { ds.clone() } else { split_dataset(cfg, &ds)?.1 };
    let net: Network<f32> = load_checkpoint(checkpoint, &cfg.network_config(ds.score_scale))?;

    prepare_out(cfg)?;
    let dir = cfg.out.join(SCORES_DIR);
    create_dir(&dir)?;
    let mut written = Vec::with_capacity(targets.len());
    for v in &targets.videos {
        let predicted = v
            .frames
            .par_iter()
            .map(|p| Ok(net.predict(&load_frame(cfg, p)?)? as f64))
            .collect::<Result<Vec<_>>>()?;
        let smoothed = smooth(
            &FrameScoreSeries::new(&v.video_id, predicted.clone())?,
            cfg.smooth_window,
        )?;
        let path = dir.join(format!("{}.csv", v.video_id));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        for (i, (&p, &s)) in predicted.iter().zip(&smoothed.scores).enumerate() {
            w.serialize(ScoreRow {
                frame_index: i,
                predicted: p,
                smoothed: s,
                ground_truth: v.frame_target(i),
            })
            .map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// The scored columns of one per-video CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub video_id: String,
    pub smoothed: Vec<f64>,
    pub ground_truth: Vec<f64>,
}

/// Every `*.csv` in `dir`, sorted by video id.
pub fn read_score_dir(dir: &Path) -> Result<Vec<ScoreFile>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Validation(format!("no score CSVs in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|path| {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let mut r = csv::Reader::from_path(&path).map_err(|e| csv_error(&path, e))?;
            let mut pred = Vec::new();
            let mut gt = Vec::new();
            for (i, row) in r.deserialize::<ScoreRow>().enumerate() {
                let row = row.map_err(|e| csv_error(&path, e))?;
                if row.frame_index != i {
                    return Err(Error::Parse {
                        path: path.clone(),
                        message: format!("row {i} has frame_index {}", row.frame_index),
                    });
                }
                pred.push(row.smoothed);
                gt.push(row.ground_truth);
            }
            Ok(ScoreFile {
                video_id: id,
                smoothed: pred,
                ground_truth: gt,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub variant: FVariant,
    pub shot_length: usize,
    pub summary_fraction: f64,
    pub f_reference: f64,
    pub videos: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

pub fn cmd_evaluate(cfg: &RunConfig, scores: &Path) -> Result<MetricsFile> {
    cfg.validate()?;
    let series = read_score_dir(scores)?;
    let eval = cfg.eval_config();
    let videos = series
        .par_iter()
        .map(|f| {
            evaluate_video(
                &FrameScoreSeries::new(&f.video_id, f.smoothed.clone())?,
                &FrameScoreSeries::new(&f.video_id, f.ground_truth.clone())?,
                &eval,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let out = MetricsFile {
        variant: eval.variant,
        shot_length: eval.shot_length,
        summary_fraction: eval.summary_fraction,
        f_reference: eval.f_reference,
        mean: mean_report(&videos, eval.variant),
        videos,
    };
    prepare_out(cfg)?;
    write_json(&cfg.out.join(METRICS_FILE), &out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub shot_scores: Vec<f64>,
    pub selected: Vec<bool>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub shot_length: usize,
    pub summary_fraction: f64,
    pub videos: Vec<VideoSummary>,
}

pub fn cmd_summarize(cfg: &RunConfig, scores: &Path) -> Result<SummaryFile> {
    cfg.validate()?;
    let videos = read_score_dir(scores)?
        .into_iter()
        .map(|f| {
            let shots = aggregate_shots(&FrameScoreSeries::new(&f.video_id, f.smoothed)?, cfg.shot_length)?;
            let mask = select_summary(&shots, cfg.summary_fraction)?;
            Ok(VideoSummary {
                video_id: f.video_id,
                count: mask.count(),
                selected: mask.selected,
                shot_scores: shots.scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = SummaryFile {
        shot_length: cfg.shot_length,
        summary_fraction: cfg.summary_fraction,
        videos,
    };
    prepare_out(cfg)?;
    write_json(&cfg.out.join(SUMMARY_FILE), &out)?;
    Ok(out)
}

/// Gradient check on a freshly initialized 64-bit network at
/// `input_side`, with a random frame, a random target and pinned dropout
/// masks. Fails with a numeric error above `gradcheck_tolerance`.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<GradcheckReport> {
    cfg.validate()?;
    let scale = ScoreScale::new(cfg.synth_score_scale)?;
    let mut net: Network<f64> = build_network(&cfg.network_config(scale))?;
    let mut rng = Rng::new(cfg.seed).fork(STREAM_GRADCHECK);
    net.glorot_init(&mut rng);
    let frame = Tensor::random_uniform(&net.config().input_dims(), 0.0, 1.0, &mut rng);
    let target = rng.uniform(0.0, scale.max());
    let masks = net.sample_masks(&mut rng);
    let report = gradcheck(&net, &frame, target, cfg.gradcheck_params, Some(&masks), &mut rng)?;
    if !report.passed(cfg.gradcheck_tolerance) {
        let worst = report
            .worst()
            .map(|e| format!(" at {}[{}]", e.param, e.index))
            .unwrap_or_default();
        return Err(Error::Numeric(format!(
            "max relative error {:e}{worst} exceeds tolerance {:e}",
            report.max_rel_error, cfg.gradcheck_tolerance
        )));
    }
    Ok(report)
}

/// Runs every stage into `data/`, `train/`, `predict/`, `eval/` and
/// `summary/` under the output root.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<MetricsFile> {
    cfg.validate()?;
    let stage = |name: &str| RunConfig {
        out: cfg.out.join(name),
        ..cfg.clone()
    };
    prepare_out(cfg)?;
    let data = stage("data");
    cmd_synth(&data)?;
    let trained = stage("train");
    cmd_train(&trained, &data.out)?;
    let predicted = stage("predict");
    cmd_predict(&predicted, &data.out, &trained.out.join(CHECKPOINT_FILE), false)?;
    let scores = predicted.out.join(SCORES_DIR);
    cmd_summarize(&stage("summary"), &scores)?;
    cmd_evaluate(&stage("eval"), &scores)
}
