//! Synthetic stand-in dataset whose shot importance is a known function of
//! frame brightness.
//!
//! Each shot gets a base brightness `b ∈ [0.15, 0.85]`; frames jitter around
//! it by at most `jitter` and carry a zero-mean texture of peak amplitude
//! `texture`, so a frame's mean intensity equals its latent brightness. Shot
//! scores are `L·b` aggregated with the same trimmed-RMS rule used for
//! predictions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_annotations, write_manifest, AnnotationRow, Manifest, ManifestVideo, VideoDataset, SHOT_LENGTH};
use crate::error::{Error, Result};
use crate::io::write_tensor;
use crate::network::ScoreScale;
use crate::rng::Rng;
use crate::scoring::trimmed_rms;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_videos: usize,
    pub frames_per_video: usize,
    pub side: usize,
    pub score_scale: ScoreScale,
    pub texture: f64,
    pub jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_videos: 8,
            frames_per_video: 250,
            side: 40,
            score_scale: ScoreScale::default(),
            texture: 0.1,
            jitter: 0.02,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames_per_video == 0 {
            return Err(Error::config("frames_per_video", "must be positive"));
        }
        if self.side == 0 {
            return Err(Error::config("side", "must be positive"));
        }
        if !(0.0..=0.1).contains(&self.texture) {
            return Err(Error::config("texture", "must lie in [0, 0.1]"));
        }
        if !(0.0..=0.05).contains(&self.jitter) {
            return Err(Error::config("jitter", "must lie in [0, 0.05]"));
        }
        Ok(())
    }

    /// Genre count: groups of five, assigned round-robin.
    pub fn genres(&self) -> usize {
        self.n_videos.div_ceil(5).max(1)
    }
}

/// A `side×side×3` frame with mean intensity `brightness` (up to rounding)
/// and a zero-mean random texture of peak amplitude `texture`.
pub fn synth_frame(brightness: f64, side: usize, texture: f64, rng: &mut Rng) -> Tensor<f32> {
    let n = side * side * 3;
    let mut noise: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let mean = noise.iter().sum::<f64>() / n as f64;
    noise.iter_mut().for_each(|v| *v -= mean);
    let peak = noise.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k = if peak > 0.0 { texture / peak } else { 0.0 };
    let data = noise.iter().map(|v| (brightness + k * v) as f32).collect();
    Tensor::new(vec![side, side, 3], data).expect("valid dims")
}

/// Per-frame latent brightness for every video.
pub fn synth_latents(config: &SynthConfig, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..config.n_videos)
        .map(|_| {
            let shots = config.frames_per_video.div_ceil(SHOT_LENGTH);
            let bases: Vec<f64> = (0..shots).map(|_| rng.uniform(0.15, 0.85)).collect();
            (0..config.frames_per_video)
                .map(|f| bases[f / SHOT_LENGTH] + rng.uniform(-config.jitter, config.jitter))
                .collect()
        })
        .collect()
}

/// Shot scores implied by per-frame latent brightness.
pub fn latent_shot_scores(latent: &[f64], scale: ScoreScale) -> Vec<f64> {
    latent
        .chunks(SHOT_LENGTH)
        .map(|block| {
            let scaled: Vec<f64> = block.iter().map(|b| scale.max() * b).collect();
            trimmed_rms(&scaled).min(scale.max())
        })
        .collect()
}

/// Writes `manifest.json`, `annotations.csv` and `frames/<video>/<index>.ftns`
/// under `out_dir` and returns the ingested dataset.
pub fn synth_generate(config: &SynthConfig, out_dir: &Path, rng: &mut Rng) -> Result<VideoDataset> {
    config.validate()?;
    let latents = synth_latents(config, rng);
    let genres = config.genres();
    let mut manifest = Manifest {
        score_scale: config.score_scale.get(),
        videos: Vec::with_capacity(config.n_videos),
    };
    let mut rows = Vec::new();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (v, latent) in latents.iter().enumerate() {
        let video_id = format!("v{v:03}");
        let dir = out_dir.join("frames").join(&video_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut frames = Vec::with_capacity(latent.len());
        for (f, &b) in latent.iter().enumerate() {
            let frame = synth_frame(b, config.side, config.texture, rng);
            write_tensor(&frame, dir.join(format!("{f:05}.ftns")))?;
            frames.push(format!("frames/{video_id}/{f:05}.ftns"));
        }
        for (shot, score) in latent_shot_scores(latent, config.score_scale).into_iter().enumerate() {
            rows.push(AnnotationRow {
                video_id: video_id.clone(),
                shot_index: shot,
                score,
            });
        }
        manifest.videos.push(ManifestVideo {
            video_id,
            genre: format!("g{}", v % genres),
            frames,
        });
    }
    let manifest_path = out_dir.join("manifest.json");
    let annotations_path = out_dir.join("annotations.csv");
    write_manifest(&manifest, &manifest_path)?;
    write_annotations(&rows, &annotations_path)?;
    super::ingest(&manifest_path, &annotations_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_mean_is_brightness() {
        let mut rng = Rng::new(2);
        for b in [0.15, 0.5, 0.85] {
            let f = synth_frame(b, 12, 0.1, &mut rng);
            assert!((f.mean() - b).abs() < 1e-6);
            assert!(f.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn uniform_brightness_scores() {
        let scale = ScoreScale::default();
        let latent = vec![0.4; 120];
        let scores = latent_shot_scores(&latent, scale);
        assert_eq!(scores.len(), 3);
        assert!(scores.iter().all(|&s| (s - 2.0).abs() < 1e-6));
    }

    #[test]
    fn generated_files_ingest_and_repeat() {
        let cfg = SynthConfig {
            n_videos: 2,
            frames_per_video: 60,
            side: 8,
            ..Default::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ds = synth_generate(&cfg, a.path(), &mut Rng::new(5)).unwrap();
        synth_generate(&cfg, b.path(), &mut Rng::new(5)).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.videos[0].shot_scores.len(), 2);
        for rel in ["manifest.json", "annotations.csv", "frames/v001/00059.ftns"] {
            assert_eq!(
                fs::read(a.path().join(rel)).unwrap(),
                fs::read(b.path().join(rel)).unwrap(),
                "{rel}"
            );
        }
    }

    #[test]
    fn zero_videos_gives_empty_dataset() {
        let cfg = SynthConfig {
            n_videos: 0,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_generate(&cfg, dir.path(), &mut Rng::new(0)).unwrap();
        assert!(ds.is_empty());
    }
}
