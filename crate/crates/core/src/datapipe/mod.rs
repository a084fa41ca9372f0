//! Dataset manifests, ground truth, frame sampling, preprocessing,
//! augmentation and the synthetic stand-in dataset.
//!
//! Manifest (`manifest.json`):
//!
//! ```json
//! {"score_scale": 5, "videos": [{"video_id": "v000", "genre": "g0", "frames": ["frames/v000/00000.ftns"]}]}
//! ```
//!
//! Annotations (`annotations.csv`) carry one row per shot:
//! `video_id,shot_index,score` with 0-based `shot_index`. Relative frame
//! paths resolve against the manifest's directory.

mod augment;
mod preprocess;
mod split;
mod synth;

pub use augment::{augment, AugmentCode};
pub use preprocess::{bilinear_resize, center_crop, preprocess};
pub use split::{split, SplitConfig};
pub use synth::{synth_frame, synth_generate, SynthConfig};

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DatasetError, Error, Result};
use crate::network::ScoreScale;

/// Frames per ground-truth shot.
pub const SHOT_LENGTH: usize = 50;
/// One training frame is taken from each strip of this many frames.
pub const TRAIN_FRAME_STRIDE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub genre: String,
    pub frames: Vec<PathBuf>,
    pub shot_scores: Vec<f64>,
}

impl VideoRecord {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Ground-truth score of the shot containing `frame`.
    pub fn frame_target(&self, frame: usize) -> f64 {
        self.shot_scores[frame / SHOT_LENGTH]
    }

    fn validate(&self, scale: ScoreScale) -> Result<(), DatasetError> {
        if self.frames.is_empty() {
            return Err(DatasetError::EmptyVideo {
                video_id: self.video_id.clone(),
            });
        }
        let expected = self.frames.len().div_ceil(SHOT_LENGTH);
        if self.shot_scores.len() != expected {
            return Err(DatasetError::ShotCount {
                video_id: self.video_id.clone(),
                frames: self.frames.len(),
                expected,
                found: self.shot_scores.len(),
            });
        }
        check_scores(&self.video_id, &self.shot_scores, scale)
    }
}

fn check_scores(video_id: &str, scores: &[f64], scale: ScoreScale) -> Result<(), DatasetError> {
    for (shot, &score) in scores.iter().enumerate() {
        if !(0.0..=scale.max()).contains(&score) {
            return Err(DatasetError::ScoreRange {
                video_id: video_id.to_string(),
                shot,
                score,
                max: scale.max(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoDataset {
    pub videos: Vec<VideoRecord>,
    pub score_scale: ScoreScale,
}

impl VideoDataset {
    pub fn new(videos: Vec<VideoRecord>, score_scale: ScoreScale) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &videos {
            if !seen.insert(v.video_id.as_str()) {
                return Err(DatasetError::DuplicateVideo(v.video_id.clone()).into());
            }
            v.validate(score_scale)?;
        }
        Ok(Self { videos, score_scale })
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn video(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.video_id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.videos.iter().map(|v| v.video_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub score_scale: u32,
    pub videos: Vec<ManifestVideo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub video_id: String,
    pub genre: String,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub video_id: String,
    pub shot_index: usize,
    pub score: f64,
}

fn parse_error(path: &Path, message: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e))
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_error(path, e))?;
    let headers = reader.headers().map_err(|e| parse_error(path, e))?;
    if headers != vec!["video_id", "shot_index", "score"] {
        return Err(parse_error(
            path,
            format!("expected header video_id,shot_index,score, got {headers:?}"),
        ));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| parse_error(path, e)))
        .collect()
}

/// Joins a manifest with its annotation table and validates the result.
pub fn ingest(manifest_path: impl AsRef<Path>, annotations_path: impl AsRef<Path>) -> Result<VideoDataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    let rows = read_annotations(annotations_path.as_ref())?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let scale = ScoreScale::new(manifest.score_scale)?;

    let mut shots: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for v in &manifest.videos {
        if shots.insert(v.video_id.clone(), BTreeMap::new()).is_some() {
            return Err(DatasetError::DuplicateVideo(v.video_id.clone()).into());
        }
    }
    for row in &rows {
        let per_video = shots
            .get_mut(&row.video_id)
            .ok_or_else(|| DatasetError::UnknownVideo(row.video_id.clone()))?;
        check_scores(&row.video_id, &[row.score], scale).map_err(|e| match e {
            DatasetError::ScoreRange {
                video_id, score, max, ..
            } => DatasetError::ScoreRange {
                video_id,
                shot: row.shot_index,
                score,
                max,
            },
            other => other,
        })?;
        if per_video.insert(row.shot_index, row.score).is_some() {
            return Err(DatasetError::DuplicateShot {
                video_id: row.video_id.clone(),
                shot: row.shot_index,
            }
            .into());
        }
    }

    let mut videos = Vec::with_capacity(manifest.videos.len());
    for v in manifest.videos {
        let scored = shots.remove(&v.video_id).unwrap_or_default();
        let expected = v.frames.len().div_ceil(SHOT_LENGTH);
        let contiguous = scored.keys().copied().eq(0..scored.len());
        if scored.len() != expected || !contiguous {
            return Err(DatasetError::ShotCount {
                video_id: v.video_id,
                frames: v.frames.len(),
                expected,
                found: scored.len(),
            }
            .into());
        }
        videos.push(VideoRecord {
            frames: v.frames.iter().map(|f| base.join(f)).collect(),
            shot_scores: scored.into_values().collect(),
            video_id: v.video_id,
            genre: v.genre,
        });
    }
    VideoDataset::new(videos, scale)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_annotations(rows: &[AnnotationRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_error(path, e))?;
    // An empty table still carries its header.
    if rows.is_empty() {
        w.write_record(["video_id", "shot_index", "score"])
            .map_err(|e| parse_error(path, e))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| parse_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Training frame indices (first frame of every 5-frame strip) paired with
/// the ground-truth score of their shot.
pub fn sample_training_frames(video: &VideoRecord) -> Vec<(usize, f64)> {
    (0..video.frame_count())
        .step_by(TRAIN_FRAME_STRIDE)
        .map(|i| (i, video.frame_target(i)))
        .collect()
}
