//! Flat key-value run configuration.
//!
//! Values resolve in three layers: the profile's defaults, then the
//! `--config` TOML file, then command-line flags. The merged result is
//! archived as `run_config.toml` in every output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shotscore::datapipe::{SplitConfig, SynthConfig};
use shotscore::network::{NetworkConfig, ScoreScale};
use shotscore::scoring::{EvalConfig, FVariant};
use shotscore::training::{AdamConfig, TrainConfig};
use shotscore::{Error, Result};

pub const RUN_CONFIG_FILE: &str = "run_config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 284→256 frames, full-size runs.
    Full,
    /// 36→32 frames for laptop-scale runs.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub seed: u64,

    pub input_side: usize,
    pub resize_side: usize,
    pub keep_prob: f64,

    pub epochs: usize,
    pub batch_size: usize,
    /// 0 means no cap beyond `epochs`.
    pub max_iterations: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub augment: bool,
    pub checkpoint_every: usize,

    pub train_fraction: f64,
    pub min_train_per_genre: usize,
    pub min_test_per_genre: usize,

    pub shot_length: usize,
    /// 1 disables smoothing.
    pub smooth_window: usize,
    pub summary_fraction: f64,
    pub f_variant: FVariant,
    pub f_reference: f64,

    pub synth_videos: usize,
    pub synth_frames: usize,
    pub synth_side: usize,
    pub synth_score_scale: u32,

    pub gradcheck_params: usize,
    pub gradcheck_tolerance: f64,

    pub out: PathBuf,
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (input_side, resize_side) = match profile {
            Profile::Full => (256, 284),
            Profile::Desk => (32, 36),
        };
        let adam = AdamConfig::default();
        Self {
            profile,
            seed: 0,
            input_side,
            resize_side,
            keep_prob: shotscore::network::KEEP_PROB,
            epochs: 10,
            batch_size: shotscore::training::DEFAULT_BATCH_SIZE,
            max_iterations: 0,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            augment: true,
            checkpoint_every: 0,
            train_fraction: 0.7,
            min_train_per_genre: 3,
            min_test_per_genre: 1,
            shot_length: shotscore::scoring::DEFAULT_SHOT_LENGTH,
            smooth_window: 1,
            summary_fraction: shotscore::scoring::DEFAULT_SUMMARY_FRACTION,
            f_variant: FVariant::Literal,
            f_reference: 1.0,
            synth_videos: 8,
            synth_frames: 250,
            synth_side: 40,
            synth_score_scale: 5,
            gradcheck_params: 50,
            gradcheck_tolerance: 1e-4,
            out: PathBuf::from("out"),
        }
    }

    /// Profile defaults overlaid with the keys present in `text`. A
    /// `profile` key in the file selects the base unless `profile`
    /// overrides it.
    pub fn from_toml(text: &str, path: &Path, profile: Option<Profile>) -> Result<Self> {
        let parse = |e: toml::de::Error| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file: toml::Table = toml::from_str(text).map_err(parse)?;
        let file_profile = match file.get("profile") {
            Some(v) => Some(
                v.clone()
                    .try_into::<Profile>()
                    .map_err(|_| Error::config("profile", format!("unknown profile {v}")))?,
            ),
            None => None,
        };
        let base = Self::for_profile(profile.or(file_profile).unwrap_or(Profile::Full));
        let mut merged = toml::Table::try_from(&base).expect("config serializes");
        merged.extend(file);
        if let Some(p) = profile {
            merged.insert("profile".into(), toml::Value::try_from(p).expect("profile serializes"));
        }
        merged.try_into().map_err(|e: toml::de::Error| Error::Config {
            field: "config".into(),
            message: format!("{}: {e}", path.display()),
        })
    }

    pub fn load(path: Option<&Path>, profile: Option<Profile>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml(&text, p, profile)
            }
            None => Ok(Self::for_profile(profile.unwrap_or(Profile::Full))),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every module's preconditions before any work starts.
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| Err(Error::config(field, msg));
        if self.input_side == 0 || !self.input_side.is_multiple_of(4) {
            return fail(
                "input_side",
                format!("{} must be a positive multiple of 4", self.input_side),
            );
        }
        if self.resize_side < self.input_side {
            return fail(
                "resize_side",
                format!("{} is smaller than input_side {}", self.resize_side, self.input_side),
            );
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return fail("keep_prob", format!("{} outside (0, 1]", self.keep_prob));
        }
        self.train_config().validate()?;
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return fail("train_fraction", format!("{} outside [0, 1]", self.train_fraction));
        }
        if self.shot_length == 0 {
            return fail("shot_length", "must be positive".into());
        }
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return fail(
                "smooth_window",
                format!("{} must be odd and positive", self.smooth_window),
            );
        }
        if !(self.summary_fraction > 0.0 && self.summary_fraction < 1.0) {
            return fail("summary_fraction", format!("{} outside (0, 1)", self.summary_fraction));
        }
        if self.f_reference.is_nan() || self.f_reference <= 0.0 {
            return fail("f_reference", format!("{} must be positive", self.f_reference));
        }
        if self.gradcheck_params == 0 {
            return fail("gradcheck_params", "must be positive".into());
        }
        if self.gradcheck_tolerance.is_nan() || self.gradcheck_tolerance <= 0.0 {
            return fail("gradcheck_tolerance", "must be positive".into());
        }
        ScoreScale::new(self.synth_score_scale)
            .map_err(|_| Error::config("synth_score_scale", "must be at least 1"))?;
        self.synth_config().validate()
    }

    pub fn network_config(&self, score_scale: ScoreScale) -> NetworkConfig {
        NetworkConfig::standard(self.input_side, 3)
            .with_keep_prob(self.keep_prob)
            .with_score_scale(score_scale)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            checkpoint_every: self.checkpoint_every,
            max_iterations: (self.max_iterations > 0).then_some(self.max_iterations),
            augment: self.augment,
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_fraction: self.train_fraction,
            min_train_per_genre: self.min_train_per_genre,
            min_test_per_genre: self.min_test_per_genre,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            shot_length: self.shot_length,
            summary_fraction: self.summary_fraction,
            variant: self.f_variant,
            f_reference: self.f_reference,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_videos: self.synth_videos,
            frames_per_video: self.synth_frames,
            side: self.synth_side,
            score_scale: ScoreScale::new(self.synth_score_scale).unwrap_or_default(),
            ..SynthConfig::default()
        }
    }
}
