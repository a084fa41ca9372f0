//! Frame-to-shot aggregation, error metrics, summary selection and
//! F-measure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SHOT_LENGTH: usize = 50;
pub const DEFAULT_SMOOTH_WINDOW: usize = 5;
pub const DEFAULT_SUMMARY_FRACTION: f64 = 0.15;
/// Fraction of each block discarded from each end before the RMS.
pub const TRIM_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScoreSeries {
    pub video_id: String,
    pub scores: Vec<f64>,
}

impl FrameScoreSeries {
    pub fn new(video_id: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let video_id = video_id.into();
        if scores.is_empty() {
            return Err(Error::Validation(format!("frame series `{video_id}` is empty")));
        }
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "frame series `{video_id}` has non-finite score at frame {i}"
            )));
        }
        Ok(Self { video_id, scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotScoreSeries {
    pub video_id: String,
    pub scores: Vec<f64>,
    pub shot_length: usize,
}

impl ShotScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryMask {
    pub selected: Vec<bool>,
}

impl SummaryMask {
    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn fraction(&self) -> f64 {
        if self.selected.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.len() as f64
        }
    }
}

/// Which precision/recall definitions feed the F-measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FVariant {
    /// precision = matched/|gt|, recall = matched/total.
    #[serde(rename = "paper")]
    Literal,
    /// precision = matched/|pred|, recall = matched/|gt|.
    Standard,
}

impl fmt::Display for FVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FVariant::Literal => "paper",
            FVariant::Standard => "standard",
        })
    }
}

impl FromStr for FVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(FVariant::Literal),
            "standard" => Ok(FVariant::Standard),
            other => Err(Error::config(
                "f_variant",
                format!("`{other}` is not one of paper, standard"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScores {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub video_id: String,
    pub variant: FVariant,
    pub mae: f64,
    pub aev: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub relative_f: f64,
}

/// Centered moving average; windows shrink at the series ends.
pub fn smooth(series: &FrameScoreSeries, window: usize) -> Result<FrameScoreSeries> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::config(
            "smooth_window",
            format!("{window} must be odd and positive"),
        ));
    }
    let half = window / 2;
    let s = &series.scores;
    let n = s.len();
    let scores = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            s[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    Ok(FrameScoreSeries {
        video_id: series.video_id.clone(),
        scores,
    })
}

/// RMS of a block after dropping the `floor(0.1·n)` smallest and largest
/// values.
pub fn trimmed_rms(block: &[f64]) -> f64 {
    if block.is_empty() {
        return 0.0;
    }
    let mut sorted = block.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (TRIM_FRACTION * block.len() as f64).floor() as usize;
    let kept = &sorted[k..sorted.len() - k];
    (kept.iter().map(|v| v * v).sum::<f64>() / kept.len() as f64).sqrt()
}

/// One trimmed-RMS score per consecutive block of `shot_length` frames; a
/// shorter final block is aggregated on its own.
pub fn aggregate_shots(series: &FrameScoreSeries, shot_length: usize) -> Result<ShotScoreSeries> {
    if shot_length == 0 {
        return Err(Error::config("shot_length", "must be positive"));
    }
    if series.scores.is_empty() {
        return Err(Error::Validation(format!(
            "frame series `{}` is empty",
            series.video_id
        )));
    }
    Ok(ShotScoreSeries {
        video_id: series.video_id.clone(),
        scores: series.scores.chunks(shot_length).map(trimmed_rms).collect(),
        shot_length,
    })
}

fn check_lengths(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

/// `(MAE, AEV)` of per-shot absolute errors; AEV uses the population
/// variance.
pub fn error_metrics(pred: &ShotScoreSeries, gt: &ShotScoreSeries) -> Result<(f64, f64)> {
    check_lengths("error_metrics", pred.len(), gt.len())?;
    if pred.is_empty() {
        return Err(Error::Validation("error_metrics on empty series".into()));
    }
    let errors: Vec<f64> = pred.scores.iter().zip(&gt.scores).map(|(p, g)| (p - g).abs()).collect();
    let n = errors.len() as f64;
    let mae = errors.iter().sum::<f64>() / n;
    let aev = errors.iter().map(|e| (e - mae).powi(2)).sum::<f64>() / n;
    Ok((mae, aev))
}

/// Selects the `round(fraction · n)` highest-scoring shots: everything
/// strictly above the threshold score, with ties at the threshold resolved
/// in favour of earlier shots.
pub fn select_summary(shots: &ShotScoreSeries, fraction: f64) -> Result<SummaryMask> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config("summary_fraction", format!("{fraction} outside (0, 1)")));
    }
    let n = shots.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| shots.scores[b].total_cmp(&shots.scores[a]).then(a.cmp(&b)));
    let mut selected = vec![false; n];
    for &i in &order[..k] {
        selected[i] = true;
    }
    Ok(SummaryMask { selected })
}

fn harmonic(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f_measure(pred: &SummaryMask, gt: &SummaryMask, variant: FVariant) -> Result<FScores> {
    check_lengths("f_measure", pred.len(), gt.len())?;
    let matched = pred.selected.iter().zip(&gt.selected).filter(|(&p, &g)| p && g).count();
    let (precision, recall) = match variant {
        FVariant::Standard => (ratio(matched, pred.count()), ratio(matched, gt.count())),
        FVariant::Literal => (ratio(matched, gt.count()), ratio(matched, gt.len())),
    };
    Ok(FScores {
        precision,
        recall,
        f: harmonic(precision, recall),
    })
}

/// F-measure normalized by an externally supplied reference F.
pub fn relative_f(f_method: f64, f_reference: f64) -> Result<f64> {
    if f_reference.is_nan() || f_reference <= 0.0 {
        return Err(Error::config("f_reference", format!("{f_reference} must be positive")));
    }
    Ok(f_method / f_reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub shot_length: usize,
    pub summary_fraction: f64,
    pub variant: FVariant,
    pub f_reference: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            shot_length: DEFAULT_SHOT_LENGTH,
            summary_fraction: DEFAULT_SUMMARY_FRACTION,
            variant: FVariant::Literal,
            f_reference: 1.0,
        }
    }
}

/// Full per-video evaluation of predicted against ground-truth frame
/// scores: both are aggregated to shots, compared, and summarized.
pub fn evaluate_video(
    predicted: &FrameScoreSeries,
    ground_truth: &FrameScoreSeries,
    config: &EvalConfig,
) -> Result<MetricsReport> {
    check_lengths("evaluate_video", predicted.len(), ground_truth.len())?;
    let pred = aggregate_shots(predicted, config.shot_length)?;
    let gt = aggregate_shots(ground_truth, config.shot_length)?;
    let (mae, aev) = error_metrics(&pred, &gt)?;
    let pm = select_summary(&pred, config.summary_fraction)?;
    let gm = select_summary(&gt, config.summary_fraction)?;
    let fs = f_measure(&pm, &gm, config.variant)?;
    Ok(MetricsReport {
        video_id: predicted.video_id.clone(),
        variant: config.variant,
        mae,
        aev,
        precision: fs.precision,
        recall: fs.recall,
        f_measure: fs.f,
        relative_f: relative_f(fs.f, config.f_reference)?,
    })
}

/// Field-wise mean across videos.
pub fn mean_report(reports: &[MetricsReport], variant: FVariant) -> MetricsReport {
    let n = reports.len().max(1) as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    MetricsReport {
        video_id: "mean".into(),
        variant,
        mae: mean(|r| r.mae),
        aev: mean(|r| r.aev),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f_measure: mean(|r| r.f_measure),
        relative_f: mean(|r| r.relative_f),
    }
}
