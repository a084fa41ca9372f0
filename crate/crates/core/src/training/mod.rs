//! Loss, optimizer and the mini-batch training loop.

mod adam;
mod gradcheck;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradcheck, relative_error, GradcheckEntry, GradcheckReport, ABS_FLOOR, FD_STEP, MAX_REDRAWS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datapipe::{augment, AugmentCode};
use crate::error::{Error, Result};
use crate::network::{DropoutMasks, Network};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_BATCH_SIZE: usize = 16;

/// Summed squared error `C = Σ (yₙ − ŷₙ)²` and its gradient `2(ŷₙ − yₙ)`.
pub fn l2_loss<T: Scalar>(preds: &[T], targets: &[T]) -> Result<(T, Vec<T>)> {
    if preds.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let two = T::from_f64(2.0);
    let mut c = T::ZERO;
    let grad = preds
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let r = p - y;
            c += r * r;
            two * r
        })
        .collect();
    Ok((c, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Write a checkpoint every this many iterations; 0 disables periodic
    /// checkpoints.
    pub checkpoint_every: usize,
    /// Stop after this many iterations even if epochs remain.
    pub max_iterations: Option<usize>,
    /// Apply a random dihedral augmentation to every sample.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: DEFAULT_BATCH_SIZE,
            adam: AdamConfig::default(),
            checkpoint_every: 0,
            max_iterations: None,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::config("max_iterations", "must be at least 1 when set"));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TrainSample<T> {
    pub frame: Tensor<T>,
    pub target: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub epoch: usize,
    /// `C / N` for the iteration's mini-batch.
    pub batch_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub seed: u64,
    pub epochs: usize,
    pub checkpoint_every: usize,
    pub log: Vec<LogEntry>,
}

impl TrainRun {
    /// Mean of the last `window` logged batch losses.
    pub fn trailing_loss(&self, window: usize) -> Option<f64> {
        let n = window.min(self.log.len());
        if n == 0 {
            return None;
        }
        Some(self.log[self.log.len() - n..].iter().map(|e| e.batch_loss).sum::<f64>() / n as f64)
    }
}

struct Job<T> {
    sample: usize,
    code: AugmentCode,
    masks: DropoutMasks<T>,
}

/// Mini-batch Adam training. All randomness (epoch shuffles, augmentation
/// codes, dropout masks) is drawn sequentially from `rng` before each
/// batch's parallel section, so results depend only on the seed.
/// `on_checkpoint` receives the iteration number and network every
/// `checkpoint_every` iterations and once at the end.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    samples: &[TrainSample<T>],
    config: &TrainConfig,
    rng: &mut Rng,
    mut on_checkpoint: impl FnMut(usize, &Network<T>) -> Result<()>,
) -> Result<TrainRun> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let mut run = TrainRun {
        seed: rng.seed(),
        epochs: config.epochs,
        checkpoint_every: config.checkpoint_every,
        log: Vec::new(),
    };
    if config.epochs == 0 {
        return Ok(run);
    }

    let mut state = AdamState::new(net.params(), config.adam);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut iteration = 0;
    'epochs: for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            if config.max_iterations.is_some_and(|max| iteration >= max) {
                break 'epochs;
            }
            iteration += 1;
            let jobs: Vec<Job<T>> = batch
                .iter()
                .map(|&sample| {
                    let code = if config.augment {
                        AugmentCode::random(rng)
                    } else {
                        AugmentCode::IDENTITY
                    };
                    Job {
                        sample,
                        code,
                        masks: net.sample_masks(rng),
                    }
                })
                .collect();

            let model = &*net;
            let traces = jobs
                .par_iter()
                .map(|job| {
                    let frame = augment(&samples[job.sample].frame, job.code)?;
                    model.forward_trace(&frame, Some(&job.masks))
                })
                .collect::<Result<Vec<_>>>()?;
            let preds: Vec<T> = traces.iter().map(|t| t.output()).collect();
            let targets: Vec<T> = batch.iter().map(|&i| samples[i].target).collect();
            let (loss, d_out) = l2_loss(&preds, &targets)?;
            let batch_loss = loss.to_f64() / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "batch loss became {batch_loss} at iteration {iteration} (epoch {epoch})"
                )));
            }
            let per_sample = traces
                .par_iter()
                .zip(&d_out)
                .map(|(trace, &d)| model.backward_trace(trace, d))
                .collect::<Result<Vec<_>>>()?;

            net.zero_grads();
            let (params, _) = net.params_and_grads_mut();
            let mut total: Vec<Tensor<T>> = params.iter().map(|p| Tensor::zeros(p.dims())).collect();
            for grads in &per_sample {
                for (acc, g) in total.iter_mut().zip(grads) {
                    acc.add_assign(g)?;
                }
            }
            adam_step(params, &total, &mut state)?;
            if params.iter().any(|p| !p.all_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite parameter after iteration {iteration} (epoch {epoch})"
                )));
            }

            run.log.push(LogEntry {
                iteration,
                epoch,
                batch_loss,
            });
            if config.checkpoint_every > 0 && iteration % config.checkpoint_every == 0 {
                on_checkpoint(iteration, net)?;
            }
        }
    }
    if config.checkpoint_every == 0 || iteration % config.checkpoint_every != 0 {
        on_checkpoint(iteration, net)?;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_fixtures() {
        let (c, g) = l2_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (c, g) = l2_loss(&[2.0], &[0.0]).unwrap();
        assert_eq!((c, g), (4.0, vec![4.0]));
        let (c, _) = l2_loss(&[1.0, 3.0], &[2.0, 1.0]).unwrap();
        assert_eq!(c, 5.0);
        assert!(l2_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn l2_gradient_matches_finite_difference() {
        let mut rng = Rng::new(11);
        let preds: Vec<f64> = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let targets: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 5.0)).collect();
        let (_, g) = l2_loss(&preds, &targets).unwrap();
        let h = 1e-6;
        for i in 0..preds.len() {
            let mut p = preds.clone();
            p[i] += h;
            let up = l2_loss(&p, &targets).unwrap().0;
            p[i] -= 2.0 * h;
            let down = l2_loss(&p, &targets).unwrap().0;
            assert!(((up - down) / (2.0 * h) - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn batch_size_zero_rejected() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { ref field, .. }) if field == "batch_size"));
    }
}
