//! Central finite-difference verification of the analytic backward pass.

use serde::Serialize;

use super::l2_loss;
use crate::error::Result;
use crate::network::{DropoutMasks, Network, Trace};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this in both routes are treated as agreeing zeros.
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// False only if every redraw for this sample crossed a kink.
    pub smooth: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
    pub max_rel_error: f64,
    /// Draws discarded because the difference straddled a kink.
    pub redrawn: usize,
}

impl GradcheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }

    pub fn worst(&self) -> Option<&GradcheckEntry> {
        self.entries.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ABS_FLOOR {
        return (analytic - numeric).abs() / ABS_FLOOR;
    }
    (analytic - numeric).abs() / scale
}

/// Redraws allowed per sample before a kink-crossing entry is kept as is.
pub const MAX_REDRAWS: usize = 100;

/// Compares analytic gradients of the single-sample L2 loss against central
/// differences on `samples` parameters, drawn round-robin across the
/// parameter tensors. `masks` pins dropout for both routes.
///
/// The network is piecewise smooth. A draw whose `w ± h` evaluations fall on
/// different ReLU or max-pool branches has no meaningful central difference,
/// so it is redrawn from the same tensor and counted in `redrawn`.
pub fn gradcheck(
    net: &Network<f64>,
    frame: &Tensor<f64>,
    target: f64,
    samples: usize,
    masks: Option<&DropoutMasks<f64>>,
    rng: &mut Rng,
) -> Result<GradcheckReport> {
    let trace = net.forward_trace(frame, masks)?;
    let (_, d) = l2_loss(&[trace.output()], &[target])?;
    let analytic = net.backward_trace(&trace, d[0])?;

    let mut probe = net.clone();
    let n_tensors = net.params().len();
    let mut entries = Vec::with_capacity(samples);
    let mut redrawn = 0;
    for k in 0..samples {
        let p = k % n_tensors;
        let mut attempt = 0;
        let entry = loop {
            let index = rng.below(net.params()[p].len());
            let w0 = net.params()[p].data()[index];
            let h = FD_STEP * w0.abs().max(1.0);

            probe.params_mut()[p].data_mut()[index] = w0 + h;
            let plus = probe.forward_trace(frame, masks)?;
            probe.params_mut()[p].data_mut()[index] = w0 - h;
            let minus = probe.forward_trace(frame, masks)?;
            probe.params_mut()[p].data_mut()[index] = w0;

            let smooth = net.same_branches(&trace, &plus) && net.same_branches(&trace, &minus);
            if !smooth && attempt < MAX_REDRAWS {
                attempt += 1;
                redrawn += 1;
                continue;
            }
            let loss = |t: &Trace<f64>| l2_loss(&[t.output()], &[target]).map(|(c, _)| c);
            let numeric = (loss(&plus)? - loss(&minus)?) / (2.0 * h);
            let a = analytic[p].data()[index];
            break GradcheckEntry {
                param: net.param_names()[p].clone(),
                index,
                analytic: a,
                numeric,
                rel_error: relative_error(a, numeric),
                smooth,
            };
        };
        entries.push(entry);
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        entries,
        max_rel_error,
        redrawn,
    })
}
