//! The six-stage frame-importance regressor.
//!
//! ```text
//! frame ─ conv(32,5×5)+relu ─ conv(64,5×5)+relu+pool ─ conv(64,5×5)+relu+pool
//!       ─ flatten ─ dense(10)+relu+dropout ─ dense(1) ─ ŷ
//! ```
//!
//! Layers are described by [`LayerSpec`]s and validated once at build time.
//! Forward passes produce a [`Trace`] of cached activations that the matching
//! backward pass consumes; [`Network::forward`]/[`Network::backward`] wrap
//! that pair with internal caching for single-sample use.

mod checkpoint;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, restore, save_checkpoint, CHECKPOINT_MAGIC,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{self, PoolIndex};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

pub const KERNEL: usize = 5;
pub const CONV_FILTERS: [usize; 3] = [32, 64, 64];
pub const HIDDEN_UNITS: usize = 10;
pub const KEEP_PROB: f64 = 0.5;
pub const DEFAULT_INPUT_SIDE: usize = 256;

/// Upper bound `L` of the importance score range `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ScoreScale(u32);

impl ScoreScale {
    pub fn new(l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::config("score_scale", "must be at least 1"));
        }
        Ok(Self(l))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn max(self) -> f64 {
        self.0 as f64
    }
}

impl Default for ScoreScale {
    fn default() -> Self {
        Self(5)
    }
}

impl TryFrom<u32> for ScoreScale {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ScoreScale> for u32 {
    fn from(s: ScoreScale) -> u32 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel: usize,
    },
    Relu,
    MaxPool,
    Flatten,
    Dense {
        units: usize,
    },
    /// Inverted dropout; `keep_prob` of 1 disables it.
    Dropout {
        keep_prob: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_side: usize,
    pub channels: usize,
    pub layers: Vec<LayerSpec>,
    pub score_scale: ScoreScale,
}

impl NetworkConfig {
    /// The reference architecture for square `input_side` frames.
    pub fn standard(input_side: usize, channels: usize) -> Self {
        use LayerSpec::*;
        let [f1, f2, f3] = CONV_FILTERS;
        let k = KERNEL;
        Self {
            input_side,
            channels,
            layers: vec![
                Conv { filters: f1, kernel: k },
                Relu,
                Conv { filters: f2, kernel: k },
                Relu,
                MaxPool,
                Conv { filters: f3, kernel: k },
                Relu,
                MaxPool,
                Flatten,
                Dense { units: HIDDEN_UNITS },
                Relu,
                Dropout { keep_prob: KEEP_PROB },
                Dense { units: 1 },
            ],
            score_scale: ScoreScale::default(),
        }
    }

    pub fn with_keep_prob(mut self, keep_prob: f64) -> Self {
        for layer in &mut self.layers {
            if let LayerSpec::Dropout { keep_prob: p } = layer {
                *p = keep_prob;
            }
        }
        self
    }

    pub fn with_score_scale(mut self, scale: ScoreScale) -> Self {
        self.score_scale = scale;
        self
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [self.input_side, self.input_side, self.channels]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Spatial(usize, usize, usize),
    Flat(usize),
}

impl Shape {
    fn dims(self) -> Vec<usize> {
        match self {
            Shape::Spatial(h, w, c) => vec![h, w, c],
            Shape::Flat(m) => vec![m],
        }
    }
}

#[derive(Debug, Clone)]
enum Layer {
    /// Weight tensor at `param`, bias at `param + 1`.
    Conv {
        param: usize,
    },
    Relu,
    MaxPool,
    Flatten {
        dims: Vec<usize>,
    },
    Dense {
        param: usize,
    },
    Dropout {
        keep_prob: f64,
        dims: Vec<usize>,
    },
}

/// Per-dropout-layer multiplicative masks (0 or 1/keep_prob).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T>(pub Vec<Tensor<T>>);

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    inputs: Vec<Tensor<T>>,
    pools: Vec<Option<PoolIndex>>,
    masks: Option<DropoutMasks<T>>,
    output: T,
}

impl<T: Scalar> Trace<T> {
    /// Raw (unclamped) regressor output.
    pub fn output(&self) -> T {
        self.output
    }

    /// Input to layer `i`.
    pub fn layer_input(&self, i: usize) -> &Tensor<T> {
        &self.inputs[i]
    }
}

#[derive(Debug, Clone)]
pub struct Network<T = f32> {
    config: NetworkConfig,
    layers: Vec<Layer>,
    names: Vec<String>,
    fan_in: Vec<usize>,
    values: Vec<Tensor<T>>,
    grads: Vec<Tensor<T>>,
    mode: Mode,
    cached: Option<Trace<T>>,
}

/// Validates the layer stack and allocates zeroed parameters.
pub fn build_network<T: Scalar>(config: &NetworkConfig) -> Result<Network<T>> {
    Network::new(config.clone())
}

impl<T: Scalar> Network<T> {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        if config.input_side == 0 {
            return Err(Error::config("input_side", "must be positive"));
        }
        if config.channels == 0 {
            return Err(Error::config("channels", "must be positive"));
        }
        let mut shape = Shape::Spatial(config.input_side, config.input_side, config.channels);
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut shapes: Vec<(Vec<usize>, Vec<usize>, usize)> = Vec::new();
        let field = |i: usize| format!("layers[{i}]");

        for (i, spec) in config.layers.iter().enumerate() {
            match (*spec, shape) {
                (LayerSpec::Conv { filters, kernel }, Shape::Spatial(h, w, c)) => {
                    if filters == 0 || kernel == 0 || kernel % 2 == 0 {
                        return Err(Error::config(
                            field(i),
                            format!("conv needs filters > 0 and an odd kernel, got {filters}/{kernel}"),
                        ));
                    }
                    layers.push(Layer::Conv {
                        param: 2 * shapes.len(),
                    });
                    shapes.push((vec![kernel, kernel, c, filters], vec![filters], kernel * kernel * c));
                    shape = Shape::Spatial(h, w, filters);
                }
                (LayerSpec::MaxPool, Shape::Spatial(h, w, c)) => {
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(Error::config(
                            "input_side",
                            format!(
                                "{} does not survive the max-pool at layer {i} ({h}×{w} is odd)",
                                config.input_side
                            ),
                        ));
                    }
                    layers.push(Layer::MaxPool);
                    shape = Shape::Spatial(h / 2, w / 2, c);
                }
                (LayerSpec::Flatten, Shape::Spatial(h, w, c)) => {
                    layers.push(Layer::Flatten { dims: vec![h, w, c] });
                    shape = Shape::Flat(h * w * c);
                }
                (LayerSpec::Dense { units }, Shape::Flat(m)) => {
                    if units == 0 {
                        return Err(Error::config(field(i), "dense needs units > 0"));
                    }
                    layers.push(Layer::Dense {
                        param: 2 * shapes.len(),
                    });
                    shapes.push((vec![m, units], vec![units], m));
                    shape = Shape::Flat(units);
                }
                (LayerSpec::Relu, _) => layers.push(Layer::Relu),
                (LayerSpec::Dropout { keep_prob }, _) => {
                    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
                        return Err(Error::config(field(i), format!("keep_prob {keep_prob} outside (0, 1]")));
                    }
                    layers.push(Layer::Dropout {
                        keep_prob,
                        dims: shape.dims(),
                    });
                }
                (spec, shape) => {
                    return Err(Error::config(
                        field(i),
                        format!("{spec:?} cannot follow a layer producing {:?}", shape.dims()),
                    ));
                }
            }
        }
        if shape != Shape::Flat(1) {
            return Err(Error::config(
                "layers",
                format!("network must end in a single output, got {:?}", shape.dims()),
            ));
        }

        let n = shapes.len();
        let mut names = Vec::with_capacity(2 * n);
        let mut fan_in = Vec::with_capacity(2 * n);
        let mut values = Vec::with_capacity(2 * n);
        for (j, (wd, bd, fan)) in shapes.into_iter().enumerate() {
            let tag = if j + 1 == n {
                "R".to_string()
            } else {
                (j + 1).to_string()
            };
            names.push(format!("W{tag}"));
            names.push(format!("B{tag}"));
            fan_in.extend([fan, fan]);
            values.push(Tensor::zeros(&wd));
            values.push(Tensor::zeros(&bd));
        }
        let grads = values.iter().map(|v| Tensor::zeros(v.dims())).collect();
        Ok(Self {
            config,
            layers,
            names,
            fan_in,
            values,
            grads,
            mode: Mode::Train,
            cached: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.cached = None;
    }

    /// Parameter names in storage order: `W1, B1, …, WR, BR`.
    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.values
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        self.cached = None;
        &mut self.values
    }

    pub fn grads(&self) -> &[Tensor<T>] {
        &self.grads
    }

    /// Parameters and gradients together, for optimizer updates.
    pub fn params_and_grads_mut(&mut self) -> (&mut [Tensor<T>], &[Tensor<T>]) {
        self.cached = None;
        (&mut self.values, &self.grads)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.index_of(name).map(|i| &self.values[i])
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor<T>> {
        self.index_of(name).map(|i| &self.grads[i])
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Fan-in `M` of the layer owning parameter `i`.
    pub fn fan_in(&self, i: usize) -> usize {
        self.fan_in[i]
    }

    pub fn num_params(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Width of the flattened feature vector fed to the first dense layer.
    pub fn flatten_width(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::Flatten { dims } => Some(dims.iter().product()),
            _ => None,
        })
    }

    /// Weights uniform in `[-1/√M, 1/√M]` with `M` the layer fan-in; biases 0.
    pub fn glorot_init(&mut self, rng: &mut Rng) {
        for (i, value) in self.values.iter_mut().enumerate() {
            if i % 2 == 1 {
                value.fill(T::ZERO);
                continue;
            }
            let bound = T::ONE / T::from_f64(self.fan_in[i] as f64).sqrt();
            let two = T::from_f64(2.0);
            for w in value.data_mut() {
                let u = T::from_f64(rng.unit());
                *w = bound * (two * u - T::ONE);
            }
        }
        self.cached = None;
    }

    /// Draws fresh dropout masks for one training forward pass.
    pub fn sample_masks(&self, rng: &mut Rng) -> DropoutMasks<T> {
        let masks = self
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dropout { keep_prob, dims } => {
                    let scale = T::from_f64(1.0 / keep_prob);
                    Some(Tensor::from_fn(dims, |_| {
                        if *keep_prob >= 1.0 || rng.bernoulli(*keep_prob) {
                            scale
                        } else {
                            T::ZERO
                        }
                    }))
                }
                _ => None,
            })
            .collect();
        DropoutMasks(masks)
    }

    fn check_frame(&self, frame: &Tensor<T>) -> Result<()> {
        if frame.dims() != self.config.input_dims() {
            return Err(Error::shape(format!(
                "frame dims {:?}, network expects {:?}",
                frame.dims(),
                self.config.input_dims()
            )));
        }
        Ok(())
    }

    /// Pure forward pass. `masks = None` runs dropout as the identity.
    pub fn forward_trace(&self, frame: &Tensor<T>, masks: Option<&DropoutMasks<T>>) -> Result<Trace<T>> {
        self.check_frame(frame)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pools = Vec::with_capacity(self.layers.len());
        let mut x = frame.clone();
        let mut dropout_ix = 0;
        for layer in &self.layers {
            let mut pool = None;
            let y = match layer {
                Layer::Conv { param } => ops::conv2d_forward(&x, &self.values[*param], &self.values[param + 1])?,
                Layer::Dense { param } => ops::dense_forward(&x, &self.values[*param], &self.values[param + 1])?,
                Layer::Relu => ops::relu(&x),
                Layer::MaxPool => {
                    let (y, idx) = ops::maxpool_forward(&x)?;
                    pool = Some(idx);
                    y
                }
                Layer::Flatten { .. } => {
                    let n = x.len();
                    x.clone().reshape(&[n])?
                }
                Layer::Dropout { .. } => {
                    let y = match masks {
                        Some(DropoutMasks(m)) => {
                            let mask = m.get(dropout_ix).ok_or_else(|| {
                                Error::shape(format!("no dropout mask for dropout layer {dropout_ix}"))
                            })?;
                            x.check_same_dims(mask)?;
                            let data = x.data().iter().zip(mask.data()).map(|(&a, &b)| a * b).collect();
                            Tensor::new(x.dims().to_vec(), data)?
                        }
                        None => x.clone(),
                    };
                    dropout_ix += 1;
                    y
                }
            };
            inputs.push(x);
            pools.push(pool);
            x = y;
        }
        Ok(Trace {
            inputs,
            pools,
            masks: masks.cloned(),
            output: x.data()[0],
        })
    }

    /// Gradients of every parameter given `d_out = ∂loss/∂ŷ`, in parameter
    /// order.
    pub fn backward_trace(&self, trace: &Trace<T>, d_out: T) -> Result<Vec<Tensor<T>>> {
        if trace.inputs.len() != self.layers.len() {
            return Err(Error::State("trace does not match this network".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.values.len()];
        let mut g = Tensor::scalar(d_out);
        let mut dropout_ix = self
            .layers
            .iter()
            .filter(|l| matches!(l, Layer::Dropout { .. }))
            .count();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.inputs[i];
            g = match layer {
                Layer::Conv { param } => {
                    let ag = ops::conv2d_backward(x, &self.values[*param], &g)?;
                    grads[*param] = Some(ag.weights);
                    grads[param + 1] = Some(ag.bias);
                    ag.input
                }
                Layer::Dense { param } => {
                    let ag = ops::dense_backward(x, &self.values[*param], &g)?;
                    grads[*param] = Some(ag.weights);
                    grads[param + 1] = Some(ag.bias);
                    ag.input
                }
                Layer::Relu => ops::relu_backward(x, &g)?,
                Layer::MaxPool => {
                    let idx = trace.pools[i]
                        .as_ref()
                        .ok_or_else(|| Error::State("missing pool index".into()))?;
                    ops::maxpool_backward(idx, &g)?
                }
                Layer::Flatten { dims } => g.reshape(dims)?,
                Layer::Dropout { .. } => {
                    dropout_ix -= 1;
                    match &trace.masks {
                        Some(DropoutMasks(m)) => {
                            let mask = &m[dropout_ix];
                            let data = g.data().iter().zip(mask.data()).map(|(&a, &b)| a * b).collect();
                            Tensor::new(g.dims().to_vec(), data)?
                        }
                        None => g,
                    }
                }
            };
        }
        Ok(grads
            .into_iter()
            .zip(&self.values)
            .map(|(g, v)| g.unwrap_or_else(|| Tensor::zeros(v.dims())))
            .collect())
    }

    fn clamp_prediction(&self, y: T) -> T {
        y.max(T::ZERO).min(T::from_f64(self.config.score_scale.max()))
    }

    /// Mode-aware forward pass that caches activations for [`backward`].
    /// Train mode samples dropout masks from `rng` and returns the raw
    /// output; eval mode ignores `rng` and clamps to `[0, L]`.
    ///
    /// [`backward`]: Network::backward
    pub fn forward(&mut self, frame: &Tensor<T>, rng: &mut Rng) -> Result<T> {
        match self.mode {
            Mode::Train => {
                let masks = self.sample_masks(rng);
                let trace = self.forward_trace(frame, Some(&masks))?;
                let y = trace.output;
                self.cached = Some(trace);
                Ok(y)
            }
            Mode::Eval => {
                let trace = self.forward_trace(frame, None)?;
                let y = self.clamp_prediction(trace.output);
                self.cached = None;
                Ok(y)
            }
        }
    }

    /// Fills the gradient slots from the last train-mode forward pass.
    pub fn backward(&mut self, d_loss_d_pred: T) -> Result<()> {
        let trace = self
            .cached
            .take()
            .ok_or_else(|| Error::State("backward called without a train-mode forward".into()))?;
        self.grads = self.backward_trace(&trace, d_loss_d_pred)?;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(T::ZERO));
    }

    /// Deterministic inference: dropout off, output clamped to `[0, L]`.
    pub fn predict(&self, frame: &Tensor<T>) -> Result<T> {
        Ok(self.clamp_prediction(self.forward_trace(frame, None)?.output))
    }

    /// Whether two traces of this network took the same piecewise-linear
    /// branch everywhere: identical ReLU input signs and max-pool winners.
    /// Between two such traces the network is smooth in its parameters.
    pub fn same_branches(&self, a: &Trace<T>, b: &Trace<T>) -> bool {
        self.layers.iter().enumerate().all(|(i, layer)| match layer {
            Layer::Relu => a.inputs[i]
                .data()
                .iter()
                .zip(b.inputs[i].data())
                .all(|(&x, &y)| (x > T::ZERO) == (y > T::ZERO)),
            Layer::MaxPool => a.pools[i] == b.pools[i],
            _ => true,
        })
    }

    pub(crate) fn from_parts(config: NetworkConfig, values: Vec<Tensor<T>>) -> Result<Self> {
        let mut net = Self::new(config)?;
        for (slot, v) in net.values.iter_mut().zip(values) {
            *slot = v;
        }
        Ok(net)
    }
}
