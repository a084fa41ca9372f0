//! Shared fixtures for the criterion benchmarks.

use shotscore::{build_network, Network, NetworkConfig, Rng, Tensor};

/// Random frame in `[0, 1)` with the given side and three channels.
pub fn random_frame(side: usize, seed: u64) -> Tensor<f32> {
    Tensor::random_uniform(&[side, side, 3], 0.0, 1.0, &mut Rng::new(seed))
}

/// Glorot-initialized standard network at `side`.
pub fn standard_network(side: usize, seed: u64) -> Network<f32> {
    let mut net = build_network(&NetworkConfig::standard(side, 3)).expect("side is a multiple of 4");
    net.glorot_init(&mut Rng::new(seed));
    net
}
