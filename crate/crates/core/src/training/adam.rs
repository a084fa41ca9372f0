use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", format!("{} must be positive", self.lr)));
        }
        for (field, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(field, format!("{v} outside [0, 1)")));
            }
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::config("eps", format!("{} must be positive", self.eps)));
        }
        Ok(())
    }
}

/// First/second moment accumulators for every parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>], config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.dims())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.v
    }
}

/// One bias-corrected Adam update over all parameters jointly.
pub fn adam_step<T: Scalar>(params: &mut [Tensor<T>], grads: &[Tensor<T>], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(format!(
            "{} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        p.check_same_dims(g)?;
        p.check_same_dims(m)?;
    }
    let t = state
        .t
        .checked_add(1)
        .ok_or_else(|| Error::State("Adam step counter overflow".into()))?;
    let t_exp = i32::try_from(t).unwrap_or(i32::MAX);
    let c = state.config;
    let bc1 = T::from_f64(1.0 - c.beta1.powi(t_exp));
    let bc2 = T::from_f64(1.0 - c.beta2.powi(t_exp));
    let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
    let (one_b1, one_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
    let (lr, eps) = (T::from_f64(c.lr), T::from_f64(c.eps));

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((w, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mv = b1 * *mv + one_b1 * gv;
            *vv = b2 * *vv + one_b2 * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    state.t = t;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn scalar(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::scalar(v)]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut rng = Rng::new(3);
        let mut params = vec![Tensor::<f64>::random_uniform(&[4, 3], -1.0, 1.0, &mut rng)];
        let before = params.clone();
        let mut state = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &[Tensor::zeros(&[4, 3])], &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn one_canonical_step_by_hand() {
        let mut w = scalar(0.0);
        let mut state = AdamState::new(&w, AdamConfig::default());
        adam_step(&mut w, &scalar(1.0), &mut state).unwrap();
        assert!((state.first_moments()[0].data()[0] - 0.1).abs() < 1e-15);
        assert!((state.second_moments()[0].data()[0] - 0.001).abs() < 1e-15);
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((w[0].data()[0] - expected).abs() < 1e-18);
        assert!((w[0].data()[0] + 9.999_999_90e-5).abs() < 1e-13);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Tensor::<f32>::zeros(&[2])];
        let mut state = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &[Tensor::zeros(&[3])], &mut state).is_err());
        assert!(adam_step(&mut p, &[], &mut state).is_err());
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn counter_overflow_is_state_error() {
        let mut p = scalar(0.0);
        let mut state = AdamState::new(&p, AdamConfig::default());
        state.t = u64::MAX;
        assert!(matches!(
            adam_step(&mut p, &scalar(1.0), &mut state),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig {
            lr: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdamConfig {
            beta2: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdamConfig {
            eps: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
