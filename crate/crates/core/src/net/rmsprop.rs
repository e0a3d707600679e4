use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{DenseParams, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Running mean of squared gradients, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: RmsProp,
    accum: Vec<(Array2<f64>, Array1<f64>)>,
}

impl OptimizerState {
    pub fn new(config: RmsProp, params: &DenseParams) -> Self {
        let accum = params
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.bias.len())))
            .collect();
        Self { config, accum }
    }

    pub fn accumulators(&self) -> &[(Array2<f64>, Array1<f64>)] {
        &self.accum
    }

    pub fn step(&mut self, params: &mut DenseParams, grads: &Gradients) -> Result<()> {
        rmsprop_step(params, grads, self)
    }
}

/// `a <- rho a + (1 - rho) g^2`, `p <- p - lr g / (sqrt(a) + eps)`.
/// Rejects non-finite gradients before touching anything.
pub fn rmsprop_step(params: &mut DenseParams, grads: &Gradients, state: &mut OptimizerState) -> Result<()> {
    if grads.layers.len() != params.layers.len() || state.accum.len() != params.layers.len() {
        return Err(Error::Shape("gradient and parameter layer counts differ".into()));
    }
    for ((layer, grad), (aw, ab)) in params.layers.iter().zip(&grads.layers).zip(&state.accum) {
        if layer.weights.dim() != grad.weights.dim()
            || layer.bias.len() != grad.bias.len()
            || aw.dim() != layer.weights.dim()
            || ab.len() != layer.bias.len()
        {
            return Err(Error::Shape("gradient shape does not match parameters".into()));
        }
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let RmsProp {
        learning_rate: lr,
        decay: rho,
        epsilon: eps,
    } = state.config;
    let update = |p: &mut f64, a: &mut f64, &g: &f64| {
        *a = rho * *a + (1.0 - rho) * g * g;
        *p -= lr * g / (a.sqrt() + eps);
    };
    for ((layer, grad), (aw, ab)) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.accum.iter_mut())
    {
        Zip::from(&mut layer.weights)
            .and(aw)
            .and(&grad.weights)
            .for_each(update);
        Zip::from(&mut layer.bias).and(ab).and(&grad.bias).for_each(update);
    }
    Ok(())
}
