//! Small dense networks with hand-written backpropagation.
//!
//! Batches are row-major: one example per row. Layer `l` computes
//! `act(x W + b)` with `W` shaped `in x out`.

mod gradcheck;
mod loss;
mod rmsprop;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{bce_loss, bce_with_logits, mse_loss, Loss};
pub use rmsprop::{rmsprop_step, OptimizerState, RmsProp};

/// Sigmoid outputs are kept this far from 0 and 1 when reported.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    SigmoidElementwise,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
            Activation::SigmoidElementwise => sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP),
        }
    }

    /// d act / d z at pre-activation `z`. The relu kink gets 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
            Activation::SigmoidElementwise => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `in x out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weights = Array2::from_shape_fn((input, output), |_| rng.gen_range(-limit..=limit));
        Self {
            weights,
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub layers: Vec<DenseLayer>,
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<f64>>,
    /// Post-activation of the last layer.
    pub output: Array2<f64>,
}

impl ForwardCache {
    /// Pre-activation of the last layer (`z_out`).
    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite()))
    }
}

impl DenseParams {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::Shape(format!(
                    "layer {l} outputs {} values but layer {} expects {}",
                    pair[0].output_width(),
                    l + 1,
                    pair[1].input_width()
                )));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_width() {
                return Err(Error::Shape(format!("layer {l} bias has the wrong length")));
            }
        }
        let params = Self { layers };
        if !params.all_finite() {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(params)
    }

    /// `hidden` relu layers followed by one output layer, Glorot-initialized.
    pub fn glorot<R: Rng>(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(DenseLayer::glorot(width, h, Activation::Relu, rng));
            width = h;
        }
        layers.push(DenseLayer::glorot(width, output, output_activation, rng));
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").output_width()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers.last().expect("non-empty").activation
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        if input.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_width()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for layer in &self.layers {
            let z = x.dot(&layer.weights) + &layer.bias;
            let act = layer.activation;
            let a = z.mapv(|v| act.apply(v));
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: x,
        })
    }

    /// Final activations only.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(input)?.output)
    }

    /// Gradients of the loss given `d_logits`, its gradient with respect
    /// to the last layer's pre-activation.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Array2<f64>) -> Result<Gradients> {
        if cache.pre.len() != self.layers.len() {
            return Err(Error::Shape("forward cache does not match the network".into()));
        }
        if d_logits.dim() != cache.logits().dim() {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                d_logits.dim(),
                cache.logits().dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_logits.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let weights = cache.inputs[l].t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            grads.push(LayerGrad { weights, bias });
            if l > 0 {
                let mut upstream = delta.dot(&layer.weights.t());
                let act = self.layers[l - 1].activation;
                Zip::from(&mut upstream)
                    .and(&cache.pre[l - 1])
                    .for_each(|u, &z| *u *= act.derivative(z));
                delta = upstream;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_weights_give_relu_of_bias() {
        let mut layer = DenseLayer::zeros(3, 2, Activation::Relu);
        layer.bias = array![-1.5, 2.0];
        let net = DenseParams::new(vec![layer]).unwrap();
        let out = net.predict(array![[4.0, -2.0, 9.0], [0.0, 0.0, 0.0]].view()).unwrap();
        assert_eq!(out, array![[0.0, 2.0], [0.0, 2.0]]);
    }

    #[test]
    fn linear_layer_is_affine() {
        let layer = DenseLayer {
            weights: array![[1.0, 2.0], [3.0, 4.0]],
            bias: array![0.5, -0.5],
            activation: Activation::Linear,
        };
        let net = DenseParams::new(vec![layer]).unwrap();
        let out = net.predict(array![[1.0, 1.0]].view()).unwrap();
        // [1, 1] . [[1, 2], [3, 4]] = [4, 6]
        assert_eq!(out, array![[4.5, 5.5]]);
    }

    #[test]
    fn relu_elementwise() {
        assert_eq!(Activation::Relu.apply(-1.5), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
    }

    #[test]
    fn shape_errors() {
        let net = DenseParams::new(vec![DenseLayer::zeros(3, 2, Activation::Linear)]).unwrap();
        assert!(net.forward(array![[1.0, 2.0]].view()).is_err());
        let bad = DenseParams::new(vec![
            DenseLayer::zeros(3, 2, Activation::Relu),
            DenseLayer::zeros(3, 1, Activation::Linear),
        ]);
        assert!(bad.is_err());
        let cache = net.forward(array![[1.0, 2.0, 3.0]].view()).unwrap();
        assert!(net.backward(&cache, &array![[1.0]]).is_err());
    }

    #[test]
    fn hand_gradient_single_weight() {
        // L = (w x + b - y)^2 with w = 1, x = 2, b = 0, y = 0: dL/dw = 2 (w x + b - y) x = 8.
        let mut layer = DenseLayer::zeros(1, 1, Activation::Linear);
        layer.weights[[0, 0]] = 1.0;
        let net = DenseParams::new(vec![layer]).unwrap();
        let cache = net.forward(array![[2.0]].view()).unwrap();
        let (loss, grad) = mse_loss(&cache.output, &array![[0.0]]).unwrap();
        assert_eq!(loss, 4.0);
        let g = net.backward(&cache, &grad).unwrap();
        assert_eq!(g.layers[0].weights[[0, 0]], 8.0);
        assert_eq!(g.layers[0].bias[0], 4.0);
    }

    #[test]
    fn relu_kink_blocks_gradient() {
        // Hidden pre-activation is exactly 0, so nothing flows to the first layer.
        let hidden = DenseLayer {
            weights: array![[1.0]],
            bias: array![-1.0],
            activation: Activation::Relu,
        };
        let out = DenseLayer {
            weights: array![[1.0]],
            bias: array![0.0],
            activation: Activation::Linear,
        };
        let net = DenseParams::new(vec![hidden, out]).unwrap();
        let cache = net.forward(array![[1.0]].view()).unwrap();
        assert_eq!(cache.pre[0][[0, 0]], 0.0);
        let g = net.backward(&cache, &array![[1.0]]).unwrap();
        assert_eq!(g.layers[0].weights[[0, 0]], 0.0);
        assert_eq!(g.layers[0].bias[0], 0.0);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = DenseParams::glorot(7, &[100, 100], 4, Activation::Linear, &mut rng);
        let x = Array2::from_shape_fn((5, 7), |(i, j)| ((i * 7 + j) as f64).sin());
        let a = net.predict(x.view()).unwrap();
        let b = net.predict(x.view()).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(Activation::SigmoidElementwise.apply(-800.0), PROB_CLAMP);
    }
}
