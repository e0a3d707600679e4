use ndarray::Array2;
use serde::Serialize;

use super::{Activation, DenseParams, ForwardCache, Loss};
use crate::error::{Error, Result};

/// Largest relative disagreement between analytic and central-difference
/// gradients, and where it occurred.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub layer: usize,
    /// `"weights"` or `"bias"`.
    pub kind: &'static str,
    /// Flat index into that parameter array.
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Parameters compared.
    pub checked: usize,
    /// Parameters left out because the two perturbed passes put some relu
    /// unit on opposite sides of zero, where a difference quotient does not
    /// estimate the derivative.
    pub kink_crossings: usize,
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Per-output loss terms when layer `l`'s pre-activation is replaced by
/// `z`, plus the on/off pattern of every relu unit from layer `l` on.
/// Parameters of layer `l` do not affect earlier layers, so the rest of the
/// pass can be reused.
fn terms_from(
    params: &DenseParams,
    l: usize,
    mut z: Array2<f64>,
    loss: Loss,
    y: &Array2<f64>,
) -> Result<(Array2<f64>, Vec<bool>)> {
    let mut pattern = Vec::new();
    let mut record = |z: &Array2<f64>, act: Activation| {
        if act == Activation::Relu {
            pattern.extend(z.iter().map(|&v| v > 0.0));
        }
    };
    record(&z, params.layers[l].activation);
    let mut a = z.mapv(|v| params.layers[l].activation.apply(v));
    for layer in &params.layers[l + 1..] {
        z = a.dot(&layer.weights) + &layer.bias;
        record(&z, layer.activation);
        a = z.mapv(|v| layer.activation.apply(v));
    }
    let cache = ForwardCache {
        inputs: Vec::new(),
        pre: vec![z],
        output: a,
    };
    Ok((loss.terms(&cache, params.output_activation(), y)?, pattern))
}

/// Compares backpropagated gradients with `(L(p + eps) - L(p - eps)) / 2 eps`
/// for every parameter. The two losses are differenced term by term before
/// summing, which keeps small gradients clear of the rounding error of a
/// large total.
pub fn gradient_check(
    params: &DenseParams,
    loss: Loss,
    x: &Array2<f64>,
    y: &Array2<f64>,
    eps: f64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("finite-difference step {eps} must be positive")));
    }
    let cache = params.forward(x.view())?;
    let (_, d_logits) = loss.evaluate(&cache, params.output_activation(), y)?;
    let analytic = params.backward(&cache, &d_logits)?;
    let batch = x.nrows() as f64;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        layer: 0,
        kind: "weights",
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        kink_crossings: 0,
    };
    for (l, layer) in params.layers.iter().enumerate() {
        let (fan_in, fan_out) = layer.weights.dim();
        let input = &cache.inputs[l];
        let z = &cache.pre[l];
        // Weight (i, j) shifts column j of z by step * input[:, i]; bias j by step.
        let shifted = |i: Option<usize>, j: usize, step: f64| -> Result<(Array2<f64>, Vec<bool>)> {
            let mut zp = z.clone();
            match i {
                Some(i) => zp
                    .column_mut(j)
                    .scaled_add(step, &input.column(i)),
                None => zp.column_mut(j).mapv_inplace(|v| v + step),
            }
            terms_from(params, l, zp, loss, y)
        };
        let mut visit = |kind: &'static str, index: usize, a: f64, i: Option<usize>, j: usize| -> Result<()> {
            let (plus, on_plus) = shifted(i, j, eps)?;
            let (minus, on_minus) = shifted(i, j, -eps)?;
            if on_plus != on_minus {
                report.kink_crossings += 1;
                return Ok(());
            }
            let numeric = (plus - minus).sum() / (2.0 * eps * batch);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.checked == 1 {
                report = GradCheckReport {
                    max_relative_error: err,
                    layer: l,
                    kind,
                    index,
                    analytic: a,
                    numeric,
                    checked: report.checked,
                    kink_crossings: report.kink_crossings,
                };
            }
            Ok(())
        };
        for i in 0..fan_in {
            for j in 0..fan_out {
                visit("weights", i * fan_out + j, analytic.layers[l].weights[[i, j]], Some(i), j)?;
            }
        }
        for j in 0..fan_out {
            visit("bias", j, analytic.layers[l].bias[j], None, j)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::DenseLayer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(lo..hi))
    }

    #[test]
    fn regression_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = DenseParams::glorot(12, &[100, 100], 4, Activation::Linear, &mut rng);
        let x = batch(&mut rng, 8, 12, -1.0, 1.0);
        let y = batch(&mut rng, 8, 4, 0.0, 1.0);
        let report = gradient_check(&params, Loss::Mse, &x, &y, 1e-5).unwrap();
        assert_eq!(report.checked + report.kink_crossings, params.num_params());
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn heatmap_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = DenseParams::glorot(10, &[16, 16], 9, Activation::SigmoidElementwise, &mut rng);
        let x = batch(&mut rng, 6, 10, -1.0, 1.0);
        let y = Array2::from_shape_fn((6, 9), |_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 });
        let report = gradient_check(&params, Loss::BceWithLogits, &x, &y, 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn kink_crossings_are_set_aside() {
        // One relu unit sitting exactly at zero: its bias straddles the kink.
        let mut hidden = DenseLayer::zeros(1, 1, Activation::Relu);
        hidden.weights[[0, 0]] = 1.0;
        let mut out = DenseLayer::zeros(1, 1, Activation::Linear);
        out.weights[[0, 0]] = 2.0;
        let params = DenseParams::new(vec![hidden, out]).unwrap();
        let x = Array2::zeros((1, 1));
        let y = Array2::from_elem((1, 1), 1.0);
        let report = gradient_check(&params, Loss::Mse, &x, &y, 1e-5).unwrap();
        assert_eq!(report.kink_crossings, 1);
        assert_eq!(report.checked, params.num_params() - 1);
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }

    #[test]
    fn zero_input_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut params = DenseParams::glorot(5, &[8], 4, Activation::Linear, &mut rng);
        // Keep hidden units off the relu kink, where pre-activation equals bias.
        params.layers[0].bias.mapv_inplace(|_| if rng.gen_bool(0.5) { 0.5 } else { -0.5 });
        let x = Array2::zeros((3, 5));
        let y = batch(&mut rng, 3, 4, 0.0, 1.0);
        let report = gradient_check(&params, Loss::Mse, &x, &y, 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
        assert!(gradient_check(&params, Loss::Mse, &x, &y, 0.0).is_err());
    }

    #[test]
    fn agrees_with_full_parameter_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut params = DenseParams::glorot(4, &[6, 5], 3, Activation::SigmoidElementwise, &mut rng);
        // A row with every unit of a layer dead puts the next layer exactly on
        // the relu kink when biases are zero.
        for layer in &mut params.layers {
            layer.bias.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
        }
        let x = batch(&mut rng, 5, 4, -1.0, 1.0);
        let y = Array2::from_shape_fn((5, 3), |_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        let loss = Loss::BceWithLogits;
        let full = |p: &DenseParams| {
            let cache = p.forward(x.view()).unwrap();
            loss.evaluate(&cache, p.output_activation(), &y).unwrap().0
        };
        let cache = params.forward(x.view()).unwrap();
        let (_, d) = loss.evaluate(&cache, params.output_activation(), &y).unwrap();
        let analytic = params.backward(&cache, &d).unwrap();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for l in 0..params.layers.len() {
            for idx in 0..params.layers[l].weights.len() {
                let mut up = params.clone();
                up.layers[l].weights.as_slice_mut().unwrap()[idx] += eps;
                let mut down = params.clone();
                down.layers[l].weights.as_slice_mut().unwrap()[idx] -= eps;
                let numeric = (full(&up) - full(&down)) / (2.0 * eps);
                worst = worst.max(relative_error(analytic.layers[l].weights.as_slice().unwrap()[idx], numeric));
            }
        }
        let report = gradient_check(&params, loss, &x, &y, eps).unwrap();
        assert!(worst < 1e-6, "{worst}");
        assert!(report.max_relative_error < 1e-6, "{report:?}");
        assert_eq!(report.checked + report.kink_crossings, params.num_params());
    }
}
