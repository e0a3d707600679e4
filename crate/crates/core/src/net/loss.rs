use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{sigmoid, Activation, ForwardCache, PROB_CLAMP};
use crate::error::{Error, Result};

fn check_shapes(a: &Array2<f64>, b: &Array2<f64>) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    Ok(a.nrows())
}

fn check_binary(target: &Array2<f64>) -> Result<()> {
    if let Some(v) = target.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidTarget(format!("pixel target {v} is not 0 or 1")));
    }
    Ok(())
}

/// Squared L2 residual per example, averaged over the batch.
/// Returns the loss and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let n = check_shapes(pred, target)? as f64;
    let residual = pred - target;
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / n;
    Ok((loss, residual * (2.0 / n)))
}

/// Binary cross-entropy from logits, summed over outputs and averaged over
/// the batch. The gradient is with respect to the logits.
pub fn bce_with_logits(logits: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let n = check_shapes(logits, target)? as f64;
    check_binary(target)?;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    Zip::from(&mut grad)
        .and(logits)
        .and(target)
        .for_each(|g, &z, &y| {
            loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            *g = (sigmoid(z) - y) / n;
        });
    Ok((loss / n, grad))
}

/// Binary cross-entropy from probabilities (clamped away from 0 and 1).
/// The gradient is with respect to the pre-sigmoid logits, `(p - y) / n`.
pub fn bce_loss(prob: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let n = check_shapes(prob, target)? as f64;
    check_binary(target)?;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(prob.dim());
    Zip::from(&mut grad).and(prob).and(target).for_each(|g, &p, &y| {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        *g = (p - y) / n;
    });
    Ok((loss / n, grad))
}

/// Loss attached to an output head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    BceWithLogits,
}

impl Loss {
    /// Per-output loss terms; the loss is their sum divided by the batch size.
    pub fn terms(self, cache: &ForwardCache, output_activation: Activation, target: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Loss::Mse => {
                check_shapes(&cache.output, target)?;
                Ok(Zip::from(&cache.output).and(target).map_collect(|p, y| (p - y) * (p - y)))
            }
            Loss::BceWithLogits => {
                if output_activation != Activation::SigmoidElementwise {
                    return Err(Error::Config(
                        "binary cross-entropy needs a sigmoid output layer".into(),
                    ));
                }
                let logits = cache.logits();
                check_shapes(logits, target)?;
                check_binary(target)?;
                Ok(Zip::from(logits)
                    .and(target)
                    .map_collect(|&z, &y| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()))
            }
        }
    }

    /// Loss value and gradient with respect to the last pre-activation.
    pub fn evaluate(
        self,
        cache: &ForwardCache,
        output_activation: Activation,
        target: &Array2<f64>,
    ) -> Result<(f64, Array2<f64>)> {
        match self {
            Loss::Mse => {
                let (loss, mut grad) = mse_loss(&cache.output, target)?;
                if output_activation != Activation::Linear {
                    Zip::from(&mut grad)
                        .and(cache.logits())
                        .for_each(|g, &z| *g *= output_activation.derivative(z));
                }
                Ok((loss, grad))
            }
            Loss::BceWithLogits => {
                if output_activation != Activation::SigmoidElementwise {
                    return Err(Error::Config(
                        "binary cross-entropy needs a sigmoid output layer".into(),
                    ));
                }
                bce_with_logits(cache.logits(), target)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn terms_sum_to_loss() {
        let z = array![[0.3, -2.0, 5.0], [0.0, 1.5, -0.7]];
        let y = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let cache = ForwardCache {
            inputs: Vec::new(),
            pre: vec![z.clone()],
            output: z.mapv(sigmoid),
        };
        for (loss, act) in [(Loss::BceWithLogits, Activation::SigmoidElementwise), (Loss::Mse, Activation::Linear)] {
            let cache = if act == Activation::Linear {
                ForwardCache { output: z.clone(), ..cache.clone() }
            } else {
                cache.clone()
            };
            let (l, _) = loss.evaluate(&cache, act, &y).unwrap();
            let t = loss.terms(&cache, act, &y).unwrap();
            assert!((t.sum() / 2.0 - l).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_examples() {
        let y = array![[0.3, 0.1, 0.2, 0.4]];
        let (l, g) = mse_loss(&y, &y).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));

        let (l, g) = mse_loss(&array![[1.0, 0.0, 0.0, 0.0]], &array![[0.0; 4]]).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g, array![[2.0, 0.0, 0.0, 0.0]]);

        let p1 = array![[0.5, 0.2, 0.1, 0.3]];
        let t1 = array![[0.1, 0.1, 0.1, 0.1]];
        let p2 = array![[0.5, 0.2, 0.1, 0.3], [0.5, 0.2, 0.1, 0.3]];
        let t2 = array![[0.1, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.1]];
        let (l1, _) = mse_loss(&p1, &t1).unwrap();
        let (l2, _) = mse_loss(&p2, &t2).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        assert!(mse_loss(&p1, &t2).is_err());
    }

    #[test]
    fn bce_max_entropy() {
        let p = Array2::from_elem((1, 225), 0.5);
        let y = Array2::from_shape_fn((1, 225), |(_, j)| (j % 2) as f64);
        let (l, _) = bce_loss(&p, &y).unwrap();
        assert!((l - 225.0 * 2f64.ln()).abs() < 1e-9);
        assert!((l - 155.96).abs() < 0.01);
        let (l2, _) = bce_with_logits(&Array2::zeros((1, 225)), &y).unwrap();
        assert!((l - l2).abs() < 1e-9);
    }

    #[test]
    fn bce_confident_pixel() {
        let (l, _) = bce_loss(&array![[0.99]], &array![[1.0]]).unwrap();
        assert!((l - (-(0.99f64).ln())).abs() < 1e-12);
        assert!((l - 0.01005).abs() < 1e-4);
    }

    #[test]
    fn bce_fused_gradient() {
        let (_, g) = bce_loss(&array![[0.7]], &array![[1.0]]).unwrap();
        assert!((g[[0, 0]] + 0.3).abs() < 1e-12);
        let z = (0.7f64 / 0.3).ln();
        let (_, g) = bce_with_logits(&array![[z]], &array![[1.0]]).unwrap();
        assert!((g[[0, 0]] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn bce_rejects_soft_targets() {
        assert!(matches!(
            bce_loss(&array![[0.5]], &array![[0.3]]),
            Err(Error::InvalidTarget(_))
        ));
    }

    #[test]
    fn bce_large_logits_finite() {
        let (l, g) = bce_with_logits(&array![[800.0, -800.0]], &array![[0.0, 1.0]]).unwrap();
        assert!((l - 1600.0).abs() < 1e-9);
        assert!(g.iter().all(|v| v.is_finite()));
    }
}
