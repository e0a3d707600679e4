//! Evaluation metrics, the random control baseline and the fold harness.

mod eval;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::BBox;
use crate::error::{Error, Result};

pub use eval::{
    cross_validate, evaluate, evaluate_fold, format_table, run_folds, EvalOptions, EvalReport, FoldReport,
    Method, MetricValues,
};

/// Number of evenly spaced thresholds in the mIoU sweep (`0.00 ..= 1.00`).
pub const MIOU_THRESHOLDS: usize = 101;

fn check_aligned(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a} predictions vs {b} truths")));
    }
    if a == 0 {
        return Err(Error::Metric(format!("{what} of an empty set")));
    }
    Ok(())
}

/// Axis-aligned intersection over union. Two empty boxes give 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let h = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Fraction of pairs whose IoU is strictly above 0.5.
pub fn iou_accuracy(predictions: &[BBox], truths: &[BBox]) -> Result<f64> {
    check_aligned(predictions.len(), truths.len(), "IoU accuracy")?;
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| iou(p, t) > 0.5)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R2Weighting {
    /// Mean of the per-dimension scores.
    #[default]
    Uniform,
    /// `1 - sum(SS_res) / sum(SS_tot)` over dimensions.
    Variance,
}

/// Constant inputs can leave a rounding residue in the sum of squares, so
/// zero variance is decided on the values themselves.
fn is_constant<'a>(mut values: impl Iterator<Item = &'a f64>) -> bool {
    match values.next() {
        Some(first) => values.all(|v| v == first),
        None => true,
    }
}

/// Coefficient of determination over the columns of `truths`. Columns with
/// zero variance are skipped with a warning.
pub fn r_squared(predictions: ArrayView2<f64>, truths: ArrayView2<f64>, weighting: R2Weighting) -> Result<f64> {
    if predictions.dim() != truths.dim() {
        return Err(Error::Shape(format!(
            "R^2: predictions {:?} vs truths {:?}",
            predictions.dim(),
            truths.dim()
        )));
    }
    if truths.nrows() < 2 {
        return Err(Error::Metric("R^2 needs at least 2 instances".into()));
    }
    let mean = truths.mean_axis(Axis(0)).expect("non-empty");
    let mut scores = Vec::new();
    let (mut res_total, mut tot_total) = (0.0, 0.0);
    for d in 0..truths.ncols() {
        let (y, p) = (truths.column(d), predictions.column(d));
        let ss_tot: f64 = y.iter().map(|v| (v - mean[d]).powi(2)).sum();
        let ss_res: f64 = y.iter().zip(p.iter()).map(|(v, q)| (v - q).powi(2)).sum();
        if is_constant(y.iter()) {
            log::warn!("R^2: truth dimension {d} has zero variance and is excluded");
            continue;
        }
        scores.push(1.0 - ss_res / ss_tot);
        res_total += ss_res;
        tot_total += ss_tot;
    }
    if scores.is_empty() {
        return Err(Error::Metric("R^2: every truth dimension has zero variance".into()));
    }
    Ok(match weighting {
        R2Weighting::Uniform => scores.iter().sum::<f64>() / scores.len() as f64,
        R2Weighting::Variance => 1.0 - res_total / tot_total,
    })
}

/// Sample Pearson correlation.
pub fn pearson(xs: ArrayView1<f64>, ys: ArrayView1<f64>) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("pearson: {} vs {} values", xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Metric("pearson needs at least 2 values".into()));
    }
    let mx = xs.sum() / n as f64;
    let my = ys.sum() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys.iter()) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if is_constant(xs.iter()) || is_constant(ys.iter()) {
        return Err(Error::Metric("pearson: zero variance".into()));
    }
    let denom = (n - 1) as f64;
    let r = (sxy / denom) / ((sxx / denom).sqrt() * (syy / denom).sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroAccuracy {
    /// Mean of the per-class recalls.
    #[default]
    MeanRecall,
    /// Fraction of instances whose class is predicted correctly.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AboveBelow {
    pub accuracy: f64,
    pub f1: f64,
}

/// 0 = above (`O_y < S_y`), 1 = below; a zero difference counts as below.
fn vertical_class(object_y: f64, subject_y: f64) -> usize {
    if object_y - subject_y < 0.0 {
        0
    } else {
        1
    }
}

/// Macro-averaged above/below classification from center `y` values.
pub fn above_below(
    predicted_y: &[f64],
    true_y: &[f64],
    subject_y: &[f64],
    mode: MacroAccuracy,
) -> Result<AboveBelow> {
    check_aligned(predicted_y.len(), true_y.len(), "above/below")?;
    check_aligned(subject_y.len(), true_y.len(), "above/below subjects")?;
    // confusion[truth][predicted]
    let mut confusion = [[0usize; 2]; 2];
    for ((p, t), s) in predicted_y.iter().zip(true_y).zip(subject_y) {
        confusion[vertical_class(*t, *s)][vertical_class(*p, *s)] += 1;
    }
    let mut recalls = Vec::new();
    let mut f1s = Vec::new();
    for (c, name) in [(0, "above"), (1, "below")] {
        let support = confusion[c][0] + confusion[c][1];
        if support == 0 {
            log::warn!("above/below: no {name} instances in the truths; class excluded");
            continue;
        }
        let tp = confusion[c][c];
        let fp = confusion[1 - c][c];
        let fn_ = support - tp;
        recalls.push(tp as f64 / support as f64);
        f1s.push(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
    }
    let correct = confusion[0][0] + confusion[1][1];
    let accuracy = match mode {
        MacroAccuracy::MeanRecall => recalls.iter().sum::<f64>() / recalls.len() as f64,
        MacroAccuracy::Plain => correct as f64 / true_y.len() as f64,
    };
    Ok(AboveBelow {
        accuracy,
        f1: f1s.iter().sum::<f64>() / f1s.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiouResult {
    pub value: f64,
    pub threshold: f64,
}

/// Pooled pixel counts for the threshold sweep, filled one grid at a time.
#[derive(Debug, Clone)]
pub struct PixelSweep {
    thresholds: Vec<f64>,
    /// `hist[class][k]`: pixels of `class` whose activation exceeds exactly
    /// the first `k` thresholds.
    hist: [Vec<u64>; 2],
}

impl Default for PixelSweep {
    fn default() -> Self {
        let thresholds: Vec<f64> = (0..MIOU_THRESHOLDS).map(|k| k as f64 / 100.0).collect();
        Self {
            hist: [vec![0; MIOU_THRESHOLDS + 1], vec![0; MIOU_THRESHOLDS + 1]],
            thresholds,
        }
    }
}

impl PixelSweep {
    pub fn add(&mut self, activations: &[f64], targets: &[f64]) -> Result<()> {
        if activations.len() != targets.len() {
            return Err(Error::Shape(format!(
                "mIoU: grid of {} cells vs target of {}",
                activations.len(),
                targets.len()
            )));
        }
        for (&a, &y) in activations.iter().zip(targets) {
            let class = if y == 1.0 {
                1
            } else if y == 0.0 {
                0
            } else {
                return Err(Error::InvalidTarget(format!("pixel target {y} is not 0 or 1")));
            };
            let above = self.thresholds.partition_point(|&t| t < a);
            self.hist[class][above] += 1;
        }
        Ok(())
    }

    /// Best macro-averaged two-class recall over the sweep.
    pub fn finish(&self) -> Result<MiouResult> {
        let totals = [self.hist[0].iter().sum::<u64>(), self.hist[1].iter().sum::<u64>()];
        if totals[0] == 0 || totals[1] == 0 {
            return Err(Error::Metric(
                "mIoU needs both object and background pixels in the targets".into(),
            ));
        }
        // positives[class] at threshold k = pixels exceeding more than k thresholds.
        let mut pos = [totals[0], totals[1]];
        let mut best = MiouResult {
            value: f64::NEG_INFINITY,
            threshold: 0.0,
        };
        for (k, &t) in self.thresholds.iter().enumerate() {
            for c in 0..2 {
                pos[c] -= self.hist[c][k];
            }
            let object_recall = pos[1] as f64 / totals[1] as f64;
            let background_recall = (totals[0] - pos[0]) as f64 / totals[0] as f64;
            let value = (object_recall + background_recall) / 2.0;
            if value > best.value {
                best = MiouResult { value, threshold: t };
            }
        }
        Ok(best)
    }
}

/// Best mIoU over thresholds `0.00, 0.01, ..., 1.00`, pooling all pixels.
/// Rows are flattened grids.
pub fn mean_iou_pixels(heatmaps: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<MiouResult> {
    if heatmaps.dim() != targets.dim() {
        return Err(Error::Shape(format!(
            "mIoU: heatmaps {:?} vs targets {:?}",
            heatmaps.dim(),
            targets.dim()
        )));
    }
    let mut sweep = PixelSweep::default();
    for (h, t) in heatmaps.rows().into_iter().zip(targets.rows()) {
        sweep.add(&h.to_vec(), &t.to_vec())?;
    }
    sweep.finish()
}

/// Column mean and sample standard deviation (0 for a single row).
pub fn target_moments(targets: ArrayView2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if targets.nrows() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut mean = targets.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let mut sd = if targets.nrows() < 2 {
        vec![0.0; targets.ncols()]
    } else {
        targets.std_axis(Axis(0), 1.0).to_vec()
    };
    for (d, col) in targets.columns().into_iter().enumerate() {
        if col.iter().all(|&v| v == col[0]) {
            mean[d] = col[0];
            sd[d] = 0.0;
        }
    }
    Ok((mean, sd))
}

/// `n_test` draws per column from `Normal(mean, sd)` of the training targets.
pub fn ctrl_baseline(train_targets: ArrayView2<f64>, n_test: usize, seed: u64) -> Result<Array2<f64>> {
    let (mean, sd) = target_moments(train_targets)?;
    let dists: Vec<Normal<f64>> = mean
        .iter()
        .zip(&sd)
        .map(|(&m, &s)| Normal::new(m, s).map_err(|e| Error::Metric(e.to_string())))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((n_test, mean.len()));
    for mut row in out.rows_mut() {
        for (v, d) in row.iter_mut().zip(&dists) {
            *v = d.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Uniform `[0, 1)` activations, one row per grid.
pub fn ctrl_heatmaps(n_test: usize, cells: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n_test, cells), |_| rng.gen::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::Rng;
    use proptest::prelude::*;

    fn raster_iou(a: &BBox, b: &BBox, n: usize) -> f64 {
        let (mut inter, mut union) = (0u64, 0u64);
        let inside = |bx: &BBox, x: f64, y: f64| {
            x >= bx.left() && x < bx.right() && y >= bx.top() && y < bx.bottom()
        };
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((j as f64 + 0.5) / n as f64, (i as f64 + 0.5) / n as f64);
                let (p, q) = (inside(a, x, y), inside(b, x, y));
                inter += (p && q) as u64;
                union += (p || q) as u64;
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.5, 0.5, 0.25, 0.25);
        let b = BBox::new(0.75, 0.5, 0.25, 0.25);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(0.1, 0.1, 0.05, 0.05)), 0.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert!((raster_iou(&a, &b, 1000) - 1.0 / 3.0).abs() < 2e-3);
        let z = BBox::new(0.5, 0.5, 0.0, 0.0);
        assert_eq!(iou(&z, &z), 0.0);
    }

    #[test]
    fn iou_accuracy_strict() {
        // Same height, widths 0.5 and 0.25 nested: IoU exactly 0.5.
        let t = BBox::new(0.5, 0.5, 0.25, 0.25);
        let p = BBox::new(0.375, 0.5, 0.125, 0.25);
        assert_eq!(iou(&p, &t), 0.5);
        assert_eq!(iou_accuracy(&[p], &[t]).unwrap(), 0.0);
        assert_eq!(iou_accuracy(&[t, t], &[t, t]).unwrap(), 1.0);
        assert!(iou_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn r_squared_trivial() {
        let y = array![[0.1, 0.9, 0.3, 0.2], [0.4, 0.2, 0.1, 0.1], [0.7, 0.5, 0.2, 0.3]];
        assert_eq!(r_squared(y.view(), y.view(), R2Weighting::Uniform).unwrap(), 1.0);
        let mean = y.mean_axis(Axis(0)).unwrap();
        let constant = Array2::from_shape_fn(y.dim(), |(_, d)| mean[d]);
        assert_eq!(r_squared(constant.view(), y.view(), R2Weighting::Uniform).unwrap(), 0.0);
        assert_eq!(r_squared(constant.view(), y.view(), R2Weighting::Variance).unwrap(), 0.0);
    }

    #[test]
    fn r_squared_skips_constant_dimension() {
        let y = array![[0.1, 0.5], [0.3, 0.5], [0.2, 0.5]];
        let p = array![[0.1, 0.0], [0.3, 0.0], [0.2, 0.0]];
        assert_eq!(r_squared(p.view(), y.view(), R2Weighting::Uniform).unwrap(), 1.0);
        let flat = array![[0.5], [0.5]];
        assert!(r_squared(flat.view(), flat.view(), R2Weighting::Uniform).is_err());
        let flat = Array2::from_elem((30, 1), 0.1);
        assert!(r_squared(flat.view(), flat.view(), R2Weighting::Uniform).is_err());
    }

    #[test]
    fn r_squared_weightings_differ() {
        let y = array![[0.0, 0.0], [1.0, 0.1], [2.0, 0.2]];
        let p = array![[0.0, 0.1], [1.0, 0.1], [2.0, 0.1]];
        // dim 0 perfect; dim 1: SS_res = 0.02, SS_tot = 0.02 -> 0.
        let u = r_squared(p.view(), y.view(), R2Weighting::Uniform).unwrap();
        let v = r_squared(p.view(), y.view(), R2Weighting::Variance).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
        assert!((v - (1.0 - 0.02 / 2.02)).abs() < 1e-12);
    }

    #[test]
    fn pearson_trivial() {
        let x = array![0.1, 0.5, 0.2, 0.9];
        assert!((pearson(x.view(), x.view()).unwrap() - 1.0).abs() < 1e-15);
        let neg = x.mapv(|v| -v);
        assert!((pearson(x.view(), neg.view()).unwrap() + 1.0).abs() < 1e-15);
        let flat = Array1::from_elem(4, 0.3);
        assert!(matches!(pearson(x.view(), flat.view()), Err(Error::Metric(_))));
        // the mean of 30 copies of 0.4 is not exactly 0.4
        let long = Array1::from_iter((0..30).map(|i| i as f64));
        let flat = Array1::from_elem(30, 0.4);
        assert!(matches!(pearson(long.view(), flat.view()), Err(Error::Metric(_))));
    }

    #[test]
    fn above_below_examples() {
        let s = [0.5, 0.5, 0.5, 0.5];
        let t = [0.2, 0.3, 0.7, 0.9];
        let r = above_below(&t, &t, &s, MacroAccuracy::MeanRecall).unwrap();
        assert_eq!((r.accuracy, r.f1), (1.0, 1.0));
        let flipped = [0.8, 0.7, 0.3, 0.1];
        let r = above_below(&flipped, &t, &s, MacroAccuracy::MeanRecall).unwrap();
        assert_eq!(r.accuracy, 0.0);
        // Zero difference counts as below.
        let r = above_below(&[0.5], &[0.9], &[0.5], MacroAccuracy::MeanRecall).unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn above_below_imbalanced_modes() {
        // 3 above, 1 below; everything predicted above.
        let s = [0.5; 4];
        let t = [0.1, 0.2, 0.3, 0.9];
        let p = [0.1; 4];
        let balanced = above_below(&p, &t, &s, MacroAccuracy::MeanRecall).unwrap();
        let plain = above_below(&p, &t, &s, MacroAccuracy::Plain).unwrap();
        assert_eq!(balanced.accuracy, 0.5);
        assert_eq!(plain.accuracy, 0.75);
        // F1: above 2*3/(6+1) = 6/7, below 0.
        assert!((balanced.f1 - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn miou_examples() {
        let targets = Array2::from_shape_fn((4, 225), |(i, j)| ((i * 225 + j) % 20 == 0) as u8 as f64);
        let perfect = mean_iou_pixels(targets.view(), targets.view()).unwrap();
        assert_eq!(perfect.value, 1.0);
        let zeros = Array2::zeros((4, 225));
        assert_eq!(mean_iou_pixels(zeros.view(), targets.view()).unwrap().value, 0.5);
        let all_bg = Array2::zeros((2, 4));
        assert!(mean_iou_pixels(all_bg.view(), all_bg.view()).is_err());
    }

    #[test]
    fn miou_uniform_random_is_half() {
        let targets = Array2::from_shape_fn((2000, 225), |(i, j)| ((i + j) % 19 == 0) as u8 as f64);
        let h = ctrl_heatmaps(2000, 225, 4);
        let r = mean_iou_pixels(h.view(), targets.view()).unwrap();
        assert!((r.value - 0.5).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn ctrl_moments() {
        let constant = Array2::from_elem((10, 4), 0.3);
        let draws = ctrl_baseline(constant.view(), 5, 1).unwrap();
        assert!(draws.iter().all(|&v| v == 0.3));

        let train = Array2::from_shape_fn((500, 2), |(i, d)| ((i * 7 + d * 3) % 50) as f64 / 50.0);
        let (mu, sd) = target_moments(train.view()).unwrap();
        let n = 20_000;
        let draws = ctrl_baseline(train.view(), n, 2).unwrap();
        for d in 0..2 {
            let m = draws.column(d).mean().unwrap();
            assert!((m - mu[d]).abs() < 4.0 * sd[d] / (n as f64).sqrt());
        }
    }

    #[test]
    fn ctrl_r_squared_near_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = Array2::from_shape_fn((20_000, 4), |(_, d)| 0.2 * d as f64 + rng.gen::<f64>());
        let pred = ctrl_baseline(truth.view(), 20_000, 9).unwrap();
        let r2 = r_squared(pred.view(), truth.view(), R2Weighting::Uniform).unwrap();
        assert!((r2 + 1.0).abs() < 0.05, "{r2}");
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_matches_raster(
            ax in 0.1f64..0.9, ay in 0.1f64..0.9, aw in 0.02f64..0.4, ah in 0.02f64..0.4,
            bx in 0.1f64..0.9, by in 0.1f64..0.9, bw in 0.02f64..0.4, bh in 0.02f64..0.4,
        ) {
            let a = BBox::new(ax, ay, aw, ah);
            let b = BBox::new(bx, by, bw, bh);
            prop_assert_eq!(iou(&a, &b), iou(&b, &a));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pearson_affine_invariant(
            xs in proptest::collection::vec(-5.0f64..5.0, 3..40),
            noise in proptest::collection::vec(-1.0f64..1.0, 40),
            a in 0.1f64..10.0, b in -5.0f64..5.0,
        ) {
            let x = Array1::from(xs.clone());
            let y = Array1::from_iter(xs.iter().zip(&noise).map(|(v, e)| v + e));
            prop_assume!(x.std(0.0) > 1e-6 && y.std(0.0) > 1e-6);
            let r = pearson(x.view(), y.view()).unwrap();
            let moved = x.mapv(|v| a * v + b);
            prop_assert!((pearson(moved.view(), y.view()).unwrap() - r).abs() < 1e-9);
        }

        #[test]
        fn sign_flip_complements_balanced_accuracy(
            pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 4..60),
        ) {
            let subj = vec![0.5; pairs.len()];
            let truth: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(truth.iter().any(|&t| t < 0.5) && truth.iter().any(|&t| t > 0.5));
            prop_assume!(pred.iter().all(|&p| p != 0.5));
            let flipped: Vec<f64> = pred.iter().map(|p| 1.0 - p).collect();
            let a = above_below(&pred, &truth, &subj, MacroAccuracy::MeanRecall).unwrap().accuracy;
            let b = above_below(&flipped, &truth, &subj, MacroAccuracy::MeanRecall).unwrap().accuracy;
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn miou_monotone_invariant(
            levels in proptest::collection::vec(0usize..100, 30),
            labels in proptest::collection::vec(proptest::bool::ANY, 30),
            power in 0.3f64..3.0,
        ) {
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            // Activations sit strictly between thresholds; the transform maps
            // each gap midpoint to the midpoint of another gap, preserving order.
            let mid = |k: usize| (k as f64 + 0.5) / 100.0;
            let h = Array2::from_shape_fn((1, 30), |(_, j)| mid(levels[j]));
            let targets = Array2::from_shape_fn((1, 30), |(_, j)| labels[j] as u8 as f64);
            let mut order: Vec<usize> = levels.clone();
            order.sort();
            order.dedup();
            let remap = |k: usize| {
                let rank = order.iter().position(|&v| v == k).unwrap();
                let spread = (rank as f64 + 1.0) / (order.len() as f64 + 1.0);
                ((spread.powf(power) * 99.0).round() as usize).min(99)
            };
            let mapped: Vec<usize> = order.iter().map(|&k| remap(k)).collect();
            prop_assume!(mapped.windows(2).all(|w| w[0] < w[1]));
            let g = Array2::from_shape_fn((1, 30), |(_, j)| mid(remap(levels[j])));
            let a = mean_iou_pixels(h.view(), targets.view()).unwrap().value;
            let b = mean_iou_pixels(g.view(), targets.view()).unwrap().value;
            prop_assert_eq!(a, b);
        }
    }

}
