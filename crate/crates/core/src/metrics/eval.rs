use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    above_below, ctrl_baseline, ctrl_heatmaps, iou_accuracy, pearson, r_squared, MacroAccuracy, PixelSweep,
    R2Weighting,
};
use crate::corpus::{BBox, Fold, Instance, SplitPlan};
use crate::embed::EmbeddingTables;
use crate::error::{Error, Result};
use crate::templates::{
    heatmap_center, rasterize_box, train, FoldModel, Head, HeadKind, Provenance, Query, TrainConfig,
    TrainedModel,
};

/// What produces the predictions being scored.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Model(&'a TrainedModel),
    /// Random predictions matched to the training targets.
    Ctrl {
        head: HeadKind,
        grid_size: usize,
        seed: u64,
    },
}

impl Method<'_> {
    pub fn label(&self) -> String {
        match self {
            Method::Model(m) => m.label(),
            Method::Ctrl { head, .. } => format!("CTRL_{}", head.tag()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub r2_weighting: R2Weighting,
    pub macro_accuracy: MacroAccuracy,
}

/// One value per column of the results table. `None` means the metric does
/// not apply to the head (or is undefined on this fold).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub r2: Option<f64>,
    pub acc_y: Option<f64>,
    pub f1_y: Option<f64>,
    pub r_x: Option<f64>,
    pub r_y: Option<f64>,
    pub iou: Option<f64>,
    pub miou: Option<f64>,
    pub miou_threshold: Option<f64>,
}

impl MetricValues {
    fn fields(&self) -> [Option<f64>; 8] {
        [
            self.r2,
            self.acc_y,
            self.f1_y,
            self.r_x,
            self.r_y,
            self.iou,
            self.miou,
            self.miou_threshold,
        ]
    }

    fn from_fields(f: [Option<f64>; 8]) -> Self {
        Self {
            r2: f[0],
            acc_y: f[1],
            f1_y: f[2],
            r_x: f[3],
            r_y: f[4],
            iou: f[5],
            miou: f[6],
            miou_threshold: f[7],
        }
    }

    /// Per-field arithmetic mean; absent if any fold lacks the field.
    pub fn mean(values: &[MetricValues]) -> MetricValues {
        let mut out = [None; 8];
        for (k, slot) in out.iter_mut().enumerate() {
            let col: Option<Vec<f64>> = values.iter().map(|v| v.fields()[k]).collect();
            *slot = col
                .filter(|c| !c.is_empty())
                .map(|c| c.iter().sum::<f64>() / c.len() as f64);
        }
        Self::from_fields(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: MetricValues,
    /// REG predictions with a negative half-extent.
    pub negative_half_predictions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub split: String,
    pub options: EvalOptions,
    pub folds: Vec<FoldReport>,
    pub mean: MetricValues,
    pub n_test_total: usize,
    pub config: Value,
}

fn check_provenance(model: &Provenance, corpus: &Provenance) -> Result<()> {
    if model != corpus {
        let show = |p: &Provenance| format!("{} (mirrored: {})", p.stoplist_hash, p.mirrored);
        return Err(Error::Provenance {
            model: show(model),
            corpus: show(corpus),
        });
    }
    Ok(())
}

fn optional(metric: &str, value: Result<f64>) -> Result<Option<f64>> {
    match value {
        Ok(v) => Ok(Some(v)),
        Err(Error::Metric(reason)) => {
            log::warn!("{metric} undefined: {reason}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn select<'a>(instances: &'a [Instance], indices: &[usize]) -> Result<Vec<&'a Instance>> {
    indices
        .iter()
        .map(|&i| {
            instances
                .get(i)
                .ok_or_else(|| Error::InvalidSplit(format!("instance index {i} out of range")))
        })
        .collect()
}

fn box_matrix<'a>(boxes: impl ExactSizeIterator<Item = &'a BBox>) -> Array2<f64> {
    let n = boxes.len();
    let mut out = Array2::zeros((n, 4));
    for (mut row, b) in out.rows_mut().into_iter().zip(boxes) {
        row.assign(&Array1::from(b.to_array().to_vec()));
    }
    out
}

/// Center-based metrics shared by both heads.
fn center_metrics(
    pred_centers: &Array2<f64>,
    test: &[&Instance],
    opts: &EvalOptions,
    out: &mut MetricValues,
) -> Result<()> {
    let true_x: Array1<f64> = test.iter().map(|i| i.object_box.center_x).collect();
    let true_y: Array1<f64> = test.iter().map(|i| i.object_box.center_y).collect();
    let subj_y: Vec<f64> = test.iter().map(|i| i.subject_box.center_y).collect();
    let pred_y = pred_centers.column(1).to_vec();
    let ab = above_below(&pred_y, true_y.as_slice().expect("contiguous"), &subj_y, opts.macro_accuracy)?;
    out.acc_y = Some(ab.accuracy);
    out.f1_y = Some(ab.f1);
    out.r_x = optional("r_x", pearson(pred_centers.column(0), true_x.view()))?;
    out.r_y = optional("r_y", pearson(pred_centers.column(1), true_y.view()))?;
    Ok(())
}

/// Scores one fold's test instances.
pub fn evaluate_fold(
    method: &Method<'_>,
    instances: &[Instance],
    fold: &Fold,
    fold_index: usize,
    corpus: &Provenance,
    opts: &EvalOptions,
) -> Result<FoldReport> {
    let test = select(instances, &fold.test)?;
    if test.is_empty() {
        return Err(Error::InvalidSplit(format!("fold {} has no test instances", fold.name)));
    }
    let truths = box_matrix(test.iter().map(|i| &i.object_box));
    let mut metrics = MetricValues::default();
    let mut negative_half = None;

    let (head, grid_size) = match method {
        Method::Model(m) => {
            check_provenance(&m.provenance, corpus)?;
            (m.head, m.config.grid_size)
        }
        Method::Ctrl { head, grid_size, .. } => (*head, *grid_size),
    };

    match (head, method) {
        (HeadKind::Reg, _) => {
            let preds = match method {
                Method::Model(m) => {
                    let queries: Vec<Query> = test.iter().map(|i| Query::from(*i)).collect();
                    m.predict_raw(&queries)?
                }
                Method::Ctrl { seed, .. } => {
                    let train = select(instances, &fold.train)?;
                    let targets = box_matrix(train.iter().map(|i| &i.object_box));
                    ctrl_baseline(targets.view(), test.len(), *seed)?
                }
            };
            metrics.r2 = optional("R^2", r_squared(preds.view(), truths.view(), opts.r2_weighting))?;
            let centers = preds.slice(ndarray::s![.., 0..2]).to_owned();
            center_metrics(&centers, &test, opts, &mut metrics)?;
            let pred_boxes: Vec<BBox> = preds
                .rows()
                .into_iter()
                .map(|r| BBox::new(r[0], r[1], r[2], r[3]))
                .collect();
            let true_boxes: Vec<BBox> = test.iter().map(|i| i.object_box).collect();
            metrics.iou = Some(iou_accuracy(&pred_boxes, &true_boxes)?);
            negative_half = Some(pred_boxes.iter().filter(|b| b.half_w < 0.0 || b.half_h < 0.0).count());
        }
        (HeadKind::Pix, _) => {
            let cells = grid_size * grid_size;
            let heatmaps = match method {
                Method::Model(m) => {
                    let queries: Vec<Query> = test.iter().map(|i| Query::from(*i)).collect();
                    m.predict_raw(&queries)?
                }
                Method::Ctrl { seed, .. } => ctrl_heatmaps(test.len(), cells, *seed),
            };
            if heatmaps.ncols() != cells {
                return Err(Error::Shape(format!(
                    "heatmaps have {} cells, grid size {grid_size} needs {cells}",
                    heatmaps.ncols()
                )));
            }
            let centers = match method {
                Method::Model(_) => {
                    let mut c = Array2::zeros((test.len(), 2));
                    for (k, row) in heatmaps.rows().into_iter().enumerate() {
                        let grid = crate::templates::HeatmapGrid::from_flat(row.as_slice().expect("standard layout"))?;
                        let [x, y] = heatmap_center(&grid);
                        c[[k, 0]] = x;
                        c[[k, 1]] = y;
                    }
                    c
                }
                Method::Ctrl { seed, .. } => {
                    let train = select(instances, &fold.train)?;
                    let mut targets = Array2::zeros((train.len(), 2));
                    for (k, i) in train.iter().enumerate() {
                        targets[[k, 0]] = i.object_box.center_x;
                        targets[[k, 1]] = i.object_box.center_y;
                    }
                    ctrl_baseline(targets.view(), test.len(), seed.wrapping_add(1))?
                }
            };
            center_metrics(&centers, &test, opts, &mut metrics)?;
            let mut sweep = PixelSweep::default();
            for (row, inst) in heatmaps.rows().into_iter().zip(&test) {
                let target = rasterize_box(&inst.object_box, grid_size)?;
                sweep.add(
                    row.as_slice().expect("standard layout"),
                    target.as_slice().expect("standard layout"),
                )?;
            }
            let best = sweep.finish()?;
            metrics.miou = Some(best.value);
            metrics.miou_threshold = Some(best.threshold);
        }
    }

    Ok(FoldReport {
        fold: fold_index,
        name: fold.name.clone(),
        n_train: fold.train.len(),
        n_test: test.len(),
        metrics,
        negative_half_predictions: negative_half,
    })
}

/// Runs `f` for each fold on up to `jobs` threads; results keep fold order.
pub fn run_folds<T, F>(folds: &[usize], jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if jobs <= 1 || folds.len() <= 1 {
        return folds.iter().map(|&k| f(k)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| folds.par_iter().map(|&k| f(k)).collect())
}

/// Scores a method on each `(fold index, method)` pair and averages.
pub fn evaluate(
    methods: &[(usize, Method<'_>)],
    instances: &[Instance],
    plan: &SplitPlan,
    corpus: &Provenance,
    opts: &EvalOptions,
    config: Value,
    jobs: usize,
) -> Result<EvalReport> {
    let label = methods
        .first()
        .map(|(_, m)| m.label())
        .ok_or_else(|| Error::Config("nothing to evaluate".into()))?;
    let order: Vec<usize> = (0..methods.len()).collect();
    let folds = run_folds(&order, jobs, |k| {
        let (fold_index, method) = &methods[k];
        evaluate_fold(method, instances, plan.fold(*fold_index)?, *fold_index, corpus, opts)
    })?;
    let values: Vec<MetricValues> = folds.iter().map(|f| f.metrics.clone()).collect();
    Ok(EvalReport {
        method: label,
        split: plan.mode.to_string(),
        options: *opts,
        mean: MetricValues::mean(&values),
        n_test_total: folds.iter().map(|f| f.n_test).sum(),
        folds,
        config,
    })
}

/// Trains one model per fold, then scores each on its fold's test set.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    instances: &[Instance],
    plan: &SplitPlan,
    folds: &[usize],
    head: &dyn Head,
    tables: &EmbeddingTables,
    config: &TrainConfig,
    provenance: &Provenance,
    opts: &EvalOptions,
    run_config: Value,
    jobs: usize,
) -> Result<(Vec<FoldModel>, EvalReport)> {
    let models = run_folds(folds, jobs, |k| {
        let fold = plan.fold(k)?;
        log::info!("training {} fold {} ({} instances)", head.kind(), fold.name, fold.train.len());
        let model = train(instances, &fold.train, head, tables.clone(), config, provenance.clone())?;
        Ok(FoldModel { fold: k, model })
    })?;
    let methods: Vec<(usize, Method<'_>)> = models.iter().map(|m| (m.fold, Method::Model(&m.model))).collect();
    let report = evaluate(&methods, instances, plan, provenance, opts, run_config, jobs)?;
    Ok((models, report))
}

/// Aligned plain-text table in the column order R2, acc_y, F1_y, r_x, r_y, IoU, mIoU.
pub fn format_table(report: &EvalReport) -> String {
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<14} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "method", "fold", "R2", "acc_y", "F1_y", "r_x", "r_y", "IoU", "mIoU"
    );
    let mut line = |name: &str, m: &MetricValues| {
        let _ = writeln!(
            out,
            "{:<10} {:<14} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            report.method,
            name,
            cell(m.r2),
            cell(m.acc_y),
            cell(m.f1_y),
            cell(m.r_x),
            cell(m.r_y),
            cell(m.iou),
            cell(m.miou)
        );
    };
    for f in &report.folds {
        line(&f.name, &f.metrics);
    }
    line("mean", &report.mean);
    out
}
