use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Head, Provenance, TrainedModel};
use crate::corpus::{BBox, Instance, Role};
use crate::embed::EmbeddingTables;
use crate::error::{Error, Result};
use crate::net::{DenseParams, Loss, OptimizerState, RmsProp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub grid_size: usize,
    pub seed: u64,
    /// Zero the subject half-extents in the input.
    pub drop_subject_size: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-4,
            hidden: vec![100, 100],
            grid_size: 15,
            seed: 0,
            drop_subject_size: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.grid_size < 2 {
            return Err(Error::Config(format!("grid size must be >= 2, got {}", self.grid_size)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> RmsProp {
        RmsProp {
            learning_rate: self.learning_rate,
            ..RmsProp::default()
        }
    }
}

/// Training instances resolved to vocabulary indices once.
pub(crate) struct Encoded<'a> {
    tables: &'a EmbeddingTables,
    tokens: Vec<[usize; 3]>,
    subjects: Vec<BBox>,
    objects: Vec<BBox>,
    drop_size: bool,
}

impl<'a> Encoded<'a> {
    pub(crate) fn new(
        instances: &[Instance],
        indices: &[usize],
        tables: &'a EmbeddingTables,
        drop_size: bool,
    ) -> Result<Self> {
        let mut tokens = Vec::with_capacity(indices.len());
        let mut subjects = Vec::with_capacity(indices.len());
        let mut objects = Vec::with_capacity(indices.len());
        for &i in indices {
            let inst = instances
                .get(i)
                .ok_or_else(|| Error::InvalidSplit(format!("instance index {i} out of range")))?;
            tokens.push([
                tables.get(Role::Subject).vocabulary().require(&inst.subject_word)?,
                tables.get(Role::Relation).vocabulary().require(&inst.relation_word)?,
                tables.get(Role::Object).vocabulary().require(&inst.object_word)?,
            ]);
            subjects.push(inst.subject_box);
            objects.push(inst.object_box);
        }
        Ok(Self {
            tables,
            tokens,
            subjects,
            objects,
            drop_size,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.tokens.len()
    }

    fn inputs(&self, batch: &[usize]) -> Array2<f64> {
        let t = self.tables;
        let dims = [t.subject.dim(), t.relation.dim(), t.object.dim()];
        let mut x = Array2::zeros((batch.len(), t.width() + 4));
        for (mut row, &k) in x.rows_mut().into_iter().zip(batch) {
            let row = row.as_slice_mut().expect("standard layout");
            let mut offset = 0;
            for (r, role) in [Role::Subject, Role::Relation, Role::Object].into_iter().enumerate() {
                t.get(role).write_row(self.tokens[k][r], &mut row[offset..offset + dims[r]]);
                offset += dims[r];
            }
            let b = &self.subjects[k];
            row[offset] = b.center_x;
            row[offset + 1] = b.center_y;
            if !self.drop_size {
                row[offset + 2] = b.half_w;
                row[offset + 3] = b.half_h;
            }
        }
        x
    }

    fn targets(&self, batch: &[usize], head: &dyn Head, grid_size: usize) -> Array2<f64> {
        let objects: Vec<&BBox> = batch.iter().map(|&k| &self.objects[k]).collect();
        head.targets(&objects, grid_size)
    }
}

/// Shuffled mini-batch RMSprop. Returns the mean training loss per epoch.
pub(crate) fn fit(
    params: &mut DenseParams,
    data: &Encoded<'_>,
    head: &dyn Head,
    loss: Loss,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if data.len() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut state = OptimizerState::new(config.optimizer(), params);
    let output_activation = params.output_activation();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let x = data.inputs(batch);
            let y = data.targets(batch, head, config.grid_size);
            let cache = params.forward(x.view())?;
            let (value, d_logits) = loss.evaluate(&cache, output_activation, &y)?;
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss {value} at epoch {}, batch {b}",
                    epoch + 1
                )));
            }
            let grads = params.backward(&cache, &d_logits)?;
            state.step(params, &grads).map_err(|e| match e {
                Error::NonFinite(what) => {
                    Error::NonFinite(format!("{what} at epoch {}, batch {b}", epoch + 1))
                }
                other => other,
            })?;
            total += value * batch.len() as f64;
        }
        let mean = total / data.len() as f64;
        log::debug!("epoch {} loss {mean:.6}", epoch + 1);
        history.push(mean);
    }
    Ok(history)
}

/// Trains a head on `instances[train_indices]` with frozen embeddings.
pub fn train(
    instances: &[Instance],
    train_indices: &[usize],
    head: &dyn Head,
    tables: EmbeddingTables,
    config: &TrainConfig,
    provenance: Provenance,
) -> Result<TrainedModel> {
    config.validate()?;
    if train_indices.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = DenseParams::glorot(
        tables.width() + 4,
        &config.hidden,
        head.output_width(config.grid_size),
        head.output_activation(),
        &mut rng,
    );
    let data = Encoded::new(instances, train_indices, &tables, config.drop_subject_size)?;
    let loss_history = fit(&mut params, &data, head, head.loss(), config, &mut rng)?;
    drop(data);
    let model = TrainedModel {
        head: head.kind(),
        params,
        tables,
        config: config.clone(),
        provenance,
        loss_history,
    };
    model.validate()?;
    Ok(model)
}
