use std::cmp::Ordering;
use std::ops::Range;

use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{fit, Encoded};
use super::{RegHead, TrainConfig};
use crate::corpus::{Instance, Role, Vocabularies};
use crate::embed::{EmbeddingTables, Variant};
use crate::error::{Error, Result};
use crate::net::{Activation, DenseLayer, DenseParams, Loss};

/// Single linear layer from one-hot words and the subject box to the four
/// REG outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearInterpreter {
    pub params: DenseParams,
    pub vocabularies: Vocabularies,
    /// Whether each word group's weights were shifted to zero mean.
    pub centered: bool,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    Largest,
    Smallest,
}

impl LinearInterpreter {
    /// Input rows occupied by a role's one-hot block.
    pub fn block(&self, role: Role) -> Range<usize> {
        let s = self.vocabularies.subject.len();
        let r = self.vocabularies.relation.len();
        let o = self.vocabularies.object.len();
        match role {
            Role::Subject => 0..s,
            Role::Relation => s..s + r,
            Role::Object => s + r..s + r + o,
        }
    }

    /// Position of a token in the concatenated input.
    pub fn input_index(&self, role: Role, token: &str) -> Result<usize> {
        Ok(self.block(role).start + self.vocabularies.get(role).require(token)?)
    }

    pub fn weight(&self, output_dim: usize, role: Role, token: &str) -> Result<f64> {
        check_dim(output_dim)?;
        Ok(self.params.layers[0].weights[[self.input_index(role, token)?, output_dim]])
    }

    /// Weights of the four subject-box inputs on an output.
    pub fn box_weights(&self, output_dim: usize) -> Result<[f64; 4]> {
        check_dim(output_dim)?;
        let w = &self.params.layers[0].weights;
        let start = self.block(Role::Object).end;
        Ok([0, 1, 2, 3].map(|k| w[[start + k, output_dim]]))
    }

    /// Moves each group's mean weight into the bias. Exactly one row per
    /// group is active for any input, so predictions are unchanged.
    fn center_groups(&mut self) {
        let blocks = [Role::Subject, Role::Relation, Role::Object].map(|r| self.block(r));
        let layer = &mut self.params.layers[0];
        for block in blocks {
            let mut rows = layer.weights.slice_mut(ndarray::s![block, ..]);
            let mean = rows.mean_axis(Axis(0)).expect("non-empty vocabulary");
            rows -= &mean;
            layer.bias += &mean;
        }
        self.centered = true;
    }
}

fn check_dim(output_dim: usize) -> Result<()> {
    if output_dim > 3 {
        return Err(Error::Config(format!("output dimension {output_dim} not in 0..=3")));
    }
    Ok(())
}

/// Fits a hidden-layer-free REG model on one-hot inputs from zero weights.
pub fn fit_linear_interpreter(
    instances: &[Instance],
    train_indices: &[usize],
    tables: &EmbeddingTables,
    config: &TrainConfig,
    center: bool,
) -> Result<LinearInterpreter> {
    for role in [Role::Subject, Role::Relation, Role::Object] {
        let variant = tables.get(role).variant();
        if variant != Variant::OneHot {
            return Err(Error::InvalidEmbedding(format!(
                "the linear interpreter needs one-hot tables, got {} for {}",
                variant.tag(),
                role.name()
            )));
        }
    }
    config.validate()?;
    let width = tables.width() + 4;
    let mut params = DenseParams::new(vec![DenseLayer::zeros(width, 4, Activation::Linear)])?;
    let data = Encoded::new(instances, train_indices, tables, config.drop_subject_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let loss_history = fit(&mut params, &data, &RegHead, Loss::Mse, config, &mut rng)?;
    let mut out = LinearInterpreter {
        params,
        vocabularies: tables.vocabularies(),
        centered: false,
        loss_history,
    };
    if center {
        out.center_groups();
    }
    Ok(out)
}

/// Tokens of `role` ordered by absolute weight on `output_dim`, ties by token.
pub fn rank_weights(
    model: &LinearInterpreter,
    output_dim: usize,
    role: Role,
    top_k: usize,
    order: RankOrder,
) -> Result<Vec<(String, f64)>> {
    check_dim(output_dim)?;
    let w = &model.params.layers[0].weights;
    let block = model.block(role);
    let mut ranked: Vec<(String, f64)> = model
        .vocabularies
        .get(role)
        .tokens()
        .iter()
        .zip(block)
        .map(|(t, row)| (t.clone(), w[[row, output_dim]]))
        .collect();
    ranked.sort_by(|a, b| {
        let by_size = a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(Ordering::Equal);
        let by_size = match order {
            RankOrder::Largest => by_size.reverse(),
            RankOrder::Smallest => by_size,
        };
        by_size.then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(top_k);
    Ok(ranked)
}
