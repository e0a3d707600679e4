use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::TrainedModel;
use crate::error::{Error, Result};

pub const BUNDLE_FORMAT: &str = "spatial-templates-model";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub fold: usize,
    pub model: TrainedModel,
}

/// Checkpoint file: one trained model per fold plus the producing config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub run_config: Value,
    pub models: Vec<FoldModel>,
}

impl ModelBundle {
    pub fn new(run_config: Value, models: Vec<FoldModel>) -> Self {
        Self {
            format: BUNDLE_FORMAT.to_string(),
            version: BUNDLE_VERSION,
            run_config,
            models,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != BUNDLE_FORMAT || self.version != BUNDLE_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        if self.models.is_empty() {
            return Err(Error::Config("checkpoint holds no models".into()));
        }
        self.models.iter().try_for_each(|m| m.model.validate())
    }

    /// The model for `fold`, or the only model when the bundle holds one.
    pub fn model_for_fold(&self, fold: Option<usize>) -> Result<&TrainedModel> {
        match fold {
            Some(f) => self
                .models
                .iter()
                .find(|m| m.fold == f)
                .map(|m| &m.model)
                .ok_or_else(|| Error::Config(format!("checkpoint has no model for fold {f}"))),
            None if self.models.len() == 1 => Ok(&self.models[0].model),
            None => Err(Error::Config(format!(
                "checkpoint holds {} fold models; pick one with --fold",
                self.models.len()
            ))),
        }
    }
}

pub fn write_bundle<W: Write>(mut out: W, bundle: &ModelBundle) -> Result<()> {
    serde_json::to_writer(&mut out, bundle)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_bundle<R: Read>(reader: R) -> Result<ModelBundle> {
    let bundle: ModelBundle = serde_json::from_reader(reader)?;
    bundle.validate()?;
    Ok(bundle)
}

pub fn save_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_bundle(BufWriter::new(file), bundle)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_bundle(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabs, default_rules, generate_synthetic};
    use crate::embed::{make_one_hot, EmbeddingTables};
    use crate::templates::{train, PixHead, Provenance, TrainConfig};

    #[test]
    fn round_trip_is_value_exact() {
        let corpus = generate_synthetic(&default_rules(), 64, 0.02, 9).unwrap();
        let v = build_vocabs(&corpus).unwrap();
        let tables = EmbeddingTables {
            subject: make_one_hot(&v.subject).unwrap(),
            relation: make_one_hot(&v.relation).unwrap(),
            object: make_one_hot(&v.object).unwrap(),
        };
        let config = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let idx: Vec<usize> = (0..64).collect();
        let prov = Provenance {
            stoplist_hash: "abc".into(),
            mirrored: true,
        };
        let model = train(&corpus, &idx, &PixHead, tables, &config, prov).unwrap();
        let bundle = ModelBundle::new(serde_json::json!({"seed": 1}), vec![FoldModel { fold: 0, model }]);
        let mut buf = Vec::new();
        write_bundle(&mut buf, &bundle).unwrap();
        let back = read_bundle(buf.as_slice()).unwrap();
        assert_eq!(back, bundle);
        let a = &bundle.models[0].model.params.layers[2].weights;
        let b = &back.models[0].model.params.layers[2].weights;
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let mut again = Vec::new();
        write_bundle(&mut again, &back).unwrap();
        assert_eq!(buf, again);
        assert!(bundle.model_for_fold(Some(3)).is_err());
        assert!(bundle.model_for_fold(None).is_ok());
    }
}
