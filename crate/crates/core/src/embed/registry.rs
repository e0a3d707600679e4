use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pretrained::{load_pretrained, open_text, subset};
use super::{make_one_hot, make_random_matched, EmbeddingTables, Variant};
use crate::corpus::{Role, Vocabularies, Vocabulary};
use crate::error::{Error, Result};

/// Inputs a provider may need to build its tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSource {
    pub pretrained_path: Option<PathBuf>,
    pub dim: usize,
    pub seed: u64,
}

/// Builds the subject, relation and object tables for one variant.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &'static str;

    fn variant(&self) -> Variant;

    fn build(&self, vocabs: &Vocabularies, source: &EmbeddingSource) -> Result<EmbeddingTables>;
}

pub struct OneHotProvider;

impl EmbeddingProvider for OneHotProvider {
    fn name(&self) -> &'static str {
        "1h"
    }

    fn variant(&self) -> Variant {
        Variant::OneHot
    }

    fn build(&self, vocabs: &Vocabularies, _: &EmbeddingSource) -> Result<EmbeddingTables> {
        Ok(EmbeddingTables {
            subject: make_one_hot(&vocabs.subject)?,
            relation: make_one_hot(&vocabs.relation)?,
            object: make_one_hot(&vocabs.object)?,
        })
    }
}

pub struct PretrainedProvider;

impl PretrainedProvider {
    /// Reads the vector file once for the union of the three vocabularies.
    fn load(vocabs: &Vocabularies, source: &EmbeddingSource) -> Result<EmbeddingTables> {
        let path = source.pretrained_path.as_ref().ok_or_else(|| {
            Error::Config("pretrained embeddings need a vector file (--emb-file)".into())
        })?;
        let merged = Vocabulary::from_tokens(
            Role::Object,
            [Role::Subject, Role::Relation, Role::Object]
                .iter()
                .flat_map(|r| vocabs.get(*r).tokens().iter().cloned()),
        )?;
        let (table, report) = load_pretrained(open_text(path)?, source.dim, &merged)?;
        log::info!(
            "loaded {} vectors from {} lines ({} duplicates)",
            report.found,
            report.lines,
            report.duplicates
        );
        Ok(EmbeddingTables {
            subject: subset(&table, &vocabs.subject)?,
            relation: subset(&table, &vocabs.relation)?,
            object: subset(&table, &vocabs.object)?,
        })
    }
}

impl EmbeddingProvider for PretrainedProvider {
    fn name(&self) -> &'static str {
        "emb"
    }

    fn variant(&self) -> Variant {
        Variant::Pretrained
    }

    fn build(&self, vocabs: &Vocabularies, source: &EmbeddingSource) -> Result<EmbeddingTables> {
        Self::load(vocabs, source)
    }
}

pub struct RandomMatchedProvider;

impl EmbeddingProvider for RandomMatchedProvider {
    fn name(&self) -> &'static str {
        "rnd"
    }

    fn variant(&self) -> Variant {
        Variant::RandomMatched
    }

    fn build(&self, vocabs: &Vocabularies, source: &EmbeddingSource) -> Result<EmbeddingTables> {
        let reference = PretrainedProvider::load(vocabs, source)?;
        let seed = |k: u64| source.seed.wrapping_mul(3).wrapping_add(k);
        Ok(EmbeddingTables {
            subject: make_random_matched(&reference.subject, &vocabs.subject, seed(0))?,
            relation: make_random_matched(&reference.relation, &vocabs.relation, seed(1))?,
            object: make_random_matched(&reference.object, &vocabs.object, seed(2))?,
        })
    }
}

/// Embedding variants by name.
pub struct EmbeddingRegistry {
    providers: BTreeMap<&'static str, Arc<dyn EmbeddingProvider>>,
}

impl Default for EmbeddingRegistry {
    fn default() -> Self {
        let mut reg = Self {
            providers: BTreeMap::new(),
        };
        reg.register(Arc::new(PretrainedProvider));
        reg.register(Arc::new(RandomMatchedProvider));
        reg.register(Arc::new(OneHotProvider));
        reg
    }
}

impl EmbeddingRegistry {
    pub fn register(&mut self, provider: Arc<dyn EmbeddingProvider>) {
        self.providers.insert(provider.name(), provider);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn EmbeddingProvider>> {
        self.providers
            .get(name.to_ascii_lowercase().as_str())
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "embedding",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.providers.keys().copied().collect()
    }
}
