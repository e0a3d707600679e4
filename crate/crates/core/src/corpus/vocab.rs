use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize};

use super::Instance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Subject,
    Relation,
    Object,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Subject => "subject",
            Role::Relation => "relation",
            Role::Object => "object",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subject" | "s" => Ok(Role::Subject),
            "relation" | "r" => Ok(Role::Relation),
            "object" | "o" => Ok(Role::Object),
            other => Err(Error::Config(format!("unknown role {other:?}"))),
        }
    }
}

/// Ordered unique tokens with stable indices `0..len`.
#[derive(Debug, Clone, Serialize)]
pub struct Vocabulary {
    role: Role,
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.role == other.role && self.tokens == other.tokens
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            role: Role,
            tokens: Vec<String>,
        }
        let raw = Raw::deserialize(d)?;
        Vocabulary::from_tokens(raw.role, raw.tokens).map_err(serde::de::Error::custom)
    }
}

impl Vocabulary {
    /// Builds a vocabulary from tokens in first-occurrence order.
    pub fn from_tokens<I, S>(role: Role, tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            role,
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in tokens {
            vocab.insert(t.into());
        }
        Ok(vocab)
    }

    fn insert(&mut self, token: String) {
        if !self.index.contains_key(&token) {
            self.index.insert(token.clone(), self.tokens.len());
            self.tokens.push(token);
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn require(&self, token: &str) -> Result<usize> {
        self.index_of(token).ok_or_else(|| Error::UnknownToken {
            role: self.role.name(),
            token: token.to_string(),
        })
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Subject, relation and object vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub subject: Vocabulary,
    pub relation: Vocabulary,
    pub object: Vocabulary,
}

impl Vocabularies {
    pub fn get(&self, role: Role) -> &Vocabulary {
        match role {
            Role::Subject => &self.subject,
            Role::Relation => &self.relation,
            Role::Object => &self.object,
        }
    }

    /// Distinct tokens over subjects and objects together.
    pub fn joint_object_count(&self) -> usize {
        let mut all: Vec<&String> = self.subject.tokens.iter().chain(&self.object.tokens).collect();
        all.sort();
        all.dedup();
        all.len()
    }
}

/// Builds the three vocabularies over the whole corpus, in corpus order, so
/// held-out words keep stable indices under every split.
pub fn build_vocabs(instances: &[Instance]) -> Result<Vocabularies> {
    if instances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let subject = Vocabulary::from_tokens(Role::Subject, instances.iter().map(|i| i.subject_word.clone()))?;
    let relation = Vocabulary::from_tokens(Role::Relation, instances.iter().map(|i| i.relation_word.clone()))?;
    let object = Vocabulary::from_tokens(Role::Object, instances.iter().map(|i| i.object_word.clone()))?;
    Ok(Vocabularies {
        subject,
        relation,
        object,
    })
}
