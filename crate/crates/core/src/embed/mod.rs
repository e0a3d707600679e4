//! Word embedding tables for the three input slots.
//!
//! Three variants share one lookup interface: pretrained vectors read from
//! a text file, random vectors matched per dimension to the pretrained
//! statistics, and one-hot indicators. Tables are frozen.

mod pretrained;
mod registry;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Role, Vocabularies, Vocabulary};
use crate::error::{Error, Result};

pub use pretrained::{load_pretrained, open_text, pretrained_tokens, LoadReport};
pub use registry::{
    EmbeddingProvider, EmbeddingRegistry, EmbeddingSource, OneHotProvider, PretrainedProvider,
    RandomMatchedProvider,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Pretrained,
    RandomMatched,
    OneHot,
}

impl Variant {
    /// Short method tag (`EMB`, `RND`, `1H`).
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Pretrained => "EMB",
            Variant::RandomMatched => "RND",
            Variant::OneHot => "1H",
        }
    }
}

/// `|V| x d` embedding matrix for one vocabulary. One-hot tables keep no
/// matrix; their rows are the standard basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    vocabulary: Vocabulary,
    variant: Variant,
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Array2<f64>>,
    trainable: bool,
}

impl EmbeddingTable {
    fn dense(vocabulary: Vocabulary, variant: Variant, rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() != vocabulary.len() {
            return Err(Error::Shape(format!(
                "{} rows for a vocabulary of {}",
                rows.nrows(),
                vocabulary.len()
            )));
        }
        Ok(Self {
            dim: rows.ncols(),
            vocabulary,
            variant,
            rows: Some(rows),
            trainable: false,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    /// Copies row `index` into `out` (length `dim`).
    pub fn write_row(&self, index: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.rows {
            Some(m) => {
                for (o, v) in out.iter_mut().zip(m.row(index)) {
                    *o = *v;
                }
            }
            None => {
                out.fill(0.0);
                out[index] = 1.0;
            }
        }
    }

    /// The token's row, by value.
    pub fn lookup(&self, token: &str) -> Result<Vec<f64>> {
        let index = self.vocabulary.require(token)?;
        let mut row = vec![0.0; self.dim];
        self.write_row(index, &mut row);
        Ok(row)
    }

    /// The full matrix (materialized for one-hot tables).
    pub fn matrix(&self) -> Array2<f64> {
        match &self.rows {
            Some(m) => m.clone(),
            None => Array2::eye(self.dim),
        }
    }
}

/// One-hot identity table, `d = |V|`.
pub fn make_one_hot(vocabulary: &Vocabulary) -> Result<EmbeddingTable> {
    if vocabulary.is_empty() {
        return Err(Error::InvalidEmbedding("one-hot table needs a non-empty vocabulary".into()));
    }
    Ok(EmbeddingTable {
        vocabulary: vocabulary.clone(),
        variant: Variant::OneHot,
        dim: vocabulary.len(),
        rows: None,
        trainable: false,
    })
}

/// Per-column mean and sample standard deviation of a table's rows.
pub fn column_stats(table: &EmbeddingTable) -> Result<(Array1<f64>, Array1<f64>)> {
    let m = table.matrix();
    let n = m.nrows();
    if n < 2 {
        return Err(Error::InvalidEmbedding(format!(
            "need at least 2 reference rows for a standard deviation, got {n}"
        )));
    }
    let mean = m.mean_axis(Axis(0)).expect("non-empty");
    let sd = m.std_axis(Axis(0), 1.0);
    Ok((mean, sd))
}

/// Random table whose column `j` is i.i.d. `Normal(mu_j, sigma_j)` with the
/// reference table's column statistics.
pub fn make_random_matched(
    reference: &EmbeddingTable,
    vocabulary: &Vocabulary,
    seed: u64,
) -> Result<EmbeddingTable> {
    let (mean, sd) = column_stats(reference)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Normal<f64>> = mean
        .iter()
        .zip(sd.iter())
        .map(|(&m, &s)| Normal::new(m, s).map_err(|e| Error::InvalidEmbedding(e.to_string())))
        .collect::<Result<_>>()?;
    let mut rows = Array2::zeros((vocabulary.len(), reference.dim()));
    for mut row in rows.rows_mut() {
        for (v, d) in row.iter_mut().zip(&dists) {
            *v = d.sample(&mut rng);
        }
    }
    EmbeddingTable::dense(vocabulary.clone(), Variant::RandomMatched, rows)
}

/// The three frozen tables a model consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTables {
    pub subject: EmbeddingTable,
    pub relation: EmbeddingTable,
    pub object: EmbeddingTable,
}

impl EmbeddingTables {
    pub fn get(&self, role: Role) -> &EmbeddingTable {
        match role {
            Role::Subject => &self.subject,
            Role::Relation => &self.relation,
            Role::Object => &self.object,
        }
    }

    /// `d_S + d_R + d_O`.
    pub fn width(&self) -> usize {
        self.subject.dim() + self.relation.dim() + self.object.dim()
    }

    pub fn variant(&self) -> Variant {
        self.subject.variant()
    }

    pub fn vocabularies(&self) -> Vocabularies {
        Vocabularies {
            subject: self.subject.vocabulary().clone(),
            relation: self.relation.vocabulary().clone(),
            object: self.object.vocabulary().clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        Vocabulary::from_tokens(Role::Object, tokens.iter().copied()).unwrap()
    }

    fn dense(tokens: &[&str], rows: Array2<f64>) -> EmbeddingTable {
        EmbeddingTable::dense(vocab(tokens), Variant::Pretrained, rows).unwrap()
    }

    #[test]
    fn one_hot_rows() {
        let t = make_one_hot(&vocab(&["a", "b", "c"])).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.lookup("b").unwrap(), vec![0.0, 1.0, 0.0]);
        for tok in ["a", "b", "c"] {
            assert_eq!(t.lookup(tok).unwrap().iter().sum::<f64>(), 1.0);
        }
        assert!(!t.trainable());
        let t2 = make_one_hot(&vocab(&["x", "y"])).unwrap();
        assert_eq!(t2.lookup("x").unwrap(), vec![1.0, 0.0]);
        assert!(make_one_hot(&vocab(&[])).is_err());
    }

    #[test]
    fn one_hot_orthonormal() {
        let toks = ["a", "b", "c", "d"];
        let t = make_one_hot(&vocab(&toks)).unwrap();
        for x in toks {
            for y in toks {
                let dot: f64 = t.lookup(x).unwrap().iter().zip(t.lookup(y).unwrap()).map(|(a, b)| a * b).sum();
                assert_eq!(dot, if x == y { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn unknown_token() {
        let t = make_one_hot(&vocab(&["a"])).unwrap();
        assert!(matches!(t.lookup("zzz"), Err(Error::UnknownToken { .. })));
    }

    #[test]
    fn random_matched_degenerate_column() {
        let reference = dense(&["a", "b", "c"], ndarray::array![[2.5, 0.0], [2.5, 1.0], [2.5, 2.0]]);
        let t = make_random_matched(&reference, &vocab(&["p", "q", "r", "s"]), 1).unwrap();
        let m = t.matrix();
        assert!(m.column(0).iter().all(|&v| v == 2.5));
        assert_eq!(t.dim(), 2);
        assert_eq!(t.variant(), Variant::RandomMatched);
    }

    #[test]
    fn random_matched_needs_two_rows() {
        let reference = dense(&["a"], ndarray::array![[1.0, 2.0]]);
        assert!(make_random_matched(&reference, &vocab(&["p"]), 1).is_err());
    }

    #[test]
    fn random_matched_statistics() {
        // Oracle: sample mean of n normal draws lies within 4 sigma / sqrt(n).
        let reference = dense(&["a", "b", "c"], ndarray::array![[0.0, 1.0], [1.0, 3.0], [2.0, 8.0]]);
        let (mu, sd) = column_stats(&reference).unwrap();
        let n = 10_000;
        let toks: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let v = Vocabulary::from_tokens(Role::Object, toks).unwrap();
        let t = make_random_matched(&reference, &v, 5).unwrap();
        let m = t.matrix();
        for j in 0..2 {
            let mean = m.column(j).mean().unwrap();
            assert!((mean - mu[j]).abs() < 4.0 * sd[j] / (n as f64).sqrt(), "col {j}");
            let s = m.column(j).std(1.0);
            assert!((s - sd[j]).abs() / sd[j] < 0.05);
        }
        let again = make_random_matched(&reference, &v, 5).unwrap();
        assert_eq!(again, t);
    }
}
