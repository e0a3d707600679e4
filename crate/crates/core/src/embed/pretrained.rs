use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, Variant};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub lines: usize,
    pub found: usize,
    pub duplicates: usize,
}

/// Opens a text file, transparently decompressing gzip input.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Splits a vector line into its token and value fields.
///
/// Tokens may contain spaces, so the last `dim` fields are the values. A
/// numeric field just before them means the line has too many values.
fn split_line(line: &str, dim: usize, lineno: usize) -> Result<(String, Vec<&str>)> {
    let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
    if fields.len() < dim + 1 {
        return Err(Error::EmbeddingDim {
            line: lineno,
            expected: dim,
            found: fields.len().saturating_sub(1),
        });
    }
    let split = fields.len() - dim;
    if split > 1 && fields[split - 1].parse::<f64>().is_ok() {
        return Err(Error::EmbeddingDim {
            line: lineno,
            expected: dim,
            found: dim + 1,
        });
    }
    Ok((fields[..split].join(" "), fields[split..].to_vec()))
}

/// Loads rows for every vocabulary token from a `token v1 .. vd` stream.
/// Every line is dimension-checked; the first occurrence of a token wins.
pub fn load_pretrained<R: BufRead>(
    reader: R,
    expected_dim: usize,
    vocabulary: &Vocabulary,
) -> Result<(EmbeddingTable, LoadReport)> {
    if expected_dim == 0 {
        return Err(Error::InvalidEmbedding("expected dimension must be positive".into()));
    }
    let mut report = LoadReport::default();
    let mut rows = Array2::<f64>::zeros((vocabulary.len(), expected_dim));
    let mut seen: HashSet<String> = HashSet::new();
    let mut filled = vec![false; vocabulary.len()];
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        report.lines += 1;
        let (token, values) = split_line(line, expected_dim, lineno)?;
        if !seen.insert(token.clone()) {
            report.duplicates += 1;
            continue;
        }
        let Some(index) = vocabulary.index_of(&token) else {
            continue;
        };
        for (slot, text) in rows.row_mut(index).iter_mut().zip(values) {
            *slot = text.parse::<f64>().map_err(|e| Error::EmbeddingParse {
                line: lineno,
                reason: format!("{text:?}: {e}"),
            })?;
        }
        filled[index] = true;
        report.found += 1;
    }
    let missing: Vec<String> = vocabulary
        .tokens()
        .iter()
        .zip(&filled)
        .filter(|(_, &f)| !f)
        .map(|(t, _)| t.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings {
            count: missing.len(),
            sample: missing.into_iter().take(20).collect(),
        });
    }
    let table = EmbeddingTable::dense(vocabulary.clone(), Variant::Pretrained, rows)?;
    Ok((table, report))
}

/// Tokens present in a vector file, restricted to `wanted`.
pub fn pretrained_tokens<R: BufRead>(
    reader: R,
    expected_dim: usize,
    wanted: &HashSet<String>,
) -> Result<HashSet<String>> {
    let mut found = HashSet::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (token, _) = split_line(line, expected_dim, k + 1)?;
        if wanted.contains(&token) {
            found.insert(token);
        }
    }
    Ok(found)
}

/// Splits a table built over a merged vocabulary back into per-role tables.
pub(crate) fn subset(table: &EmbeddingTable, vocabulary: &Vocabulary) -> Result<EmbeddingTable> {
    let source: HashMap<&str, usize> = table
        .vocabulary()
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let full = table.matrix();
    let mut rows = Array2::zeros((vocabulary.len(), table.dim()));
    for (i, tok) in vocabulary.tokens().iter().enumerate() {
        let j = *source.get(tok.as_str()).ok_or_else(|| Error::UnknownToken {
            role: "embedding",
            token: tok.clone(),
        })?;
        rows.row_mut(i).assign(&full.row(j));
    }
    EmbeddingTable::dense(vocabulary.clone(), table.variant(), rows)
}
