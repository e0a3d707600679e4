//! Preprocessed corpus persistence: JSONL, one instance per line, preceded
//! by a single `{"meta": {...}}` header line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Instance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    /// Hash of the stoplist the corpus was filtered with.
    pub stoplist_hash: String,
    pub mirrored: bool,
    /// Producing command and its resolved options.
    #[serde(default)]
    pub config: Value,
    #[serde(default)]
    pub report: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    pub meta: Option<CorpusMeta>,
    pub instances: Vec<Instance>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: CorpusMeta,
}

pub fn write_corpus<W: Write>(mut out: W, meta: &CorpusMeta, instances: &[Instance]) -> Result<()> {
    serde_json::to_writer(&mut out, &Header { meta: meta.clone() })?;
    out.write_all(b"\n")?;
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<CorpusFile> {
    let mut meta = None;
    let mut instances = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 0 && line.trim_start().starts_with("{\"meta\"") {
            let h: Header = serde_json::from_str(&line)?;
            meta = Some(h.meta);
            continue;
        }
        let inst: Instance = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            location: format!("corpus line {}", lineno + 1),
            reason: e.to_string(),
        })?;
        instances.push(inst);
    }
    for (pos, inst) in instances.iter().enumerate() {
        if inst.id != pos {
            return Err(Error::MalformedRecord {
                location: format!("instance {pos}"),
                reason: format!("ids must be sequential, found {}", inst.id),
            });
        }
    }
    Ok(CorpusFile { meta, instances })
}
