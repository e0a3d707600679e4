use std::collections::HashMap;
use std::io::{BufRead, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::preprocess::normalize_token;
use super::RawRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    VgRelationships,
    CanonicalJsonl,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vg_relationships" | "vg" => Ok(Self::VgRelationships),
            "canonical_jsonl" | "jsonl" => Ok(Self::CanonicalJsonl),
            other => Err(Error::Config(format!("unknown input format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Lenient,
    Strict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub records: usize,
    pub skipped_malformed: usize,
    pub skipped_missing_box: usize,
    pub skipped_missing_image: usize,
}

impl ParseReport {
    pub fn skipped(&self) -> usize {
        self.skipped_malformed + self.skipped_missing_box + self.skipped_missing_image
    }
}

enum Skip {
    Malformed(String),
    MissingBox,
    MissingImage,
}

impl ParseReport {
    fn skip(&mut self, mode: ParseMode, location: String, why: Skip) -> Result<()> {
        let reason = match &why {
            Skip::Malformed(r) => r.clone(),
            Skip::MissingBox => "missing subject or object box".to_string(),
            Skip::MissingImage => "no image dimensions".to_string(),
        };
        if mode == ParseMode::Strict {
            return Err(Error::MalformedRecord { location, reason });
        }
        log::debug!("skipping record at {location}: {reason}");
        match why {
            Skip::Malformed(_) => self.skipped_malformed += 1,
            Skip::MissingBox => self.skipped_missing_box += 1,
            Skip::MissingImage => self.skipped_missing_image += 1,
        }
        Ok(())
    }
}

/// Image id → (width, height), read from the image metadata companion file.
pub type ImageSizes = HashMap<u64, (f64, f64)>;

/// Parses a stream of relationship annotations.
///
/// `image_sizes` is only consulted for `vg_relationships`; canonical lines
/// carry their own image dimensions.
pub fn parse_scene_graph<R: BufRead>(
    reader: R,
    format: InputFormat,
    mode: ParseMode,
    image_sizes: Option<&ImageSizes>,
) -> Result<(Vec<RawRecord>, ParseReport)> {
    match format {
        InputFormat::CanonicalJsonl => parse_canonical(reader, mode),
        InputFormat::VgRelationships => {
            let empty = ImageSizes::new();
            parse_vg_relationships(reader, image_sizes.unwrap_or(&empty), mode)
        }
    }
}

fn parse_canonical<R: BufRead>(reader: R, mode: ParseMode) -> Result<(Vec<RawRecord>, ParseReport)> {
    let mut out = Vec::new();
    let mut report = ParseReport::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("line {}", lineno + 1);
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                report.skip(mode, location, Skip::Malformed(e.to_string()))?;
                continue;
            }
        };
        match canonical_record(&value, lineno) {
            Ok(rec) => out.push(rec),
            Err(why) => report.skip(mode, location, why)?,
        }
    }
    report.records = out.len();
    Ok((out, report))
}

fn canonical_record(value: &Value, lineno: usize) -> std::result::Result<RawRecord, Skip> {
    let obj = value
        .as_object()
        .ok_or_else(|| Skip::Malformed("not a JSON object".into()))?;
    let token = |key: &str| -> std::result::Result<String, Skip> {
        let raw = obj
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Skip::Malformed(format!("missing string field {key:?}")))?;
        let tok = normalize_token(raw);
        if tok.is_empty() {
            return Err(Skip::Malformed(format!("empty token in {key:?}")));
        }
        Ok(tok)
    };
    let (subject, relation, object) = (token("s")?, token("r")?, token("o")?);
    let s_box = obj.get("s_box").filter(|v| !v.is_null());
    let o_box = obj.get("o_box").filter(|v| !v.is_null());
    let (Some(s_box), Some(o_box)) = (s_box, o_box) else {
        return Err(Skip::MissingBox);
    };
    let subject_box = number_array::<4>(s_box, "s_box")?;
    let object_box = number_array::<4>(o_box, "o_box")?;
    check_box(&subject_box)?;
    check_box(&object_box)?;
    let img = obj
        .get("img")
        .ok_or_else(|| Skip::Malformed("missing field \"img\"".into()))?;
    let [image_width, image_height] = number_array::<2>(img, "img")?;
    let source_id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(v @ Value::Number(_)) => v.to_string(),
        _ => format!("line:{}", lineno + 1),
    };
    Ok(RawRecord {
        subject,
        relation,
        object,
        subject_box,
        object_box,
        image_width,
        image_height,
        source_id,
    })
}

fn number_array<const N: usize>(value: &Value, key: &str) -> std::result::Result<[f64; N], Skip> {
    let arr = value
        .as_array()
        .filter(|a| a.len() == N)
        .ok_or_else(|| Skip::Malformed(format!("{key:?} must be an array of {N} numbers")))?;
    let mut out = [0.0; N];
    for (slot, v) in out.iter_mut().zip(arr) {
        *slot = v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Skip::Malformed(format!("{key:?} holds a non-numeric value")))?;
    }
    Ok(out)
}

fn check_box(b: &[f64; 4]) -> std::result::Result<(), Skip> {
    if b[2] < 0.0 || b[3] < 0.0 {
        return Err(Skip::Malformed("negative box size".into()));
    }
    Ok(())
}

#[derive(Deserialize)]
struct VgImage {
    #[serde(alias = "id")]
    image_id: u64,
    #[serde(default)]
    relationships: Vec<Value>,
}

#[derive(Deserialize)]
struct VgImageMeta {
    #[serde(alias = "id")]
    image_id: u64,
    width: f64,
    height: f64,
}

/// Reads the Visual Genome image metadata file (`image_data.json`).
pub fn read_image_sizes<R: Read>(reader: R) -> Result<ImageSizes> {
    let metas: Vec<VgImageMeta> = serde_json::from_reader(reader)?;
    Ok(metas
        .into_iter()
        .map(|m| (m.image_id, (m.width, m.height)))
        .collect())
}

/// Parses the Visual Genome `relationships.json` layout.
pub fn parse_vg_relationships<R: Read>(
    reader: R,
    image_sizes: &ImageSizes,
    mode: ParseMode,
) -> Result<(Vec<RawRecord>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut out = Vec::new();
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Ok((out, report));
    }
    let images: Vec<VgImage> = serde_json::from_str(&text)?;
    for image in images {
        for (k, rel) in image.relationships.iter().enumerate() {
            let location = format!("image {} relationship {}", image.image_id, k);
            let Some(&(width, height)) = image_sizes.get(&image.image_id) else {
                report.skip(mode, location, Skip::MissingImage)?;
                continue;
            };
            match vg_record(rel, image.image_id, k, width, height) {
                Ok(rec) => out.push(rec),
                Err(why) => report.skip(mode, location, why)?,
            }
        }
    }
    report.records = out.len();
    Ok((out, report))
}

fn vg_record(
    rel: &Value,
    image_id: u64,
    k: usize,
    width: f64,
    height: f64,
) -> std::result::Result<RawRecord, Skip> {
    let predicate = rel
        .get("predicate")
        .and_then(Value::as_str)
        .map(normalize_token)
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Skip::Malformed("missing predicate".into()))?;
    let subject = rel.get("subject").filter(|v| !v.is_null());
    let object = rel.get("object").filter(|v| !v.is_null());
    let (Some(subject), Some(object)) = (subject, object) else {
        return Err(Skip::MissingBox);
    };
    let (s_name, s_box) = vg_entity(subject)?;
    let (o_name, o_box) = vg_entity(object)?;
    let id = rel
        .get("relationship_id")
        .and_then(Value::as_u64)
        .map(|r| format!("vg:{image_id}:{r}"))
        .unwrap_or_else(|| format!("vg:{image_id}:#{k}"));
    Ok(RawRecord {
        subject: s_name,
        relation: predicate,
        object: o_name,
        subject_box: s_box,
        object_box: o_box,
        image_width: width,
        image_height: height,
        source_id: id,
    })
}

fn vg_entity(v: &Value) -> std::result::Result<(String, [f64; 4]), Skip> {
    let name = v
        .get("name")
        .and_then(Value::as_str)
        .or_else(|| {
            v.get("names")
                .and_then(Value::as_array)
                .and_then(|a| a.first())
                .and_then(Value::as_str)
        })
        .map(normalize_token)
        .filter(|n| !n.is_empty())
        .ok_or_else(|| Skip::Malformed("entity without a name".into()))?;
    let mut b = [0.0; 4];
    for (slot, key) in b.iter_mut().zip(["x", "y", "w", "h"]) {
        *slot = match v.get(key) {
            None | Some(Value::Null) => return Err(Skip::MissingBox),
            Some(x) => x
                .as_f64()
                .ok_or_else(|| Skip::Malformed(format!("non-numeric {key}")))?,
        };
    }
    check_box(&b)?;
    Ok((name, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(text: &str, mode: ParseMode) -> Result<(Vec<RawRecord>, ParseReport)> {
        parse_scene_graph(text.as_bytes(), InputFormat::CanonicalJsonl, mode, None)
    }

    #[test]
    fn canonical_line_maps_fields() {
        let line = r#"{"s":"man","r":"riding","o":"horse","s_box":[100,50,40,80],"o_box":[90,100,120,90],"img":[400,300]}"#;
        let (recs, report) = canonical(line, ParseMode::Lenient).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(report.skipped(), 0);
        let r = &recs[0];
        assert_eq!((r.subject.as_str(), r.relation.as_str(), r.object.as_str()), ("man", "riding", "horse"));
        assert_eq!(r.subject_box, [100.0, 50.0, 40.0, 80.0]);
        assert_eq!(r.object_box, [90.0, 100.0, 120.0, 90.0]);
        assert_eq!((r.image_width, r.image_height), (400.0, 300.0));
    }

    #[test]
    fn empty_stream() {
        let (recs, report) = canonical("", ParseMode::Strict).unwrap();
        assert!(recs.is_empty());
        assert_eq!(report, ParseReport::default());
    }

    #[test]
    fn missing_object_box_is_counted() {
        let line = r#"{"s":"man","r":"riding","o":"horse","s_box":[1,1,4,4],"img":[400,300]}"#;
        let (recs, report) = canonical(line, ParseMode::Lenient).unwrap();
        assert!(recs.is_empty());
        assert_eq!(report.skipped_missing_box, 1);
        assert_eq!(report.skipped(), 1);
    }

    #[test]
    fn strict_mode_aborts_on_malformed() {
        let text = "{not json}\n";
        assert!(canonical(text, ParseMode::Strict).is_err());
        let (_, report) = canonical(text, ParseMode::Lenient).unwrap();
        assert_eq!(report.skipped_malformed, 1);
    }

    #[test]
    fn tokens_are_normalized() {
        let line = r#"{"s":"  Tall  MAN ","r":"Standing   next to","o":"Horse","s_box":[0,0,1,1],"o_box":[0,0,1,1],"img":[2,2]}"#;
        let (recs, _) = canonical(line, ParseMode::Strict).unwrap();
        assert_eq!(recs[0].subject, "tall man");
        assert_eq!(recs[0].relation, "standing next to");
    }

    #[test]
    fn vg_layout() {
        let rels = r#"[{"image_id": 7, "relationships": [
            {"relationship_id": 11, "predicate": "Riding",
             "subject": {"x": 10, "y": 20, "w": 30, "h": 40, "name": "man"},
             "object": {"x": 5, "y": 50, "w": 60, "h": 30, "names": ["horse"]}},
            {"relationship_id": 12, "predicate": "on",
             "subject": {"x": 10, "y": 20, "w": 30, "h": 40, "name": "cup"}}
        ]}, {"image_id": 8, "relationships": [
            {"predicate": "near", "subject": {"x":0,"y":0,"w":1,"h":1,"name":"a"},
             "object": {"x":0,"y":0,"w":1,"h":1,"name":"b"}}
        ]}]"#;
        let meta = r#"[{"image_id": 7, "width": 100, "height": 200}]"#;
        let sizes = read_image_sizes(meta.as_bytes()).unwrap();
        let (recs, report) = parse_scene_graph(
            rels.as_bytes(),
            InputFormat::VgRelationships,
            ParseMode::Lenient,
            Some(&sizes),
        )
        .unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].relation, "riding");
        assert_eq!(recs[0].object, "horse");
        assert_eq!(recs[0].source_id, "vg:7:11");
        assert_eq!((recs[0].image_width, recs[0].image_height), (100.0, 200.0));
        assert_eq!(report.skipped_missing_box, 1);
        assert_eq!(report.skipped_missing_image, 1);
    }
}
