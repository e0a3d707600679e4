use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BBox, Instance, RawRecord};
use crate::error::{Error, Result};

/// Spatial prepositions that make a relation "explicit".
pub const DEFAULT_STOPLIST: &[&str] = &[
    "on", "in", "above", "below", "under", "beneath", "over", "atop", "beside", "besides", "near",
    "next", "behind", "inside", "outside", "left", "right", "across", "against", "along", "among",
    "around", "at", "between", "by", "down", "up", "onto", "into", "underneath", "within", "front",
    "top", "bottom", "side", "off",
];

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_token(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stoplist {
    words: BTreeSet<String>,
}

impl Default for Stoplist {
    fn default() -> Self {
        Self::new(DEFAULT_STOPLIST.iter().copied()).expect("default stoplist is non-empty")
    }
}

impl Stoplist {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| normalize_token(w.as_ref()))
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(Error::Config("stoplist is empty".into()));
        }
        Ok(Self { words })
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim().to_string();
            if !line.is_empty() {
                words.push(line);
            }
        }
        Self::new(words)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// A relation phrase is explicit when any of its words is listed.
    pub fn is_explicit(&self, relation: &str) -> bool {
        relation.split_whitespace().any(|w| self.contains(w))
    }

    /// Hex SHA-256 over the sorted, newline-joined words.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Splits records into `(implicit, explicit)`.
pub fn partition_explicit(
    records: Vec<RawRecord>,
    stoplist: &Stoplist,
) -> (Vec<RawRecord>, Vec<RawRecord>) {
    records
        .into_iter()
        .partition(|r| !stoplist.is_explicit(&r.relation))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipCounter {
    pub clipped_boxes: usize,
}

fn clip_pixel_box(b: [f64; 4], width: f64, height: f64, clips: &mut ClipCounter) -> Result<BBox> {
    let (x0, y0) = (b[0], b[1]);
    let (x1, y1) = (b[0] + b[2], b[1] + b[3]);
    let (cx0, cy0) = (x0.clamp(0.0, width), y0.clamp(0.0, height));
    let (cx1, cy1) = (x1.clamp(0.0, width), y1.clamp(0.0, height));
    if (cx0, cy0, cx1, cy1) != (x0, y0, x1, y1) {
        clips.clipped_boxes += 1;
    }
    if x0 > width || y0 > height || x1 < 0.0 || y1 < 0.0 {
        return Err(Error::MalformedRecord {
            location: "box".into(),
            reason: format!("box {b:?} lies outside the {width}x{height} image"),
        });
    }
    Ok(BBox::from_corner(
        cx0 / width,
        cy0 / height,
        (cx1 - cx0) / width,
        (cy1 - cy0) / height,
    ))
}

/// Clips both boxes to the image and converts them to normalized
/// center + half-extent form. The returned instance has `id` 0.
pub fn normalize(raw: &RawRecord, clips: &mut ClipCounter) -> Result<Instance> {
    let (w, h) = (raw.image_width, raw.image_height);
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(Error::InvalidImage {
            width: w,
            height: h,
        });
    }
    let subject_box = clip_pixel_box(raw.subject_box, w, h, clips).map_err(|e| locate(e, raw))?;
    let object_box = clip_pixel_box(raw.object_box, w, h, clips).map_err(|e| locate(e, raw))?;
    Ok(Instance {
        id: 0,
        subject_word: raw.subject.clone(),
        relation_word: raw.relation.clone(),
        object_word: raw.object.clone(),
        subject_box,
        object_box,
        mirrored: false,
        source_id: raw.source_id.clone(),
    })
}

/// Inverse of the normalization: pixel `[x, y, w, h]` corner box.
pub fn denormalize(b: &BBox, width: f64, height: f64) -> [f64; 4] {
    [
        b.left() * width,
        b.top() * height,
        2.0 * b.half_w * width,
        2.0 * b.half_h * height,
    ]
}

fn locate(e: Error, raw: &RawRecord) -> Error {
    match e {
        Error::MalformedRecord { reason, .. } => Error::MalformedRecord {
            location: raw.source_id.clone(),
            reason,
        },
        other => other,
    }
}

/// Reflects both boxes horizontally iff the object center lies strictly
/// left of the subject center.
pub fn mirror_if_needed(mut instance: Instance) -> Instance {
    if instance.object_box.center_x < instance.subject_box.center_x {
        instance.subject_box.center_x = 1.0 - instance.subject_box.center_x;
        instance.object_box.center_x = 1.0 - instance.object_box.center_x;
        instance.mirrored = true;
    } else {
        instance.mirrored = false;
    }
    instance
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub input_records: usize,
    pub explicit: usize,
    pub implicit: usize,
    pub kept: usize,
    pub mirrored: usize,
    pub clipped_boxes: usize,
    pub rejected: usize,
}

/// Which side of the explicit/implicit partition to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    #[default]
    Implicit,
    Explicit,
    All,
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit" => Ok(Self::Implicit),
            "explicit" => Ok(Self::Explicit),
            "all" => Ok(Self::All),
            other => Err(Error::Config(format!("unknown partition {other:?}"))),
        }
    }
}

/// Full preprocessing: partition, normalize, mirror, assign sequential ids.
/// Records that fail normalization are rejected and counted.
pub fn preprocess(
    records: Vec<RawRecord>,
    stoplist: &Stoplist,
    keep: Partition,
) -> (Vec<Instance>, PreprocessReport) {
    let mut report = PreprocessReport {
        input_records: records.len(),
        ..Default::default()
    };
    let (implicit, explicit) = partition_explicit(records, stoplist);
    report.implicit = implicit.len();
    report.explicit = explicit.len();
    let selected = match keep {
        Partition::Implicit => implicit,
        Partition::Explicit => explicit,
        Partition::All => {
            let mut all = implicit;
            all.extend(explicit);
            all
        }
    };
    let mut clips = ClipCounter::default();
    let mut out = Vec::with_capacity(selected.len());
    for raw in &selected {
        match normalize(raw, &mut clips) {
            Ok(inst) => {
                let mut inst = mirror_if_needed(inst);
                inst.id = out.len();
                report.mirrored += inst.mirrored as usize;
                out.push(inst);
            }
            Err(e) => {
                log::warn!("rejecting {}: {e}", raw.source_id);
                report.rejected += 1;
            }
        }
    }
    report.kept = out.len();
    report.clipped_boxes = clips.clipped_boxes;
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(relation: &str, s_box: [f64; 4], o_box: [f64; 4], img: (f64, f64)) -> RawRecord {
        RawRecord {
            subject: "man".into(),
            relation: relation.into(),
            object: "horse".into(),
            subject_box: s_box,
            object_box: o_box,
            image_width: img.0,
            image_height: img.1,
            source_id: "t".into(),
        }
    }

    fn inst(sx: f64, ox: f64) -> Instance {
        Instance {
            id: 0,
            subject_word: "s".into(),
            relation_word: "r".into(),
            object_word: "o".into(),
            subject_box: BBox::new(sx, 0.5, 0.1, 0.1),
            object_box: BBox::new(ox, 0.5, 0.1, 0.2),
            mirrored: false,
            source_id: String::new(),
        }
    }

    #[test]
    fn explicit_partition() {
        let stop = Stoplist::default();
        let recs = vec![
            raw("on", [0.0; 4], [0.0; 4], (1.0, 1.0)),
            raw("riding", [0.0; 4], [0.0; 4], (1.0, 1.0)),
            raw("standing next to", [0.0; 4], [0.0; 4], (1.0, 1.0)),
        ];
        let (imp, exp) = partition_explicit(recs, &stop);
        assert_eq!(imp.len(), 1);
        assert_eq!(imp[0].relation, "riding");
        assert_eq!(exp.len(), 2);
        let (a, b) = partition_explicit(Vec::new(), &stop);
        assert!(a.is_empty() && b.is_empty());
    }

    #[test]
    fn default_stoplist_size() {
        assert_eq!(Stoplist::default().len(), 36);
        assert!(Stoplist::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn stoplist_file_and_hash() {
        let s = Stoplist::read("# comment\non\n\n  In \n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains("in"));
        let t = Stoplist::new(["in", "on"]).unwrap();
        assert_eq!(s.hash(), t.hash());
        assert_ne!(s.hash(), Stoplist::default().hash());
    }

    #[test]
    fn normalize_example() {
        let mut c = ClipCounter::default();
        let r = raw("riding", [100.0, 50.0, 40.0, 80.0], [0.0, 0.0, 400.0, 300.0], (400.0, 300.0));
        let i = normalize(&r, &mut c).unwrap();
        let s = i.subject_box;
        assert!((s.center_x - 0.3).abs() < 1e-12);
        assert!((s.center_y - 0.3).abs() < 1e-12);
        assert!((s.half_w - 0.05).abs() < 1e-12);
        assert!((s.half_h - 0.4 / 3.0).abs() < 1e-12);
        assert_eq!(i.object_box, BBox::new(0.5, 0.5, 0.5, 0.5));
        assert_eq!(c.clipped_boxes, 0);
    }

    #[test]
    fn zero_image_dimension_rejected() {
        let mut c = ClipCounter::default();
        let r = raw("riding", [0.0; 4], [0.0; 4], (0.0, 300.0));
        assert!(matches!(normalize(&r, &mut c), Err(Error::InvalidImage { .. })));
    }

    #[test]
    fn out_of_bounds_boxes_are_clipped() {
        let mut c = ClipCounter::default();
        let r = raw("riding", [-10.0, 0.0, 50.0, 10.0], [90.0, 90.0, 20.0, 20.0], (100.0, 100.0));
        let i = normalize(&r, &mut c).unwrap();
        assert_eq!(c.clipped_boxes, 2);
        assert!((i.subject_box.left()).abs() < 1e-12);
        assert!((i.object_box.right() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirroring_rule() {
        let m = mirror_if_needed(inst(0.6, 0.2));
        assert!(m.mirrored);
        assert!((m.object_box.center_x - 0.8).abs() < 1e-12);
        assert!((m.subject_box.center_x - 0.4).abs() < 1e-12);
        assert_eq!(m.object_box.half_h, 0.2);

        let u = mirror_if_needed(inst(0.3, 0.7));
        assert!(!u.mirrored);
        assert_eq!(u, inst(0.3, 0.7));

        let tie = mirror_if_needed(inst(0.5, 0.5));
        assert!(!tie.mirrored);
    }

    proptest! {
        #[test]
        fn mirrored_object_never_left(sx in 0.0f64..=1.0, ox in 0.0f64..=1.0) {
            let m = mirror_if_needed(inst(sx, ox));
            prop_assert!(m.object_box.center_x >= m.subject_box.center_x);
        }

        #[test]
        fn normalize_round_trips(
            w in 1.0f64..4000.0, h in 1.0f64..4000.0,
            fx in 0.0f64..1.0, fy in 0.0f64..1.0, fw in 0.0f64..1.0, fh in 0.0f64..1.0,
        ) {
            let x = fx * w;
            let y = fy * h;
            let bw = fw * (w - x);
            let bh = fh * (h - y);
            let r = raw("riding", [x, y, bw, bh], [x, y, bw, bh], (w, h));
            let mut c = ClipCounter::default();
            let i = normalize(&r, &mut c).unwrap();
            prop_assert_eq!(c.clipped_boxes, 0);
            let back = denormalize(&i.subject_box, w, h);
            for (a, e) in back.iter().zip([x, y, bw, bh]) {
                prop_assert!((a - e).abs() <= 1e-9 * e.abs().max(1.0));
            }
        }
    }
}
