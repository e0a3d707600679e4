//! Scene-graph ingestion and preprocessing.
//!
//! Raw annotations come in as pixel-space corner boxes. Preprocessing
//! clips them to the image, normalizes by image size, converts to
//! center + half-extent form and mirrors instances so that the object
//! never lies left of the subject.

mod parse;
mod preprocess;
mod split;
mod store;
mod synth;
mod vocab;

use serde::{Deserialize, Serialize};

pub use parse::{
    parse_scene_graph, parse_vg_relationships, read_image_sizes, ImageSizes, InputFormat, ParseMode,
    ParseReport,
};
pub use preprocess::{
    denormalize, mirror_if_needed, normalize, normalize_token, partition_explicit, preprocess, ClipCounter,
    Partition, PreprocessReport, Stoplist, DEFAULT_STOPLIST,
};
pub use split::{
    make_cv_folds, make_generalized_triplet_split, make_generalized_word_split,
    make_held_out_triplet_split, triplets_by_frequency, Fold, SplitMode, SplitPlan, DEFAULT_HELD_OUT_WORDS,
};
pub use store::{read_corpus, write_corpus, CorpusFile, CorpusMeta};
pub use synth::{default_rules, generate_synthetic, load_rules, TemplateRule};
pub use vocab::{build_vocabs, Role, Vocabulary, Vocabularies};

/// Axis-aligned box in normalized image coordinates, stored as center and
/// half-extents. `y` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub center_x: f64,
    pub center_y: f64,
    pub half_w: f64,
    pub half_h: f64,
}

impl BBox {
    pub fn new(center_x: f64, center_y: f64, half_w: f64, half_h: f64) -> Self {
        Self {
            center_x,
            center_y,
            half_w,
            half_h,
        }
    }

    /// Builds a box from its corner form `[x0, y0, w, h]`.
    pub fn from_corner(x0: f64, y0: f64, w: f64, h: f64) -> Self {
        Self::new(x0 + w / 2.0, y0 + h / 2.0, w / 2.0, h / 2.0)
    }

    pub fn left(&self) -> f64 {
        self.center_x - self.half_w
    }

    pub fn right(&self) -> f64 {
        self.center_x + self.half_w
    }

    pub fn top(&self) -> f64 {
        self.center_y - self.half_h
    }

    pub fn bottom(&self) -> f64 {
        self.center_y + self.half_h
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_w.max(0.0) * self.half_h.max(0.0)
    }

    /// Intersection with the unit square, or `None` when nothing is left.
    pub fn clip_unit(&self) -> Option<BBox> {
        let x0 = self.left().max(0.0);
        let x1 = self.right().min(1.0);
        let y0 = self.top().max(0.0);
        let y1 = self.bottom().min(1.0);
        if x0 > x1 || y0 > y1 {
            return None;
        }
        Some(BBox::new(
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0,
            (x1 - x0) / 2.0,
            (y1 - y0) / 2.0,
        ))
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.center_x, self.center_y, self.half_w, self.half_h]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// One raw annotated relationship, still in pixel space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub subject: String,
    pub relation: String,
    pub object: String,
    /// `[x, y, w, h]` top-left corner and size in pixels.
    pub subject_box: [f64; 4],
    pub object_box: [f64; 4],
    pub image_width: f64,
    pub image_height: f64,
    pub source_id: String,
}

/// A preprocessed training/evaluation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: usize,
    pub subject_word: String,
    pub relation_word: String,
    pub object_word: String,
    pub subject_box: BBox,
    pub object_box: BBox,
    pub mirrored: bool,
    pub source_id: String,
}

impl Instance {
    pub fn triplet(&self) -> Triplet {
        Triplet {
            subject: self.subject_word.clone(),
            relation: self.relation_word.clone(),
            object: self.object_word.clone(),
        }
    }
}

/// A `(subject, relation, object)` combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triplet {
    pub fn new(subject: &str, relation: &str, object: &str) -> Self {
        Self {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
        }
    }

    /// Parses `"s,r,o"`.
    pub fn parse(text: &str) -> Option<Self> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 3 {
            return None;
        }
        Some(Self::new(
            &normalize_token(parts[0]),
            &normalize_token(parts[1]),
            &normalize_token(parts[2]),
        ))
    }
}

impl std::fmt::Display for Triplet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.relation, self.object)
    }
}
