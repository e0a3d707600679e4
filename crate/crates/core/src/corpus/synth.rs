//! Synthetic corpora with known ground-truth templates.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::preprocess::mirror_if_needed;
use super::{BBox, Instance};
use crate::error::{Error, Result};

/// Ground-truth template for one triplet. `offset` is the object center
/// minus the subject center, before mirroring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRule {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub offset: [f64; 2],
    pub object_half: [f64; 2],
    #[serde(default = "default_subject_half")]
    pub subject_half: [f64; 2],
}

fn default_subject_half() -> [f64; 2] {
    [0.08, 0.14]
}

impl TemplateRule {
    pub fn new(
        triplet: (&str, &str, &str),
        offset: [f64; 2],
        object_half: [f64; 2],
        subject_half: [f64; 2],
    ) -> Self {
        Self {
            subject: triplet.0.into(),
            relation: triplet.1.into(),
            object: triplet.2.into(),
            offset,
            object_half,
            subject_half,
        }
    }

    /// Subject-center interval on one axis keeping both boxes inside the image.
    fn feasible(&self, axis: usize) -> (f64, f64) {
        let (d, oh, sh) = (self.offset[axis], self.object_half[axis], self.subject_half[axis]);
        (sh.max(oh - d), (1.0 - sh).min(1.0 - oh - d))
    }
}

/// The built-in eight-rule corpus.
///
/// Vertical placement is carried by the objects (`hat` sits above the
/// subject, `bag` below) for `holding`, `carrying` and `wearing`, which
/// therefore say nothing about `y` on their own; `above` and `below` place
/// the object above or below the subject. `(man, carrying, bag)` puts the
/// object to the left, so it is always mirrored.
pub fn default_rules() -> Vec<TemplateRule> {
    let man = [0.08, 0.15];
    let woman = [0.07, 0.14];
    let hat = [0.07, 0.05];
    let bag = [0.10, 0.12];
    vec![
        TemplateRule::new(("man", "holding", "hat"), [0.10, -0.20], hat, man),
        TemplateRule::new(("woman", "holding", "bag"), [0.12, 0.20], bag, woman),
        TemplateRule::new(("woman", "carrying", "hat"), [0.08, -0.20], hat, woman),
        TemplateRule::new(("man", "carrying", "bag"), [-0.16, 0.20], bag, man),
        TemplateRule::new(("man", "wearing", "hat"), [0.00, -0.20], hat, man),
        TemplateRule::new(("woman", "wearing", "bag"), [0.02, 0.20], bag, woman),
        TemplateRule::new(("table", "above", "lamp"), [0.00, -0.26], [0.08, 0.10], [0.20, 0.08]),
        TemplateRule::new(("shelf", "below", "box"), [0.00, 0.26], [0.14, 0.09], [0.20, 0.06]),
    ]
}

/// Reads rules from a JSON array.
pub fn load_rules<R: Read>(reader: R) -> Result<Vec<TemplateRule>> {
    Ok(serde_json::from_reader(reader)?)
}

/// Generates `n_instances` instances, cycling through the rules.
///
/// Subject centers are drawn uniformly from the region where every rule
/// keeps both boxes inside the image, so the subject position carries no
/// information about which rule produced an instance. Object centers get
/// independent Gaussian noise per axis, are clipped to `[0, 1]` and the
/// result is mirrored like ingested data.
pub fn generate_synthetic(
    rules: &[TemplateRule],
    n_instances: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Instance>> {
    if rules.is_empty() {
        return Err(Error::Config("synthetic rule set is empty".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let mut region = [(0.0f64, 1.0f64); 2];
    for rule in rules {
        for (axis, r) in region.iter_mut().enumerate() {
            let (lo, hi) = rule.feasible(axis);
            r.0 = r.0.max(lo);
            r.1 = r.1.min(hi);
        }
    }
    if region.iter().any(|(lo, hi)| lo > hi) {
        return Err(Error::Config(format!(
            "rules leave no common subject placement region: {region:?}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(n_instances);
    for id in 0..n_instances {
        let rule = &rules[id % rules.len()];
        let sx = uniform(&mut rng, region[0]);
        let sy = uniform(&mut rng, region[1]);
        let ox = (sx + rule.offset[0] + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let oy = (sy + rule.offset[1] + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let inst = Instance {
            id,
            subject_word: rule.subject.clone(),
            relation_word: rule.relation.clone(),
            object_word: rule.object.clone(),
            subject_box: BBox::new(sx, sy, rule.subject_half[0], rule.subject_half[1]),
            object_box: BBox::new(ox, oy, rule.object_half[0], rule.object_half[1]),
            mirrored: false,
            source_id: format!("synth:{id}"),
        };
        out.push(mirror_if_needed(inst));
    }
    Ok(out)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}
