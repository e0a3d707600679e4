use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Instance, Triplet};
use crate::error::{Error, Result};

/// Objects held out under the generalized-word regime by default.
pub const DEFAULT_HELD_OUT_WORDS: &[&str] = &[
    "surfboard", "shadow", "head", "surfer", "woman", "bear", "bag", "sunglasses", "hair", "apple",
    "grass", "water", "eye", "shoes", "foot", "jeans", "jacket", "bus", "bike", "cat", "sky",
    "elephant", "tree", "plane", "eyes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Cv,
    GenTriplets,
    GenWords,
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cv => "cv",
            Self::GenTriplets => "gen-triplets",
            Self::GenWords => "gen-words",
        })
    }
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cv" => Ok(Self::Cv),
            "gen-triplets" => Ok(Self::GenTriplets),
            "gen-words" => Ok(Self::GenWords),
            other => Err(Error::Config(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Named lists of instance ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: Option<u64>,
    pub corpus_size: usize,
    pub folds: Vec<Fold>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub held_out_triplets: Vec<Triplet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub held_out_words: Vec<String>,
}

impl SplitPlan {
    pub fn fold(&self, index: usize) -> Result<&Fold> {
        self.folds.get(index).ok_or_else(|| {
            Error::InvalidSplit(format!(
                "fold {index} out of range ({} folds)",
                self.folds.len()
            ))
        })
    }
}

/// `k` disjoint random folds, sizes differing by at most one.
pub fn make_cv_folds(instances: &[Instance], k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::InvalidSplit(format!("k must be at least 2, got {k}")));
    }
    if instances.len() < k {
        return Err(Error::InvalidSplit(format!(
            "{} instances cannot fill {k} folds",
            instances.len()
        )));
    }
    let mut ids: Vec<usize> = instances.iter().map(|i| i.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n = ids.len();
    let (base, extra) = (n / k, n % k);
    let mut tests = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut test = ids[start..start + len].to_vec();
        test.sort_unstable();
        tests.push(test);
        start += len;
    }
    let folds = tests
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let held: BTreeSet<usize> = test.iter().copied().collect();
            let mut train: Vec<usize> = ids.iter().copied().filter(|i| !held.contains(i)).collect();
            train.sort_unstable();
            Fold {
                name: format!("fold{f}"),
                train,
                test: test.clone(),
            }
        })
        .collect();
    Ok(SplitPlan {
        mode: SplitMode::Cv,
        seed: Some(seed),
        corpus_size: n,
        folds,
        held_out_triplets: Vec::new(),
        held_out_words: Vec::new(),
    })
}

/// Triplets ordered by descending frequency, ties broken lexicographically.
pub fn triplets_by_frequency(instances: &[Instance]) -> Vec<(Triplet, usize)> {
    let mut counts: HashMap<Triplet, usize> = HashMap::new();
    for inst in instances {
        *counts.entry(inst.triplet()).or_default() += 1;
    }
    let mut ranked: Vec<(Triplet, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Removes every instance of the given triplets from training; they form the test set.
pub fn make_held_out_triplet_split(instances: &[Instance], held_out: &[Triplet]) -> Result<SplitPlan> {
    if held_out.is_empty() {
        return Err(Error::InvalidSplit("no triplets to hold out".into()));
    }
    let held: BTreeSet<&Triplet> = held_out.iter().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for inst in instances {
        if held.contains(&inst.triplet()) {
            test.push(inst.id);
        } else {
            train.push(inst.id);
        }
    }
    Ok(SplitPlan {
        mode: SplitMode::GenTriplets,
        seed: None,
        corpus_size: instances.len(),
        folds: vec![Fold {
            name: "generalized-triplets".into(),
            train,
            test,
        }],
        held_out_triplets: held.into_iter().cloned().collect(),
        held_out_words: Vec::new(),
    })
}

/// Picks `n_pick` triplets uniformly among the `top_m` most frequent and
/// holds out all their instances.
pub fn make_generalized_triplet_split(
    instances: &[Instance],
    n_pick: usize,
    top_m: usize,
    seed: u64,
) -> Result<SplitPlan> {
    let ranked = triplets_by_frequency(instances);
    if ranked.len() < top_m {
        log::warn!(
            "corpus has {} distinct triplets, fewer than the requested top {top_m}",
            ranked.len()
        );
    }
    let pool: Vec<Triplet> = ranked.into_iter().take(top_m).map(|(t, _)| t).collect();
    if pool.len() < n_pick || n_pick == 0 {
        return Err(Error::InvalidSplit(format!(
            "cannot pick {n_pick} triplets among {} candidates",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<Triplet> = pool.choose_multiple(&mut rng, n_pick).cloned().collect();
    let mut plan = make_held_out_triplet_split(instances, &picked)?;
    plan.seed = Some(seed);
    Ok(plan)
}

/// Holds out every instance whose subject or object is in `words`.
pub fn make_generalized_word_split(instances: &[Instance], words: &[String]) -> Result<SplitPlan> {
    if words.is_empty() {
        return Err(Error::InvalidSplit("held-out word list is empty".into()));
    }
    let held: BTreeSet<&str> = words.iter().map(String::as_str).collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for inst in instances {
        if held.contains(inst.subject_word.as_str()) || held.contains(inst.object_word.as_str()) {
            test.push(inst.id);
        } else {
            train.push(inst.id);
        }
    }
    Ok(SplitPlan {
        mode: SplitMode::GenWords,
        seed: None,
        corpus_size: instances.len(),
        folds: vec![Fold {
            name: "generalized-words".into(),
            train,
            test,
        }],
        held_out_triplets: Vec::new(),
        held_out_words: held.into_iter().map(str::to_string).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BBox;
    use proptest::prelude::*;

    fn inst(id: usize, s: &str, r: &str, o: &str) -> Instance {
        Instance {
            id,
            subject_word: s.into(),
            relation_word: r.into(),
            object_word: o.into(),
            subject_box: BBox::new(0.5, 0.5, 0.1, 0.1),
            object_box: BBox::new(0.6, 0.5, 0.1, 0.1),
            mirrored: false,
            source_id: String::new(),
        }
    }

    fn corpus(n: usize) -> Vec<Instance> {
        (0..n).map(|i| inst(i, "man", "riding", "horse")).collect()
    }

    fn assert_partition(plan: &SplitPlan, n: usize) {
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.iter().copied()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
        for f in &plan.folds {
            let test: BTreeSet<_> = f.test.iter().collect();
            assert!(f.train.iter().all(|i| !test.contains(i)));
            assert_eq!(f.train.len() + f.test.len(), n);
        }
    }

    #[test]
    fn ten_equal_folds() {
        let plan = make_cv_folds(&corpus(100), 10, 1).unwrap();
        assert_eq!(plan.folds.len(), 10);
        assert!(plan.folds.iter().all(|f| f.test.len() == 10));
        assert_partition(&plan, 100);
    }

    #[test]
    fn cv_seed_determinism() {
        let c = corpus(50);
        assert_eq!(make_cv_folds(&c, 5, 3).unwrap(), make_cv_folds(&c, 5, 3).unwrap());
        assert_ne!(make_cv_folds(&c, 5, 3).unwrap(), make_cv_folds(&c, 5, 4).unwrap());
    }

    #[test]
    fn cv_errors() {
        assert!(make_cv_folds(&corpus(3), 4, 0).is_err());
        assert!(make_cv_folds(&corpus(3), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn cv_is_partition(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let plan = make_cv_folds(&corpus(n), k, seed).unwrap();
            let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            assert_partition(&plan, n);
        }
    }

    #[test]
    fn triplet_split_removes_held_out() {
        let mut c = Vec::new();
        let names = ["a", "b", "c", "d"];
        let mut id = 0;
        for (k, s) in names.iter().enumerate() {
            for _ in 0..(k + 1) {
                c.push(inst(id, s, "r", "o"));
                id += 1;
            }
        }
        let plan = make_generalized_triplet_split(&c, 2, 3, 9).unwrap();
        assert_eq!(plan.held_out_triplets.len(), 2);
        let fold = &plan.folds[0];
        for &i in &fold.train {
            assert!(!plan.held_out_triplets.contains(&c[i].triplet()));
        }
        for &i in &fold.test {
            assert!(plan.held_out_triplets.contains(&c[i].triplet()));
        }
        // "a" is the least frequent and falls outside the top 3.
        assert!(plan.held_out_triplets.iter().all(|t| t.subject != "a"));
        assert!(make_generalized_triplet_split(&c, 5, 3, 9).is_err());
    }

    #[test]
    fn frequency_ties_are_stable() {
        // Six triplets of equal frequency: the top 3 are the lexicographically smallest.
        let mut c = Vec::new();
        for (id, s) in ["f", "e", "d", "c", "b", "a"].iter().enumerate() {
            c.push(inst(id, s, "r", "o"));
        }
        let a = make_generalized_triplet_split(&c, 3, 3, 5).unwrap();
        let mut rev = c.clone();
        rev.reverse();
        let b = make_generalized_triplet_split(&rev, 3, 3, 5).unwrap();
        assert_eq!(a.held_out_triplets, b.held_out_triplets);
        let subjects: Vec<&str> = a.held_out_triplets.iter().map(|t| t.subject.as_str()).collect();
        assert_eq!(subjects, vec!["a", "b", "c"]);
    }

    #[test]
    fn word_split() {
        let c = vec![
            inst(0, "cat", "sniffing", "apple"),
            inst(1, "man", "riding", "horse"),
            inst(2, "apple", "near", "man"),
            inst(3, "man", "apple", "horse"),
        ];
        let plan = make_generalized_word_split(&c, &["apple".to_string()]).unwrap();
        assert_eq!(plan.folds[0].test, vec![0, 2]);
        assert_eq!(plan.folds[0].train, vec![1, 3]);
        assert!(make_generalized_word_split(&c, &[]).is_err());
        assert_eq!(DEFAULT_HELD_OUT_WORDS.len(), 25);
    }
}
