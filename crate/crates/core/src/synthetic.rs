//! Seeded synthetic corpora and benchmarks.
//!
//! Everything here is a pure function of its arguments, so generated
//! datasets can be regenerated bit-for-bit instead of being shipped.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{assign_splits, AnnotationMatrix, DatasetBundle, Instance, Label, Provenance, SplitRatios};
use crate::error::{Error, Result};
use crate::seed;

const WORDS: &[&str] = &[
    "people", "country", "vote", "market", "future", "today", "news", "think", "time", "week",
    "money", "city", "government", "policy", "deal", "trade", "plan", "work", "family", "school",
    "water", "house", "road", "train", "morning", "evening", "weather", "rain", "sun", "garden",
    "music", "film", "book", "story", "friend", "team", "game", "match", "report", "price",
    "shop", "street", "doctor", "hospital", "job", "office", "meeting", "letter", "phone", "computer",
    "question", "answer", "idea", "change", "level", "point", "number", "result", "reason", "problem",
    "moment", "night", "summer", "winter", "village", "river", "bridge", "car", "bus", "ticket",
    "coffee", "dinner", "lunch", "kitchen", "window", "door", "table", "chair", "paper", "voice",
    "talk", "listen", "walk", "read", "write", "build", "open", "close", "start", "finish",
    "really", "maybe", "always", "never", "often", "still", "again", "quite", "very", "just",
];

/// Marker tokens planted by the rule benchmarks. Rule A fires on any of
/// the first set, rule B on any of the second. Chosen so that no marker
/// shares a hashing slot with a filler word or another marker under the
/// default embedder.
pub const RULE_A_MARKERS: &[&str] = &["invasion", "overrun", "horde", "infest"];
pub const RULE_B_MARKERS: &[&str] = &["traitor", "parasites", "vermin", "scum"];

/// A sentence of `len` filler words drawn deterministically from `seed_value`.
pub fn sentence(seed_value: u64, len: usize) -> String {
    let mut rng = seed::rng(seed::substream(seed_value, &["sentence"]));
    (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// Instances with filler text, ids `s0000`, `s0001`, ...
pub fn synthetic_instances(n: usize, seed_value: u64) -> Vec<Instance> {
    (0..n)
        .map(|i| {
            let text = sentence(seed::hash_parts(seed_value, &["instance", &i.to_string()]), 12);
            Instance::new(format!("s{i:04}"), text)
        })
        .collect()
}

/// Human bundle over [`synthetic_instances`] where every annotator labels
/// every instance uniformly at random.
pub fn random_humans(num_annotators: usize, num_instances: usize, seed_value: u64) -> Result<DatasetBundle> {
    let instances = synthetic_instances(num_instances, seed_value);
    let ids: Vec<String> = (0..num_annotators).map(|a| format!("human_{a}")).collect();
    let mut rng = seed::rng(seed::substream(seed_value, &["random_humans"]));
    let matrix = fill(&ids, &instances, |_, _| rng.random_range(0..2u8))?;
    DatasetBundle::human(instances, matrix)
}

/// Relabel every annotator of `bundle` as a fresh bundle whose annotator k
/// is `persona_k` and copies annotator k's labels, flipping each with
/// probability `noise`. Splits are kept.
pub fn noisy_clones(bundle: &DatasetBundle, noise: f64, provenance: Provenance, seed_value: u64) -> Result<DatasetBundle> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Range(format!("noise {noise} outside [0, 1]")));
    }
    let src = bundle.matrix();
    let ids: Vec<String> = (0..src.num_annotators()).map(|k| format!("persona_{k}")).collect();
    let mut rng = seed::rng(seed::substream(seed_value, &["noisy_clones"]));
    let mut matrix = AnnotationMatrix::new(ids.clone(), src.instance_ids().to_vec())?;
    for (k, id) in ids.iter().enumerate() {
        for (i, inst) in src.instance_ids().iter().enumerate() {
            let flip = rng.random::<f64>() < noise;
            if let Some(label) = src.at(k, i) {
                matrix.set(id, inst, if flip { 1 - label } else { label })?;
            }
        }
    }
    llm_bundle(bundle, matrix, provenance)
}

/// Persona bundle whose first persona is the majority vote of all
/// annotators of `bundle` (ties go to 1) and whose remaining
/// `num_random` personas label uniformly at random.
pub fn majority_persona(bundle: &DatasetBundle, num_random: usize, seed_value: u64) -> Result<DatasetBundle> {
    let src = bundle.matrix();
    let mut ids = vec!["persona_majority".to_string()];
    ids.extend((0..num_random).map(|k| format!("persona_random_{k}")));
    let mut rng = seed::rng(seed::substream(seed_value, &["majority_persona"]));
    let mut matrix = AnnotationMatrix::new(ids.clone(), src.instance_ids().to_vec())?;
    for (i, inst) in src.instance_ids().iter().enumerate() {
        let (zeros, ones) = src.label_counts(i);
        if zeros + ones > 0 {
            matrix.set(&ids[0], inst, u8::from(ones >= zeros))?;
        }
        for id in &ids[1..] {
            matrix.set(id, inst, rng.random_range(0..2u8))?;
        }
    }
    llm_bundle(bundle, matrix, Provenance::LlmStrong)
}

/// Copy of `bundle` whose labels are replaced by fair coin flips on the
/// same (annotator, instance) cells.
pub fn randomize_labels(bundle: &DatasetBundle, seed_value: u64) -> Result<DatasetBundle> {
    let src = bundle.matrix();
    let mut rng = seed::rng(seed::substream(seed_value, &["randomize_labels"]));
    let mut matrix = AnnotationMatrix::new(src.annotator_ids().to_vec(), src.instance_ids().to_vec())?;
    for (a, i, _) in src.entries() {
        matrix.set(a, i, rng.random_range(0..2u8))?;
    }
    bundle.with_matrix(matrix)
}

fn llm_bundle(template: &DatasetBundle, matrix: AnnotationMatrix, provenance: Provenance) -> Result<DatasetBundle> {
    DatasetBundle::new(template.instances().to_vec(), matrix, provenance, Some(0.0), template.splits().clone())
}

fn fill(ids: &[String], instances: &[Instance], mut label: impl FnMut(usize, usize) -> Label) -> Result<AnnotationMatrix> {
    let mut matrix = AnnotationMatrix::new(ids.to_vec(), instances.iter().map(|i| i.instance_id.clone()).collect())?;
    for (a, id) in ids.iter().enumerate() {
        for (i, inst) in instances.iter().enumerate() {
            matrix.set(id, &inst.instance_id, label(a, i))?;
        }
    }
    Ok(matrix)
}

/// Which planted markers an instance carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planted {
    A,
    B,
    Neither,
}

/// Texts for the rule benchmarks: 40% carry an A marker, 40% a B marker,
/// 20% neither, in shuffled order. Returns instances and their category.
pub fn planted_instances(n: usize, seed_value: u64) -> Vec<(Instance, Planted)> {
    let n_a = (n as f64 * 0.4).round() as usize;
    let n_b = (n as f64 * 0.4).round() as usize;
    let mut kinds: Vec<Planted> = std::iter::repeat_n(Planted::A, n_a)
        .chain(std::iter::repeat_n(Planted::B, n_b))
        .chain(std::iter::repeat_n(Planted::Neither, n.saturating_sub(n_a + n_b)))
        .collect();
    let mut rng = seed::rng(seed::substream(seed_value, &["planted"]));
    kinds.shuffle(&mut rng);
    kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            let mut words: Vec<String> = sentence(rng.random(), 10).split(' ').map(str::to_string).collect();
            let marker = match kind {
                Planted::A => Some(RULE_A_MARKERS[rng.random_range(0..RULE_A_MARKERS.len())]),
                Planted::B => Some(RULE_B_MARKERS[rng.random_range(0..RULE_B_MARKERS.len())]),
                Planted::Neither => None,
            };
            if let Some(marker) = marker {
                let pos = rng.random_range(0..=words.len());
                words.insert(pos, marker.to_string());
            }
            (Instance::new(format!("p{i:04}"), words.join(" ")), kind)
        })
        .collect()
}

pub const PLANTED_SIZE: usize = 500;
pub const PLANTED_SEED: u64 = 20240;

/// Six annotators over `n` planted texts: `rule_a_k` label 1 exactly on
/// A-marked texts, `rule_b_k` exactly on B-marked texts. Split 70/10/20.
pub fn planted_rule_benchmark(n: usize, seed_value: u64) -> Result<DatasetBundle> {
    let items = planted_instances(n, seed_value);
    let ids: Vec<String> = (0..3).map(|k| format!("rule_a_{k}")).chain((0..3).map(|k| format!("rule_b_{k}"))).collect();
    let instances: Vec<Instance> = items.iter().map(|(inst, _)| inst.clone()).collect();
    let matrix = fill(&ids, &instances, |a, i| {
        let kind = items[i].1;
        u8::from(if a < 3 { kind == Planted::A } else { kind == Planted::B })
    })?;
    split(DatasetBundle::human(instances, matrix)?, seed_value)
}

/// Six annotators who all follow rule A. Split 70/10/20.
pub fn identical_annotator_benchmark(n: usize, seed_value: u64) -> Result<DatasetBundle> {
    let items = planted_instances(n, seed_value);
    let ids: Vec<String> = (0..6).map(|k| format!("same_{k}")).collect();
    let instances: Vec<Instance> = items.iter().map(|(inst, _)| inst.clone()).collect();
    let matrix = fill(&ids, &instances, |_, i| u8::from(items[i].1 == Planted::A))?;
    split(DatasetBundle::human(instances, matrix)?, seed_value)
}

fn split(bundle: DatasetBundle, seed_value: u64) -> Result<DatasetBundle> {
    assign_splits(&bundle, SplitRatios::new(0.7, 0.1, 0.2)?, seed_value)
}

/// Named generators reachable from the command line.
pub fn benchmark_names() -> &'static [&'static str] {
    &["planted_rule", "identical_annotator", "random_humans"]
}

pub fn generate_benchmark(name: &str, n: usize, seed_value: u64) -> Result<DatasetBundle> {
    match name {
        "planted_rule" => planted_rule_benchmark(n, seed_value),
        "identical_annotator" => identical_annotator_benchmark(n, seed_value),
        "random_humans" => {
            let bundle = random_humans(6, n, seed_value)?;
            split(bundle, seed_value)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown benchmark {other}; expected one of {}",
            benchmark_names().join(", ")
        ))),
    }
}

/// Category of every planted instance, for oracle checks.
pub fn planted_categories(n: usize, seed_value: u64) -> BTreeMap<String, Planted> {
    planted_instances(n, seed_value).into_iter().map(|(inst, kind)| (inst.instance_id, kind)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    #[test]
    fn planted_is_deterministic_and_balanced() {
        let a = planted_rule_benchmark(PLANTED_SIZE, PLANTED_SEED).unwrap();
        let b = planted_rule_benchmark(PLANTED_SIZE, PLANTED_SEED).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matrix().num_entries(), 6 * 500);
        assert_eq!(a.split_ids(Split::Train).len(), 350);
        let cats = planted_categories(PLANTED_SIZE, PLANTED_SEED);
        assert_eq!(cats.values().filter(|k| **k == Planted::A).count(), 200);
        assert_eq!(cats.values().filter(|k| **k == Planted::Neither).count(), 100);
    }

    #[test]
    fn markers_have_private_hash_slots() {
        use crate::embed::{token_slot, DEFAULT_DIM};
        let slot = |w: &str| token_slot(w, DEFAULT_DIM, 0).0;
        let filler: std::collections::BTreeSet<usize> = WORDS.iter().map(|w| slot(w)).collect();
        let mut seen = std::collections::BTreeSet::new();
        for m in RULE_A_MARKERS.iter().chain(RULE_B_MARKERS) {
            assert!(!WORDS.contains(m));
            assert!(!filler.contains(&slot(m)), "{m} collides with a filler word");
            assert!(seen.insert(slot(m)), "{m} collides with another marker");
        }
    }

    #[test]
    fn clones_without_noise_copy_labels() {
        let humans = random_humans(3, 20, 1).unwrap();
        let clones = noisy_clones(&humans, 0.0, Provenance::LlmStrong, 2).unwrap();
        for (k, h) in humans.matrix().annotator_ids().iter().enumerate() {
            assert_eq!(humans.matrix().row(h).unwrap(), clones.matrix().row(&format!("persona_{k}")).unwrap());
        }
    }
}
