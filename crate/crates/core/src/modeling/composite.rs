use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetBundle, Split};
use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};

/// Per-annotator positive and negative centroids of train-split
/// embeddings. Empty classes give the zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeStore {
    dim: usize,
    centroids: BTreeMap<String, (EmbeddingVector, EmbeddingVector)>,
}

impl CompositeStore {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positive(&self, annotator_id: &str) -> Result<&EmbeddingVector> {
        self.centroids.get(annotator_id).map(|c| &c.0).ok_or_else(|| Error::UnknownAnnotator(annotator_id.into()))
    }

    pub fn negative(&self, annotator_id: &str) -> Result<&EmbeddingVector> {
        self.centroids.get(annotator_id).map(|c| &c.1).ok_or_else(|| Error::UnknownAnnotator(annotator_id.into()))
    }

    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.centroids.keys().map(String::as_str)
    }
}

/// `embeddings[i]` belongs to `bundle.instances()[i]`.
pub fn compute_composites(bundle: &DatasetBundle, embeddings: &[EmbeddingVector]) -> Result<CompositeStore> {
    if embeddings.len() != bundle.instances().len() {
        return Err(Error::InvalidArgument(format!(
            "{} embeddings for {} instances",
            embeddings.len(),
            bundle.instances().len()
        )));
    }
    let dim = embeddings.first().map(EmbeddingVector::dim).unwrap_or(0);
    if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: e.dim() });
    }
    let matrix = bundle.matrix();
    let train: Vec<usize> = (0..bundle.instances().len())
        .filter(|&i| bundle.split_of(&matrix.instance_ids()[i]) == Split::Train)
        .collect();
    if train.is_empty() {
        return Err(Error::NoTrainData("train split is empty".into()));
    }
    let mut centroids = BTreeMap::new();
    for (a, id) in matrix.annotator_ids().iter().enumerate() {
        let mut sums = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for &i in &train {
            if let Some(label) = matrix.at(a, i) {
                let slot = usize::from(label);
                counts[slot] += 1;
                for (s, v) in sums[slot].iter_mut().zip(embeddings[i].values()) {
                    *s += v;
                }
            }
        }
        let [neg, pos] = sums.map(|sum| EmbeddingVector::new(sum).map(EmbeddingVector::normalized));
        centroids.insert(id.clone(), (pos?, neg?));
    }
    Ok(CompositeStore { dim, centroids })
}
