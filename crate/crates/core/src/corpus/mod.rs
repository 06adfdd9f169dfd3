//! Disaggregated-label datasets.
//!
//! A [`DatasetBundle`] holds the instances, the sparse annotator × instance
//! [`AnnotationMatrix`] and provenance metadata. Missing annotations are
//! absent cells, never a third label value.

mod io;
mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, Format};
pub use stats::{
    assign_splits, binarize_convabuse, binarize_convabuse_default, compute_stats,
    write_stats_csv, DatasetStats, SplitRatios,
};

/// A binary label, always 0 or 1.
pub type Label = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    HsBrexit,
    Convabuse,
    #[default]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    pub text: String,
    #[serde(default)]
    pub source: Source,
}

impl Instance {
    pub fn new(instance_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { instance_id: instance_id.into(), text: text.into(), source: Source::Custom }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Human,
    LlmStrong,
    LlmWeak,
    /// Human labels with some annotators' training labels swapped for persona labels.
    Hybrid,
}

impl Provenance {
    pub fn is_llm(self) -> bool {
        matches!(self, Provenance::LlmStrong | Provenance::LlmWeak)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Human => "human",
            Provenance::LlmStrong => "llm_strong",
            Provenance::LlmWeak => "llm_weak",
            Provenance::Hybrid => "hybrid",
        }
    }
}

/// Sparse annotator × instance grid of binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationMatrix {
    annotator_ids: Vec<String>,
    instance_ids: Vec<String>,
    annotator_index: HashMap<String, usize>,
    instance_index: HashMap<String, usize>,
    // annotator-major: cells[a * instance_ids.len() + i]
    cells: Vec<Option<Label>>,
}

fn index_of(ids: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(Error::Schema(format!("empty {what} id")));
        }
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateId(format!("{what} {id}")));
        }
    }
    Ok(index)
}

impl AnnotationMatrix {
    /// An empty matrix over the declared annotators and instances.
    pub fn new(annotator_ids: Vec<String>, instance_ids: Vec<String>) -> Result<Self> {
        let annotator_index = index_of(&annotator_ids, "annotator")?;
        let instance_index = index_of(&instance_ids, "instance")?;
        let cells = vec![None; annotator_ids.len() * instance_ids.len()];
        Ok(Self { annotator_ids, instance_ids, annotator_index, instance_index, cells })
    }

    pub fn annotator_ids(&self) -> &[String] {
        &self.annotator_ids
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn num_annotators(&self) -> usize {
        self.annotator_ids.len()
    }

    pub fn num_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn annotator_position(&self, annotator_id: &str) -> Option<usize> {
        self.annotator_index.get(annotator_id).copied()
    }

    pub fn instance_position(&self, instance_id: &str) -> Option<usize> {
        self.instance_index.get(instance_id).copied()
    }

    fn slot(&self, annotator_id: &str, instance_id: &str) -> Result<usize> {
        let a = self
            .annotator_position(annotator_id)
            .ok_or_else(|| Error::UnknownAnnotator(annotator_id.to_string()))?;
        let i = self
            .instance_position(instance_id)
            .ok_or_else(|| Error::Schema(format!("unknown instance {instance_id}")))?;
        Ok(a * self.instance_ids.len() + i)
    }

    pub fn set(&mut self, annotator_id: &str, instance_id: &str, label: Label) -> Result<()> {
        if label > 1 {
            return Err(Error::Range(format!("label {label} is not 0 or 1")));
        }
        let slot = self.slot(annotator_id, instance_id)?;
        self.cells[slot] = Some(label);
        Ok(())
    }

    pub fn clear(&mut self, annotator_id: &str, instance_id: &str) -> Result<()> {
        let slot = self.slot(annotator_id, instance_id)?;
        self.cells[slot] = None;
        Ok(())
    }

    pub fn get(&self, annotator_id: &str, instance_id: &str) -> Option<Label> {
        self.slot(annotator_id, instance_id).ok().and_then(|s| self.cells[s])
    }

    /// Lookup by positions.
    #[inline]
    pub fn at(&self, annotator: usize, instance: usize) -> Option<Label> {
        self.cells[annotator * self.instance_ids.len() + instance]
    }

    /// All present entries in canonical (annotator, instance) order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, Label)> + '_ {
        let n = self.instance_ids.len();
        self.cells.iter().enumerate().filter_map(move |(slot, cell)| {
            cell.map(|l| (self.annotator_ids[slot / n].as_str(), self.instance_ids[slot % n].as_str(), l))
        })
    }

    pub fn num_entries(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn annotations_per_annotator(&self) -> Vec<usize> {
        (0..self.num_annotators())
            .map(|a| (0..self.num_instances()).filter(|&i| self.at(a, i).is_some()).count())
            .collect()
    }

    pub fn annotations_per_instance(&self) -> Vec<usize> {
        (0..self.num_instances())
            .map(|i| (0..self.num_annotators()).filter(|&a| self.at(a, i).is_some()).count())
            .collect()
    }

    /// `(zeros, ones)` observed on instance position `i`.
    pub fn label_counts(&self, instance: usize) -> (usize, usize) {
        let mut counts = (0, 0);
        for a in 0..self.num_annotators() {
            match self.at(a, instance) {
                Some(0) => counts.0 += 1,
                Some(_) => counts.1 += 1,
                None => {}
            }
        }
        counts
    }

    /// Labels of one annotator keyed by instance id.
    pub fn row(&self, annotator_id: &str) -> Option<BTreeMap<&str, Label>> {
        let a = self.annotator_position(annotator_id)?;
        Some(
            (0..self.num_instances())
                .filter_map(|i| self.at(a, i).map(|l| (self.instance_ids[i].as_str(), l)))
                .collect(),
        )
    }

    /// Append an annotator with no entries.
    pub fn add_annotator(&mut self, annotator_id: impl Into<String>) -> Result<()> {
        let id = annotator_id.into();
        if id.is_empty() {
            return Err(Error::Schema("empty annotator id".into()));
        }
        if self.annotator_index.contains_key(&id) {
            return Err(Error::DuplicateId(format!("annotator {id}")));
        }
        self.annotator_index.insert(id.clone(), self.annotator_ids.len());
        self.annotator_ids.push(id);
        self.cells.extend(std::iter::repeat_n(None, self.instance_ids.len()));
        Ok(())
    }

    /// Copy of this matrix restricted to the given instances (in the given order).
    pub fn restrict_instances(&self, instance_ids: &[String]) -> Result<AnnotationMatrix> {
        let mut out = AnnotationMatrix::new(self.annotator_ids.clone(), instance_ids.to_vec())?;
        for (new_i, id) in instance_ids.iter().enumerate() {
            let old_i = self
                .instance_position(id)
                .ok_or_else(|| Error::Schema(format!("unknown instance {id}")))?;
            for a in 0..self.num_annotators() {
                out.cells[a * instance_ids.len() + new_i] = self.at(a, old_i);
            }
        }
        Ok(out)
    }

    /// Copy with annotators and instances reordered. Both orders must be
    /// permutations of the current id lists.
    pub fn reordered(&self, annotator_ids: &[String], instance_ids: &[String]) -> Result<AnnotationMatrix> {
        if annotator_ids.len() != self.num_annotators() || instance_ids.len() != self.num_instances() {
            return Err(Error::InvalidArgument("reorder must be a permutation".into()));
        }
        let mut out = AnnotationMatrix::new(annotator_ids.to_vec(), instance_ids.to_vec())?;
        for (a, aid) in annotator_ids.iter().enumerate() {
            let old_a = self
                .annotator_position(aid)
                .ok_or_else(|| Error::UnknownAnnotator(aid.clone()))?;
            for (i, iid) in instance_ids.iter().enumerate() {
                let old_i = self
                    .instance_position(iid)
                    .ok_or_else(|| Error::Schema(format!("unknown instance {iid}")))?;
                out.cells[a * instance_ids.len() + i] = self.at(old_a, old_i);
            }
        }
        Ok(out)
    }

    /// Annotators that have no entries at all.
    pub fn empty_annotators(&self) -> Vec<&str> {
        self.annotations_per_annotator()
            .iter()
            .zip(&self.annotator_ids)
            .filter(|(c, _)| **c == 0)
            .map(|(_, id)| id.as_str())
            .collect()
    }
}

/// Instances, their annotation matrix and where the labels came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    instances: Vec<Instance>,
    matrix: AnnotationMatrix,
    provenance: Provenance,
    temperature: Option<f64>,
    splits: BTreeMap<String, Split>,
}

impl DatasetBundle {
    /// Validates that the matrix covers exactly the bundled instances (same
    /// order), that temperature is set iff provenance is an LLM one, and that
    /// split tags, when present, cover every instance.
    pub fn new(
        instances: Vec<Instance>,
        matrix: AnnotationMatrix,
        provenance: Provenance,
        temperature: Option<f64>,
        splits: BTreeMap<String, Split>,
    ) -> Result<Self> {
        if instances.len() != matrix.num_instances()
            || instances.iter().zip(matrix.instance_ids()).any(|(inst, id)| &inst.instance_id != id)
        {
            return Err(Error::Schema("matrix instances do not match bundled instances".into()));
        }
        for inst in &instances {
            if inst.text.is_empty() {
                return Err(Error::Schema(format!("instance {} has empty text", inst.instance_id)));
            }
        }
        match (provenance.is_llm(), temperature) {
            (true, None) => return Err(Error::Schema("LLM bundle requires a temperature".into())),
            (false, Some(_)) => {
                return Err(Error::Schema("temperature is only valid for LLM bundles".into()))
            }
            (true, Some(t)) if !(0.0..=1.0).contains(&t) => {
                return Err(Error::Range(format!("temperature {t} outside [0, 1]")))
            }
            _ => {}
        }
        if !splits.is_empty() {
            if splits.len() != instances.len() {
                return Err(Error::Schema("split tags must cover every instance".into()));
            }
            if let Some(id) = splits.keys().find(|id| matrix.instance_position(id).is_none()) {
                return Err(Error::Schema(format!("split tag for unknown instance {id}")));
            }
        }
        Ok(Self { instances, matrix, provenance, temperature, splits })
    }

    /// Human-provenance bundle without splits.
    pub fn human(instances: Vec<Instance>, matrix: AnnotationMatrix) -> Result<Self> {
        Self::new(instances, matrix, Provenance::Human, None, BTreeMap::new())
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn matrix(&self) -> &AnnotationMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn temperature(&self) -> Option<f64> {
        self.temperature
    }

    pub fn splits(&self) -> &BTreeMap<String, Split> {
        &self.splits
    }

    pub fn has_splits(&self) -> bool {
        !self.splits.is_empty()
    }

    pub fn instance(&self, instance_id: &str) -> Option<&Instance> {
        self.matrix.instance_position(instance_id).map(|i| &self.instances[i])
    }

    /// Split of an instance. Bundles without split tags treat every
    /// instance as training data.
    pub fn split_of(&self, instance_id: &str) -> Split {
        if self.splits.is_empty() {
            Split::Train
        } else {
            self.splits.get(instance_id).copied().unwrap_or(Split::Train)
        }
    }

    /// Instance ids of a split, in bundle order.
    pub fn split_ids(&self, split: Split) -> Vec<String> {
        self.instances
            .iter()
            .filter(|inst| self.split_of(&inst.instance_id) == split)
            .map(|inst| inst.instance_id.clone())
            .collect()
    }

    pub fn with_matrix(&self, matrix: AnnotationMatrix) -> Result<Self> {
        Self::new(self.instances.clone(), matrix, self.provenance, self.temperature, self.splits.clone())
    }

    pub fn with_splits(&self, splits: BTreeMap<String, Split>) -> Result<Self> {
        Self::new(self.instances.clone(), self.matrix.clone(), self.provenance, self.temperature, splits)
    }

    pub fn with_provenance(&self, provenance: Provenance, temperature: Option<f64>) -> Result<Self> {
        Self::new(self.instances.clone(), self.matrix.clone(), provenance, temperature, self.splits.clone())
    }

    /// Rejects declared annotators without any entry. Used by loaders;
    /// generated bundles may legitimately carry empty rows.
    pub fn check_annotator_coverage(&self) -> Result<()> {
        match self.matrix.empty_annotators().first() {
            Some(id) => Err(Error::Schema(format!("annotator {id} has no annotations"))),
            None => Ok(()),
        }
    }
}
