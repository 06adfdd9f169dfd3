//! Persona/human alignment: cosine similarity of annotation vectors,
//! prototype identification, label swapping and cross-provenance
//! evaluation.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationMatrix, DatasetBundle, Label, Provenance, Split};
use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};
use crate::metrics::{f1_scores, F1Report};
use crate::modeling::{predict_split, split_gold, TrainedModel};
use crate::par;
use crate::seed;

pub const DEFAULT_SAMPLE_SIZES: [usize; 4] = [5, 10, 50, 100];
pub const DEFAULT_RESAMPLES: usize = 20;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Labels of `annotator_id` on `instance_ids`, in that order.
pub fn annotation_vector(matrix: &AnnotationMatrix, annotator_id: &str, instance_ids: &[String]) -> Result<Vec<Label>> {
    if matrix.annotator_position(annotator_id).is_none() {
        return Err(Error::UnknownAnnotator(annotator_id.to_string()));
    }
    instance_ids
        .iter()
        .map(|i| {
            matrix.get(annotator_id, i).ok_or_else(|| Error::MissingAnnotation {
                annotator: annotator_id.to_string(),
                instance: i.clone(),
            })
        })
        .collect()
}

/// Cosine of two raw binary vectors; 0 when either is all zeros.
pub fn cosine(a: &[Label], b: &[Label]) -> f64 {
    let (mut dot, mut na, mut nb) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        dot += u64::from(x) * u64::from(y);
        na += u64::from(x) * u64::from(x);
        nb += u64::from(y) * u64::from(y);
    }
    if na == 0 || nb == 0 {
        return 0.0;
    }
    if dot == na && na == nb {
        return 1.0;
    }
    dot as f64 / ((na * nb) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParams {
    pub sample_sizes: Vec<usize>,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        Self { sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(), resamples: DEFAULT_RESAMPLES, seed: 0 }
    }
}

impl AlignmentParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::config("align.sample_sizes", "must be a non-empty list of positive sizes"));
        }
        if self.resamples == 0 {
            return Err(Error::config("align.resamples", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCell {
    pub human_id: String,
    pub persona_id: String,
    pub sample_size: usize,
    pub mean_cos: f64,
    pub std_cos: f64,
    pub shared_instances: usize,
}

/// A pair/size combination left out for lack of shared instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub human_id: String,
    pub persona_id: String,
    pub sample_size: usize,
    pub shared_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMatrix {
    pub human_ids: Vec<String>,
    pub persona_ids: Vec<String>,
    pub sample_sizes: Vec<usize>,
    /// Human-major, then persona, then sample size.
    pub cells: Vec<AlignmentCell>,
    pub skipped: Vec<SkippedPair>,
}

impl AlignmentMatrix {
    pub fn get(&self, human_id: &str, persona_id: &str, sample_size: usize) -> Option<&AlignmentCell> {
        self.cells
            .iter()
            .find(|c| c.human_id == human_id && c.persona_id == persona_id && c.sample_size == sample_size)
    }

    pub fn largest_sample_size(&self) -> Option<usize> {
        self.sample_sizes.iter().copied().max()
    }

    /// Swap the roles of humans and personas.
    pub fn transposed(&self) -> AlignmentMatrix {
        let mut cells: Vec<AlignmentCell> = self
            .cells
            .iter()
            .map(|c| AlignmentCell { human_id: c.persona_id.clone(), persona_id: c.human_id.clone(), ..c.clone() })
            .collect();
        let hpos = |id: &str| self.persona_ids.iter().position(|p| p == id);
        let ppos = |id: &str| self.human_ids.iter().position(|h| h == id);
        let spos = |n: usize| self.sample_sizes.iter().position(|&s| s == n);
        cells.sort_by_key(|c| (hpos(&c.human_id), ppos(&c.persona_id), spos(c.sample_size)));
        let mut skipped: Vec<SkippedPair> = self
            .skipped
            .iter()
            .map(|s| SkippedPair { human_id: s.persona_id.clone(), persona_id: s.human_id.clone(), ..s.clone() })
            .collect();
        skipped.sort_by_key(|c| (hpos(&c.human_id), ppos(&c.persona_id), spos(c.sample_size)));
        AlignmentMatrix {
            human_ids: self.persona_ids.clone(),
            persona_ids: self.human_ids.clone(),
            sample_sizes: self.sample_sizes.clone(),
            cells,
            skipped,
        }
    }

    /// CSV `human_id,persona_id,sample_size,mean_cos,std_cos,shared_instances`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["human_id", "persona_id", "sample_size", "mean_cos", "std_cos", "shared_instances"])?;
        for c in &self.cells {
            w.write_record([
                c.human_id.clone(),
                c.persona_id.clone(),
                c.sample_size.to_string(),
                format!("{:.6}", c.mean_cos),
                format!("{:.6}", c.std_cos),
                c.shared_instances.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<alignment report>", e))
    }
}

/// Mean and population standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per (human, persona, n): draw n shared instances without replacement,
/// take the cosine of both label vectors, repeat `resamples` times. The
/// random stream of a cell depends only on the unordered id pair and n,
/// so swapping the two bundles transposes the result exactly.
pub fn alignment_matrix(human: &DatasetBundle, llm: &DatasetBundle, params: &AlignmentParams) -> Result<AlignmentMatrix> {
    params.validate()?;
    let hm = human.matrix();
    let lm = llm.matrix();
    let pairs: Vec<(usize, usize)> =
        (0..hm.num_annotators()).flat_map(|h| (0..lm.num_annotators()).map(move |p| (h, p))).collect();
    let per_pair = par::map(&pairs, |&(h, p)| {
        let hid = &hm.annotator_ids()[h];
        let pid = &lm.annotator_ids()[p];
        let hrow = hm.row(hid).expect("declared annotator");
        let prow = lm.row(pid).expect("declared annotator");
        // BTreeMap iteration keeps shared instances sorted by id.
        let shared: Vec<(Label, Label)> =
            hrow.iter().filter_map(|(i, &x)| prow.get(i).map(|&y| (x, y))).collect();
        let (lo, hi) = if hid <= pid { (hid, pid) } else { (pid, hid) };
        let mut cells = Vec::new();
        let mut skipped = Vec::new();
        for &n in &params.sample_sizes {
            if shared.len() < n {
                skipped.push(SkippedPair {
                    human_id: hid.clone(),
                    persona_id: pid.clone(),
                    sample_size: n,
                    shared_instances: shared.len(),
                });
                continue;
            }
            let mut rng = seed::rng(seed::substream(params.seed, &["align", lo, hi, &n.to_string()]));
            let values: Vec<f64> = (0..params.resamples)
                .map(|_| {
                    let mut picks = index::sample(&mut rng, shared.len(), n).into_vec();
                    picks.sort_unstable();
                    let a: Vec<Label> = picks.iter().map(|&k| shared[k].0).collect();
                    let b: Vec<Label> = picks.iter().map(|&k| shared[k].1).collect();
                    cosine(&a, &b)
                })
                .collect();
            let (mean_cos, std_cos) = mean_std(&values);
            cells.push(AlignmentCell {
                human_id: hid.clone(),
                persona_id: pid.clone(),
                sample_size: n,
                mean_cos,
                std_cos,
                shared_instances: shared.len(),
            });
        }
        (cells, skipped)
    });
    let (cells, skipped): (Vec<_>, Vec<_>) = per_pair.into_iter().unzip();
    Ok(AlignmentMatrix {
        human_ids: hm.annotator_ids().to_vec(),
        persona_ids: lm.annotator_ids().to_vec(),
        sample_sizes: params.sample_sizes.clone(),
        cells: cells.into_iter().flatten().collect(),
        skipped: skipped.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeMatch {
    pub persona_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrototypeMapping {
    pub mapping: BTreeMap<String, PrototypeMatch>,
    /// Personas mapped by at least two humans, in persona order.
    pub prototypical: Vec<String>,
    /// Personas mapped by no human, in persona order.
    pub unmatched: Vec<String>,
}

impl PrototypeMapping {
    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// JSON `{human_id: {persona_id, score}}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.mapping)?)
    }
}

/// Map each human to its best persona at the largest sample size when the
/// mean cosine reaches `threshold`. Ties go to the earlier persona.
pub fn identify_prototypes(matrix: &AlignmentMatrix, threshold: f64) -> PrototypeMapping {
    let mut out = PrototypeMapping::default();
    let Some(n) = matrix.largest_sample_size() else {
        out.unmatched = matrix.persona_ids.clone();
        return out;
    };
    for h in &matrix.human_ids {
        let mut best: Option<(&str, f64)> = None;
        for p in &matrix.persona_ids {
            if let Some(cell) = matrix.get(h, p, n) {
                if best.is_none_or(|(_, s)| cell.mean_cos > s) {
                    best = Some((p, cell.mean_cos));
                }
            }
        }
        if let Some((p, score)) = best.filter(|(_, s)| *s >= threshold) {
            out.mapping.insert(h.clone(), PrototypeMatch { persona_id: p.to_string(), score });
        }
    }
    for p in &matrix.persona_ids {
        match out.mapping.values().filter(|m| &m.persona_id == p).count() {
            0 => out.unmatched.push(p.clone()),
            1 => {}
            _ => out.prototypical.push(p.clone()),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapReportRow {
    pub human_id: String,
    pub persona_id: String,
    pub swapped: usize,
    pub skipped: usize,
}

/// CSV `human_id,persona_id,swapped,skipped`.
pub fn write_swap_report<W: Write>(rows: &[SwapReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["human_id", "persona_id", "swapped", "skipped"])?;
    for r in rows {
        w.write_record([r.human_id.clone(), r.persona_id.clone(), r.swapped.to_string(), r.skipped.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<swap report>", e))
}

/// Replace each mapped human's train-split labels with the mapped
/// persona's. Entries the persona lacks keep the human label and are
/// counted as skipped. Dev and test labels are never touched. An empty
/// mapping returns the input unchanged.
pub fn swap_labels(human: &DatasetBundle, llm: &DatasetBundle, mapping: &PrototypeMapping) -> Result<(DatasetBundle, Vec<SwapReportRow>)> {
    if mapping.is_empty() {
        return Ok((human.clone(), Vec::new()));
    }
    let mut matrix = human.matrix().clone();
    let mut report = Vec::new();
    for (h, m) in &mapping.mapping {
        if human.matrix().annotator_position(h).is_none() {
            return Err(Error::UnknownAnnotator(h.clone()));
        }
        if llm.matrix().annotator_position(&m.persona_id).is_none() {
            return Err(Error::UnknownAnnotator(m.persona_id.clone()));
        }
        let mut row = SwapReportRow { human_id: h.clone(), persona_id: m.persona_id.clone(), swapped: 0, skipped: 0 };
        for (i, _) in human.matrix().row(h).expect("checked above") {
            if human.split_of(i) != Split::Train {
                continue;
            }
            match llm.matrix().get(&m.persona_id, i) {
                Some(label) => {
                    matrix.set(h, i, label)?;
                    row.swapped += 1;
                }
                None => row.skipped += 1,
            }
        }
        report.push(row);
    }
    let swapped = human.with_matrix(matrix)?.with_provenance(Provenance::Hybrid, None)?;
    Ok((swapped, report))
}

/// Evaluate a model trained on one bundle against the gold labels of
/// another. `correspondence` maps model annotators to `bundle`
/// annotators; by default the k-th model annotator stands for the k-th
/// annotator of `bundle`.
pub fn cross_evaluate(
    model: &TrainedModel,
    bundle: &DatasetBundle,
    split: Split,
    embeddings: &[EmbeddingVector],
    correspondence: Option<&BTreeMap<String, String>>,
) -> Result<F1Report> {
    let reverse: BTreeMap<String, String> = match correspondence {
        Some(map) => map.iter().map(|(x, y)| (y.clone(), x.clone())).collect(),
        None => model
            .annotators()
            .iter()
            .zip(bundle.matrix().annotator_ids())
            .map(|(x, y)| (y.clone(), x.clone()))
            .collect(),
    };
    let lookup = |y: &str| reverse.get(y).cloned().ok_or_else(|| Error::Correspondence(y.to_string()));
    let predictions = predict_split(model, bundle, split, embeddings, &lookup)?;
    f1_scores(&predictions, &split_gold(bundle, split)?)
}
