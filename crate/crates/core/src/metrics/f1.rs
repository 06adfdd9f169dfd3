use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationMatrix, Label};
use crate::error::{Error, Result};

/// Predicted labels keyed by `(annotator_id, instance_id)`.
pub type Predictions = HashMap<(String, String), Label>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub micro_f1_positive: f64,
    pub macro_f1: f64,
    pub per_annotator_f1: BTreeMap<String, f64>,
}

impl F1Report {
    /// `scope,annotator_id,f1` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scope", "annotator_id", "f1"])?;
        w.write_record(["micro", "", &format!("{:.6}", self.micro_f1_positive)])?;
        w.write_record(["macro", "", &format!("{:.6}", self.macro_f1)])?;
        for (id, f) in &self.per_annotator_f1 {
            w.write_record(["annotator", id, &format!("{f:.6}")])?;
        }
        w.flush().map_err(|e| Error::io("<f1>", e))
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
    tn: usize,
}

impl Confusion {
    fn add(&mut self, gold: Label, pred: Label) {
        match (gold, pred) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (1, 0) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        // Nothing to find and nothing predicted counts as perfect.
        if tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    }

    fn positive_f1(&self) -> f64 {
        Self::f1(self.tp, self.fp, self.fn_)
    }

    fn negative_f1(&self) -> f64 {
        Self::f1(self.tn, self.fn_, self.fp)
    }
}

/// F1 over every gold entry of `gold`: micro positive-class F1, macro
/// (mean of positive- and negative-class F1), and per-annotator
/// positive-class F1.
pub fn f1_scores(predictions: &Predictions, gold: &AnnotationMatrix) -> Result<F1Report> {
    let mut total = Confusion::default();
    let mut per_annotator: BTreeMap<String, Confusion> = BTreeMap::new();
    let mut key = (String::new(), String::new());
    for (annotator, instance, label) in gold.entries() {
        key.0.clear();
        key.0.push_str(annotator);
        key.1.clear();
        key.1.push_str(instance);
        let pred = *predictions
            .get(&key)
            .ok_or_else(|| Error::Coverage(format!("no prediction for ({annotator}, {instance})")))?;
        total.add(label, pred);
        per_annotator.entry(annotator.to_string()).or_default().add(label, pred);
    }
    Ok(F1Report {
        micro_f1_positive: total.positive_f1(),
        macro_f1: 0.5 * (total.positive_f1() + total.negative_f1()),
        per_annotator_f1: per_annotator.into_iter().map(|(k, c)| (k, c.positive_f1())).collect(),
    })
}
