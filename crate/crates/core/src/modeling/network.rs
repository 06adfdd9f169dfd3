//! One-hidden-layer network over `[text ‖ c⁺ ‖ c⁻ ‖ u_a]` features with a
//! scalar or per-annotator logistic output.
//!
//! Parameters live in one flat vector:
//! `W1 (hidden × input, row-major) | b1 | w2 (heads × hidden) | b2 | U (annotators × user_dim)`.
//! The text block of W1 is applied sparsely since hashing embeddings are
//! mostly zero; the annotator-dependent block is computed once per
//! annotator per call.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::Technique;
use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};
use crate::seed;

/// One `(annotator, instance, label)` training triple by position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub instance: usize,
    pub annotator: usize,
    pub label: f64,
}

/// Text embeddings, per-annotator composite side features and samples.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    texts: Vec<Vec<f64>>,
    nonzero: Vec<Vec<usize>>,
    side: Vec<Vec<f64>>,
    samples: Vec<Sample>,
}

impl TrainingSet {
    /// `side[a]` is `c⁺ ‖ c⁻` of annotator `a` for composite techniques and
    /// empty otherwise.
    pub fn new(texts: &[EmbeddingVector], side: Vec<Vec<f64>>, samples: Vec<Sample>) -> Self {
        let texts: Vec<Vec<f64>> = texts.iter().map(|e| e.values().to_vec()).collect();
        let nonzero = texts.iter().map(|t| nonzero_indices(t)).collect();
        Self { texts, nonzero, side, samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn nonzero_indices(values: &[f64]) -> Vec<usize> {
    values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    technique: Technique,
    text_dim: usize,
    user_dim: usize,
    hidden: usize,
    num_annotators: usize,
    params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    input: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    user: usize,
    len: usize,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Network {
    /// Zero parameters everywhere; every prediction is exactly 0.5.
    pub fn zeros(technique: Technique, text_dim: usize, user_dim: usize, hidden: usize, num_annotators: usize) -> Self {
        let user_dim = if technique.uses_user_embedding() { user_dim } else { 0 };
        let mut net = Self { technique, text_dim, user_dim, hidden, num_annotators, params: Vec::new() };
        net.params = vec![0.0; net.layout().len];
        net
    }

    /// Glorot-uniform weights, zero biases. Each block, and each
    /// annotator's own parameters, draws from a separate seeded stream, so
    /// shared weights do not depend on the annotator registry.
    pub fn init(technique: Technique, text_dim: usize, user_dim: usize, hidden: usize, annotators: &[String], seed_value: u64) -> Self {
        let mut net = Self::zeros(technique, text_dim, user_dim, hidden, annotators.len());
        let l = net.layout();
        let fill = |out: &mut [f64], stream: u64, bound: f64| {
            let mut rng = seed::rng(stream);
            out.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        };
        fill(&mut net.params[..l.b1], seed::substream(seed_value, &["w1"]), (6.0 / (l.input + hidden) as f64).sqrt());
        let head_bound = (6.0 / (hidden + 1) as f64).sqrt();
        if technique == Technique::MultiTask {
            for (a, id) in annotators.iter().enumerate() {
                let at = l.w2 + a * hidden;
                fill(&mut net.params[at..at + hidden], seed::substream(seed_value, &["head", id]), head_bound);
            }
        } else {
            fill(&mut net.params[l.w2..l.b2], seed::substream(seed_value, &["w2"]), head_bound);
        }
        for (a, id) in annotators.iter().enumerate().filter(|_| net.user_dim > 0) {
            let at = l.user + a * net.user_dim;
            fill(&mut net.params[at..at + net.user_dim], seed::substream(seed_value, &["user", id]), 0.1);
        }
        net
    }

    fn heads(&self) -> usize {
        if self.technique == Technique::MultiTask {
            self.num_annotators
        } else {
            1
        }
    }

    fn layout(&self) -> Layout {
        let input = self.technique.input_dim(self.text_dim, self.user_dim);
        let b1 = self.hidden * input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.heads() * self.hidden;
        let user = b2 + self.heads();
        let len = user + if self.user_dim > 0 { self.num_annotators * self.user_dim } else { 0 };
        Layout { input, b1, w2, b2, user, len }
    }

    pub fn technique(&self) -> Technique {
        self.technique
    }

    pub fn text_dim(&self) -> usize {
        self.text_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn num_annotators(&self) -> usize {
        self.num_annotators
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Indices of parameters that receive the L2 penalty: the shared
    /// weight matrices. Biases and per-annotator parameters are exempt.
    fn regularized(&self) -> std::ops::Range<usize> {
        let l = self.layout();
        0..l.b1
    }

    fn regularized_head(&self) -> Option<std::ops::Range<usize>> {
        let l = self.layout();
        (self.technique != Technique::MultiTask).then_some(l.w2..l.b2)
    }

    /// User embedding of annotator `a`, empty when the technique has none.
    fn user(&self, a: usize) -> &[f64] {
        if self.user_dim == 0 {
            return &[];
        }
        let at = self.layout().user + a * self.user_dim;
        &self.params[at..at + self.user_dim]
    }

    /// Hidden pre-activation contribution of the annotator-dependent input
    /// block `side ‖ u_a`.
    fn side_preactivation(&self, side: &[f64], a: usize) -> Vec<f64> {
        let l = self.layout();
        let user = self.user(a);
        (0..self.hidden)
            .map(|k| {
                let row = &self.params[k * l.input + self.text_dim..(k + 1) * l.input];
                let (w_side, w_user) = row.split_at(side.len());
                let mut s = 0.0;
                for (w, x) in w_side.iter().zip(side) {
                    s += w * x;
                }
                for (w, x) in w_user.iter().zip(user) {
                    s += w * x;
                }
                s
            })
            .collect()
    }

    fn check_inputs(&self, text: &[f64], side: &[f64], a: usize) -> Result<()> {
        if text.len() != self.text_dim {
            return Err(Error::DimensionMismatch { expected: self.text_dim, actual: text.len() });
        }
        let want_side = if self.technique.uses_composites() { 2 * self.text_dim } else { 0 };
        if side.len() != want_side {
            return Err(Error::DimensionMismatch { expected: want_side, actual: side.len() });
        }
        if self.technique.is_annotator_aware() && a >= self.num_annotators {
            return Err(Error::UnknownAnnotator(format!("#{a}")));
        }
        Ok(())
    }

    /// Output logit for one text. `annotator` is ignored by text_only.
    pub fn logit(&self, text: &[f64], side: &[f64], annotator: usize) -> Result<f64> {
        let a = if self.technique.is_annotator_aware() { annotator } else { 0 };
        self.check_inputs(text, side, a)?;
        let l = self.layout();
        let side_pre = if self.technique.is_annotator_aware() && (self.user_dim > 0 || !side.is_empty()) {
            Some(self.side_preactivation(side, a))
        } else {
            None
        };
        let nz = nonzero_indices(text);
        let head = if self.technique == Technique::MultiTask { a } else { 0 };
        let mut z = self.params[l.b2 + head];
        for k in 0..self.hidden {
            let mut pre = self.params[l.b1 + k] + side_pre.as_ref().map_or(0.0, |s| s[k]);
            for &j in &nz {
                pre += self.params[k * l.input + j] * text[j];
            }
            z += self.params[l.w2 + head * self.hidden + k] * pre.tanh();
        }
        Ok(z)
    }

    pub fn probability(&self, text: &[f64], side: &[f64], annotator: usize) -> Result<f64> {
        self.logit(text, side, annotator).map(sigmoid)
    }

    /// Mean binary cross-entropy over `set` plus `l2/2 · ‖W‖²`.
    pub fn loss(&self, set: &TrainingSet, l2: f64) -> Result<f64> {
        let idx: Vec<usize> = (0..set.len()).collect();
        self.evaluate(set, &idx, l2, None)
    }

    /// Loss and its exact gradient over the whole set.
    pub fn loss_and_gradient(&self, set: &TrainingSet, l2: f64) -> Result<(f64, Vec<f64>)> {
        let idx: Vec<usize> = (0..set.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.evaluate(set, &idx, l2, Some(&mut grad))?;
        Ok((loss, grad))
    }

    /// Loss over `set.samples[idx]`, accumulating its gradient into `grad`
    /// when given. Summation order is fixed by `idx`.
    pub(crate) fn evaluate(&self, set: &TrainingSet, idx: &[usize], l2: f64, mut grad: Option<&mut Vec<f64>>) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::NoTrainData("no samples selected".into()));
        }
        let l = self.layout();
        let aware = self.technique.is_annotator_aware();
        let dense_side = aware && (self.user_dim > 0 || self.technique.uses_composites());
        let heads_per_annotator = self.technique == Technique::MultiTask;

        let mut side_pre: Vec<Option<Vec<f64>>> = vec![None; if aware { self.num_annotators } else { 0 }];
        let mut side_grad: Vec<Option<Vec<f64>>> = side_pre.clone();
        for &s in idx {
            let sample = set.samples[s];
            let text = &set.texts[sample.instance];
            let side = if self.technique.uses_composites() { set.side[sample.annotator].as_slice() } else { &[] };
            self.check_inputs(text, side, if aware { sample.annotator } else { 0 })?;
            if dense_side && side_pre[sample.annotator].is_none() {
                side_pre[sample.annotator] = Some(self.side_preactivation(side, sample.annotator));
                side_grad[sample.annotator] = Some(vec![0.0; self.hidden]);
            }
        }

        let n = idx.len() as f64;
        let mut loss = 0.0;
        let mut h = vec![0.0; self.hidden];
        for &s in idx {
            let sample = set.samples[s];
            let text = &set.texts[sample.instance];
            let nz = &set.nonzero[sample.instance];
            let head = if heads_per_annotator { sample.annotator } else { 0 };
            let w2 = l.w2 + head * self.hidden;
            let mut z = self.params[l.b2 + head];
            for (k, hk) in h.iter_mut().enumerate() {
                let mut pre = self.params[l.b1 + k];
                if let Some(sp) = side_pre.get(sample.annotator).and_then(Option::as_ref) {
                    pre += sp[k];
                }
                let row = k * l.input;
                for &j in nz {
                    pre += self.params[row + j] * text[j];
                }
                *hk = pre.tanh();
                z += self.params[w2 + k] * *hk;
            }
            loss += softplus(z) - sample.label * z;
            let Some(g) = grad.as_deref_mut() else { continue };
            let dz = (sigmoid(z) - sample.label) / n;
            g[l.b2 + head] += dz;
            for k in 0..self.hidden {
                g[w2 + k] += dz * h[k];
                let dpre = dz * self.params[w2 + k] * (1.0 - h[k] * h[k]);
                g[l.b1 + k] += dpre;
                let row = k * l.input;
                for &j in nz {
                    g[row + j] += dpre * text[j];
                }
                if let Some(sg) = side_grad.get_mut(sample.annotator).and_then(Option::as_mut) {
                    sg[k] += dpre;
                }
            }
        }
        loss /= n;

        if let Some(g) = grad.as_deref_mut() {
            for (a, sg) in side_grad.iter().enumerate() {
                let Some(sg) = sg else { continue };
                let side = if self.technique.uses_composites() { set.side[a].as_slice() } else { &[] };
                let user = self.user(a).to_vec();
                for (k, &gk) in sg.iter().enumerate() {
                    let row = k * l.input + self.text_dim;
                    for (j, x) in side.iter().chain(&user).enumerate() {
                        g[row + j] += gk * x;
                    }
                    for u in 0..self.user_dim {
                        g[l.user + a * self.user_dim + u] += gk * self.params[row + side.len() + u];
                    }
                }
            }
        }

        if l2 > 0.0 {
            let mut ranges = vec![self.regularized()];
            ranges.extend(self.regularized_head());
            for r in ranges {
                let mut sq = 0.0;
                for p in r.clone() {
                    sq += self.params[p] * self.params[p];
                    if let Some(g) = grad.as_deref_mut() {
                        g[p] += l2 * self.params[p];
                    }
                }
                loss += 0.5 * l2 * sq;
            }
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_is_undecided() {
        for t in Technique::ALL {
            let net = Network::zeros(t, 4, 3, 5, 2);
            let side = if t.uses_composites() { vec![0.1; 8] } else { vec![] };
            assert_eq!(net.probability(&[0.5, 0.5, 0.5, 0.5], &side, 1).unwrap(), 0.5);
        }
    }

    #[test]
    fn init_does_not_depend_on_registry_size() {
        let a = Network::init(Technique::MultiTask, 8, 4, 4, &["x".into()], 3);
        let b = Network::init(Technique::MultiTask, 8, 4, 4, &["x".into(), "y".into()], 3);
        let l = a.layout();
        assert_eq!(a.params[..l.w2 + 4], b.params[..l.w2 + 4]);
    }

    #[test]
    fn unknown_annotator_rejected() {
        let net = Network::zeros(Technique::UserToken, 4, 2, 3, 2);
        assert!(matches!(net.logit(&[0.0; 4], &[], 2), Err(Error::UnknownAnnotator(_))));
        let text_only = Network::zeros(Technique::TextOnly, 4, 2, 3, 2);
        assert!(text_only.logit(&[0.0; 4], &[], 99).is_ok());
    }
}
