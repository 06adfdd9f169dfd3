use rand::seq::SliceRandom;

use super::composite::compute_composites;
use super::config::TechniqueConfig;
use super::model::TrainedModel;
use super::network::{Network, Sample, TrainingSet};
use crate::corpus::{DatasetBundle, Split};
use crate::embed::{EmbedderDescriptor, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::seed;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Embed every instance text of `bundle`, in bundle order.
pub fn embed_bundle(bundle: &DatasetBundle, embedder: &dyn Embedder) -> Result<Vec<EmbeddingVector>> {
    let texts: Vec<&str> = bundle.instances().iter().map(|i| i.text.as_str()).collect();
    embedder.embed_batch(&texts)
}

pub fn train(bundle: &DatasetBundle, config: &TechniqueConfig, embedder: &dyn Embedder) -> Result<TrainedModel> {
    let embeddings = embed_bundle(bundle, embedder)?;
    train_with_embeddings(bundle, config, embedder.descriptor(), &embeddings)
}

/// Training set over the train split of `bundle`: one sample per observed
/// (annotator, instance) label, annotator-major.
pub fn training_set(bundle: &DatasetBundle, config: &TechniqueConfig, embeddings: &[EmbeddingVector]) -> Result<TrainingSet> {
    let matrix = bundle.matrix();
    if embeddings.len() != matrix.num_instances() {
        return Err(Error::InvalidArgument(format!(
            "{} embeddings for {} instances",
            embeddings.len(),
            matrix.num_instances()
        )));
    }
    let mut samples = Vec::new();
    for a in 0..matrix.num_annotators() {
        for (i, id) in matrix.instance_ids().iter().enumerate() {
            if bundle.split_of(id) != Split::Train {
                continue;
            }
            if let Some(label) = matrix.at(a, i) {
                samples.push(Sample { instance: i, annotator: a, label: f64::from(label) });
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::NoTrainData("train split has no annotations".into()));
    }
    let side = if config.technique.uses_composites() {
        let store = compute_composites(bundle, embeddings)?;
        matrix
            .annotator_ids()
            .iter()
            .map(|id| {
                let mut s = store.positive(id)?.values().to_vec();
                s.extend_from_slice(store.negative(id)?.values());
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(TrainingSet::new(embeddings, side, samples))
}

/// Minibatch Adam on mean binary cross-entropy with L2 on the shared
/// weights. Single-threaded and fully determined by `config.seed`.
pub fn train_with_embeddings(
    bundle: &DatasetBundle,
    config: &TechniqueConfig,
    descriptor: EmbedderDescriptor,
    embeddings: &[EmbeddingVector],
) -> Result<TrainedModel> {
    config.validate()?;
    let set = training_set(bundle, config, embeddings)?;
    let text_dim = embeddings[0].dim();
    if let Some(e) = embeddings.iter().find(|e| e.dim() != text_dim) {
        return Err(Error::DimensionMismatch { expected: text_dim, actual: e.dim() });
    }
    let annotators = bundle.matrix().annotator_ids().to_vec();
    let mut net = Network::init(config.technique, text_dim, config.user_embedding_dim, config.hidden_dim, &annotators, config.seed);
    let mut m = vec![0.0; net.params().len()];
    let mut v = vec![0.0; net.params().len()];
    let mut grad = vec![0.0; net.params().len()];
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut rng = seed::rng(seed::substream(config.seed, &["shuffle"]));
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0i32;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            net.evaluate(&set, batch, config.l2, Some(&mut grad))?;
            step += 1;
            let c1 = 1.0 - BETA1.powi(step);
            let c2 = 1.0 - BETA2.powi(step);
            for (((p, g), m), v) in net.params_mut().iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + EPS);
            }
        }
        let loss = net.loss(&set, config.l2)?;
        if !loss.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch, loss });
        }
        log.push(loss);
    }
    let composites = if config.technique.uses_composites() { Some(compute_composites(bundle, embeddings)?) } else { None };
    Ok(TrainedModel::new(config.clone(), annotators, descriptor, net, composites, log))
}
