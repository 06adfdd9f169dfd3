use super::model::TrainedModel;
use super::train::embed_bundle;
use crate::corpus::{DatasetBundle, Split};
use crate::embed::{Embedder, EmbeddingVector};
use crate::error::Result;
use crate::metrics::{f1_scores, F1Report, Predictions};

/// Gold labels of one split, restricted to the split's instances.
pub fn split_gold(bundle: &DatasetBundle, split: Split) -> Result<crate::corpus::AnnotationMatrix> {
    bundle.matrix().restrict_instances(&bundle.split_ids(split))
}

/// Predict every gold (annotator, instance) pair of `split`. The model is
/// queried as `model_annotator(gold_annotator)`.
pub fn predict_split(
    model: &TrainedModel,
    bundle: &DatasetBundle,
    split: Split,
    embeddings: &[EmbeddingVector],
    model_annotator: &dyn Fn(&str) -> Result<String>,
) -> Result<Predictions> {
    let mut predictions = Predictions::new();
    let matrix = bundle.matrix();
    for (a, i, _) in matrix.entries() {
        if bundle.split_of(i) != split {
            continue;
        }
        let pos = matrix.instance_position(i).expect("entry instance is declared");
        let (_, label) = model.predict_embedding(&embeddings[pos], &model_annotator(a)?)?;
        predictions.insert((a.to_string(), i.to_string()), label);
    }
    Ok(predictions)
}

pub fn evaluate_with_embeddings(model: &TrainedModel, bundle: &DatasetBundle, split: Split, embeddings: &[EmbeddingVector]) -> Result<F1Report> {
    let predictions = predict_split(model, bundle, split, embeddings, &|a| Ok(a.to_string()))?;
    f1_scores(&predictions, &split_gold(bundle, split)?)
}

pub fn evaluate(model: &TrainedModel, bundle: &DatasetBundle, split: Split, embedder: &dyn Embedder) -> Result<F1Report> {
    model.check_embedder(embedder)?;
    evaluate_with_embeddings(model, bundle, split, &embed_bundle(bundle, embedder)?)
}
