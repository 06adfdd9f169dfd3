use std::path::Path;

use serde::{Deserialize, Serialize};

use super::composite::CompositeStore;
use super::config::{Technique, TechniqueConfig};
use super::network::Network;
use crate::corpus::Label;
use crate::embed::{EmbedderDescriptor, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained annotator model. Immutable once built; share freely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    format_version: u32,
    config: TechniqueConfig,
    annotators: Vec<String>,
    embedder: EmbedderDescriptor,
    network: Network,
    composites: Option<CompositeStore>,
    training_log: Vec<f64>,
}

impl TrainedModel {
    pub(crate) fn new(
        config: TechniqueConfig,
        annotators: Vec<String>,
        embedder: EmbedderDescriptor,
        network: Network,
        composites: Option<CompositeStore>,
        training_log: Vec<f64>,
    ) -> Self {
        Self { format_version: CHECKPOINT_VERSION, config, annotators, embedder, network, composites, training_log }
    }

    pub fn config(&self) -> &TechniqueConfig {
        &self.config
    }

    pub fn technique(&self) -> Technique {
        self.config.technique
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn embedder(&self) -> &EmbedderDescriptor {
        &self.embedder
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn composites(&self) -> Option<&CompositeStore> {
        self.composites.as_ref()
    }

    /// Full training loss after each epoch.
    pub fn training_log(&self) -> &[f64] {
        &self.training_log
    }

    fn annotator_index(&self, annotator_id: &str) -> Result<usize> {
        if !self.technique().is_annotator_aware() {
            return Ok(0);
        }
        self.annotators
            .iter()
            .position(|a| a == annotator_id)
            .ok_or_else(|| Error::UnknownAnnotator(annotator_id.to_string()))
    }

    /// Feature vector fed to the hidden layer for one text and annotator.
    pub fn features(&self, text: &EmbeddingVector, annotator_id: &str) -> Result<Vec<f64>> {
        let a = self.annotator_index(annotator_id)?;
        let mut x = text.values().to_vec();
        x.extend(self.side(annotator_id)?);
        if self.technique().uses_user_embedding() {
            let l = self.network.params();
            let user_dim = self.config.user_embedding_dim;
            let at = l.len() - (self.annotators.len() - a) * user_dim;
            x.extend_from_slice(&l[at..at + user_dim]);
        }
        Ok(x)
    }

    fn side(&self, annotator_id: &str) -> Result<Vec<f64>> {
        match &self.composites {
            Some(store) if self.technique().uses_composites() => {
                let mut side = store.positive(annotator_id)?.values().to_vec();
                side.extend_from_slice(store.negative(annotator_id)?.values());
                Ok(side)
            }
            _ => Ok(Vec::new()),
        }
    }

    /// Probability and label (1 iff probability ≥ 0.5) from a precomputed
    /// text embedding.
    pub fn predict_embedding(&self, text: &EmbeddingVector, annotator_id: &str) -> Result<(f64, Label)> {
        let a = self.annotator_index(annotator_id)?;
        let side = self.side(annotator_id)?;
        let p = self.network.probability(text.values(), &side, a)?;
        Ok((p, u8::from(p >= 0.5)))
    }

    pub fn predict(&self, embedder: &dyn Embedder, text: &str, annotator_id: &str) -> Result<(f64, Label)> {
        self.check_embedder(embedder)?;
        self.predict_embedding(&embedder.embed(text)?, annotator_id)
    }

    pub fn check_embedder(&self, embedder: &dyn Embedder) -> Result<()> {
        if embedder.descriptor() != self.embedder {
            return Err(Error::InvalidArgument(format!(
                "model was trained with embedder {:?}, got {:?}",
                self.embedder,
                embedder.descriptor()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(src)?;
        if model.format_version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
