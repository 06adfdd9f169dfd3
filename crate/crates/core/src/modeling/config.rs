use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    TextOnly,
    UserToken,
    Composite,
    CompositeUserToken,
    MultiTask,
}

impl Technique {
    pub const ALL: [Technique; 5] =
        [Technique::TextOnly, Technique::UserToken, Technique::Composite, Technique::CompositeUserToken, Technique::MultiTask];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::TextOnly => "text_only",
            Technique::UserToken => "user_token",
            Technique::Composite => "composite",
            Technique::CompositeUserToken => "composite_user_token",
            Technique::MultiTask => "multi_task",
        }
    }

    pub fn parse(s: &str) -> Option<Technique> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn uses_user_embedding(self) -> bool {
        matches!(self, Technique::UserToken | Technique::CompositeUserToken)
    }

    pub fn uses_composites(self) -> bool {
        matches!(self, Technique::Composite | Technique::CompositeUserToken)
    }

    /// Whether predictions depend on the annotator at all.
    pub fn is_annotator_aware(self) -> bool {
        self != Technique::TextOnly
    }

    /// Width of the feature vector fed to the hidden layer.
    pub fn input_dim(self, text_dim: usize, user_dim: usize) -> usize {
        let mut dim = text_dim;
        if self.uses_composites() {
            dim += 2 * text_dim;
        }
        if self.uses_user_embedding() {
            dim += user_dim;
        }
        dim
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueConfig {
    pub technique: Technique,
    #[serde(default = "defaults::hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "defaults::user_embedding_dim")]
    pub user_embedding_dim: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::l2")]
    pub l2: f64,
}

mod defaults {
    pub fn hidden_dim() -> usize {
        64
    }
    pub fn user_embedding_dim() -> usize {
        32
    }
    pub fn learning_rate() -> f64 {
        1e-2
    }
    pub fn epochs() -> usize {
        30
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn l2() -> f64 {
        1e-4
    }
}

impl TechniqueConfig {
    pub fn new(technique: Technique) -> Self {
        Self {
            technique,
            hidden_dim: defaults::hidden_dim(),
            user_embedding_dim: defaults::user_embedding_dim(),
            learning_rate: defaults::learning_rate(),
            epochs: defaults::epochs(),
            batch_size: defaults::batch_size(),
            seed: 0,
            l2: defaults::l2(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("technique.{field}"), msg));
        if self.hidden_dim == 0 {
            return bad("hidden_dim", "must be positive");
        }
        if self.technique.uses_user_embedding() && self.user_embedding_dim == 0 {
            return bad("user_embedding_dim", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive and finite");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2", "must be non-negative and finite");
        }
        Ok(())
    }
}
