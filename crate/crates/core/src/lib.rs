//! Perspectivist annotation pipeline: persona-conditioned LLM annotation,
//! agreement statistics, annotator modeling and persona/human alignment.

pub mod align;
pub mod annotate;
pub mod cache;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod http;
pub mod metrics;
pub mod modeling;
pub mod par;
pub mod persona;
pub mod pipeline;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
