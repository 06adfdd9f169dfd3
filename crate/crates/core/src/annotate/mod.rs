//! LLM-driven annotation: completion backends (remote or mock), response
//! parsing, and temperature sweeps that assemble LLM dataset bundles.

mod backend;
mod parse;
mod sweep;

pub use backend::{
    extract_content, request_annotation, AnnotationRequest, Backend, Completion, MockBackend, OpenAiBackend,
    RetryPolicy, ENV_API_BASE, ENV_API_KEY, ENV_MODEL,
};
pub use parse::{parse_label, ParseFailure};
pub use sweep::{run_sweep, write_raw_jsonl, write_sweep_report, GenerationConfig, RawAnnotation, SweepOutcome, SweepReport};
