use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{request_annotation, AnnotationRequest, Backend, RetryPolicy};
use super::parse::parse_label;
use crate::cache::ResponseCache;
use crate::corpus::{AnnotationMatrix, DatasetBundle, Label, Provenance};
use crate::error::{Error, Result};
use crate::metrics::krippendorff_alpha;
use crate::par;
use crate::persona::{render_prompt, Mode, PersonaSpec, PromptTemplate};

pub const DEFAULT_TEMPERATURES: [f64; 5] = [0.0, 0.1, 0.2, 0.5, 0.8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub temperatures: Vec<f64>,
    /// Extra attempts after a parse failure; also bounds transport retries.
    pub max_retries: usize,
    pub max_tokens: usize,
    pub seed: u64,
    /// Upper bound on concurrent backend requests.
    pub max_in_flight: usize,
    /// Base delay before the first transport retry, doubled each time.
    pub backoff_ms: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperatures: DEFAULT_TEMPERATURES.to_vec(),
            max_retries: 3,
            max_tokens: 8,
            seed: 0,
            max_in_flight: 8,
            backoff_ms: 200,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperatures.is_empty() {
            return Err(Error::config("generation.temperatures", "must not be empty"));
        }
        if self.temperatures.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::config("generation.temperatures", "values must lie in [0, 1]"));
        }
        if self.temperatures.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("generation.temperatures", "must be strictly ascending"));
        }
        if self.max_tokens == 0 {
            return Err(Error::config("generation.max_tokens", "must be positive"));
        }
        if self.max_in_flight == 0 {
            return Err(Error::config("generation.max_in_flight", "must be positive"));
        }
        Ok(())
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::new(self.max_retries, Duration::from_millis(self.backoff_ms))
    }
}

/// One (persona, instance, temperature) outcome. `parsed` is `None` for a
/// parse failure or backend error; `raw_text` is the last response seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAnnotation {
    pub persona_id: String,
    pub instance_id: String,
    pub temperature: f64,
    pub raw_text: String,
    pub parsed: Option<Label>,
    pub attempt: usize,
    pub cache_hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub temperature: f64,
    pub requests: usize,
    pub cache_hits: usize,
    pub parse_failures: usize,
    pub backend_errors: usize,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub bundles: Vec<DatasetBundle>,
    pub reports: Vec<SweepReport>,
    pub raw: Vec<RawAnnotation>,
}

struct ItemResult {
    raw: RawAnnotation,
    requests: usize,
    cache_hits: usize,
}

/// Annotate every instance with every persona at every configured
/// temperature. Unparseable responses are retried with a bumped seed and
/// recorded as missing entries when retries run out. Transport and backend
/// failures of single items are counted, not propagated.
pub fn run_sweep(
    bundle: &DatasetBundle,
    personas: &[PersonaSpec],
    template: &PromptTemplate,
    config: &GenerationConfig,
    backend: &dyn Backend,
    cache: Option<&ResponseCache>,
) -> Result<SweepOutcome> {
    config.validate()?;
    if personas.is_empty() {
        return Err(Error::config("personas", "persona set is empty"));
    }
    if let Some(p) = personas.iter().find(|p| p.mode != template.mode()) {
        return Err(Error::ModeMismatch { persona: p.mode.to_string(), template: template.mode().to_string() });
    }
    let provenance = match template.mode() {
        Mode::Strong => Provenance::LlmStrong,
        Mode::Weak => Provenance::LlmWeak,
    };
    let instances = bundle.instances();
    let mut items = Vec::with_capacity(config.temperatures.len() * instances.len() * personas.len());
    for (t, &temperature) in config.temperatures.iter().enumerate() {
        for inst in instances {
            for persona in personas {
                items.push((t, temperature, inst, persona));
            }
        }
    }
    let policy = config.retry_policy();
    let results = par::map_bounded(&items, config.max_in_flight, |&(_, temperature, inst, persona)| -> Result<ItemResult> {
        let prompt = render_prompt(template, persona, inst)?;
        let mut out = ItemResult {
            raw: RawAnnotation {
                persona_id: persona.persona_id.clone(),
                instance_id: inst.instance_id.clone(),
                temperature,
                raw_text: String::new(),
                parsed: None,
                attempt: 0,
                cache_hit: false,
                error: None,
            },
            requests: 0,
            cache_hits: 0,
        };
        for attempt in 0..=config.max_retries {
            let req = AnnotationRequest {
                persona_id: &persona.persona_id,
                instance_id: &inst.instance_id,
                instance_text: &inst.text,
                prompt: &prompt,
                temperature,
                seed: config.seed.wrapping_add(attempt as u64),
                max_tokens: config.max_tokens,
            };
            out.raw.attempt = attempt + 1;
            out.requests += 1;
            match request_annotation(backend, cache, &req, policy) {
                Ok(completion) => {
                    out.cache_hits += usize::from(completion.cache_hit);
                    out.raw.cache_hit = completion.cache_hit;
                    out.raw.parsed = parse_label(&completion.text, template.response_marker()).ok();
                    out.raw.raw_text = completion.text;
                    if out.raw.parsed.is_some() {
                        break;
                    }
                }
                Err(e @ (Error::Transport(_) | Error::Backend(_))) => {
                    out.raw.error = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    });

    let annotator_ids: Vec<String> = personas.iter().map(|p| p.persona_id.clone()).collect();
    let instance_ids: Vec<String> = instances.iter().map(|i| i.instance_id.clone()).collect();
    let mut matrices = Vec::with_capacity(config.temperatures.len());
    let mut reports: Vec<SweepReport> = config
        .temperatures
        .iter()
        .map(|&temperature| SweepReport { temperature, requests: 0, cache_hits: 0, parse_failures: 0, backend_errors: 0, alpha: None })
        .collect();
    for _ in &config.temperatures {
        matrices.push(AnnotationMatrix::new(annotator_ids.clone(), instance_ids.clone())?);
    }
    let mut raw = Vec::with_capacity(items.len());
    for (&(t, ..), result) in items.iter().zip(results) {
        let item = result?;
        let report = &mut reports[t];
        report.requests += item.requests;
        report.cache_hits += item.cache_hits;
        match (item.raw.parsed, &item.raw.error) {
            (Some(label), _) => matrices[t].set(&item.raw.persona_id, &item.raw.instance_id, label)?,
            (None, Some(_)) => report.backend_errors += 1,
            (None, None) => report.parse_failures += 1,
        }
        raw.push(item.raw);
    }
    let mut bundles = Vec::with_capacity(matrices.len());
    for ((matrix, report), &temperature) in matrices.into_iter().zip(&mut reports).zip(&config.temperatures) {
        report.alpha = krippendorff_alpha(&matrix).ok();
        bundles.push(
            DatasetBundle::new(bundle.instances().to_vec(), matrix, provenance, Some(temperature), bundle.splits().clone())?,
        );
    }
    Ok(SweepOutcome { bundles, reports, raw })
}

/// CSV `temperature,requests,cache_hits,parse_failures,alpha`; alpha is
/// left empty when undefined.
pub fn write_sweep_report<W: Write>(reports: &[SweepReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["temperature", "requests", "cache_hits", "parse_failures", "alpha"])?;
    for r in reports {
        w.write_record([
            r.temperature.to_string(),
            r.requests.to_string(),
            r.cache_hits.to_string(),
            r.parse_failures.to_string(),
            r.alpha.map(|a| format!("{a:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep report>", e))?;
    Ok(())
}

/// One JSON object per raw annotation, in sweep order.
pub fn write_raw_jsonl<W: Write>(raw: &[RawAnnotation], mut writer: W) -> Result<()> {
    for r in raw {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<raw annotations>", e))?;
    }
    Ok(())
}
