//! Config-driven orchestration of the annotate, stats, train, align and
//! report stages. Artifacts land under `<out>/<stage>/` and are recorded
//! with their digests in `<out>/manifest.csv`.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub use config::{
    AlignSection, BackendKind, BackendSection, DatasetSection, EmbeddingKind, EmbeddingSection, MockSection, PersonaSection,
    PipelineConfig, TrainSection, BUNDLED_PREFIX,
};
pub use manifest::{Manifest, ManifestEntry, MANIFEST_FILE};

use crate::align::{alignment_matrix, cross_evaluate, identify_prototypes, swap_labels, write_swap_report};
use crate::annotate::{run_sweep, write_raw_jsonl, write_sweep_report, Backend, MockBackend, OpenAiBackend};
use crate::cache::ResponseCache;
use crate::corpus::{
    assign_splits, compute_stats, load_dataset, write_dataset, write_stats_csv, AnnotationMatrix, DatasetBundle, Format,
    Provenance, Split,
};
use crate::embed::{Embedder, EmbeddingVector, HashingEmbedder, RemoteEmbedder};
use crate::error::{Error, Result};
use crate::metrics::{estimate_pdf, soft_labels, Bandwidth, F1Report};
use crate::modeling::{embed_bundle, evaluate_with_embeddings, train_with_embeddings, TechniqueConfig, TrainedModel};
use crate::par;
use crate::persona::Mode;

pub const HUMAN: &str = "human";

/// Name of the persona bundle generated at temperature `t`.
pub fn llm_name(t: f64) -> String {
    format!("llm_t{t:.2}")
}

/// What a stage wrote, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub stage: &'static str,
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

pub struct Pipeline {
    config: PipelineConfig,
}

struct Writer<'a> {
    out: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, rel: impl Into<PathBuf>, bytes: &[u8]) -> Result<()> {
        let rel = rel.into();
        let full = self.out.join(&rel);
        if let Some(dir) = full.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&full, bytes).map_err(|e| Error::io(&full, e))?;
        self.files.push(rel);
        Ok(())
    }

    fn write_with(&mut self, rel: impl Into<PathBuf>, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }
}

impl Pipeline {
    /// Apply command-line overrides and validate.
    pub fn new(mut config: PipelineConfig, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(seed) = seed {
            config.seed = seed;
        }
        if let Some(out) = out {
            config.out_dir = std::env::current_dir().map(|d| d.join(&out)).unwrap_or(out);
        }
        config.validate()?;
        Ok(Self { config })
    }

    pub fn from_path(path: impl AsRef<Path>, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        Self::new(PipelineConfig::load(path)?, seed, out)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn out_dir(&self) -> PathBuf {
        self.config.out_dir()
    }

    fn finish(&self, stage: &'static str, writer: Writer<'_>, notes: Vec<String>) -> Result<StageSummary> {
        let out = self.out_dir();
        let mut manifest = Manifest::load(&out)?;
        manifest.replace_stage(&out, stage, &writer.files)?;
        manifest.save(&out)?;
        Ok(StageSummary { stage, files: writer.files, notes })
    }

    /// The human dataset, split with the configured ratios when it carries
    /// no split tags of its own.
    pub fn human_bundle(&self) -> Result<DatasetBundle> {
        let bundle = load_dataset(self.config.dataset_path(), self.config.dataset_format()?)?;
        if bundle.has_splits() {
            Ok(bundle)
        } else {
            assign_splits(&bundle, self.config.split_ratios()?, self.config.seed)
        }
    }

    fn provenance(&self) -> Result<Provenance> {
        Ok(match self.config.template()?.mode() {
            Mode::Strong => Provenance::LlmStrong,
            Mode::Weak => Provenance::LlmWeak,
        })
    }

    /// Persona bundle written by `annotate` at temperature `t`, with
    /// annotators in persona-set order.
    pub fn llm_bundle(&self, t: f64) -> Result<DatasetBundle> {
        let path = self.out_dir().join("annotate").join(format!("{}.jsonl", llm_name(t)));
        if !path.is_file() {
            return Err(Error::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, "run `annotate` first")));
        }
        let loaded = load_dataset(&path, Format::Jsonl)?;
        let ids: Vec<String> = self.config.persona_set()?.into_iter().map(|p| p.persona_id).collect();
        let mut matrix = AnnotationMatrix::new(ids, loaded.matrix().instance_ids().to_vec())?;
        for (a, i, label) in loaded.matrix().entries() {
            matrix.set(a, i, label)?;
        }
        loaded.with_matrix(matrix)?.with_provenance(self.provenance()?, Some(t))
    }

    pub fn backend(&self) -> Result<Box<dyn Backend>> {
        let b = &self.config.backend;
        Ok(match b.kind {
            BackendKind::Mock => Box::new(
                MockBackend::new()
                    .with_persona_spread(b.mock.persona_spread)
                    .with_gain(b.mock.gain)
                    .with_failure_rate(b.mock.failure_rate)
                    .with_persona_seeds(b.mock.persona_seeds.clone().into_iter().collect()),
            ),
            BackendKind::Openai => Box::new(OpenAiBackend::from_env(
                b.api_base.as_deref(),
                b.model.as_deref(),
                Duration::from_secs(b.timeout_secs),
            )?),
        })
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>> {
        let e = &self.config.embedding;
        Ok(match e.kind {
            EmbeddingKind::Hashing => Box::new(HashingEmbedder::new(e.dim, e.seed)?),
            EmbeddingKind::Remote => {
                let base = std::env::var(crate::annotate::ENV_API_BASE)
                    .ok()
                    .or_else(|| e.api_base.clone())
                    .ok_or_else(|| Error::config("embedding.api_base", "set embedding.api_base or the API base variable"))?;
                let model = e.model.clone().ok_or_else(|| Error::config("embedding.model", "required"))?;
                let key = std::env::var(crate::annotate::ENV_API_KEY).ok();
                let cache = ResponseCache::open(self.config.cache_dir())?;
                Box::new(
                    RemoteEmbedder::with_timeout(&base, key, &model, Some(cache), Duration::from_secs(e.timeout_secs))
                        .with_batch_size(e.batch_size),
                )
            }
        })
    }

    pub fn annotate(&self) -> Result<StageSummary> {
        self.annotate_with(self.backend()?.as_ref())
    }

    /// `annotate` against an explicit backend.
    pub fn annotate_with(&self, backend: &dyn Backend) -> Result<StageSummary> {
        let human = self.human_bundle()?;
        let personas = self.config.persona_set()?;
        let template = self.config.template()?;
        let cache = ResponseCache::open(self.config.cache_dir())?;
        let outcome = run_sweep(&human, &personas, &template, &self.config.generation(), backend, Some(&cache))?;
        let total = outcome.raw.len();
        let failed: Vec<&str> = outcome.raw.iter().filter_map(|r| r.error.as_deref()).collect();
        if total > 0 && failed.len() == total {
            return Err(Error::Backend(format!("all {total} requests failed; first error: {}", failed[0])));
        }
        let out = self.out_dir();
        let mut w = Writer { out: &out, files: Vec::new() };
        for bundle in &outcome.bundles {
            let t = bundle.temperature().expect("sweep bundles carry a temperature");
            w.write_with(format!("annotate/{}.jsonl", llm_name(t)), |buf| write_dataset(bundle, buf, Format::Jsonl))?;
        }
        w.write_with("annotate/sweep_report.csv", |buf| write_sweep_report(&outcome.reports, buf))?;
        w.write_with("annotate/raw_annotations.jsonl", |buf| write_raw_jsonl(&outcome.raw, buf))?;
        let notes = outcome
            .reports
            .iter()
            .map(|r| {
                format!(
                    "T={}: {} requests, {} cache hits, {} parse failures, {} backend errors, alpha {}",
                    r.temperature,
                    r.requests,
                    r.cache_hits,
                    r.parse_failures,
                    r.backend_errors,
                    r.alpha.map_or("undefined".to_string(), |a| format!("{a:.4}"))
                )
            })
            .collect();
        self.finish("annotate", w, notes)
    }

    pub fn stats(&self) -> Result<StageSummary> {
        let mut bundles = vec![(HUMAN.to_string(), self.human_bundle()?)];
        let mut notes = Vec::new();
        for &t in &self.config.generation.temperatures {
            match self.llm_bundle(t) {
                Ok(b) => bundles.push((llm_name(t), b)),
                Err(Error::Io { .. }) => notes.push(format!("no persona bundle at T={t}; run `annotate` first")),
                Err(e) => return Err(e),
            }
        }
        let out = self.out_dir();
        let mut w = Writer { out: &out, files: Vec::new() };
        let rows: Vec<(String, Option<crate::corpus::DatasetStats>)> =
            bundles.iter().map(|(name, b)| (name.clone(), compute_stats(b).ok())).collect();
        w.write_with("stats/stats.csv", |buf| write_stats_csv(&rows, buf))?;

        let mut alpha_rows = String::from("temperature,alpha\n");
        for ((_, b), (_, s)) in bundles.iter().zip(&rows).skip(1) {
            let alpha = s.as_ref().map(|s| format!("{:.6}", s.alpha)).unwrap_or_default();
            alpha_rows.push_str(&format!("{},{alpha}\n", b.temperature().unwrap_or_default()));
        }
        w.write("stats/alpha_by_temperature.csv", alpha_rows.as_bytes())?;
        let alphas: Vec<f64> = rows.iter().skip(1).filter_map(|(_, s)| s.as_ref().map(|s| s.alpha)).collect();
        if let (Some(lo), Some(hi)) = (alphas.iter().copied().reduce(f64::min), alphas.iter().copied().reduce(f64::max)) {
            notes.push(format!("persona alpha range across temperatures: {lo:.4} to {hi:.4}"));
        }

        for (name, b) in &bundles {
            let series = soft_labels(b.matrix());
            w.write_with(format!("stats/soft_labels_{name}.csv"), |buf| series.write_csv(buf))?;
            match estimate_pdf(&series, Bandwidth::Auto) {
                Ok(curve) => w.write_with(format!("stats/pdf_{name}.csv"), |buf| curve.write_csv(buf))?,
                Err(e) => notes.push(format!("no density curve for {name}: {e}")),
            }
        }
        self.finish("stats", w, notes)
    }

    fn train_grid(
        &self,
        jobs: &[(String, &DatasetBundle, TechniqueConfig)],
        embeddings: &[EmbeddingVector],
        descriptor: &crate::embed::EmbedderDescriptor,
    ) -> Result<Vec<(TrainedModel, F1Report, F1Report)>> {
        par::map(jobs, |(_, bundle, cfg)| {
            let model = train_with_embeddings(bundle, cfg, descriptor.clone(), embeddings)?;
            let dev = evaluate_with_embeddings(&model, bundle, Split::Dev, embeddings)?;
            let test = evaluate_with_embeddings(&model, bundle, Split::Test, embeddings)?;
            Ok((model, dev, test))
        })
        .into_iter()
        .collect()
    }

    /// Grid entry labels: the technique name, suffixed when repeated.
    fn grid_labels(grid: &[TechniqueConfig]) -> Vec<String> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        grid.iter()
            .map(|t| {
                let k = seen.entry(t.technique.as_str()).or_default();
                *k += 1;
                if *k == 1 {
                    t.technique.to_string()
                } else {
                    format!("{}_{}", t.technique, k)
                }
            })
            .collect()
    }

    pub fn train(&self) -> Result<StageSummary> {
        let human = self.human_bundle()?;
        let mut bundles = vec![(HUMAN.to_string(), human)];
        for &t in &self.config.train.selection_temperatures {
            bundles.push((llm_name(t), self.llm_bundle(t)?));
        }
        let embedder = self.embedder()?;
        let descriptor = embedder.descriptor();
        let embeddings = embed_bundle(&bundles[0].1, embedder.as_ref())?;
        let grid = self.config.technique_grid();
        let labels = Self::grid_labels(&grid);
        let jobs: Vec<(String, &DatasetBundle, TechniqueConfig)> = bundles
            .iter()
            .flat_map(|(name, b)| grid.iter().map(move |cfg| (name.clone(), b, cfg.clone())))
            .collect();
        let results = self.train_grid(&jobs, &embeddings, &descriptor)?;

        let out = self.out_dir();
        let mut w = Writer { out: &out, files: Vec::new() };
        let mut summary = String::from("bundle,technique,split,micro_f1,macro_f1\n");
        let mut dev_macro: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
        for (k, ((bundle, _, _), (model, dev, test))) in jobs.iter().zip(&results).enumerate() {
            let label = &labels[k % grid.len()];
            w.write(format!("train/models/{bundle}/{label}.json"), (model.to_json()? + "\n").as_bytes())?;
            for (split, report) in [("dev", dev), ("test", test)] {
                w.write_with(format!("train/f1/{bundle}/{label}_{split}.csv"), |buf| report.write_csv(buf))?;
                summary.push_str(&format!(
                    "{bundle},{label},{split},{:.6},{:.6}\n",
                    report.micro_f1_positive, report.macro_f1
                ));
            }
            dev_macro.insert((label.clone(), bundle.clone()), (dev.macro_f1, test.macro_f1));
        }
        w.write("train/summary.csv", summary.as_bytes())?;

        let mut best = String::from("technique,temperature,dev_macro_f1,test_macro_f1\n");
        let mut notes = Vec::new();
        for label in &labels {
            let mut pick: Option<(f64, f64, f64)> = None;
            for &t in &self.config.train.selection_temperatures {
                let (d, s) = dev_macro[&(label.clone(), llm_name(t))];
                if pick.is_none_or(|(_, bd, _)| d > bd) {
                    pick = Some((t, d, s));
                }
            }
            if let Some((t, d, s)) = pick {
                best.push_str(&format!("{label},{t},{d:.6},{s:.6}\n"));
                notes.push(format!("{label}: best persona temperature {t} (dev macro-F1 {d:.4}, test {s:.4})"));
            }
        }
        w.write("train/best_temperature.csv", best.as_bytes())?;
        self.finish("train", w, notes)
    }

    pub fn align(&self) -> Result<StageSummary> {
        let human = self.human_bundle()?;
        let t = self.config.align_temperature();
        let llm = self.llm_bundle(t)?;
        let matrix = alignment_matrix(&human, &llm, &self.config.alignment_params())?;
        let mapping = identify_prototypes(&matrix, self.config.align.threshold);
        let out = self.out_dir();
        let mut w = Writer { out: &out, files: Vec::new() };
        let mut notes = vec![format!(
            "persona bundle T={t}: {} of {} humans mapped, prototypical personas: [{}]",
            mapping.mapping.len(),
            matrix.human_ids.len(),
            mapping.prototypical.join(", ")
        )];
        for s in &matrix.skipped {
            notes.push(format!(
                "skipped {}/{} at n={}: only {} shared instances",
                s.human_id, s.persona_id, s.sample_size, s.shared_instances
            ));
        }
        w.write_with("align/alignment.csv", |buf| matrix.write_csv(buf))?;
        w.write("align/mapping.json", (mapping.to_json()? + "\n").as_bytes())?;
        let groups = serde_json::json!({ "prototypical": mapping.prototypical, "unmatched": mapping.unmatched });
        w.write("align/prototypes.json", (serde_json::to_string_pretty(&groups)? + "\n").as_bytes())?;
        let (swapped, swap_rows) = swap_labels(&human, &llm, &mapping)?;
        w.write_with("align/swap_report.csv", |buf| write_swap_report(&swap_rows, buf))?;
        w.write_with("align/swapped.jsonl", |buf| write_dataset(&swapped, buf, Format::Jsonl))?;

        let embedder = self.embedder()?;
        let descriptor = embedder.descriptor();
        let embeddings = embed_bundle(&human, embedder.as_ref())?;
        let grid = self.config.technique_grid();
        let labels = Self::grid_labels(&grid);
        let mut train_sets: Vec<(&str, &DatasetBundle)> = vec![(HUMAN, &human), ("persona", &llm)];
        if !mapping.is_empty() {
            train_sets.push(("swapped", &swapped));
        }
        let jobs: Vec<(&str, &DatasetBundle, &TechniqueConfig)> =
            train_sets.iter().flat_map(|&(n, b)| grid.iter().map(move |c| (n, b, c))).collect();
        let models = par::map(&jobs, |(_, b, cfg)| train_with_embeddings(b, cfg, descriptor.clone(), &embeddings));
        let mut rows = String::from("technique,train_bundle,micro_f1,macro_f1\n");
        for (k, ((name, _, _), model)) in jobs.iter().zip(models).enumerate() {
            let model = model?;
            let correspondence = if *name == "persona" { self.config.align.correspondence.as_ref() } else { None };
            let report = if *name == "persona" {
                cross_evaluate(&model, &human, Split::Test, &embeddings, correspondence)
            } else {
                evaluate_with_embeddings(&model, &human, Split::Test, &embeddings)
            };
            let label = &labels[k % grid.len()];
            match report {
                Ok(r) => rows.push_str(&format!("{label},{name},{:.6},{:.6}\n", r.micro_f1_positive, r.macro_f1)),
                Err(Error::Correspondence(id)) => {
                    notes.push(format!("{label}/{name}: no persona corresponds to human {id}; set align.correspondence"))
                }
                Err(e) => return Err(e),
            }
        }
        w.write("align/cross_eval.csv", rows.as_bytes())?;
        self.finish("align", w, notes)
    }

    /// Verify every recorded digest, then gather all CSV artifacts into
    /// `<out>/report/`, named `<stage>__<file>`.
    pub fn report(&self) -> Result<StageSummary> {
        let out = self.out_dir();
        let manifest = Manifest::load(&out)?;
        let bad = manifest.mismatches(&out);
        if !bad.is_empty() {
            return Err(Error::DigestMismatch(bad.join(", ")));
        }
        let mut w = Writer { out: &out, files: Vec::new() };
        let mut index = String::from("file,source,sha256\n");
        for e in manifest.entries().filter(|e| e.stage != "report" && e.path.ends_with(".csv")) {
            let name = e.path.replace('/', "__");
            let bytes = std::fs::read(out.join(&e.path)).map_err(|err| Error::io(out.join(&e.path), err))?;
            w.write(Path::new("report").join(&name), &bytes)?;
            index.push_str(&format!("{name},{},{}\n", e.path, e.sha256));
        }
        w.write("report/index.csv", index.as_bytes())?;
        let notes = vec![format!("{} artifacts verified, {} gathered", manifest.entries().count(), w.files.len() - 1)];
        self.finish("report", w, notes)
    }
}
