//! The file-based workflow behind the CLI subcommands.
//!
//! Stages communicate through artifacts in `out_dir`:
//!
//! | stage                | reads                              | writes |
//! |----------------------|------------------------------------|--------|
//! | `build-kg`           | triples, labels, anchored entities | `kg.jsonl`, `coverage.json`, `coverage.txt`, `exclusions.jsonl` |
//! | `make-qa`            | `kg.jsonl`, labels, templates      | `split.json`, `qa_{train,eval,test}.jsonl`, `qa_exclusions.jsonl`, `context_availability.json` |
//! | `index`              | passages                           | `index/<lang>.json` |
//! | `run`                | `qa_test.jsonl` (+ indexes)        | `predictions.jsonl` |
//! | `eval`               | `predictions.jsonl`                | `report.json`, `tables.txt`, `fig_*.csv`, `kg_gaps.json` |
//! | `export-contrastive` | `qa_train.jsonl`, passages         | `contrastive.jsonl`, `contrastive_skips.jsonl` |
//!
//! Every artifact records the config hash. Identical configs and inputs
//! give byte-identical artifacts (remote generators aside).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::evaluation::{
    context_language_csv, context_language_table, evaluate, hits_table, kg_gap_report, relation_csv,
    relation_table, spelling_overlap, spelling_overlap_csv, EntityRole, EvalItem, GapGroup, RunProvenance,
};
use crate::generation::{
    generate_with_retries, generator_registry, CandidateList, GenerationError, GenerationRequest,
    GeneratorResources,
};
use crate::ingestion::{
    coverage_stats, extract_kg, load_descriptions, load_entity_set, load_genders, load_labels,
    load_relation_set, load_triples, split_dataset, DumpFormat, IngestError,
};
use crate::io::{
    append_jsonl, read_json, read_jsonl, write_json, write_stamped_jsonl, write_stamped_text, write_text,
    ArtifactError, Stamped,
};
use crate::model::{EntityId, KnowledgeGraph, LanguageCode, MultilingualLexicon, Triple};
use crate::reformulation::{
    build_split_mix, context_availability, format_registry, load_templates, ContextAvailability, Exclusion,
    FormatResources, MixOutput, QAInstance, QaRecord, ReformulationError, StructuredContextMode,
};
use crate::registry::RegistryError;
use crate::retrieval::{
    build_contrastive_dataset, build_index, heuristic_retrieve, load_passages, retriever_registry,
    ContrastiveRecord, ContrastiveSkip, CorpusIndex, PassageStore, RetrievalError, RetrievalQuery,
    RetrieverResources,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Reformulation(#[from] ReformulationError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("generator is not healthy: {0}")]
    Health(GenerationError),
    #[error("{path}:{line}: written under config {found}, current config is {expected} (use --force to score anyway)")]
    HashMismatch {
        path: PathBuf,
        line: usize,
        found: String,
        expected: String,
    },
    #[error("{path} not found; run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },
}

impl PipelineError {
    /// Errors caused by the configuration itself rather than by the data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Registry(_))
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Artifact locations under `out_dir`.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
    pub fn kg(&self) -> PathBuf {
        self.path("kg.jsonl")
    }
    pub fn qa(&self, split: &str) -> PathBuf {
        self.path(&format!("qa_{split}.jsonl"))
    }
    pub fn index(&self, lang: &LanguageCode) -> PathBuf {
        self.dir.join("index").join(format!("{lang}.json"))
    }
    pub fn predictions(&self) -> PathBuf {
        self.path("predictions.jsonl")
    }
    fn predictions_partial(&self) -> PathBuf {
        self.path("predictions.partial.jsonl")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgExclusion {
    pub head_id: EntityId,
    pub relation_id: crate::model::RelationId,
    pub tail_id: EntityId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaExclusion {
    pub split: String,
    #[serde(flatten)]
    pub exclusion: Exclusion,
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    /// The test instance, with the context retrieved for it if any.
    pub instance: QaRecord,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateList>,
    /// Set when the item could not be generated; it then scores as a miss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveSkipRecord {
    pub kind: String,
    #[serde(flatten)]
    pub skip: ContrastiveSkip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub language: LanguageCode,
    pub doc_count: usize,
    pub avg_doc_length: f64,
    pub vocabulary: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildKgSummary {
    pub triples: usize,
    pub heads: usize,
    pub tails: usize,
    pub excluded: usize,
    pub input_diagnostics: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MakeQaSummary {
    pub split_sizes: (usize, usize, usize),
    pub instances: (usize, usize, usize),
    pub exclusions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub total: usize,
    pub reused: usize,
    pub failed: Vec<(usize, String)>,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveSummary {
    pub examples: usize,
    pub skipped: usize,
    pub missing_slots: usize,
    pub violations: usize,
}

/// A validated configuration bound to its artifact directory.
pub struct Pipeline {
    pub config: RunConfig,
    pub config_hash: String,
    pub artifacts: Artifacts,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let config_hash = config.config_hash()?;
        let artifacts = Artifacts { dir: config.out_dir.clone() };
        Ok(Self { config, config_hash, artifacts })
    }

    fn required_artifact(&self, path: PathBuf, stage: &'static str) -> Result<PathBuf> {
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::MissingArtifact { path, stage })
        }
    }

    fn load_lexicon(&self, command: &str) -> Result<MultilingualLexicon> {
        let cfg = &self.config;
        let path = cfg.require("labels", &cfg.labels, command)?;
        let loaded = load_labels(path, &cfg.language_registry(), cfg.id_scheme)?;
        warn_diagnostics(path, &loaded.diagnostics);
        let mut lexicon = loaded.items;
        if let Some(g) = &cfg.genders {
            warn_diagnostics(g, &load_genders(g, &mut lexicon, cfg.id_scheme)?);
        }
        Ok(lexicon)
    }

    fn load_kg(&self) -> Result<KnowledgeGraph> {
        let path = self.required_artifact(self.artifacts.kg(), "build-kg")?;
        let rows: Vec<Stamped<Triple>> = read_jsonl(&path)?;
        self.warn_foreign(&path, rows.iter().map(|r| &r.config_hash));
        Ok(KnowledgeGraph::from_triples(
            self.config.target_language.clone(),
            rows.into_iter().map(|r| r.record),
        ))
    }

    fn load_qa(&self, split: &str) -> Result<Vec<QAInstance>> {
        let path = self.required_artifact(self.artifacts.qa(split), "make-qa")?;
        let rows: Vec<Stamped<QaRecord>> = read_jsonl(&path)?;
        self.warn_foreign(&path, rows.iter().map(|r| &r.config_hash));
        Ok(rows.into_iter().map(|r| r.record.into()).collect())
    }

    fn load_passages(&self, command: &str) -> Result<PassageStore> {
        let cfg = &self.config;
        Ok(load_passages(cfg.require("passages", &cfg.passages, command)?, cfg.id_scheme)?)
    }

    fn load_descriptions(&self) -> Result<HashMap<LanguageCode, HashMap<EntityId, String>>> {
        match &self.config.descriptions {
            Some(path) => {
                let loaded = load_descriptions(path, self.config.id_scheme)?;
                warn_diagnostics(path, &loaded.diagnostics);
                Ok(loaded.items)
            }
            None => Ok(HashMap::new()),
        }
    }

    /// Intermediate artifacts from another configuration are usable but
    /// worth a warning.
    fn warn_foreign<'a>(&self, path: &Path, hashes: impl Iterator<Item = &'a String>) {
        if let Some(h) = hashes.into_iter().find(|h| **h != self.config_hash) {
            log::warn!("{} was written under config {h}, current config is {}", path.display(), self.config_hash);
        }
    }

    pub fn build_kg(&self) -> Result<BuildKgSummary> {
        let cfg = &self.config;
        let triples_path = cfg.require("triples", &cfg.triples, "build-kg")?;
        let anchored_path = cfg.require("anchored_entities", &cfg.anchored_entities, "build-kg")?;
        let format = cfg.triples_format.unwrap_or_else(|| DumpFormat::from_path(triples_path));
        let records = load_triples(triples_path, format, cfg.id_scheme)?;
        warn_diagnostics(triples_path, &records.diagnostics);
        let anchored = load_entity_set(anchored_path, cfg.id_scheme)?;
        warn_diagnostics(anchored_path, &anchored.diagnostics);
        let relations = match &cfg.relations {
            Some(p) => {
                let r = load_relation_set(p, cfg.id_scheme)?;
                warn_diagnostics(p, &r.diagnostics);
                r.items
            }
            None => records.items.iter().filter_map(|r| r.to_triple(cfg.id_scheme)).map(|t| t.relation).collect(),
        };
        let lexicon = self.load_lexicon("build-kg")?;
        let target = &cfg.target_language;
        let kg = extract_kg(&records.items, &anchored.items, &relations, target.clone(), cfg.id_scheme);
        if kg.is_empty() {
            log::warn!("the extracted knowledge graph is empty");
        }

        let exclusions: Vec<KgExclusion> = kg
            .triples()
            .filter_map(|t| {
                let missing: Vec<&str> = [
                    ("head", lexicon.entity(&t.head, target).is_none()),
                    ("relation", lexicon.relation(&t.relation, target).is_none()),
                    ("tail", lexicon.entity(&t.tail, target).is_none()),
                ]
                .into_iter()
                .filter_map(|(what, absent)| absent.then_some(what))
                .collect();
                (!missing.is_empty()).then(|| KgExclusion {
                    head_id: t.head.clone(),
                    relation_id: t.relation.clone(),
                    tail_id: t.tail.clone(),
                    reason: format!("no {target} label for {}", missing.join(", ")),
                })
            })
            .collect();

        let transfer: Vec<LanguageCode> = cfg.languages.iter().filter(|l| *l != target).cloned().collect();
        let coverage = coverage_stats(&kg, &lexicon, &transfer);
        let a = &self.artifacts;
        write_stamped_jsonl(&a.kg(), &self.config_hash, kg.triples())?;
        write_json(&a.path("coverage.json"), &Stamped { config_hash: self.config_hash.clone(), record: &coverage })?;
        write_stamped_text(&a.path("coverage.txt"), &self.config_hash, &coverage.to_table())?;
        write_stamped_jsonl(&a.path("exclusions.jsonl"), &self.config_hash, &exclusions)?;
        Ok(BuildKgSummary {
            triples: kg.len(),
            heads: kg.heads().len(),
            tails: kg.tails().len(),
            excluded: exclusions.len(),
            input_diagnostics: records.diagnostics.len() + anchored.diagnostics.len(),
        })
    }

    pub fn make_qa(&self) -> Result<MakeQaSummary> {
        let cfg = &self.config;
        let kg = self.load_kg()?;
        let lexicon = self.load_lexicon("make-qa")?;
        let templates = load_templates(cfg.require("templates", &cfg.templates, "make-qa")?)?;
        let split = split_dataset(&kg.to_vec(), cfg.seed);
        let mut mix = build_split_mix(&split, cfg.mix_tag, &cfg.target_language, &cfg.languages, &lexicon, &templates);

        // Training data gets the upper-bound context; test items are given
        // context by the configured retriever at run time.
        if cfg.mix_tag.uses_context() {
            match &cfg.passages {
                Some(_) => {
                    let passages = self.load_passages("make-qa")?;
                    for inst in mix.train.instances.iter_mut().chain(mix.eval.instances.iter_mut()) {
                        inst.context = heuristic_retrieve(&inst.triple, &lexicon, &passages, &inst.question_language);
                    }
                }
                None => log::warn!("mix {} uses context but no passages are configured", cfg.mix_tag),
            }
        }

        let descriptions = self.load_descriptions()?;
        let registry = cfg.language_registry();
        let formatter = format_registry().build(&cfg.prompt_format, &())?;
        let resources =
            FormatResources { lexicon: &lexicon, languages: &registry, kg: Some(&kg), descriptions: &descriptions };
        let records = |out: &MixOutput, with_prompt: bool| -> Result<Vec<QaRecord>> {
            out.instances
                .iter()
                .map(|inst| {
                    let mut rec = QaRecord::from(inst);
                    if with_prompt {
                        rec.prompt = Some(formatter.format(inst, &resources)?.text);
                    }
                    Ok(rec)
                })
                .collect()
        };

        let a = &self.artifacts;
        write_json(&a.path("split.json"), &Stamped { config_hash: self.config_hash.clone(), record: &split })?;
        write_stamped_jsonl(&a.qa("train"), &self.config_hash, records(&mix.train, true)?)?;
        write_stamped_jsonl(&a.qa("eval"), &self.config_hash, records(&mix.eval, true)?)?;
        write_stamped_jsonl(&a.qa("test"), &self.config_hash, records(&mix.test, false)?)?;
        let exclusions: Vec<QaExclusion> = [("train", &mix.train), ("eval", &mix.eval), ("test", &mix.test)]
            .into_iter()
            .flat_map(|(name, out)| {
                out.exclusions.iter().map(move |e| QaExclusion { split: name.to_owned(), exclusion: e.clone() })
            })
            .collect();
        write_stamped_jsonl(&a.path("qa_exclusions.jsonl"), &self.config_hash, &exclusions)?;

        let target = &cfg.target_language;
        let no_descriptions = HashMap::new();
        let availability: Vec<ContextAvailability> = [StructuredContextMode::Description, StructuredContextMode::OneHop]
            .into_iter()
            .map(|mode| {
                let d = descriptions.get(target).unwrap_or(&no_descriptions);
                context_availability(&split.test, mode, d, &kg, &lexicon, target)
            })
            .collect();
        write_json(
            &a.path("context_availability.json"),
            &Stamped { config_hash: self.config_hash.clone(), record: BTreeMap::from([("test", availability)]) },
        )?;

        Ok(MakeQaSummary {
            split_sizes: split.sizes(),
            instances: (mix.train.instances.len(), mix.eval.instances.len(), mix.test.instances.len()),
            exclusions: exclusions.len(),
        })
    }

    pub fn index(&self) -> Result<Vec<IndexStats>> {
        let passages = self.load_passages("index")?;
        let mut stats = Vec::new();
        for lang in &self.config.languages {
            let docs: Vec<_> = passages.in_language(lang).collect();
            let index = build_index(&docs, lang, Default::default())?;
            let path = self.artifacts.index(lang);
            let stamped = Stamped { config_hash: self.config_hash.clone(), record: &index };
            write_text(&path, &serde_json::to_string(&stamped).expect("index serializes"))?;
            stats.push(IndexStats {
                language: lang.clone(),
                doc_count: index.doc_count,
                avg_doc_length: index.avg_doc_length,
                vocabulary: index.vocabulary_size(),
            });
        }
        Ok(stats)
    }

    /// Predictions already on disk for this config, by index.
    fn finished_predictions(&self, n: usize) -> BTreeMap<usize, PredictionRecord> {
        let mut done = BTreeMap::new();
        for path in [self.artifacts.predictions(), self.artifacts.predictions_partial()] {
            let Ok(text) = fs::read_to_string(&path) else { continue };
            // A run killed mid-write leaves a truncated last line; skip it.
            for rec in text.lines().filter_map(|l| serde_json::from_str::<Stamped<PredictionRecord>>(l).ok()) {
                if rec.config_hash == self.config_hash && rec.record.error.is_none() && rec.record.index < n {
                    done.insert(rec.record.index, rec.record);
                }
            }
        }
        done
    }

    pub fn run(&self) -> Result<RunSummary> {
        let cfg = &self.config;
        let test = self.load_qa("test")?;
        let lexicon = Arc::new(self.load_lexicon("run")?);

        let retrieve = cfg.mix_tag.uses_context() && cfg.retriever != "none";
        let retriever = if retrieve {
            let passages = Arc::new(self.load_passages("run")?);
            let mut indexes = BTreeMap::new();
            if cfg.retriever == "bm25" {
                let needed: BTreeSet<&LanguageCode> = test.iter().map(|i| &i.question_language).collect();
                for lang in needed {
                    let path = self.artifacts.index(lang);
                    if !path.exists() {
                        return Err(PipelineError::MissingArtifact { path, stage: "index" });
                    }
                    indexes.insert(lang.clone(), Arc::new(CorpusIndex::load(&path)?));
                }
            }
            let res = RetrieverResources { lexicon: Arc::clone(&lexicon), passages, indexes };
            Some(retriever_registry().build(&cfg.retriever, &res)?)
        } else {
            None
        };

        let kg = if cfg.prompt_format.starts_with("kgt5") { Some(self.load_kg()?) } else { None };
        let descriptions = self.load_descriptions()?;
        let registry = cfg.language_registry();
        let formatter = format_registry().build(&cfg.prompt_format, &())?;

        let answers: HashMap<String, String> =
            test.iter().enumerate().map(|(i, inst)| (item_key(i), inst.gold_answer.clone())).collect();
        let generator = generator_registry().build(
            &cfg.generator,
            &GeneratorResources {
                lexicon: Arc::clone(&lexicon),
                answers: Arc::new(answers),
                timeout: Some(Duration::from_millis(cfg.timeout_ms)),
            },
        )?;
        let model = generator.health().map_err(PipelineError::Health)?;
        log::info!("generator {} ready ({model})", generator.name());

        let mut done = self.finished_predictions(test.len());
        let reused = done.len();
        let pending: Vec<usize> = (0..test.len()).filter(|i| !done.contains_key(i)).collect();
        log::info!("{} test items: {reused} already predicted, {} to go", test.len(), pending.len());

        let partial_path = self.artifacts.predictions_partial();
        if let Some(dir) = partial_path.parent() {
            fs::create_dir_all(dir).map_err(|source| ArtifactError::Io { path: dir.to_owned(), source })?;
        }
        let partial = Mutex::new(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&partial_path)
                .map_err(|source| ArtifactError::Io { path: partial_path.clone(), source })?,
        );

        let resources = FormatResources { lexicon: &lexicon, languages: &registry, kg: kg.as_ref(), descriptions: &descriptions };
        let predict = |index: usize| -> Result<PredictionRecord> {
            let mut instance = test[index].clone();
            instance.context = None;
            let mut error = None;
            if let Some(r) = &retriever {
                let query = RetrievalQuery {
                    triple: &instance.triple,
                    question: &instance.question_text,
                    language: &instance.question_language,
                };
                match r.retrieve(&query) {
                    Ok(ctx) => instance.context = ctx,
                    Err(e @ RetrievalError::Embedder { .. }) => error = Some(e.to_string()),
                    Err(e) => return Err(e.into()),
                }
            }
            let prompt = formatter.format(&instance, &resources)?;
            let candidates = if error.is_some() {
                None
            } else if prompt.text.chars().count() > cfg.max_prompt_chars {
                error = Some(format!("prompt exceeds max_prompt_chars ({})", cfg.max_prompt_chars));
                None
            } else {
                let request = GenerationRequest::new(prompt.clone(), cfg.beam_size, cfg.num_candidates)
                    .map_err(|e| ConfigError::Invalid {
                        key: "num_candidates".into(),
                        value: cfg.num_candidates.to_string(),
                        reason: e.to_string(),
                    })?
                    .with_key(item_key(index));
                match generate_with_retries(generator.as_ref(), &request, cfg.max_retries, Duration::from_millis(100)) {
                    Ok(list) => Some(list),
                    Err(e) => {
                        error = Some(e.to_string());
                        None
                    }
                }
            };
            let record = PredictionRecord { index, instance: QaRecord::from(&instance), prompt: prompt.text, candidates, error };
            let stamped = Stamped { config_hash: self.config_hash.clone(), record: &record };
            append_jsonl(&mut partial.lock().expect("writer lock"), &partial_path, &stamped)?;
            Ok(record)
        };

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.concurrency)
            .build()
            .expect("thread pool builds");
        let fresh: Vec<PredictionRecord> =
            pool.install(|| pending.par_iter().map(|&i| predict(i)).collect::<Result<Vec<_>>>())?;
        for rec in fresh {
            done.insert(rec.index, rec);
        }

        let failed: Vec<(usize, String)> =
            done.values().filter_map(|r| r.error.clone().map(|e| (r.index, e))).collect();
        let warnings = done.values().filter_map(|r| r.candidates.as_ref()).map(|c| c.warnings.len()).sum();
        write_stamped_jsonl(&self.artifacts.predictions(), &self.config_hash, done.values())?;
        drop(partial);
        let _ = fs::remove_file(&partial_path);
        for (i, e) in &failed {
            log::warn!("item {i} failed: {e}");
        }
        Ok(RunSummary { total: test.len(), reused, failed, warnings })
    }

    pub fn eval(&self, predictions: Option<&Path>, force: bool) -> Result<crate::evaluation::EvalReport> {
        let cfg = &self.config;
        let path = match predictions {
            Some(p) => p.to_owned(),
            None => self.required_artifact(self.artifacts.predictions(), "run")?,
        };
        let rows: Vec<Stamped<PredictionRecord>> = read_jsonl(&path)?;
        if !force {
            if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.config_hash != self.config_hash) {
                return Err(PipelineError::HashMismatch {
                    path,
                    line: i + 1,
                    found: r.config_hash.clone(),
                    expected: self.config_hash.clone(),
                });
            }
        }
        let items: Vec<EvalItem> = rows
            .into_iter()
            .map(|r| {
                let p = r.record;
                let instance: QAInstance = p.instance.into();
                EvalItem {
                    context_language: instance.context.as_ref().map(|c| c.language.clone()),
                    candidates: p.candidates.unwrap_or(CandidateList {
                        candidates: Vec::new(),
                        beam_size: cfg.beam_size,
                        num_candidates: cfg.num_candidates,
                        warnings: Vec::new(),
                    }),
                    instance,
                }
            })
            .collect();
        let provenance = RunProvenance {
            retriever: cfg.retriever.clone(),
            mix_tag: cfg.mix_tag.to_string(),
            prompt_format: cfg.prompt_format.clone(),
            generator: cfg.generator.clone(),
            beam_size: cfg.beam_size,
            seed: cfg.seed,
            matcher: format!("{:?}", cfg.matcher).to_lowercase(),
            config_hash: self.config_hash.clone(),
        };
        let report = evaluate(&items, &cfg.ks, cfg.matcher, cfg.top_relations, provenance);
        let rounded = report.rounded();

        let lexicon = match &cfg.labels {
            Some(_) => self.load_lexicon("eval")?,
            None => MultilingualLexicon::new(),
        };
        let a = &self.artifacts;
        let h = &self.config_hash;
        write_json(&a.path("report.json"), &Stamped { config_hash: h.clone(), record: &rounded })?;
        let label = format!("{} / {} / {}", cfg.retriever, cfg.mix_tag, cfg.generator);
        let mut tables = hits_table(&format!("Hits@k (%), {} test items", report.n_items), &[(label, &report)]);
        tables.push('\n');
        tables.push_str(&context_language_table(&report));
        tables.push('\n');
        tables.push_str(&relation_table(&report, &lexicon, &cfg.target_language));
        write_stamped_text(&a.path("tables.txt"), h, &tables)?;
        write_stamped_text(&a.path("fig_context_language.csv"), h, &context_language_csv(&report))?;
        write_stamped_text(&a.path("fig_relations.csv"), h, &relation_csv(&report))?;

        if a.kg().exists() && !lexicon.is_empty() {
            let kg = self.load_kg()?;
            let mut overlaps = Vec::new();
            let mut gaps: BTreeMap<String, Vec<GapGroup>> = BTreeMap::new();
            for other in cfg.languages.iter().filter(|l| **l != cfg.target_language) {
                for role in [EntityRole::Head, EntityRole::Tail] {
                    overlaps.push(spelling_overlap(&lexicon, &kg, &cfg.target_language, other, role));
                }
                let other_kg = KnowledgeGraph::new(other.clone());
                gaps.insert(other.to_string(), kg_gap_report(&kg, &other_kg, &lexicon, &cfg.class_relation));
            }
            write_stamped_text(&a.path("fig_spelling_overlap.csv"), h, &spelling_overlap_csv(&overlaps))?;
            write_json(&a.path("kg_gaps.json"), &Stamped { config_hash: h.clone(), record: gaps })?;
        }
        Ok(report)
    }

    pub fn export_contrastive(&self) -> Result<ContrastiveSummary> {
        let train = self.load_qa("train")?;
        let passages = self.load_passages("export-contrastive")?;
        let lexicon = self.load_lexicon("export-contrastive")?;
        let out = build_contrastive_dataset(&train, &passages, &lexicon);
        let violations: usize = out.examples.iter().map(|e| e.violations().len()).sum();
        if violations > 0 {
            log::error!("{violations} contrastive predicate violations");
        }
        let records: Vec<ContrastiveRecord> = out.examples.iter().map(|e| e.to_record()).collect();
        let skips: Vec<ContrastiveSkipRecord> = out
            .skipped
            .iter()
            .map(|s| ContrastiveSkipRecord { kind: "skipped".into(), skip: s.clone() })
            .chain(out.missing_slots.iter().map(|s| ContrastiveSkipRecord { kind: "missing_slot".into(), skip: s.clone() }))
            .collect();
        let a = &self.artifacts;
        write_stamped_jsonl(&a.path("contrastive.jsonl"), &self.config_hash, &records)?;
        write_stamped_jsonl(&a.path("contrastive_skips.jsonl"), &self.config_hash, &skips)?;
        Ok(ContrastiveSummary {
            examples: records.len(),
            skipped: out.skipped.len(),
            missing_slots: out.missing_slots.len(),
            violations,
        })
    }

    /// `split.json` as written by `make-qa`.
    pub fn read_split(&self) -> Result<crate::model::DatasetSplit> {
        let path = self.required_artifact(self.artifacts.path("split.json"), "make-qa")?;
        Ok(read_json::<Stamped<crate::model::DatasetSplit>>(&path)?.record)
    }
}

fn item_key(index: usize) -> String {
    format!("test:{index}")
}

fn warn_diagnostics(path: &Path, diags: &[crate::ingestion::LineDiagnostic]) {
    for d in diags.iter().take(5) {
        log::warn!("{}:{}: {}", path.display(), d.line, d.reason);
    }
    if diags.len() > 5 {
        log::warn!("{}: {} more malformed lines", path.display(), diags.len() - 5);
    }
}
