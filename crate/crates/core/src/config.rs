//! Run configuration: a `key = value` file (UTF-8, `#` starts a comment
//! line) with per-key overrides from the command line.
//!
//! Relative paths in a config file are resolved against the file's
//! directory; override paths are taken as given.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evaluation::{Matcher, DEFAULT_KS};
use crate::generation::generator_registry;
use crate::ingestion::DumpFormat;
use crate::model::{IdScheme, LanguageCode, LanguageRegistry, RelationId};
use crate::reformulation::{format_registry, MixTag};
use crate::retrieval::retriever_registry;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Syntax { path: PathBuf, line: usize, reason: String },
    #[error("unknown config key {key:?} ({origin})")]
    UnknownKey { key: String, origin: String },
    #[error("invalid value {value:?} for {key}: {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("{key}: file {path} does not exist")]
    MissingPath { key: String, path: PathBuf },
    #[error("{command} needs `{key}` to be set")]
    Required { key: String, command: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Value,
    Path,
    /// Affects where or how a run happens but not what it produces.
    Operational,
}

pub struct ConfigKey {
    pub name: &'static str,
    pub kind: KeyKind,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: KeyKind, default: Option<&'static str>, help: &'static str) -> ConfigKey {
    ConfigKey { name, kind, default, help }
}

use KeyKind::{Operational, Path as P, Value as V};

/// Every recognised key, in documentation order.
pub const KEYS: &[ConfigKey] = &[
    key("languages", V, Some("tir,amh,eng,ara"), "comma-separated language codes taking part in the run"),
    key("language_names", V, Some(""), "extra display names, e.g. `som=Somali,orm=Oromo`"),
    key("target_language", V, None, "language whose KG is completed"),
    key("triples", P, None, "triple dump (TSV or JSONL)"),
    key("triples_format", V, Some("auto"), "tsv, jsonl or auto (by extension)"),
    key("labels", P, None, "label file `id<TAB>lang<TAB>label`"),
    key("anchored_entities", P, None, "entities with an article, one id per line"),
    key("relations", P, None, "curated relation ids, one per line (default: all)"),
    key("templates", P, None, "question templates `relation<TAB>lang<TAB>gender<TAB>pattern`"),
    key("passages", P, None, "article store, JSONL"),
    key("descriptions", P, None, "entity descriptions `id<TAB>lang<TAB>text`"),
    key("genders", P, None, "entity genders `id<TAB>gender`"),
    key("id_scheme", V, Some("wikidata"), "wikidata (Q/P ids) or any"),
    key("retriever", V, Some("heuristic"), "none, heuristic, bm25 or dense[:embedder]"),
    key("mix_tag", V, Some("mono_self"), "no_context, mono_self, multi_self or cross_lingual"),
    key("prompt_format", V, Some("tagged"), "tagged, kgt5, kgt5_description, kgt5_one_hop or zero_shot"),
    key("generator", V, Some("oracle:context_extraction"), "oracle:<mode> or remote:<url>"),
    key("beam_size", V, Some("10"), "beam width requested from the generator"),
    key("num_candidates", V, Some("10"), "candidates kept per question"),
    key("ks", V, Some("1,3,10"), "cutoffs for Hits@k"),
    key("seed", V, Some("42"), "split seed"),
    key("matcher", V, Some("exact"), "exact or containment"),
    key("top_relations", V, Some("5"), "relations listed in the relation analysis"),
    key("class_relation", V, Some("P31"), "relation whose tail classifies entities in gap reports"),
    key("max_prompt_chars", V, Some("4096"), "prompts longer than this are not sent"),
    key("concurrency", Operational, Some("4"), "parallel generator requests"),
    key("max_retries", Operational, Some("3"), "retries per request on transient failures"),
    key("timeout_ms", Operational, Some("30000"), "per-request timeout for remote generators"),
    key("out_dir", Operational, Some("out"), "directory for all artifacts"),
    key("log_level", Operational, Some("info"), "error, warn, info, debug or trace"),
];

pub fn lookup_key(name: &str) -> Option<&'static ConfigKey> {
    KEYS.iter().find(|k| k.name == name)
}

/// Parses `key = value` lines. Later duplicates override earlier ones.
pub fn parse_config_text(path: &Path, text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.to_owned(),
            line: i + 1,
            reason: "expected `key = value`".into(),
        })?;
        let k = k.trim();
        if lookup_key(k).is_none() {
            return Err(ConfigError::UnknownKey { key: k.to_owned(), origin: format!("{}:{}", path.display(), i + 1) });
        }
        out.insert(k.to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub languages: Vec<LanguageCode>,
    pub language_names: Vec<(LanguageCode, String)>,
    pub target_language: LanguageCode,
    pub triples: Option<PathBuf>,
    pub triples_format: Option<DumpFormat>,
    pub labels: Option<PathBuf>,
    pub anchored_entities: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub passages: Option<PathBuf>,
    pub descriptions: Option<PathBuf>,
    pub genders: Option<PathBuf>,
    pub id_scheme: IdScheme,
    pub retriever: String,
    pub mix_tag: MixTag,
    pub prompt_format: String,
    pub generator: String,
    pub beam_size: usize,
    pub num_candidates: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub matcher: Matcher,
    pub top_relations: usize,
    pub class_relation: RelationId,
    pub max_prompt_chars: usize,
    pub concurrency: usize,
    pub max_retries: usize,
    pub timeout_ms: u64,
    pub out_dir: PathBuf,
    pub log_level: String,
    /// The resolved key/value pairs the fields were parsed from.
    values: BTreeMap<String, String>,
}

fn invalid(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.to_owned(), value: value.to_owned(), reason: reason.to_string() }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    v.parse().map_err(|e: T::Err| invalid(key, v, e))
}

fn positive(key: &str, v: &str) -> Result<usize, ConfigError> {
    match parse_num::<usize>(key, v)? {
        0 => Err(invalid(key, v, "must be positive")),
        n => Ok(n),
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl RunConfig {
    /// Defaults, then the config file, then `overrides`, in that order.
    pub fn load(config_path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<String, String> = KEYS
            .iter()
            .filter_map(|k| k.default.map(|d| (k.name.to_owned(), d.to_owned())))
            .collect();
        if let Some(path) = config_path {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
            let base = path.parent().unwrap_or(Path::new(""));
            for (k, v) in parse_config_text(path, &text)? {
                let spec = lookup_key(&k).expect("checked by parser");
                let resolved = if (spec.kind == KeyKind::Path || k == "out_dir") && !v.is_empty() {
                    base.join(&v).to_string_lossy().into_owned()
                } else {
                    v
                };
                values.insert(k, resolved);
            }
        }
        for (k, v) in overrides {
            if lookup_key(k).is_none() {
                return Err(ConfigError::UnknownKey { key: k.clone(), origin: "command line".into() });
            }
            values.insert(k.clone(), v.clone());
        }
        Self::from_values(values)
    }

    pub fn from_values(values: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let get = |k: &str| values.get(k).map(String::as_str).unwrap_or("");
        let path = |k: &str| Some(get(k)).filter(|v| !v.is_empty()).map(PathBuf::from);
        let lang = |k: &str, v: &str| LanguageCode::new(v).map_err(|e| invalid(k, v, e));

        let languages = list(get("languages")).map(|l| lang("languages", l)).collect::<Result<Vec<_>, _>>()?;
        let language_names = list(get("language_names"))
            .map(|pair| {
                let (c, n) = pair.split_once('=').ok_or_else(|| invalid("language_names", pair, "expected code=Name"))?;
                Ok((lang("language_names", c.trim())?, n.trim().to_owned()))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let target = get("target_language");
        if target.is_empty() {
            return Err(ConfigError::Required { key: "target_language".into(), command: "every command".into() });
        }
        let triples_format = match get("triples_format") {
            "auto" | "" => None,
            v => Some(v.parse::<DumpFormat>().map_err(|e| invalid("triples_format", v, e))?),
        };
        let id_scheme = match get("id_scheme") {
            "wikidata" => IdScheme::Wikidata,
            "any" => IdScheme::Any,
            v => return Err(invalid("id_scheme", v, "expected wikidata or any")),
        };
        let mix_tag = get("mix_tag").parse::<MixTag>().map_err(|e| invalid("mix_tag", get("mix_tag"), e))?;
        let matcher = get("matcher").parse::<Matcher>().map_err(|e| invalid("matcher", get("matcher"), e))?;
        let ks = list(get("ks")).map(|k| positive("ks", k)).collect::<Result<Vec<_>, _>>()?;
        let class_relation = RelationId::parse(get("class_relation"), id_scheme)
            .map_err(|e| invalid("class_relation", get("class_relation"), e))?;

        let mut ks = if ks.is_empty() { DEFAULT_KS.to_vec() } else { ks };
        ks.sort_unstable();
        ks.dedup();

        Ok(Self {
            languages,
            language_names,
            target_language: lang("target_language", target)?,
            triples: path("triples"),
            triples_format,
            labels: path("labels"),
            anchored_entities: path("anchored_entities"),
            relations: path("relations"),
            templates: path("templates"),
            passages: path("passages"),
            descriptions: path("descriptions"),
            genders: path("genders"),
            id_scheme,
            retriever: get("retriever").to_owned(),
            mix_tag,
            prompt_format: get("prompt_format").to_owned(),
            generator: get("generator").to_owned(),
            beam_size: positive("beam_size", get("beam_size"))?,
            num_candidates: positive("num_candidates", get("num_candidates"))?,
            ks,
            seed: parse_num("seed", get("seed"))?,
            matcher,
            top_relations: positive("top_relations", get("top_relations"))?,
            class_relation,
            max_prompt_chars: positive("max_prompt_chars", get("max_prompt_chars"))?,
            concurrency: positive("concurrency", get("concurrency"))?,
            max_retries: parse_num("max_retries", get("max_retries"))?,
            timeout_ms: parse_num("timeout_ms", get("timeout_ms"))?,
            out_dir: PathBuf::from(get("out_dir")),
            log_level: get("log_level").to_owned(),
            values,
        })
    }

    /// Cross-key checks and existence of every configured input file.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = |k: &str| self.values.get(k).cloned().unwrap_or_default();
        if self.languages.is_empty() {
            return Err(invalid("languages", "", "at least one language is required"));
        }
        if !self.languages.contains(&self.target_language) {
            return Err(invalid("target_language", self.target_language.as_str(), "not listed in `languages`"));
        }
        if self.num_candidates > self.beam_size {
            return Err(invalid("num_candidates", &v("num_candidates"), "exceeds beam_size"));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k > self.num_candidates) {
            return Err(invalid("ks", &v("ks"), format!("k={k} exceeds num_candidates")));
        }
        let selector_name = |s: &str| s.split_once(':').map_or(s.to_owned(), |(n, _)| n.to_owned());
        if !retriever_registry().contains(&selector_name(&self.retriever)) {
            return Err(invalid("retriever", &self.retriever, "unknown retriever"));
        }
        if !format_registry().contains(&self.prompt_format) {
            return Err(invalid("prompt_format", &self.prompt_format, "unknown prompt format"));
        }
        if !generator_registry().contains(&selector_name(&self.generator)) {
            return Err(invalid("generator", &self.generator, "unknown generator"));
        }
        if !["error", "warn", "info", "debug", "trace", "off"].contains(&self.log_level.as_str()) {
            return Err(invalid("log_level", &self.log_level, "unknown level"));
        }
        for (name, path) in self.input_paths() {
            if !path.exists() {
                return Err(ConfigError::MissingPath { key: name.to_owned(), path: path.clone() });
            }
        }
        Ok(())
    }

    fn input_paths(&self) -> Vec<(&'static str, &PathBuf)> {
        [
            ("triples", &self.triples),
            ("labels", &self.labels),
            ("anchored_entities", &self.anchored_entities),
            ("relations", &self.relations),
            ("templates", &self.templates),
            ("passages", &self.passages),
            ("descriptions", &self.descriptions),
            ("genders", &self.genders),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.as_ref().map(|p| (k, p)))
        .collect()
    }

    /// The configured path for `key`, or an error naming the command that
    /// needs it.
    pub fn require<'a>(&self, key: &str, path: &'a Option<PathBuf>, command: &str) -> Result<&'a Path, ConfigError> {
        path.as_deref().ok_or_else(|| ConfigError::Required { key: key.to_owned(), command: command.to_owned() })
    }

    /// Registry of the configured languages, with display names.
    pub fn language_registry(&self) -> LanguageRegistry {
        let standard = LanguageRegistry::standard();
        let mut reg = LanguageRegistry::new();
        for code in &self.languages {
            let name = self
                .language_names
                .iter()
                .find(|(c, _)| c == code)
                .map(|(_, n)| n.clone())
                .or_else(|| standard.name(code).map(str::to_owned))
                .unwrap_or_else(|| code.to_string());
            reg.register(code.clone(), &name);
        }
        reg
    }

    /// Fingerprint of everything that determines the run's outputs:
    /// non-operational values plus the contents (not the locations) of the
    /// input files. First 16 hex digits of a SHA-256.
    pub fn config_hash(&self) -> Result<String, ConfigError> {
        let mut h = Sha256::new();
        for spec in KEYS {
            let value = self.values.get(spec.name).map(String::as_str).unwrap_or("");
            match spec.kind {
                KeyKind::Operational => continue,
                KeyKind::Value => h.update(format!("{}={value}\n", spec.name)),
                KeyKind::Path if value.is_empty() => h.update(format!("{}=\n", spec.name)),
                KeyKind::Path => {
                    let bytes = fs::read(value).map_err(|source| ConfigError::Io { path: value.into(), source })?;
                    h.update(format!("{}=sha256:{}\n", spec.name, hex::encode(Sha256::digest(&bytes))));
                }
            }
        }
        Ok(hex::encode(h.finalize())[..16].to_owned())
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}
