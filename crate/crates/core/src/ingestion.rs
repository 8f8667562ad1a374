//! Reading triple and label dumps, KG extraction, label joins, coverage
//! statistics and seeded 8:1:1 splits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    nfc, DatasetSplit, EntityId, Gender, IdScheme, KnowledgeGraph, LanguageCode,
    LanguageRegistry, MultilingualLexicon, RelationId, Triple,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    NotUtf8 { path: PathBuf },
    #[error("{path}: wrong format, {malformed} of {total} lines are malformed (first: line {first_line}: {first_reason})")]
    WrongFormat {
        path: PathBuf,
        malformed: usize,
        total: usize,
        first_line: usize,
        first_reason: String,
    },
    #[error("unknown dump format {0:?} (expected tsv or jsonl)")]
    UnknownFormat(String),
}

fn read_utf8(path: &Path) -> Result<String, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
    String::from_utf8(bytes).map_err(|_| IngestError::NotUtf8 { path: path.to_owned() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Tsv,
    Jsonl,
}

impl DumpFormat {
    /// Guesses from the file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Self::Jsonl,
            _ => Self::Tsv,
        }
    }
}

impl std::str::FromStr for DumpFormat {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(IngestError::UnknownFormat(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleDumpRecord {
    pub head_id: String,
    pub relation_id: String,
    pub tail_id: String,
    pub source_line: usize,
}

impl TripleDumpRecord {
    pub fn to_triple(&self, scheme: IdScheme) -> Option<Triple> {
        Some(Triple::new(
            EntityId::parse(&self.head_id, scheme).ok()?,
            RelationId::parse(&self.relation_id, scheme).ok()?,
            EntityId::parse(&self.tail_id, scheme).ok()?,
        ))
    }
}

/// A malformed input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineDiagnostic {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Loaded<T> {
    pub items: T,
    pub diagnostics: Vec<LineDiagnostic>,
}

#[derive(Deserialize)]
struct JsonTriple {
    head: String,
    relation: String,
    tail: String,
}

fn parse_triple_line(
    line: &str,
    format: DumpFormat,
    scheme: IdScheme,
) -> Result<(String, String, String), String> {
    let (h, r, t) = match format {
        DumpFormat::Tsv => {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
            }
            (fields[0].trim().to_owned(), fields[1].trim().to_owned(), fields[2].trim().to_owned())
        }
        DumpFormat::Jsonl => {
            let rec: JsonTriple = serde_json::from_str(line).map_err(|e| e.to_string())?;
            (rec.head, rec.relation, rec.tail)
        }
    };
    EntityId::parse(&h, scheme).map_err(|e| e.to_string())?;
    RelationId::parse(&r, scheme).map_err(|e| e.to_string())?;
    EntityId::parse(&t, scheme).map_err(|e| e.to_string())?;
    Ok((h, r, t))
}

/// Loads a triple dump. Blank lines are skipped; malformed lines become
/// diagnostics. More than half of the non-blank lines being malformed is
/// treated as a format mismatch.
pub fn load_triples(
    path: &Path,
    format: DumpFormat,
    scheme: IdScheme,
) -> Result<Loaded<Vec<TripleDumpRecord>>, IngestError> {
    let text = read_utf8(path)?;
    let mut out = Loaded::<Vec<TripleDumpRecord>>::default();
    let mut total = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_triple_line(line, format, scheme) {
            Ok((head_id, relation_id, tail_id)) => out.items.push(TripleDumpRecord {
                head_id,
                relation_id,
                tail_id,
                source_line: idx + 1,
            }),
            Err(reason) => out.diagnostics.push(LineDiagnostic { line: idx + 1, reason }),
        }
    }
    check_malformed_ratio(path, &out.diagnostics, total)?;
    Ok(out)
}

fn check_malformed_ratio(
    path: &Path,
    diagnostics: &[LineDiagnostic],
    total: usize,
) -> Result<(), IngestError> {
    if total > 0 && diagnostics.len() * 2 > total {
        let first = &diagnostics[0];
        return Err(IngestError::WrongFormat {
            path: path.to_owned(),
            malformed: diagnostics.len(),
            total,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    Ok(())
}

/// Loads `id\tlang\tlabel` rows. `P…` ids go to relation labels, the rest
/// to entity labels. Labels are NFC-normalized here.
pub fn load_labels(
    path: &Path,
    registry: &LanguageRegistry,
    scheme: IdScheme,
) -> Result<Loaded<MultilingualLexicon>, IngestError> {
    let text = read_utf8(path)?;
    let mut out = Loaded::<MultilingualLexicon>::default();
    let mut total = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let line_no = idx + 1;
        let fields: Vec<&str> = line.splitn(3, '\t').collect();
        let diag = |reason: String| LineDiagnostic { line: line_no, reason };
        if fields.len() != 3 {
            out.diagnostics.push(diag(format!("expected 3 tab-separated fields, found {}", fields.len())));
            continue;
        }
        let (id, lang, label) = (fields[0].trim(), fields[1].trim(), nfc(fields[2].trim()));
        let lang = match LanguageCode::new(lang) {
            Ok(l) => l,
            Err(e) => {
                out.diagnostics.push(diag(e.to_string()));
                continue;
            }
        };
        if !registry.contains(&lang) {
            out.diagnostics.push(diag(format!("language {lang} is not registered")));
            continue;
        }
        if label.is_empty() {
            out.diagnostics.push(diag(format!("empty label for ({id}, {lang})")));
            continue;
        }
        if let Ok(rel) = RelationId::parse(id, IdScheme::Wikidata) {
            out.items.insert_relation(rel, lang, label);
        } else {
            match EntityId::parse(id, scheme) {
                Ok(ent) => out.items.insert_entity(ent, lang, label),
                Err(e) => out.diagnostics.push(diag(e.to_string())),
            }
        }
    }
    check_malformed_ratio(path, &out.diagnostics, total)?;
    Ok(out)
}

/// Loads `id\tgender` rows into an existing lexicon.
pub fn load_genders(
    path: &Path,
    lexicon: &mut MultilingualLexicon,
    scheme: IdScheme,
) -> Result<Vec<LineDiagnostic>, IngestError> {
    let text = read_utf8(path)?;
    let mut diags = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line
            .split_once('\t')
            .ok_or_else(|| "expected `id<TAB>gender`".to_owned())
            .and_then(|(id, g)| {
                let id = EntityId::parse(id.trim(), scheme).map_err(|e| e.to_string())?;
                let g: Gender = g.trim().parse()?;
                Ok((id, g))
            });
        match parsed {
            Ok((id, g)) => lexicon.set_gender(id, g),
            Err(reason) => diags.push(LineDiagnostic { line: idx + 1, reason }),
        }
    }
    Ok(diags)
}

/// Loads `id\tlang\tdescription` rows, grouped by language and NFC-normalized.
pub fn load_descriptions(
    path: &Path,
    scheme: IdScheme,
) -> Result<Loaded<HashMap<LanguageCode, HashMap<EntityId, String>>>, IngestError> {
    let text = read_utf8(path)?;
    let mut out = Loaded::<HashMap<LanguageCode, HashMap<EntityId, String>>>::default();
    let mut total = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let parsed = match line.splitn(3, '\t').collect::<Vec<_>>()[..] {
            [id, lang, desc] => EntityId::parse(id.trim(), scheme)
                .map_err(|e| e.to_string())
                .and_then(|id| Ok((id, LanguageCode::new(lang.trim()).map_err(|e| e.to_string())?, nfc(desc.trim())))),
            _ => Err("expected `id<TAB>lang<TAB>description`".to_owned()),
        };
        match parsed {
            Ok((id, lang, desc)) => {
                out.items.entry(lang).or_default().insert(id, desc);
            }
            Err(reason) => out.diagnostics.push(LineDiagnostic { line: idx + 1, reason }),
        }
    }
    check_malformed_ratio(path, &out.diagnostics, total)?;
    Ok(out)
}

/// Loads a one-id-per-line file (anchored entities).
pub fn load_entity_set(path: &Path, scheme: IdScheme) -> Result<Loaded<HashSet<EntityId>>, IngestError> {
    let text = read_utf8(path)?;
    let mut out = Loaded::<HashSet<EntityId>>::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match EntityId::parse(line, scheme) {
            Ok(id) => {
                out.items.insert(id);
            }
            Err(e) => out.diagnostics.push(LineDiagnostic { line: idx + 1, reason: e.to_string() }),
        }
    }
    Ok(out)
}

pub fn load_relation_set(path: &Path, scheme: IdScheme) -> Result<Loaded<HashSet<RelationId>>, IngestError> {
    let text = read_utf8(path)?;
    let mut out = Loaded::<HashSet<RelationId>>::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match RelationId::parse(line, scheme) {
            Ok(id) => {
                out.items.insert(id);
            }
            Err(e) => out.diagnostics.push(LineDiagnostic { line: idx + 1, reason: e.to_string() }),
        }
    }
    Ok(out)
}

/// Keeps records on a curated relation whose head or tail is anchored (has
/// an article), deduplicated in first-seen order.
pub fn extract_kg(
    records: &[TripleDumpRecord],
    anchored: &HashSet<EntityId>,
    relations: &HashSet<RelationId>,
    language: LanguageCode,
    scheme: IdScheme,
) -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new(language);
    for triple in records.iter().filter_map(|r| r.to_triple(scheme)) {
        if relations.contains(&triple.relation)
            && (anchored.contains(&triple.head) || anchored.contains(&triple.tail))
        {
            kg.insert(triple);
        }
    }
    kg
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub head: String,
    pub relation: String,
    pub tail: String,
}

/// Triples of `kg` whose head, relation and tail all have labels in `language`.
pub fn join_labels(
    kg: &KnowledgeGraph,
    lexicon: &MultilingualLexicon,
    language: &LanguageCode,
) -> Vec<LabeledTriple> {
    kg.triples()
        .filter_map(|t| {
            Some(LabeledTriple {
                head: lexicon.entity(&t.head, language)?.to_owned(),
                relation: lexicon.relation(&t.relation, language)?.to_owned(),
                tail: lexicon.entity(&t.tail, language)?.to_owned(),
                triple: t.clone(),
            })
        })
        .collect()
}

/// Rounds to two decimals, the precision every report uses.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// `100 * part / whole`, defined as 0 for an empty whole.
pub fn percentage(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub language: LanguageCode,
    pub heads_covered: usize,
    pub heads_total: usize,
    pub tails_covered: usize,
    pub tails_total: usize,
    pub head_coverage_pct: f64,
    pub tail_coverage_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub kg_language: LanguageCode,
    pub entries: Vec<CoverageEntry>,
}

impl CoverageReport {
    pub fn entry(&self, lang: &LanguageCode) -> Option<&CoverageEntry> {
        self.entries.iter().find(|e| &e.language == lang)
    }

    /// Aligned text table, one row per transfer language.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10}{:>10}{:>10}", "", format!("{} KG", self.kg_language), "");
        let _ = writeln!(s, "{:<10}{:>10}{:>10}", "Language", "Head", "Tail");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:<10}{:>10.2}{:>10.2}",
                e.language.as_str(),
                e.head_coverage_pct,
                e.tail_coverage_pct
            );
        }
        s
    }
}

/// Share of distinct heads and tails of `kg` that carry a label in each
/// transfer language.
pub fn coverage_stats(
    kg: &KnowledgeGraph,
    lexicon: &MultilingualLexicon,
    transfer_languages: &[LanguageCode],
) -> CoverageReport {
    let heads = kg.heads();
    let tails = kg.tails();
    let entries = transfer_languages
        .iter()
        .map(|lang| {
            let heads_covered = heads.iter().filter(|e| lexicon.entity(e, lang).is_some()).count();
            let tails_covered = tails.iter().filter(|e| lexicon.entity(e, lang).is_some()).count();
            CoverageEntry {
                language: lang.clone(),
                heads_covered,
                heads_total: heads.len(),
                tails_covered,
                tails_total: tails.len(),
                head_coverage_pct: round2(percentage(heads_covered, heads.len())),
                tail_coverage_pct: round2(percentage(tails_covered, tails.len())),
            }
        })
        .collect();
    CoverageReport { kg_language: kg.language.clone(), entries }
}

/// Bucket sizes for an 8:1:1 split of `n` items: train and eval are rounded
/// half-up from their exact shares and test takes the rest.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (8 * n + 5) / 10;
    let eval = (n + 5) / 10;
    (train, eval, n - train - eval)
}

/// Seeded 8:1:1 split. The input is put in canonical order before shuffling
/// so the result depends only on the triple set and the seed.
pub fn split_dataset(triples: &[Triple], seed: u64) -> DatasetSplit {
    let mut canonical: Vec<Triple> = triples.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    canonical.shuffle(&mut rng);
    let (train_n, eval_n, _) = split_sizes(canonical.len());
    let test = canonical.split_off(train_n + eval_n);
    let eval = canonical.split_off(train_n);
    DatasetSplit { train: canonical, eval, test, seed }
}
