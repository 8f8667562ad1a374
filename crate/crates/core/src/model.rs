//! Shared domain types: identifiers, triples, the multilingual lexicon,
//! knowledge graphs and dataset splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::{is_nfc, UnicodeNormalization};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid language code {0:?}: expected three lowercase ASCII letters")]
    InvalidLanguageCode(String),
    #[error("language {0} is not registered in this run")]
    UnregisteredLanguage(LanguageCode),
    #[error("invalid entity id {0:?}")]
    InvalidEntityId(String),
    #[error("invalid relation id {0:?}")]
    InvalidRelationId(String),
}

/// NFC-normalizes `text`.
pub fn nfc(text: &str) -> String {
    if is_nfc(text) {
        text.to_owned()
    } else {
        text.nfc().collect()
    }
}

/// ISO 639-3 language code, e.g. `tir`, `amh`, `eng`, `ara`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: &str) -> Result<Self, ModelError> {
        if code.len() == 3 && code.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(Self(code.to_owned()))
        } else {
            Err(ModelError::InvalidLanguageCode(code.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_arabic(&self) -> bool {
        self.0 == "ara"
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(&value)
    }
}

impl From<LanguageCode> for String {
    fn from(value: LanguageCode) -> Self {
        value.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for LanguageCode {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// Which identifier shapes are accepted for entities and relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdScheme {
    /// `Q123` entities and `P19` relations.
    #[default]
    Wikidata,
    /// Any nonempty token without whitespace.
    Any,
}

fn is_plain_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

fn is_prefixed_number(s: &str, prefix: char) -> bool {
    let mut chars = s.chars();
    chars.next() == Some(prefix)
        && s.len() > 1
        && chars.all(|c| c.is_ascii_digit())
}

macro_rules! id_newtype {
    ($name:ident, $prefix:expr, $err:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn parse(id: &str, scheme: IdScheme) -> Result<Self, ModelError> {
                let ok = match scheme {
                    IdScheme::Wikidata => is_prefixed_number(id, $prefix),
                    IdScheme::Any => is_plain_token(id),
                };
                if ok {
                    Ok(Self(id.to_owned()))
                } else {
                    Err(ModelError::$err(id.to_owned()))
                }
            }

            /// Wikidata-shaped constructor, used heavily by tests and fixtures.
            pub fn new(id: &str) -> Result<Self, ModelError> {
                Self::parse(id, IdScheme::Wikidata)
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id_newtype!(EntityId, 'Q', InvalidEntityId);
id_newtype!(RelationId, 'P', InvalidRelationId);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// Grammatical gender of an entity, used to pick gendered question templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    #[default]
    Neutral,
    Male,
    Female,
}

impl std::str::FromStr for Gender {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neutral" => Ok(Self::Neutral),
            "male" => Ok(Self::Male),
            "female" => Ok(Self::Female),
            other => Err(format!("unknown gender variant {other:?}")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Neutral => "neutral",
            Self::Male => "male",
            Self::Female => "female",
        })
    }
}

/// Languages known to a run, with display names used in probing prompts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanguageRegistry {
    names: BTreeMap<LanguageCode, String>,
    order: Vec<LanguageCode>,
}

impl LanguageRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The four languages of the shipped configuration.
    pub fn standard() -> Self {
        let mut reg = Self::new();
        for (code, name) in [
            ("tir", "Tigrinya"),
            ("amh", "Amharic"),
            ("eng", "English"),
            ("ara", "Arabic"),
        ] {
            reg.register(LanguageCode::new(code).expect("static code"), name);
        }
        reg
    }

    pub fn register(&mut self, code: LanguageCode, name: &str) {
        if !self.names.contains_key(&code) {
            self.order.push(code.clone());
        }
        self.names.insert(code, name.to_owned());
    }

    pub fn contains(&self, code: &LanguageCode) -> bool {
        self.names.contains_key(code)
    }

    pub fn check(&self, code: &LanguageCode) -> Result<(), ModelError> {
        if self.contains(code) {
            Ok(())
        } else {
            Err(ModelError::UnregisteredLanguage(code.clone()))
        }
    }

    pub fn name(&self, code: &LanguageCode) -> Option<&str> {
        self.names.get(code).map(String::as_str)
    }

    /// Codes in registration order.
    pub fn codes(&self) -> &[LanguageCode] {
        &self.order
    }
}

/// Entity and relation labels per language.
///
/// Lookups of missing pairs yield `None`; an empty string is never handed
/// out as a stand-in for an absent label.
#[derive(Debug, Clone, Default)]
pub struct MultilingualLexicon {
    entity_labels: HashMap<(EntityId, LanguageCode), String>,
    relation_labels: HashMap<(RelationId, LanguageCode), String>,
    genders: HashMap<EntityId, Gender>,
}

impl MultilingualLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_entity(&mut self, id: EntityId, lang: LanguageCode, label: impl Into<String>) {
        self.entity_labels.insert((id, lang), label.into());
    }

    pub fn insert_relation(&mut self, id: RelationId, lang: LanguageCode, label: impl Into<String>) {
        self.relation_labels.insert((id, lang), label.into());
    }

    pub fn set_gender(&mut self, id: EntityId, gender: Gender) {
        self.genders.insert(id, gender);
    }

    pub fn entity(&self, id: &EntityId, lang: &LanguageCode) -> Option<&str> {
        self.entity_labels
            .get(&(id.clone(), lang.clone()))
            .map(String::as_str)
            .filter(|s| !s.is_empty())
    }

    pub fn relation(&self, id: &RelationId, lang: &LanguageCode) -> Option<&str> {
        self.relation_labels
            .get(&(id.clone(), lang.clone()))
            .map(String::as_str)
            .filter(|s| !s.is_empty())
    }

    pub fn gender(&self, id: &EntityId) -> Gender {
        self.genders.get(id).copied().unwrap_or_default()
    }

    /// All distinct nonempty entity labels in `lang`.
    pub fn entity_labels_in(&self, lang: &LanguageCode) -> BTreeSet<&str> {
        self.entity_labels
            .iter()
            .filter(|((_, l), label)| l == lang && !label.is_empty())
            .map(|(_, label)| label.as_str())
            .collect()
    }

    pub fn entity_entries(&self) -> impl Iterator<Item = (&EntityId, &LanguageCode, &str)> {
        self.entity_labels
            .iter()
            .map(|((id, lang), label)| (id, lang, label.as_str()))
    }

    pub fn relation_entries(&self) -> impl Iterator<Item = (&RelationId, &LanguageCode, &str)> {
        self.relation_labels
            .iter()
            .map(|((id, lang), label)| (id, lang, label.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entity_labels.len() + self.relation_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LexiconDiagnostic {
    EmptyLabel { id: String, lang: String },
    NonNfc { id: String, lang: String },
    UnregisteredLanguage { id: String, lang: String },
}

impl fmt::Display for LexiconDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyLabel { id, lang } => write!(f, "empty label for ({id}, {lang})"),
            Self::NonNfc { id, lang } => write!(f, "label for ({id}, {lang}) is not NFC-normalized"),
            Self::UnregisteredLanguage { id, lang } => {
                write!(f, "label for ({id}, {lang}) uses an unregistered language")
            }
        }
    }
}

/// Checks every label of `lexicon`; one diagnostic per violation, sorted by
/// (id, language) so the output is stable.
pub fn validate_lexicon(
    lexicon: &MultilingualLexicon,
    registry: &LanguageRegistry,
) -> Vec<LexiconDiagnostic> {
    let entries = lexicon
        .entity_entries()
        .map(|(id, lang, label)| (id.as_str(), lang, label))
        .chain(
            lexicon
                .relation_entries()
                .map(|(id, lang, label)| (id.as_str(), lang, label)),
        );
    let mut sorted: Vec<_> = entries.collect();
    sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let mut out = Vec::new();
    for (id, lang, label) in sorted {
        let (id, lang_s) = (id.to_owned(), lang.to_string());
        if !registry.contains(lang) {
            out.push(LexiconDiagnostic::UnregisteredLanguage { id: id.clone(), lang: lang_s.clone() });
        }
        if label.is_empty() {
            out.push(LexiconDiagnostic::EmptyLabel { id, lang: lang_s });
        } else if !is_nfc(label) {
            out.push(LexiconDiagnostic::NonNfc { id, lang: lang_s });
        }
    }
    out
}

/// A deduplicated, insertion-ordered set of triples for one target language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    pub language: LanguageCode,
    triples: IndexSet<Triple>,
}

impl KnowledgeGraph {
    pub fn new(language: LanguageCode) -> Self {
        Self { language, triples: IndexSet::new() }
    }

    pub fn from_triples(language: LanguageCode, triples: impl IntoIterator<Item = Triple>) -> Self {
        Self { language, triples: triples.into_iter().collect() }
    }

    /// Returns false if the triple was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        self.triples.insert(triple)
    }

    pub fn triples(&self) -> impl ExactSizeIterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn heads(&self) -> BTreeSet<&EntityId> {
        self.triples.iter().map(|t| &t.head).collect()
    }

    pub fn tails(&self) -> BTreeSet<&EntityId> {
        self.triples.iter().map(|t| &t.tail).collect()
    }

    pub fn to_vec(&self) -> Vec<Triple> {
        self.triples.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Triple>,
    pub eval: Vec<Triple>,
    pub test: Vec<Triple>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.eval.len(), self.test.len())
    }
}
