use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{nfc, EntityId, IdScheme, LanguageCode};

use super::text::{segment_sentences, split_paragraphs};
use super::RetrievalError;

/// One line of the passage store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub doc_id: String,
    pub head_entity: String,
    pub lang: LanguageCode,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

/// An article about a head entity, pre-split into sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub doc_id: String,
    pub head_entity: EntityId,
    pub language: LanguageCode,
    pub title: String,
    pub text: String,
    pub first_paragraph: String,
    /// First-paragraph sentences followed by body sentences.
    pub sentences: Vec<String>,
    /// How many leading entries of `sentences` come from the first paragraph.
    pub first_paragraph_len: usize,
}

impl Passage {
    pub fn new(
        doc_id: impl Into<String>,
        head_entity: EntityId,
        language: LanguageCode,
        title: impl Into<String>,
        text: &str,
    ) -> Self {
        let text = nfc(text);
        let (first_paragraph, body) = split_paragraphs(&text);
        let mut sentences = segment_sentences(&first_paragraph, &language);
        let first_paragraph_len = sentences.len();
        for para in &body {
            sentences.extend(segment_sentences(para, &language));
        }
        Self {
            doc_id: doc_id.into(),
            head_entity,
            language,
            title: nfc(&title.into()),
            text,
            first_paragraph,
            sentences,
            first_paragraph_len,
        }
    }

    pub fn first_paragraph_sentences(&self) -> &[String] {
        &self.sentences[..self.first_paragraph_len]
    }
}

/// All passages of a run, addressable by doc id and by (head, language).
#[derive(Debug, Clone, Default)]
pub struct PassageStore {
    passages: Vec<Passage>,
    by_doc: HashMap<String, usize>,
    by_head: HashMap<(EntityId, LanguageCode), usize>,
}

impl PassageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_passages(passages: impl IntoIterator<Item = Passage>) -> Result<Self, RetrievalError> {
        let mut store = Self::new();
        for p in passages {
            store.push(p)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, passage: Passage) -> Result<(), RetrievalError> {
        if self.by_doc.contains_key(&passage.doc_id) {
            return Err(RetrievalError::DuplicateDoc(passage.doc_id));
        }
        let idx = self.passages.len();
        self.by_doc.insert(passage.doc_id.clone(), idx);
        self.by_head
            .entry((passage.head_entity.clone(), passage.language.clone()))
            .or_insert(idx);
        self.passages.push(passage);
        Ok(())
    }

    pub fn get(&self, doc_id: &str) -> Option<&Passage> {
        self.by_doc.get(doc_id).map(|&i| &self.passages[i])
    }

    /// The (first) article about `head` in `language`.
    pub fn for_head(&self, head: &EntityId, language: &LanguageCode) -> Option<&Passage> {
        self.by_head
            .get(&(head.clone(), language.clone()))
            .map(|&i| &self.passages[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Passage> {
        self.passages.iter()
    }

    pub fn in_language<'a>(&'a self, language: &'a LanguageCode) -> impl Iterator<Item = &'a Passage> + 'a {
        self.passages.iter().filter(move |p| &p.language == language)
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }
}

/// Reads a JSONL passage store (`{doc_id, head_entity, lang, title, text}`).
pub fn load_passages(path: &Path, scheme: IdScheme) -> Result<PassageStore, RetrievalError> {
    let text = fs::read_to_string(path).map_err(|source| RetrievalError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut store = PassageStore::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| RetrievalError::MalformedStore {
            path: path.to_owned(),
            line: idx + 1,
            reason,
        };
        let rec: PassageRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let head = EntityId::parse(&rec.head_entity, scheme).map_err(|e| bad(e.to_string()))?;
        store.push(Passage::new(rec.doc_id, head, rec.lang, rec.title, &rec.text))?;
    }
    Ok(store)
}
