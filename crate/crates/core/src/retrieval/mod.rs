//! Context sources for the generator and the contrastive data builder.
//!
//! Every retriever implements [`Retriever`] and is registered by name in
//! [`retriever_registry`]: `none`, `heuristic`, `bm25`, `dense[:embedder]`.

mod bm25;
mod contrastive;
mod dense;
mod heuristic;
mod passage;
pub mod text;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LanguageCode, MultilingualLexicon, Triple};
use crate::registry::Registry;

pub use bm25::{
    bm25_context, bm25_retrieve, build_index, idf, Bm25Params, CorpusIndex, Posting,
    INDEX_FORMAT_VERSION,
};
pub use contrastive::{
    build_contrastive_dataset, ContrastiveExample, ContrastiveOutput, ContrastiveRecord,
    ContrastiveSkip, NegativeKind, SurfaceForms,
};
pub use dense::{
    cosine, dense_context, dense_retrieve, embedder_registry, DenseHit, DenseIndex, Embedder,
    HashingEmbedder,
};
pub use heuristic::heuristic_retrieve;
pub use passage::{load_passages, Passage, PassageRecord, PassageStore};
pub use text::{segment_sentences, split_paragraphs, tokenize};

pub const MAX_CONTEXT_SENTENCES: usize = 2;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedStore { path: PathBuf, line: usize, reason: String },
    #[error("duplicate doc id {0:?}")]
    DuplicateDoc(String),
    #[error("document {doc_id:?} is in {found}, index is for {expected}")]
    LanguageMismatch {
        doc_id: String,
        expected: LanguageCode,
        found: LanguageCode,
    },
    #[error("{path}: index format version {found}, expected {expected}")]
    IndexVersion { path: PathBuf, found: u32, expected: u32 },
    #[error("no index for language {0}")]
    MissingIndex(LanguageCode),
    #[error("embedder failed for query {query:?}: {reason}")]
    Embedder { query: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    Heuristic,
    Bm25,
    Dense,
}

/// At most two sentences of supporting text from one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub sentences: Vec<String>,
    pub source_doc: String,
    pub retriever: RetrieverKind,
    pub score: f64,
    pub language: LanguageCode,
}

impl RetrievedContext {
    /// Sentences joined by a single space, as placed in prompts.
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

/// What a retriever sees for one question.
#[derive(Debug, Clone, Copy)]
pub struct RetrievalQuery<'a> {
    pub triple: &'a Triple,
    pub question: &'a str,
    pub language: &'a LanguageCode,
}

pub trait Retriever: Send + Sync {
    fn name(&self) -> &'static str;
    fn retrieve(&self, query: &RetrievalQuery<'_>) -> Result<Option<RetrievedContext>, RetrievalError>;
}

/// Shared inputs retriever factories draw on.
#[derive(Clone, Default)]
pub struct RetrieverResources {
    pub lexicon: Arc<MultilingualLexicon>,
    pub passages: Arc<PassageStore>,
    pub indexes: BTreeMap<LanguageCode, Arc<CorpusIndex>>,
}

pub struct NoRetriever;

impl Retriever for NoRetriever {
    fn name(&self) -> &'static str {
        "none"
    }
    fn retrieve(&self, _: &RetrievalQuery<'_>) -> Result<Option<RetrievedContext>, RetrievalError> {
        Ok(None)
    }
}

pub struct HeuristicRetriever {
    lexicon: Arc<MultilingualLexicon>,
    passages: Arc<PassageStore>,
}

impl Retriever for HeuristicRetriever {
    fn name(&self) -> &'static str {
        "heuristic"
    }
    fn retrieve(&self, q: &RetrievalQuery<'_>) -> Result<Option<RetrievedContext>, RetrievalError> {
        Ok(heuristic_retrieve(q.triple, &self.lexicon, &self.passages, q.language))
    }
}

pub struct Bm25Retriever {
    indexes: BTreeMap<LanguageCode, Arc<CorpusIndex>>,
    passages: Arc<PassageStore>,
}

impl Retriever for Bm25Retriever {
    fn name(&self) -> &'static str {
        "bm25"
    }
    fn retrieve(&self, q: &RetrievalQuery<'_>) -> Result<Option<RetrievedContext>, RetrievalError> {
        let index = self
            .indexes
            .get(q.language)
            .ok_or_else(|| RetrievalError::MissingIndex(q.language.clone()))?;
        Ok(bm25_context(index, &self.passages, q.question))
    }
}

pub struct DenseRetriever {
    embedder: Box<dyn Embedder>,
    indexes: BTreeMap<LanguageCode, DenseIndex>,
}

impl DenseRetriever {
    pub fn new(embedder: Box<dyn Embedder>, passages: &PassageStore) -> Result<Self, RetrievalError> {
        let mut indexes = BTreeMap::new();
        let languages: std::collections::BTreeSet<_> = passages.iter().map(|p| p.language.clone()).collect();
        for lang in languages {
            let idx = DenseIndex::build(embedder.as_ref(), passages, &lang)?;
            indexes.insert(lang, idx);
        }
        Ok(Self { embedder, indexes })
    }
}

impl Retriever for DenseRetriever {
    fn name(&self) -> &'static str {
        "dense"
    }
    fn retrieve(&self, q: &RetrievalQuery<'_>) -> Result<Option<RetrievedContext>, RetrievalError> {
        match self.indexes.get(q.language) {
            Some(index) => dense_context(self.embedder.as_ref(), index, q.question),
            None => Ok(None),
        }
    }
}

pub fn retriever_registry() -> Registry<RetrieverResources, dyn Retriever> {
    let mut reg: Registry<RetrieverResources, dyn Retriever> = Registry::new("retriever");
    reg.register("none", |_, _| Ok(Box::new(NoRetriever))).expect("unique");
    reg.register("heuristic", |res, _| {
        Ok(Box::new(HeuristicRetriever {
            lexicon: Arc::clone(&res.lexicon),
            passages: Arc::clone(&res.passages),
        }))
    })
    .expect("unique");
    reg.register("bm25", |res, _| {
        Ok(Box::new(Bm25Retriever {
            indexes: res.indexes.clone(),
            passages: Arc::clone(&res.passages),
        }))
    })
    .expect("unique");
    reg.register("dense", |res, arg| {
        let selector = if arg.is_empty() { "hashing" } else { arg };
        let embedder = embedder_registry().build(selector, &()).map_err(|e| e.to_string())?;
        Ok(Box::new(DenseRetriever::new(embedder, &res.passages).map_err(|e| e.to_string())?))
    })
    .expect("unique");
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityId, RelationId};

    #[test]
    fn registry_dispatch() {
        let eng = LanguageCode::new("eng").unwrap();
        let head = EntityId::new("Q1").unwrap();
        let tail = EntityId::new("Q2").unwrap();
        let mut lex = MultilingualLexicon::new();
        lex.insert_entity(tail.clone(), eng.clone(), "Ethiopia");
        let passages = PassageStore::from_passages([Passage::new(
            "d1",
            head.clone(),
            eng.clone(),
            "",
            "He was born in Ethiopia. He plays football.",
        )])
        .unwrap();
        let index = build_index(&passages.iter().collect::<Vec<_>>(), &eng, Bm25Params::default()).unwrap();
        let res = RetrieverResources {
            lexicon: Arc::new(lex),
            passages: Arc::new(passages),
            indexes: BTreeMap::from([(eng.clone(), Arc::new(index))]),
        };
        let triple = Triple::new(head, RelationId::new("P19").unwrap(), tail);
        let query = RetrievalQuery { triple: &triple, question: "where was he born", language: &eng };
        let reg = retriever_registry();

        assert!(reg.build("none", &res).unwrap().retrieve(&query).unwrap().is_none());
        let h = reg.build("heuristic", &res).unwrap().retrieve(&query).unwrap().unwrap();
        assert_eq!(h.sentences, ["He was born in Ethiopia."]);
        let b = reg.build("bm25", &res).unwrap().retrieve(&query).unwrap().unwrap();
        assert_eq!(b.retriever, RetrieverKind::Bm25);
        assert_eq!(b.sentences[0], "He was born in Ethiopia.");
        let d = reg.build("dense:hashing:64", &res).unwrap().retrieve(&query).unwrap().unwrap();
        assert_eq!(d.retriever, RetrieverKind::Dense);

        let amh = LanguageCode::new("amh").unwrap();
        let q2 = RetrievalQuery { language: &amh, ..query };
        assert!(matches!(
            reg.build("bm25", &res).unwrap().retrieve(&q2),
            Err(RetrievalError::MissingIndex(_))
        ));
    }
}
