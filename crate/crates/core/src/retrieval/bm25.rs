//! Okapi BM25 over a per-language inverted index.
//!
//! score(d, q) = Σ_{t ∈ q} idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//!
//! Query terms are deduplicated before scoring.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::LanguageCode;

use super::text::tokenize;
use super::{Passage, PassageStore, RetrievalError, RetrievedContext, RetrieverKind, MAX_CONTEXT_SENTENCES};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

pub fn idf(doc_freq: usize, doc_count: usize) -> f64 {
    let (n, df) = (doc_count as f64, doc_freq as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Position of the document in [`CorpusIndex::doc_ids`].
    pub doc: u32,
    pub tf: u32,
}

/// Sealed inverted index for one language. Immutable after [`build_index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub format_version: u32,
    pub language: LanguageCode,
    pub params: Bm25Params,
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<u32>,
    pub doc_count: usize,
    pub avg_doc_length: f64,
    pub postings: BTreeMap<String, Vec<Posting>>,
}

/// Indexes the full text of every passage, in input order.
pub fn build_index(
    passages: &[&Passage],
    language: &LanguageCode,
    params: Bm25Params,
) -> Result<CorpusIndex, RetrievalError> {
    let mut seen = HashSet::new();
    let mut doc_ids = Vec::with_capacity(passages.len());
    let mut doc_lengths = Vec::with_capacity(passages.len());
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    for (doc, p) in passages.iter().enumerate() {
        if &p.language != language {
            return Err(RetrievalError::LanguageMismatch {
                doc_id: p.doc_id.clone(),
                expected: language.clone(),
                found: p.language.clone(),
            });
        }
        if !seen.insert(p.doc_id.as_str()) {
            return Err(RetrievalError::DuplicateDoc(p.doc_id.clone()));
        }
        let terms = tokenize(&p.text, language);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in &terms {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting { doc: doc as u32, tf });
        }
        doc_ids.push(p.doc_id.clone());
        doc_lengths.push(terms.len() as u32);
    }
    let doc_count = doc_ids.len();
    let avg_doc_length = if doc_count == 0 {
        0.0
    } else {
        doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_count as f64
    };
    Ok(CorpusIndex {
        format_version: INDEX_FORMAT_VERSION,
        language: language.clone(),
        params,
        doc_ids,
        doc_lengths,
        doc_count,
        avg_doc_length,
        postings,
    })
}

impl CorpusIndex {
    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let json = serde_json::to_string(self).expect("index serializes");
        fs::write(path, json).map_err(|source| RetrievalError::Io { path: path.to_owned(), source })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(path).map_err(|source| RetrievalError::Io { path: path.to_owned(), source })?;
        let index: Self = serde_json::from_str(&text).map_err(|e| RetrievalError::MalformedStore {
            path: path.to_owned(),
            line: 1,
            reason: e.to_string(),
        })?;
        if index.format_version != INDEX_FORMAT_VERSION {
            return Err(RetrievalError::IndexVersion {
                path: path.to_owned(),
                found: index.format_version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        Ok(index)
    }
}

/// Top-`k` documents with positive score, best first; ties go to the
/// smaller doc id.
pub fn bm25_retrieve(index: &CorpusIndex, query: &str, k: usize) -> Vec<(String, f64)> {
    if index.doc_count == 0 || k == 0 {
        return Vec::new();
    }
    let terms: BTreeSet<String> = tokenize(query, &index.language).into_iter().collect();
    let Bm25Params { k1, b } = index.params;
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for term in &terms {
        let Some(list) = index.postings.get(term) else { continue };
        let w = idf(list.len(), index.doc_count);
        for posting in list {
            let tf = posting.tf as f64;
            let dl = index.doc_lengths[posting.doc as usize] as f64;
            let norm = k1 * (1.0 - b + b * dl / index.avg_doc_length);
            *scores.entry(posting.doc).or_default() += w * tf * (k1 + 1.0) / (tf + norm);
        }
    }
    let mut ranked: Vec<(String, f64)> = scores
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(d, s)| (index.doc_ids[d as usize].clone(), s))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Takes the best document and keeps up to two of its sentences with the
/// largest number of distinct query terms (ties by document order).
pub fn bm25_context(
    index: &CorpusIndex,
    passages: &PassageStore,
    query: &str,
) -> Option<RetrievedContext> {
    let (doc_id, score) = bm25_retrieve(index, query, 1).into_iter().next()?;
    let passage = passages.get(&doc_id)?;
    let query_terms: BTreeSet<String> = tokenize(query, &index.language).into_iter().collect();
    let mut scored: Vec<(usize, usize)> = passage
        .sentences
        .iter()
        .enumerate()
        .map(|(pos, s)| {
            let terms: BTreeSet<String> = tokenize(s, &index.language).into_iter().collect();
            (pos, terms.intersection(&query_terms).count())
        })
        .filter(|&(_, overlap)| overlap > 0)
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let sentences: Vec<String> = scored
        .iter()
        .take(MAX_CONTEXT_SENTENCES)
        .map(|&(pos, _)| passage.sentences[pos].clone())
        .collect();
    if sentences.is_empty() {
        return None;
    }
    Some(RetrievedContext {
        sentences,
        source_doc: doc_id,
        retriever: RetrieverKind::Bm25,
        score,
        language: index.language.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntityId;

    fn eng() -> LanguageCode {
        LanguageCode::new("eng").unwrap()
    }

    fn passages(docs: &[(&str, &str)]) -> Vec<Passage> {
        docs.iter()
            .enumerate()
            .map(|(i, (id, text))| {
                Passage::new(*id, EntityId::new(&format!("Q{}", i + 1)).unwrap(), eng(), "", text)
            })
            .collect()
    }

    fn index(docs: &[(&str, &str)]) -> CorpusIndex {
        let ps = passages(docs);
        build_index(&ps.iter().collect::<Vec<_>>(), &eng(), Bm25Params::default()).unwrap()
    }

    #[test]
    fn single_doc_postings() {
        let idx = index(&[("d", "a a b")]);
        assert_eq!(idx.postings["a"], vec![Posting { doc: 0, tf: 2 }]);
        assert_eq!(idx.postings["b"], vec![Posting { doc: 0, tf: 1 }]);
        assert_eq!(idx.doc_lengths, vec![3]);
        assert_eq!(idx.avg_doc_length, 3.0);
    }

    #[test]
    fn empty_index() {
        let idx = index(&[]);
        assert_eq!(idx.doc_count, 0);
        assert!(bm25_retrieve(&idx, "anything", 5).is_empty());
    }

    #[test]
    fn absent_term_and_single_match() {
        let idx = index(&[("d1", "a b a"), ("d2", "b c"), ("d3", "c c c")]);
        assert!(bm25_retrieve(&idx, "zzz", 3).is_empty());
        let hits = bm25_retrieve(&idx, "a", 3);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, "d1");
    }

    #[test]
    fn hand_computed_score() {
        // N=3, avgdl=8/3; query "a": df=1, idf=ln(1+2.5/1.5)=ln(8/3)
        // d1: tf=2, dl=3 → 2·2.5 / (2 + 1.5·(0.25 + 0.75·3/(8/3)))
        let idx = index(&[("d1", "a b a"), ("d2", "b c"), ("d3", "c c c")]);
        let expected = (8.0f64 / 3.0).ln() * 5.0 / (2.0 + 1.5 * (0.25 + 0.75 * 9.0 / 8.0));
        let hits = bm25_retrieve(&idx, "a", 1);
        assert!((hits[0].1 - expected).abs() < 1e-12);
    }

    #[test]
    fn duplicate_doc_rejected() {
        let ps = passages(&[("d", "x"), ("d", "y")]);
        let err = build_index(&ps.iter().collect::<Vec<_>>(), &eng(), Bm25Params::default()).unwrap_err();
        assert!(matches!(err, RetrievalError::DuplicateDoc(_)));
    }

    #[test]
    fn context_prefers_overlap() {
        let ps = passages(&[(
            "d1",
            "Nothing here. Surafel was born in Addis. Surafel birth place Addis Ababa. Born.",
        )]);
        let store = PassageStore::from_passages(ps.clone()).unwrap();
        let idx = build_index(&ps.iter().collect::<Vec<_>>(), &eng(), Bm25Params::default()).unwrap();
        let ctx = bm25_context(&idx, &store, "Surafel birth place").unwrap();
        assert_eq!(ctx.sentences[0], "Surafel birth place Addis Ababa.");
        assert_eq!(ctx.sentences[1], "Surafel was born in Addis.");
        assert!(ctx.score > 0.0);
        let empty = index(&[]);
        assert!(bm25_context(&empty, &store, "Surafel").is_none());
    }

    #[test]
    fn save_load_round_trip() {
        let idx = index(&[("d1", "a b"), ("d2", "ሰላም፡ዓለም")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.json");
        idx.save(&path).unwrap();
        assert_eq!(CorpusIndex::load(&path).unwrap(), idx);
    }
}
