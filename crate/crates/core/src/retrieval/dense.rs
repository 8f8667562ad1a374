//! Sentence-level dense retrieval behind an embedding-provider interface.

use std::cmp::Ordering;

use crate::model::LanguageCode;
use crate::registry::Registry;

use super::text::tokenize;
use super::{PassageStore, RetrievalError, RetrievedContext, RetrieverKind, MAX_CONTEXT_SENTENCES};

/// Produces fixed-dimension vectors for texts.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, String>;
}

/// Deterministic bag-of-words embedder: each term is hashed (FNV-1a) into a
/// bucket, counts are L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
    language: LanguageCode,
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension, language: LanguageCode::new("und").expect("static code") }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, String> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.dimension];
                for term in tokenize(t, &self.language) {
                    v[(fnv1a(term.as_bytes()) % self.dimension as u64) as usize] += 1.0;
                }
                normalize(&mut v);
                v
            })
            .collect())
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn embedder_registry() -> Registry<(), dyn Embedder> {
    let mut reg: Registry<(), dyn Embedder> = Registry::new("embedder");
    reg.register("hashing", |_, arg| {
        let dim = if arg.is_empty() {
            256
        } else {
            arg.parse::<usize>().map_err(|e| format!("bad dimension {arg:?}: {e}"))?
        };
        if dim == 0 {
            return Err("dimension must be positive".into());
        }
        Ok(Box::new(HashingEmbedder::new(dim)))
    })
    .expect("unique built-in names");
    reg
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHit {
    pub doc_id: String,
    pub sentence_index: usize,
    pub sentence: String,
    pub score: f64,
}

/// Pre-embedded sentences of one language.
pub struct DenseIndex {
    pub language: LanguageCode,
    entries: Vec<(String, usize, String, Vec<f64>)>,
}

impl DenseIndex {
    pub fn build(
        embedder: &dyn Embedder,
        passages: &PassageStore,
        language: &LanguageCode,
    ) -> Result<Self, RetrievalError> {
        let mut meta = Vec::new();
        for p in passages.in_language(language) {
            for (i, s) in p.sentences.iter().enumerate() {
                meta.push((p.doc_id.clone(), i, s.clone()));
            }
        }
        let texts: Vec<&str> = meta.iter().map(|(_, _, s)| s.as_str()).collect();
        let vectors = embed_checked(embedder, &texts, "<corpus>")?;
        let entries = meta
            .into_iter()
            .zip(vectors)
            .map(|((d, i, s), v)| (d, i, s, v))
            .collect();
        Ok(Self { language: language.clone(), entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn embed_checked(embedder: &dyn Embedder, texts: &[&str], what: &str) -> Result<Vec<Vec<f64>>, RetrievalError> {
    let fail = |reason: String| RetrievalError::Embedder { query: what.to_owned(), reason };
    let vectors = embedder.embed(texts).map_err(fail)?;
    if vectors.len() != texts.len() {
        return Err(fail(format!("expected {} vectors, got {}", texts.len(), vectors.len())));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != embedder.dimension()) {
        return Err(fail(format!("expected dimension {}, got {}", embedder.dimension(), v.len())));
    }
    Ok(vectors)
}

/// Ranks every indexed sentence by cosine similarity to the query; ties by
/// doc id then sentence position.
pub fn dense_retrieve(
    embedder: &dyn Embedder,
    index: &DenseIndex,
    query: &str,
    k: usize,
) -> Result<Vec<DenseHit>, RetrievalError> {
    let q = embed_checked(embedder, &[query], query)?.remove(0);
    let mut hits: Vec<DenseHit> = index
        .entries
        .iter()
        .map(|(doc_id, i, s, v)| DenseHit {
            doc_id: doc_id.clone(),
            sentence_index: *i,
            sentence: s.clone(),
            score: cosine(&q, v),
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
            .then(a.sentence_index.cmp(&b.sentence_index))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Best sentence plus the next-best sentence from the same document.
pub fn dense_context(
    embedder: &dyn Embedder,
    index: &DenseIndex,
    query: &str,
) -> Result<Option<RetrievedContext>, RetrievalError> {
    let hits = dense_retrieve(embedder, index, query, index.len())?;
    let Some(top) = hits.first().filter(|h| h.score > 0.0) else {
        return Ok(None);
    };
    let mut picked: Vec<&DenseHit> = hits
        .iter()
        .filter(|h| h.doc_id == top.doc_id && h.score > 0.0)
        .take(MAX_CONTEXT_SENTENCES)
        .collect();
    picked.sort_by_key(|h| h.sentence_index);
    Ok(Some(RetrievedContext {
        sentences: picked.iter().map(|h| h.sentence.clone()).collect(),
        source_doc: top.doc_id.clone(),
        retriever: RetrieverKind::Dense,
        score: top.score,
        language: index.language.clone(),
    }))
}
