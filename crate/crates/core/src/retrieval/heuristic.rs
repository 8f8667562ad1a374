use crate::model::{LanguageCode, MultilingualLexicon, Triple};

use super::{PassageStore, RetrievedContext, RetrieverKind, MAX_CONTEXT_SENTENCES};

/// Looks for the tail label in the first paragraph of the head entity's
/// article and returns up to two matching sentences in document order.
///
/// This is an upper-bound context source: it knows the answer it is looking
/// for and still returns nothing when the article never mentions it.
pub fn heuristic_retrieve(
    triple: &Triple,
    lexicon: &MultilingualLexicon,
    passages: &PassageStore,
    language: &LanguageCode,
) -> Option<RetrievedContext> {
    let tail = lexicon.entity(&triple.tail, language)?;
    let passage = passages.for_head(&triple.head, language)?;
    let sentences: Vec<String> = passage
        .first_paragraph_sentences()
        .iter()
        .filter(|s| s.contains(tail))
        .take(MAX_CONTEXT_SENTENCES)
        .cloned()
        .collect();
    if sentences.is_empty() {
        return None;
    }
    Some(RetrievedContext {
        sentences,
        source_doc: passage.doc_id.clone(),
        retriever: RetrieverKind::Heuristic,
        score: 0.0,
        language: language.clone(),
    })
}
