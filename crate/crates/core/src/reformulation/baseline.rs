//! Verbalizers for the sequence-to-sequence link-prediction baselines and the
//! zero-shot probing prompt.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ingestion::percentage;
use crate::model::{EntityId, KnowledgeGraph, LanguageCode, MultilingualLexicon, Triple};

use super::ReformulationError;

/// `predict tail: <head> | <relation>`
pub fn kgt5_verbalize(
    triple: &Triple,
    lexicon: &MultilingualLexicon,
    language: &LanguageCode,
) -> Result<String, ReformulationError> {
    let head = lexicon
        .entity(&triple.head, language)
        .ok_or_else(|| ReformulationError::unreformulatable(triple, language, "missing head label"))?;
    let relation = lexicon
        .relation(&triple.relation, language)
        .ok_or_else(|| ReformulationError::unreformulatable(triple, language, "missing relation label"))?;
    Ok(format!("predict tail: {head} | {relation}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuredContextMode {
    Description,
    OneHop,
}

pub const ONE_HOP_SEPARATOR: &str = "; ";

/// Structured context for a triple: the head's description, or its other
/// outgoing edges rendered as `<relation> <tail>`.
pub fn kgt5_context(
    triple: &Triple,
    mode: StructuredContextMode,
    descriptions: &HashMap<EntityId, String>,
    kg: &KnowledgeGraph,
    lexicon: &MultilingualLexicon,
    language: &LanguageCode,
) -> Option<String> {
    match mode {
        StructuredContextMode::Description => descriptions
            .get(&triple.head)
            .map(|d| d.trim())
            .filter(|d| !d.is_empty())
            .map(str::to_owned),
        StructuredContextMode::OneHop => {
            let parts: Vec<String> = kg
                .triples()
                .filter(|t| t.head == triple.head && *t != triple)
                .filter_map(|t| {
                    let rel = lexicon.relation(&t.relation, language)?;
                    let tail = lexicon.entity(&t.tail, language)?;
                    Some(format!("{rel} {tail}"))
                })
                .collect();
            (!parts.is_empty()).then(|| parts.join(ONE_HOP_SEPARATOR))
        }
    }
}

/// `predict tail: <head> | <relation> | <context>` when context is present.
pub fn kgt5_with_context(verbalized: &str, context: Option<&str>) -> String {
    match context {
        Some(c) => format!("{verbalized} | {c}"),
        None => verbalized.to_owned(),
    }
}

const ZERO_SHOT_TEMPLATE: &str = "Please provide an answer for the following [LANGUAGE] question. \
Please keep your response to three words maximum and output the answer ONLY. \
Question: [Q] ?\n\nAnswer:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroShotPrompt {
    pub text: String,
    pub diagnostic: Option<String>,
}

pub fn zero_shot_prompt(question: &str, language_name: &str) -> ZeroShotPrompt {
    let text = ZERO_SHOT_TEMPLATE
        .replacen("[LANGUAGE]", language_name, 1)
        .replacen("[Q]", question, 1);
    let diagnostic = question.trim().is_empty().then(|| "empty question in zero-shot prompt".to_owned());
    ZeroShotPrompt { text, diagnostic }
}

/// How often structured context exists, and how often it mentions the tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAvailability {
    pub mode: StructuredContextMode,
    pub language: LanguageCode,
    pub n_triples: usize,
    pub with_context: usize,
    pub context_has_tail: usize,
    /// Share of triples that received any context.
    pub with_context_pct: f64,
    /// Share of triples whose context contains the tail label.
    pub tail_in_context_pct: f64,
}

pub fn context_availability(
    triples: &[Triple],
    mode: StructuredContextMode,
    descriptions: &HashMap<EntityId, String>,
    kg: &KnowledgeGraph,
    lexicon: &MultilingualLexicon,
    language: &LanguageCode,
) -> ContextAvailability {
    let mut with_context = 0;
    let mut context_has_tail = 0;
    for t in triples {
        if let Some(ctx) = kgt5_context(t, mode, descriptions, kg, lexicon, language) {
            with_context += 1;
            if lexicon.entity(&t.tail, language).is_some_and(|tail| ctx.contains(tail)) {
                context_has_tail += 1;
            }
        }
    }
    ContextAvailability {
        mode,
        language: language.clone(),
        n_triples: triples.len(),
        with_context,
        context_has_tail,
        with_context_pct: percentage(with_context, triples.len()),
        tail_in_context_pct: percentage(context_has_tail, triples.len()),
    }
}
