//! Anchor/positive/negative triples for finetuning a dense retriever.
//!
//! The positive is the heuristic context for a question. Negatives come from
//! sentences that do not mention the tail and are sorted by what they do
//! mention: nothing (hard), only the relation (head negative), or only the
//! head (relation negative).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{EntityId, LanguageCode, MultilingualLexicon, RelationId};
use crate::reformulation::{question_mark, QAInstance};

use super::heuristic::heuristic_retrieve;
use super::PassageStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeKind {
    Hard,
    Head,
    Relation,
}

impl NegativeKind {
    pub const ALL: [NegativeKind; 3] = [Self::Hard, Self::Head, Self::Relation];
}

/// Surface forms the category predicates test for, all in the question
/// language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceForms {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl SurfaceForms {
    /// The negative category of `sentence`, or `None` if it mentions the tail
    /// or both head and relation.
    pub fn classify(&self, sentence: &str) -> Option<NegativeKind> {
        if sentence.contains(&self.tail) {
            return None;
        }
        match (sentence.contains(&self.head), sentence.contains(&self.relation)) {
            (false, false) => Some(NegativeKind::Hard),
            (false, true) => Some(NegativeKind::Head),
            (true, false) => Some(NegativeKind::Relation),
            (true, true) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveExample {
    pub anchor: String,
    pub positive: String,
    pub negatives: BTreeMap<NegativeKind, String>,
    pub surface: SurfaceForms,
}

impl ContrastiveExample {
    /// Re-evaluates every category predicate; returns the violated ones.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.positive.contains(&self.surface.tail) {
            out.push("positive does not contain the tail".to_owned());
        }
        for (kind, sentence) in &self.negatives {
            if self.surface.classify(sentence) != Some(*kind) {
                out.push(format!("{kind:?} negative fails its predicate: {sentence:?}"));
            }
        }
        out
    }

    pub fn to_record(&self) -> ContrastiveRecord {
        ContrastiveRecord {
            anchor: self.anchor.clone(),
            positive: self.positive.clone(),
            hard_negative: self.negatives.get(&NegativeKind::Hard).cloned(),
            head_negative: self.negatives.get(&NegativeKind::Head).cloned(),
            relation_negative: self.negatives.get(&NegativeKind::Relation).cloned(),
        }
    }
}

/// Export line consumed by retriever finetuning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastiveRecord {
    pub anchor: String,
    pub positive: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_negative: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_negative: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_negative: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastiveSkip {
    pub head_id: EntityId,
    pub relation_id: RelationId,
    pub tail_id: EntityId,
    pub q_lang: LanguageCode,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ContrastiveOutput {
    pub examples: Vec<ContrastiveExample>,
    /// Instances that produced no example.
    pub skipped: Vec<ContrastiveSkip>,
    /// Examples that lack one negative category.
    pub missing_slots: Vec<ContrastiveSkip>,
}

/// Mines one positive and at most one negative per category for each
/// instance. The head's own article is searched first, then the other
/// articles of the language in doc-id order.
pub fn build_contrastive_dataset(
    qa: &[QAInstance],
    passages: &PassageStore,
    lexicon: &MultilingualLexicon,
) -> ContrastiveOutput {
    let mut by_language: HashMap<&LanguageCode, Vec<&super::Passage>> = HashMap::new();
    for p in passages.iter() {
        by_language.entry(&p.language).or_default().push(p);
    }
    for list in by_language.values_mut() {
        list.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    }

    let mut out = ContrastiveOutput::default();
    for inst in qa {
        let lang = &inst.question_language;
        let t = &inst.triple;
        let skip = |reason: &str| ContrastiveSkip {
            head_id: t.head.clone(),
            relation_id: t.relation.clone(),
            tail_id: t.tail.clone(),
            q_lang: lang.clone(),
            reason: reason.to_owned(),
        };
        let surface = match (
            lexicon.entity(&t.head, lang),
            lexicon.relation(&t.relation, lang),
            lexicon.entity(&t.tail, lang),
        ) {
            (Some(h), Some(r), Some(tl)) => SurfaceForms { head: h.to_owned(), relation: r.to_owned(), tail: tl.to_owned() },
            _ => {
                out.skipped.push(skip("missing label in question language"));
                continue;
            }
        };
        let Some(positive) = heuristic_retrieve(t, lexicon, passages, lang) else {
            out.skipped.push(skip("no heuristic context"));
            continue;
        };

        let own = passages.for_head(&t.head, lang);
        let others = by_language
            .get(lang)
            .into_iter()
            .flatten()
            .filter(|p| own.is_none_or(|o| o.doc_id != p.doc_id));
        let mut negatives = BTreeMap::new();
        'scan: for p in own.into_iter().chain(others.copied()) {
            for s in &p.sentences {
                if let Some(kind) = surface.classify(s) {
                    negatives.entry(kind).or_insert_with(|| s.clone());
                    if negatives.len() == NegativeKind::ALL.len() {
                        break 'scan;
                    }
                }
            }
        }
        for kind in NegativeKind::ALL {
            if !negatives.contains_key(&kind) {
                out.missing_slots.push(skip(&format!("no {kind:?} negative").to_lowercase()));
            }
        }
        let mut anchor = inst.question_text.clone();
        anchor.push(question_mark(lang));
        out.examples.push(ContrastiveExample { anchor, positive: positive.text(), negatives, surface });
    }
    out
}
