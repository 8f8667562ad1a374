//! Triples to question/answer instances, training mixes, and the prompt
//! formats the generator consumes.

mod baseline;
mod format;
mod prompt;
mod template;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    DatasetSplit, EntityId, Gender, LanguageCode, MultilingualLexicon, RelationId, Triple,
};
use crate::retrieval::RetrievedContext;

pub use baseline::{
    context_availability, kgt5_context, kgt5_verbalize, kgt5_with_context, zero_shot_prompt,
    ContextAvailability, StructuredContextMode, ZeroShotPrompt, ONE_HOP_SEPARATOR,
};
pub use format::{
    format_registry, FormatResources, Kgt5Format, PromptFormatter, TaggedFormat, ZeroShotFormat,
};
pub use prompt::{
    parse_prompt, question_mark, serialize_prompt, ParsedPrompt, PromptParseError, PromptSequence,
    CONTEXT_SEPARATOR,
};
pub use template::{load_templates, parse_templates, RelationTemplate, TemplateSet, HEAD_PLACEHOLDER};

#[derive(Debug, Error)]
pub enum ReformulationError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("template row {row}: {reason}")]
    Template { row: usize, reason: String },
    #[error("cannot reformulate {triple} in {language}: {reason}")]
    Unreformulatable {
        triple: Triple,
        language: LanguageCode,
        reason: String,
    },
}

impl ReformulationError {
    pub(crate) fn unreformulatable(triple: &Triple, language: &LanguageCode, reason: &str) -> Self {
        Self::Unreformulatable {
            triple: triple.clone(),
            language: language.clone(),
            reason: reason.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixTag {
    NoContext,
    MonoSelf,
    MultiSelf,
    CrossLingual,
}

impl MixTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoContext => "no_context",
            Self::MonoSelf => "mono_self",
            Self::MultiSelf => "multi_self",
            Self::CrossLingual => "cross_lingual",
        }
    }

    pub fn uses_context(self) -> bool {
        self != Self::NoContext
    }
}

impl std::str::FromStr for MixTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no_context" => Ok(Self::NoContext),
            "mono_self" => Ok(Self::MonoSelf),
            "multi_self" => Ok(Self::MultiSelf),
            "cross_lingual" => Ok(Self::CrossLingual),
            other => Err(format!(
                "unknown mix {other:?} (expected no_context, mono_self, multi_self or cross_lingual)"
            )),
        }
    }
}

impl std::fmt::Display for MixTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One reformulated example.
#[derive(Debug, Clone, PartialEq)]
pub struct QAInstance {
    pub triple: Triple,
    pub question_language: LanguageCode,
    pub answer_language: LanguageCode,
    pub question_text: String,
    /// Tail label in the answer language.
    pub gold_answer: String,
    pub context: Option<RetrievedContext>,
    pub mix_tag: MixTag,
}

/// JSONL form of a [`QAInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub head_id: EntityId,
    pub relation_id: RelationId,
    pub tail_id: EntityId,
    pub q_lang: LanguageCode,
    pub a_lang: LanguageCode,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<RetrievedContext>,
    pub mix_tag: MixTag,
    /// The serialized generator input, so trainers need not re-derive it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

impl From<&QAInstance> for QaRecord {
    fn from(i: &QAInstance) -> Self {
        Self {
            head_id: i.triple.head.clone(),
            relation_id: i.triple.relation.clone(),
            tail_id: i.triple.tail.clone(),
            q_lang: i.question_language.clone(),
            a_lang: i.answer_language.clone(),
            question: i.question_text.clone(),
            answer: i.gold_answer.clone(),
            context: i.context.clone(),
            mix_tag: i.mix_tag,
            prompt: None,
        }
    }
}

impl From<QaRecord> for QAInstance {
    fn from(r: QaRecord) -> Self {
        Self {
            triple: Triple::new(r.head_id, r.relation_id, r.tail_id),
            question_language: r.q_lang,
            answer_language: r.a_lang,
            question_text: r.question,
            gold_answer: r.answer,
            context: r.context,
            mix_tag: r.mix_tag,
        }
    }
}

/// Fills the relation's template with the head label.
pub fn instantiate_question(
    triple: &Triple,
    lexicon: &MultilingualLexicon,
    templates: &TemplateSet,
    language: &LanguageCode,
    gender: Gender,
) -> Result<String, ReformulationError> {
    let head = lexicon
        .entity(&triple.head, language)
        .ok_or_else(|| ReformulationError::unreformulatable(triple, language, "missing head label"))?;
    let template = templates
        .select(&triple.relation, language, gender)
        .ok_or_else(|| ReformulationError::unreformulatable(triple, language, "missing template"))?;
    Ok(template.fill(head))
}

/// A triple that could not be turned into an instance for a language pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub head_id: EntityId,
    pub relation_id: RelationId,
    pub tail_id: EntityId,
    pub q_lang: LanguageCode,
    pub a_lang: LanguageCode,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct MixOutput {
    pub instances: Vec<QAInstance>,
    pub exclusions: Vec<Exclusion>,
}

/// (question language, answer language) pairs a mix produces per triple.
pub fn language_pairs(
    mix: MixTag,
    target: &LanguageCode,
    languages: &[LanguageCode],
) -> Vec<(LanguageCode, LanguageCode)> {
    match mix {
        MixTag::NoContext | MixTag::MonoSelf => vec![(target.clone(), target.clone())],
        MixTag::MultiSelf => languages.iter().map(|l| (l.clone(), l.clone())).collect(),
        MixTag::CrossLingual => languages
            .iter()
            .flat_map(|q| languages.iter().map(move |a| (q.clone(), a.clone())))
            .collect(),
    }
}

fn build_one(
    triple: &Triple,
    q_lang: &LanguageCode,
    a_lang: &LanguageCode,
    mix: MixTag,
    lexicon: &MultilingualLexicon,
    templates: &TemplateSet,
) -> Result<QAInstance, Exclusion> {
    let exclude = |reason: String| Exclusion {
        head_id: triple.head.clone(),
        relation_id: triple.relation.clone(),
        tail_id: triple.tail.clone(),
        q_lang: q_lang.clone(),
        a_lang: a_lang.clone(),
        reason,
    };
    let question = instantiate_question(triple, lexicon, templates, q_lang, lexicon.gender(&triple.head))
        .map_err(|e| match e {
            ReformulationError::Unreformulatable { reason, .. } => exclude(reason),
            other => exclude(other.to_string()),
        })?;
    let gold = lexicon
        .entity(&triple.tail, a_lang)
        .ok_or_else(|| exclude("missing tail label".into()))?;
    Ok(QAInstance {
        triple: triple.clone(),
        question_language: q_lang.clone(),
        answer_language: a_lang.clone(),
        question_text: question,
        gold_answer: gold.to_owned(),
        context: None,
        mix_tag: mix,
    })
}

/// Instances for every triple and language pair of the mix, ordered by
/// (triple index, pair index). Unreformulatable combinations are reported.
pub fn build_mix(
    triples: &[Triple],
    mix: MixTag,
    target: &LanguageCode,
    languages: &[LanguageCode],
    lexicon: &MultilingualLexicon,
    templates: &TemplateSet,
) -> MixOutput {
    let pairs = language_pairs(mix, target, languages);
    let per_triple: Vec<Vec<Result<QAInstance, Exclusion>>> = triples
        .par_iter()
        .map(|t| {
            pairs
                .iter()
                .map(|(q, a)| build_one(t, q, a, mix, lexicon, templates))
                .collect()
        })
        .collect();
    let mut out = MixOutput::default();
    for result in per_triple.into_iter().flatten() {
        match result {
            Ok(i) => out.instances.push(i),
            Err(e) => out.exclusions.push(e),
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SplitMix {
    pub train: MixOutput,
    pub eval: MixOutput,
    pub test: MixOutput,
}

pub fn build_split_mix(
    split: &DatasetSplit,
    mix: MixTag,
    target: &LanguageCode,
    languages: &[LanguageCode],
    lexicon: &MultilingualLexicon,
    templates: &TemplateSet,
) -> SplitMix {
    SplitMix {
        train: build_mix(&split.train, mix, target, languages, lexicon, templates),
        eval: build_mix(&split.eval, mix, target, languages, lexicon, templates),
        test: build_mix(&split.test, mix, target, languages, lexicon, templates),
    }
}
