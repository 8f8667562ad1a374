//! Deterministic generator used for pipeline tests and upper-bound studies.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;
use std::sync::Arc;

use crate::model::{LanguageCode, MultilingualLexicon};
use crate::reformulation::parse_prompt;

use super::{Candidate, GenerationError, GenerationRequest, Generator};

/// Returned when the oracle has nothing to extract. Never a real label.
pub const NO_ANSWER: &str = "<no-answer>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    ContextExtraction,
    AnswerTable,
}

impl FromStr for OracleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "context_extraction" => Ok(Self::ContextExtraction),
            "answer_table" => Ok(Self::AnswerTable),
            other => Err(format!("unknown oracle mode {other:?} (expected context_extraction or answer_table)")),
        }
    }
}

pub struct OracleGenerator {
    mode: OracleMode,
    /// Per language: labels, longest first, then lexical.
    labels: BTreeMap<LanguageCode, Vec<String>>,
    answers: Arc<HashMap<String, String>>,
}

impl OracleGenerator {
    /// Answers with every entity label of the answer language found in the
    /// context, longest first. Labels that also occur in the question (the
    /// head, typically) are skipped: copying the question back is never the
    /// answer.
    pub fn context_extraction(lexicon: &MultilingualLexicon) -> Self {
        let mut labels: BTreeMap<LanguageCode, Vec<String>> = BTreeMap::new();
        for (_, lang, label) in lexicon.entity_entries() {
            labels.entry(lang.clone()).or_default().push(label.to_owned());
        }
        for list in labels.values_mut() {
            list.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
            list.dedup();
        }
        Self { mode: OracleMode::ContextExtraction, labels, answers: Arc::default() }
    }

    /// Answers with the gold stored under the request's item key.
    pub fn answer_table(answers: Arc<HashMap<String, String>>) -> Self {
        Self { mode: OracleMode::AnswerTable, labels: BTreeMap::new(), answers }
    }

    fn dummy() -> Vec<Candidate> {
        vec![Candidate::new(NO_ANSWER, 0.0)]
    }
}

impl Generator for OracleGenerator {
    fn name(&self) -> String {
        match self.mode {
            OracleMode::ContextExtraction => "oracle:context_extraction".into(),
            OracleMode::AnswerTable => "oracle:answer_table".into(),
        }
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<Candidate>, GenerationError> {
        let parsed = parse_prompt(&request.prompt.text)
            .map_err(|e| GenerationError::protocol(e.to_string(), &request.prompt.text))?;
        match self.mode {
            OracleMode::AnswerTable => Ok(request
                .item_key
                .as_ref()
                .and_then(|k| self.answers.get(k))
                .map(|gold| vec![Candidate::new(gold.clone(), 0.0)])
                .unwrap_or_else(Self::dummy)),
            OracleMode::ContextExtraction => {
                let Some((_, context)) = parsed.context else {
                    return Ok(Self::dummy());
                };
                let found: Vec<Candidate> = self
                    .labels
                    .get(&parsed.answer_language)
                    .into_iter()
                    .flatten()
                    .filter(|l| context.contains(l.as_str()) && !parsed.question.contains(l.as_str()))
                    .take(request.beam_size)
                    .map(|l| Candidate::new(l.clone(), l.chars().count() as f64))
                    .collect();
                Ok(if found.is_empty() { Self::dummy() } else { found })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::generate;
    use crate::model::EntityId;
    use crate::reformulation::PromptSequence;

    fn lexicon() -> MultilingualLexicon {
        let eng = LanguageCode::new("eng").unwrap();
        let mut lex = MultilingualLexicon::new();
        for (id, label) in [("Q1", "Surafel Dagnachew"), ("Q2", "Ethiopia"), ("Q3", "Addis Ababa"), ("Q4", "Addis")] {
            lex.insert_entity(EntityId::new(id).unwrap(), eng.clone(), label);
        }
        lex
    }

    fn request(text: &str) -> GenerationRequest {
        GenerationRequest::new(PromptSequence { text: text.into(), has_context: text.starts_with("[C-") }, 10, 10)
            .unwrap()
    }

    #[test]
    fn extracts_longest_label_first() {
        let oracle = OracleGenerator::context_extraction(&lexicon());
        let out = generate(
            &oracle,
            &request("[C-eng]Surafel Dagnachew was born in Addis Ababa, Ethiopia. | [Q-eng]Where was Surafel Dagnachew born? [A-eng]"),
        )
        .unwrap();
        assert_eq!(out.texts().collect::<Vec<_>>(), ["Addis Ababa", "Ethiopia", "Addis"]);
    }

    #[test]
    fn no_context_is_a_miss() {
        let oracle = OracleGenerator::context_extraction(&lexicon());
        let out = generate(&oracle, &request("[Q-eng]Where was Surafel Dagnachew born? [A-eng]")).unwrap();
        assert_eq!(out.texts().collect::<Vec<_>>(), [NO_ANSWER]);
    }

    #[test]
    fn answer_table_uses_item_key() {
        let answers = Arc::new(HashMap::from([("test:0".to_owned(), "Ethiopia".to_owned())]));
        let oracle = OracleGenerator::answer_table(answers);
        let req = request("[Q-eng]Where? [A-eng]").with_key("test:0");
        assert_eq!(generate(&oracle, &req).unwrap().candidates[0].text, "Ethiopia");
        let req = request("[Q-eng]Where? [A-eng]").with_key("test:1");
        assert_eq!(generate(&oracle, &req).unwrap().candidates[0].text, NO_ANSWER);
    }

    #[test]
    fn unparseable_prompt_is_protocol_error() {
        let oracle = OracleGenerator::context_extraction(&lexicon());
        assert!(matches!(
            oracle.generate(&request("predict tail: a | b")),
            Err(GenerationError::Protocol { .. })
        ));
    }
}
