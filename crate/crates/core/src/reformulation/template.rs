use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::model::{nfc, Gender, LanguageCode, RelationId};

use super::ReformulationError;

pub const HEAD_PLACEHOLDER: &str = "{head}";

/// A question pattern for one relation, language and gender variant.
///
/// Patterns carry no terminal question mark; it is added when the prompt is
/// serialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationTemplate {
    pub relation: RelationId,
    pub language: LanguageCode,
    pub gender: Gender,
    pub pattern: String,
}

impl RelationTemplate {
    pub fn new(
        relation: RelationId,
        language: LanguageCode,
        gender: Gender,
        pattern: &str,
    ) -> Result<Self, String> {
        let pattern = nfc(pattern.trim());
        if pattern.is_empty() {
            return Err("empty pattern".into());
        }
        match pattern.matches(HEAD_PLACEHOLDER).count() {
            1 => {}
            0 => return Err(format!("pattern {pattern:?} has no {HEAD_PLACEHOLDER} placeholder")),
            n => return Err(format!("pattern {pattern:?} has {n} {HEAD_PLACEHOLDER} placeholders")),
        }
        if pattern.contains(['?', '؟']) {
            return Err(format!("pattern {pattern:?} contains a question mark"));
        }
        Ok(Self { relation, language, gender, pattern })
    }

    pub fn fill(&self, head_label: &str) -> String {
        let (before, after) = self
            .pattern
            .split_once(HEAD_PLACEHOLDER)
            .expect("validated at construction");
        let mut out = String::with_capacity(self.pattern.len() + head_label.len());
        out.push_str(before);
        out.push_str(head_label);
        out.push_str(after);
        out
    }
}

pub type TemplateKey = (RelationId, LanguageCode, Gender);

#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateKey, RelationTemplate>,
}

impl TemplateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, template: RelationTemplate) -> Result<(), RelationTemplate> {
        let key = (template.relation.clone(), template.language.clone(), template.gender);
        if self.templates.contains_key(&key) {
            return Err(template);
        }
        self.templates.insert(key, template);
        Ok(())
    }

    pub fn get(&self, relation: &RelationId, lang: &LanguageCode, gender: Gender) -> Option<&RelationTemplate> {
        self.templates.get(&(relation.clone(), lang.clone(), gender))
    }

    /// Picks the requested variant, else neutral, else male, else female.
    pub fn select(&self, relation: &RelationId, lang: &LanguageCode, gender: Gender) -> Option<&RelationTemplate> {
        [gender, Gender::Neutral, Gender::Male, Gender::Female]
            .into_iter()
            .find_map(|g| self.get(relation, lang, g))
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationId> {
        let mut seen: Vec<&RelationId> = self.templates.keys().map(|(r, _, _)| r).collect();
        seen.dedup();
        seen.into_iter()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Reads `relation\tlang\tgender\tpattern` rows.
pub fn load_templates(path: &Path) -> Result<TemplateSet, ReformulationError> {
    let text = fs::read_to_string(path).map_err(|source| ReformulationError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_templates(&text)
}

pub fn parse_templates(text: &str) -> Result<TemplateSet, ReformulationError> {
    let mut set = TemplateSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = idx + 1;
        let bad = |reason: String| ReformulationError::Template { row, reason };
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let relation = RelationId::new(fields[0].trim()).map_err(|e| bad(e.to_string()))?;
        let language = LanguageCode::new(fields[1].trim()).map_err(|e| bad(e.to_string()))?;
        let gender: Gender = fields[2].trim().parse().map_err(bad)?;
        let template = RelationTemplate::new(relation, language, gender, fields[3]).map_err(bad)?;
        set.insert(template).map_err(|t| {
            bad(format!("duplicate template for ({}, {}, {})", t.relation, t.language, t.gender))
        })?;
    }
    Ok(set)
}
