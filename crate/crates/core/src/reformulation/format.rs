use std::collections::HashMap;

use crate::model::{EntityId, KnowledgeGraph, LanguageCode, LanguageRegistry, MultilingualLexicon};
use crate::registry::Registry;

use super::{
    kgt5_context, kgt5_verbalize, kgt5_with_context, serialize_prompt, zero_shot_prompt,
    PromptSequence, QAInstance, ReformulationError, StructuredContextMode,
};

/// What a formatter may consult besides the instance itself.
pub struct FormatResources<'a> {
    pub lexicon: &'a MultilingualLexicon,
    pub languages: &'a LanguageRegistry,
    pub kg: Option<&'a KnowledgeGraph>,
    pub descriptions: &'a HashMap<LanguageCode, HashMap<EntityId, String>>,
}

/// Turns an instance into the exact text handed to the generator.
pub trait PromptFormatter: Send + Sync {
    fn name(&self) -> &'static str;
    fn format(
        &self,
        instance: &QAInstance,
        resources: &FormatResources<'_>,
    ) -> Result<PromptSequence, ReformulationError>;
}

/// `[C-xxx]C | [Q-xxx]Q? [A-yyy]`
pub struct TaggedFormat;

impl PromptFormatter for TaggedFormat {
    fn name(&self) -> &'static str {
        "tagged"
    }

    fn format(&self, instance: &QAInstance, _: &FormatResources<'_>) -> Result<PromptSequence, ReformulationError> {
        Ok(serialize_prompt(instance))
    }
}

/// `predict tail: H | R`, optionally followed by structured context.
pub struct Kgt5Format {
    pub context: Option<StructuredContextMode>,
}

impl PromptFormatter for Kgt5Format {
    fn name(&self) -> &'static str {
        match self.context {
            None => "kgt5",
            Some(StructuredContextMode::Description) => "kgt5_description",
            Some(StructuredContextMode::OneHop) => "kgt5_one_hop",
        }
    }

    fn format(&self, instance: &QAInstance, res: &FormatResources<'_>) -> Result<PromptSequence, ReformulationError> {
        let lang = &instance.question_language;
        let base = kgt5_verbalize(&instance.triple, res.lexicon, lang)?;
        let context = self.context.and_then(|mode| {
            let empty_kg;
            let kg = match res.kg {
                Some(kg) => kg,
                None => {
                    empty_kg = KnowledgeGraph::new(lang.clone());
                    &empty_kg
                }
            };
            let empty = HashMap::new();
            let descriptions = res.descriptions.get(lang).unwrap_or(&empty);
            kgt5_context(&instance.triple, mode, descriptions, kg, res.lexicon, lang)
        });
        Ok(PromptSequence {
            text: kgt5_with_context(&base, context.as_deref()),
            has_context: context.is_some(),
        })
    }
}

/// The instruction-style probing prompt.
pub struct ZeroShotFormat;

impl PromptFormatter for ZeroShotFormat {
    fn name(&self) -> &'static str {
        "zero_shot"
    }

    fn format(&self, instance: &QAInstance, res: &FormatResources<'_>) -> Result<PromptSequence, ReformulationError> {
        let lang = &instance.question_language;
        let name = res.languages.name(lang).unwrap_or(lang.as_str());
        let prompt = zero_shot_prompt(&instance.question_text, name);
        if let Some(diag) = prompt.diagnostic {
            log::warn!("{diag} for {}", instance.triple);
        }
        Ok(PromptSequence { text: prompt.text, has_context: false })
    }
}

/// All built-in prompt formats.
pub fn format_registry() -> Registry<(), dyn PromptFormatter> {
    let mut reg: Registry<(), dyn PromptFormatter> = Registry::new("prompt format");
    let entries: [(&str, fn() -> Box<dyn PromptFormatter>); 5] = [
        ("tagged", || Box::new(TaggedFormat)),
        ("kgt5", || Box::new(Kgt5Format { context: None })),
        ("kgt5_description", || Box::new(Kgt5Format { context: Some(StructuredContextMode::Description) })),
        ("kgt5_one_hop", || Box::new(Kgt5Format { context: Some(StructuredContextMode::OneHop) })),
        ("zero_shot", || Box::new(ZeroShotFormat)),
    ];
    for (name, make) in entries {
        reg.register(name, move |_, _| Ok(make())).expect("unique built-in names");
    }
    reg
}
