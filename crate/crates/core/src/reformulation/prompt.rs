//! The tagged generator input:
//!
//! ```text
//! [C-xxx]<context> | [Q-xxx]<question><mark> [A-yyy]
//! [Q-xxx]<question><mark> [A-yyy]
//! ```
//!
//! `<mark>` is `؟` for Arabic questions and `?` otherwise. The answer tag
//! carries the answer language, which differs from the question language in
//! cross-lingual instances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LanguageCode;

use super::QAInstance;

pub const CONTEXT_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSequence {
    pub text: String,
    pub has_context: bool,
}

pub fn question_mark(lang: &LanguageCode) -> char {
    if lang.is_arabic() {
        '؟'
    } else {
        '?'
    }
}

fn tag(kind: char, lang: &LanguageCode) -> String {
    format!("[{kind}-{lang}]")
}

/// Serializes an instance in the tagged grammar.
pub fn serialize_prompt(instance: &QAInstance) -> PromptSequence {
    let mut text = String::new();
    if let Some(ctx) = &instance.context {
        text.push_str(&tag('C', &ctx.language));
        text.push_str(&ctx.text());
        text.push_str(CONTEXT_SEPARATOR);
    }
    text.push_str(&tag('Q', &instance.question_language));
    text.push_str(&instance.question_text);
    text.push(question_mark(&instance.question_language));
    text.push(' ');
    text.push_str(&tag('A', &instance.answer_language));
    PromptSequence { text, has_context: instance.context.is_some() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub context: Option<(LanguageCode, String)>,
    pub question: String,
    pub question_language: LanguageCode,
    pub answer_language: LanguageCode,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unparseable prompt ({reason}): {excerpt:?}")]
pub struct PromptParseError {
    pub reason: &'static str,
    pub excerpt: String,
}

fn excerpt(text: &str) -> String {
    text.chars().take(80).collect()
}

/// Reads a 7-byte `[K-xxx]` tag at the start of `s`.
fn read_tag(s: &str, kind: char) -> Option<LanguageCode> {
    let rest = s.strip_prefix('[')?.strip_prefix(kind)?.strip_prefix('-')?;
    let code = rest.get(..3)?;
    rest.get(3..)?.starts_with(']').then_some(())?;
    LanguageCode::new(code).ok()
}

/// Inverse of [`serialize_prompt`].
pub fn parse_prompt(text: &str) -> Result<ParsedPrompt, PromptParseError> {
    let err = |reason| PromptParseError { reason, excerpt: excerpt(text) };
    const TAG_LEN: usize = 7;

    let (context, rest) = if let Some(ctx_lang) = read_tag(text, 'C') {
        let body = &text[TAG_LEN..];
        let sep = body.rfind(" | [Q-").ok_or_else(|| err("context without question"))?;
        (Some((ctx_lang, body[..sep].to_owned())), &body[sep + CONTEXT_SEPARATOR.len()..])
    } else {
        (None, text)
    };

    let question_language = read_tag(rest, 'Q').ok_or_else(|| err("missing question tag"))?;
    let body = &rest[TAG_LEN..];
    let answer_at = body
        .len()
        .checked_sub(TAG_LEN + 1)
        .ok_or_else(|| err("missing answer tag"))?;
    if !body.is_char_boundary(answer_at) || !body[answer_at..].starts_with(' ') {
        return Err(err("missing space before answer tag"));
    }
    let answer_language = read_tag(&body[answer_at + 1..], 'A').ok_or_else(|| err("missing answer tag"))?;
    let question = body[..answer_at]
        .strip_suffix(question_mark(&question_language))
        .ok_or_else(|| err("question mark does not match question language"))?;
    Ok(ParsedPrompt {
        context,
        question: question.to_owned(),
        question_language,
        answer_language,
    })
}
