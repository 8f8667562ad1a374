//! Sentence segmentation, tokenization and first-paragraph extraction for
//! Latin, Arabic and Ge'ez script text.

use unicode_normalization::char::is_combining_mark;

use crate::model::LanguageCode;

/// Ethiopic full stop.
pub const ETHIOPIC_FULL_STOP: char = '።';
pub const ARABIC_QUESTION_MARK: char = '؟';

/// Marks that end a sentence wherever they occur.
fn is_hard_terminal(c: char) -> bool {
    c == ETHIOPIC_FULL_STOP || c == ARABIC_QUESTION_MARK
}

/// Marks that end a sentence only before whitespace or end of text, so that
/// `3.5` or `U.S.` stay intact.
fn is_soft_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits NFC text into sentences. Terminal marks stay with their sentence,
/// inner whitespace is collapsed to single spaces, and empty pieces are
/// dropped.
pub fn segment_sentences(text: &str, _language: &LanguageCode) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let ends = is_hard_terminal(c)
            || (is_soft_terminal(c) && chars.peek().is_none_or(|n| n.is_whitespace()));
        if ends {
            let s = collapse_whitespace(&current);
            if !s.is_empty() {
                out.push(s);
            }
            current.clear();
        }
    }
    let s = collapse_whitespace(&current);
    if !s.is_empty() {
        out.push(s);
    }
    out
}

fn is_term_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Lowercased terms split at whitespace and punctuation (including the
/// Ethiopic wordspace `፡` and comma `፣`). No stemming, no stopwords.
pub fn tokenize(text: &str, _language: &LanguageCode) -> Vec<String> {
    text.split(|c: char| !is_term_char(c))
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().flat_map(char::to_lowercase).collect())
        .collect()
}

fn is_heading(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("==") || t.starts_with('#')
}

/// Splits an article into its first paragraph and the remaining body
/// paragraphs. The first paragraph ends at the first blank line or section
/// heading; heading lines are not part of any paragraph.
pub fn split_paragraphs(text: &str) -> (String, Vec<String>) {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut first_closed = false;
    let mut first = String::new();
    let flush = |current: &mut Vec<&str>, paragraphs: &mut Vec<String>| {
        if !current.is_empty() {
            paragraphs.push(current.join("\n"));
            current.clear();
        }
    };
    for line in text.lines() {
        if line.trim().is_empty() || is_heading(line) {
            if !first_closed && !current.is_empty() {
                first = current.join("\n");
                current.clear();
                first_closed = true;
            } else if !first_closed && is_heading(line) {
                // a heading before any text closes an empty first paragraph
                first_closed = true;
            } else {
                flush(&mut current, &mut paragraphs);
            }
            continue;
        }
        current.push(line);
    }
    if !first_closed {
        first = current.join("\n");
    } else {
        flush(&mut current, &mut paragraphs);
    }
    (first, paragraphs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn any() -> LanguageCode {
        LanguageCode::new("tir").unwrap()
    }

    #[test]
    fn ethiopic_full_stops() {
        assert_eq!(segment_sentences("ሀ ለ።ሐ መ።", &any()), vec!["ሀ ለ።", "ሐ መ።"]);
    }

    #[test]
    fn mixed_marks() {
        assert_eq!(segment_sentences("a. b؟ c", &any()), vec!["a.", "b؟", "c"]);
    }

    #[test]
    fn decimals_and_inner_whitespace() {
        assert_eq!(
            segment_sentences("Pi is 3.14 roughly.\n  Next   one!  Really?", &any()),
            vec!["Pi is 3.14 roughly.", "Next one!", "Really?"]
        );
        assert!(segment_sentences("   ", &any()).is_empty());
    }

    #[test]
    fn tokenize_latin() {
        assert_eq!(tokenize("Blue, dye", &any()), vec!["blue", "dye"]);
    }

    #[test]
    fn tokenize_ethiopic_wordspace() {
        assert_eq!(tokenize("ሰላም፡ዓለም፣ሰብ", &any()), vec!["ሰላም", "ዓለም", "ሰብ"]);
    }

    #[test]
    fn tokenize_keeps_arabic_diacritics() {
        assert_eq!(tokenize("كَتَبَ، الولد", &any()), vec!["كَتَبَ", "الولد"]);
    }

    #[test]
    fn first_paragraph_stops_at_blank_line_or_heading() {
        let (first, rest) = split_paragraphs("Intro one.\nIntro two.\n\nBody.\n== History ==\nMore.");
        assert_eq!(first, "Intro one.\nIntro two.");
        assert_eq!(rest, vec!["Body.", "More."]);
        let (first, rest) = split_paragraphs("Intro.\n== H ==\nBody.");
        assert_eq!(first, "Intro.");
        assert_eq!(rest, vec!["Body."]);
        let (first, rest) = split_paragraphs("\n\nIntro.\n\nBody.");
        assert_eq!(first, "Intro.");
        assert_eq!(rest, vec!["Body."]);
    }
}
