//! Final-answer extraction from free text.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{LlmError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedAnswer {
    pub raw_text: String,
    pub answer: String,
    /// Character offsets `[start, end)` of the matched marker in `raw_text`.
    pub span: (usize, usize),
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\{\s*final\s+answer\s*:([^{}]*)\}").expect("static regex"))
}

/// Returns the payload of the last `{final answer: ...}` marker, trimmed.
pub fn extract_final_answer(raw_text: &str) -> Result<ExtractedAnswer> {
    let Some(caps) = marker().captures_iter(raw_text).last() else {
        return Err(LlmError::Extraction("no final-answer marker".into()));
    };
    let whole = caps.get(0).expect("group 0");
    let answer = caps[1].trim();
    if answer.is_empty() {
        return Err(LlmError::Extraction("final-answer marker is empty".into()));
    }
    let start = raw_text[..whole.start()].chars().count();
    let len = whole.as_str().chars().count();
    Ok(ExtractedAnswer {
        raw_text: raw_text.to_string(),
        answer: answer.to_string(),
        span: (start, start + len),
    })
}

/// Key under which two answers count as the same vote: the trimmed text, with
/// parenthesised single letters upper-cased so `(b)` and `(B)` agree.
pub fn answer_key(answer: &str) -> String {
    let t = answer.trim();
    let b = t.as_bytes();
    if b.len() == 3 && b[0] == b'(' && b[2] == b')' && b[1].is_ascii_alphabetic() {
        t.to_ascii_uppercase()
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_examples() {
        assert_eq!(extract_final_answer("…reasoning… {final answer: (A)}").unwrap().answer, "(A)");
        assert_eq!(extract_final_answer("{final answer: 12.34}").unwrap().answer, "12.34");
        assert!(matches!(
            extract_final_answer("I think the answer is 7."),
            Err(LlmError::Extraction(_))
        ));
    }

    #[test]
    fn last_marker_wins_and_span_is_in_chars() {
        let text = "Format: {final answer: 12.34}. Work… then {Final  Answer :  42 }";
        let e = extract_final_answer(text).unwrap();
        assert_eq!(e.answer, "42");
        let marked: String = text.chars().skip(e.span.0).take(e.span.1 - e.span.0).collect();
        assert_eq!(marked, "{Final  Answer :  42 }");
    }

    #[test]
    fn empty_payload_is_an_error() {
        assert!(extract_final_answer("{final answer:   }").is_err());
    }

    #[test]
    fn keys() {
        assert_eq!(answer_key(" (b) "), "(B)");
        assert_eq!(answer_key("12.34"), "12.34");
        assert_ne!(answer_key("Yes"), answer_key("yes"));
    }
}
