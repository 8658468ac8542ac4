//! Debate prompt templates.

use serde::{Deserialize, Serialize};

use crate::error::{LlmError, Result};

/// Example payload shown in the final-answer instruction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormat {
    /// `12.34`
    #[default]
    Decimal,
    /// `123`, for grade-school arithmetic.
    Integer,
    /// `(A)`, for multiple choice.
    Choice,
    Custom(String),
}

impl AnswerFormat {
    pub fn example(&self) -> &str {
        match self {
            Self::Decimal => "12.34",
            Self::Integer => "123",
            Self::Choice => "(A)",
            Self::Custom(s) => s,
        }
    }

    /// Parses `decimal`, `integer`, `choice`/`mcq`, or uses the text as a custom example.
    pub fn from_hint(hint: &str) -> Self {
        match hint.trim().to_ascii_lowercase().as_str() {
            "" | "decimal" => Self::Decimal,
            "integer" | "gsm8k" => Self::Integer,
            "choice" | "mcq" => Self::Choice,
            _ => Self::Custom(hint.trim().to_string()),
        }
    }
}

pub const PEER_HEADER: &str = "These are the recent opinions from other agents: ";
pub const PEER_PREFIX: &str = "One of the agents' response: ";
pub const OWN_PREFIX: &str = "This was your most recent opinion:";
pub const REVISE: &str = "Use these opinions carefully as additional advice to revise your recent opinion to give your final answer to the question:";

pub fn final_answer_instruction(format: &AnswerFormat) -> String {
    format!(
        "Make sure to state your final answer in curly brackets at the very end of your response, just like: \"{{final answer: {}}}\".",
        format.example()
    )
}

/// Builds the user prompt for one agent.
///
/// Round 0 (`own_prev` absent, no peers) is the question followed by the
/// final-answer instruction. Later rounds list each peer answer, then the
/// agent's own previous answer, then the revision instruction and question.
/// Peers are given in ascending agent order by the caller.
pub fn build_debate_prompt(
    question: &str,
    own_prev: Option<&str>,
    peer_prevs: &[&str],
    format: &AnswerFormat,
) -> Result<String> {
    if question.trim().is_empty() {
        return Err(LlmError::Parameter("question is empty".into()));
    }
    let instruction = final_answer_instruction(format);
    let Some(own) = own_prev else {
        if !peer_prevs.is_empty() {
            return Err(LlmError::Parameter(
                "peer responses supplied without the agent's own previous response".into(),
            ));
        }
        return Ok(format!("{question}\n\n{instruction}"));
    };

    let mut out = String::new();
    if !peer_prevs.is_empty() {
        out.push_str(PEER_HEADER);
        out.push_str("\n\n");
        for peer in peer_prevs {
            out.push_str(PEER_PREFIX);
            out.push('\n');
            out.push_str(peer);
            out.push_str("\n\n");
        }
    }
    out.push_str(OWN_PREFIX);
    out.push('\n');
    out.push_str(own);
    out.push_str("\n\n");
    out.push_str(REVISE);
    out.push('\n');
    out.push_str(question);
    out.push_str("\n\n");
    out.push_str(&instruction);
    Ok(out)
}
