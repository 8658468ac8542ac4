//! Chat-completion agents for the debate protocol.
//!
//! * [`prompt`]: round-0 and revision prompts with the final-answer instruction.
//! * [`extract`]: `{final answer: ...}` extraction and answer equality.
//! * [`client`]: OpenAI-compatible HTTP client with bounded retries.
//! * [`mock`]: a local server speaking the same protocol, for tests and demos.
//! * [`debate`]: the simultaneous-talk protocol over real agents.

pub mod client;
pub mod debate;
mod error;
pub mod extract;
pub mod mock;
pub mod prompt;

pub use client::{AgentEndpoint, ChatClient, GenerationParams, HttpChatClient, Message, RetryPolicy, Role};
pub use debate::{run_llm_debate, DebateAborted, LlmDebateConfig, LlmDebateOutcome, LlmRound, TurnSource};
pub use error::{LlmError, Result};
pub use extract::{answer_key, extract_final_answer, ExtractedAnswer};
pub use prompt::{build_debate_prompt, AnswerFormat};
