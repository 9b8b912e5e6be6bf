//! Everything between the rules engine and a player.
//!
//! One agent interaction runs `redact -> render_prompt -> act -> extract_block
//! -> parse_payload -> validate_semantics` and ends in exactly one of: a valid
//! action, or an [`AgentError`] of a single [`AgentErrorKind`].

mod bots;
mod parse;
mod prompt;
#[cfg(feature = "remote")]
pub mod remote;
mod view;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Schema;

pub use bots::{ScriptedAgent, ScriptedKind};
pub use parse::{extract_block, interpret, parse_payload, validate_semantics, ParsedPayload, ValidatedAction};
pub use prompt::{render_prompt, PromptBundle, PromptError, TEMPLATE_KEYS};
pub use view::{redact, transcript_lines, PlayerView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentErrorKind {
    /// Network or provider failure. Retried by the client, never charged to the player.
    Transport,
    /// No usable `|||` block, or the block is not JSON.
    FormatMalformed,
    /// A required field is absent or has the wrong type.
    FormatMissingField,
    /// Well-formed but not a legal move.
    SemanticIllegal,
}

impl AgentErrorKind {
    /// Format and semantic failures consume the forfeit retry budget.
    pub fn charged_to_player(self) -> bool {
        !matches!(self, AgentErrorKind::Transport)
    }
}

impl fmt::Display for AgentErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Transport => "transport",
            Self::FormatMalformed => "format-malformed",
            Self::FormatMissingField => "format-missing-field",
            Self::SemanticIllegal => "semantic-illegal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}: {detail}")]
pub struct AgentError {
    pub kind: AgentErrorKind,
    pub detail: String,
    pub raw_output: Option<String>,
}

impl AgentError {
    pub fn new(kind: AgentErrorKind, detail: impl Into<String>) -> Self {
        Self {
            kind,
            detail: detail.into(),
            raw_output: None,
        }
    }

    pub fn with_raw(mut self, raw: &str) -> Self {
        self.raw_output = Some(raw.to_string());
        self
    }
}

/// What an agent sees when asked to act.
#[derive(Debug, Clone, Copy)]
pub struct AgentRequest<'a> {
    pub view: &'a PlayerView,
    pub prompt: &'a str,
    pub schema: Schema,
    /// 0 on the first ask, incremented on each re-ask after an invalid reply.
    pub attempt: u32,
}

/// Raw reply plus transport metadata. Scripted agents leave the metadata empty
/// so their records stay byte-reproducible.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub elapsed_ms: Option<u64>,
    pub transport_retries: u32,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub correlation_id: Option<String>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            ..Self::default()
        }
    }
}

pub trait Agent: Send {
    fn act(&mut self, request: &AgentRequest<'_>) -> Result<Completion, AgentError>;
}
