use serde::{Deserialize, Serialize};

use crate::agent::AgentErrorKind;
use crate::game::{GameState, MatchConfig, Outcome, Phase, Role, Schema, Seat, TargetCoercion, TranscriptEvent};

pub const SCHEMA_VERSION: u32 = 1;

/// One agent call: the exact prompt, the verbatim reply and what became of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallLog {
    pub seat: usize,
    pub phase: Phase,
    pub schema: Schema,
    pub attempt: u32,
    pub prompt: String,
    /// `None` when the transport never produced a reply.
    pub raw_output: Option<String>,
    pub error: Option<AgentErrorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
    #[serde(default)]
    pub transport_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
}

/// A non-spy utterance that names the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakMark {
    pub event_index: usize,
    pub seat: usize,
    /// Byte range of the match within the normalized utterance.
    pub span: (usize, usize),
    pub matched: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default)]
    pub leaks: Vec<LeakMark>,
    #[serde(default)]
    pub coercions: Vec<TargetCoercion>,
}

/// Everything analytics needs about one finished game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub schema_version: u32,
    pub ticket_id: String,
    pub config: MatchConfig,
    pub seats: Vec<Seat>,
    pub target_entity: String,
    #[serde(default)]
    pub entity_list: Vec<String>,
    pub events: Vec<TranscriptEvent>,
    #[serde(default)]
    pub calls: Vec<CallLog>,
    pub outcome: Outcome,
    #[serde(default)]
    pub annotations: Annotations,
}

impl GameRecord {
    /// Builds the record of a terminal state. Panics if the game is unfinished.
    pub fn from_state(ticket_id: impl Into<String>, state: &GameState, calls: Vec<CallLog>) -> Self {
        let outcome = state.outcome.clone().expect("record of an unfinished game");
        let target_entity = state.target_entity().to_string();
        let leaks = crate::analytics::find_leaks(&state.events, &state.seats, &target_entity);
        Self {
            schema_version: SCHEMA_VERSION,
            ticket_id: ticket_id.into(),
            config: state.config.clone(),
            seats: state.seats.clone(),
            target_entity,
            entity_list: state.pool.entities.clone(),
            events: state.events.clone(),
            calls,
            outcome,
            annotations: Annotations {
                leaks,
                coercions: state.coercions.clone(),
            },
        }
    }

    pub fn spy_seat(&self) -> Option<usize> {
        self.seats.iter().position(|s| s.role == Role::Spy)
    }

    pub fn aliases(&self) -> Vec<String> {
        self.seats.iter().map(|s| s.alias.clone()).collect()
    }

    pub fn is_self_play(&self) -> bool {
        self.config.spy_model == self.config.nonspy_model
    }
}
