use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::view::PlayerView;
use super::{AgentError, AgentErrorKind};
use crate::game::{Schema, SpyGuessInput, VoteInput};

const DELIMITER: &str = "|||";

/// Returns the content of the last `|||`-delimited block.
///
/// Delimiters pair up left to right; an odd count means some block never
/// closed and the output is rejected.
pub fn extract_block(raw: &str) -> Result<&str, AgentError> {
    let positions: Vec<usize> = raw.match_indices(DELIMITER).map(|(i, _)| i).collect();
    if positions.is_empty() {
        return Err(AgentError::new(AgentErrorKind::FormatMalformed, "no |||...||| block").with_raw(raw));
    }
    if !positions.len().is_multiple_of(2) {
        return Err(AgentError::new(
            AgentErrorKind::FormatMalformed,
            format!("unbalanced ||| delimiters ({} found)", positions.len()),
        )
        .with_raw(raw));
    }
    let open = positions[positions.len() - 2] + DELIMITER.len();
    let close = positions[positions.len() - 1];
    Ok(raw[open..close].trim())
}

/// One decoded response, field-for-field as the templates require.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schema")]
pub enum ParsedPayload {
    Question {
        question: String,
        targeted_player: String,
    },
    Answer {
        answer: String,
    },
    Guess {
        best_guess: Option<String>,
        should_guess: bool,
        confidence: f64,
    },
    Vote {
        target_player_name: Option<String>,
        should_vote: bool,
        confidence: f64,
    },
}

fn strip_code_fence(inner: &str) -> &str {
    let Some(rest) = inner.strip_prefix("```") else {
        return inner;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn missing(field: &str, expected: &str) -> AgentError {
    AgentError::new(
        AgentErrorKind::FormatMissingField,
        format!("field `{field}` must be {expected}"),
    )
}

fn string_field(obj: &Map<String, Value>, field: &str) -> Result<String, AgentError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        _ => Err(missing(field, "a string")),
    }
}

fn nullable_string_field(obj: &Map<String, Value>, field: &str) -> Result<Option<String>, AgentError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Null) => Ok(None),
        _ => Err(missing(field, "a string or null")),
    }
}

fn bool_field(obj: &Map<String, Value>, field: &str) -> Result<bool, AgentError> {
    match obj.get(field) {
        Some(Value::Bool(b)) => Ok(*b),
        _ => Err(missing(field, "a boolean")),
    }
}

fn confidence_field(obj: &Map<String, Value>) -> Result<f64, AgentError> {
    match obj.get("confidence") {
        Some(Value::Number(n)) => Ok(n.as_f64().unwrap_or(0.0).clamp(0.0, 1.0)),
        _ => Err(missing("confidence", "a number")),
    }
}

/// Decodes the inner block against the schema of the current phase.
/// Unknown extra fields are ignored.
pub fn parse_payload(inner: &str, schema: Schema) -> Result<ParsedPayload, AgentError> {
    let inner = strip_code_fence(inner.trim());
    let value: Value = serde_json::from_str(inner)
        .map_err(|e| AgentError::new(AgentErrorKind::FormatMalformed, format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(AgentError::new(
            AgentErrorKind::FormatMalformed,
            "JSON payload is not an object",
        ));
    };
    Ok(match schema {
        Schema::Question => ParsedPayload::Question {
            question: string_field(&obj, "question")?,
            targeted_player: string_field(&obj, "targeted_player")?,
        },
        Schema::Answer => ParsedPayload::Answer {
            answer: string_field(&obj, "answer")?,
        },
        Schema::Guess => ParsedPayload::Guess {
            best_guess: nullable_string_field(&obj, "best_guess")?,
            should_guess: bool_field(&obj, "should_guess")?,
            confidence: confidence_field(&obj)?,
        },
        Schema::Vote => ParsedPayload::Vote {
            target_player_name: nullable_string_field(&obj, "target_player_name")?,
            should_vote: bool_field(&obj, "should_vote")?,
            confidence: confidence_field(&obj)?,
        },
    })
}

/// A payload that has passed all agent-side checks and can be handed to the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidatedAction {
    Question { declared_target: String, text: String },
    Answer { text: String },
    Guess(SpyGuessInput),
    Vote { ballot: VoteInput, confidence: f64 },
}

fn illegal(detail: impl Into<String>) -> AgentError {
    AgentError::new(AgentErrorKind::SemanticIllegal, detail)
}

/// Resolves aliases and rejects self-targeting, unknown players and
/// contradictory guess/vote payloads. Round-robin question targets pass
/// through untouched: the engine coerces them to the mandated seat.
pub fn validate_semantics(payload: &ParsedPayload, view: &PlayerView) -> Result<ValidatedAction, AgentError> {
    match payload {
        ParsedPayload::Question {
            question,
            targeted_player,
        } => {
            if question.trim().is_empty() {
                return Err(illegal("empty question"));
            }
            if !view.phase.is_round_robin() {
                match view.resolve_alias(targeted_player) {
                    None => return Err(illegal(format!("unknown player {targeted_player:?}"))),
                    Some(s) if s == view.seat => return Err(illegal("cannot question yourself")),
                    Some(_) => {}
                }
            }
            Ok(ValidatedAction::Question {
                declared_target: targeted_player.clone(),
                text: question.clone(),
            })
        }
        ParsedPayload::Answer { answer } => Ok(ValidatedAction::Answer { text: answer.clone() }),
        ParsedPayload::Guess {
            best_guess,
            should_guess,
            confidence,
        } => {
            if !should_guess {
                return Ok(ValidatedAction::Guess(SpyGuessInput {
                    should_guess: false,
                    best_guess: None,
                    confidence: *confidence,
                }));
            }
            match best_guess.as_deref().map(str::trim) {
                Some(g) if !g.is_empty() => Ok(ValidatedAction::Guess(SpyGuessInput {
                    should_guess: true,
                    best_guess: Some(g.to_string()),
                    confidence: *confidence,
                })),
                _ => Err(illegal("should_guess is true but best_guess is empty")),
            }
        }
        ParsedPayload::Vote {
            target_player_name,
            should_vote,
            confidence,
        } => {
            if !should_vote {
                return Ok(ValidatedAction::Vote {
                    ballot: VoteInput::Skip,
                    confidence: *confidence,
                });
            }
            let Some(name) = target_player_name.as_deref() else {
                return Err(illegal("should_vote is true but target_player_name is null"));
            };
            match view.resolve_alias(name) {
                None => Err(illegal(format!("unknown player {name:?}"))),
                Some(s) if s == view.seat => Err(illegal("cannot vote for yourself")),
                Some(s) => Ok(ValidatedAction::Vote {
                    ballot: VoteInput::Alias(view.players[s].clone()),
                    confidence: *confidence,
                }),
            }
        }
    }
}

/// Full decode of one raw reply. Errors carry the raw output.
pub fn interpret(raw: &str, schema: Schema, view: &PlayerView) -> Result<(ParsedPayload, ValidatedAction), AgentError> {
    let inner = extract_block(raw)?;
    let payload = parse_payload(inner, schema).map_err(|e| e.with_raw(raw))?;
    let action = validate_semantics(&payload, view).map_err(|e| e.with_raw(raw))?;
    Ok((payload, action))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn takes_block_after_reasoning() {
        let raw = "Let's think step by step...\n|||{\"answer\": \"X\"}|||";
        assert_eq!(extract_block(raw).unwrap(), "{\"answer\": \"X\"}");
    }

    #[test]
    fn last_block_wins() {
        assert_eq!(extract_block("|||a||| text |||b|||").unwrap(), "b");
    }

    #[test]
    fn missing_or_unbalanced_delimiters() {
        let err = extract_block("no delimiters here").unwrap_err();
        assert_eq!(err.kind, AgentErrorKind::FormatMalformed);
        assert_eq!(err.raw_output.as_deref(), Some("no delimiters here"));
        assert_eq!(
            extract_block("|||{}|||  |||{").unwrap_err().kind,
            AgentErrorKind::FormatMalformed
        );
    }

    #[test]
    fn question_payload() {
        let p = parse_payload(r#"{"question":"Q","targeted_player":"Bob"}"#, Schema::Question).unwrap();
        assert_eq!(
            p,
            ParsedPayload::Question {
                question: "Q".into(),
                targeted_player: "Bob".into()
            }
        );
    }

    #[test]
    fn skip_guess_payload() {
        let p = parse_payload(
            r#"{"best_guess":null,"should_guess":false,"confidence":0.3}"#,
            Schema::Guess,
        )
        .unwrap();
        assert_eq!(
            p,
            ParsedPayload::Guess {
                best_guess: None,
                should_guess: false,
                confidence: 0.3
            }
        );
    }

    #[test]
    fn ill_typed_answer() {
        let err = parse_payload(r#"{"answer":42}"#, Schema::Answer).unwrap_err();
        assert_eq!(err.kind, AgentErrorKind::FormatMissingField);
    }

    #[test]
    fn confidence_is_clamped_and_extras_ignored() {
        let p = parse_payload(
            r#"{"target_player_name":"Bob","should_vote":true,"confidence":7,"why":"hunch"}"#,
            Schema::Vote,
        )
        .unwrap();
        assert!(matches!(p, ParsedPayload::Vote { confidence, .. } if confidence == 1.0));
    }

    #[test]
    fn fenced_json_is_accepted() {
        let p = parse_payload("```json\n{\"answer\": \"ok\"}\n```", Schema::Answer).unwrap();
        assert_eq!(p, ParsedPayload::Answer { answer: "ok".into() });
    }
}
