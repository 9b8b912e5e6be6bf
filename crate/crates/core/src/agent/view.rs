use serde::{Deserialize, Serialize};

use crate::game::{ForfeitReason, GameState, Language, Phase, Role, Round, TranscriptEvent, VoteChoice};

/// What one seat is allowed to know about a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub seat: usize,
    pub self_alias: String,
    pub role: Role,
    /// Aliases in table order.
    pub players: Vec<String>,
    pub entity_list: Vec<String>,
    /// Present only for non-spies.
    pub target_entity: Option<String>,
    pub public_history: Vec<TranscriptEvent>,
    pub phase: Phase,
    pub phase_descriptor: String,
    /// Mandated question target during the round-robin cycle.
    pub required_target: Option<String>,
    pub language: Language,
}

impl PlayerView {
    /// Canonical numbered transcript, identical for every seat of the same state.
    pub fn history_text(&self) -> String {
        let lines = transcript_lines(&self.public_history, &self.players, false);
        if lines.is_empty() {
            "(no events yet)".to_string()
        } else {
            lines.join("\n")
        }
    }

    pub fn resolve_alias(&self, alias: &str) -> Option<usize> {
        let key = crate::game::normalize_name(alias);
        if key.is_empty() {
            return None;
        }
        self.players.iter().position(|p| crate::game::normalize_name(p) == key)
    }
}

pub fn redact(state: &GameState, seat: usize) -> PlayerView {
    let me = &state.seats[seat];
    let players: Vec<String> = state.seats.iter().map(|s| s.alias.clone()).collect();
    let required_target = match state.phase {
        Phase::RoundRobinQuestion(_) => Some(players[(seat + 1) % players.len()].clone()),
        _ => None,
    };

    let mut descriptor = state.phase.describe(state.config.free_cycles);
    match state.phase {
        Phase::RoundRobinQuestion(_) => {
            if let Some(t) = &required_target {
                descriptor.push_str(&format!(". You must ask {t}."));
            }
        }
        Phase::FreeQuestion(_) => descriptor.push_str(". You may ask any other player."),
        Phase::RoundRobinAnswer(_) | Phase::FreeAnswer(_) => {
            if let Some(q) = &state.pending_question {
                descriptor.push_str(&format!(". {} asked you: {}", players[q.asker], one_line(&q.text)));
            }
        }
        _ => {}
    }

    PlayerView {
        seat,
        self_alias: me.alias.clone(),
        role: me.role,
        players,
        entity_list: state.pool.entities.clone(),
        target_entity: match me.role {
            Role::NonSpy => Some(state.target_entity().to_string()),
            Role::Spy => None,
        },
        public_history: state.events.iter().filter(|e| e.is_public()).cloned().collect(),
        phase: state.phase,
        phase_descriptor: descriptor,
        required_target,
        language: state.config.scenario.language.clone(),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn stage(cycle: Option<u32>) -> String {
    match cycle {
        None => "Round Robin".into(),
        Some(c) => format!("Cycle {c}"),
    }
}

fn reason_text(reason: ForfeitReason) -> &'static str {
    match reason {
        ForfeitReason::MalformedOutput => "malformed output",
        ForfeitReason::IllegalAction => "illegal action",
        ForfeitReason::TransportFailure => "transport failure",
    }
}

/// Renders events as numbered transcript lines. Hidden events are dropped
/// unless `include_hidden`, in which case they are marked `[hidden]`.
pub fn transcript_lines(events: &[TranscriptEvent], aliases: &[String], include_hidden: bool) -> Vec<String> {
    let name = |seat: usize| aliases.get(seat).map(String::as_str).unwrap_or("?");
    let mut last_asker = None;
    let mut lines = Vec::new();
    for event in events {
        if !event.is_public() && !include_hidden {
            continue;
        }
        let body = match event {
            TranscriptEvent::Question {
                turn,
                cycle,
                asker,
                target,
                text,
            } => {
                last_asker = Some(*asker);
                format!(
                    "Turn {turn} ({}): {} \u{2192} {}: {}",
                    stage(*cycle),
                    name(*asker),
                    name(*target),
                    one_line(text)
                )
            }
            TranscriptEvent::Answer {
                turn,
                cycle,
                responder,
                text,
            } => format!(
                "Turn {turn} ({}): {} \u{2192} {}: {}",
                stage(*cycle),
                name(*responder),
                last_asker.map(name).unwrap_or("?"),
                one_line(text)
            ),
            TranscriptEvent::GuessAttempt {
                round,
                spy_seat,
                guess_text,
                correct,
                ..
            } => format!(
                "Spy guess ({round}): {} guessed \"{}\" ({})",
                name(*spy_seat),
                one_line(guess_text),
                if *correct { "correct" } else { "wrong" }
            ),
            TranscriptEvent::GuessSkip { round, .. } => {
                format!("[hidden] Spy skipped the guess ({round})")
            }
            TranscriptEvent::VoteSession { round, votes, accused } => {
                let ballots: Vec<String> = votes
                    .iter()
                    .map(|(voter, choice)| match choice {
                        VoteChoice::Seat(t) => format!("{}\u{2192}{}", name(*voter), name(*t)),
                        VoteChoice::Skip => format!("{}\u{2192}SKIP", name(*voter)),
                    })
                    .collect();
                let result = match accused {
                    Some(s) => format!("{} accused", name(*s)),
                    None => "no majority".into(),
                };
                let label = match round {
                    Round::Cycle(c) => format!("cycle {c}"),
                    Round::Final => "final".into(),
                };
                format!("Votes ({label}): {}; result: {result}", ballots.join(", "))
            }
            TranscriptEvent::Forfeit { seat, reason } => {
                format!("Forfeit: {} ({})", name(*seat), reason_text(*reason))
            }
        };
        lines.push(format!("{}. {body}", lines.len() + 1));
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_pool;
    use crate::game::{MatchConfig, SpyGuessInput, VoteInput};
    use std::collections::BTreeMap;

    fn state() -> GameState {
        let pool = load_pool("generic-en").unwrap();
        let cfg = MatchConfig::new(5, "v", "s", pool.scenario.clone(), 17);
        GameState::new(cfg, pool).unwrap()
    }

    fn play_to_vote(mut g: GameState) -> GameState {
        for t in 0..5 {
            let tgt = g.alias((t + 1) % 5).to_string();
            g = g.apply_question(t, &tgt, "What do you see?").unwrap();
            g = g.apply_answer((t + 1) % 5, "Lots of\npeople.").unwrap();
        }
        let tgt = g.alias(2).to_string();
        g = g.apply_question(0, &tgt, "And you?").unwrap();
        g = g.apply_answer(2, "Same").unwrap();
        g.apply_spy_guess(&SpyGuessInput::skip()).unwrap()
    }

    #[test]
    fn spy_view_has_no_secret() {
        let g = state();
        let view = redact(&g, g.spy_seat());
        assert_eq!(view.target_entity, None);
        assert_eq!(view.entity_list.len(), 30);
        let json = serde_json::to_string(&view).unwrap();
        let lists_target = view.entity_list.iter().any(|e| e == g.target_entity());
        assert!(lists_target);
        assert!(!json.contains("target_entity\":\""));
    }

    #[test]
    fn non_spies_share_history_text() {
        let g = play_to_vote(state());
        let spy = g.spy_seat();
        let villagers: Vec<usize> = (0..5).filter(|&s| s != spy).collect();
        let a = redact(&g, villagers[0]);
        let b = redact(&g, villagers[1]);
        assert_eq!(a.history_text(), b.history_text());
        assert_ne!(a.self_alias, b.self_alias);
        assert_eq!(a.target_entity.as_deref(), Some(g.target_entity()));
        assert_eq!(redact(&g, spy).history_text(), a.history_text());
    }

    #[test]
    fn skip_is_not_visible() {
        let g = play_to_vote(state());
        assert_eq!(g.events.len(), 13);
        let view = redact(&g, 0);
        assert_eq!(view.public_history.len(), 12);
        assert!(!view.history_text().contains("skipped"));
        let operator = transcript_lines(&g.events, &view.players, true);
        assert_eq!(operator.len(), 13);
        assert!(operator[12].contains("[hidden]"));
    }

    #[test]
    fn transcript_format() {
        let g = play_to_vote(state());
        let skip: BTreeMap<usize, VoteInput> = (0..5)
            .map(|s| {
                if s == 1 {
                    (s, VoteInput::Alias(g.alias(3).to_string()))
                } else {
                    (s, VoteInput::Skip)
                }
            })
            .collect();
        let g = g.apply_vote_session(&skip).unwrap();
        let view = redact(&g, 0);
        let text = view.history_text();
        let lines: Vec<&str> = text.lines().collect();
        let a = |s: usize| g.alias(s).to_string();
        assert_eq!(
            lines[0],
            format!("1. Turn 1 (Round Robin): {} \u{2192} {}: What do you see?", a(0), a(1))
        );
        assert_eq!(
            lines[1],
            format!("2. Turn 1 (Round Robin): {} \u{2192} {}: Lots of people.", a(1), a(0))
        );
        assert_eq!(
            lines[10],
            format!("11. Turn 6 (Cycle 1): {} \u{2192} {}: And you?", a(0), a(2))
        );
        assert_eq!(
            lines[12],
            format!(
                "13. Votes (cycle 1): {}\u{2192}SKIP, {}\u{2192}{}, {}\u{2192}SKIP, {}\u{2192}SKIP, {}\u{2192}SKIP; result: no majority",
                a(0), a(1), a(3), a(2), a(3), a(4)
            )
        );
    }

    #[test]
    fn round_robin_view_names_required_target() {
        let g = state();
        let view = redact(&g, 0);
        assert_eq!(view.required_target.as_deref(), Some(g.alias(1)));
        assert!(view.phase_descriptor.contains(&format!("You must ask {}", g.alias(1))));
        assert_eq!(view.history_text(), "(no events yet)");
    }
}
