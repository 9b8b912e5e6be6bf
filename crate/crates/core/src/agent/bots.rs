//! Deterministic scripted players used as offline test oracles.
//!
//! Every decision draws from a generator seeded by `(bot seed, seat, phase,
//! visible history)`, so a bot's reply is a pure function of what it sees.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::view::PlayerView;
use super::{Agent, AgentError, AgentRequest, Completion};
use crate::game::{Role, Schema, TranscriptEvent};
use crate::seed::derive_seed;

const QUESTIONS: [&str; 6] = [
    "What do you usually notice first when you arrive?",
    "How would you describe the mood there?",
    "Who do you normally go there with?",
    "What time of day feels right for it?",
    "What would you bring along?",
    "How long do people tend to stay?",
];

const ANSWERS: [&str; 6] = [
    "It depends a lot on the time of day, honestly.",
    "I would say the mood changes with the crowd.",
    "People there usually seem busy with their own plans.",
    "I try to go with friends when I can.",
    "It is the kind of thing you remember afterwards.",
    "Most people I know have an opinion about it.",
];

const MUTE_REPLY: &str = "I would rather not follow any particular format today.";

/// Marker non-spy skill bots append to their answers.
const COMPOSURE_TAG: &str = "(composure ";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScriptedKind {
    /// On-topic but indirect; never guesses; votes for the next seat in table order.
    Honest,
    /// As `Honest`, but a non-spy names the secret entity in its first answer.
    Leaky,
    /// Uniform over legal actions.
    Random,
    /// Spy that guesses the true target at its first opportunity. Needs the secret granted.
    OracleSpy,
    /// Spy that never guesses and votes for a uniformly random other player.
    CautiousSpy,
    /// Never produces a delimited block.
    Mute,
    /// Synthetic strength `theta`: a spy with strength `a` facing non-spies of
    /// strength `b` guesses right at its first guess with probability
    /// `1 / (1 + exp(b - a))`, and wrong otherwise. Non-spies reveal their
    /// strength in every answer and always skip votes. Needs the secret granted.
    Skill(f64),
}

impl ScriptedKind {
    pub fn needs_secret(self) -> bool {
        matches!(self, ScriptedKind::OracleSpy | ScriptedKind::Skill(_))
    }
}

impl fmt::Display for ScriptedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Honest => f.write_str("honest"),
            Self::Leaky => f.write_str("leaky"),
            Self::Random => f.write_str("random"),
            Self::OracleSpy => f.write_str("oracle"),
            Self::CautiousSpy => f.write_str("cautious"),
            Self::Mute => f.write_str("mute"),
            Self::Skill(theta) => write!(f, "skill={theta}"),
        }
    }
}

impl FromStr for ScriptedKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(theta) = s.strip_prefix("skill=") {
            return theta
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .map(ScriptedKind::Skill)
                .ok_or_else(|| format!("bad skill value {theta:?}"));
        }
        match s.as_str() {
            "honest" => Ok(Self::Honest),
            "leaky" => Ok(Self::Leaky),
            "random" => Ok(Self::Random),
            "oracle" | "oraclespy" | "oracle-spy" => Ok(Self::OracleSpy),
            "cautious" | "cautiousspy" | "cautious-spy" => Ok(Self::CautiousSpy),
            "mute" => Ok(Self::Mute),
            other => Err(format!("unknown bot kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    kind: ScriptedKind,
    seed: u64,
    secret: Option<String>,
}

impl ScriptedAgent {
    pub fn new(kind: ScriptedKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            secret: None,
        }
    }

    /// Hands the secret entity to a bot that cheats by construction.
    pub fn with_secret(mut self, target: impl Into<String>) -> Self {
        self.secret = Some(target.into());
        self
    }

    pub fn kind(&self) -> ScriptedKind {
        self.kind
    }

    fn rng(&self, view: &PlayerView, schema: Schema) -> ChaCha8Rng {
        let seed = derive_seed(&[
            &self.seed.to_le_bytes(),
            &(view.seat as u64).to_le_bytes(),
            view.phase.to_string().as_bytes(),
            format!("{schema:?}").as_bytes(),
            view.history_text().as_bytes(),
        ]);
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Produces the raw reply text for one request.
    pub fn reply(&self, view: &PlayerView, schema: Schema) -> String {
        if self.kind == ScriptedKind::Mute {
            return MUTE_REPLY.to_string();
        }
        let mut rng = self.rng(view, schema);
        let payload = match schema {
            Schema::Question => self.question(view, &mut rng),
            Schema::Answer => self.answer(view, &mut rng),
            Schema::Guess => self.guess(view, &mut rng),
            Schema::Vote => self.vote(view, &mut rng),
        };
        format!("Let's think step by step...\n|||\n{payload}\n|||")
    }

    fn others(view: &PlayerView) -> Vec<usize> {
        (0..view.players.len()).filter(|&s| s != view.seat).collect()
    }

    fn question(&self, view: &PlayerView, rng: &mut ChaCha8Rng) -> String {
        let n = view.players.len();
        let target = match (&view.required_target, self.kind) {
            (Some(t), _) => t.clone(),
            (None, ScriptedKind::Random) => {
                view.players[*Self::others(view).choose(rng).expect("at least 3 players")].clone()
            }
            (None, _) => view.players[(view.seat + 1) % n].clone(),
        };
        let text = QUESTIONS.choose(rng).expect("non-empty");
        pretty(json!({ "question": text, "targeted_player": target }))
    }

    fn answer(&self, view: &PlayerView, rng: &mut ChaCha8Rng) -> String {
        let base = *ANSWERS.choose(rng).expect("non-empty");
        let text = match (self.kind, &view.target_entity) {
            (ScriptedKind::Leaky, Some(secret)) if !has_answered(view) => {
                format!("Honestly, it reminds me of {secret}.")
            }
            (ScriptedKind::Skill(theta), Some(_)) => format!("{base} {COMPOSURE_TAG}{theta:.6})"),
            _ => base.to_string(),
        };
        pretty(json!({ "answer": text }))
    }

    fn guess(&self, view: &PlayerView, rng: &mut ChaCha8Rng) -> String {
        let skip = json!({ "best_guess": null, "should_guess": false, "confidence": 0.2 });
        if view.role != Role::Spy {
            return pretty(skip);
        }
        let payload = match (self.kind, &self.secret) {
            (ScriptedKind::OracleSpy, Some(secret)) => {
                json!({ "best_guess": secret, "should_guess": true, "confidence": 1.0 })
            }
            (ScriptedKind::Skill(theta), Some(secret)) => {
                let opponent = opponent_strength(view).unwrap_or(0.0);
                let p = 1.0 / (1.0 + (opponent - theta).exp());
                let guess = if rng.random::<f64>() < p {
                    secret.clone()
                } else {
                    let wrong: Vec<&String> = view.entity_list.iter().filter(|e| *e != secret).collect();
                    (*wrong.choose(rng).expect("pool has 30 entities")).clone()
                };
                json!({ "best_guess": guess, "should_guess": true, "confidence": p })
            }
            (ScriptedKind::Random, _) => {
                let pick = rng.random_range(0..=view.entity_list.len());
                match view.entity_list.get(pick) {
                    Some(entity) => json!({ "best_guess": entity, "should_guess": true, "confidence": 0.5 }),
                    None => skip,
                }
            }
            _ => skip,
        };
        pretty(payload)
    }

    fn vote(&self, view: &PlayerView, rng: &mut ChaCha8Rng) -> String {
        let n = view.players.len();
        let skip = json!({ "target_player_name": null, "should_vote": false, "confidence": 0.3 });
        let payload = match (self.kind, view.role) {
            (ScriptedKind::Skill(_), _) => skip,
            (ScriptedKind::Random, _) => {
                let pick = rng.random_range(0..n);
                if pick == view.seat {
                    skip
                } else {
                    json!({ "target_player_name": view.players[pick], "should_vote": true, "confidence": 0.5 })
                }
            }
            (ScriptedKind::CautiousSpy, Role::Spy) => {
                let target = *Self::others(view).choose(rng).expect("at least 3 players");
                json!({ "target_player_name": view.players[target], "should_vote": true, "confidence": 0.4 })
            }
            _ => {
                let target = (view.seat + 1) % n;
                json!({ "target_player_name": view.players[target], "should_vote": true, "confidence": 0.6 })
            }
        };
        pretty(payload)
    }
}

impl Agent for ScriptedAgent {
    fn act(&mut self, request: &AgentRequest<'_>) -> Result<Completion, AgentError> {
        Ok(Completion::text(self.reply(request.view, request.schema)))
    }
}

fn pretty(value: serde_json::Value) -> String {
    serde_json::to_string_pretty(&value).expect("json values serialize")
}

fn has_answered(view: &PlayerView) -> bool {
    view.public_history
        .iter()
        .any(|e| matches!(e, TranscriptEvent::Answer { responder, .. } if *responder == view.seat))
}

/// Strength advertised by the first non-spy skill answer in the history.
fn opponent_strength(view: &PlayerView) -> Option<f64> {
    view.public_history.iter().find_map(|e| match e {
        TranscriptEvent::Answer { responder, text, .. } if *responder != view.seat => {
            let start = text.find(COMPOSURE_TAG)? + COMPOSURE_TAG.len();
            let end = text[start..].find(')')? + start;
            text[start..end].parse().ok()
        }
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{extract_block, interpret, redact};
    use crate::corpus::{bundled_pool, list_pools};
    use crate::game::{normalize_name, GameState, MatchConfig, NextAction, Scenario, ScenarioKind};

    fn state(scenario: &Scenario, seed: u64) -> GameState {
        let pool = bundled_pool(scenario).unwrap();
        GameState::new(MatchConfig::new(5, "v", "s", scenario.clone(), seed), pool).unwrap()
    }

    #[test]
    fn kinds_parse_and_print() {
        for s in [
            "honest",
            "leaky",
            "random",
            "oracle",
            "cautious",
            "mute",
            "skill=0.3",
            "skill=-0.9",
        ] {
            let k: ScriptedKind = s.parse().unwrap();
            assert_eq!(k.to_string().parse::<ScriptedKind>().unwrap(), k);
        }
        assert!("skill=abc".parse::<ScriptedKind>().is_err());
        assert!("wizard".parse::<ScriptedKind>().is_err());
    }

    #[test]
    fn canned_text_never_names_an_entity() {
        for entry in list_pools() {
            let pool = bundled_pool(&entry.scenario).unwrap();
            for line in QUESTIONS.iter().chain(ANSWERS.iter()).chain([&MUTE_REPLY]) {
                let text = normalize_name(line);
                for entity in &pool.canonical {
                    assert!(!text.contains(entity.as_str()), "{line:?} contains {entity:?}");
                }
            }
        }
    }

    #[test]
    fn leaky_first_answer_names_target() {
        let scenario = Scenario::new(ScenarioKind::LocalFood, "id");
        let g = (0..)
            .map(|s| state(&scenario, s))
            .find(|g| g.seats[1].role == Role::NonSpy && g.target_entity() == "Bika Ambon")
            .unwrap();
        let g = g.apply_question(0, g.alias(1), "q").unwrap();
        let bot = ScriptedAgent::new(ScriptedKind::Leaky, 1);
        let reply = bot.reply(&redact(&g, 1), Schema::Answer);
        assert!(reply.contains("Bika Ambon"), "{reply}");
    }

    #[test]
    fn mute_never_delimits() {
        let g = state(&Scenario::new(ScenarioKind::Generic, "en"), 1);
        let bot = ScriptedAgent::new(ScriptedKind::Mute, 0);
        for schema in [Schema::Question, Schema::Answer, Schema::Guess, Schema::Vote] {
            assert!(extract_block(&bot.reply(&redact(&g, 0), schema)).is_err());
        }
    }

    #[test]
    fn replies_are_deterministic() {
        let g = state(&Scenario::new(ScenarioKind::Generic, "en"), 4);
        let view = redact(&g, 0);
        for kind in [ScriptedKind::Random, ScriptedKind::Honest, ScriptedKind::CautiousSpy] {
            let a = ScriptedAgent::new(kind, 9).reply(&view, Schema::Question);
            let b = ScriptedAgent::new(kind, 9).reply(&view, Schema::Question);
            assert_eq!(a, b);
        }
    }

    /// Drives a whole game with one bot kind everywhere and checks every reply
    /// decodes to a legal action.
    #[test]
    fn every_reply_round_trips() {
        let kinds = [
            ScriptedKind::Honest,
            ScriptedKind::Leaky,
            ScriptedKind::Random,
            ScriptedKind::OracleSpy,
            ScriptedKind::CautiousSpy,
            ScriptedKind::Skill(0.4),
        ];
        for (i, entry) in list_pools().iter().enumerate() {
            for (k, kind) in kinds.iter().enumerate() {
                let mut g = state(&entry.scenario, (i * 10 + k) as u64);
                let bot = ScriptedAgent::new(*kind, 3).with_secret(g.target_entity().to_string());
                let mut steps = 0;
                loop {
                    steps += 1;
                    assert!(steps < 100);
                    match g.next_action() {
                        NextAction::Terminal => break,
                        NextAction::Single(req) => {
                            let view = redact(&g, req.seat);
                            let raw = bot.reply(&view, req.schema);
                            let (_, action) = interpret(&raw, req.schema, &view)
                                .unwrap_or_else(|e| panic!("{kind:?} {:?}: {e}\n{raw}", req.phase));
                            g = match action {
                                crate::agent::ValidatedAction::Question { declared_target, text } => {
                                    g.apply_question(req.seat, &declared_target, &text).unwrap()
                                }
                                crate::agent::ValidatedAction::Answer { text } => {
                                    g.apply_answer(req.seat, &text).unwrap()
                                }
                                crate::agent::ValidatedAction::Guess(input) => g.apply_spy_guess(&input).unwrap(),
                                _ => unreachable!(),
                            };
                        }
                        NextAction::Simultaneous(reqs) => {
                            let mut ballots = std::collections::BTreeMap::new();
                            for req in reqs {
                                let view = redact(&g, req.seat);
                                let raw = bot.reply(&view, req.schema);
                                match interpret(&raw, req.schema, &view).unwrap().1 {
                                    crate::agent::ValidatedAction::Vote { ballot, .. } => {
                                        ballots.insert(req.seat, ballot);
                                    }
                                    other => panic!("{other:?}"),
                                }
                            }
                            g = g.apply_vote_session(&ballots).unwrap();
                        }
                    }
                }
                assert!(g.coercions.is_empty());
            }
        }
    }

    #[test]
    fn skill_spy_reads_opponent_strength() {
        let g = state(&Scenario::new(ScenarioKind::Generic, "en"), 2);
        let spy = g.spy_seat();
        let mut g = g;
        for t in 0..5 {
            let tgt = g.alias((t + 1) % 5).to_string();
            g = g.apply_question(t, &tgt, "q").unwrap();
            let responder = (t + 1) % 5;
            let text = if responder == spy {
                "hmm".to_string()
            } else {
                format!("fine {COMPOSURE_TAG}-0.250000)")
            };
            g = g.apply_answer(responder, &text).unwrap();
        }
        assert_eq!(opponent_strength(&redact(&g, spy)), Some(-0.25));
    }
}
