use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normalize::{guess_matches, normalize_name};
use super::pool::validate_pool;
use super::{
    EntityPool, ForfeitReason, GameError, GameState, MatchConfig, Outcome, OutcomeCategory, Phase, Role, Seat,
    TargetCoercion, Team, TranscriptEvent, VoteChoice, ALIASES,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingQuestion {
    pub asker: usize,
    pub target: usize,
    pub text: String,
}

/// Response schema an agent must follow for a given action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Schema {
    Question,
    Answer,
    Guess,
    Vote,
}

impl Schema {
    /// Template family used to prompt for this schema.
    pub fn template_phase(self) -> &'static str {
        match self {
            Schema::Question => "question_generation",
            Schema::Answer => "answer_generation",
            Schema::Guess => "entity_guess",
            Schema::Vote => "vote_initiation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRequest {
    pub seat: usize,
    pub phase: Phase,
    pub schema: Schema,
    /// Engine-mandated question target during the round-robin cycle.
    pub required_target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextAction {
    Single(ActionRequest),
    /// Vote phases: every seat acts on the same state.
    Simultaneous(Vec<ActionRequest>),
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpyGuessInput {
    pub should_guess: bool,
    pub best_guess: Option<String>,
    pub confidence: f64,
}

impl SpyGuessInput {
    pub fn skip() -> Self {
        Self {
            should_guess: false,
            best_guess: None,
            confidence: 0.0,
        }
    }

    pub fn guess(text: impl Into<String>, confidence: f64) -> Self {
        Self {
            should_guess: true,
            best_guess: Some(text.into()),
            confidence,
        }
    }
}

/// A ballot as submitted: a player alias, or a skip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoteInput {
    Alias(String),
    Skip,
}

impl GameState {
    /// Seats, spy and target are all drawn from `config.seed`, so equal inputs
    /// give equal states.
    pub fn new(config: MatchConfig, pool: EntityPool) -> Result<Self, GameError> {
        config.validate()?;
        validate_pool(&pool).map_err(GameError::InvalidPool)?;

        let n = config.player_count;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut aliases: Vec<&str> = ALIASES[..n].to_vec();
        aliases.shuffle(&mut rng);
        let spy = rng.random_range(0..n);
        let target_index = rng.random_range(0..pool.len());

        let seats = aliases
            .into_iter()
            .enumerate()
            .map(|(index, alias)| {
                let (role, model) = if index == spy {
                    (Role::Spy, config.spy_model.clone())
                } else {
                    (Role::NonSpy, config.nonspy_model.clone())
                };
                Seat {
                    index,
                    alias: alias.to_string(),
                    role,
                    model,
                }
            })
            .collect();

        Ok(Self {
            config,
            pool,
            seats,
            target_index,
            phase: Phase::RoundRobinQuestion(1),
            current_questioner: 0,
            pending_question: None,
            events: Vec::new(),
            outcome: None,
            coercions: Vec::new(),
        })
    }

    pub fn player_count(&self) -> usize {
        self.seats.len()
    }

    pub fn spy_seat(&self) -> usize {
        self.seats
            .iter()
            .position(|s| s.role == Role::Spy)
            .expect("every game has a spy")
    }

    pub fn target_entity(&self) -> &str {
        &self.pool.entities[self.target_index]
    }

    pub fn alias(&self, seat: usize) -> &str {
        &self.seats[seat].alias
    }

    pub fn is_terminal(&self) -> bool {
        self.phase == Phase::Terminal
    }

    pub fn question_count(&self) -> u32 {
        self.events
            .iter()
            .filter(|e| matches!(e, TranscriptEvent::Question { .. }))
            .count() as u32
    }

    /// Resolves an alias (case- and whitespace-insensitive) to a seat index.
    pub fn resolve_alias(&self, alias: &str) -> Option<usize> {
        if let Some(seat) = self.seats.iter().position(|s| s.alias == alias) {
            return Some(seat);
        }
        let key = normalize_name(alias);
        if key.is_empty() {
            return None;
        }
        self.seats.iter().position(|s| normalize_name(&s.alias) == key)
    }

    pub fn next_action(&self) -> NextAction {
        let n = self.player_count();
        let single = |seat, schema, required_target| {
            NextAction::Single(ActionRequest {
                seat,
                phase: self.phase,
                schema,
                required_target,
            })
        };
        match self.phase {
            Phase::RoundRobinQuestion(turn) => {
                let asker = (turn as usize - 1) % n;
                single(asker, Schema::Question, Some((asker + 1) % n))
            }
            Phase::FreeQuestion(_) => single(self.current_questioner, Schema::Question, None),
            Phase::RoundRobinAnswer(_) | Phase::FreeAnswer(_) => {
                let target = self
                    .pending_question
                    .as_ref()
                    .expect("answer phase always has a pending question")
                    .target;
                single(target, Schema::Answer, None)
            }
            Phase::SpyGuess(_) | Phase::FinalSpyGuess => single(self.spy_seat(), Schema::Guess, None),
            Phase::Vote(_) | Phase::FinalVote => NextAction::Simultaneous(
                (0..n)
                    .map(|seat| ActionRequest {
                        seat,
                        phase: self.phase,
                        schema: Schema::Vote,
                        required_target: None,
                    })
                    .collect(),
            ),
            Phase::Terminal => NextAction::Terminal,
        }
    }

    fn expect_actor(&self, seat: usize, schema: Schema) -> Result<(), GameError> {
        match self.next_action() {
            NextAction::Terminal => Err(GameError::AlreadyTerminal),
            NextAction::Single(req) if req.schema == schema => {
                if req.seat == seat {
                    Ok(())
                } else {
                    Err(GameError::Scheduling(format!(
                        "seat {seat} acted in {} but seat {} was expected",
                        self.phase, req.seat
                    )))
                }
            }
            _ => Err(GameError::WrongPhase { phase: self.phase }),
        }
    }

    pub fn apply_question(&self, asker: usize, declared_target: &str, text: &str) -> Result<GameState, GameError> {
        self.expect_actor(asker, Schema::Question)?;
        if text.trim().is_empty() {
            return Err(GameError::IllegalAction {
                seat: asker,
                detail: "empty question".into(),
            });
        }
        let n = self.player_count();
        let turn = self.question_count() + 1;
        let mut next = self.clone();

        let (target, cycle, answer_phase) = match self.phase {
            Phase::RoundRobinQuestion(t) => {
                let mandated = (asker + 1) % n;
                if self.resolve_alias(declared_target) != Some(mandated) {
                    log::debug!(
                        "round-robin turn {t}: {} declared {declared_target:?}, coerced to {}",
                        self.alias(asker),
                        self.alias(mandated)
                    );
                    next.coercions.push(TargetCoercion {
                        turn: t,
                        asker,
                        declared: declared_target.to_string(),
                        mandated,
                    });
                }
                (mandated, None, Phase::RoundRobinAnswer(t))
            }
            Phase::FreeQuestion(c) => {
                let target = self
                    .resolve_alias(declared_target)
                    .ok_or_else(|| GameError::IllegalAction {
                        seat: asker,
                        detail: format!("unknown question target {declared_target:?}"),
                    })?;
                if target == asker {
                    return Err(GameError::IllegalAction {
                        seat: asker,
                        detail: "a player cannot question themselves".into(),
                    });
                }
                (target, Some(c), Phase::FreeAnswer(c))
            }
            _ => unreachable!("expect_actor checked the phase"),
        };

        next.events.push(TranscriptEvent::Question {
            turn,
            cycle,
            asker,
            target,
            text: text.to_string(),
        });
        next.pending_question = Some(super::PendingQuestion {
            asker,
            target,
            text: text.to_string(),
        });
        next.phase = answer_phase;
        Ok(next)
    }

    /// Empty answers are accepted; only format is enforced, not content.
    pub fn apply_answer(&self, responder: usize, text: &str) -> Result<GameState, GameError> {
        self.expect_actor(responder, Schema::Answer)?;
        let n = self.player_count() as u32;
        let mut next = self.clone();
        let (cycle, next_phase) = match self.phase {
            Phase::RoundRobinAnswer(t) if t < n => (None, Phase::RoundRobinQuestion(t + 1)),
            Phase::RoundRobinAnswer(_) => (None, Phase::FreeQuestion(1)),
            Phase::FreeAnswer(c) => (Some(c), Phase::SpyGuess(c)),
            _ => unreachable!("expect_actor checked the phase"),
        };
        next.events.push(TranscriptEvent::Answer {
            turn: self.question_count(),
            cycle,
            responder,
            text: text.to_string(),
        });
        next.current_questioner = responder;
        next.pending_question = None;
        next.phase = next_phase;
        Ok(next)
    }

    pub fn apply_spy_guess(&self, input: &SpyGuessInput) -> Result<GameState, GameError> {
        let spy = self.spy_seat();
        self.expect_actor(spy, Schema::Guess)?;
        let round = self.phase.round().expect("guess phases have a round");
        let confidence = clamp_confidence(input.confidence);
        let mut next = self.clone();

        if !input.should_guess {
            next.events.push(TranscriptEvent::GuessSkip { round, confidence });
            next.phase = match self.phase {
                Phase::SpyGuess(c) => Phase::Vote(c),
                _ => Phase::FinalVote,
            };
            return Ok(next);
        }

        let guess = input
            .best_guess
            .as_deref()
            .filter(|g| !g.trim().is_empty())
            .ok_or_else(|| GameError::MalformedOutput {
                seat: spy,
                detail: "should_guess is true but best_guess is empty".into(),
            })?;
        let correct = guess_matches(guess, self.target_entity());
        next.events.push(TranscriptEvent::GuessAttempt {
            round,
            spy_seat: spy,
            guess_text: guess.to_string(),
            correct,
            confidence,
        });
        Ok(next.finish(if correct {
            OutcomeCategory::SpyGuessCorrect
        } else {
            OutcomeCategory::SpyGuessWrong
        }))
    }

    /// A seat is accused when it holds strictly more than half of all
    /// players' votes; skips count toward the denominator but never toward a seat.
    pub fn apply_vote_session(&self, votes: &BTreeMap<usize, VoteInput>) -> Result<GameState, GameError> {
        if self.is_terminal() {
            return Err(GameError::AlreadyTerminal);
        }
        if !self.phase.is_vote() {
            return Err(GameError::WrongPhase { phase: self.phase });
        }
        let n = self.player_count();
        if votes.len() != n || votes.keys().any(|&s| s >= n) {
            return Err(GameError::Scheduling(format!(
                "vote session needs one ballot per seat, got seats {:?}",
                votes.keys().collect::<Vec<_>>()
            )));
        }

        let mut resolved = BTreeMap::new();
        for (&seat, ballot) in votes {
            let choice = match ballot {
                VoteInput::Skip => VoteChoice::Skip,
                VoteInput::Alias(alias) => {
                    let target = self.resolve_alias(alias).ok_or_else(|| GameError::IllegalAction {
                        seat,
                        detail: format!("vote for unknown player {alias:?}"),
                    })?;
                    if target == seat {
                        return Err(GameError::IllegalAction {
                            seat,
                            detail: "a player cannot vote for themselves".into(),
                        });
                    }
                    VoteChoice::Seat(target)
                }
            };
            resolved.insert(seat, choice);
        }

        let accused = majority(&resolved, n);
        let round = self.phase.round().expect("vote phases have a round");
        let mut next = self.clone();
        next.events.push(TranscriptEvent::VoteSession {
            round,
            votes: resolved,
            accused,
        });

        Ok(match (accused, self.phase) {
            (Some(seat), _) if self.seats[seat].role == Role::Spy => next.finish(OutcomeCategory::VoteMajoritySpy),
            (Some(_), _) => next.finish(OutcomeCategory::VoteMajorityNonSpy),
            (None, Phase::Vote(c)) => {
                next.phase = if c < self.config.free_cycles {
                    Phase::FreeQuestion(c + 1)
                } else {
                    Phase::FinalSpyGuess
                };
                next
            }
            (None, _) => next.finish(OutcomeCategory::SpySurvived),
        })
    }

    pub fn apply_forfeit(&self, seat: usize, reason: ForfeitReason) -> Result<GameState, GameError> {
        if self.is_terminal() {
            return Err(GameError::AlreadyTerminal);
        }
        let role = self
            .seats
            .get(seat)
            .ok_or_else(|| GameError::Scheduling(format!("no seat {seat}")))?
            .role;
        let mut next = self.clone();
        next.events.push(TranscriptEvent::Forfeit { seat, reason });
        Ok(next.finish(match role {
            Role::Spy => OutcomeCategory::SpySurrender,
            Role::NonSpy => OutcomeCategory::NonSpySurrender,
        }))
    }

    fn finish(mut self, category: OutcomeCategory) -> GameState {
        let winner = category.winner();
        let (winning_model, losing_model) = match winner {
            Team::SpyTeam => (&self.config.spy_model, &self.config.nonspy_model),
            Team::NonSpyTeam => (&self.config.nonspy_model, &self.config.spy_model),
        };
        self.outcome = Some(Outcome {
            category,
            winner,
            winning_model: winning_model.clone(),
            losing_model: losing_model.clone(),
            ended_at_turn: self.question_count(),
        });
        self.phase = Phase::Terminal;
        self.pending_question = None;
        self
    }
}

/// Seat holding strictly more than `n / 2` of the ballots, if any.
pub(crate) fn majority(votes: &BTreeMap<usize, VoteChoice>, n: usize) -> Option<usize> {
    let mut tally: BTreeMap<usize, usize> = BTreeMap::new();
    for choice in votes.values() {
        if let VoteChoice::Seat(s) = choice {
            *tally.entry(*s).or_default() += 1;
        }
    }
    tally
        .into_iter()
        .find(|&(_, count)| 2 * count > n)
        .map(|(seat, _)| seat)
}

fn clamp_confidence(c: f64) -> f64 {
    if c.is_nan() {
        0.0
    } else {
        c.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Language, Scenario, ScenarioKind};

    fn pool() -> EntityPool {
        let mut names: Vec<String> = (0..28).map(|i| format!("Place {i}")).collect();
        names.push("Jam Gadang".into());
        names.push("Monas".into());
        EntityPool::new(Scenario::new(ScenarioKind::LocalLocation, Language::Id), names)
    }

    fn game(n: usize, seed: u64) -> GameState {
        let cfg = MatchConfig::new(n, "villager", "spy", pool().scenario.clone(), seed);
        GameState::new(cfg, pool()).unwrap()
    }

    fn with_target(mut g: GameState, name: &str) -> GameState {
        g.target_index = g.pool.position(name).unwrap();
        g
    }

    /// Plays the round-robin cycle with correct targets.
    fn finish_round_robin(mut g: GameState) -> GameState {
        let n = g.player_count();
        for t in 0..n {
            let target = g.alias((t + 1) % n).to_string();
            g = g.apply_question(t, &target, "q").unwrap();
            g = g.apply_answer((t + 1) % n, "a").unwrap();
        }
        g
    }

    fn to_first_guess(g: GameState) -> GameState {
        let g = finish_round_robin(g);
        let asker = g.current_questioner;
        let other = (asker + 1) % g.player_count();
        let g = g.apply_question(asker, g.alias(other), "q").unwrap();
        g.apply_answer(other, "a").unwrap()
    }

    fn ballots(g: &GameState, pick: impl Fn(usize) -> VoteInput) -> BTreeMap<usize, VoteInput> {
        (0..g.player_count()).map(|s| (s, pick(s))).collect()
    }

    #[test]
    fn new_game_is_deterministic() {
        assert_eq!(game(5, 42), game(5, 42));
        let a = serde_json::to_string(&game(5, 42)).unwrap();
        let b = serde_json::to_string(&game(5, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_turn_budget_for_five() {
        let g = game(5, 1);
        assert_eq!(g.config.rr_turns(), 5);
        assert_eq!(g.config.free_cycles, 5);
        assert_eq!(g.config.turn_limit(), 10);
        assert_eq!(g.phase, Phase::RoundRobinQuestion(1));
        assert_eq!(g.current_questioner, 0);
    }

    #[test]
    fn exactly_one_spy() {
        for seed in 0..50 {
            let g = game(3, seed);
            assert_eq!(g.seats.iter().filter(|s| s.role == Role::Spy).count(), 1);
            assert_eq!(g.seats.iter().filter(|s| s.role == Role::NonSpy).count(), 2);
        }
    }

    #[test]
    fn seeds_vary_layout() {
        let layouts: std::collections::HashSet<_> = (0..40)
            .map(|s| {
                let g = game(5, s);
                (g.spy_seat(), g.target_index, g.alias(0).to_string())
            })
            .collect();
        assert!(layouts.len() > 20);
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = MatchConfig::new(2, "a", "b", pool().scenario.clone(), 0);
        assert!(matches!(GameState::new(cfg, pool()), Err(GameError::InvalidConfig(_))));
        let cfg = MatchConfig::new(9, "a", "b", pool().scenario.clone(), 0);
        assert!(GameState::new(cfg, pool()).is_err());
        let cfg = MatchConfig::new(5, "a", "a", pool().scenario.clone(), 0);
        assert!(GameState::new(cfg.clone(), pool()).is_err());
        let cfg = MatchConfig {
            allow_self_play: true,
            ..cfg
        };
        assert!(GameState::new(cfg, pool()).is_ok());
        let short = EntityPool::new(pool().scenario.clone(), vec!["x".into(); 29]);
        let cfg = MatchConfig::new(5, "a", "b", pool().scenario.clone(), 0);
        assert!(matches!(GameState::new(cfg, short), Err(GameError::InvalidPool(_))));
    }

    #[test]
    fn round_robin_targets_next_seat() {
        let mut g = game(5, 3);
        for t in 0..2 {
            let tgt = g.alias(t + 1).to_string();
            g = g.apply_question(t, &tgt, "q").unwrap();
            g = g.apply_answer(t + 1, "a").unwrap();
        }
        match g.next_action() {
            NextAction::Single(req) => {
                assert_eq!(req.phase, Phase::RoundRobinQuestion(3));
                assert_eq!(req.seat, 2);
                assert_eq!(req.required_target, Some(3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_robin_wrong_target_is_coerced() {
        let g = game(5, 3);
        let wrong = g.alias(3).to_string();
        let g = g.apply_question(0, &wrong, "Where are we?").unwrap();
        assert_eq!(g.coercions.len(), 1);
        assert_eq!(g.coercions[0].mandated, 1);
        assert_eq!(g.pending_question.as_ref().unwrap().target, 1);
        match &g.events[0] {
            TranscriptEvent::Question { target, text, .. } => {
                assert_eq!(*target, 1);
                assert_eq!(text, "Where are we?");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn correct_target_records_verbatim_without_anomaly() {
        let g = game(5, 3);
        let right = g.alias(1).to_string();
        let g = g.apply_question(0, &right, "  exact text ").unwrap();
        assert!(g.coercions.is_empty());
        assert!(matches!(&g.events[0], TranscriptEvent::Question { text, .. } if text == "  exact text "));
    }

    #[test]
    fn last_round_robin_answer_opens_free_cycle() {
        let g = finish_round_robin(game(5, 9));
        assert_eq!(g.phase, Phase::FreeQuestion(1));
        assert_eq!(g.current_questioner, 0);
    }

    #[test]
    fn free_questioner_is_previous_answerer() {
        let g = finish_round_robin(game(5, 9));
        let g = g.apply_question(0, g.alias(3), "q").unwrap();
        let g = g.apply_answer(3, "a").unwrap();
        assert_eq!(g.phase, Phase::SpyGuess(1));
        let g = g.apply_spy_guess(&SpyGuessInput::skip()).unwrap();
        let g = g.apply_vote_session(&ballots(&g, |_| VoteInput::Skip)).unwrap();
        assert_eq!(g.phase, Phase::FreeQuestion(2));
        match g.next_action() {
            NextAction::Single(req) => assert_eq!(req.seat, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_question_legality() {
        let g = finish_round_robin(game(5, 9));
        let me = g.alias(0).to_string();
        assert!(matches!(
            g.apply_question(0, &me, "q"),
            Err(GameError::IllegalAction { seat: 0, .. })
        ));
        assert!(matches!(
            g.apply_question(0, "Zed", "q"),
            Err(GameError::IllegalAction { .. })
        ));
        assert!(matches!(
            g.apply_question(0, "", "q"),
            Err(GameError::IllegalAction { .. })
        ));
        // asking back the previous asker is allowed
        assert!(g.apply_question(0, g.alias(4), "q").is_ok());
        assert!(matches!(
            g.apply_question(1, g.alias(2), "q"),
            Err(GameError::Scheduling(_))
        ));
    }

    #[test]
    fn empty_answer_is_accepted() {
        let g = game(5, 2);
        let g = g.apply_question(0, g.alias(1), "q").unwrap();
        let g = g.apply_answer(1, "").unwrap();
        assert!(matches!(&g.events[1], TranscriptEvent::Answer { text, .. } if text.is_empty()));
    }

    #[test]
    fn wrong_responder_is_scheduling_error() {
        let g = game(5, 2);
        let g = g.apply_question(0, g.alias(1), "q").unwrap();
        assert!(matches!(g.apply_answer(2, "a"), Err(GameError::Scheduling(_))));
    }

    #[test]
    fn free_cycle_two_answer_moves_to_guess() {
        let g = to_first_guess(game(5, 11));
        let g = g.apply_spy_guess(&SpyGuessInput::skip()).unwrap();
        let g = g.apply_vote_session(&ballots(&g, |_| VoteInput::Skip)).unwrap();
        let asker = g.current_questioner;
        let other = (asker + 2) % 5;
        let g = g.apply_question(asker, g.alias(other), "q").unwrap();
        let g = g.apply_answer(other, "a").unwrap();
        assert_eq!(g.phase, Phase::SpyGuess(2));
    }

    #[test]
    fn wrong_guess_loses_for_spy() {
        let g = with_target(to_first_guess(game(5, 4)), "Jam Gadang");
        let g = g.apply_spy_guess(&SpyGuessInput::guess("Monas", 0.9)).unwrap();
        let out = g.outcome.unwrap();
        assert_eq!(out.category, OutcomeCategory::SpyGuessWrong);
        assert_eq!(out.winner, Team::NonSpyTeam);
        assert_eq!(out.winning_model, "villager");
        assert_eq!(out.ended_at_turn, 6);
    }

    #[test]
    fn normalized_guess_wins() {
        let g = with_target(to_first_guess(game(5, 4)), "Jam Gadang");
        let g = g.apply_spy_guess(&SpyGuessInput::guess(" jam gadang ", 2.0)).unwrap();
        assert_eq!(g.outcome.as_ref().unwrap().category, OutcomeCategory::SpyGuessCorrect);
        assert!(
            matches!(g.events.last(), Some(TranscriptEvent::GuessAttempt { confidence, .. }) if *confidence == 1.0)
        );
    }

    #[test]
    fn unlisted_guess_is_wrong_not_forfeit() {
        let g = to_first_guess(game(5, 4));
        let g = g
            .apply_spy_guess(&SpyGuessInput::guess("Some Unlisted Place", 0.5))
            .unwrap();
        assert_eq!(g.outcome.unwrap().category, OutcomeCategory::SpyGuessWrong);
    }

    #[test]
    fn skip_is_hidden_and_moves_to_vote() {
        let g = to_first_guess(game(5, 4));
        let before = g.events.len();
        let g = g.apply_spy_guess(&SpyGuessInput::skip()).unwrap();
        assert_eq!(g.phase, Phase::Vote(1));
        assert_eq!(g.events.len(), before + 1);
        assert!(!g.events.last().unwrap().is_public());
    }

    #[test]
    fn guess_without_text_is_malformed() {
        let g = to_first_guess(game(5, 4));
        let input = SpyGuessInput {
            should_guess: true,
            best_guess: None,
            confidence: 0.4,
        };
        assert!(matches!(
            g.apply_spy_guess(&input),
            Err(GameError::MalformedOutput { .. })
        ));
        let input = SpyGuessInput {
            best_guess: Some("  ".into()),
            ..input
        };
        assert!(matches!(
            g.apply_spy_guess(&input),
            Err(GameError::MalformedOutput { .. })
        ));
    }

    #[test]
    fn three_of_five_accuses() {
        let g = to_first_guess(game(5, 4))
            .apply_spy_guess(&SpyGuessInput::skip())
            .unwrap();
        let spy = g.spy_seat();
        let spy_alias = g.alias(spy).to_string();
        let voters: Vec<usize> = (0..5).filter(|&s| s != spy).take(3).collect();
        let votes = ballots(&g, |s| {
            if voters.contains(&s) {
                VoteInput::Alias(spy_alias.clone())
            } else {
                VoteInput::Skip
            }
        });
        let g = g.apply_vote_session(&votes).unwrap();
        assert_eq!(g.outcome.unwrap().category, OutcomeCategory::VoteMajoritySpy);
    }

    #[test]
    fn majority_on_villager_wins_for_spy() {
        let g = to_first_guess(game(5, 4))
            .apply_spy_guess(&SpyGuessInput::skip())
            .unwrap();
        let spy = g.spy_seat();
        let victim = (spy + 1) % 5;
        let alias = g.alias(victim).to_string();
        let other = g.alias((victim + 1) % 5).to_string();
        let votes = ballots(&g, |s| {
            if s == victim {
                VoteInput::Alias(other.clone())
            } else {
                VoteInput::Alias(alias.clone())
            }
        });
        let g = g.apply_vote_session(&votes).unwrap();
        let out = g.outcome.unwrap();
        assert_eq!(out.category, OutcomeCategory::VoteMajorityNonSpy);
        assert_eq!(out.winner, Team::SpyTeam);
    }

    #[test]
    fn two_votes_and_three_skips_continue() {
        let g = to_first_guess(game(5, 4))
            .apply_spy_guess(&SpyGuessInput::skip())
            .unwrap();
        let x = g.alias(0).to_string();
        let votes = ballots(&g, |s| {
            if s == 1 || s == 2 {
                VoteInput::Alias(x.clone())
            } else {
                VoteInput::Skip
            }
        });
        let g = g.apply_vote_session(&votes).unwrap();
        assert_eq!(g.phase, Phase::FreeQuestion(2));
        assert!(matches!(
            g.events.last(),
            Some(TranscriptEvent::VoteSession { accused: None, .. })
        ));
    }

    #[test]
    fn illegal_ballots() {
        let g = to_first_guess(game(5, 4))
            .apply_spy_guess(&SpyGuessInput::skip())
            .unwrap();
        let self_vote = ballots(&g, |s| {
            if s == 2 {
                VoteInput::Alias(g.alias(2).to_string())
            } else {
                VoteInput::Skip
            }
        });
        assert!(matches!(
            g.apply_vote_session(&self_vote),
            Err(GameError::IllegalAction { seat: 2, .. })
        ));
        let unknown = ballots(&g, |s| {
            if s == 1 {
                VoteInput::Alias("Nobody".into())
            } else {
                VoteInput::Skip
            }
        });
        assert!(matches!(
            g.apply_vote_session(&unknown),
            Err(GameError::IllegalAction { seat: 1, .. })
        ));
        let mut short = ballots(&g, |_| VoteInput::Skip);
        short.remove(&0);
        assert!(matches!(g.apply_vote_session(&short), Err(GameError::Scheduling(_))));
    }

    #[test]
    fn final_vote_without_majority_spy_survives() {
        let mut g = to_first_guess(game(5, 4));
        loop {
            g = g.apply_spy_guess(&SpyGuessInput::skip()).unwrap();
            let final_round = g.phase == Phase::FinalVote;
            g = g.apply_vote_session(&ballots(&g, |_| VoteInput::Skip)).unwrap();
            if final_round {
                break;
            }
            if g.phase == Phase::FinalSpyGuess {
                continue;
            }
            let asker = g.current_questioner;
            let other = (asker + 1) % 5;
            g = g.apply_question(asker, g.alias(other), "q").unwrap();
            g = g.apply_answer(other, "a").unwrap();
        }
        let out = g.outcome.clone().unwrap();
        assert_eq!(out.category, OutcomeCategory::SpySurvived);
        assert_eq!(out.winner, Team::SpyTeam);
        assert_eq!(g.question_count(), 10);
    }

    #[test]
    fn forfeits_by_role() {
        let g = game(5, 8);
        let spy = g.spy_seat();
        let villager = (spy + 1) % 5;
        let out = g
            .apply_forfeit(spy, ForfeitReason::MalformedOutput)
            .unwrap()
            .outcome
            .unwrap();
        assert_eq!(out.category, OutcomeCategory::SpySurrender);
        assert_eq!(out.winner, Team::NonSpyTeam);
        let done = g.apply_forfeit(villager, ForfeitReason::MalformedOutput).unwrap();
        assert_eq!(
            done.outcome.as_ref().unwrap().category,
            OutcomeCategory::NonSpySurrender
        );
        assert_eq!(done.outcome.as_ref().unwrap().winner, Team::SpyTeam);
        assert_eq!(
            done.apply_forfeit(spy, ForfeitReason::IllegalAction),
            Err(GameError::AlreadyTerminal)
        );
    }

    #[test]
    fn actions_on_terminal_state_are_rejected() {
        let g = game(5, 8).apply_forfeit(0, ForfeitReason::TransportFailure).unwrap();
        assert_eq!(g.next_action(), NextAction::Terminal);
        assert_eq!(g.apply_answer(1, "a"), Err(GameError::AlreadyTerminal));
        assert_eq!(
            g.apply_spy_guess(&SpyGuessInput::skip()),
            Err(GameError::AlreadyTerminal)
        );
    }

    #[test]
    fn category_winner_table() {
        use OutcomeCategory::*;
        for c in OutcomeCategory::ALL {
            let spy_wins = matches!(c, SpyGuessCorrect | VoteMajorityNonSpy | NonSpySurrender | SpySurvived);
            assert_eq!(c.winner() == Team::SpyTeam, spy_wins, "{c:?}");
        }
    }
}
