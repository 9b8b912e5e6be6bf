use std::collections::BTreeMap;

use log::debug;
use thiserror::Error;

use super::factory::AgentFactory;
use super::plan::MatchTicket;
use super::record::{CallLog, GameRecord};
use crate::agent::{
    interpret, redact, render_prompt, Agent, AgentError, AgentErrorKind, AgentRequest, PromptBundle, ValidatedAction,
};
use crate::game::{ActionRequest, EntityPool, ForfeitReason, GameError, GameState, NextAction, VoteInput};

/// Appended to the prompt when a seat is re-asked after an invalid reply.
pub const RETRY_NOTE: &str = "Your previous reply could not be used";

#[derive(Debug, Error)]
pub enum MatchError {
    /// The transport gave up; the ticket is marked Failed and no outcome is recorded.
    #[error("transport failure for seat {seat}: {detail}")]
    Transport { seat: usize, detail: String },
    #[error("match setup failed: {0}")]
    Setup(String),
    #[error("engine rejected a validated action: {0}")]
    Engine(GameError),
}

enum Step<T> {
    Accepted(T),
    Forfeit(ForfeitReason),
}

struct Match<'a> {
    agents: Vec<Box<dyn Agent>>,
    bundle: &'a PromptBundle,
    retry_limit: u32,
    calls: Vec<CallLog>,
}

fn forfeit_reason(kind: AgentErrorKind) -> ForfeitReason {
    match kind {
        AgentErrorKind::SemanticIllegal => ForfeitReason::IllegalAction,
        _ => ForfeitReason::MalformedOutput,
    }
}

/// Engine rejections of a well-formed action are charged like semantic errors.
fn charge(err: GameError) -> Result<AgentError, MatchError> {
    match err {
        GameError::IllegalAction { detail, .. } => Ok(AgentError::new(AgentErrorKind::SemanticIllegal, detail)),
        GameError::MalformedOutput { detail, .. } => Ok(AgentError::new(AgentErrorKind::FormatMalformed, detail)),
        other => Err(MatchError::Engine(other)),
    }
}

impl Match<'_> {
    /// Asks one seat until it produces an accepted action or the retry budget runs out.
    fn ask<T>(
        &mut self,
        state: &GameState,
        req: &ActionRequest,
        mut accept: impl FnMut(ValidatedAction) -> Result<T, AgentError>,
    ) -> Result<Step<T>, MatchError> {
        let view = redact(state, req.seat);
        let base_prompt =
            render_prompt(&view, req.schema, self.bundle).map_err(|e| MatchError::Setup(e.to_string()))?;
        let mut last_error: Option<AgentError> = None;
        for attempt in 0..=self.retry_limit {
            let prompt = match &last_error {
                None => base_prompt.clone(),
                Some(e) => format!(
                    "{base_prompt}\n\n{RETRY_NOTE} ({}). Reply again and end with a |||...||| block in the required format.",
                    e.detail
                ),
            };
            let request = AgentRequest {
                view: &view,
                prompt: &prompt,
                schema: req.schema,
                attempt,
            };
            let mut log = CallLog {
                seat: req.seat,
                phase: req.phase,
                schema: req.schema,
                attempt,
                prompt: prompt.clone(),
                raw_output: None,
                error: None,
                error_detail: None,
                elapsed_ms: None,
                transport_retries: 0,
                prompt_tokens: None,
                completion_tokens: None,
                correlation_id: None,
            };
            let completion = match self.agents[req.seat].act(&request) {
                Ok(c) => c,
                Err(e) if e.kind == AgentErrorKind::Transport => {
                    log.error = Some(e.kind);
                    log.error_detail = Some(e.detail.clone());
                    self.calls.push(log);
                    return Err(MatchError::Transport {
                        seat: req.seat,
                        detail: e.detail,
                    });
                }
                Err(e) => {
                    log.error = Some(e.kind);
                    log.error_detail = Some(e.detail.clone());
                    self.calls.push(log);
                    last_error = Some(e);
                    continue;
                }
            };
            log.raw_output = Some(completion.text.clone());
            log.elapsed_ms = completion.elapsed_ms;
            log.transport_retries = completion.transport_retries;
            log.prompt_tokens = completion.prompt_tokens;
            log.completion_tokens = completion.completion_tokens;
            log.correlation_id = completion.correlation_id;

            let result = interpret(&completion.text, req.schema, &view).and_then(|(_, action)| accept(action));
            match result {
                Ok(value) => {
                    self.calls.push(log);
                    return Ok(Step::Accepted(value));
                }
                Err(e) => {
                    debug!("seat {} attempt {attempt}: {e}", req.seat);
                    log.error = Some(e.kind);
                    log.error_detail = Some(e.detail.clone());
                    self.calls.push(log);
                    last_error = Some(e);
                }
            }
        }
        let kind = last_error.map(|e| e.kind).unwrap_or(AgentErrorKind::FormatMalformed);
        Ok(Step::Forfeit(forfeit_reason(kind)))
    }

    fn single(&mut self, state: &GameState, req: &ActionRequest) -> Result<GameState, MatchError> {
        let mut engine_fault = None;
        let step = self.ask(state, req, |action| {
            let applied = match action {
                ValidatedAction::Question { declared_target, text } => {
                    state.apply_question(req.seat, &declared_target, &text)
                }
                ValidatedAction::Answer { text } => state.apply_answer(req.seat, &text),
                ValidatedAction::Guess(input) => state.apply_spy_guess(&input),
                ValidatedAction::Vote { .. } => {
                    return Err(AgentError::new(
                        AgentErrorKind::SemanticIllegal,
                        "vote outside a vote phase",
                    ))
                }
            };
            applied.map_err(|e| match charge(e) {
                Ok(agent_err) => agent_err,
                Err(fault) => {
                    engine_fault = Some(fault);
                    AgentError::new(AgentErrorKind::SemanticIllegal, "engine fault")
                }
            })
        });
        if let Some(fault) = engine_fault {
            return Err(fault);
        }
        match step? {
            Step::Accepted(next) => Ok(next),
            Step::Forfeit(reason) => state.apply_forfeit(req.seat, reason).map_err(MatchError::Engine),
        }
    }

    fn vote(&mut self, state: &GameState, reqs: &[ActionRequest]) -> Result<GameState, MatchError> {
        let mut ballots = BTreeMap::new();
        for req in reqs {
            let step = self.ask(state, req, |action| match action {
                ValidatedAction::Vote { ballot, .. } => Ok(ballot),
                _ => Err(AgentError::new(AgentErrorKind::SemanticIllegal, "expected a vote")),
            })?;
            match step {
                Step::Accepted(ballot) => {
                    ballots.insert(req.seat, ballot);
                }
                Step::Forfeit(reason) => return state.apply_forfeit(req.seat, reason).map_err(MatchError::Engine),
            }
        }
        let ballots: BTreeMap<usize, VoteInput> = ballots;
        state.apply_vote_session(&ballots).map_err(MatchError::Engine)
    }
}

/// Plays one ticket to completion.
pub fn run_match(
    ticket: &MatchTicket,
    factory: &dyn AgentFactory,
    pool: &EntityPool,
    bundle: &PromptBundle,
) -> Result<GameRecord, MatchError> {
    if pool.scenario != ticket.config.scenario {
        return Err(MatchError::Setup(format!(
            "pool is {} but the ticket wants {}",
            pool.scenario, ticket.config.scenario
        )));
    }
    let mut state =
        GameState::new(ticket.config.clone(), pool.clone()).map_err(|e| MatchError::Setup(e.to_string()))?;
    let agents = state
        .seats
        .iter()
        .map(|seat| factory.build(&seat.model, seat.index, &state))
        .collect::<Result<Vec<_>, _>>()
        .map_err(MatchError::Setup)?;
    let mut m = Match {
        agents,
        bundle,
        retry_limit: ticket.config.retry_limit,
        calls: Vec::new(),
    };
    loop {
        state = match state.next_action() {
            NextAction::Terminal => break,
            NextAction::Single(req) => m.single(&state, &req)?,
            NextAction::Simultaneous(reqs) => m.vote(&state, &reqs)?,
        };
    }
    Ok(GameRecord::from_state(ticket.ticket_id.clone(), &state, m.calls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Completion;
    use crate::corpus::bundled_pool;
    use crate::game::{MatchConfig, OutcomeCategory, Phase, Role, Scenario, ScenarioKind, TranscriptEvent};
    use crate::orchestrator::{BotFactory, TicketStatus};

    fn ticket(nonspy: &str, spy: &str, seed: u64, retry_limit: u32) -> MatchTicket {
        let mut config = MatchConfig::new(5, nonspy, spy, Scenario::new(ScenarioKind::Generic, "en"), seed);
        config.retry_limit = retry_limit;
        MatchTicket {
            ticket_id: format!("t{seed}"),
            index: 0,
            config,
            status: TicketStatus::Pending,
        }
    }

    fn play(t: &MatchTicket) -> GameRecord {
        let pool = bundled_pool(&t.config.scenario).unwrap();
        run_match(t, &BotFactory, &pool, &PromptBundle::default()).unwrap()
    }

    fn questions(r: &GameRecord) -> (usize, usize) {
        let mut rr = 0;
        let mut free = 0;
        for e in &r.events {
            if let TranscriptEvent::Question { cycle, .. } = e {
                if cycle.is_some() {
                    free += 1
                } else {
                    rr += 1
                }
            }
        }
        (rr, free)
    }

    #[test]
    fn oracle_spy_wins_at_first_guess() {
        for seed in 0..5 {
            let r = play(&ticket("bot:honest", "bot:oracle", seed, 0));
            assert_eq!(r.outcome.category, OutcomeCategory::SpyGuessCorrect);
            assert_eq!(questions(&r), (5, 1));
            assert_eq!(r.outcome.winning_model, "bot:oracle");
        }
    }

    #[test]
    fn cautious_spy_survives_honest_votes() {
        for seed in 0..5 {
            let r = play(&ticket("bot:honest", "bot:cautious", seed, 0));
            assert_eq!(r.outcome.category, OutcomeCategory::SpySurvived, "seed {seed}");
            assert_eq!(questions(&r), (5, 5));
            let votes = r
                .events
                .iter()
                .filter(|e| matches!(e, TranscriptEvent::VoteSession { .. }))
                .count();
            assert_eq!(votes, 6);
        }
    }

    #[test]
    fn mute_spy_surrenders_at_first_action() {
        let r = play(&ticket("bot:honest", "bot:mute", 3, 0));
        assert_eq!(r.outcome.category, OutcomeCategory::SpySurrender);
        let spy = r.spy_seat().unwrap();
        // The spy's first action is a question on turn spy+1 or the answer to the previous asker.
        let failing = r.calls.iter().find(|c| c.error.is_some()).unwrap();
        assert_eq!(failing.seat, spy);
        assert_eq!(failing.error, Some(AgentErrorKind::FormatMalformed));
        assert_eq!(r.calls.iter().filter(|c| c.seat == spy).count(), 1);
        assert!(matches!(r.events.last(), Some(TranscriptEvent::Forfeit { seat, .. }) if *seat == spy));
    }

    #[test]
    fn mute_non_spies_surrender() {
        let r = play(&ticket("bot:mute", "bot:honest", 3, 0));
        assert_eq!(r.outcome.category, OutcomeCategory::NonSpySurrender);
        assert_eq!(r.calls.len(), 1);
    }

    #[test]
    fn retry_budget_allows_re_asks() {
        let r = play(&ticket("bot:honest", "bot:mute", 3, 2));
        assert_eq!(r.outcome.category, OutcomeCategory::SpySurrender);
        let spy_calls: Vec<_> = r.calls.iter().filter(|c| c.seat == r.spy_seat().unwrap()).collect();
        assert_eq!(spy_calls.len(), 3);
        assert!(spy_calls[1].prompt.contains(RETRY_NOTE));
        assert!(!spy_calls[0].prompt.contains(RETRY_NOTE));
    }

    #[test]
    fn records_are_deterministic() {
        let t = ticket("bot:random", "bot:random:1", 11, 0);
        assert_eq!(
            serde_json::to_string(&play(&t)).unwrap(),
            serde_json::to_string(&play(&t)).unwrap()
        );
    }

    #[test]
    fn leaky_games_are_annotated() {
        let r = play(&ticket("bot:leaky", "bot:cautious", 5, 0));
        assert!(!r.annotations.leaks.is_empty());
        for leak in &r.annotations.leaks {
            assert_eq!(r.seats[leak.seat].role, Role::NonSpy);
        }
    }

    struct Flaky;

    impl Agent for Flaky {
        fn act(&mut self, req: &AgentRequest<'_>) -> Result<Completion, AgentError> {
            if req.view.phase == Phase::RoundRobinAnswer(2) {
                Err(AgentError::new(AgentErrorKind::Transport, "503 after retries"))
            } else {
                Ok(Completion::text(
                    crate::agent::ScriptedAgent::new(crate::agent::ScriptedKind::Honest, 0).reply(req.view, req.schema),
                ))
            }
        }
    }

    struct FlakyFactory;

    impl AgentFactory for FlakyFactory {
        fn build(&self, _: &str, _: usize, _: &GameState) -> Result<Box<dyn Agent>, String> {
            Ok(Box::new(Flaky))
        }
    }

    #[test]
    fn transport_failure_fails_the_ticket() {
        let t = ticket("a", "b", 1, 0);
        let pool = bundled_pool(&t.config.scenario).unwrap();
        let err = run_match(&t, &FlakyFactory, &pool, &PromptBundle::default()).unwrap_err();
        assert!(matches!(err, MatchError::Transport { .. }));
    }

    #[test]
    fn pool_must_match_ticket() {
        let t = ticket("bot:honest", "bot:oracle", 1, 0);
        let pool = bundled_pool(&Scenario::new(ScenarioKind::LocalFood, "id")).unwrap();
        assert!(matches!(
            run_match(&t, &BotFactory, &pool, &PromptBundle::default()),
            Err(MatchError::Setup(_))
        ));
    }
}
