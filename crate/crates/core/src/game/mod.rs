//! Rules engine for cultural turn-based Spyfall.
//!
//! A game is a [`GameState`] advanced by pure transitions: every `apply_*`
//! method borrows the current state and returns a new one, leaving the input
//! untouched. The phase order is fixed:
//!
//! ```text
//! n x (RoundRobinQuestion -> RoundRobinAnswer)
//! for c in 1..=free_cycles: FreeQuestion -> FreeAnswer -> SpyGuess -> Vote
//! FinalSpyGuess -> FinalVote -> Terminal
//! ```
//!
//! and any phase may end the game early.

mod engine;
mod error;
mod normalize;
mod pool;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use engine::{ActionRequest, NextAction, PendingQuestion, Schema, SpyGuessInput, VoteInput};
pub use error::GameError;
pub use normalize::{guess_matches, normalize_name};
pub use pool::{validate_pool, EntityPool, PoolViolation, PoolViolationKind, POOL_SIZE};

pub const MIN_PLAYERS: usize = 3;
pub const MAX_PLAYERS: usize = 8;

/// Display names handed to agents, in table order before shuffling.
pub const ALIASES: [&str; MAX_PLAYERS] = ["Alice", "Bob", "Charlie", "Diana", "Ethan", "Fiona", "George", "Hannah"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Generic,
    LocalLocation,
    LocalFood,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::Generic, Self::LocalLocation, Self::LocalFood];

    pub fn slug(self) -> &'static str {
        match self {
            Self::Generic => "generic",
            Self::LocalLocation => "local-location",
            Self::LocalFood => "local-food",
        }
    }

    /// Single-letter column prefix used in report tables (G, L, F).
    pub fn letter(self) -> char {
        match self {
            Self::Generic => 'G',
            Self::LocalLocation => 'L',
            Self::LocalFood => 'F',
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "generic" | "g" => Ok(Self::Generic),
            "local-location" | "location" | "l" => Ok(Self::LocalLocation),
            "local-food" | "food" | "f" => Ok(Self::LocalFood),
            other => Err(GameError::InvalidConfig(format!("unknown scenario kind {other:?}"))),
        }
    }
}

/// Output language of a scenario. Unknown codes are kept verbatim so user
/// pools can add languages.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Language {
    En,
    Id,
    Zh,
    Arz,
    Other(String),
}

impl Language {
    pub fn code(&self) -> &str {
        match self {
            Self::En => "en",
            Self::Id => "id",
            Self::Zh => "zh",
            Self::Arz => "arz",
            Self::Other(code) => code,
        }
    }

    /// Name substituted into the `{language}` prompt slot.
    pub fn display_name(&self) -> &str {
        match self {
            Self::En => "English",
            Self::Id => "Indonesian",
            Self::Zh => "Simplified Chinese",
            Self::Arz => "Egyptian Arabic",
            Self::Other(code) => code,
        }
    }
}

impl From<String> for Language {
    fn from(code: String) -> Self {
        match code.trim().to_ascii_lowercase().as_str() {
            "en" => Self::En,
            "id" => Self::Id,
            "zh" => Self::Zh,
            "arz" | "egy" | "eg" => Self::Arz,
            _ => Self::Other(code.trim().to_string()),
        }
    }
}

impl From<&str> for Language {
    fn from(code: &str) -> Self {
        Self::from(code.to_string())
    }
}

impl From<Language> for String {
    fn from(lang: Language) -> Self {
        lang.code().to_string()
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A (kind, language) pool selection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub language: Language,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, language: impl Into<Language>) -> Self {
        Self {
            kind,
            language: language.into(),
        }
    }

    /// The ten combinations with bundled pools: Generic in en/id/zh/arz,
    /// local locations and foods in id/zh/arz.
    pub fn bundled() -> Vec<Scenario> {
        let mut out = Vec::with_capacity(10);
        for lang in [Language::En, Language::Id, Language::Zh, Language::Arz] {
            out.push(Scenario::new(ScenarioKind::Generic, lang));
        }
        for kind in [ScenarioKind::LocalLocation, ScenarioKind::LocalFood] {
            for lang in [Language::Id, Language::Zh, Language::Arz] {
                out.push(Scenario::new(kind, lang));
            }
        }
        out
    }

    pub fn is_bundled(&self) -> bool {
        match self.kind {
            ScenarioKind::Generic => !matches!(self.language, Language::Other(_)),
            _ => matches!(self.language, Language::Id | Language::Zh | Language::Arz),
        }
    }

    /// Stable identifier, e.g. `local-food-id`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.kind.slug(), self.language.code())
    }

    /// Short column label, e.g. `F_ID`.
    pub fn label(&self) -> String {
        format!("{}_{}", self.kind.letter(), self.language.code().to_uppercase())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Scenario {
    type Err = GameError;

    /// Parses `<kind>-<language>` ids such as `generic-en` or `local-food-arz`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (kind, lang) = s
            .rsplit_once(['-', ':', '/'])
            .ok_or_else(|| GameError::InvalidConfig(format!("bad scenario id {s:?}")))?;
        Ok(Scenario::new(kind.parse()?, lang))
    }
}

/// Parameters of one match. Defaults follow the five-player setup:
/// `free_cycles = n`, so the turn limit is `2n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub player_count: usize,
    pub nonspy_model: String,
    pub spy_model: String,
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default)]
    pub retry_limit: u32,
    pub free_cycles: u32,
    #[serde(default)]
    pub allow_self_play: bool,
}

impl MatchConfig {
    pub fn new(
        player_count: usize,
        nonspy_model: impl Into<String>,
        spy_model: impl Into<String>,
        scenario: Scenario,
        seed: u64,
    ) -> Self {
        Self {
            player_count,
            nonspy_model: nonspy_model.into(),
            spy_model: spy_model.into(),
            scenario,
            seed,
            retry_limit: 0,
            free_cycles: player_count as u32,
            allow_self_play: false,
        }
    }

    pub fn rr_turns(&self) -> u32 {
        self.player_count as u32
    }

    /// Question-and-answer turns across both cycles.
    pub fn turn_limit(&self) -> u32 {
        self.rr_turns() + self.free_cycles
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&self.player_count) {
            return Err(GameError::InvalidConfig(format!(
                "player count {} outside {MIN_PLAYERS}..={MAX_PLAYERS}",
                self.player_count
            )));
        }
        if self.free_cycles < 1 {
            return Err(GameError::InvalidConfig("free_cycles must be at least 1".into()));
        }
        if self.spy_model == self.nonspy_model && !self.allow_self_play {
            return Err(GameError::InvalidConfig(format!(
                "spy and non-spy are both {:?}; self-play needs the explicit flag",
                self.spy_model
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Spy,
    NonSpy,
}

impl Role {
    pub fn team(self) -> Team {
        match self {
            Role::Spy => Team::SpyTeam,
            Role::NonSpy => Team::NonSpyTeam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seat {
    pub index: usize,
    pub alias: String,
    pub role: Role,
    pub model: String,
}

/// Guess and vote opportunities belong either to a free cycle or to the final round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Round {
    Cycle(u32),
    Final,
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Round::Cycle(c) => write!(f, "cycle {c}"),
            Round::Final => f.write_str("final"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    RoundRobinQuestion(u32),
    RoundRobinAnswer(u32),
    FreeQuestion(u32),
    FreeAnswer(u32),
    SpyGuess(u32),
    Vote(u32),
    FinalSpyGuess,
    FinalVote,
    Terminal,
}

impl Phase {
    pub fn is_question(self) -> bool {
        matches!(self, Phase::RoundRobinQuestion(_) | Phase::FreeQuestion(_))
    }

    pub fn is_answer(self) -> bool {
        matches!(self, Phase::RoundRobinAnswer(_) | Phase::FreeAnswer(_))
    }

    pub fn is_guess(self) -> bool {
        matches!(self, Phase::SpyGuess(_) | Phase::FinalSpyGuess)
    }

    pub fn is_vote(self) -> bool {
        matches!(self, Phase::Vote(_) | Phase::FinalVote)
    }

    pub fn is_round_robin(self) -> bool {
        matches!(self, Phase::RoundRobinQuestion(_) | Phase::RoundRobinAnswer(_))
    }

    /// Guess/vote round for guess and vote phases.
    pub fn round(self) -> Option<Round> {
        match self {
            Phase::SpyGuess(c) | Phase::Vote(c) => Some(Round::Cycle(c)),
            Phase::FinalSpyGuess | Phase::FinalVote => Some(Round::Final),
            _ => None,
        }
    }

    /// Short description shown to agents.
    pub fn describe(self, free_cycles: u32) -> String {
        match self {
            Phase::RoundRobinQuestion(t) => format!("Round Robin Phase (Phase 1A), turn {t}: ask a question"),
            Phase::RoundRobinAnswer(t) => format!("Round Robin Phase (Phase 1A), turn {t}: answer a question"),
            Phase::FreeQuestion(c) => format!("Phase 1B - Free Question, cycle {c} of {free_cycles}: ask a question"),
            Phase::FreeAnswer(c) => format!("Phase 1B - Free Question, cycle {c} of {free_cycles}: answer a question"),
            Phase::SpyGuess(c) => format!("Phase 2 - Spy Guess Decision, cycle {c} of {free_cycles}"),
            Phase::Vote(c) => format!("Phase 3 - Accusation Vote, cycle {c} of {free_cycles}"),
            Phase::FinalSpyGuess => "Final Round - final Spy guess opportunity".into(),
            Phase::FinalVote => "Final Round - final accusation vote (no majority means the Spy survives)".into(),
            Phase::Terminal => "Game over".into(),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::RoundRobinQuestion(t) => write!(f, "rr-question-{t}"),
            Phase::RoundRobinAnswer(t) => write!(f, "rr-answer-{t}"),
            Phase::FreeQuestion(c) => write!(f, "free-question-{c}"),
            Phase::FreeAnswer(c) => write!(f, "free-answer-{c}"),
            Phase::SpyGuess(c) => write!(f, "spy-guess-{c}"),
            Phase::Vote(c) => write!(f, "vote-{c}"),
            Phase::FinalSpyGuess => f.write_str("final-spy-guess"),
            Phase::FinalVote => f.write_str("final-vote"),
            Phase::Terminal => f.write_str("terminal"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VoteChoice {
    Seat(usize),
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForfeitReason {
    MalformedOutput,
    IllegalAction,
    TransportFailure,
}

/// One transcript entry. `cycle` is `None` during the round-robin cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TranscriptEvent {
    Question {
        turn: u32,
        cycle: Option<u32>,
        asker: usize,
        target: usize,
        text: String,
    },
    Answer {
        turn: u32,
        cycle: Option<u32>,
        responder: usize,
        text: String,
    },
    GuessAttempt {
        round: Round,
        spy_seat: usize,
        guess_text: String,
        correct: bool,
        confidence: f64,
    },
    GuessSkip {
        round: Round,
        #[serde(default)]
        confidence: f64,
    },
    VoteSession {
        round: Round,
        #[serde(with = "seat_keys")]
        votes: BTreeMap<usize, VoteChoice>,
        accused: Option<usize>,
    },
    Forfeit {
        seat: usize,
        reason: ForfeitReason,
    },
}

/// Seat-keyed maps inside internally tagged enums: JSON keys are strings, and
/// the buffered deserializer will not coerce them back to integers.
mod seat_keys {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<usize, V>, s: S) -> Result<S::Ok, S::Error> {
        map.iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect::<BTreeMap<String, &V>>()
            .serialize(s)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, V>, D::Error> {
        BTreeMap::<String, V>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("bad seat key {k:?}")))
            })
            .collect()
    }
}

impl TranscriptEvent {
    /// Hidden events (the spy's skipped guess) never reach agent-visible history.
    pub fn is_public(&self) -> bool {
        !matches!(self, TranscriptEvent::GuessSkip { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeCategory {
    SpyGuessCorrect,
    SpyGuessWrong,
    VoteMajoritySpy,
    VoteMajorityNonSpy,
    SpySurrender,
    NonSpySurrender,
    SpySurvived,
}

impl OutcomeCategory {
    pub const ALL: [OutcomeCategory; 7] = [
        Self::SpyGuessWrong,
        Self::SpyGuessCorrect,
        Self::VoteMajoritySpy,
        Self::VoteMajorityNonSpy,
        Self::SpySurrender,
        Self::NonSpySurrender,
        Self::SpySurvived,
    ];

    /// Winning team for each ending.
    pub fn winner(self) -> Team {
        match self {
            Self::SpyGuessCorrect | Self::VoteMajorityNonSpy | Self::NonSpySurrender | Self::SpySurvived => {
                Team::SpyTeam
            }
            Self::SpyGuessWrong | Self::VoteMajoritySpy | Self::SpySurrender => Team::NonSpyTeam,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::SpyGuessWrong => "Spy Guess Wrong",
            Self::SpyGuessCorrect => "Spy Guess Correct",
            Self::VoteMajoritySpy => "Vote Majority to Spy",
            Self::VoteMajorityNonSpy => "Vote Majority to Non-Spy",
            Self::SpySurrender => "Spy Surrender",
            Self::NonSpySurrender => "Non-Spy Surrender",
            Self::SpySurvived => "Spy Survived",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Team {
    SpyTeam,
    NonSpyTeam,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub category: OutcomeCategory,
    pub winner: Team,
    pub winning_model: String,
    pub losing_model: String,
    /// Number of questions asked before the game ended.
    pub ended_at_turn: u32,
}

/// A round-robin question whose declared target differed from the mandated one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCoercion {
    pub turn: u32,
    pub asker: usize,
    pub declared: String,
    pub mandated: usize,
}

/// Authoritative state of one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub config: MatchConfig,
    pub pool: EntityPool,
    pub seats: Vec<Seat>,
    pub target_index: usize,
    pub phase: Phase,
    pub current_questioner: usize,
    pub pending_question: Option<PendingQuestion>,
    pub events: Vec<TranscriptEvent>,
    pub outcome: Option<Outcome>,
    pub coercions: Vec<TargetCoercion>,
}
