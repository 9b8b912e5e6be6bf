use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bt::PairOutcome;
use crate::game::{normalize_name, OutcomeCategory, Role, Seat, TranscriptEvent, VoteChoice};
use crate::orchestrator::{GameRecord, LeakMark};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("entropy of an empty distribution")]
    EmptyDistribution,
}

/// A percentage with its numerator and denominator. `rate` is `None` when
/// the denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub hits: u64,
    pub total: u64,
    pub rate: Option<f64>,
}

impl RateCell {
    pub fn new(hits: u64, total: u64) -> Self {
        Self {
            hits,
            total,
            rate: (total > 0).then(|| 100.0 * hits as f64 / total as f64),
        }
    }

    fn add(&mut self, hit: bool) {
        *self = RateCell::new(self.hits + hit as u64, self.total + 1);
    }
}

/// Mean of per-item values with the item count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanCell {
    pub sum: f64,
    pub count: u64,
    pub mean: Option<f64>,
}

impl MeanCell {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.count += 1;
        self.mean = Some(self.sum / self.count as f64);
    }
}

/// One result per non-self-play record.
pub fn pair_outcomes(records: &[GameRecord]) -> Vec<PairOutcome> {
    records
        .iter()
        .filter(|r| !r.is_self_play())
        .map(|r| PairOutcome {
            winner_model: r.outcome.winning_model.clone(),
            loser_model: r.outcome.losing_model.clone(),
            scenario: r.config.scenario.id(),
            ticket_id: r.ticket_id.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WinRates {
    pub per_model: BTreeMap<String, RateCell>,
    /// `(row, column)`: row's wins over games between the two.
    pub matrix: BTreeMap<(String, String), RateCell>,
}

impl WinRates {
    pub fn cell(&self, row: &str, col: &str) -> Option<&RateCell> {
        self.matrix.get(&(row.to_string(), col.to_string()))
    }

    pub fn models(&self) -> Vec<String> {
        self.per_model.keys().cloned().collect()
    }
}

pub fn win_rates(records: &[GameRecord]) -> WinRates {
    let mut out = WinRates::default();
    for p in pair_outcomes(records) {
        let (w, l) = (p.winner_model, p.loser_model);
        out.per_model.entry(w.clone()).or_default().add(true);
        out.per_model.entry(l.clone()).or_default().add(false);
        out.matrix.entry((w.clone(), l.clone())).or_default().add(true);
        out.matrix.entry((l, w)).or_default().add(false);
    }
    out
}

/// Spy-team win rate per scenario id.
pub fn spy_win_rates(records: &[GameRecord]) -> BTreeMap<String, RateCell> {
    let mut out: BTreeMap<String, RateCell> = BTreeMap::new();
    for r in records {
        out.entry(r.config.scenario.id())
            .or_default()
            .add(r.outcome.category.winner() == Role::Spy.team());
    }
    out
}

/// Non-spy questions and answers whose normalized text contains the
/// normalized target.
pub fn find_leaks(events: &[TranscriptEvent], seats: &[Seat], target: &str) -> Vec<LeakMark> {
    let needle = normalize_name(target);
    if needle.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, event) in events.iter().enumerate() {
        let (seat, text) = match event {
            TranscriptEvent::Question { asker, text, .. } => (*asker, text),
            TranscriptEvent::Answer { responder, text, .. } => (*responder, text),
            _ => continue,
        };
        if seats.get(seat).map(|s| s.role) != Some(Role::NonSpy) {
            continue;
        }
        let hay = normalize_name(text);
        if let Some(start) = hay.find(&needle) {
            out.push(LeakMark {
                event_index: i,
                seat,
                span: (start, start + needle.len()),
                matched: needle.clone(),
            });
        }
    }
    out
}

pub fn detect_leakage(record: &GameRecord) -> Vec<LeakMark> {
    find_leaks(&record.events, &record.seats, &record.target_entity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeakGroup {
    Model,
    Language,
    ModelLanguage,
}

/// Share of games, per group, in which the non-spy side leaked at least once.
/// Keys are `(non-spy model, language code)` with the unused part empty.
pub fn leakage_rate(records: &[GameRecord], group: LeakGroup) -> BTreeMap<(String, String), RateCell> {
    let mut out: BTreeMap<(String, String), RateCell> = BTreeMap::new();
    for r in records {
        let model = r.config.nonspy_model.clone();
        let lang = r.config.scenario.language.code().to_string();
        let key = match group {
            LeakGroup::Model => (model, String::new()),
            LeakGroup::Language => (String::new(), lang),
            LeakGroup::ModelLanguage => (model, lang),
        };
        out.entry(key).or_default().add(!detect_leakage(r).is_empty());
    }
    out
}

/// Entropy in bits of a count vector. Zero counts contribute nothing.
pub fn entropy_of_counts(counts: impl IntoIterator<Item = u64>) -> Result<f64, MetricError> {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MetricError::EmptyDistribution);
    }
    if counts.len() == 1 {
        return Ok(0.0);
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    Ok(h.max(0.0))
}

pub fn shannon_entropy<K>(counts: &BTreeMap<K, u64>) -> Result<f64, MetricError> {
    entropy_of_counts(counts.values().copied())
}

/// Ballots cast by non-spies, skips excluded.
fn nonspy_cast(votes: &BTreeMap<usize, VoteChoice>, spy_seat: usize) -> Vec<usize> {
    votes
        .iter()
        .filter(|(voter, _)| **voter != spy_seat)
        .filter_map(|(_, choice)| match choice {
            VoteChoice::Seat(t) => Some(*t),
            VoteChoice::Skip => None,
        })
        .collect()
}

/// `H * (1 - V_S)` over the non-spy cast ballots of one session; 0 when none were cast.
pub fn vote_dispersion(votes: &BTreeMap<usize, VoteChoice>, spy_seat: usize) -> f64 {
    let cast = nonspy_cast(votes, spy_seat);
    if cast.is_empty() {
        return 0.0;
    }
    let mut tally: BTreeMap<usize, u64> = BTreeMap::new();
    for t in &cast {
        *tally.entry(*t).or_default() += 1;
    }
    let h = shannon_entropy(&tally).expect("non-empty");
    let on_spy = tally.get(&spy_seat).copied().unwrap_or(0) as f64 / cast.len() as f64;
    h * (1.0 - on_spy)
}

/// Entropy of the non-spy cast ballots of one session, if any were cast.
pub fn nonspy_vote_entropy(votes: &BTreeMap<usize, VoteChoice>, spy_seat: usize) -> Option<f64> {
    let mut tally: BTreeMap<usize, u64> = BTreeMap::new();
    for t in nonspy_cast(votes, spy_seat) {
        *tally.entry(t).or_default() += 1;
    }
    shannon_entropy(&tally).ok()
}

fn vote_sessions(record: &GameRecord) -> impl Iterator<Item = &BTreeMap<usize, VoteChoice>> {
    record.events.iter().filter_map(|e| match e {
        TranscriptEvent::VoteSession { votes, .. } => Some(votes),
        _ => None,
    })
}

/// Mean session dispersion keyed by `(spy model, scenario id)`.
pub fn dispersion_table(records: &[GameRecord]) -> BTreeMap<(String, String), MeanCell> {
    let mut out: BTreeMap<(String, String), MeanCell> = BTreeMap::new();
    for r in records {
        let Some(spy) = r.spy_seat() else { continue };
        for votes in vote_sessions(r) {
            out.entry((r.config.spy_model.clone(), r.config.scenario.id()))
                .or_default()
                .push(vote_dispersion(votes, spy));
        }
    }
    out
}

/// Mean non-spy vote entropy keyed by `(non-spy model, scenario id)`.
pub fn nonspy_entropy_table(records: &[GameRecord]) -> BTreeMap<(String, String), MeanCell> {
    let mut out: BTreeMap<(String, String), MeanCell> = BTreeMap::new();
    for r in records {
        let Some(spy) = r.spy_seat() else { continue };
        for votes in vote_sessions(r) {
            if let Some(h) = nonspy_vote_entropy(votes, spy) {
                out.entry((r.config.nonspy_model.clone(), r.config.scenario.id()))
                    .or_default()
                    .push(h);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectiveCell {
    /// Cast ballots that named the spy, over all cast ballots.
    pub accuracy: RateCell,
    /// Skips over all ballot opportunities.
    pub skip_rate: RateCell,
}

/// Non-spy voting accuracy and skip rate per non-spy model.
pub fn detective_rate(records: &[GameRecord]) -> BTreeMap<String, DetectiveCell> {
    let mut out: BTreeMap<String, DetectiveCell> = BTreeMap::new();
    for r in records {
        let Some(spy) = r.spy_seat() else { continue };
        let cell = out.entry(r.config.nonspy_model.clone()).or_default();
        for votes in vote_sessions(r) {
            for (voter, choice) in votes {
                if *voter == spy {
                    continue;
                }
                match choice {
                    VoteChoice::Seat(t) => {
                        cell.accuracy.add(*t == spy);
                        cell.skip_rate.add(false);
                    }
                    VoteChoice::Skip => cell.skip_rate.add(true),
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub category: OutcomeCategory,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBreakdown {
    pub total: u64,
    pub rows: Vec<OutcomeRow>,
}

impl OutcomeBreakdown {
    /// Builds the table from raw counts in [`OutcomeCategory::ALL`] order.
    pub fn from_counts(counts: [u64; 7]) -> Self {
        let total: u64 = counts.iter().sum();
        let rows = OutcomeCategory::ALL
            .iter()
            .zip(counts)
            .map(|(&category, count)| OutcomeRow {
                category,
                count,
                percent: if total == 0 {
                    0.0
                } else {
                    100.0 * count as f64 / total as f64
                },
            })
            .collect();
        Self { total, rows }
    }

    pub fn get(&self, category: OutcomeCategory) -> &OutcomeRow {
        self.rows
            .iter()
            .find(|r| r.category == category)
            .expect("all categories present")
    }
}

pub fn outcome_breakdown(records: &[GameRecord]) -> OutcomeBreakdown {
    let mut counts = [0u64; 7];
    for r in records {
        let i = OutcomeCategory::ALL
            .iter()
            .position(|c| *c == r.outcome.category)
            .expect("category listed");
        counts[i] += 1;
    }
    OutcomeBreakdown::from_counts(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityGuesses {
    pub entity: String,
    pub attempts: u64,
    pub accuracy: RateCell,
    /// Entropy in bits of the normalized guess distribution.
    pub entropy: Option<f64>,
    /// Up to five `(guess, count)` pairs, most frequent first.
    pub top: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGuesses {
    pub scenario: String,
    pub accuracy: RateCell,
    /// Entropy over all guesses in the scenario.
    pub entropy: Option<f64>,
    pub entities: Vec<EntityGuesses>,
}

pub const TOP_K: usize = 5;

#[derive(Default)]
struct GuessTally {
    /// normalized guess -> (first display form, count)
    dist: BTreeMap<String, (String, u64)>,
    accuracy: RateCell,
}

impl GuessTally {
    fn push(&mut self, guess: &str, correct: bool) {
        let key = normalize_name(guess);
        self.dist.entry(key).or_insert_with(|| (guess.trim().to_string(), 0)).1 += 1;
        self.accuracy.add(correct);
    }

    fn entropy(&self) -> Option<f64> {
        entropy_of_counts(self.dist.values().map(|(_, c)| *c)).ok()
    }

    fn top(&self) -> Vec<(String, u64)> {
        let mut v: Vec<(String, u64)> = self.dist.values().cloned().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(TOP_K);
        v
    }
}

/// Spy guess accuracy and guess spread per scenario and target entity.
pub fn guess_tables(records: &[GameRecord]) -> Vec<ScenarioGuesses> {
    let mut by_scenario: BTreeMap<String, (GuessTally, BTreeMap<String, GuessTally>)> = BTreeMap::new();
    for r in records {
        for e in &r.events {
            if let TranscriptEvent::GuessAttempt {
                guess_text, correct, ..
            } = e
            {
                let (all, per) = by_scenario.entry(r.config.scenario.id()).or_default();
                all.push(guess_text, *correct);
                per.entry(r.target_entity.clone())
                    .or_default()
                    .push(guess_text, *correct);
            }
        }
    }
    by_scenario
        .into_iter()
        .map(|(scenario, (all, per))| ScenarioGuesses {
            scenario,
            accuracy: all.accuracy,
            entropy: all.entropy(),
            entities: per
                .into_iter()
                .map(|(entity, t)| EntityGuesses {
                    entity,
                    attempts: t.accuracy.total,
                    accuracy: t.accuracy,
                    entropy: t.entropy(),
                    top: t.top(),
                })
                .collect(),
        })
        .collect()
}
