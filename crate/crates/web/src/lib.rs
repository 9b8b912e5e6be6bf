//! Browser bindings: play a scripted match, fit ratings, score a vote.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond the generated module.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use spyfall_core::agent::{transcript_lines, PromptBundle};
use spyfall_core::analytics::{self, BtOptions, PairOutcome};
use spyfall_core::corpus::bundled_pool;
use spyfall_core::game::{MatchConfig, Scenario, VoteChoice};
use spyfall_core::orchestrator::{run_match, BotFactory, MatchTicket, TicketStatus};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Demo {
    scenario: String,
    target: String,
    seats: Vec<(String, String)>,
    transcript: Vec<String>,
    outcome: String,
    winner: String,
    questions: u32,
}

fn bot(kind: &str) -> String {
    if kind.starts_with("bot:") {
        kind.to_string()
    } else {
        format!("bot:{kind}")
    }
}

pub fn play_demo_json(spy: &str, nonspy: &str, scenario: &str, players: usize, seed: u64) -> Result<String, String> {
    let scenario: Scenario = scenario.parse().map_err(|e| format!("{e}"))?;
    let pool = bundled_pool(&scenario).map_err(|e| e.to_string())?;
    let mut config = MatchConfig::new(players, bot(nonspy), bot(spy), scenario, seed);
    config.allow_self_play = true;
    config.validate().map_err(|e| e.to_string())?;
    let ticket = MatchTicket {
        ticket_id: format!("demo-{seed}"),
        index: 0,
        config,
        status: TicketStatus::Pending,
    };
    let record = run_match(&ticket, &BotFactory, &pool, &PromptBundle::default()).map_err(|e| e.to_string())?;
    let demo = Demo {
        scenario: record.config.scenario.id(),
        target: record.target_entity.clone(),
        seats: record
            .seats
            .iter()
            .map(|s| (s.alias.clone(), format!("{:?}", s.role)))
            .collect(),
        transcript: transcript_lines(&record.events, &record.aliases(), true),
        outcome: record.outcome.category.title().to_string(),
        winner: format!("{:?}", record.outcome.winner),
        questions: record.outcome.ended_at_turn,
    };
    serde_json::to_string(&demo).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct Game {
    winner: String,
    loser: String,
}

pub fn fit_ratings_json(games: &str) -> Result<String, String> {
    let games: Vec<Game> = serde_json::from_str(games).map_err(|e| format!("expected [{{winner, loser}}]: {e}"))?;
    let pairs: Vec<PairOutcome> = games
        .into_iter()
        .enumerate()
        .map(|(i, g)| PairOutcome {
            winner_model: g.winner,
            loser_model: g.loser,
            scenario: String::new(),
            ticket_id: i.to_string(),
        })
        .collect();
    let table = analytics::fit_bradley_terry(&pairs, &BtOptions::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&table).map_err(|e| e.to_string())
}

/// `votes` is an array indexed by seat: a seat number, or null for a skip.
pub fn vote_dispersion_json(votes: &str, spy_seat: usize) -> Result<f64, String> {
    let raw: Vec<Option<usize>> = serde_json::from_str(votes).map_err(|e| e.to_string())?;
    let votes: BTreeMap<usize, VoteChoice> = raw
        .into_iter()
        .enumerate()
        .map(|(seat, v)| (seat, v.map_or(VoteChoice::Skip, VoteChoice::Seat)))
        .collect();
    Ok(analytics::vote_dispersion(&votes, spy_seat))
}

#[wasm_bindgen]
pub fn play_demo(spy: &str, nonspy: &str, scenario: &str, players: usize, seed: u32) -> Result<String, JsValue> {
    play_demo_json(spy, nonspy, scenario, players, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn fit_ratings(games: &str) -> Result<String, JsValue> {
    fit_ratings_json(games).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn vote_dispersion(votes: &str, spy_seat: usize) -> Result<f64, JsValue> {
    vote_dispersion_json(votes, spy_seat).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_game_runs() {
        let out = play_demo_json("oracle", "honest", "generic-en", 5, 7).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["outcome"], "Spy Guess Correct");
        assert_eq!(out, play_demo_json("oracle", "honest", "generic-en", 5, 7).unwrap());
        assert!(play_demo_json("oracle", "honest", "generic-en", 2, 7).is_err());
    }

    #[test]
    fn ratings_from_json() {
        let games = r#"[{"winner":"a","loser":"b"},{"winner":"a","loser":"b"},{"winner":"a","loser":"b"},{"winner":"b","loser":"a"}]"#;
        let v: serde_json::Value = serde_json::from_str(&fit_ratings_json(games).unwrap()).unwrap();
        let top = &v["entries"][0];
        assert_eq!(top["model"], "a");
        assert!((top["rating"].as_f64().unwrap() - 1095.42).abs() < 0.01);
        assert!(fit_ratings_json("{}").is_err());
    }

    #[test]
    fn dispersion_from_json() {
        // Four non-spies split 2/2 between two innocents: H = 1, nobody on the spy.
        let d = vote_dispersion_json("[1, 2, 1, 2, null]", 4).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert_eq!(vote_dispersion_json("[null, null, null]", 0).unwrap(), 0.0);
    }
}
