use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{MatchConfig, Scenario};
use crate::seed::{derive_seed, stable_id};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("need at least two distinct models, got {0}")]
    TooFewModels(usize),
    #[error("duplicate model id {0:?}")]
    DuplicateModel(String),
    #[error("no scenarios given")]
    NoScenarios,
    #[error("games per ordered pair must be at least 1")]
    NoGames,
    #[error("invalid match settings: {0}")]
    Settings(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TicketStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchTicket {
    pub ticket_id: String,
    pub index: usize,
    pub config: MatchConfig,
    pub status: TicketStatus,
}

/// Inputs to [`plan_tournament`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub models: Vec<String>,
    pub scenarios: Vec<Scenario>,
    pub games_per_ordered_pair: usize,
    pub base_seed: u64,
    pub player_count: usize,
    pub retry_limit: u32,
}

impl PlanSpec {
    pub fn new(models: Vec<String>, scenarios: Vec<Scenario>, games_per_ordered_pair: usize, base_seed: u64) -> Self {
        Self {
            models,
            scenarios,
            games_per_ordered_pair,
            base_seed,
            player_count: 5,
            retry_limit: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TournamentPlan {
    pub spec: PlanSpec,
    pub tickets: Vec<MatchTicket>,
}

/// Expands every scenario × ordered (spy, non-spy) pair × game number into a
/// ticket, in that nesting order.
pub fn plan_tournament(spec: &PlanSpec) -> Result<TournamentPlan, PlanError> {
    if spec.models.len() < 2 {
        return Err(PlanError::TooFewModels(spec.models.len()));
    }
    let mut seen = HashSet::new();
    for m in &spec.models {
        if !seen.insert(m) {
            return Err(PlanError::DuplicateModel(m.clone()));
        }
    }
    if spec.scenarios.is_empty() {
        return Err(PlanError::NoScenarios);
    }
    if spec.games_per_ordered_pair == 0 {
        return Err(PlanError::NoGames);
    }

    let base = spec.base_seed.to_le_bytes();
    let mut tickets = Vec::new();
    for scenario in &spec.scenarios {
        for spy in &spec.models {
            for nonspy in spec.models.iter().filter(|m| *m != spy) {
                for game in 0..spec.games_per_ordered_pair {
                    let index = tickets.len();
                    let seed = derive_seed(&[b"ticket", &base, &(index as u64).to_le_bytes()]);
                    let mut config =
                        MatchConfig::new(spec.player_count, nonspy.as_str(), spy.as_str(), scenario.clone(), seed);
                    config.retry_limit = spec.retry_limit;
                    config.validate().map_err(|e| PlanError::Settings(e.to_string()))?;
                    let ticket_id = stable_id(
                        &[
                            &base,
                            scenario.id().as_bytes(),
                            spy.as_bytes(),
                            nonspy.as_bytes(),
                            &(game as u64).to_le_bytes(),
                        ],
                        16,
                    );
                    tickets.push(MatchTicket {
                        ticket_id,
                        index,
                        config,
                        status: TicketStatus::Pending,
                    });
                }
            }
        }
    }
    Ok(TournamentPlan {
        spec: spec.clone(),
        tickets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ScenarioKind;
    use std::collections::BTreeMap;

    fn models(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn full_grid_has_nine_thousand_tickets() {
        let plan = plan_tournament(&PlanSpec::new(models(6), Scenario::bundled(), 30, 0)).unwrap();
        assert_eq!(plan.tickets.len(), 6 * 5 * 10 * 30);

        let ids: HashSet<_> = plan.tickets.iter().map(|t| &t.ticket_id).collect();
        let seeds: HashSet<_> = plan.tickets.iter().map(|t| t.config.seed).collect();
        assert_eq!(ids.len(), plan.tickets.len());
        assert_eq!(seeds.len(), plan.tickets.len());

        // 600 matches per unordered pair, spy role split evenly.
        let mut per_pair: BTreeMap<(String, String), usize> = BTreeMap::new();
        for t in &plan.tickets {
            *per_pair
                .entry((t.config.spy_model.clone(), t.config.nonspy_model.clone()))
                .or_default() += 1;
        }
        for ((spy, nonspy), count) in &per_pair {
            assert_eq!(*count, 300);
            assert_eq!(per_pair[&(nonspy.clone(), spy.clone())], 300);
        }
    }

    #[test]
    fn smallest_plan() {
        let scenario = Scenario::new(ScenarioKind::Generic, "en");
        let plan = plan_tournament(&PlanSpec::new(models(2), vec![scenario], 1, 7)).unwrap();
        assert_eq!(plan.tickets.len(), 2);
        assert_eq!(plan.tickets[0].config.spy_model, "m0");
        assert_eq!(plan.tickets[1].config.spy_model, "m1");
        assert!(plan.tickets.iter().all(|t| t.status == TicketStatus::Pending));
    }

    #[test]
    fn planning_is_reproducible() {
        let spec = PlanSpec::new(models(3), Scenario::bundled(), 2, 42);
        assert_eq!(plan_tournament(&spec).unwrap(), plan_tournament(&spec).unwrap());
        let other = plan_tournament(&PlanSpec {
            base_seed: 43,
            ..spec.clone()
        })
        .unwrap();
        assert_ne!(
            other.tickets[0].ticket_id,
            plan_tournament(&spec).unwrap().tickets[0].ticket_id
        );
    }

    #[test]
    fn rejects_empty_inputs() {
        let s = Scenario::bundled();
        assert_eq!(
            plan_tournament(&PlanSpec::new(models(1), s.clone(), 1, 0)),
            Err(PlanError::TooFewModels(1))
        );
        assert_eq!(
            plan_tournament(&PlanSpec::new(models(2), vec![], 1, 0)),
            Err(PlanError::NoScenarios)
        );
        assert_eq!(
            plan_tournament(&PlanSpec::new(models(2), s.clone(), 0, 0)),
            Err(PlanError::NoGames)
        );
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(
            plan_tournament(&PlanSpec::new(dup, s, 1, 0)),
            Err(PlanError::DuplicateModel(_))
        ));
    }
}
