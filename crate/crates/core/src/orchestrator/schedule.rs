use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::factory::AgentFactory;
use super::manifest::RunManifest;
use super::plan::{MatchTicket, TicketStatus, TournamentPlan};
use super::record::GameRecord;
use super::runner::run_match;
use super::store::{read_all, RecordStore, StoreError};
use crate::agent::PromptBundle;
use crate::game::EntityPool;

pub const RECORDS_FILE: &str = "games.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_EVERY: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Matches in flight at once.
    pub parallelism: usize,
    /// Stop after this many tickets have finished (for staged runs).
    pub limit: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            parallelism: 1,
            limit: None,
        }
    }
}

#[derive(Debug)]
pub enum TicketResult {
    Done(Box<GameRecord>),
    Failed { ticket_id: String, error: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub done: usize,
    pub failed: usize,
    pub skipped: usize,
    pub wall_ms: u64,
    pub calls: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl RunReport {
    fn absorb(&mut self, result: &TicketResult) {
        match result {
            TicketResult::Done(r) => {
                self.done += 1;
                self.calls += r.calls.len();
                self.prompt_tokens += r.calls.iter().filter_map(|c| c.prompt_tokens).sum::<u64>();
                self.completion_tokens += r.calls.iter().filter_map(|c| c.completion_tokens).sum::<u64>();
            }
            TicketResult::Failed { .. } => self.failed += 1,
        }
    }
}

/// Runs every ticket not in `skip` on a bounded worker pool and hands each
/// result to `sink` on the calling thread, in completion order. A sink error
/// stops scheduling new tickets and is returned once in-flight ones finish.
#[allow(clippy::too_many_arguments)]
pub fn run_plan<E: Send>(
    plan: &TournamentPlan,
    skip: &HashSet<String>,
    factory: &dyn AgentFactory,
    pools: &BTreeMap<String, EntityPool>,
    bundle: &PromptBundle,
    options: RunOptions,
    mut sink: impl FnMut(&MatchTicket, TicketResult) -> Result<(), E>,
) -> Result<RunReport, E> {
    let started = Instant::now();
    let mut todo: Vec<&MatchTicket> = plan.tickets.iter().filter(|t| !skip.contains(&t.ticket_id)).collect();
    let mut report = RunReport {
        skipped: plan.tickets.len() - todo.len(),
        ..RunReport::default()
    };
    if let Some(limit) = options.limit {
        todo.truncate(limit);
    }
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = options.parallelism.max(1).min(todo.len().max(1));
    let mut sink_error = None;

    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, TicketResult)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (todo, next, stop) = (&todo, &next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(ticket) = todo.get(i) else { break };
                let result = match pools.get(&ticket.config.scenario.id()) {
                    None => TicketResult::Failed {
                        ticket_id: ticket.ticket_id.clone(),
                        error: format!("no pool loaded for {}", ticket.config.scenario),
                    },
                    Some(pool) => match run_match(ticket, factory, pool, bundle) {
                        Ok(record) => TicketResult::Done(Box::new(record)),
                        Err(e) => TicketResult::Failed {
                            ticket_id: ticket.ticket_id.clone(),
                            error: e.to_string(),
                        },
                    },
                };
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, result) in rx {
            if sink_error.is_some() {
                continue;
            }
            report.absorb(&result);
            if let Err(e) = sink(todo[i], result) {
                stop.store(true, Ordering::Relaxed);
                sink_error = Some(e);
            }
        }
    });

    report.wall_ms = started.elapsed().as_millis() as u64;
    match sink_error {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[derive(Debug, Error)]
pub enum TournamentError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} already holds a run of a different plan; use a fresh output directory")]
    PlanMismatch(PathBuf),
}

/// Runs `plan` into `out_dir`, resuming from whatever records already exist
/// there. Records go to `games.jsonl`; ticket statuses to `manifest.json`.
pub fn run_tournament(
    plan: &TournamentPlan,
    factory: &dyn AgentFactory,
    pools: &BTreeMap<String, EntityPool>,
    bundle: &PromptBundle,
    out_dir: &Path,
    options: RunOptions,
) -> Result<RunReport, TournamentError> {
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let records_path = out_dir.join(RECORDS_FILE);
    std::fs::create_dir_all(out_dir).map_err(|source| TournamentError::Manifest {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let manifest_err = |source| TournamentError::Manifest {
        path: manifest_path.clone(),
        source,
    };

    let mut manifest = if manifest_path.exists() {
        let m = RunManifest::load(&manifest_path).map_err(manifest_err)?;
        if m.spec != plan.spec {
            return Err(TournamentError::PlanMismatch(out_dir.to_path_buf()));
        }
        m
    } else {
        RunManifest::new(plan, RECORDS_FILE)
    };

    // The record file is the source of truth for what finished.
    let mut done = HashSet::new();
    if records_path.exists() {
        let existing = read_all(&records_path)?;
        for issue in &existing.issues {
            warn!("{}: line {}: {}", records_path.display(), issue.line, issue.problem);
        }
        done.extend(existing.records.into_iter().map(|r| r.ticket_id));
    }
    for entry in &mut manifest.tickets {
        if done.contains(&entry.ticket_id) {
            entry.status = TicketStatus::Done;
            entry.error = None;
        } else if entry.status == TicketStatus::Done {
            entry.status = TicketStatus::Pending;
        }
    }
    manifest.save(&manifest_path).map_err(manifest_err)?;
    if !done.is_empty() {
        info!(
            "resuming: {} of {} tickets already done",
            done.len(),
            plan.tickets.len()
        );
    }

    let mut store = RecordStore::open(&records_path)?;
    let mut since_save = 0;
    let report = run_plan(plan, &done, factory, pools, bundle, options, |ticket, result| {
        match result {
            TicketResult::Done(record) => {
                store.append(&record)?;
                manifest.set(&ticket.ticket_id, TicketStatus::Done, None);
            }
            TicketResult::Failed { error, .. } => {
                warn!("ticket {} failed: {error}", ticket.ticket_id);
                manifest.set(&ticket.ticket_id, TicketStatus::Failed, Some(error));
            }
        }
        since_save += 1;
        if since_save >= MANIFEST_EVERY {
            since_save = 0;
            manifest.save(&manifest_path).map_err(manifest_err)?;
        }
        Ok::<(), TournamentError>(())
    })?;
    manifest.save(&manifest_path).map_err(manifest_err)?;
    Ok(report)
}
