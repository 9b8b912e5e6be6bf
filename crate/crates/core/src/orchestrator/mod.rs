//! Tournament planning, the per-match driver loop, and the JSONL record store.

mod factory;
mod manifest;
mod plan;
mod record;
mod runner;
mod store;

#[cfg(feature = "remote")]
pub use factory::StandardFactory;
pub use factory::{AgentFactory, AgentSpec, BotFactory};
pub use manifest::{RunManifest, TicketEntry, MANIFEST_VERSION};
pub use plan::{plan_tournament, MatchTicket, PlanError, PlanSpec, TicketStatus, TournamentPlan};
pub use record::{Annotations, CallLog, GameRecord, LeakMark, SCHEMA_VERSION};
pub use runner::{run_match, MatchError, RETRY_NOTE};
pub use store::{read_all, LineIssue, RecordReader, RecordStore, StoreError, StoreRead};

mod schedule;
pub use schedule::{
    run_plan, run_tournament, RunOptions, RunReport, TicketResult, TournamentError, MANIFEST_FILE, RECORDS_FILE,
};
