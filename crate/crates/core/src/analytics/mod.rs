//! Ratings and game metrics computed from finished [`GameRecord`]s.
//!
//! [`GameRecord`]: crate::orchestrator::GameRecord

mod bt;
mod metrics;
mod report;

pub use bt::{
    fit_bradley_terry, solve, to_rating, BtError, BtFit, BtOptions, PairOutcome, RatingEntry, RatingTable, WinCounts,
    ANCHOR, DEFAULT_RIDGE, SCALE,
};
pub use metrics::{
    detect_leakage, detective_rate, dispersion_table, entropy_of_counts, find_leaks, guess_tables, leakage_rate,
    nonspy_entropy_table, nonspy_vote_entropy, outcome_breakdown, pair_outcomes, shannon_entropy, spy_win_rates,
    vote_dispersion, win_rates, DetectiveCell, EntityGuesses, LeakGroup, MeanCell, MetricError, OutcomeBreakdown,
    OutcomeRow, RateCell, ScenarioGuesses, WinRates, TOP_K,
};
pub use report::{
    build_report, emit_report, outcome_titles, render_text, report_tables, GroupKey, GroupedRatings, MetricReport,
    Table,
};
