use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bt::{fit_bradley_terry, BtOptions, PairOutcome, RatingTable};
use super::metrics::*;
use crate::game::OutcomeCategory;
use crate::orchestrator::GameRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupKey {
    Scenario,
    Language,
    Kind,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Scenario => "scenario",
            GroupKey::Language => "language",
            GroupKey::Kind => "kind",
        }
    }

    fn of(self, pair: &PairOutcome, record: &GameRecord) -> String {
        match self {
            GroupKey::Scenario => pair.scenario.clone(),
            GroupKey::Language => record.config.scenario.language.code().to_string(),
            GroupKey::Kind => record.config.scenario.kind.slug().to_string(),
        }
    }
}

impl std::str::FromStr for GroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scenario" => Ok(GroupKey::Scenario),
            "language" | "lang" => Ok(GroupKey::Language),
            "kind" => Ok(GroupKey::Kind),
            other => Err(format!("unknown group {other:?} (expected scenario, language or kind)")),
        }
    }
}

/// Ratings fitted separately within each group value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedRatings {
    pub key: GroupKey,
    pub groups: BTreeMap<String, Result<RatingTable, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: usize,
    pub self_play_excluded: usize,
    pub leaderboard: Result<RatingTable, String>,
    pub win_rates: WinRates,
    /// Always contains the per-scenario grouping, then any requested ones.
    pub grouped: Vec<GroupedRatings>,
    pub leakage: BTreeMap<(String, String), RateCell>,
    pub outcomes: OutcomeBreakdown,
    pub spy_win_by_scenario: BTreeMap<String, RateCell>,
    pub guesses: Vec<ScenarioGuesses>,
    pub dispersion: BTreeMap<(String, String), MeanCell>,
    pub nonspy_vote_entropy: BTreeMap<(String, String), MeanCell>,
    pub detective: BTreeMap<String, DetectiveCell>,
}

pub fn build_report(records: &[GameRecord], group_by: &[GroupKey], bt: &BtOptions) -> MetricReport {
    let scored: Vec<&GameRecord> = records.iter().filter(|r| !r.is_self_play()).collect();
    let pairs = pair_outcomes(records);
    let leaderboard = fit_bradley_terry(&pairs, bt).map_err(|e| e.to_string());

    let mut keys = vec![GroupKey::Scenario];
    keys.extend(group_by.iter().filter(|k| **k != GroupKey::Scenario));
    let grouped = keys
        .into_iter()
        .map(|key| {
            let mut split: BTreeMap<String, Vec<PairOutcome>> = BTreeMap::new();
            for (pair, record) in pairs.iter().zip(&scored) {
                split.entry(key.of(pair, record)).or_default().push(pair.clone());
            }
            GroupedRatings {
                key,
                groups: split
                    .into_iter()
                    .map(|(value, ps)| (value, fit_bradley_terry(&ps, bt).map_err(|e| e.to_string())))
                    .collect(),
            }
        })
        .collect();

    MetricReport {
        records: records.len(),
        self_play_excluded: records.len() - scored.len(),
        leaderboard,
        win_rates: win_rates(records),
        grouped,
        leakage: leakage_rate(records, LeakGroup::ModelLanguage),
        outcomes: outcome_breakdown(records),
        spy_win_by_scenario: spy_win_rates(records),
        guesses: guess_tables(records),
        dispersion: dispersion_table(records),
        nonspy_vote_entropy: nonspy_entropy_table(records),
        detective: detective_rate(records),
    }
}

/// A titled grid rendered both as aligned text and as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, title: &str, headers: &[&str]) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = format!("{}\n\n{}\n", self.title, line(&self.headers));
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&line(&rule));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

fn pct(cell: &RateCell) -> String {
    cell.rate.map(|r| format!("{r:.2}")).unwrap_or_default()
}

fn num(x: Option<f64>, digits: usize) -> String {
    x.map(|v| format!("{v:.digits$}")).unwrap_or_default()
}

fn leaderboard_table(report: &MetricReport) -> Table {
    let mut t = Table::new(
        "leaderboard",
        "Leaderboard: Bradley-Terry ratings and overall win rates",
        &["rank", "model", "rating", "win_rate", "wins", "games"],
    );
    if let Ok(table) = &report.leaderboard {
        for (i, e) in table.entries.iter().enumerate() {
            let wr = report.win_rates.per_model.get(&e.model).copied().unwrap_or_default();
            t.rows.push(vec![
                (i + 1).to_string(),
                e.model.clone(),
                format!("{:.1}", e.rating),
                pct(&wr),
                wr.hits.to_string(),
                wr.total.to_string(),
            ]);
        }
    }
    t
}

fn grouped_table(g: &GroupedRatings, overall: &Result<RatingTable, String>) -> Table {
    let values: Vec<&String> = g.groups.keys().collect();
    let mut headers = vec!["model"];
    headers.extend(values.iter().map(|v| v.as_str()));
    headers.push("overall");
    let mut t = Table::new(
        &format!("ratings_by_{}", g.key.name()),
        &format!("Bradley-Terry ratings by {}", g.key.name()),
        &headers,
    );
    let models: BTreeSet<&String> = g
        .groups
        .values()
        .filter_map(|r| r.as_ref().ok())
        .flat_map(|r| r.entries.iter().map(|e| &e.model))
        .collect();
    let mut rows: Vec<(f64, Vec<String>)> = models
        .into_iter()
        .map(|m| {
            let rating = |r: &Result<RatingTable, String>| r.as_ref().ok().and_then(|t| t.get(m)).map(|e| e.rating);
            let mut row = vec![m.clone()];
            row.extend(g.groups.values().map(|r| num(rating(r), 0)));
            let total = rating(overall);
            row.push(num(total, 0));
            (total.unwrap_or(f64::NEG_INFINITY), row)
        })
        .collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1[0].cmp(&b.1[0])));
    t.rows = rows.into_iter().map(|(_, r)| r).collect();
    t
}

fn matrix_table(report: &MetricReport) -> Table {
    let mut t = Table::new(
        "win_matrix",
        "Win-rate matrix: row model's wins against column model",
        &["row_model", "col_model", "wins", "games", "win_rate"],
    );
    for ((row, col), cell) in &report.win_rates.matrix {
        t.rows.push(vec![
            row.clone(),
            col.clone(),
            cell.hits.to_string(),
            cell.total.to_string(),
            pct(cell),
        ]);
    }
    t
}

fn leakage_table(report: &MetricReport) -> Table {
    let mut t = Table::new(
        "leakage",
        "Non-spy leakage rate (surface match of the target name)",
        &["nonspy_model", "language", "leak_games", "nonspy_games", "leakage_rate"],
    );
    for ((model, lang), cell) in &report.leakage {
        t.rows.push(vec![
            model.clone(),
            lang.clone(),
            cell.hits.to_string(),
            cell.total.to_string(),
            pct(cell),
        ]);
    }
    t
}

fn outcome_table(report: &MetricReport) -> Table {
    let mut t = Table::new("outcomes", "Game outcome statistics", &["category", "count", "percent"]);
    for row in &report.outcomes.rows {
        t.rows.push(vec![
            row.category.title().into(),
            row.count.to_string(),
            format!("{:.2}", row.percent),
        ]);
    }
    t
}

fn spy_win_table(report: &MetricReport) -> Table {
    let mut t = Table::new(
        "spy_win_by_scenario",
        "Spy win rate by scenario",
        &["scenario", "spy_wins", "games", "spy_win_rate"],
    );
    for (scenario, cell) in &report.spy_win_by_scenario {
        t.rows.push(vec![
            scenario.clone(),
            cell.hits.to_string(),
            cell.total.to_string(),
            pct(cell),
        ]);
    }
    t
}

fn guess_tables_out(report: &MetricReport) -> (Table, Table) {
    let mut acc = Table::new(
        "guess_accuracy",
        "Spy guess accuracy (Acc) and guess entropy (H, bits) by scenario",
        &["scenario", "correct", "attempts", "accuracy", "entropy"],
    );
    let mut ent = Table::new(
        "guess_entities",
        "Guess distribution per target entity",
        &["scenario", "entity", "attempts", "accuracy", "entropy", "top5"],
    );
    for s in &report.guesses {
        acc.rows.push(vec![
            s.scenario.clone(),
            s.accuracy.hits.to_string(),
            s.accuracy.total.to_string(),
            pct(&s.accuracy),
            num(s.entropy, 2),
        ]);
        for e in &s.entities {
            let top: Vec<String> = e.top.iter().map(|(g, c)| format!("{g} ({c})")).collect();
            ent.rows.push(vec![
                s.scenario.clone(),
                e.entity.clone(),
                e.attempts.to_string(),
                pct(&e.accuracy),
                num(e.entropy, 2),
                top.join("; "),
            ]);
        }
    }
    (acc, ent)
}

fn mean_table(name: &str, title: &str, model_col: &str, data: &BTreeMap<(String, String), MeanCell>) -> Table {
    let mut t = Table::new(name, title, &[model_col, "scenario", "sessions", "mean"]);
    for ((model, scenario), cell) in data {
        t.rows.push(vec![
            model.clone(),
            scenario.clone(),
            cell.count.to_string(),
            num(cell.mean, 3),
        ]);
    }
    t
}

fn detective_table(report: &MetricReport) -> Table {
    let mut t = Table::new(
        "detective",
        "Non-spy voting accuracy (skips excluded) and skip rate",
        &[
            "nonspy_model",
            "on_spy",
            "cast",
            "accuracy",
            "skips",
            "opportunities",
            "skip_rate",
        ],
    );
    for (model, d) in &report.detective {
        t.rows.push(vec![
            model.clone(),
            d.accuracy.hits.to_string(),
            d.accuracy.total.to_string(),
            pct(&d.accuracy),
            d.skip_rate.hits.to_string(),
            d.skip_rate.total.to_string(),
            pct(&d.skip_rate),
        ]);
    }
    t
}

/// Every output table in emission order.
pub fn report_tables(report: &MetricReport) -> Vec<Table> {
    let mut tables = vec![leaderboard_table(report)];
    for g in &report.grouped {
        tables.push(grouped_table(g, &report.leaderboard));
    }
    tables.push(matrix_table(report));
    tables.push(leakage_table(report));
    tables.push(outcome_table(report));
    tables.push(spy_win_table(report));
    let (acc, ent) = guess_tables_out(report);
    tables.push(acc);
    tables.push(ent);
    tables.push(mean_table(
        "dispersion",
        "Spy vote dispersion H x (1 - V_S) per session",
        "spy_model",
        &report.dispersion,
    ));
    tables.push(mean_table(
        "nonspy_vote_entropy",
        "Non-spy vote entropy (bits) per session",
        "nonspy_model",
        &report.nonspy_vote_entropy,
    ));
    tables.push(detective_table(report));
    tables
}

/// Plain-text rendering of the whole report.
pub fn render_text(report: &MetricReport) -> String {
    let mut out = format!(
        "{} records ({} self-play excluded from ratings and win rates)\n",
        report.records, report.self_play_excluded
    );
    match &report.leaderboard {
        Ok(t) => {
            let _ = writeln!(
                out,
                "Bradley-Terry fit: ridge {}, {} iterations, gradient norm {:.2e}",
                t.ridge, t.iterations, t.gradient_norm
            );
            if t.components.len() > 1 {
                let _ = writeln!(
                    out,
                    "warning: {} disconnected model groups; ratings are not comparable across them",
                    t.components.len()
                );
            }
        }
        Err(e) => {
            let _ = writeln!(out, "Bradley-Terry fit unavailable: {e}");
        }
    }
    let _ = writeln!(
        out,
        "Leakage counts only literal mentions of the target name; paraphrased leaks are not detected."
    );
    for table in report_tables(report) {
        out.push('\n');
        out.push_str(&table.render());
    }
    out
}

/// Writes `report.txt`, `report.json` and one CSV per table into `dir`.
pub fn emit_report(report: &MetricReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for table in report_tables(report) {
        let path = dir.join(format!("{}.csv", table.name));
        fs::write(&path, table.to_csv())?;
        written.push(path);
    }
    let text = dir.join("report.txt");
    fs::write(&text, render_text(report))?;
    written.push(text);
    let json = dir.join("report.json");
    let body = serde_json::to_string_pretty(&JsonReport::from(report)).map_err(io::Error::other)?;
    fs::write(&json, body + "\n")?;
    written.push(json);
    Ok(written)
}

/// JSON mirror of the report with string keys.
#[derive(Serialize)]
struct JsonReport<'a> {
    records: usize,
    self_play_excluded: usize,
    leaderboard: &'a Result<RatingTable, String>,
    outcomes: &'a OutcomeBreakdown,
    tables: BTreeMap<String, Vec<BTreeMap<String, String>>>,
}

impl<'a> From<&'a MetricReport> for JsonReport<'a> {
    fn from(r: &'a MetricReport) -> Self {
        let tables = report_tables(r)
            .into_iter()
            .map(|t| {
                let rows = t
                    .rows
                    .iter()
                    .map(|row| t.headers.iter().cloned().zip(row.iter().cloned()).collect())
                    .collect();
                (t.name, rows)
            })
            .collect();
        Self {
            records: r.records,
            self_play_excluded: r.self_play_excluded,
            leaderboard: &r.leaderboard,
            outcomes: &r.outcomes,
            tables,
        }
    }
}

/// Category titles in table order, for callers building Table 3-style output.
pub fn outcome_titles() -> Vec<&'static str> {
    OutcomeCategory::ALL.iter().map(|c| c.title()).collect()
}
