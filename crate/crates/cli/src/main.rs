mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::warn;
use spyfall_core::agent::remote::{ChatClient, ClientConfig, SamplingParams};
use spyfall_core::agent::{transcript_lines, PromptBundle, ScriptedKind};
use spyfall_core::analytics::{build_report, emit_report, render_text, BtOptions, GroupKey};
use spyfall_core::corpus::{bundled_pool, list_pools, load_pool, load_pool_file};
use spyfall_core::game::{EntityPool, MatchConfig, Scenario, ScenarioKind};
use spyfall_core::orchestrator::{
    plan_tournament, read_all, run_match, run_tournament, AgentSpec, GameRecord, MatchTicket, RunOptions,
    StandardFactory, TicketStatus, MANIFEST_FILE, RECORDS_FILE,
};
use spyfall_core::seed::stable_id;

use config::RunConfigFile;

#[derive(Parser)]
#[command(
    name = "spyfall",
    version,
    about = "Spyfall benchmark harness for language-model agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check pool files, prompt templates and a run config.
    Validate(ValidateArgs),
    /// Play one match and print its transcript.
    Play(PlayArgs),
    /// Run every planned match of a tournament config.
    Tournament(TournamentArgs),
    /// Compute ratings and metric tables from game records.
    Analyze(AnalyzeArgs),
    /// Print the operator transcript of one recorded game.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Pool files or bundled ids. Defaults to every bundled pool.
    #[arg(long, num_args = 1..)]
    pools: Vec<String>,
    /// Template directory to check instead of the bundled templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Tournament config to check (also checks its pools and templates).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlayArgs {
    /// Scenario kind (generic, local-location, local-food) or a full id like local-food-id.
    #[arg(long, default_value = "generic")]
    scenario: String,
    /// Language code; ignored when --scenario is a full id.
    #[arg(long, default_value = "en")]
    language: String,
    /// Spy agent: a scripted kind (oracle, cautious, ...), bot:<kind>[:seed] or model:<id>.
    #[arg(long)]
    spy_agent: String,
    /// Agent for every non-spy seat.
    #[arg(long)]
    nonspy_agent: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    players: usize,
    #[arg(long, default_value_t = 0)]
    retry_limit: u32,
    /// Pool file that replaces the bundled pool for the scenario.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Where the game record is written (overwritten).
    #[arg(long, default_value = "play.jsonl")]
    out: PathBuf,
    /// Permit the same agent on both teams.
    #[arg(long)]
    allow_self_play: bool,
    /// Environment variable holding the endpoint key, for remote models.
    #[arg(long, default_value = spyfall_core::agent::remote::DEFAULT_KEY_ENV)]
    api_key_env: String,
}

#[derive(Args)]
struct TournamentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Continue a run in an existing output directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this many tickets.
    #[arg(long)]
    limit: Option<usize>,
    /// Overrides the config's parallelism.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "report")]
    out: PathBuf,
    /// Extra rating groupings: scenario, language, kind.
    #[arg(long, value_delimiter = ',')]
    group_by: Vec<GroupKey>,
    /// Fixed ridge strength; chosen automatically when absent.
    #[arg(long)]
    ridge: Option<f64>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    ticket: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Play(a) => cmd_play(a),
        Command::Tournament(a) => cmd_tournament(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

// ---- validate

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let mut failures = 0;
    let mut check = |label: &str, result: Result<()>| match result {
        Ok(()) => println!("ok    {label}"),
        Err(e) => {
            failures += 1;
            println!("FAIL  {label}");
            for line in format!("{e:#}").split("; ") {
                println!("      {line}");
            }
        }
    };

    let config = args.config.as_deref().map(|p| (p, RunConfigFile::load(p)));
    let mut pools = args.pools.clone();
    let mut template_dirs: Vec<PathBuf> = args.templates.iter().cloned().collect();
    if let Some((path, loaded)) = &config {
        match loaded {
            Ok(c) => {
                check(&path.display().to_string(), Ok(()));
                if let Some(dir) = &c.templates_dir {
                    template_dirs.push(dir.clone());
                }
                if let Some(dir) = &c.pools_dir {
                    for s in c.scenario_list()? {
                        let file = dir.join(format!("{}.txt", s.id()));
                        if file.exists() {
                            pools.push(file.display().to_string());
                        }
                    }
                }
            }
            Err(e) => check(&path.display().to_string(), Err(anyhow!("{e:#}"))),
        }
    }

    if pools.is_empty() && config.is_none() {
        pools = list_pools().iter().map(|c| c.id.to_string()).collect();
    }
    for p in &pools {
        check(p, load_pool(p).map(drop).map_err(Into::into));
    }

    if template_dirs.is_empty() && config.is_none() {
        check("bundled templates", validate_bundle(&PromptBundle::default()));
    }
    for dir in &template_dirs {
        let result = PromptBundle::load_dir(dir)
            .map_err(anyhow::Error::from)
            .and_then(|b| validate_bundle(&b));
        check(&dir.display().to_string(), result);
    }

    if failures > 0 {
        eprintln!("{failures} check(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn validate_bundle(bundle: &PromptBundle) -> Result<()> {
    bundle.validate().map_err(|problems| {
        anyhow!(
            "{}",
            problems.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
        )
    })
}

fn load_templates(dir: Option<&Path>) -> Result<PromptBundle> {
    let Some(dir) = dir else {
        return Ok(PromptBundle::default());
    };
    let bundle = PromptBundle::load_dir(dir)?;
    validate_bundle(&bundle).with_context(|| format!("templates in {}", dir.display()))?;
    Ok(bundle)
}

// ---- play

/// Bare scripted kinds (`oracle`) are shorthand for `bot:oracle`.
fn agent_id(raw: &str) -> Result<String> {
    if raw.parse::<ScriptedKind>().is_ok() {
        return Ok(format!("bot:{raw}"));
    }
    let spec: AgentSpec = raw.parse().map_err(anyhow::Error::msg)?;
    Ok(spec.to_string())
}

fn parse_scenario(scenario: &str, language: &str) -> Result<Scenario> {
    if let Ok(kind) = scenario.parse::<ScenarioKind>() {
        return Ok(Scenario::new(kind, language));
    }
    scenario
        .parse::<Scenario>()
        .map_err(|e| anyhow!("scenario {scenario:?}: {e}"))
}

fn make_factory(
    remote: bool,
    endpoint: ClientConfig,
    sampling: SamplingParams,
    per_model: BTreeMap<String, SamplingParams>,
) -> Result<StandardFactory> {
    // Credentials are resolved before any match starts.
    let client = if remote {
        Some(Arc::new(ChatClient::new(endpoint).context("endpoint preflight")?))
    } else {
        None
    };
    Ok(StandardFactory {
        client,
        default_params: sampling,
        per_model,
    })
}

fn cmd_play(args: PlayArgs) -> Result<ExitCode> {
    let scenario = parse_scenario(&args.scenario, &args.language)?;
    let spy = agent_id(&args.spy_agent)?;
    let nonspy = agent_id(&args.nonspy_agent)?;
    let mut config = MatchConfig::new(args.players, nonspy.as_str(), spy.as_str(), scenario.clone(), args.seed);
    config.retry_limit = args.retry_limit;
    config.allow_self_play = args.allow_self_play;
    config.validate().context("match config")?;

    let pool = match &args.pool {
        Some(path) => load_pool_file(path)?,
        None => bundled_pool(&scenario)?,
    };
    let bundle = load_templates(args.templates.as_deref())?;
    let endpoint = ClientConfig {
        api_key_env: args.api_key_env.clone(),
        ..ClientConfig::default()
    };
    let remote = [&spy, &nonspy]
        .iter()
        .any(|m| m.parse::<AgentSpec>().is_ok_and(|s| s.is_remote()));
    let factory = make_factory(remote, endpoint, SamplingParams::default(), BTreeMap::new())?;

    let ticket_id = stable_id(
        &[
            b"play",
            scenario.id().as_bytes(),
            spy.as_bytes(),
            nonspy.as_bytes(),
            &args.seed.to_le_bytes(),
            &(args.players as u64).to_le_bytes(),
        ],
        16,
    );
    let ticket = MatchTicket {
        ticket_id,
        index: 0,
        config,
        status: TicketStatus::Pending,
    };
    let record = run_match(&ticket, &factory, &pool, &bundle)?;

    print_game(&record);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.out, serde_json::to_string(&record)? + "\n")
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("record written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_game(record: &GameRecord) {
    let c = &record.config;
    println!("ticket   {}", record.ticket_id);
    println!("scenario {} (seed {}, {} players)", c.scenario, c.seed, c.player_count);
    println!("target   {}", record.target_entity);
    for seat in &record.seats {
        println!("  {:<8} {:<7} {}", seat.alias, format!("{:?}", seat.role), seat.model);
    }
    println!();
    for line in transcript_lines(&record.events, &record.aliases(), true) {
        println!("{line}");
    }
    println!();
    let o = &record.outcome;
    println!(
        "outcome  {:?}: {} after {} question(s); {} beats {}",
        o.category,
        o.category.title(),
        o.ended_at_turn,
        o.winning_model,
        o.losing_model
    );
    if !record.annotations.leaks.is_empty() {
        println!(
            "leaks    {} non-spy utterance(s) named the target",
            record.annotations.leaks.len()
        );
    }
}

// ---- tournament

fn load_pools(scenarios: &[Scenario], dir: Option<&Path>) -> Result<BTreeMap<String, EntityPool>> {
    let mut pools = BTreeMap::new();
    for s in scenarios {
        let file = dir.map(|d| d.join(format!("{}.txt", s.id())));
        let pool = match file.filter(|f| f.exists()) {
            Some(f) => {
                let pool = load_pool_file(&f)?;
                if pool.scenario != *s {
                    bail!("{} declares {} but is used for {s}", f.display(), pool.scenario);
                }
                pool
            }
            None => bundled_pool(s).with_context(|| format!("no pool file for {s}"))?,
        };
        pools.insert(s.id(), pool);
    }
    Ok(pools)
}

fn cmd_tournament(args: TournamentArgs) -> Result<ExitCode> {
    let config = RunConfigFile::load(&args.config)?;
    let plan = plan_tournament(&config.plan_spec()?)?;
    let out = &config.output_dir;
    let existing = out.join(MANIFEST_FILE).exists() || out.join(RECORDS_FILE).exists();
    if existing && !args.resume {
        bail!("{} already holds a run; pass --resume to continue it", out.display());
    }

    let scenarios = config.scenario_list()?;
    let pools = load_pools(&scenarios, config.pools_dir.as_deref())?;
    let bundle = load_templates(config.templates_dir.as_deref())?;
    let factory = make_factory(
        config.has_remote_models(),
        config.endpoint.client_config(),
        config.sampling.defaults(),
        config.sampling.per_model.clone(),
    )?;

    let options = RunOptions {
        parallelism: args.parallelism.unwrap_or(config.parallelism).max(1),
        limit: args.limit,
    };
    eprintln!(
        "{} tickets ({} models, {} scenarios, {} games per ordered pair)",
        plan.tickets.len(),
        config.models.len(),
        scenarios.len(),
        config.games_per_ordered_pair
    );
    let report = run_tournament(&plan, &factory, &pools, &bundle, out, options)?;
    let report_path = out.join("run_report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    println!(
        "done {}  failed {}  skipped {}  calls {}  tokens {}/{}  wall {:.1}s",
        report.done,
        report.failed,
        report.skipped,
        report.calls,
        report.prompt_tokens,
        report.completion_tokens,
        report.wall_ms as f64 / 1000.0
    );
    println!("records in {}", out.join(RECORDS_FILE).display());
    if report.failed > 0 {
        eprintln!("{} ticket(s) failed; rerun with --resume to retry them", report.failed);
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

// ---- analyze

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let read = read_all(&args.records)?;
    for issue in &read.issues {
        warn!("{}: line {}: {}", args.records.display(), issue.line, issue.problem);
    }
    if read.records.is_empty() {
        eprintln!(
            "warning: {} holds no game records; tables will be empty",
            args.records.display()
        );
    }
    let bt = BtOptions {
        ridge: args.ridge,
        ..BtOptions::default()
    };
    let report = build_report(&read.records, &args.group_by, &bt);
    let written = emit_report(&report, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", render_text(&report));
    println!("\n{} files written to {}", written.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

// ---- replay

fn cmd_replay(args: ReplayArgs) -> Result<ExitCode> {
    let read = read_all(&args.records)?;
    let Some(record) = read.records.iter().find(|r| r.ticket_id == args.ticket) else {
        let ids: Vec<&str> = read.records.iter().map(|r| r.ticket_id.as_str()).collect();
        bail!(
            "no ticket {:?} in {}; available: {}",
            args.ticket,
            args.records.display(),
            if ids.is_empty() {
                "(none)".to_string()
            } else {
                ids.join(", ")
            }
        );
    };
    print_game(record);
    Ok(ExitCode::SUCCESS)
}
