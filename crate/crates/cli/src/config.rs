use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use spyfall_core::agent::remote::{ClientConfig, SamplingParams, DEFAULT_ENDPOINT, DEFAULT_KEY_ENV};
use spyfall_core::game::{Scenario, MAX_PLAYERS, MIN_PLAYERS};
use spyfall_core::orchestrator::{AgentSpec, PlanSpec};

/// Tournament config file (TOML).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// `bot:<kind>[:seed]` or `model:<id>` entries.
    pub models: Vec<String>,
    /// Scenario ids, or `["all"]` for the ten bundled ones.
    pub scenarios: Vec<String>,
    pub games_per_ordered_pair: usize,
    #[serde(default = "default_players")]
    pub player_count: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub retry_limit: u32,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Directory of template overrides; bundled templates otherwise.
    pub templates_dir: Option<PathBuf>,
    /// Directory of `<scenario-id>.txt` pool files that replace bundled ones.
    pub pools_dir: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: EndpointSection,
    #[serde(default)]
    pub sampling: SamplingSection,
}

fn default_players() -> usize {
    5
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointSection {
    pub url: String,
    /// Name of the environment variable that holds the key. Keys themselves never go in the file.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub max_concurrency: usize,
    pub min_interval_ms: u64,
}

impl Default for EndpointSection {
    fn default() -> Self {
        let c = ClientConfig::default();
        Self {
            url: DEFAULT_ENDPOINT.into(),
            api_key_env: DEFAULT_KEY_ENV.into(),
            timeout_secs: c.timeout_secs,
            max_retries: c.max_retries,
            backoff_base_ms: c.backoff_base_ms,
            backoff_cap_ms: c.backoff_cap_ms,
            max_concurrency: c.max_concurrency,
            min_interval_ms: c.min_interval_ms,
        }
    }
}

impl EndpointSection {
    pub fn client_config(&self) -> ClientConfig {
        ClientConfig {
            endpoint: self.url.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
            backoff_base_ms: self.backoff_base_ms,
            backoff_cap_ms: self.backoff_cap_ms,
            max_concurrency: self.max_concurrency,
            min_interval_ms: self.min_interval_ms,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub per_model: BTreeMap<String, SamplingParams>,
}

impl SamplingSection {
    pub fn defaults(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            ..SamplingParams::default()
        }
    }
}

fn is_env_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase() || c == '_')
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config
            .check()
            .with_context(|| format!("validating {}", path.display()))?;
        Ok(config)
    }

    /// Everything that can be checked without touching the network.
    pub fn check(&self) -> Result<()> {
        for m in &self.models {
            m.parse::<AgentSpec>().map_err(anyhow::Error::msg)?;
        }
        self.scenario_list()?;
        if self.games_per_ordered_pair == 0 {
            bail!("games_per_ordered_pair must be at least 1");
        }
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&self.player_count) {
            bail!(
                "player_count {} outside {MIN_PLAYERS}..={MAX_PLAYERS}",
                self.player_count
            );
        }
        if self.parallelism == 0 {
            bail!("parallelism must be at least 1");
        }
        if !is_env_name(&self.endpoint.api_key_env) {
            bail!("endpoint.api_key_env must name an environment variable (like OPENROUTER_API_KEY), not hold a key");
        }
        if self.endpoint.max_concurrency == 0 {
            bail!("endpoint.max_concurrency must be at least 1");
        }
        Ok(())
    }

    pub fn scenario_list(&self) -> Result<Vec<Scenario>> {
        if self.scenarios.iter().any(|s| s.eq_ignore_ascii_case("all")) {
            return Ok(Scenario::bundled());
        }
        if self.scenarios.is_empty() {
            bail!("no scenarios listed");
        }
        self.scenarios
            .iter()
            .map(|s| {
                s.parse::<Scenario>()
                    .map_err(|e| anyhow::anyhow!("scenario {s:?}: {e}"))
            })
            .collect()
    }

    pub fn has_remote_models(&self) -> bool {
        self.models
            .iter()
            .any(|m| m.parse::<AgentSpec>().map(|s| s.is_remote()).unwrap_or(false))
    }

    pub fn plan_spec(&self) -> Result<PlanSpec> {
        let mut spec = PlanSpec::new(
            self.models.clone(),
            self.scenario_list()?,
            self.games_per_ordered_pair,
            self.seed,
        );
        spec.player_count = self.player_count;
        spec.retry_limit = self.retry_limit;
        Ok(spec)
    }
}
