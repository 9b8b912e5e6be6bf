use std::fmt;
use std::str::FromStr;

use crate::agent::{Agent, ScriptedAgent, ScriptedKind};
use crate::game::GameState;
use crate::seed::derive_seed;

/// How a model id resolves to an agent.
///
/// `bot:<kind>[:<seed>]` names a scripted bot (`bot:honest`, `bot:skill=0.8:3`).
/// `model:<id>`, or any other string, is a remote model id for the chat endpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Bot { kind: ScriptedKind, seed: u64 },
    Remote(String),
}

impl AgentSpec {
    pub fn is_remote(&self) -> bool {
        matches!(self, AgentSpec::Remote(_))
    }
}

impl FromStr for AgentSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty model id".into());
        }
        let Some(rest) = s.strip_prefix("bot:") else {
            let id = s.strip_prefix("model:").unwrap_or(s).trim();
            if id.is_empty() {
                return Err("empty model id".into());
            }
            return Ok(AgentSpec::Remote(id.to_string()));
        };
        let (kind, seed) = match rest.split_once(':') {
            Some((k, seed)) => (k, seed.parse::<u64>().map_err(|_| format!("bad bot seed in {s:?}"))?),
            None => (rest, 0),
        };
        Ok(AgentSpec::Bot {
            kind: kind.parse()?,
            seed,
        })
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Bot { kind, seed: 0 } => write!(f, "bot:{kind}"),
            AgentSpec::Bot { kind, seed } => write!(f, "bot:{kind}:{seed}"),
            AgentSpec::Remote(id) => f.write_str(id),
        }
    }
}

/// Builds one agent per seat at the start of each match.
pub trait AgentFactory: Sync {
    fn build(&self, model: &str, seat: usize, state: &GameState) -> Result<Box<dyn Agent>, String>;
}

/// Resolves `bot:` ids only. Bots that need the secret get it here.
#[derive(Debug, Clone, Copy, Default)]
pub struct BotFactory;

pub(crate) fn build_bot(kind: ScriptedKind, seed: u64, seat: usize, state: &GameState) -> Box<dyn Agent> {
    let seed = derive_seed(&[
        &seed.to_le_bytes(),
        &state.config.seed.to_le_bytes(),
        &(seat as u64).to_le_bytes(),
    ]);
    let mut bot = ScriptedAgent::new(kind, seed);
    if kind.needs_secret() {
        bot = bot.with_secret(state.target_entity());
    }
    Box::new(bot)
}

impl AgentFactory for BotFactory {
    fn build(&self, model: &str, seat: usize, state: &GameState) -> Result<Box<dyn Agent>, String> {
        match model.parse::<AgentSpec>()? {
            AgentSpec::Bot { kind, seed } => Ok(build_bot(kind, seed, seat, state)),
            AgentSpec::Remote(id) => Err(format!("{id:?} is not a scripted bot and no endpoint is configured")),
        }
    }
}

#[cfg(feature = "remote")]
mod standard {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::agent::remote::{ChatClient, RemoteAgent, SamplingParams};

    /// Resolves bots locally and every other id through one shared client.
    pub struct StandardFactory {
        pub client: Option<Arc<ChatClient>>,
        pub default_params: SamplingParams,
        pub per_model: BTreeMap<String, SamplingParams>,
    }

    impl AgentFactory for StandardFactory {
        fn build(&self, model: &str, seat: usize, state: &GameState) -> Result<Box<dyn Agent>, String> {
            match model.parse::<AgentSpec>()? {
                AgentSpec::Bot { kind, seed } => Ok(build_bot(kind, seed, seat, state)),
                AgentSpec::Remote(id) => {
                    let client = self
                        .client
                        .as_ref()
                        .ok_or_else(|| format!("{id:?} needs a chat endpoint but none is configured"))?;
                    let params = self.per_model.get(&id).unwrap_or(&self.default_params).clone();
                    Ok(Box::new(RemoteAgent::new(Arc::clone(client), id, params)))
                }
            }
        }
    }
}

#[cfg(feature = "remote")]
pub use standard::StandardFactory;
