use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::view::PlayerView;
use crate::game::{Role, Schema};

/// Every template a bundle must provide. Body templates are keyed
/// `<phase family>.<role>`.
pub const TEMPLATE_KEYS: [&str; 9] = [
    "base_context",
    "question_generation.spy",
    "question_generation.non_spy",
    "answer_generation.spy",
    "answer_generation.non_spy",
    "entity_guess.spy",
    "entity_guess.non_spy",
    "vote_initiation.spy",
    "vote_initiation.non_spy",
];

const DEFAULTS: [(&str, &str); 9] = [
    ("base_context", include_str!("../../data/templates/base_context.txt")),
    (
        "question_generation.spy",
        include_str!("../../data/templates/question_generation.spy.txt"),
    ),
    (
        "question_generation.non_spy",
        include_str!("../../data/templates/question_generation.non_spy.txt"),
    ),
    (
        "answer_generation.spy",
        include_str!("../../data/templates/answer_generation.spy.txt"),
    ),
    (
        "answer_generation.non_spy",
        include_str!("../../data/templates/answer_generation.non_spy.txt"),
    ),
    (
        "entity_guess.spy",
        include_str!("../../data/templates/entity_guess.spy.txt"),
    ),
    (
        "entity_guess.non_spy",
        include_str!("../../data/templates/entity_guess.non_spy.txt"),
    ),
    (
        "vote_initiation.spy",
        include_str!("../../data/templates/vote_initiation.spy.txt"),
    ),
    (
        "vote_initiation.non_spy",
        include_str!("../../data/templates/vote_initiation.non_spy.txt"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing template {0:?}")]
    MissingTemplate(String),
    #[error("template {template:?} uses unknown placeholder {{{placeholder}}}")]
    UnresolvedPlaceholder { template: String, placeholder: String },
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
}

/// Prompt templates with `{placeholder}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    templates: BTreeMap<String, String>,
}

impl Default for PromptBundle {
    fn default() -> Self {
        Self {
            templates: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl PromptBundle {
    pub fn from_map(templates: BTreeMap<String, String>) -> Self {
        Self { templates }
    }

    /// Reads `<key>.txt` for every known key present in `dir`. Missing files
    /// are left out so [`PromptBundle::validate`] can report them.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        if !dir.is_dir() {
            return Err(PromptError::Io {
                path: dir.display().to_string(),
                detail: "not a directory".into(),
            });
        }
        let mut templates = BTreeMap::new();
        for key in TEMPLATE_KEYS {
            let path = dir.join(format!("{key}.txt"));
            if !path.exists() {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| PromptError::Io {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            templates.insert(key.to_string(), text);
        }
        Ok(Self { templates })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.templates.get(key).map(String::as_str)
    }

    /// Checks every (phase, role) variant exists and uses only known placeholders.
    pub fn validate(&self) -> Result<(), Vec<PromptError>> {
        let mut problems = Vec::new();
        for key in TEMPLATE_KEYS {
            let Some(text) = self.get(key) else {
                problems.push(PromptError::MissingTemplate(key.to_string()));
                continue;
            };
            let allowed: &[&str] = if key == "base_context" {
                &["language"]
            } else {
                &["base_context", "language"]
            };
            for name in placeholders(text) {
                if !allowed.contains(&name.as_str()) {
                    problems.push(PromptError::UnresolvedPlaceholder {
                        template: key.to_string(),
                        placeholder: name,
                    });
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

fn template_key(schema: Schema, role: Role) -> String {
    let role = match role {
        Role::Spy => "spy",
        Role::NonSpy => "non_spy",
    };
    format!("{}.{role}", schema.template_phase())
}

/// Names of `{identifier}` slots in `text`. JSON braces never match because
/// the identifier must close on the same token.
fn placeholders(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if len > 0 && after[len..].starts_with('}') {
            out.push(after[..len].to_string());
            rest = &after[len + 1..];
        } else {
            rest = after;
        }
    }
    out
}

fn fill(key: &str, text: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if len > 0 && after[len..].starts_with('}') {
            let name = &after[..len];
            let value = vars.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).ok_or_else(|| {
                PromptError::UnresolvedPlaceholder {
                    template: key.to_string(),
                    placeholder: name.to_string(),
                }
            })?;
            out.push_str(value);
            rest = &after[len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Assembles the full prompt for one seat.
///
/// Section order: base context and role/phase body (from the template), the
/// player list, the entity list, the secret entity (non-spies only), the
/// public history, the current phase, then a one-line format reminder.
pub fn render_prompt(view: &PlayerView, schema: Schema, bundle: &PromptBundle) -> Result<String, PromptError> {
    let key = template_key(schema, view.role);
    let body = bundle
        .get(&key)
        .ok_or_else(|| PromptError::MissingTemplate(key.clone()))?;
    let base = bundle
        .get("base_context")
        .ok_or_else(|| PromptError::MissingTemplate("base_context".into()))?;
    let language = view.language.display_name();
    let base = fill("base_context", base, &[("language", language)])?;
    let body = fill(&key, body, &[("base_context", base.trim_end()), ("language", language)])?;

    let mut out = body.trim_end().to_string();
    out.push_str("\n\n**Players:** ");
    out.push_str(&view.players.join(", "));
    out.push_str(&format!("\nYou are {}.\n", view.self_alias));

    out.push_str(&format!("\n**Entity list ({}):**\n", view.entity_list.len()));
    for (i, entity) in view.entity_list.iter().enumerate() {
        out.push_str(&format!("{}. {entity}\n", i + 1));
    }
    if let Some(secret) = &view.target_entity {
        out.push_str(&format!("\n**Secret entity:** {secret}\n"));
    }
    out.push_str("\n**Game history:**\n");
    out.push_str(&view.history_text());
    out.push_str("\n\n**Current phase:** ");
    out.push_str(&view.phase_descriptor);
    out.push_str("\n\nRespond with your reasoning followed by the JSON object wrapped in |||...|||.\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::view::redact;
    use crate::corpus::{bundled_pool, list_pools};
    use crate::game::{GameState, MatchConfig, Phase, Scenario, ScenarioKind};

    fn state(scenario: &Scenario, seed: u64) -> GameState {
        let pool = bundled_pool(scenario).unwrap();
        GameState::new(MatchConfig::new(5, "v", "s", scenario.clone(), seed), pool).unwrap()
    }

    #[test]
    fn default_bundle_is_complete() {
        assert_eq!(PromptBundle::default().validate(), Ok(()));
    }

    #[test]
    fn placeholder_scan_ignores_json() {
        let text = "{base_context}\n|||\n{\n  \"answer\": \"x\"\n}\n|||{language}";
        assert_eq!(placeholders(text), vec!["base_context", "language"]);
    }

    #[test]
    fn non_spy_answer_in_indonesian() {
        let scenario = Scenario::new(ScenarioKind::LocalFood, "id");
        let g = (0..)
            .map(|seed| state(&scenario, seed))
            .find(|g| g.seats[1].role == crate::game::Role::NonSpy)
            .unwrap();
        let g = g.apply_question(0, g.alias(1), "Apa kabar?").unwrap();
        let view = redact(&g, 1);
        let prompt = render_prompt(&view, Schema::Answer, &PromptBundle::default()).unwrap();
        assert!(prompt.contains("You must speak in Indonesian language at any cost!"));
        assert!(prompt.contains("You are a Villager answering a question."));
        assert!(prompt.contains("**Entity list (30):**"));
        assert!(prompt.contains("30. Loloh Cemcem"));
        assert!(prompt.contains(&format!("**Secret entity:** {}", g.target_entity())));
        assert!(prompt.contains("Apa kabar?"));
        assert!(!prompt.contains("{base_context}") && !prompt.contains("{language}"));
    }

    #[test]
    fn spy_guess_prompt_has_skip_guidance_and_no_secret() {
        let g = state(&Scenario::new(ScenarioKind::Generic, "en"), 5);
        let view = redact(&g, g.spy_seat());
        let prompt = render_prompt(&view, Schema::Guess, &PromptBundle::default()).unwrap();
        assert!(prompt.contains("Skip if you haven't pinpointed a single location yet."));
        assert!(prompt.contains("You are the Spy in Phase 2"));
        assert!(!prompt.contains("**Secret entity:**"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let g = state(&Scenario::new(ScenarioKind::Generic, "zh"), 8);
        let view = redact(&g, 2);
        let a = render_prompt(&view, Schema::Question, &PromptBundle::default()).unwrap();
        let b = render_prompt(&view, Schema::Question, &PromptBundle::default()).unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn every_scenario_phase_and_role_renders() {
        let bundle = PromptBundle::default();
        for entry in list_pools() {
            let g = state(&entry.scenario, 1);
            for seat in 0..5 {
                let view = redact(&g, seat);
                for schema in [Schema::Question, Schema::Answer, Schema::Guess, Schema::Vote] {
                    let prompt = render_prompt(&view, schema, &bundle).unwrap();
                    assert!(placeholders(&prompt).is_empty(), "{} {schema:?}", entry.id);
                    assert!(prompt.contains(entry.scenario.language.display_name()));
                }
            }
        }
    }

    #[test]
    fn missing_variant_and_stray_placeholder() {
        let mut map: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        map.remove("entity_guess.spy");
        map.insert("answer_generation.spy".into(), "{base_context} {player_count}".into());
        let bundle = PromptBundle::from_map(map);
        let problems = bundle.validate().unwrap_err();
        assert!(problems.contains(&PromptError::MissingTemplate("entity_guess.spy".into())));
        assert!(problems.iter().any(
            |p| matches!(p, PromptError::UnresolvedPlaceholder { placeholder, .. } if placeholder == "player_count")
        ));

        let g = state(&Scenario::new(ScenarioKind::Generic, "en"), 5);
        let spy = redact(&g, g.spy_seat());
        assert_eq!(
            render_prompt(&spy, Schema::Guess, &bundle),
            Err(PromptError::MissingTemplate("entity_guess.spy".into()))
        );
        assert!(matches!(
            render_prompt(&spy, Schema::Answer, &bundle),
            Err(PromptError::UnresolvedPlaceholder { .. })
        ));
        assert_eq!(g.phase, Phase::RoundRobinQuestion(1));
    }

    #[test]
    fn load_dir_reads_files() {
        let dir = tempfile::tempdir().unwrap();
        for (k, v) in DEFAULTS {
            std::fs::write(dir.path().join(format!("{k}.txt")), v).unwrap();
        }
        assert_eq!(PromptBundle::load_dir(dir.path()).unwrap(), PromptBundle::default());
        std::fs::remove_file(dir.path().join("vote_initiation.non_spy.txt")).unwrap();
        let partial = PromptBundle::load_dir(dir.path()).unwrap();
        assert_eq!(
            partial.validate(),
            Err(vec![PromptError::MissingTemplate("vote_initiation.non_spy".into())])
        );
    }
}
