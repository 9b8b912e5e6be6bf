//! Entity pools: the bundled lists and the on-disk pool file format.
//!
//! A pool file is UTF-8 text with a `key: value` header closed by a `---`
//! line, followed by exactly 30 entity display strings, one per line:
//!
//! ```text
//! scenario: local-food
//! language: id
//! source: Local food, Indonesia
//! ---
//! Nastar
//! Nasi Tumpeng
//! ...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::game::{normalize_name, validate_pool, EntityPool, Language, Scenario, ScenarioKind, POOL_SIZE};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {problems}", problems = .problems.join("; "))]
    Malformed { origin: String, problems: Vec<String> },
    #[error("no bundled pool {0:?}")]
    UnknownPool(String),
}

/// Parsed pool file: header fields plus body lines with their 1-based line numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolFile {
    pub scenario: Scenario,
    pub source: String,
    pub entities: Vec<String>,
}

impl PoolFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CorpusError> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut problems = Vec::new();
        let mut kind = None;
        let mut language = None;
        let mut source = String::new();
        let mut body_start = None;

        let lines: Vec<&str> = text.lines().collect();
        for (i, raw) in lines.iter().enumerate() {
            let line = raw.trim_end_matches('\r');
            let lineno = i + 1;
            if line.trim() == "---" {
                body_start = Some(i + 1);
                break;
            }
            if line.trim().is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                problems.push(format!("line {lineno}: expected `key: value` header, got {line:?}"));
                continue;
            };
            let value = value.trim();
            match key.trim().to_ascii_lowercase().as_str() {
                "scenario" => match value.parse::<ScenarioKind>() {
                    Ok(k) => kind = Some(k),
                    Err(e) => problems.push(format!("line {lineno}: {e}")),
                },
                "language" if !value.is_empty() => language = Some(Language::from(value)),
                "language" => problems.push(format!("line {lineno}: empty language code")),
                "source" => source = value.to_string(),
                other => problems.push(format!("line {lineno}: unknown header key {other:?}")),
            }
        }

        let Some(body_start) = body_start else {
            problems.push("missing `---` line closing the header".into());
            return Err(CorpusError::Malformed {
                origin: origin.into(),
                problems,
            });
        };
        if kind.is_none() {
            problems.push("header is missing `scenario`".into());
        }
        if language.is_none() {
            problems.push("header is missing `language`".into());
        }

        let mut entities = Vec::new();
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (offset, raw) in lines[body_start..].iter().enumerate() {
            let lineno = body_start + offset + 1;
            let entity = raw.trim_end_matches('\r').trim();
            if entity.is_empty() {
                problems.push(format!("line {lineno}: empty entity"));
                continue;
            }
            let key = normalize_name(entity);
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
                problems.push(format!(
                    "line {lineno}: duplicate entity {entity:?} (first at line {first})"
                ));
            } else {
                seen.push((key, lineno));
            }
            entities.push(entity.to_string());
        }
        let body_lines = lines.len() - body_start;
        if body_lines != POOL_SIZE {
            problems.push(format!(
                "lines {}-{}: count {body_lines} \u{2260} {POOL_SIZE}",
                body_start + 1,
                lines.len()
            ));
        }

        if !problems.is_empty() {
            return Err(CorpusError::Malformed {
                origin: origin.into(),
                problems,
            });
        }
        Ok(PoolFile {
            scenario: Scenario::new(kind.expect("checked"), language.expect("checked")),
            source,
            entities,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "scenario: {}\nlanguage: {}\n",
            self.scenario.kind.slug(),
            self.scenario.language.code()
        );
        if !self.source.is_empty() {
            out.push_str(&format!("source: {}\n", self.source));
        }
        out.push_str("---\n");
        for e in &self.entities {
            out.push_str(e);
            out.push('\n');
        }
        out
    }

    pub fn into_pool(self, origin: &str) -> Result<EntityPool, CorpusError> {
        let pool = EntityPool::new(self.scenario, self.entities);
        validate_pool(&pool).map_err(|violations| CorpusError::Malformed {
            origin: origin.into(),
            problems: violations.iter().map(|v| v.to_string()).collect(),
        })?;
        Ok(pool)
    }
}

const BUNDLED: [(&str, &str); 10] = [
    ("generic-en", include_str!("../../data/pools/generic-en.txt")),
    ("generic-id", include_str!("../../data/pools/generic-id.txt")),
    ("generic-zh", include_str!("../../data/pools/generic-zh.txt")),
    ("generic-arz", include_str!("../../data/pools/generic-arz.txt")),
    (
        "local-location-id",
        include_str!("../../data/pools/local-location-id.txt"),
    ),
    (
        "local-location-zh",
        include_str!("../../data/pools/local-location-zh.txt"),
    ),
    (
        "local-location-arz",
        include_str!("../../data/pools/local-location-arz.txt"),
    ),
    ("local-food-id", include_str!("../../data/pools/local-food-id.txt")),
    ("local-food-zh", include_str!("../../data/pools/local-food-zh.txt")),
    ("local-food-arz", include_str!("../../data/pools/local-food-arz.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub scenario: Scenario,
    pub source: String,
}

/// The ten bundled (scenario, language) pools.
pub fn list_pools() -> Vec<CatalogEntry> {
    BUNDLED
        .iter()
        .map(|(id, text)| {
            let file = PoolFile::parse(text, id).expect("bundled pool parses");
            CatalogEntry {
                id,
                scenario: file.scenario,
                source: file.source,
            }
        })
        .collect()
}

/// Raw text of a bundled pool file.
pub fn bundled_text(id: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(k, _)| *k == id).map(|(_, text)| *text)
}

pub fn bundled_pool(scenario: &Scenario) -> Result<EntityPool, CorpusError> {
    let id = scenario.id();
    let text = bundled_text(&id).ok_or_else(|| CorpusError::UnknownPool(id.clone()))?;
    PoolFile::parse(text, &id)?.into_pool(&id)
}

/// Loads either a file path or a bundled id such as `local-food-id`.
pub fn load_pool(path_or_id: &str) -> Result<EntityPool, CorpusError> {
    if let Some(text) = bundled_text(path_or_id) {
        return PoolFile::parse(text, path_or_id)?.into_pool(path_or_id);
    }
    load_pool_file(Path::new(path_or_id))
}

pub fn load_pool_file(path: &Path) -> Result<EntityPool, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let origin = path.display().to_string();
    PoolFile::parse(&text, &origin)?.into_pool(&origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_ten_entries() {
        let catalog = list_pools();
        assert_eq!(catalog.len(), 10);
        let scenarios: Vec<_> = catalog.iter().map(|c| c.scenario.clone()).collect();
        assert_eq!(scenarios, Scenario::bundled());
        assert!(scenarios.contains(&Scenario::new(ScenarioKind::Generic, Language::En)));
        assert!(!scenarios.contains(&Scenario::new(ScenarioKind::LocalFood, Language::En)));
        for entry in &catalog {
            assert_eq!(entry.id, entry.scenario.id());
            assert!(entry.scenario.is_bundled());
        }
    }

    #[test]
    fn every_bundled_pool_validates() {
        for entry in list_pools() {
            let pool = load_pool(entry.id).unwrap();
            assert_eq!(pool.len(), POOL_SIZE, "{}", entry.id);
            assert!(validate_pool(&pool).is_ok());
        }
    }

    #[test]
    fn generic_en_order() {
        let pool = load_pool("generic-en").unwrap();
        assert_eq!(pool.entities.first().map(String::as_str), Some("Airplane"));
        assert_eq!(pool.entities.last().map(String::as_str), Some("Zoo"));
    }

    #[test]
    fn local_food_id_contents() {
        let pool = bundled_pool(&Scenario::new(ScenarioKind::LocalFood, Language::Id)).unwrap();
        assert!(pool.entities.iter().any(|e| e == "Loloh Cemcem"));
        assert!(pool.entities.iter().any(|e| e == "Bika Ambon"));
    }

    #[test]
    fn round_trip_preserves_content() {
        for (id, text) in BUNDLED {
            let file = PoolFile::parse(text, id).unwrap();
            let again = PoolFile::parse(&file.to_text(), id).unwrap();
            assert_eq!(file, again);
            assert_eq!(file.to_text(), text, "{id} is not in canonical layout");
        }
    }

    #[test]
    fn arabic_codepoints_survive() {
        let file = PoolFile::parse(bundled_text("local-food-arz").unwrap(), "arz").unwrap();
        let again = PoolFile::parse(&file.to_text(), "arz").unwrap();
        for (a, b) in file.entities.iter().zip(&again.entities) {
            assert_eq!(a.chars().collect::<Vec<_>>(), b.chars().collect::<Vec<_>>());
        }
    }

    fn with_body(body: &[&str]) -> String {
        let mut s = "scenario: generic\nlanguage: en\n---\n".to_string();
        for b in body {
            s.push_str(b);
            s.push('\n');
        }
        s
    }

    #[test]
    fn extra_line_is_a_count_violation() {
        let names: Vec<String> = (0..31).map(|i| format!("E{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let err = PoolFile::parse(&with_body(&refs), "x.txt").unwrap_err();
        assert!(err.to_string().contains("count 31"), "{err}");
        assert!(err.to_string().contains("lines 4-34"), "{err}");
    }

    #[test]
    fn duplicate_reports_both_lines() {
        let mut names: Vec<String> = (0..29).map(|i| format!("E{i}")).collect();
        names.push(" e3 ".into());
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let err = PoolFile::parse(&with_body(&refs), "x.txt").unwrap_err().to_string();
        assert!(
            err.contains("line 33: duplicate") && err.contains("first at line 7"),
            "{err}"
        );
    }

    #[test]
    fn header_problems() {
        let err = PoolFile::parse("scenario: generic\nAirplane\n", "x")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2") && err.contains("missing `---`"), "{err}");
        let err = PoolFile::parse("scenario: moon\nlanguage: en\n---\n", "x")
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown scenario kind"), "{err}");
    }

    #[test]
    fn user_file_loads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.txt");
        let names: Vec<String> = (0..30).map(|i| format!("Spot {i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        std::fs::write(&path, with_body(&refs).replace("language: en", "language: jv")).unwrap();
        let pool = load_pool(path.to_str().unwrap()).unwrap();
        assert_eq!(pool.scenario.language, Language::Other("jv".into()));
        assert!(matches!(
            load_pool("/nonexistent/pool.txt"),
            Err(CorpusError::Io { .. })
        ));
    }
}
