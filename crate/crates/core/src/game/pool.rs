use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::normalize::normalize_name;
use super::Scenario;

/// Number of entities every pool must hold.
pub const POOL_SIZE: usize = 30;

/// The 30 guessable entities of one scenario, with precomputed canonical forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPool {
    pub scenario: Scenario,
    pub entities: Vec<String>,
    pub canonical: Vec<String>,
}

impl EntityPool {
    /// Builds a pool without validating it; see [`validate_pool`].
    pub fn new(scenario: Scenario, entities: Vec<String>) -> Self {
        let canonical = entities.iter().map(|e| normalize_name(e)).collect();
        Self {
            scenario,
            entities,
            canonical,
        }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Index of the entity whose canonical form equals that of `text`.
    pub fn position(&self, text: &str) -> Option<usize> {
        let key = normalize_name(text);
        self.canonical.iter().position(|c| *c == key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolViolationKind {
    Count { found: usize },
    Empty,
    Duplicate { first: usize },
    CanonicalMismatch,
}

/// One problem found in a pool. `index` is the 0-based entity position
/// (absent for whole-pool problems).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolViolation {
    pub index: Option<usize>,
    pub kind: PoolViolationKind,
}

impl fmt::Display for PoolViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, self.index) {
            (PoolViolationKind::Count { found }, _) => {
                write!(f, "count {found} \u{2260} {POOL_SIZE}")
            }
            (PoolViolationKind::Empty, Some(i)) => write!(f, "entity {i}: empty after normalization"),
            (PoolViolationKind::Duplicate { first }, Some(i)) => {
                write!(f, "entity {i}: duplicate after normalization (same as entity {first})")
            }
            (PoolViolationKind::CanonicalMismatch, Some(i)) => {
                write!(f, "entity {i}: canonical form does not match display string")
            }
            (kind, None) => write!(f, "{kind:?}"),
        }
    }
}

/// Checks the pool has exactly 30 non-empty entities, distinct after normalization.
pub fn validate_pool(pool: &EntityPool) -> Result<(), Vec<PoolViolation>> {
    let mut violations = Vec::new();
    if pool.entities.len() != POOL_SIZE {
        violations.push(PoolViolation {
            index: None,
            kind: PoolViolationKind::Count {
                found: pool.entities.len(),
            },
        });
    }
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, display) in pool.entities.iter().enumerate() {
        let key = normalize_name(display);
        if pool.canonical.get(i) != Some(&key) {
            violations.push(PoolViolation {
                index: Some(i),
                kind: PoolViolationKind::CanonicalMismatch,
            });
        }
        if key.is_empty() {
            violations.push(PoolViolation {
                index: Some(i),
                kind: PoolViolationKind::Empty,
            });
            continue;
        }
        if let Some(&first) = seen.get(&key) {
            violations.push(PoolViolation {
                index: Some(i),
                kind: PoolViolationKind::Duplicate { first },
            });
        } else {
            seen.insert(key, i);
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
