use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plan::{PlanSpec, TicketStatus, TournamentPlan};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketEntry {
    pub ticket_id: String,
    pub status: TicketStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Plan parameters plus per-ticket status; rewritten as the run progresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub spec: PlanSpec,
    pub records: String,
    pub tickets: Vec<TicketEntry>,
}

impl RunManifest {
    pub fn new(plan: &TournamentPlan, records: impl Into<String>) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            spec: plan.spec.clone(),
            records: records.into(),
            tickets: plan
                .tickets
                .iter()
                .map(|t| TicketEntry {
                    ticket_id: t.ticket_id.clone(),
                    status: t.status,
                    error: None,
                })
                .collect(),
        }
    }

    pub fn count(&self, status: TicketStatus) -> usize {
        self.tickets.iter().filter(|t| t.status == status).count()
    }

    pub fn set(&mut self, ticket_id: &str, status: TicketStatus, error: Option<String>) {
        if let Some(t) = self.tickets.iter_mut().find(|t| t.ticket_id == ticket_id) {
            t.status = status;
            t.error = error;
        }
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let manifest: Self = serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        if manifest.manifest_version != MANIFEST_VERSION {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unsupported manifest_version {}", manifest.manifest_version),
            ));
        }
        Ok(manifest)
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        fs::write(&tmp, text + "\n")?;
        fs::rename(&tmp, path)
    }
}
