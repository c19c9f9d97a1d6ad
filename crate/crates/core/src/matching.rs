//! Gold-answer matching shared by the training loss and evaluation.

use serde::{Deserialize, Serialize};

use crate::store::EntityRef;
use crate::temporal::{normalize_date, DATE_ID_PREFIX};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default)]
    pub label: String,
}

impl GoldAnswer {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: Some(id.into()),
            label: label.into(),
        }
    }

    pub fn label_only(label: impl Into<String>) -> Self {
        Self {
            id: None,
            label: label.into(),
        }
    }

    fn id(&self) -> Option<&str> {
        self.id.as_deref().filter(|s| !s.is_empty())
    }

    fn iso(&self) -> Option<String> {
        if let Some(iso) = self.id().and_then(|id| id.strip_prefix(DATE_ID_PREFIX)) {
            return Some(iso.to_string());
        }
        normalize_date(&self.label)
    }
}

fn entity_iso(entity: &EntityRef) -> Option<String> {
    let iso = entity.id.strip_prefix(DATE_ID_PREFIX)?;
    Some(iso.to_string())
}

/// Id first; label equality only when the gold lacks an id; dates by ISO form.
pub fn matches_gold(entity: &EntityRef, gold: &GoldAnswer) -> bool {
    match gold.id() {
        Some(id) if id == entity.id => return true,
        Some(_) => {}
        None => {
            let g = tokenize(&gold.label);
            if !g.is_empty() && g == tokenize(&entity.label) {
                return true;
            }
        }
    }
    match (entity_iso(entity), gold.iso()) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

pub fn matches_any(entity: &EntityRef, golds: &[GoldAnswer]) -> bool {
    golds.iter().any(|g| matches_gold(entity, g))
}
