use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::SchemaVersion;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImpactCategory {
    pub id: String,
    pub name: String,
    pub abbreviation: String,
    pub unit: String,
}

/// Impact categories plus the sparse factor matrix mapping elementary flows
/// onto category scores.
///
/// `factors[category][flow]` is expressed in category unit per flow unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CharacterizationMethod {
    pub schema_version: SchemaVersion,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub categories: Vec<ImpactCategory>,
    #[serde(default)]
    pub factors: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CharacterizationMethod {
    pub fn category_ids(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.id.as_str())
    }

    pub fn category(&self, id: &str) -> Option<&ImpactCategory> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn factor(&self, category: &str, flow: &str) -> Option<f64> {
        self.factors.get(category).and_then(|row| row.get(flow)).copied()
    }

    /// A vector with every category set to zero, in method order.
    pub fn zero_vector(&self) -> ImpactVector {
        ImpactVector {
            method_id: self.id.clone(),
            values: self.categories.iter().map(|c| (c.id.clone(), 0.0)).collect(),
        }
    }
}

/// Per-category impact scores, keyed in method order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImpactVector {
    pub method_id: String,
    pub values: IndexMap<String, f64>,
}

impl ImpactVector {
    pub fn get(&self, category: &str) -> Option<f64> {
        self.values.get(category).copied()
    }

    /// Element-wise `self += other`. Both vectors must come from the same
    /// method, so keys line up position by position.
    pub fn add_assign(&mut self, other: &ImpactVector) {
        debug_assert_eq!(self.method_id, other.method_id);
        for (value, (_, rhs)) in self.values.values_mut().zip(other.values.iter()) {
            *value += rhs;
        }
    }

    pub fn scaled(&self, factor: f64) -> ImpactVector {
        ImpactVector {
            method_id: self.method_id.clone(),
            values: self.values.iter().map(|(k, v)| (k.clone(), v * factor)).collect(),
        }
    }
}
