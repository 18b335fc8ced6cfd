use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SchemaVersion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compartment {
    Air,
    Water,
    Soil,
    Resource,
}

/// An exchange with the environment: an emission to a compartment or a
/// resource extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ElementaryFlow {
    pub id: String,
    pub name: String,
    pub compartment: Compartment,
    pub unit: String,
}

/// One database activity, expressed per unit of its reference product.
///
/// `tech_inputs` holds input coefficients: the amount of another process
/// consumed per reference unit of this one. It is always empty in
/// aggregated databases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnitProcess {
    pub id: String,
    pub name: String,
    pub reference_unit: String,
    #[serde(default)]
    pub direct_flows: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tech_inputs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatabaseMode {
    /// System processes: every process already carries its full cradle-to-gate
    /// flows, so the inventory is a weighted sum.
    Aggregated,
    /// Unit processes linked through a technosphere matrix; the inventory
    /// requires a Leontief solve.
    Linked,
}

impl fmt::Display for DatabaseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatabaseMode::Aggregated => "aggregated",
            DatabaseMode::Linked => "linked",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BackgroundDatabase {
    pub schema_version: SchemaVersion,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: DatabaseMode,
    pub flows: Vec<ElementaryFlow>,
    pub processes: Vec<UnitProcess>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BackgroundDatabase {
    pub fn process(&self, id: &str) -> Option<&UnitProcess> {
        self.processes.iter().find(|p| p.id == id)
    }

    pub fn has_process(&self, id: &str) -> bool {
        self.process(id).is_some()
    }

    pub fn flow(&self, id: &str) -> Option<&ElementaryFlow> {
        self.flows.iter().find(|f| f.id == id)
    }
}
