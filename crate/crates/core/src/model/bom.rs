use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SchemaVersion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentCategory {
    Ic,
    Passive,
    Pcb,
    Fan,
    Heatsink,
    Casing,
    Cable,
    Assembly,
    Transport,
    Connector,
    CrystalOscillator,
    Other,
}

impl ComponentCategory {
    pub const ALL: [ComponentCategory; 12] = [
        ComponentCategory::Ic,
        ComponentCategory::Passive,
        ComponentCategory::Pcb,
        ComponentCategory::Fan,
        ComponentCategory::Heatsink,
        ComponentCategory::Casing,
        ComponentCategory::Cable,
        ComponentCategory::Assembly,
        ComponentCategory::Transport,
        ComponentCategory::Connector,
        ComponentCategory::CrystalOscillator,
        ComponentCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentCategory::Ic => "ic",
            ComponentCategory::Passive => "passive",
            ComponentCategory::Pcb => "pcb",
            ComponentCategory::Fan => "fan",
            ComponentCategory::Heatsink => "heatsink",
            ComponentCategory::Casing => "casing",
            ComponentCategory::Cable => "cable",
            ComponentCategory::Assembly => "assembly",
            ComponentCategory::Transport => "transport",
            ComponentCategory::Connector => "connector",
            ComponentCategory::CrystalOscillator => "crystal-oscillator",
            ComponentCategory::Other => "other",
        }
    }
}

impl fmt::Display for ComponentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ComponentCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown component category {s:?}"))
    }
}

/// Physical attributes of a component. Units are fixed per field: kg for
/// mass, mm² for die and package areas, m² for board area, m for length.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Attributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub die_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub board_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Anything else the data file records (e.g. rated power). Carried
    /// through untouched; no scaling rule reads it.
    #[serde(flatten)]
    pub extra: BTreeMap<String, f64>,
}

impl Attributes {
    /// Names of the real-valued attributes addressable by sensitivity paths
    /// and extrapolation specs.
    pub const SCALABLE: [&'static str; 5] = ["mass", "dieArea", "packageArea", "boardArea", "length"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "mass" => self.mass,
            "dieArea" => self.die_area,
            "packageArea" => self.package_area,
            "boardArea" => self.board_area,
            "length" => self.length,
            other => self.extra.get(other).copied(),
        }
    }

    /// Overwrites a scalable attribute. Returns `false` for names that are
    /// not scalable (including `layerCount`).
    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "mass" => &mut self.mass,
            "dieArea" => &mut self.die_area,
            "packageArea" => &mut self.package_area,
            "boardArea" => &mut self.board_area,
            "length" => &mut self.length,
            _ => return false,
        };
        *slot = Some(value);
        true
    }

    /// All present real-valued attributes, for invariant checks.
    pub fn real_values(&self) -> impl Iterator<Item = (&str, f64)> {
        let fixed = [
            ("mass", self.mass),
            ("dieArea", self.die_area),
            ("packageArea", self.package_area),
            ("boardArea", self.board_area),
            ("length", self.length),
        ];
        fixed
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .chain(self.extra.iter().map(|(k, v)| (k.as_str(), *v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Component {
    pub id: String,
    pub name: String,
    pub category: ComponentCategory,
    pub quantity: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub attributes: Attributes,
    /// Contribution-report group label (e.g. "ASICs", "PCBs").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn is_default(a: &Attributes) -> bool {
    *a == Attributes::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BillOfMaterials {
    pub schema_version: SchemaVersion,
    pub device_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub subassemblies: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BillOfMaterials {
    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    /// Component id → contribution group label, for components that carry one.
    pub fn grouping(&self) -> BTreeMap<String, String> {
        self.components
            .iter()
            .filter_map(|c| c.group.as_ref().map(|g| (c.id.clone(), g.clone())))
            .collect()
    }

    /// Sum of quantities over one category.
    pub fn count(&self, category: ComponentCategory) -> f64 {
        self.components
            .iter()
            .filter(|c| c.category == category)
            .map(|c| c.quantity)
            .sum()
    }
}
