//! Domain types shared by every stage of the pipeline, plus the invariant
//! checks run on everything loaded from disk.

mod bom;
mod database;
mod method;
mod validate;

use serde::{Deserialize, Serialize};

pub use bom::{Attributes, BillOfMaterials, Component, ComponentCategory};
pub use database::{BackgroundDatabase, Compartment, DatabaseMode, ElementaryFlow, UnitProcess};
pub use method::{CharacterizationMethod, ImpactCategory, ImpactVector};
pub use validate::{validate_bom, validate_database, validate_method, ValidationReport, Violation};

/// The only file-format revision this crate reads and writes.
pub const SCHEMA_VERSION: &str = "1";

/// Top-level `schemaVersion` field carried by every data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaVersion(pub String);

impl Default for SchemaVersion {
    fn default() -> Self {
        SchemaVersion(SCHEMA_VERSION.to_owned())
    }
}

impl SchemaVersion {
    pub fn is_supported(&self) -> bool {
        self.0 == SCHEMA_VERSION
    }
}
