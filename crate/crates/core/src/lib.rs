//! Cradle-to-gate life-cycle assessment of electronic hardware.
//!
//! The pipeline runs from a declarative bill of materials to impact scores:
//!
//! 1. [`scaling`] maps each component onto background-database processes
//!    through component-specific scaling rules, applying cut-offs and
//!    transport.
//! 2. [`inventory`] solves the Leontief system `(I − A)s = f` and sums the
//!    elementary flows of every scaled process.
//! 3. [`impact`] characterizes the inventory and breaks it down by group,
//!    ranks hotspots, and compares databases.
//! 4. [`scenario`] adds the use phase, sensitivity runs and extrapolation to
//!    related devices.
//!
//! [`io`] reads the JSON data files and [`report`] writes CSV tables.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assessment;
pub mod error;
pub mod impact;
pub mod inventory;
pub mod io;
pub mod model;
pub mod report;
pub mod scaling;
pub mod scenario;

pub use assessment::{assess, Assessment};
pub use error::{Error, ErrorKind, Result};
pub use impact::{
    characterize, compare_databases, contributions, hotspot_ranking, ComparisonTable, ContributionTable, Grouping,
    Ranking,
};
pub use inventory::{lci, lci_aggregated, lci_linked, InventoryVector, SolverOptions};
pub use model::{
    Attributes, BackgroundDatabase, BillOfMaterials, CharacterizationMethod, Component, ComponentCategory,
    DatabaseMode, ElementaryFlow, ImpactCategory, ImpactVector, UnitProcess, ValidationReport,
};
pub use scaling::{
    ic_mass_from_die_area, pcb_layer_blend, transport_demands, MappingRule, RuleSet, ScaledDemand, Scaling, Source,
    Stage,
};
pub use scenario::{
    blend_mix, extrapolate, production_share, run_scenarios, run_sensitivity, use_phase_energy, use_phase_impacts,
    ExtrapolationSpec, ScenarioFile, SensitivityBounds, UsePhaseScenario,
};

/// Crate version, written into report metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
