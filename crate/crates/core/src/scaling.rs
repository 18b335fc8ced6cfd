//! Foreground → background mapping: each bill-of-materials component is
//! matched to a database process by a rule, and its physical attributes are
//! turned into a demand in that process's reference unit.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use wildmatch::WildMatch;

use crate::error::{Error, Result};
use crate::model::{
    BackgroundDatabase, BillOfMaterials, Component, ComponentCategory, SchemaVersion, ValidationReport,
};

/// Layer counts with a dedicated PCB process in the databases.
pub const AVAILABLE_PCB_LAYERS: [u32; 3] = [2, 4, 8];

/// Placeholder substituted with a layer count in `pcb-layer-blend` rules.
pub const LAYER_PLACEHOLDER: &str = "{layers}";

pub const CUTOFF_REASON: &str = "database-cutoff";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Production,
    /// Upstream transport of the component to the assembly site.
    Transport,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Production => "production",
            Stage::Transport => "transport",
        })
    }
}

/// Attribution key: which component caused a demand, and at which stage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Source {
    pub component_id: String,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaledDemand {
    pub process_id: String,
    /// In the process's reference unit.
    pub amount: f64,
    pub source_component_id: String,
    pub stage: Stage,
}

impl ScaledDemand {
    pub fn source(&self) -> Source {
        Source {
            component_id: self.source_component_id.clone(),
            stage: self.stage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    ByCount,
    ByMass,
    ByArea,
    ByLength,
    ByDieArea,
    ByPackageArea,
    PcbLayerBlend,
    TransportTkm,
}

impl Scaling {
    fn required_parameters(self) -> &'static [&'static str] {
        match self {
            Scaling::ByDieArea => &[param::WAFER_AREA_PER_KG],
            Scaling::ByPackageArea => &[param::WAFER_AREA_PER_KG, param::DIE_TO_PACKAGE_RATIO],
            Scaling::TransportTkm => &[param::DISTANCE_KM],
            _ => &[],
        }
    }
}

/// Rule parameter names.
pub mod param {
    /// mm² of wafer per kg of packaged IC.
    pub const WAFER_AREA_PER_KG: &str = "waferAreaPerKg";
    /// Die area over package area, in (0, 1].
    pub const DIE_TO_PACKAGE_RATIO: &str = "dieToPackageRatio";
    pub const DISTANCE_KM: &str = "distanceKm";
}

/// Which components a rule applies to. Both fields, when present, must match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Selector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<ComponentCategory>,
    /// Exact id, or a pattern with `*` / `?` wildcards.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_id: Option<String>,
}

/// Match strength; higher wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Precedence {
    Category,
    Pattern,
    Exact,
}

fn is_pattern(id: &str) -> bool {
    id.contains(['*', '?'])
}

/// True when `pattern` (exact id or wildcard pattern) selects `id`.
pub fn id_matches(pattern: &str, id: &str) -> bool {
    if is_pattern(pattern) {
        WildMatch::new(pattern).matches(id)
    } else {
        pattern == id
    }
}

impl Selector {
    fn precedence(&self, component: &Component) -> Option<Precedence> {
        if let Some(category) = self.category {
            if category != component.category {
                return None;
            }
        }
        match &self.component_id {
            Some(pattern) if is_pattern(pattern) => WildMatch::new(pattern)
                .matches(&component.id)
                .then_some(Precedence::Pattern),
            Some(exact) => (exact == &component.id).then_some(Precedence::Exact),
            None => self.category.map(|_| Precedence::Category),
        }
    }

    fn is_empty(&self) -> bool {
        self.category.is_none() && self.component_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MappingRule {
    /// Optional handle used by sensitivity parameter paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub selector: Selector,
    pub database_id: String,
    /// For `pcb-layer-blend`, a template containing `{layers}`.
    pub process_id: String,
    pub scaling: Scaling,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MappingRule {
    fn label(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| format!("mappingRules[{index}]"))
    }

    fn parameter(&self, name: &str) -> Result<f64> {
        self.parameters
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("rule for {} lacks parameter {name}", self.process_id)))
    }

    /// Process ids this rule can emit demands on.
    pub fn process_ids(&self) -> Vec<String> {
        match self.scaling {
            Scaling::PcbLayerBlend => AVAILABLE_PCB_LAYERS
                .iter()
                .map(|n| self.process_id.replace(LAYER_PLACEHOLDER, &n.to_string()))
                .collect(),
            _ => vec![self.process_id.clone()],
        }
    }
}

/// Component categories a database cannot represent and therefore drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CutoffPolicy {
    pub database_id: String,
    pub excluded_categories: Vec<ComponentCategory>,
}

impl CutoffPolicy {
    pub fn none(database_id: &str) -> Self {
        CutoffPolicy {
            database_id: database_id.to_owned(),
            excluded_categories: Vec::new(),
        }
    }

    pub fn excludes(&self, category: ComponentCategory) -> bool {
        self.excluded_categories.contains(&category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransportMode {
    Train,
    Truck,
    Ship,
    Air,
}

impl TransportMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TransportMode::Train => "train",
            TransportMode::Truck => "truck",
            TransportMode::Ship => "ship",
            TransportMode::Air => "air",
        }
    }
}

impl FromStr for TransportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(TransportMode::Train),
            "truck" => Ok(TransportMode::Truck),
            "ship" => Ok(TransportMode::Ship),
            "air" => Ok(TransportMode::Air),
            other => Err(Error::Mapping(format!("unknown transport mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransportLeg {
    pub mode: String,
    pub process_id: String,
    pub distance_km: f64,
}

/// Upstream transport applied to every modeled, physically shipped component
/// (everything but `transport` and `assembly` entries) of one database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransportPolicy {
    pub database_id: String,
    pub legs: Vec<TransportLeg>,
    /// Contribution group that collects transport impacts. Without it,
    /// transport is reported under each component's own group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The `mappingRules` / `cutoffPolicies` / `transportPolicies` file
/// sections. They may live in their own file or inside the
/// bill-of-materials file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleSet {
    pub schema_version: SchemaVersion,
    #[serde(default)]
    pub mapping_rules: Vec<MappingRule>,
    #[serde(default)]
    pub cutoff_policies: Vec<CutoffPolicy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transport_policies: Vec<TransportPolicy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RuleSet {
    pub fn rules_for(&self, database_id: &str) -> Vec<MappingRule> {
        self.mapping_rules
            .iter()
            .filter(|r| r.database_id == database_id)
            .cloned()
            .collect()
    }

    pub fn cutoff_for(&self, database_id: &str) -> CutoffPolicy {
        self.cutoff_policies
            .iter()
            .find(|p| p.database_id == database_id)
            .cloned()
            .unwrap_or_else(|| CutoffPolicy::none(database_id))
    }

    pub fn transport_for(&self, database_id: &str) -> Option<&TransportPolicy> {
        self.transport_policies.iter().find(|p| p.database_id == database_id)
    }

    /// Resolves `bom` against `db` using the rules, cut-off and transport
    /// policy registered for that database.
    pub fn resolve(&self, bom: &BillOfMaterials, db: &BackgroundDatabase) -> Result<Resolution> {
        resolve(
            bom,
            &self.rules_for(&db.id),
            &self.cutoff_for(&db.id),
            self.transport_for(&db.id),
            db,
        )
    }
}

/// IC mass obtained by dividing die area by the wafer area that yields 1 kg
/// of ICs.
pub fn ic_mass_from_die_area(die_area_mm2: f64, wafer_area_per_kg: f64) -> Result<f64> {
    if !(wafer_area_per_kg > 0.0) || !wafer_area_per_kg.is_finite() {
        return Err(Error::Parameter(format!(
            "{} must be a positive number, got {wafer_area_per_kg}",
            param::WAFER_AREA_PER_KG
        )));
    }
    if !(die_area_mm2 >= 0.0) || !die_area_mm2.is_finite() {
        return Err(Error::Parameter(format!("die area must be >= 0, got {die_area_mm2}")));
    }
    Ok(die_area_mm2 / wafer_area_per_kg)
}

/// Die area estimated from package area and a die-to-package ratio.
pub fn die_area_from_package(package_area_mm2: f64, die_to_package_ratio: f64) -> Result<f64> {
    if !(die_to_package_ratio > 0.0 && die_to_package_ratio <= 1.0) {
        return Err(Error::Parameter(format!(
            "{} must lie in (0, 1], got {die_to_package_ratio}",
            param::DIE_TO_PACKAGE_RATIO
        )));
    }
    if !(package_area_mm2 >= 0.0) || !package_area_mm2.is_finite() {
        return Err(Error::Parameter(format!(
            "package area must be >= 0, got {package_area_mm2}"
        )));
    }
    Ok(package_area_mm2 * die_to_package_ratio)
}

/// Weights over the available PCB layer-count processes. Exact matches get
/// weight one; 6-layer boards are an even blend of 4 and 8 layers.
pub fn pcb_layer_blend(layer_count: u32) -> Result<BTreeMap<u32, f64>> {
    if AVAILABLE_PCB_LAYERS.contains(&layer_count) {
        return Ok(BTreeMap::from([(layer_count, 1.0)]));
    }
    match layer_count {
        6 => Ok(BTreeMap::from([(4, 0.5), (8, 0.5)])),
        n => Err(Error::Mapping(format!("no PCB layer blend defined for {n} layers"))),
    }
}

/// Tonne-kilometres per transport mode for a shipped mass.
pub fn transport_demands(
    total_mass_kg: f64,
    distances_km: &BTreeMap<String, f64>,
) -> Result<BTreeMap<TransportMode, f64>> {
    if !(total_mass_kg >= 0.0) || !total_mass_kg.is_finite() {
        return Err(Error::Parameter(format!(
            "transported mass must be >= 0, got {total_mass_kg}"
        )));
    }
    let mut out = BTreeMap::new();
    for (mode, &km) in distances_km {
        let mode: TransportMode = mode.parse()?;
        if !(km >= 0.0) || !km.is_finite() {
            return Err(Error::Parameter(format!(
                "{} distance must be >= 0, got {km}",
                mode.as_str()
            )));
        }
        *out.entry(mode).or_insert(0.0) += total_mass_kg * km / 1000.0;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CutoffEntry {
    pub component_id: String,
    pub database_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Resolution {
    pub database_id: String,
    /// Sorted by (component id, process id, stage).
    pub demands: Vec<ScaledDemand>,
    /// Sorted by component id.
    pub cutoff: Vec<CutoffEntry>,
    pub warnings: Vec<String>,
}

fn attribute(component: &Component, name: &str, value: Option<f64>) -> Result<f64> {
    value.ok_or_else(|| Error::Resolution {
        component: component.id.clone(),
        message: format!("scaling needs attribute {name}, which is absent"),
    })
}

fn wrap(component: &Component, e: Error) -> Error {
    match e {
        Error::Resolution { .. } => e,
        other => Error::Resolution {
            component: component.id.clone(),
            message: other.to_string(),
        },
    }
}

/// Per-unit demands of one component under one rule, as (process, amount).
fn per_unit_demands(component: &Component, rule: &MappingRule) -> Result<Vec<(String, f64)>> {
    let a = &component.attributes;
    let single = |amount: f64| Ok(vec![(rule.process_id.clone(), amount)]);
    match rule.scaling {
        Scaling::ByCount => single(1.0),
        Scaling::ByMass => single(attribute(component, "mass", a.mass)?),
        Scaling::ByArea => single(attribute(component, "boardArea", a.board_area)?),
        Scaling::ByLength => single(attribute(component, "length", a.length)?),
        Scaling::ByDieArea => {
            let die = match a.die_area {
                Some(d) => d,
                None => {
                    let package = attribute(component, "dieArea or packageArea", a.package_area)?;
                    die_area_from_package(package, rule.parameter(param::DIE_TO_PACKAGE_RATIO)?)?
                }
            };
            single(ic_mass_from_die_area(die, rule.parameter(param::WAFER_AREA_PER_KG)?)?)
        }
        Scaling::ByPackageArea => {
            let package = attribute(component, "packageArea", a.package_area)?;
            let die = die_area_from_package(package, rule.parameter(param::DIE_TO_PACKAGE_RATIO)?)?;
            single(ic_mass_from_die_area(die, rule.parameter(param::WAFER_AREA_PER_KG)?)?)
        }
        Scaling::PcbLayerBlend => {
            let area = attribute(component, "boardArea", a.board_area)?;
            let layers = a.layer_count.ok_or_else(|| Error::Resolution {
                component: component.id.clone(),
                message: "scaling needs attribute layerCount, which is absent".into(),
            })?;
            Ok(pcb_layer_blend(layers)?
                .into_iter()
                .map(|(n, w)| (rule.process_id.replace(LAYER_PLACEHOLDER, &n.to_string()), area * w))
                .collect())
        }
        Scaling::TransportTkm => {
            let mass = attribute(component, "mass", a.mass)?;
            single(mass * rule.parameter(param::DISTANCE_KM)? / 1000.0)
        }
    }
}

/// Picks the strongest-matching rule; ties go to the earliest in the list.
pub fn select_rule<'a>(component: &Component, rules: &'a [MappingRule]) -> Option<&'a MappingRule> {
    let mut best: Option<(Precedence, &MappingRule)> = None;
    for rule in rules {
        if let Some(p) = rule.selector.precedence(component) {
            if best.is_none_or(|(b, _)| p > b) {
                best = Some((p, rule));
            }
        }
    }
    best.map(|(_, r)| r)
}

/// Maps every component of `bom` onto scaled demands in `db`.
///
/// Components whose category the cut-off policy excludes are reported, not
/// resolved. Any other component without a matching rule is an error.
pub fn resolve(
    bom: &BillOfMaterials,
    rules: &[MappingRule],
    cutoff: &CutoffPolicy,
    transport: Option<&TransportPolicy>,
    db: &BackgroundDatabase,
) -> Result<Resolution> {
    let database_id = db.id.as_str();
    if cutoff.database_id != database_id {
        return Err(Error::Mapping(format!(
            "cut-off policy is for {}, not {database_id}",
            cutoff.database_id
        )));
    }
    if let Some(rule) = rules.iter().find(|r| r.database_id != database_id) {
        return Err(Error::Mapping(format!(
            "rule for process {} targets database {}, not {database_id}",
            rule.process_id, rule.database_id
        )));
    }
    let legs: Vec<(TransportMode, &TransportLeg)> = match transport {
        Some(policy) => {
            if policy.database_id != database_id {
                return Err(Error::Mapping(format!(
                    "transport policy is for {}, not {database_id}",
                    policy.database_id
                )));
            }
            policy
                .legs
                .iter()
                .map(|leg| Ok((leg.mode.parse::<TransportMode>()?, leg)))
                .collect::<Result<_>>()?
        }
        None => Vec::new(),
    };
    for (_, leg) in &legs {
        if !db.has_process(&leg.process_id) {
            return Err(Error::Mapping(format!(
                "transport leg {} references missing process {:?}",
                leg.mode, leg.process_id
            )));
        }
    }

    let mut demands = Vec::new();
    let mut cutoff_entries = Vec::new();
    let mut massless = Vec::new();

    for component in &bom.components {
        if cutoff.excludes(component.category) {
            cutoff_entries.push(CutoffEntry {
                component_id: component.id.clone(),
                database_id: database_id.to_owned(),
                reason: CUTOFF_REASON.to_owned(),
            });
            continue;
        }
        let rule = select_rule(component, rules).ok_or_else(|| Error::Resolution {
            component: component.id.clone(),
            message: format!(
                "no mapping rule matches (category {}) for database {database_id}",
                component.category
            ),
        })?;
        for (process_id, per_unit) in per_unit_demands(component, rule).map_err(|e| wrap(component, e))? {
            if !db.has_process(&process_id) {
                return Err(Error::Resolution {
                    component: component.id.clone(),
                    message: format!("rule references process {process_id:?} missing from {database_id}"),
                });
            }
            demands.push(ScaledDemand {
                process_id,
                amount: component.quantity * per_unit,
                source_component_id: component.id.clone(),
                stage: Stage::Production,
            });
        }

        // Assembly entries are processing steps, not shipped parts.
        let shipped = !matches!(
            component.category,
            ComponentCategory::Transport | ComponentCategory::Assembly
        );
        if !legs.is_empty() && shipped {
            let mass = component.attributes.mass.unwrap_or_else(|| {
                massless.push(component.id.as_str());
                0.0
            });
            for (mode, leg) in &legs {
                let distance = BTreeMap::from([(mode.as_str().to_owned(), leg.distance_km)]);
                let tkm = transport_demands(component.quantity * mass, &distance).map_err(|e| wrap(component, e))?;
                demands.push(ScaledDemand {
                    process_id: leg.process_id.clone(),
                    amount: tkm[mode],
                    source_component_id: component.id.clone(),
                    stage: Stage::Transport,
                });
            }
        }
    }

    let mut warnings = Vec::new();
    if !massless.is_empty() {
        warnings.push(format!(
            "{} component(s) have no mass; their upstream transport is 0 in {database_id}: {}",
            massless.len(),
            massless.join(", ")
        ));
    }

    demands.sort_by(|a, b| {
        (&a.source_component_id, &a.process_id, a.stage).cmp(&(&b.source_component_id, &b.process_id, b.stage))
    });
    cutoff_entries.sort_by(|a, b| a.component_id.cmp(&b.component_id));
    Ok(Resolution {
        database_id: database_id.to_owned(),
        demands,
        cutoff: cutoff_entries,
        warnings,
    })
}

/// Checks rules, cut-offs and transport policies against the loaded
/// databases. Rules for databases that are not loaded are only checked for
/// self-consistency.
pub fn validate_rules(rules: &RuleSet, databases: &[&BackgroundDatabase]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let db_for = |id: &str| databases.iter().find(|d| d.id == id).copied();
    let mut exact: HashSet<(&str, &str)> = HashSet::new();

    for (i, rule) in rules.mapping_rules.iter().enumerate() {
        let label = rule.label(i);
        if rule.selector.is_empty() {
            report.push(
                &label,
                "empty-selector",
                "selector names neither a category nor a component id",
            );
        }
        if let Some(id) = &rule.selector.component_id {
            if !is_pattern(id) && !exact.insert((rule.database_id.as_str(), id.as_str())) {
                report.push(
                    &label,
                    "duplicate-exact-match",
                    format!("another rule for {} already targets component {id:?}", rule.database_id),
                );
            }
        }
        for name in rule.scaling.required_parameters() {
            if !rule.parameters.contains_key(*name) {
                report.push(
                    &label,
                    "missing-parameter",
                    format!("{:?} scaling needs parameter {name}", rule.scaling),
                );
            }
        }
        for (name, &value) in &rule.parameters {
            let ok = value.is_finite()
                && match name.as_str() {
                    param::WAFER_AREA_PER_KG => value > 0.0,
                    param::DIE_TO_PACKAGE_RATIO => value > 0.0 && value <= 1.0,
                    _ => value >= 0.0,
                };
            if !ok {
                report.push(
                    &label,
                    "invalid-parameter",
                    format!("parameter {name} = {value} is out of range"),
                );
            }
        }
        if rule.scaling == Scaling::PcbLayerBlend && !rule.process_id.contains(LAYER_PLACEHOLDER) {
            report.push(
                &label,
                "missing-layer-placeholder",
                format!("pcb-layer-blend process id must contain {LAYER_PLACEHOLDER}"),
            );
        } else if let Some(db) = db_for(&rule.database_id) {
            for process in rule.process_ids() {
                if !db.has_process(&process) {
                    report.push(
                        &label,
                        "unknown-process",
                        format!("process {process:?} is not in {}", db.id),
                    );
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for policy in &rules.cutoff_policies {
        if !seen.insert(policy.database_id.as_str()) {
            report.push(
                &policy.database_id,
                "duplicate-policy",
                "more than one cut-off policy for this database",
            );
        }
    }
    let mut seen = HashSet::new();
    for policy in &rules.transport_policies {
        if !seen.insert(policy.database_id.as_str()) {
            report.push(
                &policy.database_id,
                "duplicate-policy",
                "more than one transport policy for this database",
            );
        }
        let db = db_for(&policy.database_id);
        for leg in &policy.legs {
            if leg.mode.parse::<TransportMode>().is_err() {
                report.push(
                    &policy.database_id,
                    "unknown-transport-mode",
                    format!("unknown transport mode {:?}", leg.mode),
                );
            }
            if !(leg.distance_km >= 0.0) || !leg.distance_km.is_finite() {
                report.push(
                    &policy.database_id,
                    "invalid-parameter",
                    format!("{} distance {} is out of range", leg.mode, leg.distance_km),
                );
            }
            if let Some(db) = db {
                if !db.has_process(&leg.process_id) {
                    report.push(
                        &policy.database_id,
                        "unknown-process",
                        format!("transport process {:?} is not in {}", leg.process_id, db.id),
                    );
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attributes, DatabaseMode, UnitProcess};

    #[test]
    fn die_area_to_mass() {
        assert_eq!(ic_mass_from_die_area(0.0, 70000.0).unwrap(), 0.0);
        let m = ic_mass_from_die_area(20.0, 70000.0).unwrap();
        assert!((m - 2.857142857e-4).abs() <= 1e-9 * 2.857142857e-4);
        assert_eq!(ic_mass_from_die_area(70000.0, 70000.0).unwrap(), 1.0);
        assert!(matches!(ic_mass_from_die_area(1.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(ic_mass_from_die_area(1.0, -5.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn package_to_die_area() {
        assert_eq!(die_area_from_package(81.0, 0.25).unwrap(), 20.25);
        assert_eq!(die_area_from_package(50.0, 1.0).unwrap(), 50.0);
        assert_eq!(die_area_from_package(0.0, 0.3).unwrap(), 0.0);
        assert!(die_area_from_package(10.0, 0.0).is_err());
        assert!(die_area_from_package(10.0, 1.5).is_err());
    }

    #[test]
    fn layer_blends() {
        assert_eq!(pcb_layer_blend(6).unwrap(), BTreeMap::from([(4, 0.5), (8, 0.5)]));
        assert_eq!(pcb_layer_blend(2).unwrap(), BTreeMap::from([(2, 1.0)]));
        assert_eq!(pcb_layer_blend(8).unwrap(), BTreeMap::from([(8, 1.0)]));
        assert!(matches!(pcb_layer_blend(10), Err(Error::Mapping(_))));
        assert!(matches!(pcb_layer_blend(1), Err(Error::Mapping(_))));
    }

    #[test]
    fn transport_tkm() {
        let both = BTreeMap::from([("train".to_string(), 20.0), ("truck".to_string(), 20.0)]);
        let t = transport_demands(4.2, &both).unwrap();
        assert_eq!(t[&TransportMode::Train], 0.084);
        assert_eq!(t[&TransportMode::Truck], 0.084);
        let t = transport_demands(0.0, &BTreeMap::from([("train".to_string(), 20.0)])).unwrap();
        assert_eq!(t[&TransportMode::Train], 0.0);
        let t = transport_demands(1000.0, &BTreeMap::from([("truck".to_string(), 1.0)])).unwrap();
        assert_eq!(t[&TransportMode::Truck], 1.0);
        let bad = BTreeMap::from([("teleport".to_string(), 1.0)]);
        assert!(matches!(transport_demands(1.0, &bad), Err(Error::Mapping(_))));
    }

    fn db() -> BackgroundDatabase {
        let process = |id: &str, unit: &str| UnitProcess {
            id: id.into(),
            name: id.into(),
            reference_unit: unit.into(),
            direct_flows: BTreeMap::new(),
            tech_inputs: BTreeMap::new(),
        };
        BackgroundDatabase {
            schema_version: SchemaVersion::default(),
            id: "db".into(),
            name: None,
            mode: DatabaseMode::Aggregated,
            flows: vec![],
            processes: vec![
                process("steel", "kg"),
                process("pcb-2", "m2"),
                process("pcb-4", "m2"),
                process("pcb-8", "m2"),
                process("ic", "kg"),
                process("train", "tkm"),
                process("truck", "tkm"),
            ],
            notes: vec![],
        }
    }

    fn component(id: &str, category: ComponentCategory, quantity: f64, attributes: Attributes) -> Component {
        Component {
            id: id.into(),
            name: id.into(),
            category,
            quantity,
            attributes,
            group: None,
            note: None,
        }
    }

    fn bom(components: Vec<Component>) -> BillOfMaterials {
        BillOfMaterials {
            schema_version: SchemaVersion::default(),
            device_id: "dev".into(),
            name: None,
            components,
            subassemblies: BTreeMap::new(),
            notes: vec![],
        }
    }

    fn rule(selector: Selector, process: &str, scaling: Scaling, params: &[(&str, f64)]) -> MappingRule {
        MappingRule {
            id: None,
            selector,
            database_id: "db".into(),
            process_id: process.into(),
            scaling,
            parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            note: None,
        }
    }

    fn by_category(c: ComponentCategory) -> Selector {
        Selector {
            category: Some(c),
            component_id: None,
        }
    }

    #[test]
    fn by_mass_single_component() {
        let attrs = Attributes {
            mass: Some(0.1),
            ..Default::default()
        };
        let b = bom(vec![component("case", ComponentCategory::Casing, 2.0, attrs)]);
        let rules = [rule(
            by_category(ComponentCategory::Casing),
            "steel",
            Scaling::ByMass,
            &[],
        )];
        let r = resolve(&b, &rules, &CutoffPolicy::none("db"), None, &db()).unwrap();
        assert_eq!(r.demands.len(), 1);
        assert_eq!(r.demands[0].amount, 0.2);
        assert!(r.cutoff.is_empty());
    }

    #[test]
    fn empty_bom_resolves_to_nothing() {
        let r = resolve(&bom(vec![]), &[], &CutoffPolicy::none("db"), None, &db()).unwrap();
        assert!(r.demands.is_empty() && r.cutoff.is_empty());
    }

    #[test]
    fn unmatched_component_is_an_error() {
        let b = bom(vec![component(
            "fan",
            ComponentCategory::Fan,
            1.0,
            Attributes::default(),
        )]);
        let err = resolve(&b, &[], &CutoffPolicy::none("db"), None, &db()).unwrap_err();
        match err {
            Error::Resolution { component, .. } => assert_eq!(component, "fan"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_process_is_an_error() {
        let b = bom(vec![component(
            "fan",
            ComponentCategory::Fan,
            1.0,
            Attributes::default(),
        )]);
        let rules = [rule(
            by_category(ComponentCategory::Fan),
            "no-such",
            Scaling::ByCount,
            &[],
        )];
        assert!(matches!(
            resolve(&b, &rules, &CutoffPolicy::none("db"), None, &db()),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn cutoff_lists_excluded_components() {
        let b = bom(vec![
            component("j1", ComponentCategory::Connector, 3.0, Attributes::default()),
            component(
                "case",
                ComponentCategory::Casing,
                1.0,
                Attributes {
                    mass: Some(1.0),
                    ..Default::default()
                },
            ),
        ]);
        let rules = [rule(
            by_category(ComponentCategory::Casing),
            "steel",
            Scaling::ByMass,
            &[],
        )];
        let cutoff = CutoffPolicy {
            database_id: "db".into(),
            excluded_categories: vec![ComponentCategory::Connector],
        };
        let r = resolve(&b, &rules, &cutoff, None, &db()).unwrap();
        assert_eq!(r.cutoff.len(), 1);
        assert_eq!(r.cutoff[0].component_id, "j1");
        assert_eq!(r.cutoff[0].reason, CUTOFF_REASON);
        assert_eq!(r.demands.len(), 1);
    }

    #[test]
    fn exact_id_beats_pattern_beats_category() {
        let c = component("asic-01", ComponentCategory::Ic, 1.0, Attributes::default());
        let cat = rule(by_category(ComponentCategory::Ic), "a", Scaling::ByCount, &[]);
        let pat = rule(
            Selector {
                category: None,
                component_id: Some("asic-*".into()),
            },
            "b",
            Scaling::ByCount,
            &[],
        );
        let exact = rule(
            Selector {
                category: None,
                component_id: Some("asic-01".into()),
            },
            "c",
            Scaling::ByCount,
            &[],
        );
        let rules = vec![cat.clone(), pat.clone(), exact];
        assert_eq!(select_rule(&c, &rules).unwrap().process_id, "c");
        assert_eq!(select_rule(&c, &rules[..2]).unwrap().process_id, "b");
        let first_wins = vec![
            cat.clone(),
            rule(by_category(ComponentCategory::Ic), "z", Scaling::ByCount, &[]),
        ];
        assert_eq!(select_rule(&c, &first_wins).unwrap().process_id, "a");
    }

    #[test]
    fn pcb_blend_and_die_area_rules() {
        let pcb = component(
            "cb-pcb",
            ComponentCategory::Pcb,
            1.0,
            Attributes {
                board_area: Some(0.01),
                layer_count: Some(6),
                ..Default::default()
            },
        );
        let chip = component(
            "chip",
            ComponentCategory::Ic,
            4.0,
            Attributes {
                package_area: Some(81.0),
                ..Default::default()
            },
        );
        let rules = [
            rule(
                by_category(ComponentCategory::Pcb),
                "pcb-{layers}",
                Scaling::PcbLayerBlend,
                &[],
            ),
            rule(
                by_category(ComponentCategory::Ic),
                "ic",
                Scaling::ByDieArea,
                &[("waferAreaPerKg", 70000.0), ("dieToPackageRatio", 0.25)],
            ),
        ];
        let r = resolve(&bom(vec![pcb, chip]), &rules, &CutoffPolicy::none("db"), None, &db()).unwrap();
        let amounts: Vec<(&str, &str, f64)> = r
            .demands
            .iter()
            .map(|d| (d.source_component_id.as_str(), d.process_id.as_str(), d.amount))
            .collect();
        assert_eq!(
            amounts,
            vec![
                ("cb-pcb", "pcb-4", 0.005),
                ("cb-pcb", "pcb-8", 0.005),
                ("chip", "ic", 4.0 * (20.25 / 70000.0)),
            ]
        );
    }

    #[test]
    fn transport_policy_adds_tkm_per_component() {
        let b = bom(vec![
            component(
                "case",
                ComponentCategory::Casing,
                1.0,
                Attributes {
                    mass: Some(4.2),
                    ..Default::default()
                },
            ),
            component(
                "pcb",
                ComponentCategory::Pcb,
                1.0,
                Attributes {
                    board_area: Some(0.1),
                    layer_count: Some(2),
                    ..Default::default()
                },
            ),
            component("smt", ComponentCategory::Assembly, 1.0, Attributes::default()),
        ]);
        let rules = [
            rule(by_category(ComponentCategory::Casing), "steel", Scaling::ByMass, &[]),
            rule(
                by_category(ComponentCategory::Pcb),
                "pcb-{layers}",
                Scaling::PcbLayerBlend,
                &[],
            ),
            rule(by_category(ComponentCategory::Assembly), "steel", Scaling::ByCount, &[]),
        ];
        let policy = TransportPolicy {
            database_id: "db".into(),
            legs: vec![
                TransportLeg {
                    mode: "train".into(),
                    process_id: "train".into(),
                    distance_km: 20.0,
                },
                TransportLeg {
                    mode: "truck".into(),
                    process_id: "truck".into(),
                    distance_km: 20.0,
                },
            ],
            group: None,
            note: None,
        };
        let r = resolve(&b, &rules, &CutoffPolicy::none("db"), Some(&policy), &db()).unwrap();
        let transport: Vec<f64> = r
            .demands
            .iter()
            .filter(|d| d.stage == Stage::Transport && d.source_component_id == "case")
            .map(|d| d.amount)
            .collect();
        assert_eq!(transport, vec![0.084, 0.084]);
        assert_eq!(r.warnings.len(), 1, "pcb has no mass");
        assert!(!r.warnings[0].contains("smt"), "assembly steps are not shipped");
        assert!(!r
            .demands
            .iter()
            .any(|d| d.stage == Stage::Transport && d.source_component_id == "smt"));
    }

    #[test]
    fn rule_validation_catches_defects() {
        let d = db();
        let mut set = RuleSet {
            schema_version: SchemaVersion::default(),
            mapping_rules: vec![
                rule(Selector::default(), "steel", Scaling::ByMass, &[]),
                rule(by_category(ComponentCategory::Ic), "ic", Scaling::ByDieArea, &[]),
                rule(by_category(ComponentCategory::Pcb), "pcb", Scaling::PcbLayerBlend, &[]),
                rule(by_category(ComponentCategory::Fan), "nope", Scaling::ByCount, &[]),
            ],
            cutoff_policies: vec![],
            transport_policies: vec![TransportPolicy {
                database_id: "db".into(),
                legs: vec![TransportLeg {
                    mode: "rocket".into(),
                    process_id: "train".into(),
                    distance_km: 1.0,
                }],
                group: None,
                note: None,
            }],
            notes: vec![],
        };
        let exact = Selector {
            category: None,
            component_id: Some("x".into()),
        };
        set.mapping_rules
            .push(rule(exact.clone(), "steel", Scaling::ByMass, &[]));
        set.mapping_rules
            .push(rule(exact, "steel", Scaling::ByMass, &[("dieToPackageRatio", 2.0)]));
        let report = validate_rules(&set, &[&d]);
        for expected in [
            "empty-selector",
            "missing-parameter",
            "missing-layer-placeholder",
            "unknown-process",
            "unknown-transport-mode",
            "duplicate-exact-match",
            "invalid-parameter",
        ] {
            assert!(report.has_rule(expected), "missing {expected}: {report}");
        }
    }
}
