use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use super::{BackgroundDatabase, BillOfMaterials, CharacterizationMethod, DatabaseMode};
use crate::inventory::check_leontief;

/// Layer counts a PCB may declare.
pub const VALID_LAYER_COUNTS: [u32; 6] = [1, 2, 4, 6, 8, 10];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Id of the offending entity (process, flow, component, ...).
    pub entity: String,
    /// Stable, machine-readable rule id such as `unknown-flow`.
    pub rule: &'static str,
    pub message: String,
}

/// The (possibly empty) list of invariant violations found in one input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn push(&mut self, entity: impl Into<String>, rule: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            entity: entity.into(),
            rule,
            message: message.into(),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  [{}] {}: {}", v.rule, v.entity, v.message)?;
        }
        Ok(())
    }
}

fn check_amount(report: &mut ValidationReport, entity: &str, what: &str, value: f64) {
    if !value.is_finite() {
        report.push(entity, "non-finite-amount", format!("{what} is {value}"));
    } else if value < 0.0 {
        report.push(entity, "negative-amount", format!("{what} is negative ({value})"));
    }
}

pub fn validate_database(db: &BackgroundDatabase) -> ValidationReport {
    let mut report = ValidationReport::default();
    if db.id.is_empty() {
        report.push("<database>", "empty-id", "database id is empty");
    }

    let mut flow_ids = HashSet::new();
    for flow in &db.flows {
        if flow.id.is_empty() {
            report.push("<flow>", "empty-id", format!("flow {:?} has an empty id", flow.name));
        }
        if !flow_ids.insert(flow.id.as_str()) {
            report.push(&flow.id, "duplicate-flow-id", "flow id appears more than once");
        }
        if flow.unit.is_empty() {
            report.push(&flow.id, "empty-unit", "flow unit is empty");
        }
    }

    let process_ids: HashSet<&str> = db.processes.iter().map(|p| p.id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut dangling_inputs = false;
    for process in &db.processes {
        let id = process.id.as_str();
        if id.is_empty() {
            report.push(
                "<process>",
                "empty-id",
                format!("process {:?} has an empty id", process.name),
            );
        }
        if !seen.insert(id) {
            report.push(id, "duplicate-process-id", "process id appears more than once");
        }
        if process.reference_unit.is_empty() {
            report.push(id, "empty-reference-unit", "reference unit is empty");
        }
        for (flow, &amount) in &process.direct_flows {
            if !flow_ids.contains(flow.as_str()) {
                report.push(
                    id,
                    "unknown-flow",
                    format!("direct flow references unknown flow id {flow:?}"),
                );
            }
            check_amount(&mut report, id, &format!("direct flow {flow:?}"), amount);
        }
        if db.mode == DatabaseMode::Aggregated && !process.tech_inputs.is_empty() {
            report.push(
                id,
                "mode-mismatch",
                "aggregated database process declares technosphere inputs",
            );
        }
        for (input, &amount) in &process.tech_inputs {
            if !process_ids.contains(input.as_str()) {
                dangling_inputs = true;
                report.push(
                    id,
                    "unknown-process",
                    format!("technosphere input references unknown process {input:?}"),
                );
            }
            check_amount(&mut report, id, &format!("technosphere input {input:?}"), amount);
        }
    }

    // The invertibility check needs a well-formed matrix.
    if db.mode == DatabaseMode::Linked && !dangling_inputs && seen.len() == db.processes.len() {
        let clean = !report.has_rule("non-finite-amount") && !report.has_rule("negative-amount");
        if clean {
            if let Err(message) = check_leontief(db) {
                report.push(&db.id, "leontief-not-invertible", message);
            }
        }
    }
    report
}

pub fn validate_bom(bom: &BillOfMaterials) -> ValidationReport {
    let mut report = ValidationReport::default();
    if bom.device_id.is_empty() {
        report.push("<bom>", "empty-id", "deviceId is empty");
    }
    let mut ids = BTreeSet::new();
    for c in &bom.components {
        let id = c.id.as_str();
        if id.is_empty() {
            report.push(
                "<component>",
                "empty-id",
                format!("component {:?} has an empty id", c.name),
            );
        }
        if !ids.insert(id) {
            report.push(id, "duplicate-id", "component id appears more than once");
        }
        if !c.quantity.is_finite() {
            report.push(id, "non-finite-quantity", format!("quantity is {}", c.quantity));
        } else if c.quantity < 0.0 {
            report.push(
                id,
                "negative-quantity",
                format!("quantity is negative ({})", c.quantity),
            );
        }
        if let Some(layers) = c.attributes.layer_count {
            if !VALID_LAYER_COUNTS.contains(&layers) {
                report.push(
                    id,
                    "invalid-layer-count",
                    format!("layerCount {layers} is not one of {VALID_LAYER_COUNTS:?}"),
                );
            }
        }
        for (name, value) in c.attributes.real_values() {
            if !value.is_finite() {
                report.push(id, "non-finite-attribute", format!("attribute {name} is {value}"));
            } else if value < 0.0 {
                report.push(
                    id,
                    "negative-attribute",
                    format!("attribute {name} is negative ({value})"),
                );
            }
        }
    }
    for (name, members) in &bom.subassemblies {
        for member in members {
            if !ids.contains(member.as_str()) {
                report.push(
                    name,
                    "unknown-subassembly-member",
                    format!("subassembly lists unknown component {member:?}"),
                );
            }
        }
    }
    report
}

pub fn validate_method(method: &CharacterizationMethod) -> ValidationReport {
    let mut report = ValidationReport::default();
    if method.id.is_empty() {
        report.push("<method>", "empty-id", "method id is empty");
    }
    let mut ids = HashSet::new();
    for c in &method.categories {
        if !ids.insert(c.id.as_str()) {
            report.push(&c.id, "duplicate-category-id", "category id appears more than once");
        }
    }
    for (category, row) in &method.factors {
        if !ids.contains(category.as_str()) {
            report.push(category, "unknown-category", "factors reference an undeclared category");
        }
        for (flow, value) in row {
            if !value.is_finite() {
                report.push(
                    category,
                    "non-finite-factor",
                    format!("factor for flow {flow:?} is {value}"),
                );
            }
        }
    }
    report
}
