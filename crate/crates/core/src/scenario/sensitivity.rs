//! Low / typical / high sensitivity runs over BOM attributes and rule
//! parameters.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::assessment::assess;
use crate::error::{Error, Result};
use crate::inventory::SolverOptions;
use crate::model::{
    Attributes, BackgroundDatabase, BillOfMaterials, CharacterizationMethod, ImpactVector, SchemaVersion,
    ValidationReport,
};
use crate::scaling::{id_matches, RuleSet};

/// Where a sensitivity parameter lands.
///
/// * `component.<id-or-pattern>.quantity`
/// * `component.<id-or-pattern>.<attribute>` (one of [`Attributes::SCALABLE`])
/// * `rule.<ruleId>.<parameter>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParameterPath {
    ComponentQuantity { pattern: String },
    ComponentAttribute { pattern: String, attribute: String },
    RuleParameter { rule_id: String, parameter: String },
}

impl FromStr for ParameterPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("malformed parameter path {s:?}"));
        let (kind, rest) = s.split_once('.').ok_or_else(bad)?;
        // Component ids may contain dots; the field name is the last segment.
        let (target, field) = rest.rsplit_once('.').ok_or_else(bad)?;
        if target.is_empty() || field.is_empty() {
            return Err(bad());
        }
        match kind {
            "component" if field == "quantity" => Ok(ParameterPath::ComponentQuantity {
                pattern: target.to_owned(),
            }),
            "component" if Attributes::SCALABLE.contains(&field) => Ok(ParameterPath::ComponentAttribute {
                pattern: target.to_owned(),
                attribute: field.to_owned(),
            }),
            "component" => Err(Error::Parameter(format!(
                "parameter path {s:?}: {field:?} is not a scalable component field"
            ))),
            "rule" => Ok(ParameterPath::RuleParameter {
                rule_id: target.to_owned(),
                parameter: field.to_owned(),
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ParameterPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterPath::ComponentQuantity { pattern } => write!(f, "component.{pattern}.quantity"),
            ParameterPath::ComponentAttribute { pattern, attribute } => write!(f, "component.{pattern}.{attribute}"),
            ParameterPath::RuleParameter { rule_id, parameter } => write!(f, "rule.{rule_id}.{parameter}"),
        }
    }
}

/// How the three bound values are applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Multiply the value found in the model.
    #[default]
    Factor,
    /// Replace the value found in the model.
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParameterBounds {
    pub path: String,
    #[serde(default)]
    pub kind: BoundKind,
    pub low: f64,
    pub typical: f64,
    pub high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitivityBounds {
    pub schema_version: SchemaVersion,
    pub parameters: Vec<ParameterBounds>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn validate_bounds(bounds: &SensitivityBounds) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = std::collections::HashSet::new();
    for p in &bounds.parameters {
        if let Err(e) = p.path.parse::<ParameterPath>() {
            report.push(&p.path, "invalid-path", e.to_string());
        }
        if !seen.insert(p.path.as_str()) {
            report.push(&p.path, "duplicate-path", "parameter listed more than once");
        }
        if ![p.low, p.typical, p.high].iter().all(|v| v.is_finite()) {
            report.push(&p.path, "non-finite-bound", "bounds must be finite");
        } else if !(p.low <= p.typical && p.typical <= p.high) {
            report.push(
                &p.path,
                "bounds-order",
                format!(
                    "expected low <= typical <= high, got {} / {} / {}",
                    p.low, p.typical, p.high
                ),
            );
        }
        if [p.low, p.typical, p.high].iter().any(|v| *v < 0.0) {
            report.push(&p.path, "negative-bound", "bounds must be non-negative");
        }
    }
    report
}

/// Applies one parameter value to copies of the model inputs.
pub fn apply_parameter(
    path: &ParameterPath,
    kind: BoundKind,
    value: f64,
    bom: &mut BillOfMaterials,
    rules: &mut RuleSet,
) -> Result<()> {
    let combine = |current: f64| match kind {
        BoundKind::Factor => current * value,
        BoundKind::Value => value,
    };
    let unresolved = || Error::Parameter(format!("parameter path {path} does not resolve"));
    match path {
        ParameterPath::ComponentQuantity { pattern } => {
            let mut hit = false;
            for c in bom.components.iter_mut().filter(|c| id_matches(pattern, &c.id)) {
                c.quantity = combine(c.quantity);
                hit = true;
            }
            hit.then_some(()).ok_or_else(unresolved)
        }
        ParameterPath::ComponentAttribute { pattern, attribute } => {
            let mut hit = false;
            for c in bom.components.iter_mut().filter(|c| id_matches(pattern, &c.id)) {
                if let Some(current) = c.attributes.get(attribute) {
                    c.attributes.set(attribute, combine(current));
                    hit = true;
                }
            }
            hit.then_some(()).ok_or_else(unresolved)
        }
        ParameterPath::RuleParameter { rule_id, parameter } => {
            let mut hit = false;
            for rule in rules
                .mapping_rules
                .iter_mut()
                .filter(|r| r.id.as_deref() == Some(rule_id))
            {
                if let Some(current) = rule.parameters.get_mut(parameter) {
                    *current = combine(*current);
                    hit = true;
                }
            }
            hit.then_some(()).ok_or_else(unresolved)
        }
    }
}

/// Relative deviation from the typical case, per category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spread {
    pub category: String,
    /// (high − typical) / typical; `None` when typical is zero.
    pub upper: Option<f64>,
    /// (typical − low) / typical; `None` when typical is zero.
    pub lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityResult {
    pub low: ImpactVector,
    pub typical: ImpactVector,
    pub high: ImpactVector,
    pub spreads: Vec<Spread>,
    pub warnings: Vec<String>,
}

fn variant(
    bounds: &[(ParameterPath, &ParameterBounds)],
    pick: fn(&ParameterBounds) -> f64,
    bom: &BillOfMaterials,
    rules: &RuleSet,
) -> Result<(BillOfMaterials, RuleSet)> {
    let mut bom = bom.clone();
    let mut rules = rules.clone();
    for (path, b) in bounds {
        apply_parameter(path, b.kind, pick(b), &mut bom, &mut rules)?;
    }
    Ok((bom, rules))
}

pub fn run_sensitivity(
    bounds: &SensitivityBounds,
    bom: &BillOfMaterials,
    rules: &RuleSet,
    db: &BackgroundDatabase,
    method: &CharacterizationMethod,
    options: &SolverOptions,
) -> Result<SensitivityResult> {
    let report = validate_bounds(bounds);
    if !report.is_empty() {
        return Err(Error::Invalid {
            subject: "sensitivity bounds".into(),
            report,
        });
    }
    let parsed: Vec<(ParameterPath, &ParameterBounds)> = bounds
        .parameters
        .iter()
        .map(|b| Ok((b.path.parse()?, b)))
        .collect::<Result<_>>()?;

    let run = |pick: fn(&ParameterBounds) -> f64| -> Result<_> {
        let (bom, rules) = variant(&parsed, pick, bom, rules)?;
        assess(&bom, &rules, db, method, options)
    };
    let low = run(|b| b.low)?;
    let typical = run(|b| b.typical)?;
    let high = run(|b| b.high)?;

    let mut warnings = typical.warnings();
    let spreads = typical
        .impacts
        .values
        .iter()
        .map(|(category, &t)| {
            let h = high.impacts.get(category).unwrap_or(0.0);
            let l = low.impacts.get(category).unwrap_or(0.0);
            let (upper, lower) = if t == 0.0 {
                warnings.push(format!("typical impact is zero in {category}; spread undefined"));
                (None, None)
            } else {
                (Some((h - t) / t), Some((t - l) / t))
            };
            Spread {
                category: category.clone(),
                upper,
                lower,
            }
        })
        .collect();
    Ok(SensitivityResult {
        low: low.impacts,
        typical: typical.impacts,
        high: high.impacts,
        spreads,
        warnings,
    })
}

/// Convenience: category → (low, typical, high).
pub fn bounds_table(result: &SensitivityResult) -> IndexMap<String, (f64, f64, f64)> {
    result
        .typical
        .values
        .iter()
        .map(|(c, &t)| {
            (
                c.clone(),
                (result.low.get(c).unwrap_or(0.0), t, result.high.get(c).unwrap_or(0.0)),
            )
        })
        .collect()
}
