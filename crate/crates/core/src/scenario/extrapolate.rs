//! Parametric extrapolation of a bill of materials to a related device.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Attributes, BillOfMaterials, ComponentCategory, ImpactVector, SchemaVersion};
use crate::scaling::id_matches;

/// One scaling instruction. Selects components by id (exact or wildcard)
/// and/or category, then multiplies quantity and attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<ComponentCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<f64>,
    /// attribute name → multiplier
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ScaleEntry {
    fn selects(&self, id: &str, category: ComponentCategory) -> bool {
        self.component_id.as_deref().is_none_or(|p| id_matches(p, id)) && self.category.is_none_or(|c| c == category)
    }

    fn label(&self) -> String {
        match (&self.component_id, self.category) {
            (Some(id), Some(cat)) => format!("{id} ({cat})"),
            (Some(id), None) => id.clone(),
            (None, Some(cat)) => cat.to_string(),
            (None, None) => "<empty selector>".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtrapolationSpec {
    pub schema_version: SchemaVersion,
    pub base_device_id: String,
    /// Device id of the generated bill of materials.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_name: Option<String>,
    pub scale: Vec<ScaleEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn check_multiplier(what: &str, m: f64) -> Result<()> {
    if m.is_finite() && m > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{what}: multiplier must be finite and > 0, got {m}"
        )))
    }
}

/// Produces the scaled bill of materials. Entries apply in file order, so
/// two entries selecting the same component compound.
pub fn extrapolate(bom: &BillOfMaterials, spec: &ExtrapolationSpec) -> Result<BillOfMaterials> {
    if spec.base_device_id != bom.device_id {
        return Err(Error::Parameter(format!(
            "spec extrapolates from {}, bill of materials is {}",
            spec.base_device_id, bom.device_id
        )));
    }
    if spec.target.trim().is_empty() {
        return Err(Error::Parameter("extrapolation target id is empty".into()));
    }
    let mut out = bom.clone();
    for entry in &spec.scale {
        let label = entry.label();
        if entry.component_id.is_none() && entry.category.is_none() {
            return Err(Error::Parameter("scale entry selects nothing".into()));
        }
        if let Some(q) = entry.quantity {
            check_multiplier(&label, q)?;
        }
        for (attr, &m) in &entry.attributes {
            check_multiplier(&format!("{label}.{attr}"), m)?;
            if !Attributes::SCALABLE.contains(&attr.as_str()) {
                return Err(Error::Parameter(format!(
                    "{label}: attribute {attr:?} cannot be scaled"
                )));
            }
        }
        let mut hit = false;
        for c in out.components.iter_mut().filter(|c| entry.selects(&c.id, c.category)) {
            hit = true;
            if let Some(q) = entry.quantity {
                c.quantity *= q;
            }
            for (attr, &m) in &entry.attributes {
                if let Some(v) = c.attributes.get(attr) {
                    c.attributes.set(attr, v * m);
                }
            }
        }
        if !hit {
            return Err(Error::Lookup(format!(
                "scale entry {label} matches no component of {}",
                bom.device_id
            )));
        }
    }
    out.device_id = spec.target.clone();
    out.name = spec.target_name.clone().or(out.name);
    out.notes.extend(spec.notes.iter().cloned());
    Ok(out)
}

/// target / base per category; `None` where the base is zero.
pub fn impact_ratios(base: &ImpactVector, target: &ImpactVector) -> Result<IndexMap<String, Option<f64>>> {
    if base.method_id != target.method_id {
        return Err(Error::Data(format!(
            "base uses method {}, target {}",
            base.method_id, target.method_id
        )));
    }
    base.values
        .iter()
        .map(|(c, &b)| {
            let t = target
                .get(c)
                .ok_or_else(|| Error::Data(format!("target impacts lack category {c}")))?;
            Ok((c.clone(), (b != 0.0).then(|| t / b)))
        })
        .collect()
}
