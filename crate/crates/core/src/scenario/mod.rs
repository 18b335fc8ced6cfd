//! Use-phase scenarios, production-vs-use shares, sensitivity runs and
//! extrapolation to other devices.

mod extrapolate;
mod sensitivity;

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use extrapolate::{extrapolate, impact_ratios, ExtrapolationSpec, ScaleEntry};
pub use sensitivity::{
    apply_parameter, bounds_table, run_sensitivity, validate_bounds, BoundKind, ParameterBounds, ParameterPath,
    SensitivityBounds, SensitivityResult, Spread,
};

use crate::assessment::assess;
use crate::error::{Error, Result};
use crate::impact::FactorIndex;
use crate::inventory::{lci, FlowVector, SolverOptions};
use crate::model::{
    BackgroundDatabase, BillOfMaterials, CharacterizationMethod, ImpactVector, SchemaVersion, ValidationReport,
};
use crate::scaling::{RuleSet, ScaledDemand, Stage};

/// 365 × 24. Leap years are ignored.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Electricity drawn over the device lifetime, in kWh.
pub fn use_phase_energy(power_kw: f64, lifespan_years: f64) -> Result<f64> {
    if !(power_kw > 0.0) || !power_kw.is_finite() {
        return Err(Error::Parameter(format!("power must be > 0 kW, got {power_kw}")));
    }
    if !(lifespan_years > 0.0) || !lifespan_years.is_finite() {
        return Err(Error::Parameter(format!(
            "lifespan must be > 0 years, got {lifespan_years}"
        )));
    }
    Ok(power_kw * (lifespan_years * HOURS_PER_YEAR))
}

/// A per-kWh electricity supply: either one database process or a weighted
/// blend of other mixes of the same database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ElectricityMix {
    pub id: String,
    pub database_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UsePhaseScenario {
    pub id: i64,
    pub database: String,
    pub mix: String,
    pub power_kw: f64,
    pub lifespan_years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioFile {
    pub schema_version: SchemaVersion,
    #[serde(default)]
    pub mixes: Vec<ElectricityMix>,
    #[serde(default)]
    pub scenarios: Vec<UsePhaseScenario>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ScenarioFile {
    pub fn mix(&self, database_id: &str, id: &str) -> Option<&ElectricityMix> {
        self.mixes.iter().find(|m| m.database_id == database_id && m.id == id)
    }
}

pub fn validate_scenarios(file: &ScenarioFile) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut keys = HashSet::new();
    for mix in &file.mixes {
        let entity = format!("{}/{}", mix.database_id, mix.id);
        if !keys.insert((mix.database_id.as_str(), mix.id.as_str())) {
            report.push(&entity, "duplicate-mix-id", "mix declared twice for this database");
        }
        match (&mix.process_id, &mix.blend) {
            (Some(_), None) => {}
            (None, Some(blend)) => {
                if blend.is_empty() {
                    report.push(&entity, "empty-blend", "blend has no members");
                }
                for (member, &w) in blend {
                    if !(w > 0.0) || !w.is_finite() {
                        report.push(&entity, "non-positive-weight", format!("weight of {member} is {w}"));
                    }
                    if file.mix(&mix.database_id, member).is_none() {
                        report.push(
                            &entity,
                            "unknown-mix",
                            format!("blend member {member:?} is not a mix of {}", mix.database_id),
                        );
                    }
                }
            }
            _ => report.push(&entity, "mix-kind", "a mix needs exactly one of processId or blend"),
        }
    }
    let mut ids = HashSet::new();
    for s in &file.scenarios {
        let entity = format!("scenario {}", s.id);
        if !ids.insert(s.id) {
            report.push(&entity, "duplicate-scenario-id", "scenario id appears more than once");
        }
        if !(s.power_kw > 0.0) || !s.power_kw.is_finite() {
            report.push(&entity, "non-positive-power", format!("powerKw is {}", s.power_kw));
        }
        if !(s.lifespan_years > 0.0) || !s.lifespan_years.is_finite() {
            report.push(
                &entity,
                "non-positive-lifespan",
                format!("lifespanYears is {}", s.lifespan_years),
            );
        }
        if file.mix(&s.database, &s.mix).is_none() {
            report.push(
                &entity,
                "unknown-mix",
                format!("mix {:?} is not defined for {}", s.mix, s.database),
            );
        }
    }
    report
}

/// Weighted average of per-kWh inventories, with weights renormalized to
/// sum to one.
pub fn blend_mix(blend: &BTreeMap<String, f64>, inventories: &BTreeMap<String, FlowVector>) -> Result<FlowVector> {
    let total: f64 = blend.values().sum();
    if blend.is_empty() || blend.values().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Data(format!("blend weights must be positive, got {blend:?}")));
    }
    let mut out = FlowVector::new();
    for (member, &weight) in blend {
        let inv = inventories
            .get(member)
            .ok_or_else(|| Error::Lookup(format!("blend member {member:?} is not resolvable")))?;
        let w = weight / total;
        for (flow, v) in inv {
            *out.entry(flow.clone()).or_insert(0.0) += w * v;
        }
    }
    Ok(out)
}

/// Resolves per-kWh inventories of the mixes of one database, following
/// blends and rejecting cycles.
pub struct MixResolver<'a> {
    file: &'a ScenarioFile,
    db: &'a BackgroundDatabase,
    options: SolverOptions,
}

impl<'a> MixResolver<'a> {
    pub fn new(file: &'a ScenarioFile, db: &'a BackgroundDatabase, options: SolverOptions) -> Self {
        MixResolver { file, db, options }
    }

    pub fn per_kwh(&self, mix_id: &str) -> Result<FlowVector> {
        let mut stack = Vec::new();
        self.resolve(mix_id, &mut stack)
    }

    fn resolve(&self, mix_id: &str, stack: &mut Vec<String>) -> Result<FlowVector> {
        if stack.iter().any(|m| m == mix_id) {
            stack.push(mix_id.to_owned());
            return Err(Error::Data(format!("cyclic electricity blend: {}", stack.join(" -> "))));
        }
        let mix = self.file.mix(&self.db.id, mix_id).ok_or_else(|| Error::Resolution {
            component: format!("mix {mix_id}"),
            message: format!("no electricity mix {mix_id:?} for database {}", self.db.id),
        })?;
        match (&mix.process_id, &mix.blend) {
            (Some(process), None) => {
                let demand = ScaledDemand {
                    process_id: process.clone(),
                    amount: 1.0,
                    source_component_id: format!("mix:{mix_id}"),
                    stage: Stage::Production,
                };
                if !self.db.has_process(process) {
                    return Err(Error::Resolution {
                        component: format!("mix {mix_id}"),
                        message: format!("process {process:?} missing from {}", self.db.id),
                    });
                }
                Ok(lci(&[demand], self.db, &self.options)?.inventory.entries)
            }
            (None, Some(blend)) => {
                stack.push(mix_id.to_owned());
                let mut members = BTreeMap::new();
                for member in blend.keys() {
                    members.insert(member.clone(), self.resolve(member, stack)?);
                }
                stack.pop();
                blend_mix(blend, &members)
            }
            _ => Err(Error::Data(format!(
                "mix {mix_id} needs exactly one of processId or blend"
            ))),
        }
    }
}

fn scale_flows(flows: &FlowVector, factor: f64) -> FlowVector {
    flows.iter().map(|(k, v)| (k.clone(), v * factor)).collect()
}

/// Impacts of operating the device for the scenario's lifetime.
pub fn use_phase_impacts(
    scenario: &UsePhaseScenario,
    file: &ScenarioFile,
    db: &BackgroundDatabase,
    method: &CharacterizationMethod,
    options: &SolverOptions,
) -> Result<ImpactVector> {
    if scenario.database != db.id {
        return Err(Error::Resolution {
            component: format!("scenario {}", scenario.id),
            message: format!("scenario targets {}, got database {}", scenario.database, db.id),
        });
    }
    let energy = use_phase_energy(scenario.power_kw, scenario.lifespan_years)?;
    let per_kwh = MixResolver::new(file, db, *options).per_kwh(&scenario.mix)?;
    Ok(FactorIndex::new(method)?.apply(&scale_flows(&per_kwh, energy)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareRow {
    /// category → production / (production + use), `None` where undefined.
    pub shares: IndexMap<String, Option<f64>>,
    pub warnings: Vec<String>,
}

pub fn production_share(production: &ImpactVector, use_phase: &ImpactVector) -> Result<ShareRow> {
    if production.method_id != use_phase.method_id {
        return Err(Error::Data(format!(
            "production uses method {}, use phase {}",
            production.method_id, use_phase.method_id
        )));
    }
    let mut warnings = Vec::new();
    let mut shares = IndexMap::new();
    for (category, &p) in &production.values {
        let u = use_phase
            .get(category)
            .ok_or_else(|| Error::Data(format!("use-phase vector lacks category {category}")))?;
        let sum = p + u;
        let share = if sum > 0.0 {
            Some(p / sum)
        } else {
            warnings.push(format!("production + use is {sum} in {category}; share undefined"));
            None
        };
        shares.insert(category.clone(), share);
    }
    Ok(ShareRow { shares, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioRow {
    pub scenario: UsePhaseScenario,
    pub energy_kwh: f64,
    pub production: ImpactVector,
    pub use_phase: ImpactVector,
    pub shares: IndexMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioTable {
    pub categories: Vec<String>,
    /// Ordered by scenario id.
    pub rows: Vec<ScenarioRow>,
    pub warnings: Vec<String>,
}

/// Evaluates every scenario. Production impacts are computed once per
/// database and shared by all scenarios that use it.
pub fn run_scenarios(
    file: &ScenarioFile,
    bom: &BillOfMaterials,
    rules: &RuleSet,
    databases: &[BackgroundDatabase],
    method: &CharacterizationMethod,
    options: &SolverOptions,
) -> Result<ScenarioTable> {
    let categories: Vec<String> = method.category_ids().map(str::to_owned).collect();
    let mut scenarios: Vec<&UsePhaseScenario> = file.scenarios.iter().collect();
    scenarios.sort_by_key(|s| s.id);
    if scenarios.is_empty() {
        return Ok(ScenarioTable {
            categories,
            rows: Vec::new(),
            warnings: vec!["scenario file lists no scenarios".into()],
        });
    }

    let find_db = |s: &UsePhaseScenario| -> Result<&BackgroundDatabase> {
        databases
            .iter()
            .find(|d| d.id == s.database)
            .ok_or_else(|| Error::Scenario {
                id: s.id,
                source: Box::new(Error::Resolution {
                    component: format!("scenario {}", s.id),
                    message: format!("database {} is not loaded", s.database),
                }),
            })
    };
    let mut needed: BTreeMap<&str, i64> = BTreeMap::new();
    for s in &scenarios {
        find_db(s)?;
        needed.entry(s.database.as_str()).or_insert(s.id);
    }

    let production: BTreeMap<&str, Result<ImpactVector>> = needed
        .par_iter()
        .map(|(&db_id, &first)| {
            let db = databases.iter().find(|d| d.id == db_id).expect("checked above");
            let result = assess(bom, rules, db, method, options)
                .map(|a| a.impacts)
                .map_err(|e| Error::Scenario {
                    id: first,
                    source: Box::new(e),
                });
            (db_id, result)
        })
        .collect();
    let production: BTreeMap<&str, ImpactVector> = production
        .into_iter()
        .map(|(k, v)| v.map(|v| (k, v)))
        .collect::<Result<_>>()?;

    let evaluated: Vec<Result<(ScenarioRow, Vec<String>)>> = scenarios
        .par_iter()
        .map(|&s| {
            let wrap = |e: Error| Error::Scenario {
                id: s.id,
                source: Box::new(e),
            };
            let db = find_db(s)?;
            let use_phase = use_phase_impacts(s, file, db, method, options).map_err(wrap)?;
            let prod = production[s.database.as_str()].clone();
            let share = production_share(&prod, &use_phase).map_err(wrap)?;
            let warnings = share
                .warnings
                .into_iter()
                .map(|w| format!("scenario {}: {w}", s.id))
                .collect();
            Ok((
                ScenarioRow {
                    scenario: s.clone(),
                    energy_kwh: use_phase_energy(s.power_kw, s.lifespan_years).map_err(wrap)?,
                    production: prod,
                    use_phase,
                    shares: share.shares,
                },
                warnings,
            ))
        })
        .collect();

    let mut rows = Vec::with_capacity(evaluated.len());
    let mut warnings = Vec::new();
    for item in evaluated {
        let (row, w) = item?;
        rows.push(row);
        warnings.extend(w);
    }
    Ok(ScenarioTable {
        categories,
        rows,
        warnings,
    })
}
