//! One cradle-to-gate run: resolve → inventory → characterize → contributions.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::impact::{attributed_impacts, characterize, contributions, ContributionTable, Grouping};
use crate::inventory::{lci, LciRun, SolverOptions};
use crate::model::{BackgroundDatabase, BillOfMaterials, CharacterizationMethod, ImpactVector};
use crate::scaling::{Resolution, RuleSet, Source};

#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub database_id: String,
    pub method_id: String,
    pub resolution: Resolution,
    pub lci: LciRun,
    pub impacts: ImpactVector,
    pub uncharacterized: Vec<String>,
    pub contributions: ContributionTable,
    /// Impact vector per attribution source (component and stage).
    pub source_impacts: BTreeMap<Source, ImpactVector>,
    pub grouping: Grouping,
}

impl Assessment {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = self.resolution.warnings.clone();
        if !self.uncharacterized.is_empty() {
            w.push(format!(
                "{} inventory flow(s) have no characterization factor in {}: {}",
                self.uncharacterized.len(),
                self.method_id,
                self.uncharacterized.join(", ")
            ));
        }
        w
    }
}

pub fn grouping_for(bom: &BillOfMaterials, rules: &RuleSet, database_id: &str) -> Grouping {
    Grouping {
        by_component: bom.grouping(),
        transport_group: rules.transport_for(database_id).and_then(|p| p.group.clone()),
    }
}

pub fn assess(
    bom: &BillOfMaterials,
    rules: &RuleSet,
    db: &BackgroundDatabase,
    method: &CharacterizationMethod,
    options: &SolverOptions,
) -> Result<Assessment> {
    let resolution = rules.resolve(bom, db)?;
    let run = lci(&resolution.demands, db, options)?;
    let characterized = characterize(&run.inventory, method)?;
    let grouping = grouping_for(bom, rules, &db.id);
    let table = contributions(&run.inventory, method, &grouping)?;
    let source_impacts = attributed_impacts(&run.inventory, method)?;
    Ok(Assessment {
        database_id: db.id.clone(),
        method_id: method.id.clone(),
        resolution,
        lci: run,
        impacts: characterized.impacts,
        uncharacterized: characterized.uncharacterized,
        contributions: table,
        source_impacts,
        grouping,
    })
}
