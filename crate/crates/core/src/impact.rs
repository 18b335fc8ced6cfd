//! Characterization of inventories into impact vectors, and the reports
//! built on top: per-group contributions, hotspot rankings, and
//! cross-database ratios.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inventory::{FlowVector, InventoryVector};
use crate::model::{CharacterizationMethod, ImpactVector};
use crate::scaling::{Source, Stage};

/// Group label for components without one.
pub const DEFAULT_GROUP: &str = "other";

/// Flow-major view of a method's factor matrix.
#[derive(Debug, Clone)]
pub struct FactorIndex {
    method_id: String,
    categories: Vec<String>,
    by_flow: HashMap<String, Vec<(usize, f64)>>,
}

impl FactorIndex {
    pub fn new(method: &CharacterizationMethod) -> Result<Self> {
        let mut position = HashMap::new();
        for (i, c) in method.categories.iter().enumerate() {
            if position.insert(c.id.as_str(), i).is_some() {
                return Err(Error::Data(format!(
                    "method {} declares category {:?} twice",
                    method.id, c.id
                )));
            }
        }
        let mut by_flow: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for (category, row) in &method.factors {
            let &i = position.get(category.as_str()).ok_or_else(|| {
                Error::Data(format!(
                    "method {} has factors for undeclared category {category:?}",
                    method.id
                ))
            })?;
            for (flow, &factor) in row {
                by_flow.entry(flow.clone()).or_default().push((i, factor));
            }
        }
        for entries in by_flow.values_mut() {
            entries.sort_by_key(|(i, _)| *i);
        }
        Ok(FactorIndex {
            method_id: method.id.clone(),
            categories: method.categories.iter().map(|c| c.id.clone()).collect(),
            by_flow,
        })
    }

    pub fn is_characterized(&self, flow: &str) -> bool {
        self.by_flow.contains_key(flow)
    }

    /// Scores in category order. Flows are visited in sorted order.
    pub fn apply(&self, flows: &FlowVector) -> ImpactVector {
        let mut scores = vec![0.0; self.categories.len()];
        for (flow, &amount) in flows {
            if let Some(entries) = self.by_flow.get(flow) {
                for &(i, factor) in entries {
                    scores[i] += factor * amount;
                }
            }
        }
        ImpactVector {
            method_id: self.method_id.clone(),
            values: self.categories.iter().cloned().zip(scores).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Characterization {
    pub impacts: ImpactVector,
    /// Inventory flows no category has a factor for, sorted.
    pub uncharacterized: Vec<String>,
}

pub fn characterize(inv: &InventoryVector, method: &CharacterizationMethod) -> Result<Characterization> {
    let index = FactorIndex::new(method)?;
    Ok(Characterization {
        impacts: index.apply(&inv.entries),
        uncharacterized: inv
            .entries
            .keys()
            .filter(|f| !index.is_characterized(f))
            .cloned()
            .collect(),
    })
}

/// How attribution sources collapse into report groups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grouping {
    /// Component id → group label.
    pub by_component: BTreeMap<String, String>,
    /// When set, every transport-stage contribution goes to this group
    /// instead of its component's group.
    pub transport_group: Option<String>,
}

impl Grouping {
    pub fn label<'a>(&'a self, source: &Source) -> &'a str {
        if source.stage == Stage::Transport {
            if let Some(g) = &self.transport_group {
                return g;
            }
        }
        self.by_component
            .get(&source.component_id)
            .map_or(DEFAULT_GROUP, String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContributionTable {
    pub method_id: String,
    pub rows: BTreeMap<String, ImpactVector>,
    pub total: ImpactVector,
}

impl ContributionTable {
    /// Largest relative gap between the row sums and the total, over all
    /// categories.
    pub fn closure_gap(&self) -> f64 {
        let mut gap = 0.0_f64;
        for (category, &total) in &self.total.values {
            let sum: f64 = self.rows.values().map(|r| r.values[category]).sum();
            let scale = total.abs().max(sum.abs());
            if scale > 0.0 {
                gap = gap.max((sum - total).abs() / scale);
            }
        }
        gap
    }
}

/// Impact vector of every attribution source.
pub fn attributed_impacts(
    inv: &InventoryVector,
    method: &CharacterizationMethod,
) -> Result<BTreeMap<Source, ImpactVector>> {
    let attribution = inv
        .attribution
        .as_ref()
        .ok_or_else(|| Error::Data("inventory carries no attribution".into()))?;
    let index = FactorIndex::new(method)?;
    Ok(attribution
        .iter()
        .map(|(source, flows)| (source.clone(), index.apply(flows)))
        .collect())
}

pub fn contributions(
    inv: &InventoryVector,
    method: &CharacterizationMethod,
    grouping: &Grouping,
) -> Result<ContributionTable> {
    let per_source = attributed_impacts(inv, method)?;
    let mut rows: BTreeMap<String, ImpactVector> = BTreeMap::new();
    for (source, impacts) in &per_source {
        rows.entry(grouping.label(source).to_owned())
            .or_insert_with(|| method.zero_vector())
            .add_assign(impacts);
    }
    Ok(ContributionTable {
        method_id: method.id.clone(),
        rows,
        total: characterize(inv, method)?.impacts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub category: String,
    /// (group, share of the category total), largest share first.
    pub entries: Vec<(String, f64)>,
    pub warning: Option<String>,
}

/// Groups ordered by descending share of one category; ties go to the
/// lexicographically smaller label.
pub fn hotspot_ranking(table: &ContributionTable, category: &str) -> Result<Ranking> {
    let total = table
        .total
        .get(category)
        .ok_or_else(|| Error::Lookup(format!("unknown impact category {category:?}")))?;
    if !(total > 0.0) {
        return Ok(Ranking {
            category: category.to_owned(),
            entries: Vec::new(),
            warning: Some(format!("category {category} has total {total}; no ranking")),
        });
    }
    let mut entries: Vec<(String, f64)> = table
        .rows
        .iter()
        .map(|(group, row)| (group.clone(), row.values[category] / total))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Ranking {
        category: category.to_owned(),
        entries,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonTable {
    pub reference_database_id: String,
    pub categories: Vec<String>,
    /// database id → category → ratio to the reference (`None` where the
    /// reference value is zero).
    pub rows: IndexMap<String, IndexMap<String, Option<f64>>>,
    pub warnings: Vec<String>,
}

/// Normalizes every result set by the reference database, category by
/// category.
pub fn compare_databases(results: &IndexMap<String, ImpactVector>, reference_id: &str) -> Result<ComparisonTable> {
    if results.len() < 2 {
        return Err(Error::Data(format!(
            "comparison needs at least two result sets, got {}",
            results.len()
        )));
    }
    let reference = results
        .get(reference_id)
        .ok_or_else(|| Error::Lookup(format!("reference database {reference_id:?} is not among the results")))?;
    for (id, r) in results {
        if r.method_id != reference.method_id {
            return Err(Error::Data(format!(
                "{id} was characterized with {}, reference with {}",
                r.method_id, reference.method_id
            )));
        }
        let keys: Vec<&String> = r.values.keys().collect();
        let ref_keys: Vec<&String> = reference.values.keys().collect();
        if keys != ref_keys {
            return Err(Error::Data(format!("{id} does not cover the reference categories")));
        }
    }
    let mut warnings = Vec::new();
    for (category, &value) in &reference.values {
        if value == 0.0 {
            warnings.push(format!(
                "reference {reference_id} is zero in {category}; ratios left empty"
            ));
        }
    }
    let rows = results
        .iter()
        .map(|(id, r)| {
            let ratios = r
                .values
                .iter()
                .map(|(category, &v)| {
                    let base = reference.values[category];
                    (category.clone(), (base != 0.0).then(|| v / base))
                })
                .collect();
            (id.clone(), ratios)
        })
        .collect();
    Ok(ComparisonTable {
        reference_database_id: reference_id.to_owned(),
        categories: reference.values.keys().cloned().collect(),
        rows,
        warnings,
    })
}

/// Flows present in some inventories but not all, per inventory label.
pub fn unmatched_flows<'a>(
    inventories: impl IntoIterator<Item = (&'a str, &'a InventoryVector)>,
) -> BTreeMap<String, Vec<String>> {
    let inventories: Vec<(&str, &InventoryVector)> = inventories.into_iter().collect();
    let mut common: Option<HashSet<&str>> = None;
    for (_, inv) in &inventories {
        let flows: HashSet<&str> = inv.entries.keys().map(String::as_str).collect();
        common = Some(match common {
            None => flows,
            Some(c) => c.intersection(&flows).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    let mut out = BTreeMap::new();
    for (label, inv) in inventories {
        let only: BTreeSet<&str> = inv
            .entries
            .keys()
            .map(String::as_str)
            .filter(|f| !common.contains(f))
            .collect();
        if !only.is_empty() {
            out.insert(label.to_owned(), only.into_iter().map(str::to_owned).collect());
        }
    }
    out
}
