//! Life-cycle inventory: turn scaled process demands into an
//! elementary-flow vector.
//!
//! Aggregated databases give a weighted sum of process flows. Linked
//! databases solve `(I - A) s = f`, where `A[i][j]` is the amount of
//! process `i` consumed per reference unit of process `j`, then take
//! `g = B s` with `B` assembled from direct flows.

mod solver;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

pub use solver::{bicgstab, relative_residual, CsrMatrix, DenseLu, SolveError};

use crate::error::{Error, Result};
use crate::model::{BackgroundDatabase, DatabaseMode};
use crate::scaling::{ScaledDemand, Source};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Maximum accepted relative residual `||s - f - A s|| / ||f||`.
    pub tolerance: f64,
    /// Largest process count solved with dense LU; bigger systems go to
    /// the sparse iterative route.
    pub dense_limit: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: DEFAULT_TOLERANCE,
            dense_limit: DEFAULT_DENSE_LIMIT,
            max_iterations: 10_000,
        }
    }
}

/// Final demand per process, in reference units.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DemandVector {
    pub entries: BTreeMap<String, f64>,
}

impl DemandVector {
    pub fn from_demands(demands: &[ScaledDemand]) -> Self {
        let mut entries = BTreeMap::new();
        for d in demands {
            *entries.entry(d.process_id.clone()).or_insert(0.0) += d.amount;
        }
        DemandVector { entries }
    }
}

pub type FlowVector = BTreeMap<String, f64>;

/// Elementary flows of the functional unit, optionally broken down by the
/// component (and stage) that caused them.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InventoryVector {
    pub entries: FlowVector,
    pub attribution: Option<BTreeMap<Source, FlowVector>>,
}

impl InventoryVector {
    pub fn get(&self, flow: &str) -> f64 {
        self.entries.get(flow).copied().unwrap_or(0.0)
    }

    /// Largest relative gap between `entries` and the sum of the attributed
    /// sub-vectors, over all flows. Zero when no attribution is present.
    pub fn attribution_gap(&self) -> f64 {
        let Some(attribution) = &self.attribution else {
            return 0.0;
        };
        let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
        for sub in attribution.values() {
            for (flow, v) in sub {
                *sums.entry(flow).or_insert(0.0) += v;
            }
        }
        let mut gap = 0.0_f64;
        for flow in self.entries.keys().map(String::as_str).chain(sums.keys().copied()) {
            let total = self.get(flow);
            let sum = sums.get(flow).copied().unwrap_or(0.0);
            let scale = total.abs().max(sum.abs());
            if scale > 0.0 {
                gap = gap.max((total - sum).abs() / scale);
            }
        }
        gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveRoute {
    /// No solve needed (aggregated database).
    Direct,
    DenseLu,
    Bicgstab,
}

/// The vectors behind one inventory computation, for debug dumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub route: SolveRoute,
    /// Process ids in matrix order.
    pub processes: Vec<String>,
    pub demand: Vec<f64>,
    pub scaling: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LciRun {
    pub inventory: InventoryVector,
    pub report: SolveReport,
}

fn group_by_source(demands: &[ScaledDemand]) -> BTreeMap<Source, Vec<&ScaledDemand>> {
    let mut groups: BTreeMap<Source, Vec<&ScaledDemand>> = BTreeMap::new();
    for d in demands {
        groups.entry(d.source()).or_default().push(d);
    }
    groups
}

fn check_demand(d: &ScaledDemand) -> Result<()> {
    if !d.amount.is_finite() || d.amount < 0.0 {
        return Err(Error::Data(format!(
            "demand on {} from {} has invalid amount {}",
            d.process_id, d.source_component_id, d.amount
        )));
    }
    Ok(())
}

/// Weighted sum of pre-aggregated process flows.
pub fn lci_aggregated(demands: &[ScaledDemand], db: &BackgroundDatabase) -> Result<InventoryVector> {
    if db.mode != DatabaseMode::Aggregated {
        return Err(Error::Data(format!(
            "database {} is {}, expected aggregated",
            db.id, db.mode
        )));
    }
    let index: HashMap<&str, usize> = db
        .processes
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let mut entries = FlowVector::new();
    let mut attribution: BTreeMap<Source, FlowVector> = BTreeMap::new();
    for d in demands {
        check_demand(d)?;
        let &idx = index
            .get(d.process_id.as_str())
            .ok_or_else(|| Error::Lookup(format!("process {:?} not in database {}", d.process_id, db.id)))?;
        let sub = attribution.entry(d.source()).or_default();
        for (flow, per_unit) in &db.processes[idx].direct_flows {
            let v = d.amount * per_unit;
            *entries.entry(flow.clone()).or_insert(0.0) += v;
            *sub.entry(flow.clone()).or_insert(0.0) += v;
        }
    }
    Ok(InventoryVector {
        entries,
        attribution: Some(attribution),
    })
}

/// Matrix form of a linked database.
#[derive(Debug, Clone)]
pub struct Technosphere {
    pub processes: Vec<String>,
    index: HashMap<String, usize>,
    pub inputs: CsrMatrix,
    /// Per process (column), its direct flows.
    flows: Vec<Vec<(String, f64)>>,
}

impl Technosphere {
    pub fn assemble(db: &BackgroundDatabase) -> Result<Self> {
        let processes: Vec<String> = db.processes.iter().map(|p| p.id.clone()).collect();
        let index: HashMap<String, usize> = processes.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let mut triplets = Vec::new();
        for (j, p) in db.processes.iter().enumerate() {
            for (input, &amount) in &p.tech_inputs {
                let &i = index
                    .get(input)
                    .ok_or_else(|| Error::Lookup(format!("process {} takes unknown input {input:?}", p.id)))?;
                triplets.push((i, j, amount));
            }
        }
        let inputs = CsrMatrix::from_triplets(processes.len(), triplets);
        let flows = db
            .processes
            .iter()
            .map(|p| p.direct_flows.iter().map(|(k, v)| (k.clone(), *v)).collect())
            .collect();
        Ok(Technosphere {
            processes,
            index,
            inputs,
            flows,
        })
    }

    pub fn dim(&self) -> usize {
        self.processes.len()
    }

    pub fn demand_vector<'a>(&self, demands: impl IntoIterator<Item = &'a ScaledDemand>) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.dim()];
        for d in demands {
            check_demand(d)?;
            let &i = self
                .index
                .get(&d.process_id)
                .ok_or_else(|| Error::Lookup(format!("process {:?} not in database", d.process_id)))?;
            f[i] += d.amount;
        }
        Ok(f)
    }

    /// `g = B s`, skipping processes with zero scaling.
    pub fn flows_for(&self, s: &[f64]) -> FlowVector {
        let mut g = FlowVector::new();
        for (j, &sj) in s.iter().enumerate() {
            if sj == 0.0 {
                continue;
            }
            for (flow, per_unit) in &self.flows[j] {
                *g.entry(flow.clone()).or_insert(0.0) += per_unit * sj;
            }
        }
        g
    }
}

enum Factored {
    Dense(DenseLu),
    Sparse,
}

struct LeontiefSolver<'a> {
    tech: &'a Technosphere,
    factored: Factored,
    options: SolverOptions,
}

impl<'a> LeontiefSolver<'a> {
    fn new(tech: &'a Technosphere, options: SolverOptions) -> Result<Self> {
        let factored = if tech.dim() <= options.dense_limit {
            Factored::Dense(DenseLu::factor(&tech.inputs).map_err(|e| Error::Solver {
                message: e.to_string(),
                residual: f64::INFINITY,
            })?)
        } else {
            Factored::Sparse
        };
        Ok(LeontiefSolver {
            tech,
            factored,
            options,
        })
    }

    fn route(&self) -> SolveRoute {
        match self.factored {
            Factored::Dense(_) => SolveRoute::DenseLu,
            Factored::Sparse => SolveRoute::Bicgstab,
        }
    }

    /// Returns the scaling vector and its relative residual.
    fn solve(&self, f: &[f64]) -> Result<(Vec<f64>, f64)> {
        if f.iter().all(|&v| v == 0.0) {
            return Ok((vec![0.0; f.len()], 0.0));
        }
        let tol = self.options.tolerance;
        let mut s = match &self.factored {
            Factored::Dense(lu) => lu.solve(f),
            Factored::Sparse => {
                bicgstab(&self.tech.inputs, f, tol * 0.1, self.options.max_iterations).map_err(|e| {
                    let residual = match e {
                        SolveError::NotConverged { residual, .. } | SolveError::Breakdown { residual, .. } => residual,
                        SolveError::Singular { .. } => f64::INFINITY,
                    };
                    Error::Solver {
                        message: e.to_string(),
                        residual,
                    }
                })?
            }
        };
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                message: "solution contains non-finite values".into(),
                residual: f64::INFINITY,
            });
        }
        let smax = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (i, v) in s.iter_mut().enumerate() {
            if *v < 0.0 {
                if -*v > tol * smax {
                    return Err(Error::Model(format!(
                        "negative scaling {v:e} for process {}",
                        self.tech.processes[i]
                    )));
                }
                *v = 0.0;
            }
        }
        let residual = relative_residual(&self.tech.inputs, &s, f);
        if !(residual <= tol) {
            return Err(Error::Solver {
                message: format!("residual exceeds tolerance {tol:e}"),
                residual,
            });
        }
        Ok((s, residual))
    }
}

/// Leontief inventory on a linked database.
pub fn lci_linked(
    demands: &[ScaledDemand],
    db: &BackgroundDatabase,
    options: &SolverOptions,
) -> Result<InventoryVector> {
    lci_linked_with_report(demands, db, options).map(|run| run.inventory)
}

pub fn lci_linked_with_report(
    demands: &[ScaledDemand],
    db: &BackgroundDatabase,
    options: &SolverOptions,
) -> Result<LciRun> {
    if db.mode != DatabaseMode::Linked {
        return Err(Error::Data(format!(
            "database {} is {}, expected linked",
            db.id, db.mode
        )));
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::Parameter(format!(
            "solver tolerance must be > 0, got {}",
            options.tolerance
        )));
    }
    let tech = Technosphere::assemble(db)?;
    let f = tech.demand_vector(demands)?;
    let solver = LeontiefSolver::new(&tech, *options)?;
    let (s, residual) = solver.solve(&f)?;
    let entries = tech.flows_for(&s);

    let mut attribution = BTreeMap::new();
    for (source, group) in group_by_source(demands) {
        let fk = tech.demand_vector(group)?;
        let (sk, _) = solver.solve(&fk)?;
        attribution.insert(source, tech.flows_for(&sk));
    }

    Ok(LciRun {
        inventory: InventoryVector {
            entries,
            attribution: Some(attribution),
        },
        report: SolveReport {
            route: solver.route(),
            processes: tech.processes.clone(),
            demand: f,
            scaling: s,
            residual,
        },
    })
}

/// Inventory in whichever mode the database declares.
pub fn lci(demands: &[ScaledDemand], db: &BackgroundDatabase, options: &SolverOptions) -> Result<LciRun> {
    match db.mode {
        DatabaseMode::Linked => lci_linked_with_report(demands, db, options),
        DatabaseMode::Aggregated => {
            let inventory = lci_aggregated(demands, db)?;
            let processes: Vec<String> = db.processes.iter().map(|p| p.id.clone()).collect();
            let dv = DemandVector::from_demands(demands);
            let demand: Vec<f64> = processes
                .iter()
                .map(|p| dv.entries.get(p).copied().unwrap_or(0.0))
                .collect();
            Ok(LciRun {
                inventory,
                report: SolveReport {
                    route: SolveRoute::Direct,
                    processes,
                    scaling: demand.clone(),
                    demand,
                    residual: 0.0,
                },
            })
        }
    }
}

/// Checks that `I - A` admits a non-negative inverse, i.e. the spectral
/// radius of the input-coefficient matrix is below one.
///
/// For non-negative `A` this holds exactly when `(I - A) x = 1` has a
/// solution with every `x_i >= 1` (then `x = sum_k A^k 1`).
pub fn check_leontief(db: &BackgroundDatabase) -> std::result::Result<(), String> {
    check_leontief_with(db, &SolverOptions::default())
}

pub fn check_leontief_with(db: &BackgroundDatabase, options: &SolverOptions) -> std::result::Result<(), String> {
    let tech = Technosphere::assemble(db).map_err(|e| e.to_string())?;
    if tech.inputs.nnz() == 0 {
        return Ok(());
    }
    let ones = vec![1.0; tech.dim()];
    let x = if tech.dim() <= options.dense_limit {
        DenseLu::factor(&tech.inputs).map_err(|e| e.to_string())?.solve(&ones)
    } else {
        bicgstab(&tech.inputs, &ones, options.tolerance, options.max_iterations).map_err(|e| e.to_string())?
    };
    match x.iter().position(|v| !v.is_finite() || *v < 1.0 - 1e-6) {
        None => Ok(()),
        Some(i) => Err(format!(
            "I - A has no non-negative inverse (spectral radius >= 1); total requirement of {} is {:e}",
            tech.processes[i], x[i]
        )),
    }
}
