//! Seeded fixtures shared by the benchmarks and the acceptance suite.
//!
//! Everything here is deterministic for a given seed, so a failing case can be
//! replayed from the seed alone.

use std::collections::BTreeMap;

use hwlca_core::model::{Compartment, SchemaVersion};
use hwlca_core::{BackgroundDatabase, DatabaseMode, ElementaryFlow, ScaledDemand, Stage, UnitProcess};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a random background system.
#[derive(Debug, Clone, Copy)]
pub struct SystemShape {
    pub processes: usize,
    pub flows: usize,
    /// Probability that a process consumes another given process.
    pub density: f64,
    /// Upper bound on the input-coefficient column sums, below 1.
    pub max_column_sum: f64,
    pub mode: DatabaseMode,
}

impl SystemShape {
    pub fn linked(processes: usize, flows: usize) -> Self {
        SystemShape {
            processes,
            flows,
            density: 0.5,
            max_column_sum: 0.9,
            mode: DatabaseMode::Linked,
        }
    }

    pub fn aggregated(processes: usize, flows: usize) -> Self {
        SystemShape {
            density: 0.0,
            mode: DatabaseMode::Aggregated,
            ..SystemShape::linked(processes, flows)
        }
    }

    pub fn sparse(self, density: f64) -> Self {
        SystemShape { density, ..self }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn process_id(i: usize) -> String {
    format!("p{i:04}")
}

pub fn flow_id(k: usize) -> String {
    format!("f{k:02}")
}

/// A database whose technosphere inputs respect `shape`. Column sums are
/// drawn in `[0, max_column_sum]`, so the Leontief system is invertible.
pub fn random_database(rng: &mut impl Rng, shape: SystemShape) -> BackgroundDatabase {
    let n = shape.processes;
    let flows = (0..shape.flows)
        .map(|k| ElementaryFlow {
            id: flow_id(k),
            name: format!("flow {k}"),
            compartment: if k % 2 == 0 {
                Compartment::Air
            } else {
                Compartment::Resource
            },
            unit: "kg".into(),
        })
        .collect();
    let processes = (0..n)
        .map(|j| {
            let mut direct_flows = BTreeMap::new();
            for k in 0..shape.flows {
                if rng.random_bool(0.7) {
                    direct_flows.insert(flow_id(k), rng.random_range(0.01..10.0));
                }
            }
            let mut tech_inputs = BTreeMap::new();
            if shape.mode == DatabaseMode::Linked && n > 1 {
                let picks: Vec<usize> = (0..n).filter(|&i| i != j && rng.random_bool(shape.density)).collect();
                if !picks.is_empty() {
                    let budget = rng.random_range(0.0..=shape.max_column_sum);
                    let weights: Vec<f64> = picks.iter().map(|_| rng.random_range(0.05..1.0)).collect();
                    let total: f64 = weights.iter().sum();
                    for (&i, w) in picks.iter().zip(&weights) {
                        tech_inputs.insert(process_id(i), budget * w / total);
                    }
                }
            }
            UnitProcess {
                id: process_id(j),
                name: format!("process {j}"),
                reference_unit: "kg".into(),
                direct_flows,
                tech_inputs,
            }
        })
        .collect();
    BackgroundDatabase {
        schema_version: SchemaVersion::default(),
        id: format!("random-{n}"),
        name: None,
        mode: shape.mode,
        flows,
        processes,
        notes: Vec::new(),
    }
}

/// Final demands on a random subset of the processes, one per component.
pub fn random_demands(rng: &mut impl Rng, db: &BackgroundDatabase, count: usize) -> Vec<ScaledDemand> {
    (0..count)
        .map(|c| {
            let p = &db.processes[rng.random_range(0..db.processes.len())];
            ScaledDemand {
                process_id: p.id.clone(),
                amount: rng.random_range(0.1..100.0),
                source_component_id: format!("c{c:03}"),
                stage: Stage::Production,
            }
        })
        .collect()
}

/// Every demand amount multiplied by `factor`.
pub fn scale_demands(demands: &[ScaledDemand], factor: f64) -> Vec<ScaledDemand> {
    demands
        .iter()
        .map(|d| ScaledDemand {
            amount: d.amount * factor,
            ..d.clone()
        })
        .collect()
}
