//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! shown by `cargo test`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hwlca_bench::{random_database, random_demands, rng, scale_demands, SystemShape};
use hwlca_core::io;
use hwlca_core::model::{ImpactCategory, SchemaVersion};
use hwlca_core::scaling::TransportMode;
use hwlca_core::{
    assess, characterize, compare_databases, ic_mass_from_die_area, lci_aggregated, lci_linked, pcb_layer_blend,
    production_share, run_scenarios, run_sensitivity, transport_demands, use_phase_energy, Assessment,
    BackgroundDatabase, BillOfMaterials, CharacterizationMethod, ComponentCategory, ImpactVector, InventoryVector,
    RuleSet, ScaledDemand, SolverOptions,
};
use indexmap::IndexMap;
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

struct Shipped {
    bom: BillOfMaterials,
    rules: RuleSet,
    ecoinvent: BackgroundDatabase,
    sphera: BackgroundDatabase,
    method: CharacterizationMethod,
}

impl Shipped {
    fn load() -> Shipped {
        Shipped {
            bom: io::load_bom(&data("s9.bom.json")).unwrap(),
            rules: io::load_rules(&data("s9.rules.json")).unwrap(),
            ecoinvent: io::load_database(&data("demo-ecoinvent.db.json")).unwrap(),
            sphera: io::load_database(&data("demo-sphera.db.json")).unwrap(),
            method: io::load_method(&data("recipe-2016-midpoint-h.method.json")).unwrap(),
        }
    }

    fn databases(&self) -> [&BackgroundDatabase; 2] {
        [&self.ecoinvent, &self.sphera]
    }

    fn run(&self, db: &BackgroundDatabase) -> Result<Assessment, String> {
        assess(&self.bom, &self.rules, db, &self.method, &SolverOptions::default()).map_err(|e| e.to_string())
    }
}

/// Flows of a linked database from the power series s = Σₖ Aᵏ f, summed
/// until the next term is negligible next to the running total.
fn neumann_oracle(db: &BackgroundDatabase, demands: &[ScaledDemand]) -> BTreeMap<String, f64> {
    let index: BTreeMap<&str, usize> = db
        .processes
        .iter()
        .enumerate()
        .map(|(j, p)| (p.id.as_str(), j))
        .collect();
    let n = db.processes.len();
    let mut f = vec![0.0; n];
    for d in demands {
        f[index[d.process_id.as_str()]] += d.amount;
    }
    let mut s = f.clone();
    let mut term = f;
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for (j, p) in db.processes.iter().enumerate() {
            for (input, &coef) in &p.tech_inputs {
                next[index[input.as_str()]] += coef * term[j];
            }
        }
        for (si, ti) in s.iter_mut().zip(&next) {
            *si += ti;
        }
        let size = next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let total = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        term = next;
        if size <= 1e-20 * total {
            break;
        }
    }
    let mut flows: BTreeMap<String, f64> = db.flows.iter().map(|fl| (fl.id.clone(), 0.0)).collect();
    for (j, p) in db.processes.iter().enumerate() {
        for (flow, &amount) in &p.direct_flows {
            *flows.get_mut(flow).unwrap() += amount * s[j];
        }
    }
    flows
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for seed in 0..200u64 {
        let mut r = rng(seed);
        let n = 1 + (seed as usize % 12);
        let db = random_database(&mut r, SystemShape::linked(n, 4));
        let demands = random_demands(&mut r, &db, 3);
        let inv = lci_linked(&demands, &db, &SolverOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        for (flow, expected) in neumann_oracle(&db, &demands) {
            let d = rel_diff(inv.get(&flow), expected);
            worst = worst.max(d);
            check(d <= 1e-9, || {
                format!("seed {seed}, {flow}: {} vs oracle {expected}", inv.get(&flow))
            })?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("200 systems, worst relative error {worst:.1e}, {elapsed:.2?}"))
}

fn random_method(flows: usize, seed: u64) -> CharacterizationMethod {
    let categories: Vec<ImpactCategory> = (0..3)
        .map(|c| ImpactCategory {
            id: format!("cat{c}"),
            name: format!("category {c}"),
            abbreviation: format!("C{c}"),
            unit: "kg eq".into(),
        })
        .collect();
    let factors = categories
        .iter()
        .enumerate()
        .map(|(c, cat)| {
            let row = (0..flows)
                .filter(|k| !(k + c + seed as usize).is_multiple_of(3))
                .map(|k| {
                    (
                        hwlca_bench::flow_id(k),
                        0.5 + ((k * 7 + c * 3 + seed as usize) % 11) as f64,
                    )
                })
                .collect();
            (cat.id.clone(), row)
        })
        .collect();
    CharacterizationMethod {
        schema_version: SchemaVersion::default(),
        id: "random".into(),
        name: None,
        categories,
        factors,
        notes: vec![],
    }
}

fn doubled(once: &InventoryVector, twice: &InventoryVector, what: &str) -> Result<f64, String> {
    let mut worst = 0.0_f64;
    let flows: BTreeSet<&String> = once.entries.keys().chain(twice.entries.keys()).collect();
    for flow in flows {
        let d = rel_diff(2.0 * once.get(flow), twice.get(flow));
        worst = worst.max(d);
        check(d <= 1e-12, || {
            format!("{what}, {flow}: 2×{} vs {}", once.get(flow), twice.get(flow))
        })?;
    }
    Ok(worst)
}

fn criterion_2() -> Outcome {
    let options = SolverOptions::default();
    let mut worst = 0.0_f64;
    for seed in 0..100u64 {
        let mut r = rng(1_000 + seed);
        let n = 2 + (seed as usize % 11);
        let flows = 4;
        let linked = random_database(&mut r, SystemShape::linked(n, flows));
        let aggregated = random_database(&mut r, SystemShape::aggregated(n, flows));
        let demands = random_demands(&mut r, &linked, 4);
        let twice_demands = scale_demands(&demands, 2.0);
        let err = |e: hwlca_core::Error| format!("seed {seed}: {e}");

        let l1 = lci_linked(&demands, &linked, &options).map_err(err)?;
        let l2 = lci_linked(&twice_demands, &linked, &options).map_err(err)?;
        worst = worst.max(doubled(&l1, &l2, &format!("seed {seed} linked"))?);

        let a1 = lci_aggregated(&demands, &aggregated).map_err(err)?;
        let a2 = lci_aggregated(&twice_demands, &aggregated).map_err(err)?;
        worst = worst.max(doubled(&a1, &a2, &format!("seed {seed} aggregated"))?);

        let method = random_method(flows, seed);
        let scaled = InventoryVector {
            entries: l1.entries.iter().map(|(k, v)| (k.clone(), 2.0 * v)).collect(),
            attribution: None,
        };
        let c1 = characterize(&l1, &method).map_err(err)?.impacts;
        let c2 = characterize(&scaled, &method).map_err(err)?.impacts;
        for (category, &v) in &c1.values {
            let d = rel_diff(2.0 * v, c2.values[category]);
            worst = worst.max(d);
            check(d <= 1e-12, || {
                format!("seed {seed} characterize {category}: 2×{v} vs {}", c2.values[category])
            })?;
        }
    }
    Ok(format!(
        "100 fixtures × (linked, aggregated, characterize), worst relative error {worst:.1e}"
    ))
}

fn criterion_3(s: &Shipped) -> Outcome {
    let mut worst = 0.0_f64;
    for db in s.databases() {
        let a = s.run(db)?;
        for (category, &total) in &a.contributions.total.values {
            let sum: f64 = a.contributions.rows.values().map(|row| row.values[category]).sum();
            let d = rel_diff(sum, total);
            worst = worst.max(d);
            check(d <= 1e-12, || {
                format!("{} / {category}: groups sum to {sum}, total {total}", db.id)
            })?;
            let direct = a.impacts.values[category];
            check(rel_diff(total, direct) <= 1e-12, || {
                format!("{} / {category}: contribution total {total}, impacts {direct}", db.id)
            })?;
        }
    }
    Ok(format!("both databases, worst closure gap {worst:.1e}"))
}

fn hwlca(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hwlca"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "hwlca {} failed: {}",
            args[0],
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn criterion_4(s: &Shipped) -> Outcome {
    let mut margins = Vec::new();
    for db_file in ["demo-ecoinvent.db.json", "demo-sphera.db.json"] {
        let dir = TempDir::new().map_err(|e| e.to_string())?;
        let out = dir.path().join("out");
        hwlca(&[
            "assess",
            "--bom",
            &path_str(&data("s9.bom.json")),
            "--rules",
            &path_str(&data("s9.rules.json")),
            "--db",
            &path_str(&data(db_file)),
            "--method",
            &path_str(&data("recipe-2016-midpoint-h.method.json")),
            "--out",
            &path_str(&out),
        ])?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(out.join("attribution.csv"))
            .map_err(|e| e.to_string())?;
        let header = reader.headers().map_err(|e| e.to_string())?.clone();
        let group_col = header.iter().position(|h| h == "group").ok_or("no group column")?;
        let categories: Vec<String> = header.iter().skip(group_col + 1).map(str::to_owned).collect();
        check(categories.len() == s.method.categories.len(), || {
            format!("{} category columns", categories.len())
        })?;
        let mut sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| e.to_string())?;
            let row = sums
                .entry(record[group_col].to_string())
                .or_insert_with(|| vec![0.0; categories.len()]);
            for (i, cell) in record.iter().skip(group_col + 1).enumerate() {
                row[i] += cell.parse::<f64>().map_err(|e| format!("{cell}: {e}"))?;
            }
        }
        for (i, category) in categories.iter().enumerate() {
            let mut ranked: Vec<(&String, f64)> = sums.iter().map(|(g, v)| (g, v[i])).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            check(ranked[0].0 == "ASICs", || {
                format!("{db_file} / {category}: rank 1 is {}", ranked[0].0)
            })?;
            margins.push(ranked[0].1 / ranked[1].1);
        }
    }
    let least = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "ASICs first in {} (database, category) pairs from attribution.csv; smallest lead {least:.2}×",
        margins.len()
    ))
}

fn criterion_5(s: &Shipped) -> Outcome {
    let mut listed = Vec::new();
    for (db, category) in [
        (&s.sphera, ComponentCategory::Connector),
        (&s.ecoinvent, ComponentCategory::CrystalOscillator),
    ] {
        let expected: BTreeSet<&str> = s
            .bom
            .components
            .iter()
            .filter(|c| c.category == category)
            .map(|c| c.id.as_str())
            .collect();
        check(!expected.is_empty(), || {
            format!("no {category:?} components in the BOM")
        })?;
        let a = s.run(db)?;
        let cut: BTreeSet<&str> = a.resolution.cutoff.iter().map(|c| c.component_id.as_str()).collect();
        check(cut == expected, || {
            format!("{}: cut {cut:?}, expected {expected:?}", db.id)
        })?;
        for c in &a.resolution.cutoff {
            check(c.reason == "database-cutoff", || {
                format!("{}: reason {}", c.component_id, c.reason)
            })?;
        }
        let modeled: BTreeSet<&str> = a
            .resolution
            .demands
            .iter()
            .map(|d| d.source_component_id.as_str())
            .collect();
        check(modeled.is_disjoint(&expected), || {
            format!("{}: a cut component still has demands", db.id)
        })?;
        listed.push(format!("{} cuts {}", db.id, cut.len()));
    }
    Ok(listed.join(", "))
}

fn criterion_6(s: &Shipped) -> Outcome {
    let file = io::load_scenarios(&data("s9-use-phase.scenarios.json")).map_err(|e| e.to_string())?;
    let dbs = [s.ecoinvent.clone(), s.sphera.clone()];
    let table = run_scenarios(&file, &s.bom, &s.rules, &dbs, &s.method, &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    check(table.rows.len() == 8, || format!("{} rows", table.rows.len()))?;
    let row = |id: i64| {
        table
            .rows
            .iter()
            .find(|r| r.scenario.id == id)
            .ok_or(format!("no scenario {id}"))
    };
    let (short, long) = (row(7)?, row(8)?);
    check(
        short.scenario.lifespan_years == 1.5 && long.scenario.lifespan_years == 5.0,
        || "scenarios 7/8 are not the 1.5/5 year pair".into(),
    )?;
    check(
        (&short.scenario.database, &short.scenario.mix, short.scenario.power_kw)
            == (&long.scenario.database, &long.scenario.mix, long.scenario.power_kw),
        || "scenarios 7/8 differ in more than lifespan".into(),
    )?;
    let mut compared = 0;
    for category in &table.categories {
        if long.use_phase.values[category] != 0.0 {
            let (a, b) = (short.shares[category], long.shares[category]);
            check(matches!((a, b), (Some(a), Some(b)) if a > b), || {
                format!("{category}: {a:?} vs {b:?}")
            })?;
            compared += 1;
        }
    }
    let vector = |v: f64| ImpactVector {
        method_id: "m".into(),
        values: IndexMap::from([("c".to_string(), v)]),
    };
    let share = production_share(&vector(10.0), &vector(30.0))
        .map_err(|e| e.to_string())?
        .shares["c"];
    check(share == Some(0.25), || format!("production_share(10, 30) = {share:?}"))?;
    Ok(format!(
        "8 rows; 1.5 yr > 5 yr in {compared} categories; production_share(10, 30) = 0.25"
    ))
}

fn criterion_7(s: &Shipped) -> Outcome {
    let results: IndexMap<String, ImpactVector> = s
        .databases()
        .iter()
        .map(|db| s.run(db).map(|a| (db.id.clone(), a.impacts)))
        .collect::<Result<_, _>>()?;
    let eco = compare_databases(&results, "demo-ecoinvent").map_err(|e| e.to_string())?;
    let sph = compare_databases(&results, "demo-sphera").map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for category in &eco.categories {
        let reference = eco.rows["demo-ecoinvent"][category];
        check(reference == Some(1.0), || {
            format!("reference row {category} = {reference:?}")
        })?;
        let r = eco.rows["demo-sphera"][category].ok_or(format!("{category}: undefined ratio"))?;
        let inv = sph.rows["demo-ecoinvent"][category].ok_or(format!("{category}: undefined inverse"))?;
        let d = rel_diff(inv, 1.0 / r);
        worst = worst.max(d);
        check(d <= 1e-12, || format!("{category}: {r} and {inv} are not reciprocal"))?;
    }
    Ok(format!(
        "reference row 1.0 in {} categories; worst inversion error {worst:.1e}",
        eco.categories.len()
    ))
}

fn criterion_8() -> Outcome {
    let err = |e: hwlca_core::Error| e.to_string();
    let mass = ic_mass_from_die_area(20.0, 70000.0).map_err(err)?;
    check(rel_diff(mass, 2.857142857e-4) <= 1e-9, || format!("ic mass {mass}"))?;
    check(rel_diff(mass, 20.0 / 70000.0) <= 1e-15, || {
        format!("ic mass {mass} vs 20/70000")
    })?;
    let blend = pcb_layer_blend(6).map_err(err)?;
    check(blend == BTreeMap::from([(4, 0.5), (8, 0.5)]), || {
        format!("pcb blend {blend:?}")
    })?;
    let distances = BTreeMap::from([("train".to_string(), 20.0), ("truck".to_string(), 20.0)]);
    let tkm = transport_demands(4.2, &distances).map_err(err)?;
    check(tkm.len() == 2, || format!("transport modes {tkm:?}"))?;
    for mode in [TransportMode::Train, TransportMode::Truck] {
        let v = tkm.get(&mode).copied().unwrap_or(f64::NAN);
        check(
            rel_diff(v, 4.2 * 20.0 / 1000.0) <= 1e-12 && rel_diff(v, 0.084) <= 1e-12,
            || format!("{mode:?}: {v} tkm"),
        )?;
    }
    Ok(format!(
        "ic mass {mass:e} kg; blend {{4: 0.5, 8: 0.5}}; 0.084 tkm by train and truck"
    ))
}

fn criterion_9() -> Outcome {
    let kwh = use_phase_energy(1.4, 3.0).map_err(|e| e.to_string())?;
    check(kwh == 36792.0, || format!("use_phase_energy(1.4, 3) = {kwh}"))?;
    Ok("use_phase_energy(1.4, 3) = 36792 kWh".into())
}

fn criterion_10(s: &Shipped) -> Outcome {
    let options = SolverOptions::default();
    let bounds = io::load_bounds(&data("s9-sensitivity.bounds.json")).map_err(|e| e.to_string())?;
    let mut widest = 0.0_f64;
    for db in s.databases() {
        let result = run_sensitivity(&bounds, &s.bom, &s.rules, db, &s.method, &options).map_err(|e| e.to_string())?;
        for (category, &t) in &result.typical.values {
            let (l, h) = (result.low.values[category], result.high.values[category]);
            check(l <= t && t <= h, || {
                format!("{} / {category}: {l} ≤ {t} ≤ {h} violated", db.id)
            })?;
            if t != 0.0 {
                widest = widest.max((h - t) / t).max((t - l) / t);
            }
        }
        let mut flat = bounds.clone();
        for p in &mut flat.parameters {
            (p.low, p.high) = (p.typical, p.typical);
        }
        let flat = run_sensitivity(&flat, &s.bom, &s.rules, db, &s.method, &options).map_err(|e| e.to_string())?;
        for sp in &flat.spreads {
            check(sp.upper == Some(0.0) && sp.lower == Some(0.0), || {
                format!(
                    "{} / {}: degenerate spread {:?}/{:?}",
                    db.id, sp.category, sp.lower, sp.upper
                )
            })?;
        }
    }
    Ok(format!(
        "ordered on both databases; degenerate bounds give zero spread; widest spread {:.1}%",
        widest * 100.0
    ))
}

/// Every file under `dir` with its bytes, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            files.insert(
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap_or_default(),
            );
        }
    }
    files
}

fn criterion_11() -> Outcome {
    let bom = path_str(&data("s9.bom.json"));
    let rules = path_str(&data("s9.rules.json"));
    let eco = path_str(&data("demo-ecoinvent.db.json"));
    let sphera = path_str(&data("demo-sphera.db.json"));
    let method = path_str(&data("recipe-2016-midpoint-h.method.json"));
    let scenarios = path_str(&data("s9-use-phase.scenarios.json"));
    let bounds = path_str(&data("s9-sensitivity.bounds.json"));
    let spec = path_str(&data("s19-pro.extrapolation.json"));
    let common = ["--bom", &bom, "--rules", &rules, "--method", &method];
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("assess", vec!["--db", &sphera, "--dump-solver"]),
        ("assess", vec!["--db", &eco, "--dump-solver"]),
        ("compare", vec!["--db", &eco, "--db", &sphera, "--dump-solver"]),
        (
            "scenarios",
            vec!["--db", &eco, "--db", &sphera, "--scenarios", &scenarios],
        ),
        ("sensitivity", vec!["--db", &sphera, "--bounds", &bounds]),
        ("extrapolate", vec!["--db", &eco, "--spec", &spec]),
        (
            "validate",
            vec![
                "--db",
                &eco,
                "--db",
                &sphera,
                "--scenarios",
                &scenarios,
                "--bounds",
                &bounds,
                "--spec",
                &spec,
            ],
        ),
    ];
    let mut files = 0;
    for (name, extra) in &commands {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let dir = TempDir::new().map_err(|e| e.to_string())?;
            let out = path_str(&dir.path().join("out"));
            let mut args = vec![*name];
            args.extend(common);
            args.extend(extra.iter().copied());
            if *name != "validate" {
                args.extend(["--out", &out]);
            }
            let o = hwlca(&args)?;
            runs.push((o.stdout, o.stderr, snapshot(&dir.path().join("out"))));
        }
        let (first, second) = (&runs[0], &runs[1]);
        check(*name == "validate" || !first.2.is_empty(), || {
            format!("{name} wrote no files")
        })?;
        check(first.0 == second.0, || format!("{name}: stdout differs"))?;
        check(first.1 == second.1, || format!("{name}: stderr differs"))?;
        check(first.2.keys().eq(second.2.keys()), || {
            format!("{name}: different file sets")
        })?;
        for (file, bytes) in &first.2 {
            check(second.2[file] == *bytes, || {
                format!("{name}: {file} differs between runs")
            })?;
        }
        files += first.2.len();
    }
    Ok(format!(
        "{} invocations × 2, {files} output files byte-identical",
        commands.len()
    ))
}

fn main() -> ExitCode {
    let shipped = Shipped::load();
    let criteria: Vec<Criterion> = vec![
        ("Leontief oracle equivalence", Box::new(criterion_1)),
        (
            "linearity of both inventory modes and characterization",
            Box::new(criterion_2),
        ),
        (
            "contribution closure on shipped data",
            Box::new(|| criterion_3(&shipped)),
        ),
        (
            "ASICs are the top hotspot in every category",
            Box::new(|| criterion_4(&shipped)),
        ),
        ("database cut-offs", Box::new(|| criterion_5(&shipped))),
        ("use-phase share table", Box::new(|| criterion_6(&shipped))),
        ("database comparison normalization", Box::new(|| criterion_7(&shipped))),
        ("scaling-rule formulas", Box::new(criterion_8)),
        ("use-phase energy convention", Box::new(criterion_9)),
        ("sensitivity ordering", Box::new(|| criterion_10(&shipped))),
        ("deterministic CLI output", Box::new(criterion_11)),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS criterion {}: {title} — {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {title} — {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
