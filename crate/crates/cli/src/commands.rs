use std::fs;
use std::path::{Path, PathBuf};

use hwlca_core::impact::unmatched_flows;
use hwlca_core::io;
use hwlca_core::report::{self, Metadata};
use hwlca_core::scaling::validate_rules;
use hwlca_core::scenario::impact_ratios;
use hwlca_core::{
    assess as run_assessment, compare_databases, extrapolate as extrapolate_bom, model, run_scenarios, run_sensitivity,
    Assessment, BackgroundDatabase, BillOfMaterials, CharacterizationMethod, Error, RuleSet, SolverOptions,
};
use indexmap::IndexMap;
use log::{info, warn};

use crate::{Common, Failure};

type Outcome = Result<(), Failure>;

/// Everything a command needs, loaded and validated up front.
struct Inputs {
    bom: BillOfMaterials,
    databases: Vec<BackgroundDatabase>,
    /// Unique display label per database (the id, suffixed when repeated).
    labels: Vec<String>,
    method: CharacterizationMethod,
    rules: RuleSet,
    options: SolverOptions,
}

impl Inputs {
    fn metadata(&self) -> Metadata {
        Metadata::new(self.labels.clone(), &self.method.id, self.options.tolerance)
    }

    fn single_database(&self, command: &str) -> Result<&BackgroundDatabase, Failure> {
        match self.databases.as_slice() {
            [db] => Ok(db),
            dbs => Err(Failure::Usage(format!(
                "{command} takes exactly one --db, got {}",
                dbs.len()
            ))),
        }
    }
}

fn load_rules(common: &Common) -> Result<RuleSet, Failure> {
    match &common.rules {
        Some(path) => Ok(io::load_rules(path)?),
        None => {
            let rules: RuleSet = io::read_json(&common.bom)?;
            if rules.mapping_rules.is_empty() {
                return Err(Failure::Usage(format!(
                    "{} has no mappingRules section; pass --rules",
                    common.bom.display()
                )));
            }
            Ok(rules)
        }
    }
}

fn labels_for(databases: &[BackgroundDatabase]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(databases.len());
    for db in databases {
        let mut label = db.id.clone();
        let mut n = 1;
        while labels.contains(&label) {
            n += 1;
            label = format!("{}#{n}", db.id);
        }
        labels.push(label);
    }
    labels
}

fn load(common: &Common) -> Result<Inputs, Failure> {
    if !(common.tol > 0.0 && common.tol.is_finite()) {
        return Err(Failure::Usage(format!(
            "--tol must be a positive number, got {}",
            common.tol
        )));
    }
    let bom = io::load_bom(&common.bom)?;
    let databases = common
        .databases
        .iter()
        .map(|p| io::load_database(p))
        .collect::<hwlca_core::Result<Vec<_>>>()?;
    let method = io::load_method(&common.method)?;
    let rules = load_rules(common)?;
    let refs: Vec<&BackgroundDatabase> = databases.iter().collect();
    let report = validate_rules(&rules, &refs);
    if !report.is_empty() {
        return Err(Error::Invalid {
            subject: "mapping rules".into(),
            report,
        }
        .into());
    }
    Ok(Inputs {
        bom,
        labels: labels_for(&databases),
        databases,
        method,
        rules,
        options: SolverOptions {
            tolerance: common.tol,
            ..SolverOptions::default()
        },
    })
}

/// Writes every rendered file only after all of them were produced.
fn write_outputs(dir: &Path, files: Vec<(String, String)>) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, contents) in files {
        let path = dir.join(&name);
        fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn warn_all<'a>(warnings: impl IntoIterator<Item = &'a String>) {
    for w in warnings {
        warn!("{w}");
    }
}

fn assessment_files(
    a: &Assessment,
    inputs: &Inputs,
    meta: &Metadata,
    dump: bool,
) -> Result<Vec<(String, String)>, Failure> {
    let mut files = vec![
        ("contributions.csv".to_string(), report::contributions_csv(a, meta)?),
        (
            "totals.csv".to_string(),
            report::totals_csv(&a.impacts, &inputs.method, meta)?,
        ),
        ("hotspots.csv".to_string(), report::hotspots_csv(a, meta)?),
        ("attribution.csv".to_string(), report::attribution_csv(a, meta)?),
        ("uncharacterized.csv".to_string(), report::uncharacterized_csv(a, meta)?),
        ("cutoff.csv".to_string(), report::cutoff_csv(a, meta)?),
    ];
    if dump {
        files.push(("solver.csv".to_string(), report::solver_dump_csv(a, meta)?));
    }
    Ok(files)
}

pub fn assess(common: &Common) -> Outcome {
    let inputs = load(common)?;
    let db = inputs.single_database("assess")?;
    let a = run_assessment(&inputs.bom, &inputs.rules, db, &inputs.method, &inputs.options)?;
    warn_all(&a.warnings());
    let meta = inputs.metadata();
    let files = assessment_files(&a, &inputs, &meta, common.dump_solver)?;
    write_outputs(&common.out, files)
}

pub fn compare(common: &Common) -> Outcome {
    let inputs = load(common)?;
    if inputs.databases.len() < 2 {
        return Err(Failure::Usage(format!(
            "compare needs at least two --db, got {}",
            inputs.databases.len()
        )));
    }
    let reference = match &common.reference {
        Some(r) => r.clone(),
        None => {
            info!("no --reference given; normalizing by {}", inputs.labels[0]);
            inputs.labels[0].clone()
        }
    };
    if !inputs.labels.contains(&reference) {
        return Err(Failure::Usage(format!(
            "--reference {reference} is not one of the loaded databases ({})",
            inputs.labels.join(", ")
        )));
    }
    let assessments = inputs
        .databases
        .iter()
        .map(|db| run_assessment(&inputs.bom, &inputs.rules, db, &inputs.method, &inputs.options))
        .collect::<hwlca_core::Result<Vec<_>>>()?;
    for a in &assessments {
        warn_all(&a.warnings());
    }
    let totals: IndexMap<String, _> = inputs
        .labels
        .iter()
        .cloned()
        .zip(assessments.iter().map(|a| a.impacts.clone()))
        .collect();
    let table = compare_databases(&totals, &reference)?;
    warn_all(&table.warnings);
    let unmatched = unmatched_flows(
        inputs
            .labels
            .iter()
            .map(String::as_str)
            .zip(assessments.iter().map(|a| &a.lci.inventory)),
    );
    for (label, flows) in &unmatched {
        warn!(
            "{label}: {} flow(s) absent from the other inventories: {}",
            flows.len(),
            flows.join(", ")
        );
    }
    let meta = inputs.metadata();
    let mut files = vec![
        ("comparison.csv".to_string(), report::comparison_csv(&table, &meta)?),
        ("absolute.csv".to_string(), report::absolute_csv(&totals, &meta)?),
    ];
    if common.dump_solver {
        for (label, a) in inputs.labels.iter().zip(&assessments) {
            files.push((
                format!("solver-{}.csv", file_label(label)),
                report::solver_dump_csv(a, &meta)?,
            ));
        }
    }
    write_outputs(&common.out, files)
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn scenarios(common: &Common, path: &Path) -> Outcome {
    let inputs = load(common)?;
    let file = io::load_scenarios(path)?;
    let table = run_scenarios(
        &file,
        &inputs.bom,
        &inputs.rules,
        &inputs.databases,
        &inputs.method,
        &inputs.options,
    )?;
    warn_all(&table.warnings);
    let meta = inputs.metadata();
    let files = vec![
        ("shares.csv".to_string(), report::shares_csv(&table, &meta)?),
        (
            "scenario-impacts.csv".to_string(),
            report::scenario_impacts_csv(&table, &meta)?,
        ),
    ];
    write_outputs(&common.out, files)
}

pub fn sensitivity(common: &Common, path: &Path) -> Outcome {
    let inputs = load(common)?;
    let bounds = io::load_bounds(path)?;
    let db = inputs.single_database("sensitivity")?;
    let result = run_sensitivity(&bounds, &inputs.bom, &inputs.rules, db, &inputs.method, &inputs.options)?;
    warn_all(&result.warnings);
    let meta = inputs.metadata();
    let files = vec![
        (
            "totals-low.csv".to_string(),
            report::totals_csv(&result.low, &inputs.method, &meta.clone().with("case", "low"))?,
        ),
        (
            "totals-typical.csv".to_string(),
            report::totals_csv(&result.typical, &inputs.method, &meta.clone().with("case", "typical"))?,
        ),
        (
            "totals-high.csv".to_string(),
            report::totals_csv(&result.high, &inputs.method, &meta.clone().with("case", "high"))?,
        ),
        ("spread.csv".to_string(), report::spread_csv(&result, &meta)?),
    ];
    write_outputs(&common.out, files)
}

pub fn extrapolate(common: &Common, path: &Path) -> Outcome {
    let inputs = load(common)?;
    let spec = io::load_extrapolation(path)?;
    let db = inputs.single_database("extrapolate")?;
    let target = extrapolate_bom(&inputs.bom, &spec)?;
    let report = model::validate_bom(&target);
    if !report.is_empty() {
        return Err(Error::Invalid {
            subject: format!("extrapolated bill of materials {}", target.device_id),
            report,
        }
        .into());
    }
    let base = run_assessment(&inputs.bom, &inputs.rules, db, &inputs.method, &inputs.options)?;
    let scaled = run_assessment(&target, &inputs.rules, db, &inputs.method, &inputs.options)?;
    warn_all(&scaled.warnings());
    let ratios = impact_ratios(&base.impacts, &scaled.impacts)?;
    let meta = inputs
        .metadata()
        .with("base", &inputs.bom.device_id)
        .with("target", &target.device_id);
    let files = vec![
        (
            format!("{}.bom.json", file_label(&target.device_id)),
            io::to_json_pretty(&target)?,
        ),
        (
            "ratio.csv".to_string(),
            report::ratio_csv(&base.impacts, &scaled.impacts, &ratios, &meta)?,
        ),
        (
            "totals-target.csv".to_string(),
            report::totals_csv(&scaled.impacts, &inputs.method, &meta)?,
        ),
    ];
    write_outputs(&common.out, files)
}

pub struct ValidateArgs {
    pub bom: Option<PathBuf>,
    pub databases: Vec<PathBuf>,
    pub method: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub bounds: Option<PathBuf>,
    pub spec: Option<PathBuf>,
}

/// Loads every given file, reporting all problems before exiting.
pub fn validate(args: ValidateArgs) -> Outcome {
    let mut first: Option<Failure> = None;
    let mut fail = |e: Error| {
        eprintln!("{e}");
        first.get_or_insert(Failure::Core(e));
    };
    let mut checked = 0usize;

    let bom = args.bom.as_deref().and_then(|p| {
        checked += 1;
        io::load_bom(p).map_err(&mut fail).ok()
    });
    let mut databases = Vec::new();
    for p in &args.databases {
        checked += 1;
        if let Ok(db) = io::load_database(p).map_err(&mut fail) {
            databases.push(db);
        }
    }
    if let Some(p) = &args.method {
        checked += 1;
        let _ = io::load_method(p).map_err(&mut fail);
    }
    let rules_path = args
        .rules
        .clone()
        .or_else(|| args.bom.clone().filter(|_| !databases.is_empty()));
    if let Some(p) = &rules_path {
        if args.rules.is_some() {
            checked += 1;
        }
        match io::read_json::<RuleSet>(p) {
            Ok(rules) => {
                let refs: Vec<&BackgroundDatabase> = databases.iter().collect();
                let report = validate_rules(&rules, &refs);
                if !report.is_empty() {
                    fail(Error::Invalid {
                        subject: format!("{} (rules)", p.display()),
                        report,
                    });
                }
            }
            Err(e) => fail(e),
        }
    }
    if let Some(p) = &args.scenarios {
        checked += 1;
        let _ = io::load_scenarios(p).map_err(&mut fail);
    }
    if let Some(p) = &args.bounds {
        checked += 1;
        let _ = io::load_bounds(p).map_err(&mut fail);
    }
    if let Some(p) = &args.spec {
        checked += 1;
        match io::load_extrapolation(p) {
            Ok(spec) => {
                if let Some(bom) = &bom {
                    if let Err(e) = extrapolate_bom(bom, &spec) {
                        fail(e);
                    }
                }
            }
            Err(e) => fail(e),
        }
    }
    if checked == 0 {
        return Err(Failure::Usage("validate needs at least one file".into()));
    }
    match first {
        Some(f) => Err(f),
        None => {
            println!("{checked} file(s) valid");
            Ok(())
        }
    }
}
