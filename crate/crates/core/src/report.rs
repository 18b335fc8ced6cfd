//! CSV emission.
//!
//! Every table starts with `# key=value` comment lines describing how it was
//! produced, followed by a header row. Output is comma-separated, LF
//! terminated and UTF-8; floats use Rust's shortest round-trip formatting so
//! identical inputs give byte-identical files. Undefined cells are empty.

use indexmap::IndexMap;

use crate::assessment::Assessment;
use crate::error::{Error, Result};
use crate::impact::{hotspot_ranking, ComparisonTable};
use crate::model::{CharacterizationMethod, ImpactVector, SCHEMA_VERSION};
use crate::scaling::Stage;
use crate::scenario::{ScenarioTable, SensitivityResult, HOURS_PER_YEAR};

/// Provenance written at the top of every CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub databases: Vec<String>,
    pub method: String,
    pub solver_tolerance: f64,
    /// Extra `key=value` pairs specific to one table.
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(databases: Vec<String>, method: &str, solver_tolerance: f64) -> Self {
        Metadata {
            databases,
            method: method.to_owned(),
            solver_tolerance,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_owned(), value.to_string()));
        self
    }

    fn lines(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: &str| {
            out.push_str("# ");
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        };
        line("tool", &format!("hwlca {}", crate::VERSION));
        line("schemaVersion", SCHEMA_VERSION);
        line("databases", &self.databases.join(";"));
        line("method", &self.method);
        line("hoursPerYear", &fmt_f64(HOURS_PER_YEAR));
        line("solverTolerance", &format!("{:e}", self.solver_tolerance));
        for (k, v) in &self.extra {
            line(k, v);
        }
        out
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Builds one CSV document in memory.
pub struct Table {
    meta: Metadata,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(meta: &Metadata, header: impl IntoIterator<Item = S>) -> Self {
        Table {
            meta: meta.clone(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .flexible(false)
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(format!("cannot write CSV: {e}"));
        writer.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            writer.write_record(row).map_err(csv_err)?;
        }
        let body = writer
            .into_inner()
            .map_err(|e| Error::Data(format!("cannot write CSV: {e}")))?;
        let body = String::from_utf8(body).map_err(|e| Error::Data(format!("CSV is not UTF-8: {e}")))?;
        Ok(self.meta.lines() + &body)
    }
}

fn with_categories<'a>(first: &[&'a str], categories: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    first.iter().copied().chain(categories).map(str::to_owned).collect()
}

fn values<'a>(v: &'a ImpactVector) -> impl Iterator<Item = String> + 'a {
    v.values.values().map(|x| fmt_f64(*x))
}

/// Group × category contributions, with a closing `total` row.
pub fn contributions_csv(a: &Assessment, meta: &Metadata) -> Result<String> {
    let categories = a.impacts.values.keys().map(String::as_str);
    let mut t = Table::new(meta, with_categories(&["group"], categories));
    for (group, row) in &a.contributions.rows {
        t.row(std::iter::once(group.clone()).chain(values(row)));
    }
    t.row(std::iter::once("total".to_string()).chain(values(&a.contributions.total)));
    t.render()
}

pub fn totals_csv(impacts: &ImpactVector, method: &CharacterizationMethod, meta: &Metadata) -> Result<String> {
    let mut t = Table::new(meta, ["category", "abbreviation", "unit", "value"]);
    for (id, v) in &impacts.values {
        let (abbr, unit) = method
            .category(id)
            .map(|c| (c.abbreviation.clone(), c.unit.clone()))
            .unwrap_or_default();
        t.row([id.clone(), abbr, unit, fmt_f64(*v)]);
    }
    t.render()
}

pub fn uncharacterized_csv(a: &Assessment, meta: &Metadata) -> Result<String> {
    let mut t = Table::new(meta, ["flowId", "amount"]);
    for flow in &a.uncharacterized {
        t.row([flow.clone(), fmt_f64(a.lci.inventory.get(flow))]);
    }
    t.render()
}

pub fn cutoff_csv(a: &Assessment, meta: &Metadata) -> Result<String> {
    let mut t = Table::new(meta, ["componentId", "databaseId", "reason"]);
    for c in &a.resolution.cutoff {
        t.row([c.component_id.clone(), c.database_id.clone(), c.reason.clone()]);
    }
    t.render()
}

fn stage_str(stage: Stage) -> &'static str {
    match stage {
        Stage::Production => "production",
        Stage::Transport => "transport",
    }
}

/// Impacts per (component, stage) and the group each one is reported under.
pub fn attribution_csv(a: &Assessment, meta: &Metadata) -> Result<String> {
    let categories = a.impacts.values.keys().map(String::as_str);
    let mut t = Table::new(meta, with_categories(&["componentId", "stage", "group"], categories));
    for (source, v) in &a.source_impacts {
        t.row(
            [
                source.component_id.clone(),
                stage_str(source.stage).to_string(),
                a.grouping.label(source).to_string(),
            ]
            .into_iter()
            .chain(values(v)),
        );
    }
    t.render()
}

pub fn hotspots_csv(a: &Assessment, meta: &Metadata) -> Result<String> {
    let mut t = Table::new(meta, ["category", "rank", "group", "share", "value"]);
    for category in a.impacts.values.keys() {
        let ranking = hotspot_ranking(&a.contributions, category)?;
        for (rank, (group, share)) in ranking.entries.iter().enumerate() {
            let value = a.contributions.rows[group].values[category];
            t.row([
                category.clone(),
                (rank + 1).to_string(),
                group.clone(),
                fmt_f64(*share),
                fmt_f64(value),
            ]);
        }
    }
    t.render()
}

/// Demand and scaling vectors of the inventory solve.
pub fn solver_dump_csv(a: &Assessment, meta: &Metadata) -> Result<String> {
    let r = &a.lci.report;
    let meta = meta
        .clone()
        .with("route", format!("{:?}", r.route))
        .with("residual", format!("{:e}", r.residual));
    let mut t = Table::new(&meta, ["vector", "processId", "value"]);
    for (name, vector) in [("demand", &r.demand), ("scaling", &r.scaling)] {
        for (p, v) in r.processes.iter().zip(vector) {
            t.row([name.to_string(), p.clone(), fmt_f64(*v)]);
        }
    }
    t.render()
}

pub fn comparison_csv(table: &ComparisonTable, meta: &Metadata) -> Result<String> {
    let meta = meta.clone().with("reference", &table.reference_database_id);
    let mut t = Table::new(
        &meta,
        with_categories(&["database"], table.categories.iter().map(String::as_str)),
    );
    for (db, ratios) in &table.rows {
        t.row(std::iter::once(db.clone()).chain(ratios.values().map(|r| fmt_opt(*r))));
    }
    t.render()
}

/// Absolute totals of several databases, one row each.
pub fn absolute_csv(results: &IndexMap<String, ImpactVector>, meta: &Metadata) -> Result<String> {
    let categories: Vec<&str> = results
        .values()
        .next()
        .map(|v| v.values.keys().map(String::as_str).collect())
        .unwrap_or_default();
    let mut t = Table::new(meta, with_categories(&["database"], categories));
    for (db, v) in results {
        t.row(std::iter::once(db.clone()).chain(values(v)));
    }
    t.render()
}

/// Production share per scenario and category.
pub fn shares_csv(table: &ScenarioTable, meta: &Metadata) -> Result<String> {
    let categories = table.categories.iter().map(String::as_str);
    let mut t = Table::new(
        meta,
        with_categories(
            &["scenario", "database", "mix", "powerKw", "lifespanYears", "energyKwh"],
            categories,
        ),
    );
    for row in &table.rows {
        let s = &row.scenario;
        t.row(
            [
                s.id.to_string(),
                s.database.clone(),
                s.mix.clone(),
                fmt_f64(s.power_kw),
                fmt_f64(s.lifespan_years),
                fmt_f64(row.energy_kwh),
            ]
            .into_iter()
            .chain(
                table
                    .categories
                    .iter()
                    .map(|c| fmt_opt(row.shares.get(c).copied().flatten())),
            ),
        );
    }
    t.render()
}

/// Production and use-phase impacts behind the share table, long format.
pub fn scenario_impacts_csv(table: &ScenarioTable, meta: &Metadata) -> Result<String> {
    let mut t = Table::new(meta, ["scenario", "category", "production", "use"]);
    for row in &table.rows {
        for c in &table.categories {
            t.row([
                row.scenario.id.to_string(),
                c.clone(),
                fmt_opt(row.production.get(c)),
                fmt_opt(row.use_phase.get(c)),
            ]);
        }
    }
    t.render()
}

pub fn spread_csv(result: &SensitivityResult, meta: &Metadata) -> Result<String> {
    let mut t = Table::new(
        meta,
        ["category", "low", "typical", "high", "upperSpread", "lowerSpread"],
    );
    for s in &result.spreads {
        t.row([
            s.category.clone(),
            fmt_opt(result.low.get(&s.category)),
            fmt_opt(result.typical.get(&s.category)),
            fmt_opt(result.high.get(&s.category)),
            fmt_opt(s.upper),
            fmt_opt(s.lower),
        ]);
    }
    t.render()
}

pub fn ratio_csv(
    base: &ImpactVector,
    target: &ImpactVector,
    ratios: &IndexMap<String, Option<f64>>,
    meta: &Metadata,
) -> Result<String> {
    let mut t = Table::new(meta, ["category", "base", "target", "ratio"]);
    for (c, r) in ratios {
        t.row([c.clone(), fmt_opt(base.get(c)), fmt_opt(target.get(c)), fmt_opt(*r)]);
    }
    t.render()
}

/// Minimal CSV reader for the tables above: skips `#` lines and returns the
/// header plus records.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| Error::Data(format!("cannot read CSV: {e}"));
    let header = reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
