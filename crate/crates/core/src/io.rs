//! Reading and writing the JSON data files.
//!
//! Every file carries a top-level `"schemaVersion": "1"`. Loaders check it
//! before the full parse so a newer file is reported as such instead of as
//! a confusing field error. Parse errors keep serde's line/column position.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_bom, validate_database, validate_method, BackgroundDatabase, BillOfMaterials, CharacterizationMethod,
    ValidationReport, SCHEMA_VERSION,
};
use crate::scaling::RuleSet;
use crate::scenario::{validate_bounds, validate_scenarios, ExtrapolationSpec, ScenarioFile, SensitivityBounds};

#[derive(Deserialize)]
struct Header {
    #[serde(rename = "schemaVersion")]
    schema_version: Option<serde_json::Value>,
}

/// Parses `text` as a versioned data file; `path` is only used in errors.
pub fn from_json_str<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let parse_err = |source| Error::Parse {
        path: path.to_owned(),
        source,
    };
    let header: Header = serde_json::from_str(text).map_err(parse_err)?;
    match header.schema_version {
        Some(serde_json::Value::String(v)) if v == SCHEMA_VERSION => {}
        Some(other) => {
            let found = match other {
                serde_json::Value::String(s) => s,
                v => v.to_string(),
            };
            return Err(Error::Schema {
                path: path.to_owned(),
                found,
            });
        }
        None => {
            return Err(Error::Schema {
                path: path.to_owned(),
                found: "<missing>".into(),
            })
        }
    }
    serde_json::from_str(text).map_err(parse_err)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    from_json_str(&text, path)
}

fn checked<T>(value: T, subject: String, report: ValidationReport) -> Result<T> {
    if report.is_empty() {
        Ok(value)
    } else {
        Err(Error::Invalid { subject, report })
    }
}

pub fn load_bom(path: &Path) -> Result<BillOfMaterials> {
    let bom: BillOfMaterials = read_json(path)?;
    let report = validate_bom(&bom);
    checked(bom, path.display().to_string(), report)
}

pub fn load_database(path: &Path) -> Result<BackgroundDatabase> {
    let db: BackgroundDatabase = read_json(path)?;
    let report = validate_database(&db);
    checked(db, path.display().to_string(), report)
}

pub fn load_method(path: &Path) -> Result<CharacterizationMethod> {
    let method: CharacterizationMethod = read_json(path)?;
    let report = validate_method(&method);
    checked(method, path.display().to_string(), report)
}

/// Rules are parsed only; their validation needs the databases they
/// reference (see [`crate::scaling::validate_rules`]).
pub fn load_rules(path: &Path) -> Result<RuleSet> {
    read_json(path)
}

pub fn load_scenarios(path: &Path) -> Result<ScenarioFile> {
    let file: ScenarioFile = read_json(path)?;
    let report = validate_scenarios(&file);
    checked(file, path.display().to_string(), report)
}

pub fn load_bounds(path: &Path) -> Result<SensitivityBounds> {
    let bounds: SensitivityBounds = read_json(path)?;
    let report = validate_bounds(&bounds);
    checked(bounds, path.display().to_string(), report)
}

pub fn load_extrapolation(path: &Path) -> Result<ExtrapolationSpec> {
    read_json(path)
}

/// Pretty JSON with a trailing newline; stable for identical values.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Data(format!("cannot serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOM: &str = r#"{
  "schemaVersion": "1",
  "deviceId": "d",
  "components": [
    {"id": "fan", "name": "Fan", "category": "fan", "quantity": 2, "attributes": {"mass": 0.3}}
  ]
}"#;

    #[test]
    fn round_trip() {
        let bom: BillOfMaterials = from_json_str(BOM, Path::new("x.json")).unwrap();
        assert_eq!(bom.components[0].attributes.mass, Some(0.3));
        let again: BillOfMaterials = from_json_str(&to_json_pretty(&bom).unwrap(), Path::new("y.json")).unwrap();
        assert_eq!(bom, again);
    }

    #[test]
    fn schema_version_is_checked() {
        let newer = BOM.replace("\"1\"", "\"2\"");
        let err = from_json_str::<BillOfMaterials>(&newer, Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Schema { ref found, .. } if found == "2"), "{err}");
        let missing = BOM.replace("\"schemaVersion\": \"1\",", "");
        assert!(matches!(
            from_json_str::<BillOfMaterials>(&missing, Path::new("x.json")),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_position() {
        let broken = BOM.replace("\"quantity\": 2,", "\"quantity\": 2");
        let err = from_json_str::<BillOfMaterials>(&broken, Path::new("x.json")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(msg.contains("line 5"), "{msg}");
        assert!(msg.contains("column"), "{msg}");
    }
}
