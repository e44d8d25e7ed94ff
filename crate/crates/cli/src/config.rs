//! Scenario documents. Values are layered: built-in defaults, then the file, then
//! `--set path=value` overrides. Everything goes through a TOML table so that overrides,
//! sweeps and manifests share one code path.

use std::path::Path;

use scuba_core::metrics::BatteryModel;
use scuba_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::RunManifest;

/// Output switches of a scenario document (`[output]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    /// Write `trace.ndjson` (single replica only).
    pub trace: bool,
    /// Write SVG plots where a command has any.
    pub plot: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            trace: false,
            plot: true,
        }
    }
}

/// A resolved scenario document: the scenario itself plus the keys that are not part of
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub replicas: u32,
    pub battery: BatteryModel,
    pub output: OutputOptions,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            replicas: 1,
            battery: BatteryModel::default(),
            output: OutputOptions::default(),
        }
    }
}

/// Keys of a scenario document that are not scenario fields.
const FILE_KEYS: [&str; 3] = ["replicas", "battery", "output"];

fn deserialize<T: serde::de::DeserializeOwned>(value: toml::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let field = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner.clone(),
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{inner}"),
        };
        CliError::config(field, e.into_inner().to_string())
    })
}

impl ScenarioFile {
    /// Builds and validates a document from a table holding any subset of the keys.
    pub fn from_table(mut table: toml::Table) -> Result<Self> {
        let mut file = ScenarioFile::default();
        if let Some(v) = table.remove("replicas") {
            file.replicas = deserialize(v, "replicas")?;
        }
        if let Some(v) = table.remove("battery") {
            file.battery = deserialize(v, "battery")?;
        }
        if let Some(v) = table.remove("output") {
            file.output = deserialize(v, "output")?;
        }
        file.scenario = deserialize(toml::Value::Table(table), "")?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(CliError::config("replicas", "at least one replica is required"));
        }
        if !(self.battery.capacity_wh > 0.0) {
            return Err(CliError::config("battery.capacity_wh", "must be positive"));
        }
        if !(self.battery.baseline_days > 0.0) {
            return Err(CliError::config("battery.baseline_days", "must be positive"));
        }
        if self.output.trace && self.replicas != 1 {
            return Err(CliError::config("output.trace", "tracing needs replicas = 1"));
        }
        self.scenario.validate()?;
        Ok(())
    }

    /// The full document, every default spelled out.
    pub fn to_table(&self) -> Result<toml::Table> {
        let mut t = toml::Table::try_from(&self.scenario)
            .map_err(|e| CliError::config("", format!("scenario is not representable: {e}")))?;
        t.insert("replicas".into(), toml::Value::Integer(self.replicas as i64));
        t.insert("battery".into(), as_table(&self.battery)?);
        t.insert("output".into(), as_table(&self.output)?);
        Ok(t)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.to_table()?).map_err(|e| CliError::config("", e.to_string()))
    }
}

fn as_table<T: Serialize>(v: &T) -> Result<toml::Value> {
    toml::Table::try_from(v)
        .map(toml::Value::Table)
        .map_err(|e| CliError::config("", e.to_string()))
}

pub fn parse_document(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| CliError::config(origin, format!("not a valid TOML document: {e}")))
}

/// A TOML literal, or the raw text as a string when it is not one (`mode=llm`).
pub fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets `value` at dotted `path`, creating tables on the way.
pub fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(path, "empty path segment"));
    }
    let (last, init) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for (i, key) in init.iter().enumerate() {
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(parts[..=i].join("."), "is a value, not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn get_path<'a>(table: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
    let mut parts = path.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Applies one `path=value` assignment.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not of the form path=value")))?;
    set_path(table, path.trim(), parse_value(raw.trim()))
}

/// Reads a scenario document, or the scenario snapshot of a run manifest (`.json`).
pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::config(path.display().to_string(), format!("not a run manifest: {e}")))?;
        return m.file().to_table();
    }
    parse_document(&text, &path.display().to_string())
}

/// Defaults, then `path` if given, then `overrides` in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ScenarioFile> {
    let mut table = match path {
        Some(p) => read_table(p)?,
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    ScenarioFile::from_table(table)
}

/// Whether `key` names a document-level setting rather than a scenario field.
pub fn is_file_key(key: &str) -> bool {
    FILE_KEYS.contains(&key.split('.').next().unwrap_or(key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(
            ScenarioFile::from_table(toml::Table::new()).unwrap(),
            ScenarioFile::default()
        );
    }

    #[test]
    fn overrides_parse_literals_and_bare_words() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "sl_paging.t_sl_drx=32").unwrap();
        apply_override(&mut t, "mode=llm").unwrap();
        apply_override(&mut t, "power.p_tx = 25.0").unwrap();
        let f = ScenarioFile::from_table(t).unwrap();
        assert_eq!(f.scenario.sl_paging.t_sl_drx, 32);
        assert_eq!(f.scenario.mode, scuba_core::ScubaMode::Llm);
        assert_eq!(f.scenario.power.p_tx, 25.0);
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let t = parse_document("[sl_paging]\nn_sl_poo = 3\n", "x").unwrap();
        match ScenarioFile::from_table(t) {
            Err(CliError::Config { field, reason }) => {
                assert_eq!(field, "sl_paging.n_sl_poo");
                assert!(reason.contains("n_sl_poo"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        let t = parse_document("[battery]\ncapacity_wh = \"big\"\n", "x").unwrap();
        match ScenarioFile::from_table(t) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "battery.capacity_wh"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_table_round_trips() {
        let mut f = ScenarioFile::default();
        f.scenario.imsis = vec![1, 2];
        f.replicas = 3;
        f.output.trace = false;
        let back = ScenarioFile::from_table(f.to_table().unwrap()).unwrap();
        assert_eq!(back, f);
        let text = f.to_toml().unwrap();
        assert_eq!(
            ScenarioFile::from_table(parse_document(&text, "x").unwrap()).unwrap(),
            f
        );
    }
}
