//! Rendering of command results as JSON documents or multi-table CSV.

use serde::Serialize;
use serde_json::{Map, Value};
use thermoform::Table;

use crate::config::{Format, JobConfig, SCHEMA};

pub const OUTPUT_SCHEMA: &str = "thermoform-output/1";

/// Structured result plus the tables used for CSV emission.
pub struct Report {
    pub result: Value,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new<T: Serialize>(result: &T) -> serde_json::Result<Self> {
        Ok(Report {
            result: serde_json::to_value(result)?,
            tables: Vec::new(),
        })
    }

    pub fn with_tables(mut self, tables: impl IntoIterator<Item = Table>) -> Self {
        self.tables.extend(tables);
        self
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'static str,
    command: &'a str,
    config: &'a JobConfig,
    result: &'a Value,
}

pub fn render(command: &str, config: &JobConfig, report: &Report) -> Result<String, crate::AppError> {
    match config.format() {
        Format::Json => {
            let env = Envelope {
                schema: OUTPUT_SCHEMA,
                command,
                config,
                result: &report.result,
            };
            let mut s = serde_json::to_string_pretty(&env)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => render_csv(command, config, report),
    }
}

fn render_csv(command: &str, config: &JobConfig, report: &Report) -> Result<String, crate::AppError> {
    let mut out = format!("# {SCHEMA} {}\n# command={command}\n", serde_json::to_string(config)?);
    let mut summary = Table::new("summary", &["key", "value"]);
    let mut pairs = Vec::new();
    flatten("", &report.result, &mut pairs);
    for (k, v) in pairs {
        summary.push(vec![k, v]);
    }
    for t in std::iter::once(&summary).chain(&report.tables) {
        out.push_str(&format!("\n# table={}\n", t.name));
        out.push_str(&t.to_csv_string()?);
    }
    Ok(out)
}

/// Dotted key paths for every scalar reachable through objects; arrays are left to the tables.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => flatten_object(prefix, m, out),
        Value::Array(_) => {}
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn flatten_object(prefix: &str, m: &Map<String, Value>, out: &mut Vec<(String, String)>) {
    for (k, v) in m {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        flatten(&key, v, out);
    }
}
