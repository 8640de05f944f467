use std::io::Write;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Report values within 1e-9 of an integer as that integer, so exact
/// information counts print as `250` rather than `249.99999999999997`.
pub fn snap(x: f64) -> Value {
    let r = x.round();
    if (x - r).abs() < 1e-9 && r.abs() < 9.0e15 {
        Value::from(r as i64)
    } else {
        Value::from(x)
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes a flat report object: `key=value` lines, one JSON document, or a
/// header line plus one value line. Nested values are written as compact JSON.
pub fn emit(
    report: &Map<String, Value>,
    format: Format,
    out: &mut impl Write,
) -> std::io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)
        }
        Format::Text => {
            for (k, v) in report {
                writeln!(out, "{k}={}", scalar(v))?;
            }
            Ok(())
        }
        Format::Csv => {
            let keys: Vec<String> = report.keys().map(|k| csv_field(k)).collect();
            let values: Vec<String> = report.values().map(|v| csv_field(&scalar(v))).collect();
            writeln!(out, "{}", keys.join(","))?;
            writeln!(out, "{}", values.join(","))
        }
    }
}
