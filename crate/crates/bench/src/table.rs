//! Versioned CSV files: a `#schema=<name>/<version>` line, then a header row.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{BenchError, Result};

pub const METRICS_SCHEMA: &str = "lvrep-metrics/1";
pub const SUMMARY_SCHEMA: &str = "lvrep-summary/1";
pub const CURVE_SCHEMA: &str = "lvrep-curve/1";
pub const BONUS_SCHEMA: &str = "lvrep-bonus/1";
pub const RESIDUAL_SCHEMA: &str = "lvrep-residuals/1";

pub fn to_csv<T: Serialize>(schema: &str, rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| BenchError::Schema(e.to_string()))?;
    let mut out = format!("#schema={schema}\n");
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    Ok(out)
}

/// Headers only, for tables that may be empty.
pub fn header_csv(schema: &str, headers: &[&str]) -> String {
    format!("#schema={schema}\n{}\n", headers.join(","))
}

pub fn from_csv<T: DeserializeOwned>(schema: &str, text: &str) -> Result<Vec<T>> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let found = first
        .trim_end_matches('\r')
        .strip_prefix("#schema=")
        .ok_or_else(|| BenchError::Schema("missing `#schema=` line".into()))?;
    if found != schema {
        return Err(BenchError::Schema(format!("found `{found}`, expected `{schema}`")));
    }
    csv::Reader::from_reader(rest.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| BenchError::Schema(e.to_string())))
        .collect()
}
