//! Per-variant learning curves from a metrics file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::runner::MetricsRow;
use crate::table::{from_csv, to_csv, CURVE_SCHEMA, METRICS_SCHEMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurveRow {
    pub episode: usize,
    pub runs: usize,
    pub mean_return: f64,
    pub std_error: f64,
}

/// Mean and standard error of the return across runs, per variant and
/// episode. Values are sorted before summation, so row order in the input
/// does not affect the output.
pub fn curves(metrics_csv: &str) -> Result<BTreeMap<String, Vec<CurveRow>>> {
    let rows: Vec<MetricsRow> = from_csv(METRICS_SCHEMA, metrics_csv)?;
    let mut grouped: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        grouped
            .entry(r.variant)
            .or_default()
            .entry(r.episode)
            .or_default()
            .push(r.episode_return);
    }
    Ok(grouped
        .into_iter()
        .map(|(variant, episodes)| {
            let curve = episodes
                .into_iter()
                .map(|(episode, mut v)| {
                    v.sort_by(f64::total_cmp);
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let std_error = if v.len() > 1 {
                        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
                    } else {
                        0.0
                    };
                    CurveRow {
                        episode,
                        runs: v.len(),
                        mean_return: mean,
                        std_error,
                    }
                })
                .collect();
            (variant, curve)
        })
        .collect())
}

/// `(file name, contents)` for every variant.
pub fn curve_files(metrics_csv: &str) -> Result<Vec<(String, String)>> {
    curves(metrics_csv)?
        .into_iter()
        .map(|(variant, rows)| Ok((format!("curve_{variant}.csv"), to_csv(CURVE_SCHEMA, &rows)?)))
        .collect()
}
