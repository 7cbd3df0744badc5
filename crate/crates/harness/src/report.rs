//! Merge result CSVs into a summary JSON: per cell, seed-aggregated mean,
//! standard deviation, and count.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::sweep::{read_csv, Row};

/// Aggregate of one (task, representation, axis, axis_value, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub task: String,
    pub representation: String,
    pub axis: String,
    pub axis_value: String,
    pub metric_name: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
}

/// Group rows by cell key and aggregate across seeds. Keys are sorted, so
/// the output is deterministic regardless of input order.
pub fn summarize(rows: &[Row]) -> Summary {
    let mut groups: BTreeMap<(String, String, String, String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((
                r.task.clone(),
                r.representation.clone(),
                r.axis.clone(),
                r.axis_value.clone(),
                r.metric_name.clone(),
            ))
            .or_default()
            .push(r.metric_value);
    }
    let cells = groups
        .into_iter()
        .map(|((task, representation, axis, axis_value, metric_name), values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            CellSummary {
                task,
                representation,
                axis,
                axis_value,
                metric_name,
                mean,
                std: var.sqrt(),
                count: values.len(),
            }
        })
        .collect();
    Summary { cells }
}

/// Merge CSV files and write the summary JSON.
pub fn report(inputs: &[&Path], out: &Path) -> Result<Summary> {
    let mut rows = Vec::new();
    for path in inputs {
        rows.extend(read_csv(path)?);
    }
    if rows.is_empty() {
        return Err(HarnessError::Runtime("no rows in any input CSV".into()));
    }
    let summary = summarize(&rows);
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| HarnessError::Runtime(format!("serialize summary: {e}")))?;
    std::fs::write(out, json)
        .map_err(|e| HarnessError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    Ok(summary)
}
