use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::RegressionCase;
use crate::error::Result;

/// One aggregated line of a study's result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub study: String,
    pub case: RegressionCase,
    pub n: usize,
    pub r: f64,
    pub kappa: f64,
    #[serde(rename = "T")]
    pub sweeps: usize,
    pub rule: String,
    pub trials: usize,
    pub mean_mse: f64,
    pub stderr_mse: f64,
    pub connected_fraction: f64,
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "study",
            "case",
            "n",
            "r",
            "kappa",
            "T",
            "rule",
            "trials",
            "mean_mse",
            "stderr_mse",
            "connected_fraction",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
