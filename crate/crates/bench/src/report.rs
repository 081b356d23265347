//! Experiment results and their CSV and JSON renderings.

use serde::{Deserialize, Serialize};

use rfda_core::error::Result;

use crate::metrics::MetricsReport;

/// Column order of the summary table.
pub const COLUMNS: [&str; 6] = [
    "Src",
    "Tar100%",
    "TarX%",
    "Node-Adapt",
    "Path-Adapt",
    "Tree-Adapt",
];

/// Per-repeat metrics of one table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnResult {
    pub name: String,
    pub repeats: Vec<MetricsReport>,
}

impl ColumnResult {
    pub fn amr(&self) -> Vec<f64> {
        self.repeats.iter().map(|m| m.avg_miss_rate).collect()
    }

    /// Mean and sample standard deviation of the average miss rate.
    pub fn amr_mean_std(&self) -> (f64, f64) {
        mean_std(&self.amr())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Percentage of the target training pool available for adaptation.
    pub target_percent: f64,
    pub columns: Vec<ColumnResult>,
    /// Structural checks run on adapted forests, all of which passed.
    pub structure_checks: usize,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<&ColumnResult> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Mean average miss rate of a column.
    pub fn mean_amr(&self, name: &str) -> Option<f64> {
        self.column(name).map(|c| c.amr_mean_std().0)
    }
}

/// `(mean, sample std)`; the deviation of a single value is 0.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per experiment; cells are `mean±std` average miss rates in
/// percent, empty for columns that were not run.
pub fn write_csv(reports: &[ExperimentReport], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["experiment".to_string(), "X%".to_string()];
    header.extend(COLUMNS.iter().map(|c| c.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![r.name.clone(), format!("{}", r.target_percent)];
        for col in COLUMNS {
            row.push(match r.column(col) {
                Some(c) => {
                    let (m, s) = c.amr_mean_std();
                    format!("{:.2}±{:.2}", 100.0 * m, 100.0 * s)
                }
                None => String::new(),
            });
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> rfda_core::Error {
    rfda_core::Error::Io(std::io::Error::other(e))
}

pub fn to_json(reports: &[ExperimentReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}
