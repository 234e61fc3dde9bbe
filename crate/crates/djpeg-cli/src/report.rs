//! Machine-first JSON reports. Every report carries a versioned `schema`
//! field so downstream tooling can detect format changes.

use serde::{Deserialize, Serialize};

use djpeg_core::model::{EpochStats, NetworkConfig, TrainConfig};

pub const REPORT_SCHEMA: &str = "djpeg-report/1";
pub const MATRIX_SCHEMA: &str = "djpeg-matrix/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochEntry {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_acc: Option<f64>,
}

impl From<&EpochStats> for EpochEntry {
    fn from(e: &EpochStats) -> Self {
        EpochEntry {
            epoch: e.epoch,
            lr: e.lr,
            train_loss: e.train_loss,
            train_acc: e.train_acc,
            val_acc: e.val_acc,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    /// The invoking command line, echoed verbatim.
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qf1: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qf2: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<EpochEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_val_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
}

impl RunReport {
    pub fn new(command: String, seed: u64) -> Self {
        RunReport {
            schema: REPORT_SCHEMA.to_string(),
            command,
            seed,
            network: None,
            training: None,
            qf1: None,
            qf2: None,
            curves: Vec::new(),
            best_epoch: None,
            best_val_acc: None,
            test_accuracy: None,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        for e in &self.curves {
            anyhow::ensure!(
                ok(e.train_acc) && e.val_acc.map_or(true, ok),
                "accuracy outside [0,1] at epoch {}",
                e.epoch
            );
        }
        anyhow::ensure!(
            self.test_accuracy.map_or(true, ok),
            "test accuracy outside [0,1]"
        );
        Ok(())
    }
}

/// Table of accuracies over the QF grid; the diagonal is never present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub schema: String,
    pub qf_grid: Vec<u32>,
    /// cells[(qf1, qf2)] keyed as "qf1_qf2"
    pub cells: std::collections::BTreeMap<String, f64>,
    /// Mean of the off-diagonal cells of each QF2 column.
    pub column_averages: std::collections::BTreeMap<String, f64>,
}

impl AccuracyMatrix {
    pub fn from_cells(cells: &[(u32, u32, f64)]) -> anyhow::Result<Self> {
        let grid = djpeg_core::dataset::QF_GRID.to_vec();
        let mut map = std::collections::BTreeMap::new();
        for &(qf1, qf2, acc) in cells {
            anyhow::ensure!(qf1 != qf2, "diagonal cell ({qf1},{qf2}) rejected");
            anyhow::ensure!(
                grid.contains(&qf1) && grid.contains(&qf2),
                "cell ({qf1},{qf2}) off the QF grid"
            );
            anyhow::ensure!((0.0..=1.0).contains(&acc), "accuracy {acc} outside [0,1]");
            map.insert(format!("{qf1}_{qf2}"), acc);
        }
        let mut column_averages = std::collections::BTreeMap::new();
        for &qf2 in &grid {
            let col: Vec<f64> = grid
                .iter()
                .filter(|&&qf1| qf1 != qf2)
                .filter_map(|&qf1| map.get(&format!("{qf1}_{qf2}")).copied())
                .collect();
            if !col.is_empty() {
                column_averages.insert(
                    qf2.to_string(),
                    col.iter().sum::<f64>() / col.len() as f64,
                );
            }
        }
        Ok(AccuracyMatrix {
            schema: MATRIX_SCHEMA.to_string(),
            qf_grid: grid,
            cells: map,
            column_averages,
        })
    }

    /// Plain-text table for terminals; data stays in the JSON.
    pub fn render(&self) -> String {
        let mut out = String::from("qf1\\qf2");
        for qf2 in &self.qf_grid {
            out.push_str(&format!("{qf2:>9}"));
        }
        out.push('\n');
        for qf1 in &self.qf_grid {
            out.push_str(&format!("{qf1:>7}"));
            for qf2 in &self.qf_grid {
                match self.cells.get(&format!("{qf1}_{qf2}")) {
                    Some(acc) => out.push_str(&format!("{:>9.4}", acc)),
                    None => out.push_str(&format!("{:>9}", "-")),
                }
            }
            out.push('\n');
        }
        out.push_str(&format!("{:>7}", "avg"));
        for qf2 in &self.qf_grid {
            match self.column_averages.get(&qf2.to_string()) {
                Some(a) => out.push_str(&format!("{:>9.4}", a)),
                None => out.push_str(&format!("{:>9}", "-")),
            }
        }
        out.push('\n');
        out
    }
}
