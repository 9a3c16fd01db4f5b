use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Counts;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub predictor: String,
    pub delta: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_days: Option<usize>,
    pub counts: Counts,
    pub used_correct_pct: f64,
    pub used_wrong_pct: f64,
    pub used_missed_pct: f64,
    pub unused_correct_pct: f64,
    pub unused_wrong_pct: f64,
}

fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

impl ReportRow {
    pub fn new(predictor: &str, delta: u32, train_days: Option<usize>, counts: Counts) -> Self {
        let (used, unused) = (counts.used(), counts.unused());
        ReportRow {
            predictor: predictor.to_string(),
            delta,
            train_days,
            counts,
            used_correct_pct: pct(counts.used_correct, used),
            used_wrong_pct: pct(counts.used_wrong, used),
            used_missed_pct: pct(counts.used_missed, used),
            unused_correct_pct: pct(counts.unused_correct, unused),
            unused_wrong_pct: pct(counts.unused_wrong, unused),
        }
    }
}

/// Pooled percentages per predictor for one experiment setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    /// Distinguishes the reports of one experiment, e.g. `d030`.
    pub label: String,
    pub seed: u64,
    pub config_digest: String,
    pub rows: Vec<ReportRow>,
    /// Hyper-parameters of every predictor, one entry per household.
    pub predictors: BTreeMap<String, Vec<serde_json::Value>>,
}

impl Report {
    pub fn row(&self, predictor: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.predictor == predictor)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "predictor,delta,used_correct_pct,used_wrong_pct,used_missed_pct,unused_correct_pct,unused_wrong_pct\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
                r.predictor,
                r.delta,
                r.used_correct_pct,
                r.used_wrong_pct,
                r.used_missed_pct,
                r.unused_correct_pct,
                r.unused_wrong_pct
            )
            .unwrap();
        }
        out
    }

    pub fn file_stem(&self) -> String {
        let digest: String = self.config_digest.chars().take(12).collect();
        format!("{}_{}_{digest}_seed{}", self.experiment, self.label, self.seed)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<[PathBuf; 2]> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{}.csv", self.file_stem()));
        let json = dir.join(format!("{}.json", self.file_stem()));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        fs::write(&json, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&json, e))?;
        Ok([csv, json])
    }
}
