use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use hankel_id::{summarize, DistSummary};

use crate::error::{BenchError, Result};
use crate::estimator::EstimatorKind;
use crate::records::{read_records, TrialRecord};

/// Summary tables for one record file.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Noise levels, highest SNR first.
    pub levels: Vec<f64>,
    pub estimators: Vec<String>,
    /// `(level index, estimator index)` -> mean fit over finite scores.
    pub mean_fit: BTreeMap<(usize, usize), f64>,
    /// Estimator index -> mean wall time over all its rows.
    pub mean_wall: BTreeMap<usize, f64>,
    pub boxplots: BTreeMap<(usize, usize), DistSummary>,
    /// `(level index, estimator index)` -> rows without a finite fit.
    pub failures: BTreeMap<(usize, usize), usize>,
}

impl Report {
    pub fn mean_fit_of(&self, snr_db: f64, estimator: &str) -> Option<f64> {
        let l = self.levels.iter().position(|&s| s == snr_db)?;
        let e = self.estimators.iter().position(|n| n == estimator)?;
        self.mean_fit.get(&(l, e)).copied()
    }

    pub fn mean_wall_of(&self, estimator: &str) -> Option<f64> {
        let e = self.estimators.iter().position(|n| n == estimator)?;
        self.mean_wall.get(&e).copied()
    }

    /// Mean-fit table: one row per noise level, one column per estimator.
    pub fn fit_table_csv(&self) -> String {
        let mut out = String::from("snr_db");
        for e in &self.estimators {
            out.push(',');
            out.push_str(e);
        }
        out.push('\n');
        for (l, level) in self.levels.iter().enumerate() {
            out.push_str(&level.to_string());
            for e in 0..self.estimators.len() {
                out.push(',');
                if let Some(v) = self.mean_fit.get(&(l, e)) {
                    let _ = write!(out, "{v:.4}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn time_table_csv(&self) -> String {
        let mut out = String::from("estimator,mean_wall_s\n");
        for (e, name) in self.estimators.iter().enumerate() {
            if let Some(v) = self.mean_wall.get(&e) {
                let _ = writeln!(out, "{name},{v:.6}");
            }
        }
        out
    }

    pub fn boxplot_csv(&self) -> String {
        let mut out =
            String::from("snr_db,estimator,count,failures,min,q1,median,q3,max,mean,outliers\n");
        for ((l, e), s) in &self.boxplots {
            let outliers: Vec<String> = s.outliers.iter().map(|v| format!("{v:.4}")).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
                self.levels[*l],
                self.estimators[*e],
                s.count,
                self.failures.get(&(*l, *e)).copied().unwrap_or(0),
                s.min,
                s.q1,
                s.median,
                s.q3,
                s.max,
                s.mean,
                outliers.join(";")
            );
        }
        out
    }
}

fn estimator_rank(name: &str) -> (usize, String) {
    let idx = EstimatorKind::ALL
        .iter()
        .position(|k| k.name() == name)
        .unwrap_or(EstimatorKind::ALL.len());
    (idx, name.to_string())
}

/// Group records by noise level and estimator. Pure function of the input.
pub fn summarize_records(records: &[TrialRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let mut levels: Vec<f64> = Vec::new();
    let mut estimators: Vec<String> = Vec::new();
    for r in records {
        if !levels.contains(&r.snr_db) {
            levels.push(r.snr_db);
        }
        if !estimators.contains(&r.estimator) {
            estimators.push(r.estimator.clone());
        }
    }
    levels.sort_by(|a, b| b.total_cmp(a));
    estimators.sort_by_key(|n| estimator_rank(n));

    let mut fits: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut walls: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut failures: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in records {
        let l = levels
            .iter()
            .position(|&s| s == r.snr_db)
            .expect("level collected");
        let e = estimators
            .iter()
            .position(|n| *n == r.estimator)
            .expect("estimator collected");
        if r.fit.is_finite() {
            fits.entry((l, e)).or_default().push(r.fit);
        } else {
            *failures.entry((l, e)).or_default() += 1;
        }
        walls.entry(e).or_default().push(r.wall_s);
    }

    let mut mean_fit = BTreeMap::new();
    let mut boxplots = BTreeMap::new();
    for (key, values) in &fits {
        let s = summarize(values)?;
        mean_fit.insert(*key, s.mean);
        boxplots.insert(*key, s);
    }
    let mean_wall = walls
        .into_iter()
        .map(|(e, w)| (e, w.iter().sum::<f64>() / w.len() as f64))
        .collect();
    Ok(Report {
        levels,
        estimators,
        mean_fit,
        mean_wall,
        boxplots,
        failures,
    })
}

/// Read a record file and summarize it.
pub fn report(records_path: &Path) -> Result<Report> {
    summarize_records(&read_records(records_path)?)
}

/// Write `fit_table.csv`, `time_table.csv` and `boxplot.csv` into `dir`.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("fit_table.csv"), report.fit_table_csv())?;
    std::fs::write(dir.join("time_table.csv"), report.time_table_csv())?;
    std::fs::write(dir.join("boxplot.csv"), report.boxplot_csv())?;
    Ok(())
}
