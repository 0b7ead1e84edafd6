use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Column order of the record CSV.
pub const RECORD_HEADER: [&str; 9] = [
    "system_id",
    "order",
    "snr_db",
    "realization",
    "estimator",
    "fit",
    "wall_s",
    "converged",
    "seed",
];

/// One (system, noise level, realization, estimator) cell. A failed
/// estimation keeps its row with `fit = NaN` and `converged = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub system_id: usize,
    pub order: usize,
    pub snr_db: f64,
    pub realization: usize,
    pub estimator: String,
    pub fit: f64,
    pub wall_s: f64,
    pub converged: bool,
    pub seed: u64,
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record(RECORD_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let records = r
        .deserialize()
        .collect::<std::result::Result<Vec<TrialRecord>, _>>()?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(fit: f64) -> TrialRecord {
        TrialRecord {
            system_id: 3,
            order: 2,
            snr_db: 20.0,
            realization: 1,
            estimator: "SPe-FIR-N".into(),
            fit,
            wall_s: 0.25,
            converged: fit.is_finite(),
            seed: 42,
        }
    }

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records(&path, &[sample(81.5), sample(f64::NAN)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), RECORD_HEADER.join(","));
        let back = read_records(&path).unwrap();
        assert_eq!(back[0], sample(81.5));
        assert!(back[1].fit.is_nan());
        assert!(!back[1].converged);
    }

    #[test]
    fn empty_file_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records(&path, &[]).unwrap();
        assert!(read_records(&path).unwrap().is_empty());
    }
}
