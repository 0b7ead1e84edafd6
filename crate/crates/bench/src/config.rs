use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::estimator::EstimatorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Coloured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_systems: usize,
    pub orders: OrderRange,
    pub pole_radius_max: f64,
    /// Samples per record.
    pub n: usize,
    pub fir_n: usize,
    pub arx_na: usize,
    pub arx_nb: usize,
    pub noise_kind: NoiseKind,
    pub snr_levels_db: Vec<f64>,
    pub realizations_per_level: usize,
    pub estimators: Vec<EstimatorKind>,
    pub master_seed: u64,
    pub output: PathBuf,
    /// Write measured wall times; when false the `wall_s` column is 0 so
    /// record files are byte-reproducible.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ExperimentConfig {
    /// Full-scale white-noise experiment: 150 systems of order 1..10, four
    /// noise levels, three realizations each.
    fn default() -> Self {
        Self {
            num_systems: 150,
            orders: OrderRange { min: 1, max: 10 },
            pole_radius_max: 0.9,
            n: 450,
            fir_n: 35,
            arx_na: 35,
            arx_nb: 35,
            noise_kind: NoiseKind::White,
            snr_levels_db: vec![20.0, 10.0, 6.0, 3.0],
            realizations_per_level: 3,
            estimators: vec![
                EstimatorKind::Ls,
                EstimatorKind::CvFirN,
                EstimatorKind::SpeFirN,
                EstimatorKind::SpeFirRn,
            ],
            master_seed: 2016,
            output: PathBuf::from("results"),
            record_wall_time: true,
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale grid: 10 systems, the four default noise levels, one
    /// realization each.
    pub fn desk() -> Self {
        Self {
            num_systems: 10,
            realizations_per_level: 1,
            output: PathBuf::from("results-desk"),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.num_systems == 0 {
            return fail("num_systems must be >= 1".into());
        }
        let OrderRange { min, max } = self.orders;
        if min < 1 || max > 10 || min > max {
            return fail(format!("orders {min}..={max} must lie within 1..=10"));
        }
        if !(self.pole_radius_max > 0.1 && self.pole_radius_max < 1.0) {
            return fail(format!(
                "pole_radius_max {} outside (0.1, 1)",
                self.pole_radius_max
            ));
        }
        for (name, v) in [
            ("fir_n", self.fir_n),
            ("arx_na", self.arx_na),
            ("arx_nb", self.arx_nb),
        ] {
            if v == 0 || v % 2 == 0 {
                return fail(format!("{name} = {v} must be a positive odd integer"));
            }
        }
        let max_lag = self.fir_n.max(self.arx_na).max(self.arx_nb);
        if self.n <= max_lag {
            return fail(format!(
                "n = {} must exceed the largest lag {max_lag}",
                self.n
            ));
        }
        if self.snr_levels_db.is_empty() || self.snr_levels_db.iter().any(|s| s.is_nan()) {
            return fail("snr_levels_db must be a nonempty list of numbers".into());
        }
        if self.realizations_per_level == 0 {
            return fail("realizations_per_level must be >= 1".into());
        }
        if self.estimators.is_empty() {
            return fail("estimator list is empty".into());
        }
        Ok(())
    }

    pub fn expected_records(&self) -> usize {
        self.num_systems
            * self.snr_levels_db.len()
            * self.realizations_per_level
            * self.estimators.len()
    }
}
