use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use hankel_id::estimators::least_squares_estimate;
use hankel_id::model::build_regression;
use hankel_id::{
    cv_nuclear, sparseva_nuclear, sparseva_reweighted, DataRecord, EpsilonRule, EstimateResult,
    LambdaSearch, ModelStructure, ReweightOptions, SolverOptions,
};

use crate::error::{BenchError, Result};

/// Estimation share of a record used by cross-validation.
pub const CV_SPLIT: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "CV-FIR-N")]
    CvFirN,
    #[serde(rename = "CV-ARX-N")]
    CvArxN,
    #[serde(rename = "SPe-FIR-N")]
    SpeFirN,
    #[serde(rename = "SPe-FIR-RN")]
    SpeFirRn,
    #[serde(rename = "SPe-ARX-N")]
    SpeArxN,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Ls,
        EstimatorKind::CvFirN,
        EstimatorKind::CvArxN,
        EstimatorKind::SpeFirN,
        EstimatorKind::SpeFirRn,
        EstimatorKind::SpeArxN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "LS",
            EstimatorKind::CvFirN => "CV-FIR-N",
            EstimatorKind::CvArxN => "CV-ARX-N",
            EstimatorKind::SpeFirN => "SPe-FIR-N",
            EstimatorKind::SpeFirRn => "SPe-FIR-RN",
            EstimatorKind::SpeArxN => "SPe-ARX-N",
        }
    }

    pub fn is_arx(self) -> bool {
        matches!(self, EstimatorKind::CvArxN | EstimatorKind::SpeArxN)
    }

    /// Run the estimator on one record. `fir` and `arx` are the model
    /// structures to use for the FIR and ARX variants.
    pub fn estimate(
        self,
        record: &DataRecord,
        fir: ModelStructure,
        arx: ModelStructure,
        opts: &SolverOptions,
    ) -> hankel_id::Result<EstimateResult> {
        let structure = if self.is_arx() { arx } else { fir };
        match self {
            EstimatorKind::Ls => Ok(least_squares_estimate(&build_regression(
                record, structure,
            )?)),
            EstimatorKind::CvFirN | EstimatorKind::CvArxN => {
                cv_nuclear(record, structure, CV_SPLIT, &LambdaSearch::default(), opts)
            }
            EstimatorKind::SpeFirN | EstimatorKind::SpeArxN => sparseva_nuclear(
                &build_regression(record, structure)?,
                EpsilonRule::Pec,
                opts,
            ),
            EstimatorKind::SpeFirRn => sparseva_reweighted(
                &build_regression(record, structure)?,
                EpsilonRule::Pec,
                &ReweightOptions::default(),
                opts,
            ),
        }
    }

    /// Parse a comma-separated list such as `LS,SPe-FIR-N`.
    pub fn parse_list(list: &str) -> Result<Vec<EstimatorKind>> {
        let kinds = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        if kinds.is_empty() {
            return Err(BenchError::Config("empty estimator list".into()));
        }
        Ok(kinds)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                BenchError::Config(format!(
                    "unknown estimator {s:?}; expected one of {}",
                    EstimatorKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}
