//! Estimation procedures built on the solvers.
//!
//! * [`least_squares`]: plain least squares, `theta_LS = (Phi Phi^T)^{-1} Phi Y`.
//! * [`sparseva_nuclear`]: minimize the Hankel nuclear norm over all
//!   parameters whose residual stays within `(1 + eps) V_N(theta_LS)`.
//! * [`sparseva_reweighted`]: the same constraint with the log-det surrogate,
//!   solved as a sequence of weighted nuclear-norm problems.
//! * [`cv_nuclear`]: penalized nuclear-norm estimate with `lambda` chosen on a
//!   chronological hold-out split and refitted on all data.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hankel::{hankel, inv_sqrt_psd, optimal_weights, singular_values, WeightPair};
use crate::model::{
    arx_impulse_response, build_regression, DataRecord, ModelStructure, RegressionData,
};
use crate::solver::{least_squares_theta, Block, Mode, Problem, SolverOptions, SolverReport};

/// Lower bound on the reweighting constant.
pub const DELTA_FLOOR: f64 = 1e-8;

/// Rule for the residual slack `eps` in `V_N(theta) <= V_N(theta_LS)(1 + eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpsilonRule {
    /// Prediction-error criterion: `(n/N) / (1 - n/N)`.
    Pec,
    /// `2n/N`.
    Aic,
    /// `ln(N) n/N`.
    Bic,
}

impl EpsilonRule {
    pub fn value(self, n: usize, samples: usize) -> Result<f64> {
        epsilon(self, n, samples)
    }
}

pub fn epsilon(rule: EpsilonRule, n: usize, samples: usize) -> Result<f64> {
    if n == 0 || n >= samples {
        return Err(Error::Argument(format!(
            "epsilon needs 0 < n < N (got n = {n}, N = {samples})"
        )));
    }
    let ratio = n as f64 / samples as f64;
    Ok(match rule {
        EpsilonRule::Pec => ratio / (1.0 - ratio),
        EpsilonRule::Aic => 2.0 * ratio,
        EpsilonRule::Bic => (samples as f64).ln() * ratio,
    })
}

/// How the reweighting constant is chosen per block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta {
    Fixed(f64),
    /// Fraction of the largest singular value of `H(theta_LS)` for the block,
    /// floored at [`DELTA_FLOOR`].
    RelativeToLs(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightOptions {
    pub delta: Delta,
    pub max_rounds: usize,
    /// Stop once `||theta_k - theta_{k-1}|| <= round_tol ||theta_{k-1}||`.
    pub round_tol: f64,
}

impl Default for ReweightOptions {
    fn default() -> Self {
        Self {
            delta: Delta::RelativeToLs(1e-2),
            max_rounds: 5,
            round_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tuning {
    None,
    Epsilon(f64),
    Lambda(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub theta: DVector<f64>,
    pub structure: ModelStructure,
    pub reports: Vec<SolverReport>,
    pub tuning: Tuning,
    pub wall_time_seconds: f64,
    /// Reweighted only: the estimate after each round.
    pub round_thetas: Vec<DVector<f64>>,
    /// Reweighted only: `sum_b logdet(W1_b + delta I) + logdet(W2_b + delta I)`
    /// at the weights constructed after each round.
    pub logdet_surrogate: Vec<f64>,
    /// Cross-validation only: `(lambda, validation score)` in evaluation order.
    pub lambda_scores: Vec<(f64, f64)>,
}

impl EstimateResult {
    fn new(theta: DVector<f64>, structure: ModelStructure, tuning: Tuning) -> Self {
        Self {
            theta,
            structure,
            reports: Vec::new(),
            tuning,
            wall_time_seconds: 0.0,
            round_thetas: Vec::new(),
            logdet_surrogate: Vec::new(),
            lambda_scores: Vec::new(),
        }
    }

    /// True when every solver call converged.
    pub fn converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }

    /// First `taps` impulse-response coefficients of the estimated model.
    pub fn impulse_response(&self, taps: usize) -> Vec<f64> {
        match self.structure {
            ModelStructure::Fir { .. } => (0..taps)
                .map(|k| self.theta.get(k).copied().unwrap_or(0.0))
                .collect(),
            ModelStructure::Arx { na, .. } => {
                let theta = self.theta.as_slice();
                arx_impulse_response(&theta[..na], &theta[na..], taps)
            }
        }
    }

    /// Hankel matrices of each parameter block.
    pub fn hankel_blocks(&self) -> Vec<DMatrix<f64>> {
        hankel_blocks(&self.theta, self.structure)
    }
}

fn hankel_blocks(theta: &DVector<f64>, structure: ModelStructure) -> Vec<DMatrix<f64>> {
    structure
        .blocks()
        .into_iter()
        .map(|r| {
            let spec = crate::hankel::HankelSpec::new(r.len()).expect("structure orders are odd");
            hankel(&theta.as_slice()[r], spec).expect("block length matches spec")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub theta: DVector<f64>,
    pub residual: f64,
    /// Ridge added because `Phi Phi^T` was numerically singular.
    pub ridge: Option<f64>,
}

pub fn least_squares(data: &RegressionData) -> LeastSquares {
    let (theta, ridge) = least_squares_theta(data);
    LeastSquares {
        residual: data.residual(&theta),
        theta,
        ridge,
    }
}

/// Least squares wrapped as an [`EstimateResult`].
pub fn least_squares_estimate(data: &RegressionData) -> EstimateResult {
    let start = Instant::now();
    let ls = least_squares(data);
    let mut out = EstimateResult::new(ls.theta, data.structure, Tuning::None);
    out.wall_time_seconds = start.elapsed().as_secs_f64();
    out
}

fn residual_bound(data: &RegressionData, rule: EpsilonRule) -> Result<(LeastSquares, f64, f64)> {
    let eps = epsilon(rule, data.num_params(), data.num_samples())?;
    let ls = least_squares(data);
    let rho = ls.residual * (1.0 + eps);
    Ok((ls, eps, rho))
}

/// Unweighted nuclear norm (both ARX blocks with multiplier 1) under the
/// residual constraint `V_N(theta) <= V_N(theta_LS)(1 + eps)`.
pub fn sparseva_nuclear(
    data: &RegressionData,
    rule: EpsilonRule,
    opts: &SolverOptions,
) -> Result<EstimateResult> {
    let once = ReweightOptions {
        max_rounds: 1,
        ..Default::default()
    };
    sparseva_reweighted(data, rule, &once, opts)
}

/// Reweighted nuclear norm under the same residual constraint.
///
/// Round `k` minimizes `sum_b ||L1_b H(theta_b) L2_b||_*` with
/// `L = (W^k + delta I)^{-1/2}`, starting from identity weights; the next
/// weights are the closed-form minimizers of the weighted trace objective at
/// the new estimate.
pub fn sparseva_reweighted(
    data: &RegressionData,
    rule: EpsilonRule,
    reweight: &ReweightOptions,
    opts: &SolverOptions,
) -> Result<EstimateResult> {
    if reweight.max_rounds < 1 {
        return Err(Error::Argument("max_rounds must be >= 1".into()));
    }
    let start = Instant::now();
    let (ls, eps, rho) = residual_bound(data, rule)?;
    let ranges = data.structure.blocks();
    let deltas: Vec<f64> = hankel_blocks(&ls.theta, data.structure)
        .iter()
        .map(|h| match reweight.delta {
            Delta::Fixed(d) => d,
            Delta::RelativeToLs(frac) => (frac * singular_values(h).max()).max(DELTA_FLOOR),
        })
        .collect();
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Argument("reweighting delta must be positive".into()));
    }

    let mut weights: Vec<WeightPair> = ranges
        .iter()
        .map(|r| WeightPair::identity((r.len() + 1) / 2))
        .collect();
    let mut out = EstimateResult::new(ls.theta.clone(), data.structure, Tuning::Epsilon(eps));
    let mut previous = ls.theta;

    for round in 0..reweight.max_rounds {
        let blocks = ranges
            .iter()
            .zip(&weights)
            .map(|(r, w)| Block::new(r.clone(), w.clone(), 1.0))
            .collect::<Result<Vec<_>>>()?;
        let problem = Problem::new(data, blocks, Mode::Constrained { rho })?
            .with_warm_start(previous.clone());
        let (theta, report) = problem.solve(opts)?;
        out.reports.push(report);
        out.round_thetas.push(theta.clone());

        if reweight.max_rounds > 1 {
            let mut surrogate = 0.0;
            let mut next = Vec::with_capacity(weights.len());
            for ((h, w), &delta) in hankel_blocks(&theta, data.structure)
                .iter()
                .zip(&weights)
                .zip(&deltas)
            {
                let (w1, w2) = optimal_weights(h, w)?;
                surrogate += logdet_shifted(&w1, delta) + logdet_shifted(&w2, delta);
                next.push(WeightPair::new(
                    inv_sqrt_psd(&w1, delta)?,
                    inv_sqrt_psd(&w2, delta)?,
                )?);
            }
            out.logdet_surrogate.push(surrogate);
            weights = next;
        }

        let change = (&theta - &previous).norm();
        let settled =
            round > 0 && change <= reweight.round_tol * previous.norm().max(f64::MIN_POSITIVE);
        previous = theta;
        if settled {
            break;
        }
    }

    out.theta = previous;
    out.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

fn logdet_shifted(w: &DMatrix<f64>, delta: f64) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(crate::hankel::symmetrize(w));
    eig.eigenvalues
        .iter()
        .map(|l| (l.max(0.0) + delta).ln())
        .sum()
}

/// Candidate set for the cross-validated `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSearch {
    /// Exactly these values, no refinement.
    Grid(Vec<f64>),
    /// `points` log-spaced values on `[lo, hi] * s` with
    /// `s = V_N(theta_LS) / max(1, ||H(theta_LS)||_*)` on the estimation part,
    /// followed by `refine_evals` golden-section evaluations in `log lambda`
    /// around the best grid point.
    Scaled {
        points: usize,
        lo: f64,
        hi: f64,
        refine_evals: usize,
    },
}

impl Default for LambdaSearch {
    fn default() -> Self {
        LambdaSearch::Scaled {
            points: 12,
            lo: 1e-4,
            hi: 1e2,
            refine_evals: 8,
        }
    }
}

/// Penalized nuclear-norm estimate with `lambda` chosen by hold-out
/// validation (one-step-ahead squared error), then refitted on all data.
///
/// ARX uses the same `lambda` for both blocks. Ties in the validation score
/// go to the smaller `lambda`.
pub fn cv_nuclear(
    record: &DataRecord,
    structure: ModelStructure,
    split_fraction: f64,
    search: &LambdaSearch,
    opts: &SolverOptions,
) -> Result<EstimateResult> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "split fraction {split_fraction} outside (0, 1)"
        )));
    }
    let start = Instant::now();
    let full = build_regression(record, structure)?;
    let est_samples = (split_fraction * record.len() as f64).floor() as usize;
    let est_cols = est_samples.saturating_sub(structure.max_lag());
    if est_cols <= structure.num_params() || est_cols >= full.num_samples() {
        return Err(Error::InsufficientData {
            samples: est_samples,
            max_lag: structure.max_lag() + structure.num_params(),
        });
    }
    let estimation = full.columns(0..est_cols);
    let validation = full.columns(est_cols..full.num_samples());

    let mut search_state = CvSearch {
        estimation: &estimation,
        validation: &validation,
        opts,
        warm: None,
        scores: Vec::new(),
        reports: Vec::new(),
    };

    match search {
        LambdaSearch::Grid(values) => {
            if values.is_empty() || values.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return Err(Error::Argument(
                    "lambda grid must be nonempty and >= 0".into(),
                ));
            }
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            for lambda in sorted {
                search_state.score(lambda)?;
            }
        }
        &LambdaSearch::Scaled {
            points,
            lo,
            hi,
            refine_evals,
        } => {
            if points < 2 || !(lo > 0.0 && hi > lo) {
                return Err(Error::Argument("invalid scaled lambda grid".into()));
            }
            let ls = least_squares(&estimation);
            let nuclear: f64 = hankel_blocks(&ls.theta, structure)
                .iter()
                .map(crate::hankel::nuclear_norm)
                .sum();
            let s = ls.residual / nuclear.max(1.0);
            let (log_lo, log_hi) = ((lo * s).ln(), (hi * s).ln());
            let step = (log_hi - log_lo) / (points - 1) as f64;
            let grid: Vec<f64> = (0..points)
                .map(|i| (log_lo + step * i as f64).exp())
                .collect();
            for &lambda in &grid {
                search_state.score(lambda)?;
            }
            let best = argmin(&search_state.scores[..points]);
            let a = (log_lo + step * best.saturating_sub(1) as f64).max(log_lo);
            let b = (log_lo + step * (best + 1).min(points - 1) as f64).min(log_hi);
            search_state.golden(a, b, refine_evals)?;
        }
    }

    let chosen = search_state.scores[argmin(&search_state.scores)].0;
    let warm = search_state.warm.take();
    let mut reports = std::mem::take(&mut search_state.reports);
    let lambda_scores = std::mem::take(&mut search_state.scores);

    let mut problem = Problem::unweighted(&full, Mode::Penalized { lambda: chosen })?;
    if let Some(w) = warm {
        problem = problem.with_warm_start(w);
    }
    let (theta, report) = problem.solve(opts)?;
    reports.push(report);

    let mut out = EstimateResult::new(theta, structure, Tuning::Lambda(chosen));
    out.reports = reports;
    out.lambda_scores = lambda_scores;
    out.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Index of the smallest score; ties go to the smaller lambda.
fn argmin(scores: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(lambda, score)) in scores.iter().enumerate().skip(1) {
        let (best_lambda, best_score) = scores[best];
        if score < best_score || (score == best_score && lambda < best_lambda) {
            best = i;
        }
    }
    best
}

struct CvSearch<'d> {
    estimation: &'d RegressionData,
    validation: &'d RegressionData,
    opts: &'d SolverOptions,
    warm: Option<DVector<f64>>,
    scores: Vec<(f64, f64)>,
    reports: Vec<SolverReport>,
}

impl CvSearch<'_> {
    fn score(&mut self, lambda: f64) -> Result<f64> {
        let mut problem = Problem::unweighted(self.estimation, Mode::Penalized { lambda })?;
        if let Some(w) = self.warm.take() {
            problem = problem.with_warm_start(w);
        }
        let (theta, report) = problem.solve(self.opts)?;
        let score = self.validation.residual(&theta);
        self.reports.push(report);
        self.scores.push((lambda, score));
        self.warm = Some(theta);
        Ok(score)
    }

    /// Golden-section search on `log lambda` over `[a, b]` using `evals`
    /// objective evaluations.
    fn golden(&mut self, mut a: f64, mut b: f64, evals: usize) -> Result<()> {
        if evals == 0 || b <= a {
            return Ok(());
        }
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = self.score(c.exp())?;
        if evals == 1 {
            return Ok(());
        }
        let mut fd = self.score(d.exp())?;
        for _ in 2..evals {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.score(c.exp())?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.score(d.exp())?;
            }
        }
        Ok(())
    }
}
