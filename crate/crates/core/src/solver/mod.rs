//! Weighted nuclear-norm regularized least squares.
//!
//! Two problem shapes over one or more Hankel-embedded parameter blocks:
//!
//! ```text
//! penalized:    min ||Y - Phi^T theta||^2 + lambda * sum_b c_b ||L1_b H(theta_b) L2_b||_*
//! constrained:  min sum_b c_b ||L1_b H(theta_b) L2_b||_*   s.t. ||Y - Phi^T theta||^2 <= rho
//! ```
//!
//! Both are solved by ADMM on the splitting `Z_b = L1_b H(theta_b) L2_b`. The
//! `Z` update is singular-value thresholding; the `theta` update is a linear
//! solve (penalized) or a ball-constrained quadratic step (constrained).

mod ball;

use std::ops::Range;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use ball::{qcqp_ball_step, BallStep};

use crate::error::{Error, Result};
use crate::hankel::{hankel, hankel_adjoint, nuclear_norm, svt, HankelSpec, WeightPair};
use crate::model::RegressionData;
use ball::BallGeometry;

/// Ridge added to `Phi Phi^T` when it is numerically singular, relative to
/// its mean diagonal.
pub const RIDGE_REL: f64 = 1e-10;

const BALANCE_RATIO: f64 = 10.0;
const BALANCE_FACTOR: f64 = 2.0;

/// One Hankel-embedded slice of `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub range: Range<usize>,
    pub spec: HankelSpec,
    pub weights: WeightPair,
    pub multiplier: f64,
}

impl Block {
    pub fn new(range: Range<usize>, weights: WeightPair, multiplier: f64) -> Result<Self> {
        let spec = HankelSpec::new(range.len())?;
        if weights.side() != spec.side() {
            return Err(Error::Argument(format!(
                "block of length {} needs {}x{} weights, got {}",
                range.len(),
                spec.side(),
                spec.side(),
                weights.side()
            )));
        }
        if !(multiplier >= 0.0 && multiplier.is_finite()) {
            return Err(Error::Argument(format!(
                "block multiplier {multiplier} must be finite and >= 0"
            )));
        }
        Ok(Self {
            range,
            spec,
            weights,
            multiplier,
        })
    }

    pub fn unweighted(range: Range<usize>) -> Result<Self> {
        let side = HankelSpec::new(range.len())?.side();
        Self::new(range, WeightPair::identity(side), 1.0)
    }

    /// `L1 H(theta_b) L2`.
    pub fn forward(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let slice = &theta.as_slice()[self.range.clone()];
        let h = hankel(slice, self.spec).expect("block length checked at construction");
        self.weights.apply(&h)
    }

    /// Adjoint of [`Block::forward`], accumulated into `out`.
    pub fn adjoint_into(&self, m: &DMatrix<f64>, out: &mut DVector<f64>) {
        let back = hankel_adjoint(&self.weights.apply(m), self.spec)
            .expect("block shape checked at construction");
        for (k, v) in self.range.clone().zip(back) {
            out[k] += v;
        }
    }

    pub fn nuclear(&self, theta: &DVector<f64>) -> f64 {
        nuclear_norm(&self.forward(theta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Penalized { lambda: f64 },
    Constrained { rho: f64 },
}

/// A regression, its Hankel blocks and the problem shape.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub regression: &'a RegressionData,
    pub blocks: Vec<Block>,
    pub mode: Mode,
    /// Starting point; defaults to least squares.
    pub warm_start: Option<DVector<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(regression: &'a RegressionData, blocks: Vec<Block>, mode: Mode) -> Result<Self> {
        let n = regression.num_params();
        let mut ranges: Vec<Range<usize>> = blocks.iter().map(|b| b.range.clone()).collect();
        ranges.sort_by_key(|r| r.start);
        let mut next = 0;
        for r in &ranges {
            if r.start != next {
                return Err(Error::Argument(format!(
                    "block ranges must be disjoint and cover 0..{n} (gap or overlap at {next})"
                )));
            }
            next = r.end;
        }
        if next != n {
            return Err(Error::Argument(format!(
                "block ranges cover 0..{next} but theta has {n} entries"
            )));
        }
        match mode {
            Mode::Penalized { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                return Err(Error::Argument(format!("lambda = {lambda} must be >= 0")));
            }
            Mode::Constrained { rho } if !(rho >= 0.0 && rho.is_finite()) => {
                return Err(Error::Argument(format!("rho = {rho} must be >= 0")));
            }
            _ => {}
        }
        Ok(Self {
            regression,
            blocks,
            mode,
            warm_start: None,
        })
    }

    /// Identity weights, unit multipliers, blocks taken from the model
    /// structure.
    pub fn unweighted(regression: &'a RegressionData, mode: Mode) -> Result<Self> {
        let blocks = regression
            .structure
            .blocks()
            .into_iter()
            .map(Block::unweighted)
            .collect::<Result<Vec<_>>>()?;
        Self::new(regression, blocks, mode)
    }

    pub fn with_warm_start(mut self, theta: DVector<f64>) -> Self {
        self.warm_start = Some(theta);
        self
    }

    /// `sum_b c_b ||L1_b H(theta_b) L2_b||_*`.
    pub fn nuclear_objective(&self, theta: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.multiplier * b.nuclear(theta))
            .sum()
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        match self.mode {
            Mode::Penalized { lambda } => {
                self.regression.residual(theta) + lambda * self.nuclear_objective(theta)
            }
            Mode::Constrained { .. } => self.nuclear_objective(theta),
        }
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<(DVector<f64>, SolverReport)> {
        Admm::new(self, opts)?.run()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Initial ADMM penalty.
    pub beta: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            abs_tol: 1e-6,
            rel_tol: 1e-5,
            max_iter: 2000,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let positive = [self.beta, self.abs_tol, self.rel_tol]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.max_iter < 1 {
            return Err(Error::Argument(format!("invalid solver options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    /// Problem objective at the returned `theta`.
    pub objective: f64,
    /// Weighted nuclear part of the objective (without `lambda`).
    pub nuclear_objective: f64,
    /// `V_N(theta)`.
    pub residual: f64,
    pub converged: bool,
    pub wall_time_seconds: f64,
    /// Final ADMM penalty after residual balancing.
    pub beta: f64,
    /// Norm of `2 Phi (Phi^T theta - Y) + sum_b A_b^*(G_b)` with the
    /// subgradient witness `G_b` read off the scaled duals (penalized only).
    pub stationarity: Option<f64>,
    /// Final multiplier of the residual constraint (constrained only).
    pub ball_multiplier: Option<f64>,
}

/// Penalized solve; see the module docs.
pub fn solve_penalized(
    regression: &RegressionData,
    blocks: Vec<Block>,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, SolverReport)> {
    Problem::new(regression, blocks, Mode::Penalized { lambda })?.solve(opts)
}

/// Residual-ball constrained solve; see the module docs.
pub fn solve_constrained(
    regression: &RegressionData,
    blocks: Vec<Block>,
    rho: f64,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, SolverReport)> {
    Problem::new(regression, blocks, Mode::Constrained { rho })?.solve(opts)
}

/// Least squares with the ridge fallback for singular `Phi Phi^T`.
/// Returns the ridge that was added, if any.
pub(crate) fn least_squares_theta(reg: &RegressionData) -> (DVector<f64>, Option<f64>) {
    let gram = &reg.phi * reg.phi.transpose();
    let rhs = &reg.phi * &reg.y;
    if let Some(chol) = well_conditioned_cholesky(&gram) {
        return (chol.solve(&rhs), None);
    }
    let n = gram.nrows();
    let ridge = RIDGE_REL * gram.trace().max(f64::MIN_POSITIVE) / n as f64;
    let regularized = &gram + DMatrix::identity(n, n) * ridge;
    let theta = regularized
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(n));
    (theta, Some(ridge))
}

fn well_conditioned_cholesky(gram: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = gram.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    // cond(gram) = cond(L)^2 is roughly (hi/lo)^2
    (lo > 0.0 && (lo / hi).powi(2) > 1e-14).then_some(chol)
}

enum ThetaStep {
    Penalized(Cholesky<f64, Dyn>),
    Constrained(BallGeometry),
}

struct Admm<'p, 'a> {
    problem: &'p Problem<'a>,
    opts: &'p SolverOptions,
    gram: DMatrix<f64>,
    phi_y: DVector<f64>,
    /// `sum_b A_b^* A_b`, block diagonal and positive definite.
    hankel_gram: DMatrix<f64>,
}

impl<'p, 'a> Admm<'p, 'a> {
    fn new(problem: &'p Problem<'a>, opts: &'p SolverOptions) -> Result<Self> {
        opts.validate()?;
        let reg = problem.regression;
        let n = reg.num_params();
        let mut hankel_gram = DMatrix::zeros(n, n);
        for block in &problem.blocks {
            for k in block.range.clone() {
                let mut unit = DVector::zeros(n);
                unit[k] = 1.0;
                let mut col = DVector::zeros(n);
                block.adjoint_into(&block.forward(&unit), &mut col);
                hankel_gram.set_column(k, &col);
            }
        }
        Ok(Self {
            problem,
            opts,
            gram: &reg.phi * reg.phi.transpose(),
            phi_y: &reg.phi * &reg.y,
            hankel_gram: crate::hankel::symmetrize(&hankel_gram),
        })
    }

    fn theta_step(&self, beta: f64) -> Result<ThetaStep> {
        let reg = self.problem.regression;
        match self.problem.mode {
            Mode::Penalized { .. } => {
                let k = &self.gram * 2.0 + &self.hankel_gram * beta;
                k.cholesky().map(ThetaStep::Penalized).ok_or_else(|| {
                    Error::Numerical("penalized theta step is not positive definite".into())
                })
            }
            Mode::Constrained { .. } => Ok(ThetaStep::Constrained(BallGeometry::new(
                &(&self.hankel_gram * beta),
                &self.gram,
                &self.phi_y,
                &reg.phi,
                &reg.y,
            )?)),
        }
    }

    fn thresholds(&self) -> Vec<f64> {
        let scale = match self.problem.mode {
            Mode::Penalized { lambda } => lambda,
            Mode::Constrained { .. } => 1.0,
        };
        self.problem
            .blocks
            .iter()
            .map(|b| scale * b.multiplier)
            .collect()
    }

    fn report(
        &self,
        theta: &DVector<f64>,
        start: Instant,
        iterations: usize,
        histories: (Vec<f64>, Vec<f64>),
        converged: bool,
        beta: f64,
    ) -> SolverReport {
        SolverReport {
            iterations,
            primal_residuals: histories.0,
            dual_residuals: histories.1,
            objective: self.problem.objective(theta),
            nuclear_objective: self.problem.nuclear_objective(theta),
            residual: self.problem.regression.residual(theta),
            converged,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            beta,
            stationarity: None,
            ball_multiplier: None,
        }
    }

    /// Closed-form answers for the degenerate cases: no penalty, a ball
    /// containing the origin, or a ball collapsed onto least squares.
    fn shortcut(&self, start: Instant) -> Result<Option<(DVector<f64>, SolverReport)>> {
        let reg = self.problem.regression;
        let n = reg.num_params();
        let thresholds = self.thresholds();
        match self.problem.mode {
            Mode::Penalized { .. } if thresholds.iter().all(|&t| t == 0.0) => {
                let (theta, _) = least_squares_theta(reg);
                let mut report = self.report(&theta, start, 0, (vec![], vec![]), true, 0.0);
                let grad = (&self.gram * &theta - &self.phi_y) * 2.0;
                report.stationarity = Some(grad.norm());
                Ok(Some((theta, report)))
            }
            Mode::Constrained { rho } => {
                if reg.y.norm_squared() <= rho {
                    let theta = DVector::zeros(n);
                    let mut report = self.report(&theta, start, 0, (vec![], vec![]), true, 0.0);
                    report.ball_multiplier = Some(0.0);
                    return Ok(Some((theta, report)));
                }
                Ok(None)
            }
            _ => Ok(None),
        }
    }

    fn run(&self) -> Result<(DVector<f64>, SolverReport)> {
        let start = Instant::now();
        if let Some(done) = self.shortcut(start)? {
            return Ok(done);
        }
        let reg = self.problem.regression;
        let blocks = &self.problem.blocks;
        let n = reg.num_params();
        let opts = self.opts;
        let thresholds = self.thresholds();

        let mut beta = opts.beta;
        let mut step = self.theta_step(beta)?;

        let mut theta = match &self.problem.warm_start {
            Some(t) if t.len() == n => t.clone(),
            _ => least_squares_theta(reg).0,
        };
        if let (ThetaStep::Constrained(geom), Mode::Constrained { rho }) =
            (&step, self.problem.mode)
        {
            if geom.is_singleton(rho)? {
                // singleton ball: the least-squares point is the only candidate
                let theta = geom.step(&DVector::zeros(n), rho)?.theta;
                let mut report = self.report(&theta, start, 0, (vec![], vec![]), true, beta);
                report.ball_multiplier = Some(f64::INFINITY);
                return Ok((theta, report));
            }
        }

        let mut z: Vec<DMatrix<f64>> = blocks.iter().map(|b| b.forward(&theta)).collect();
        let mut u: Vec<DMatrix<f64>> = z.iter().map(|m| m.map(|_| 0.0)).collect();
        let p_dim: usize = z.iter().map(|m| m.len()).sum();

        let mut primal_hist = Vec::new();
        let mut dual_hist = Vec::new();
        let mut converged = false;
        let mut mu = 0.0;
        let mut iterations = 0;

        for _ in 0..opts.max_iter {
            iterations += 1;

            let mut back = DVector::zeros(n);
            for (b, (zb, ub)) in blocks.iter().zip(z.iter().zip(&u)) {
                b.adjoint_into(&(zb - ub), &mut back);
            }
            theta = match &step {
                ThetaStep::Penalized(chol) => chol.solve(&(&self.phi_y * 2.0 + &back * beta)),
                ThetaStep::Constrained(geom) => {
                    let rho = match self.problem.mode {
                        Mode::Constrained { rho } => rho,
                        Mode::Penalized { .. } => unreachable!(),
                    };
                    let out = geom.step(&(-&back * beta), rho)?;
                    mu = out.mu;
                    out.theta
                }
            };

            let mut primal_sq = 0.0;
            let mut forward_sq = 0.0;
            let mut z_sq = 0.0;
            let mut dz_back = DVector::zeros(n);
            for (k, b) in blocks.iter().enumerate() {
                let ax = b.forward(&theta);
                let z_new = svt(&(&ax + &u[k]), thresholds[k] / beta);
                let r = &ax - &z_new;
                b.adjoint_into(&(&z_new - &z[k]), &mut dz_back);
                u[k] += &r;
                primal_sq += r.norm_squared();
                forward_sq += ax.norm_squared();
                z_sq += z_new.norm_squared();
                z[k] = z_new;
            }
            let primal = primal_sq.sqrt();
            let dual = beta * dz_back.norm();
            primal_hist.push(primal);
            dual_hist.push(dual);

            let mut dual_back = DVector::zeros(n);
            for (b, ub) in blocks.iter().zip(&u) {
                b.adjoint_into(ub, &mut dual_back);
            }
            let eps_primal = (p_dim as f64).sqrt() * opts.abs_tol
                + opts.rel_tol * forward_sq.sqrt().max(z_sq.sqrt());
            let eps_dual =
                (n as f64).sqrt() * opts.abs_tol + opts.rel_tol * beta * dual_back.norm();
            if primal <= eps_primal && dual <= eps_dual {
                converged = true;
                break;
            }

            let rescale = if primal > BALANCE_RATIO * dual {
                BALANCE_FACTOR
            } else if dual > BALANCE_RATIO * primal {
                1.0 / BALANCE_FACTOR
            } else {
                1.0
            };
            if rescale != 1.0 {
                beta *= rescale;
                for ub in u.iter_mut() {
                    *ub /= rescale;
                }
                step = self.theta_step(beta)?;
            }
        }

        let mut report = self.report(
            &theta,
            start,
            iterations,
            (primal_hist, dual_hist),
            converged,
            beta,
        );
        match self.problem.mode {
            Mode::Penalized { .. } => {
                let mut g = (&self.gram * &theta - &self.phi_y) * 2.0;
                let mut witness = DVector::zeros(n);
                for (b, ub) in blocks.iter().zip(&u) {
                    b.adjoint_into(&(ub * beta), &mut witness);
                }
                g += witness;
                report.stationarity = Some(g.norm());
            }
            Mode::Constrained { .. } => report.ball_multiplier = Some(mu),
        }
        Ok((theta, report))
    }
}
