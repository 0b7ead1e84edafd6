//! Quadratic minimization over the residual ball `||Y - Phi^T theta||^2 <= rho`.
//!
//! For `P` positive definite write `P = C C^T` and diagonalize
//! `C^{-1} (2 Phi Phi^T) C^{-T} = Q diag(lambda) Q^T`. With `T = C^{-T} Q`
//! both quadratics are diagonal in `w = T^{-1} theta`:
//!
//! ```text
//! theta(mu) = T w(mu),   w_i(mu) = (mu a_i - c_i) / (1 + mu lambda_i)
//! V(mu)     = V_min + 1/2 sum_i (a_i + lambda_i c_i)^2 / (lambda_i (1 + mu lambda_i)^2)
//! ```
//!
//! where `a = T^T (2 Phi Y)` and `c = T^T q`. `V` is decreasing in the
//! multiplier `mu`, and `1 / sqrt(V - V_min)` is close to linear in `mu`,
//! so Newton on that function with a bisection fallback finds the root in a
//! handful of steps.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hankel::symmetrize;

const NULL_EIGEN_REL: f64 = 1e-12;
/// Radius gaps below `BALL_REL * V_min + ROUNDOFF_REL * ||Y||^2` are
/// treated as zero.
const BALL_REL: f64 = 1e-10;
const ROUNDOFF_REL: f64 = 1e-13;
const MAX_BRACKET_DOUBLINGS: usize = 400;
const MAX_ROOT_ITERS: usize = 200;

/// Outcome of one ball-constrained step.
#[derive(Debug, Clone, PartialEq)]
pub struct BallStep {
    pub theta: DVector<f64>,
    /// KKT multiplier of the residual constraint (0 when inactive).
    pub mu: f64,
    pub root_iterations: usize,
}

/// Precomputed pencil for a fixed `P`, `Phi`, `Y`.
#[derive(Debug, Clone)]
pub(crate) struct BallGeometry {
    t: DMatrix<f64>,
    lambdas: DVector<f64>,
    a: DVector<f64>,
    null_mask: Vec<bool>,
    v_min: f64,
    y_energy: f64,
}

impl BallGeometry {
    pub(crate) fn new(
        p: &DMatrix<f64>,
        gram: &DMatrix<f64>,
        phi_y: &DVector<f64>,
        phi: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<Self> {
        let chol = symmetrize(p)
            .cholesky()
            .ok_or_else(|| Error::Numerical("ball step: P is not positive definite".into()))?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(p.nrows(), p.nrows()))
            .ok_or_else(|| Error::Numerical("ball step: singular Cholesky factor".into()))?;
        let pencil = symmetrize(&(&l_inv * (gram * 2.0) * l_inv.transpose()));
        let eig = SymmetricEigen::new(pencil);
        let t = l_inv.transpose() * &eig.eigenvectors;
        let lambdas = eig.eigenvalues.map(|l| l.max(0.0));
        let cutoff = NULL_EIGEN_REL * lambdas.max().max(f64::MIN_POSITIVE);
        let null_mask: Vec<bool> = lambdas.iter().map(|&l| l <= cutoff).collect();
        let a = t.tr_mul(&(phi_y * 2.0));

        let mut geom = Self {
            t,
            lambdas,
            a,
            null_mask,
            v_min: 0.0,
            y_energy: y.norm_squared(),
        };
        // V at the limit point is exact regardless of the null components
        let w_inf = geom.limit_w(&DVector::zeros(p.nrows()));
        let theta_inf = &geom.t * w_inf;
        geom.v_min = (y - phi.tr_mul(&theta_inf)).norm_squared();
        Ok(geom)
    }

    /// `Ok(true)` when the ball of radius `rho` has collapsed onto the
    /// least-squares set, `Err` when it misses it.
    pub(crate) fn is_singleton(&self, rho: f64) -> Result<bool> {
        let tol = BALL_REL * self.v_min + ROUNDOFF_REL * self.y_energy;
        let gap = rho - self.v_min;
        if gap < -tol || rho.is_nan() {
            return Err(Error::Infeasible {
                rho,
                v_ls: self.v_min,
            });
        }
        Ok(gap <= tol.max(NULL_EIGEN_REL * rho))
    }

    fn limit_w(&self, c: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.a.len(), |i, _| {
            if self.null_mask[i] {
                -c[i]
            } else {
                self.a[i] / self.lambdas[i]
            }
        })
    }

    fn w_at(&self, c: &DVector<f64>, mu: f64) -> DVector<f64> {
        DVector::from_fn(self.a.len(), |i, _| {
            if self.null_mask[i] {
                -c[i]
            } else {
                (mu * self.a[i] - c[i]) / (1.0 + mu * self.lambdas[i])
            }
        })
    }

    /// `(V(mu) - V_min, dV/dmu)`.
    fn gap(&self, d2: &[f64], mu: f64) -> (f64, f64) {
        let mut g = 0.0;
        let mut dg = 0.0;
        for (i, &d2i) in d2.iter().enumerate() {
            if self.null_mask[i] {
                continue;
            }
            let lam = self.lambdas[i];
            let s = 1.0 + mu * lam;
            g += 0.5 * d2i / (lam * s * s);
            dg -= d2i / (s * s * s);
        }
        (g, dg)
    }

    /// Minimize `1/2 theta^T P theta + q^T theta` over the ball of radius
    /// `rho`.
    pub(crate) fn step(&self, q: &DVector<f64>, rho: f64) -> Result<BallStep> {
        let c = self.t.tr_mul(q);
        let target = rho - self.v_min;
        if self.is_singleton(rho)? {
            return Ok(BallStep {
                theta: &self.t * self.limit_w(&c),
                mu: f64::INFINITY,
                root_iterations: 0,
            });
        }

        let d2: Vec<f64> = (0..c.len())
            .map(|i| {
                let d = self.a[i] + self.lambdas[i] * c[i];
                d * d
            })
            .collect();
        let (g0, _) = self.gap(&d2, 0.0);
        if g0 <= target {
            return Ok(BallStep {
                theta: &self.t * self.w_at(&c, 0.0),
                mu: 0.0,
                root_iterations: 0,
            });
        }

        // phi(mu) = 1/sqrt(gap) - 1/sqrt(target), increasing in mu
        let inv_target = 1.0 / target.sqrt();
        let phi = |mu: f64| {
            let (g, dg) = self.gap(&d2, mu);
            let f = 1.0 / g.sqrt() - inv_target;
            let df = -0.5 * dg / (g * g.sqrt());
            (f, df, g)
        };

        let lam_max = self.lambdas.max().max(f64::MIN_POSITIVE);
        let mut lo = 0.0;
        let mut hi = 1.0 / lam_max;
        let mut doublings = 0;
        while phi(hi).0 < 0.0 {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
                return Err(Error::Numerical(format!(
                    "ball step: cannot bracket the multiplier (rho = {rho:e}, \
                     V_min = {:e}, V(0) - V_min = {g0:e}, last mu = {hi:e})",
                    self.v_min
                )));
            }
        }

        let mut mu = hi;
        let mut iters = 0;
        for _ in 0..MAX_ROOT_ITERS {
            iters += 1;
            let (f, df, g) = phi(mu);
            if (g - target).abs() <= 1e-12 * target {
                break;
            }
            if f < 0.0 {
                lo = mu;
            } else {
                hi = mu;
            }
            if hi - lo <= 1e-15 * hi {
                mu = hi;
                break;
            }
            let newton = mu - f / df;
            mu = if df > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }

        Ok(BallStep {
            theta: &self.t * self.w_at(&c, mu),
            mu,
            root_iterations: doublings + iters,
        })
    }
}

/// Minimize `1/2 theta^T P theta + q^T theta` subject to
/// `||Y - Phi^T theta||^2 <= rho`.
///
/// Returns the unconstrained minimizer with `mu = 0` when it is feasible;
/// otherwise the KKT point `theta(mu) = (P + 2 mu Phi Phi^T)^{-1} (2 mu Phi Y - q)`
/// with `V(theta(mu)) = rho`.
pub fn qcqp_ball_step(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    rho: f64,
) -> Result<BallStep> {
    let n = p.nrows();
    if !p.is_square() || q.len() != n || phi.nrows() != n || phi.ncols() != y.len() {
        return Err(Error::Argument("ball step: inconsistent dimensions".into()));
    }
    if !(rho >= 0.0) {
        return Err(Error::Argument(format!("rho = {rho} must be >= 0")));
    }
    let gram = phi * phi.transpose();
    let phi_y = phi * y;
    BallGeometry::new(p, &gram, &phi_y, phi, y)?.step(q, rho)
}
