//! Hankel embedding, nuclear norm and the reweighting update.
//!
//! A parameter block `theta` of odd length `n = 2m - 1` is embedded as the
//! square `m x m` Hankel matrix `H(theta)[i][j] = theta[i + j]` (0-based).
//!
//! Reweighting works with weight factors `L = (W + delta I)^{-1/2}`. For
//! symmetric positive-definite `A = L1^2`, `B = L2^2` the semidefinite program
//!
//! ```text
//! min  1/2 [Tr(A W1) + Tr(B W2)]   s.t.  [[W1, X], [X^T, W2]] >= 0
//! ```
//!
//! has optimal value `||L1 X L2||_*`, attained by [`optimal_weights`]. This is
//! what lets the solvers work with weighted nuclear norms instead of LMIs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HankelSpec {
    n: usize,
}

impl HankelSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n % 2 == 0 {
            return Err(Error::Structure(format!(
                "Hankel block length {n} must be a positive odd integer"
            )));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Side of the square Hankel matrix, `(n + 1) / 2`.
    pub fn side(&self) -> usize {
        (self.n + 1) / 2
    }
}

/// Weight factors `(L1, L2)`, each symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
}

impl WeightPair {
    pub fn new(l1: DMatrix<f64>, l2: DMatrix<f64>) -> Result<Self> {
        for (name, l) in [("L1", &l1), ("L2", &l2)] {
            if !l.is_square() {
                return Err(Error::Argument(format!("{name} must be square")));
            }
            if asymmetry(l) > 1e-12 * (1.0 + l.amax()) {
                return Err(Error::Argument(format!("{name} must be symmetric")));
            }
            let min_eig = SymmetricEigen::new(symmetrize(l)).eigenvalues.min();
            if !(min_eig > 0.0) {
                return Err(Error::Argument(format!(
                    "{name} must be positive definite (min eigenvalue {min_eig:e})"
                )));
            }
        }
        if l1.nrows() != l2.nrows() {
            return Err(Error::Argument("L1 and L2 sizes differ".into()));
        }
        Ok(Self { l1, l2 })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            l1: DMatrix::identity(m, m),
            l2: DMatrix::identity(m, m),
        }
    }

    pub fn side(&self) -> usize {
        self.l1.nrows()
    }

    /// `L1 X L2`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.l1 * x * &self.l2
    }
}

pub fn hankel(theta: &[f64], spec: HankelSpec) -> Result<DMatrix<f64>> {
    if theta.len() != spec.len() {
        return Err(Error::Argument(format!(
            "theta has length {} but the Hankel spec expects {}",
            theta.len(),
            spec.len()
        )));
    }
    let m = spec.side();
    Ok(DMatrix::from_fn(m, m, |i, j| theta[i + j]))
}

/// Adjoint of [`hankel`]: anti-diagonal sums.
pub fn hankel_adjoint(m_mat: &DMatrix<f64>, spec: HankelSpec) -> Result<Vec<f64>> {
    let m = spec.side();
    if m_mat.shape() != (m, m) {
        return Err(Error::Argument(format!(
            "expected a {m}x{m} matrix, got {:?}",
            m_mat.shape()
        )));
    }
    let mut out = vec![0.0; spec.len()];
    for j in 0..m {
        for i in 0..m {
            out[i + j] += m_mat[(i, j)];
        }
    }
    Ok(out)
}

pub fn singular_values(x: &DMatrix<f64>) -> DVector<f64> {
    let mut s = x.clone().svd(false, false).singular_values;
    s.as_mut_slice()
        .sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn nuclear_norm(x: &DMatrix<f64>) -> f64 {
    x.clone().svd(false, false).singular_values.sum()
}

/// Singular-value soft thresholding, the prox of `tau * ||.||_*`.
pub fn svt(x: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    svt_with_rank(x, tau).0
}

/// [`svt`] plus the number of singular values that survived.
pub fn svt_with_rank(x: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, usize) {
    if tau <= 0.0 {
        return (x.clone(), x.nrows().min(x.ncols()));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - tau;
        if shrunk > 0.0 {
            rank += 1;
            out += shrunk * u.column(k) * v_t.row(k);
        }
    }
    (out, rank)
}

/// `(W + delta I)^{-1/2}` for symmetric positive semidefinite `W`.
pub fn inv_sqrt_psd(w: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    if !w.is_square() {
        return Err(Error::Argument("W must be square".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("delta = {delta} must be positive")));
    }
    if asymmetry(w) > SYMMETRY_TOL * (1.0 + w.amax()) {
        return Err(Error::Argument("W must be symmetric".into()));
    }
    let eig = SymmetricEigen::new(symmetrize(w));
    // tiny negative eigenvalues from round-off are clipped to zero
    let scale = eig
        .eigenvalues
        .map(|lam| 1.0 / (lam.max(0.0) + delta).sqrt());
    let q = &eig.eigenvectors;
    Ok(symmetrize(
        &(q * DMatrix::from_diagonal(&scale) * q.transpose()),
    ))
}

/// Minimizers `(W1, W2)` of `Tr(L1^2 W1) + Tr(L2^2 W2)` subject to
/// `[[W1, X], [X^T, W2]] >= 0`.
///
/// With `U S V^T = svd(L1 X L2)`: `W1 = L1^{-1} U S U^T L1^{-1}` and
/// `W2 = L2^{-1} V S V^T L2^{-1}`.
pub fn optimal_weights(
    x: &DMatrix<f64>,
    weights: &WeightPair,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let l1_inv = spd_inverse(&weights.l1)?;
    let l2_inv = spd_inverse(&weights.l2)?;
    let svd = weights.apply(x).svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v = svd
        .v_t
        .as_ref()
        .expect("right singular vectors requested")
        .transpose();
    let s = DMatrix::from_diagonal(&svd.singular_values);
    let w1 = &l1_inv * (u * &s * u.transpose()) * &l1_inv;
    let w2 = &l2_inv * (&v * &s * v.transpose()) * &l2_inv;
    Ok((symmetrize(&w1), symmetrize(&w2)))
}

/// One reweighting step: optimal weights for `h_opt` under the current
/// factors, mapped to the next factors `(W + delta I)^{-1/2}`.
pub fn weight_update(h_opt: &DMatrix<f64>, weights: &WeightPair, delta: f64) -> Result<WeightPair> {
    let (w1, w2) = optimal_weights(h_opt, weights)?;
    WeightPair::new(inv_sqrt_psd(&w1, delta)?, inv_sqrt_psd(&w2, delta)?)
}

fn spd_inverse(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    l.clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| Error::Numerical("weight factor is not positive definite".into()))
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_random_system, impulse_response};
    use crate::rng::Stream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(n: usize) -> HankelSpec {
        HankelSpec::new(n).unwrap()
    }

    fn random_matrix(rng: &mut Stream, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.normal())
    }

    #[test]
    fn hankel_pattern() {
        let h = hankel(&[1.0, 2.0, 3.0, 4.0, 5.0], spec(5)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1., 2., 3., 2., 3., 4., 3., 4., 5.]);
        assert_eq!(h, expected);
        assert_eq!(hankel(&[0.0; 5], spec(5)).unwrap(), DMatrix::zeros(3, 3));
        let e1 = hankel(&[1.0, 0.0, 0.0, 0.0, 0.0], spec(5)).unwrap();
        assert_eq!(e1.sum(), 1.0);
        assert_eq!(e1[(0, 0)], 1.0);
    }

    #[test]
    fn even_length_is_a_structure_error() {
        assert!(matches!(HankelSpec::new(4), Err(Error::Structure(_))));
        assert!(hankel(&[1.0; 3], spec(5)).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(
            hankel_adjoint(&eye, spec(5)).unwrap(),
            vec![1., 0., 1., 0., 1.]
        );
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(hankel_adjoint(&ones, spec(3)).unwrap(), vec![1., 2., 1.]);
    }

    #[test]
    fn adjoint_pairing_on_random_instances() {
        let mut rng = Stream::new(17);
        for k in 0..100 {
            let n = 2 * (k % 9) + 1;
            let s = spec(n);
            let theta = rng.normals(n);
            let m = random_matrix(&mut rng, s.side(), s.side());
            let lhs = hankel(&theta, s).unwrap().dot(&m);
            let adj = hankel_adjoint(&m, s).unwrap();
            let rhs: f64 = theta.iter().zip(&adj).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn nuclear_norm_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        assert_abs_diff_eq!(nuclear_norm(&d), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nuclear_norm(&DMatrix::identity(2, 2)), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn nuclear_norm_matches_eigen_oracle() {
        let mut rng = Stream::new(4);
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 5, 5);
            let eig = SymmetricEigen::new(x.transpose() * &x);
            let oracle: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
            assert_abs_diff_eq!(nuclear_norm(&x), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn svt_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let out = svt(&d, 2.0);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!((out - expected).amax() < 1e-14);
        let mut rng = Stream::new(2);
        let x = random_matrix(&mut rng, 4, 4);
        assert_eq!(svt(&x, 0.0), x);
    }

    #[test]
    fn svt_beats_random_perturbations() {
        let mut rng = Stream::new(31);
        for _ in 0..10 {
            let x = random_matrix(&mut rng, 4, 4);
            let tau = rng.uniform(0.1, 2.0);
            let f = |z: &DMatrix<f64>| tau * nuclear_norm(z) + 0.5 * (z - &x).norm_squared();
            let z = svt(&x, tau);
            let best = f(&z);
            for _ in 0..100 {
                let scale = rng.uniform(1e-3, 0.5);
                let dz = random_matrix(&mut rng, 4, 4) * scale;
                assert!(best <= f(&(&z + dz)) + 1e-12);
            }
        }
    }

    #[test]
    fn inv_sqrt_examples() {
        let r = inv_sqrt_psd(&DMatrix::zeros(3, 3), 4.0).unwrap();
        assert!((r - DMatrix::identity(3, 3) * 0.5).amax() < 1e-15);
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0]));
        let r = inv_sqrt_psd(&w, 1.0).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]));
        assert!((r - expected).amax() < 1e-15);
    }

    #[test]
    fn inv_sqrt_multiplies_back() {
        let mut rng = Stream::new(9);
        for _ in 0..20 {
            let g = random_matrix(&mut rng, 5, 3);
            let w = &g * g.transpose();
            let delta = rng.uniform(1e-3, 1.0);
            let r = inv_sqrt_psd(&w, delta).unwrap();
            let shifted = &w + DMatrix::identity(5, 5) * delta;
            let back = &r * shifted * &r;
            assert!((back - DMatrix::identity(5, 5)).amax() < 1e-10);
        }
    }

    #[test]
    fn inv_sqrt_rejects_bad_input() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(inv_sqrt_psd(&asym, 1.0).is_err());
        assert!(inv_sqrt_psd(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn weight_update_examples() {
        let delta = 0.25;
        let next = weight_update(&DMatrix::zeros(3, 3), &WeightPair::identity(3), delta).unwrap();
        assert!((next.l1 - DMatrix::identity(3, 3) * 2.0).amax() < 1e-14);
        assert!((next.l2 - DMatrix::identity(3, 3) * 2.0).amax() < 1e-14);

        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let (w1, w2) = optimal_weights(&h, &WeightPair::identity(2)).unwrap();
        assert!((w1 - &h).amax() < 1e-14);
        assert!((w2 - &h).amax() < 1e-14);
    }

    #[test]
    fn weight_pair_validation() {
        assert!(WeightPair::new(DMatrix::identity(2, 2), DMatrix::identity(3, 3)).is_err());
        let indefinite = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(WeightPair::new(indefinite, DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn hankel_rank_equals_system_order() {
        let mut rng = Stream::new(77);
        for order in 1..=6 {
            let sys = generate_random_system(order, 0.9, &mut rng).unwrap();
            let g = impulse_response(&sys, 35);
            let s = singular_values(&hankel(&g, spec(35)).unwrap());
            let numerical = s.iter().filter(|&&v| v >= 1e-8 * s[0]).count();
            assert_eq!(numerical, order);
        }
    }

    proptest! {
        #[test]
        fn svt_is_nonexpansive(
            a in prop::collection::vec(-3.0f64..3.0, 9),
            b in prop::collection::vec(-3.0f64..3.0, 9),
            tau in 0.0f64..2.0,
        ) {
            let x = DMatrix::from_vec(3, 3, a);
            let y = DMatrix::from_vec(3, 3, b);
            let d = (svt(&x, tau) - svt(&y, tau)).norm();
            prop_assert!(d <= (x - y).norm() + 1e-12);
        }

        #[test]
        fn hankel_round_trips_through_adjoint_counts(theta in prop::collection::vec(-5.0f64..5.0, 7)) {
            let s = spec(7);
            let adj = hankel_adjoint(&hankel(&theta, s).unwrap(), s).unwrap();
            // anti-diagonal k of a 4x4 matrix has min(k+1, 7-k) entries
            for (k, (a, t)) in adj.iter().zip(&theta).enumerate() {
                let count = (k + 1).min(7 - k) as f64;
                prop_assert!((a - count * t).abs() < 1e-12);
            }
        }
    }
}
