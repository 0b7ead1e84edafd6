//! Fit scores, numerical rank and boxplot summaries.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hankel::singular_values;

/// Impulse-response fit in percent:
/// `100 (1 - sqrt(sum (g - g_hat)^2 / sum (g - mean g)^2))`.
///
/// 100 means a perfect match; the score is unbounded below.
pub fn fit(g_true: &[f64], g_est: &[f64]) -> Result<f64> {
    if g_true.len() != g_est.len() || g_true.is_empty() {
        return Err(Error::Argument(format!(
            "fit needs equal nonempty lengths (got {} and {})",
            g_true.len(),
            g_est.len()
        )));
    }
    let mean = g_true.iter().sum::<f64>() / g_true.len() as f64;
    let denom: f64 = g_true.iter().map(|g| (g - mean).powi(2)).sum();
    if !(denom > 0.0) {
        return Err(Error::UndefinedFit);
    }
    let num: f64 = g_true.iter().zip(g_est).map(|(g, h)| (g - h).powi(2)).sum();
    Ok(100.0 * (1.0 - (num / denom).sqrt()))
}

/// Number of singular values `>= rel_tol * sigma_1`; 0 for a zero matrix.
pub fn numerical_rank(x: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::Argument(format!(
            "rel_tol = {rel_tol} outside (0, 1)"
        )));
    }
    let s = singular_values(x);
    let top = s.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v >= rel_tol * top).count())
}

/// Five-number summary plus mean and Tukey outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DistSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
    /// Values outside `[q1 - 1.5 IQR, q3 + 1.5 IQR]`, ascending.
    pub outliers: Vec<f64>,
}

/// Quartiles use linear interpolation between order statistics
/// (`h = (n - 1) p`, the "type 7" rule).
pub fn summarize(values: &[f64]) -> Result<DistSummary> {
    if values.is_empty() {
        return Err(Error::Argument("cannot summarize an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("sample contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Ok(DistSummary {
        min: sorted[0],
        q1,
        median: quantile(&sorted, 0.5),
        q3,
        max: sorted[sorted.len() - 1],
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        count: sorted.len(),
        outliers: sorted
            .iter()
            .copied()
            .filter(|&v| v < lo_fence || v > hi_fence)
            .collect(),
    })
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::{hankel, HankelSpec};
    use proptest::prelude::*;

    #[test]
    fn perfect_and_mean_fits() {
        let g = [1.0, -0.5, 0.25, 0.3, 2.0];
        assert_eq!(fit(&g, &g).unwrap(), 100.0);
        let mean = g.iter().sum::<f64>() / 5.0;
        assert!(fit(&g, &[mean; 5]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn hand_computed_fit() {
        // mean 1/3, denominator (2/3)^2 + 2 (1/3)^2 = 2/3, numerator 1
        let w = fit(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((w - 100.0 * (1.0 - 1.5f64.sqrt())).abs() < 1e-12);
        assert!((w + 22.474).abs() < 1e-3);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(fit(&[2.0, 2.0], &[1.0, 2.0]), Err(Error::UndefinedFit));
        assert!(fit(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-8).unwrap(), 3);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1e-8).unwrap(), 0);
        let g: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
        let h = hankel(&g, HankelSpec::new(5).unwrap()).unwrap();
        assert_eq!(numerical_rank(&h, 1e-8).unwrap(), 1);
        let a = DMatrix::from_fn(6, 2, |i, j| ((i + 2 * j) as f64).sin());
        let b = DMatrix::from_fn(2, 6, |i, j| ((3 * i + j) as f64).cos());
        assert_eq!(numerical_rank(&(a * b), 1e-8).unwrap(), 2);
        assert!(numerical_rank(&DMatrix::identity(2, 2), 1.0).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[5.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max, s.mean),
            (5., 5., 5., 5., 5., 5.)
        );
        assert!(s.outliers.is_empty());
        assert_eq!(summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap().median, 2.5);
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        v.push(1000.0);
        assert_eq!(summarize(&v).unwrap().outliers, vec![1000.0]);
        assert!(summarize(&[]).is_err());
    }

    proptest! {
        #[test]
        fn fit_is_scale_invariant(
            g in prop::collection::vec(-5.0f64..5.0, 8),
            h in prop::collection::vec(-5.0f64..5.0, 8),
            c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        ) {
            if let Ok(w) = fit(&g, &h) {
                let gs: Vec<f64> = g.iter().map(|v| c * v).collect();
                let hs: Vec<f64> = h.iter().map(|v| c * v).collect();
                let ws = fit(&gs, &hs).unwrap();
                prop_assert!((w - ws).abs() <= 1e-9 * (1.0 + w.abs()));
                prop_assert!(w <= 100.0);
            }
        }

        #[test]
        fn summary_is_permutation_invariant(mut v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let a = summarize(&v).unwrap();
            v.reverse();
            let mid = v.len() / 2;
            v.rotate_left(mid);
            let b = summarize(&v).unwrap();
            prop_assert_eq!(a.q1, b.q1);
            prop_assert_eq!(a.median, b.median);
            prop_assert_eq!(a.q3, b.q3);
            prop_assert_eq!(a.outliers, b.outliers);
            prop_assert!(a.min <= a.q1 && a.q1 <= a.median && a.median <= a.q3 && a.q3 <= a.max);
            prop_assert!((a.mean - b.mean).abs() <= 1e-9 * (1.0 + a.mean.abs()));
        }
    }
}
