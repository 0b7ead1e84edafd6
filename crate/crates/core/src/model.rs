//! Test systems, data simulation and regression construction.
//!
//! Transfer functions are written in the backward shift operator `q^{-1}`.
//! A [`LinearSystem`] with poles `p_i`, zeros `z_j` and gain `k` is
//!
//! ```text
//! G(q) = k * q^{-(np - nz)} * prod(1 - z_j q^{-1}) / prod(1 - p_i q^{-1})
//! ```
//!
//! which is strictly proper whenever there are fewer zeros than poles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Taps used when normalizing the gain of generated systems.
pub const NORMALIZATION_TAPS: usize = 35;
/// Taps of `H0` used for the analytic noise gain.
pub const NOISE_GAIN_TAPS: usize = 200;
/// Largest accepted SNR target; larger requests are clamped.
pub const MAX_SNR_DB: f64 = 1e6;

const CONJUGATE_TOL: f64 = 1e-12;
const MIN_ROOT_RADIUS: f64 = 0.1;
const ZERO_RADIUS_MAX: f64 = 0.95;

/// Stable, strictly proper SISO discrete-time system in pole/zero/gain form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    poles: Vec<Complex64>,
    zeros: Vec<Complex64>,
    gain: f64,
}

impl LinearSystem {
    pub fn new(poles: Vec<Complex64>, zeros: Vec<Complex64>, gain: f64) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::Argument("a system needs at least one pole".into()));
        }
        if zeros.len() >= poles.len() {
            return Err(Error::Argument(format!(
                "{} zeros for {} poles: the system must be strictly proper",
                zeros.len(),
                poles.len()
            )));
        }
        if !gain.is_finite() {
            return Err(Error::Argument("gain must be finite".into()));
        }
        for (what, roots) in [("poles", &poles), ("zeros", &zeros)] {
            if !conjugate_closed(roots) {
                return Err(Error::Argument(format!(
                    "complex {what} must come in conjugate pairs"
                )));
            }
        }
        Ok(Self { poles, zeros, gain })
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn with_gain(&self, gain: f64) -> Self {
        Self {
            gain,
            ..self.clone()
        }
    }

    /// Numerator and denominator coefficients in powers of `q^{-1}`.
    ///
    /// The denominator is monic; the numerator carries the pure delay, so
    /// `num[0] == 0` for every valid system.
    pub fn polynomials(&self) -> (Vec<f64>, Vec<f64>) {
        let den = poly_from_roots(&self.poles);
        let delay = self.poles.len() - self.zeros.len();
        let mut num = vec![0.0; delay];
        num.extend(
            poly_from_roots(&self.zeros)
                .into_iter()
                .map(|c| c * self.gain),
        );
        (num, den)
    }

    /// Run `input` through the system with zero initial conditions.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let (num, den) = self.polynomials();
        lfilter(&num, &den, input)
    }

    /// Same dynamics scaled so the first `taps` impulse-response
    /// coefficients have unit 2-norm.
    pub fn normalized(&self, taps: usize) -> Result<Self> {
        let norm = l2(&impulse_response(self, taps));
        if norm == 0.0 {
            return Err(Error::Argument(
                "cannot normalize a zero-gain system".into(),
            ));
        }
        Ok(self.with_gain(self.gain / norm))
    }
}

/// `H0` of the data-generating system.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    White,
    Coloured(LinearSystem),
}

impl NoiseModel {
    pub fn filter(&self, e: &[f64]) -> Vec<f64> {
        match self {
            NoiseModel::White => e.to_vec(),
            NoiseModel::Coloured(sys) => sys.filter(e),
        }
    }

    /// `sum h_k^2` over the first [`NOISE_GAIN_TAPS`] taps (including the
    /// direct term, which is 1 for white noise and 0 for strictly proper `H0`).
    pub fn power_gain(&self) -> f64 {
        match self {
            NoiseModel::White => 1.0,
            NoiseModel::Coloured(sys) => impulse_response(sys, NOISE_GAIN_TAPS)
                .iter()
                .map(|h| h * h)
                .sum(),
        }
    }
}

/// One simulated input/output experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DataRecord {
    pub fn new(u: Vec<f64>, y: Vec<f64>, noise_sigma: f64, seed: u64) -> Result<Self> {
        if u.is_empty() || u.len() != y.len() {
            return Err(Error::Argument(format!(
                "u and y must be nonempty and of equal length (got {} and {})",
                u.len(),
                y.len()
            )));
        }
        Ok(Self {
            u,
            y,
            noise_sigma,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// FIR or ARX model structure. All orders are positive and odd so every
/// Hankel-embedded block is square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelStructure {
    Fir { n: usize },
    Arx { na: usize, nb: usize },
}

impl ModelStructure {
    pub fn fir(n: usize) -> Result<Self> {
        check_odd("n", n)?;
        Ok(ModelStructure::Fir { n })
    }

    pub fn arx(na: usize, nb: usize) -> Result<Self> {
        check_odd("nA", na)?;
        check_odd("nB", nb)?;
        Ok(ModelStructure::Arx { na, nb })
    }

    pub fn num_params(&self) -> usize {
        match *self {
            ModelStructure::Fir { n } => n,
            ModelStructure::Arx { na, nb } => na + nb,
        }
    }

    pub fn max_lag(&self) -> usize {
        match *self {
            ModelStructure::Fir { n } => n,
            ModelStructure::Arx { na, nb } => na.max(nb),
        }
    }

    /// Parameter ranges that are Hankel-embedded: `[b]` for FIR, `[a, b]`
    /// for ARX.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        match *self {
            ModelStructure::Fir { n } => vec![0..n],
            ModelStructure::Arx { na, nb } => vec![0..na, na..na + nb],
        }
    }
}

fn check_odd(name: &str, value: usize) -> Result<()> {
    if value == 0 || value % 2 == 0 {
        return Err(Error::Structure(format!(
            "{name} = {value} must be a positive odd integer"
        )));
    }
    Ok(())
}

/// Linear regression `Y = Phi^T theta + e`.
///
/// `phi` has one row per parameter and one column per usable sample
/// `t = max_lag + 1 ..= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub y: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub structure: ModelStructure,
}

impl RegressionData {
    pub fn new(y: DVector<f64>, phi: DMatrix<f64>, structure: ModelStructure) -> Result<Self> {
        if phi.nrows() != structure.num_params() {
            return Err(Error::Argument(format!(
                "phi has {} rows but the structure has {} parameters",
                phi.nrows(),
                structure.num_params()
            )));
        }
        if phi.ncols() != y.len() {
            return Err(Error::Argument(format!(
                "phi has {} columns but Y has {} entries",
                phi.ncols(),
                y.len()
            )));
        }
        Ok(Self { y, phi, structure })
    }

    pub fn num_samples(&self) -> usize {
        self.y.len()
    }

    pub fn num_params(&self) -> usize {
        self.phi.nrows()
    }

    /// `V_N(theta) = ||Y - Phi^T theta||^2`.
    pub fn residual(&self, theta: &DVector<f64>) -> f64 {
        (&self.y - self.phi.tr_mul(theta)).norm_squared()
    }

    /// Regression restricted to the sample columns in `cols`.
    pub fn columns(&self, cols: std::ops::Range<usize>) -> RegressionData {
        let len = cols.len();
        RegressionData {
            y: self.y.rows(cols.start, len).into_owned(),
            phi: self.phi.columns(cols.start, len).into_owned(),
            structure: self.structure,
        }
    }
}

/// Draw a random stable system of the given order.
///
/// Poles are allocated pairwise: while two or more remain, a conjugate pair
/// is drawn with probability one half, otherwise a single real pole. Root
/// magnitudes are uniform on `[0.1, radius]` and pair angles uniform on
/// `[0, pi]`. `order - 1` zeros are drawn the same way with radius 0.95, and
/// the gain is scaled so the 35-tap impulse response has 2-norm uniform on
/// `[0.5, 2]` with a random sign.
pub fn generate_random_system(
    order: usize,
    pole_radius_max: f64,
    rng: &mut Stream,
) -> Result<LinearSystem> {
    if !(1..=10).contains(&order) {
        return Err(Error::Argument(format!("order {order} outside 1..=10")));
    }
    if !(pole_radius_max > MIN_ROOT_RADIUS && pole_radius_max < 1.0) {
        return Err(Error::Argument(format!(
            "pole radius {pole_radius_max} outside ({MIN_ROOT_RADIUS}, 1)"
        )));
    }
    let poles = random_roots(order, pole_radius_max, rng);
    let zeros = random_roots(order - 1, ZERO_RADIUS_MAX, rng);
    let shape = LinearSystem::new(poles, zeros, 1.0)?;
    let norm = l2(&impulse_response(&shape, NORMALIZATION_TAPS));
    let target = rng.uniform(0.5, 2.0);
    let sign = if rng.coin() { 1.0 } else { -1.0 };
    Ok(shape.with_gain(sign * target / norm))
}

fn random_roots(count: usize, radius: f64, rng: &mut Stream) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(count);
    while roots.len() < count {
        let remaining = count - roots.len();
        let magnitude = rng.uniform(MIN_ROOT_RADIUS, radius);
        if remaining >= 2 && rng.coin() {
            let angle = rng.uniform(0.0, std::f64::consts::PI);
            let r = Complex64::from_polar(magnitude, angle);
            roots.push(r);
            roots.push(r.conj());
        } else {
            let sign = if rng.coin() { 1.0 } else { -1.0 };
            roots.push(Complex64::new(sign * magnitude, 0.0));
        }
    }
    roots
}

/// Impulse-response taps `g_1..g_n` (the direct term `g_0` is excluded).
pub fn impulse_response(sys: &LinearSystem, n: usize) -> Vec<f64> {
    let mut unit = vec![0.0; n + 1];
    unit[0] = 1.0;
    let mut g = sys.filter(&unit);
    g.remove(0);
    g
}

/// First `n` taps of `B(q)/A(q)` with `A = 1 + a_1 q^-1 + ...` and
/// `B = b_1 q^-1 + ...`.
pub fn arx_impulse_response(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n];
    for k in 0..n {
        let mut acc = b.get(k).copied().unwrap_or(0.0);
        for (j, aj) in a.iter().enumerate().take(k) {
            acc -= aj * g[k - 1 - j];
        }
        g[k] = acc;
    }
    g
}

/// Unit-variance white noise through `0.436 / (1 - 0.9 q^-1)`.
pub fn lowpass_input(n: usize, rng: &mut Stream) -> Vec<f64> {
    lowpass_filter(&rng.normals(n))
}

/// The input-shaping filter `F_u(q) = 0.436 / (1 - 0.9 q^-1)`.
pub fn lowpass_filter(w: &[f64]) -> Vec<f64> {
    lfilter(&[0.436], &[1.0, -0.9], w)
}

/// `y = G0 u + H0 e`, `e ~ N(0, sigma_e^2)` i.i.d., zero initial conditions.
pub fn simulate(
    sys_g: &LinearSystem,
    sys_h: &NoiseModel,
    u: &[f64],
    sigma_e: f64,
    rng: &mut Stream,
) -> Result<DataRecord> {
    if u.is_empty() {
        return Err(Error::Argument("input must be nonempty".into()));
    }
    if !(sigma_e >= 0.0) {
        return Err(Error::Argument(format!("sigma_e = {sigma_e} must be >= 0")));
    }
    let mut y = sys_g.filter(u);
    if sigma_e > 0.0 {
        let e: Vec<f64> = rng.normals(u.len()).iter().map(|x| sigma_e * x).collect();
        for (yt, vt) in y.iter_mut().zip(sys_h.filter(&e)) {
            *yt += vt;
        }
    }
    DataRecord::new(u.to_vec(), y, sigma_e, rng.seed())
}

/// Noise standard deviation giving `var(G0 u) / var(H0 e) = 10^(snr/10)`.
///
/// `var(H0 e)` is taken as `sigma_e^2 * sum h_k^2` (see
/// [`NoiseModel::power_gain`]).
pub fn calibrate_noise(
    sys_g: &LinearSystem,
    sys_h: &NoiseModel,
    u: &[f64],
    target_snr_db: f64,
) -> Result<f64> {
    if target_snr_db.is_nan() {
        return Err(Error::Calibration("SNR target is NaN".into()));
    }
    let signal_var = variance(&sys_g.filter(u));
    if !(signal_var > 0.0) {
        return Err(Error::Calibration(
            "noise-free output is identically zero".into(),
        ));
    }
    let noise_gain = sys_h.power_gain();
    if !(noise_gain > 0.0) {
        return Err(Error::Calibration("noise model has zero gain".into()));
    }
    let ratio = 10f64.powf(target_snr_db.min(MAX_SNR_DB) / 10.0);
    Ok((signal_var / (noise_gain * ratio)).sqrt())
}

/// Build `(Y, Phi)` for the given structure.
///
/// FIR rows hold `u(t-k)`; ARX rows hold `-y(t-k)` (first `nA`) then
/// `u(t-k)`. Columns cover `t = max_lag + 1 ..= N` so only observed samples
/// enter.
pub fn build_regression(data: &DataRecord, structure: ModelStructure) -> Result<RegressionData> {
    let samples = data.len();
    let max_lag = structure.max_lag();
    if samples <= max_lag {
        return Err(Error::InsufficientData { samples, max_lag });
    }
    let cols = samples - max_lag;
    let rows = structure.num_params();
    // 0-based sample index of column c is max_lag + c
    let y = DVector::from_fn(cols, |c, _| data.y[max_lag + c]);
    let phi = match structure {
        ModelStructure::Fir { .. } => {
            DMatrix::from_fn(rows, cols, |k, c| data.u[max_lag + c - (k + 1)])
        }
        ModelStructure::Arx { na, .. } => DMatrix::from_fn(rows, cols, |k, c| {
            let t = max_lag + c;
            if k < na {
                -data.y[t - (k + 1)]
            } else {
                data.u[t - (k - na + 1)]
            }
        }),
    };
    RegressionData::new(y, phi, structure)
}

/// Direct-form difference equation with monic `den`.
fn lfilter(num: &[f64], den: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for t in 0..x.len() {
        let mut acc = 0.0;
        for (k, bk) in num.iter().enumerate().take(t + 1) {
            acc += bk * x[t - k];
        }
        for (j, aj) in den.iter().enumerate().skip(1).take(t) {
            acc -= aj * y[t - j];
        }
        y[t] = acc;
    }
    y
}

/// Real coefficients of `prod(1 - r q^-1)`.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = c.clone();
        next.push(Complex64::new(0.0, 0.0));
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] -= r * ck;
        }
        c = next;
    }
    c.into_iter().map(|z| z.re).collect()
}

fn conjugate_closed(roots: &[Complex64]) -> bool {
    let mut unmatched: Vec<Complex64> = Vec::new();
    for r in roots {
        if r.im.abs() <= CONJUGATE_TOL {
            continue;
        }
        if let Some(pos) = unmatched
            .iter()
            .position(|s| (s.conj() - r).norm() <= CONJUGATE_TOL * (1.0 + r.norm()))
        {
            unmatched.swap_remove(pos);
        } else {
            unmatched.push(*r);
        }
    }
    unmatched.is_empty()
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Population variance (divides by `N`).
pub(crate) fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real(p: f64) -> Complex64 {
        Complex64::new(p, 0.0)
    }

    fn first_order(p: f64, gain: f64) -> LinearSystem {
        LinearSystem::new(vec![real(p)], vec![], gain).unwrap()
    }

    /// Residue expansion `g_k = sum_j r_j p_j^(k-1)` for distinct poles.
    fn residue_oracle(sys: &LinearSystem, n: usize) -> Vec<f64> {
        let p = sys.poles();
        let z = sys.zeros();
        let residues: Vec<Complex64> = (0..p.len())
            .map(|j| {
                let num: Complex64 = z.iter().map(|zi| p[j] - zi).product();
                let den: Complex64 = (0..p.len())
                    .filter(|&l| l != j)
                    .map(|l| p[j] - p[l])
                    .product();
                num / den * sys.gain()
            })
            .collect();
        (1..=n)
            .map(|k| {
                residues
                    .iter()
                    .zip(p)
                    .map(|(r, pj)| r * pj.powi(k as i32 - 1))
                    .sum::<Complex64>()
                    .re
            })
            .collect()
    }

    #[test]
    fn first_order_impulse_is_geometric() {
        let g = impulse_response(&first_order(0.5, 1.0), 6);
        assert_eq!(g, vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]);
    }

    #[test]
    fn zero_gain_gives_zero_response() {
        let g = impulse_response(&first_order(0.5, 0.0), 10);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_matches_residue_expansion() {
        let sys = LinearSystem::new(
            vec![
                real(0.7),
                Complex64::from_polar(0.6, 1.1),
                Complex64::from_polar(0.6, -1.1),
            ],
            vec![real(-0.4), real(0.2)],
            1.3,
        )
        .unwrap();
        let g = impulse_response(&sys, 40);
        let oracle = residue_oracle(&sys, 40);
        for (a, b) in g.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn random_order3_matches_residue_expansion() {
        let mut rng = Stream::new(3);
        for _ in 0..10 {
            let sys = generate_random_system(3, 0.9, &mut rng).unwrap();
            let g = impulse_response(&sys, 35);
            for (a, b) in g.iter().zip(residue_oracle(&sys, 35)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn arx_impulse_with_zero_a_is_padded_b() {
        let b = [0.3, -1.0, 2.0];
        let g = arx_impulse_response(&[0.0, 0.0], &b, 6);
        assert_eq!(g, vec![0.3, -1.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(arx_impulse_response(&[], &b, 2), vec![0.3, -1.0]);
    }

    #[test]
    fn arx_impulse_geometric() {
        let g = arx_impulse_response(&[-0.5], &[1.0], 5);
        assert_eq!(g, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
    }

    #[test]
    fn arx_impulse_matches_pole_zero_form() {
        let mut rng = Stream::new(99);
        for order in 1..=6 {
            let sys = generate_random_system(order, 0.9, &mut rng).unwrap();
            let (num, den) = sys.polynomials();
            let g = arx_impulse_response(&den[1..], &num[1..], 50);
            for (a, b) in g.iter().zip(impulse_response(&sys, 50)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn generated_systems_respect_invariants() {
        let mut rng = Stream::new(5);
        for order in 1..=10 {
            for _ in 0..20 {
                let sys = generate_random_system(order, 0.9, &mut rng).unwrap();
                assert_eq!(sys.order(), order);
                assert_eq!(sys.zeros().len(), order - 1);
                assert!(sys.max_pole_radius() < 0.9);
                assert!(conjugate_closed(sys.poles()));
                let norm = l2(&impulse_response(&sys, NORMALIZATION_TAPS));
                assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&norm), "norm {norm}");
            }
        }
    }

    #[test]
    fn order_one_has_single_real_pole() {
        let mut rng = Stream::new(1);
        let sys = generate_random_system(1, 0.9, &mut rng).unwrap();
        assert_eq!(sys.poles().len(), 1);
        assert_eq!(sys.poles()[0].im, 0.0);
        assert!(sys.poles()[0].norm() < 0.9);
    }

    #[test]
    fn conjugate_pairs_are_mutual_conjugates() {
        let mut rng = Stream::new(2);
        let mut seen_pair = false;
        for _ in 0..50 {
            let sys = generate_random_system(2, 0.9, &mut rng).unwrap();
            let p = sys.poles();
            if p[0].im != 0.0 {
                assert_eq!(p[0], p[1].conj());
                seen_pair = true;
            }
        }
        assert!(seen_pair);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_system(5, 0.9, &mut Stream::new(42)).unwrap();
        let b = generate_random_system(5, 0.9, &mut Stream::new(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generation_rejects_bad_arguments() {
        let mut rng = Stream::new(0);
        assert!(generate_random_system(0, 0.9, &mut rng).is_err());
        assert!(generate_random_system(11, 0.9, &mut rng).is_err());
        assert!(generate_random_system(3, 1.0, &mut rng).is_err());
        assert!(generate_random_system(3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn order_one_responses_decay() {
        let mut rng = Stream::new(8);
        for _ in 0..50 {
            let sys = generate_random_system(1, 0.9, &mut rng).unwrap();
            let g = impulse_response(&sys, 35);
            assert!(g[34].abs() < g[0].abs() * 0.9f64.powi(20));
        }
    }

    #[test]
    fn system_constructor_validates() {
        assert!(LinearSystem::new(vec![], vec![], 1.0).is_err());
        assert!(LinearSystem::new(vec![real(0.5)], vec![real(0.1)], 1.0).is_err());
        let lone = Complex64::new(0.3, 0.4);
        assert!(LinearSystem::new(vec![lone, real(0.1)], vec![], 1.0).is_err());
        assert!(LinearSystem::new(vec![lone, lone.conj()], vec![], 1.0).is_ok());
    }

    #[test]
    fn lowpass_impulse_response() {
        let mut w = vec![0.0; 4];
        w[0] = 1.0;
        let out = lowpass_filter(&w);
        let expected = [0.436, 0.436 * 0.9, 0.436 * 0.81, 0.436 * 0.729];
        for (a, b) in out.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn lowpass_stationary_variance() {
        let stationary = 0.436f64.powi(2) / (1.0 - 0.81);
        let mean_var = (0..100)
            .map(|s| variance(&lowpass_input(450, &mut Stream::new(s))))
            .sum::<f64>()
            / 100.0;
        assert!((mean_var - stationary).abs() <= 0.2, "{mean_var}");
        assert_eq!(
            lowpass_input(30, &mut Stream::new(4)),
            lowpass_input(30, &mut Stream::new(4))
        );
    }

    #[test]
    fn simulate_noise_free_and_noise_only() {
        let g = first_order(0.5, 1.0);
        let u = lowpass_input(450, &mut Stream::new(1));
        let clean = simulate(&g, &NoiseModel::White, &u, 0.0, &mut Stream::new(2)).unwrap();
        assert_eq!(clean.y, g.filter(&u));

        let zero = vec![0.0; 450];
        let noisy = simulate(&g, &NoiseModel::White, &zero, 0.7, &mut Stream::new(3)).unwrap();
        let std = variance(&noisy.y).sqrt();
        assert!((std - 0.7).abs() <= 0.07, "{std}");
        assert_eq!(noisy.seed, 3);
    }

    #[test]
    fn simulate_is_linear_in_input() {
        let g = generate_random_system(4, 0.9, &mut Stream::new(6)).unwrap();
        let u = lowpass_input(100, &mut Stream::new(7));
        let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let y1 = simulate(&g, &NoiseModel::White, &u, 0.0, &mut Stream::new(0)).unwrap();
        let y2 = simulate(&g, &NoiseModel::White, &u2, 0.0, &mut Stream::new(0)).unwrap();
        for (a, b) in y2.y.iter().zip(&y1.y) {
            assert_abs_diff_eq!(*a, 2.0 * b, epsilon = 1e-12);
        }
    }

    #[test]
    fn calibration_formulas() {
        let g = first_order(0.8, 1.0);
        let u = lowpass_input(450, &mut Stream::new(10));
        let y_std = variance(&g.filter(&u)).sqrt();

        let s0 = calibrate_noise(&g, &NoiseModel::White, &u, 0.0).unwrap();
        assert_abs_diff_eq!(s0, y_std, epsilon = 1e-12);

        let s10 = calibrate_noise(&g, &NoiseModel::White, &u, 10.0).unwrap();
        assert_abs_diff_eq!(s10, y_std / 10f64.powf(0.5), epsilon = 1e-12);

        let sinf = calibrate_noise(&g, &NoiseModel::White, &u, f64::INFINITY).unwrap();
        assert!(sinf < 1e-12);

        let zero = vec![0.0; 10];
        assert!(matches!(
            calibrate_noise(&g, &NoiseModel::White, &zero, 10.0),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn coloured_calibration_uses_noise_gain() {
        let g = first_order(0.8, 1.0);
        let h = first_order(0.5, 1.0).normalized(NOISE_GAIN_TAPS).unwrap();
        let noise = NoiseModel::Coloured(h);
        assert_abs_diff_eq!(noise.power_gain(), 1.0, epsilon = 1e-12);
        let u = lowpass_input(200, &mut Stream::new(1));
        let a = calibrate_noise(&g, &noise, &u, 6.0).unwrap();
        let b = calibrate_noise(&g, &NoiseModel::White, &u, 6.0).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn fir_regression_by_hand() {
        let data = DataRecord::new(vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], 0.0, 0).unwrap();
        let reg = build_regression(&data, ModelStructure::fir(1).unwrap()).unwrap();
        assert_eq!(reg.y.as_slice(), &[5.0, 6.0]);
        assert_eq!(reg.phi, DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
    }

    #[test]
    fn arx_regression_by_hand() {
        let data = DataRecord::new(vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], 0.0, 0).unwrap();
        let reg = build_regression(&data, ModelStructure::arx(1, 1).unwrap()).unwrap();
        assert_eq!(reg.y.as_slice(), &[5.0, 6.0]);
        assert_eq!(
            reg.phi,
            DMatrix::from_row_slice(2, 2, &[-4.0, -5.0, 1.0, 2.0])
        );
    }

    #[test]
    fn regression_needs_more_samples_than_lags() {
        let data = DataRecord::new(vec![1.0; 5], vec![0.0; 5], 0.0, 0).unwrap();
        assert_eq!(
            build_regression(&data, ModelStructure::fir(5).unwrap()),
            Err(Error::InsufficientData {
                samples: 5,
                max_lag: 5
            })
        );
    }

    #[test]
    fn structure_requires_odd_orders() {
        assert!(ModelStructure::fir(4).is_err());
        assert!(ModelStructure::fir(0).is_err());
        assert!(ModelStructure::arx(3, 2).is_err());
        let arx = ModelStructure::arx(3, 5).unwrap();
        assert_eq!(arx.num_params(), 8);
        assert_eq!(arx.max_lag(), 5);
        assert_eq!(arx.blocks(), vec![0..3, 3..8]);
    }

    #[test]
    fn noiseless_fir_regression_is_exact() {
        let theta: Vec<f64> = (0..7).map(|k| 0.8f64.powi(k) * (k as f64).cos()).collect();
        let u = lowpass_input(60, &mut Stream::new(12));
        let num: Vec<f64> = std::iter::once(0.0).chain(theta.iter().copied()).collect();
        let y = lfilter(&num, &[1.0], &u);
        let data = DataRecord::new(u, y, 0.0, 0).unwrap();
        let reg = build_regression(&data, ModelStructure::fir(7).unwrap()).unwrap();
        let r = reg.residual(&DVector::from_vec(theta));
        assert!(r < 1e-24, "{r}");
    }

    #[test]
    fn noiseless_arx_regression_is_exact() {
        let sys = generate_random_system(3, 0.9, &mut Stream::new(21)).unwrap();
        let (num, den) = sys.polynomials();
        let u = lowpass_input(80, &mut Stream::new(22));
        let y = sys.filter(&u);
        let data = DataRecord::new(u, y, 0.0, 0).unwrap();
        // den has 4 coefficients (a_1..a_3), num has b_1..b_3 after the zero lead
        let reg = build_regression(&data, ModelStructure::arx(3, 3).unwrap()).unwrap();
        let theta: Vec<f64> = den[1..].iter().chain(&num[1..]).copied().collect();
        let r = reg.residual(&DVector::from_vec(theta));
        assert!(r < 1e-20, "{r}");
    }
}
