//! Parameterized covariance builders. All produced matrices are Hermitian PSD
//! with trace equal to their dimension.

use super::ChannelError;
use crate::linalg::{self, CMat};
use faer::Mat;
use crate::rng::complex_normal;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Model family of a covariance matrix. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CovarianceKind {
    Identity,
    /// `[R]_{mn} = r^{|m-n|} e^{jθ(m-n)}`.
    Exponential {
        correlation: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Half-wavelength uniform linear array observing a Gaussian angular
    /// density with mean `angle` and standard deviation `spread`.
    LocalScattering { angle: f64, spread: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    pub dimension: usize,
}

impl CovarianceSpec {
    pub fn identity(dimension: usize) -> Self {
        Self { kind: CovarianceKind::Identity, dimension }
    }

    pub fn exponential(dimension: usize, correlation: f64) -> Self {
        Self { kind: CovarianceKind::Exponential { correlation, phase: 0.0 }, dimension }
    }

    pub fn local_scattering(dimension: usize, angle: f64, spread: f64) -> Self {
        Self { kind: CovarianceKind::LocalScattering { angle, spread }, dimension }
    }
}

pub fn build_covariance(spec: &CovarianceSpec) -> Result<CMat, ChannelError> {
    let n = spec.dimension;
    if n == 0 {
        return Err(ChannelError::InvalidParameter("dimension must be at least 1".into()));
    }
    match spec.kind {
        CovarianceKind::Identity => Ok(linalg::identity(n)),
        CovarianceKind::Exponential { correlation, phase } => {
            if !(0.0..1.0).contains(&correlation) {
                return Err(ChannelError::InvalidParameter(format!(
                    "correlation magnitude {correlation} outside [0, 1)"
                )));
            }
            if !phase.is_finite() {
                return Err(ChannelError::InvalidParameter("phase must be finite".into()));
            }
            let lags: Vec<Complex64> = (0..n)
                .map(|k| Complex64::from_polar(correlation.powi(k as i32), phase * k as f64))
                .collect();
            Ok(toeplitz_hermitian(&lags))
        }
        CovarianceKind::LocalScattering { angle, spread } => {
            if !(spread > 0.0 && spread.is_finite()) {
                return Err(ChannelError::InvalidParameter(format!(
                    "angular spread {spread} must be positive"
                )));
            }
            if !angle.is_finite() {
                return Err(ChannelError::InvalidParameter("nominal angle must be finite".into()));
            }
            let mut lags = local_scattering_lags(n, angle, spread);
            // the weights are normalized so lag 0 is 1 up to rounding; pin it
            lags[0] = Complex64::new(1.0, 0.0);
            Ok(toeplitz_hermitian(&lags))
        }
    }
}

/// Random Wishart-type covariance `X X^H` with `X` of size `dimension × rank`
/// standard complex Gaussian, rescaled to unit mean diagonal. Used for
/// synthetic scenarios and randomized tests.
pub fn random_covariance<R: Rng + ?Sized>(dimension: usize, rank: usize, rng: &mut R) -> CMat {
    let x: CMat = Mat::from_fn(dimension, rank.max(1), |_, _| complex_normal(rng));
    let w = linalg::hermitian_part(&(&x * x.adjoint()));
    let t = linalg::trace(&w).re;
    linalg::scaled(&w, dimension as f64 / t)
}

/// Hermitian Toeplitz matrix with first column `lags`.
fn toeplitz_hermitian(lags: &[Complex64]) -> CMat {
    let n = lags.len();
    Mat::from_fn(n, n, |i, j| if i >= j { lags[i - j] } else { lags[j - i].conj() })
}

/// `c[Δ] = ∫ e^{jπΔ sin φ} f(φ) dφ` for `Δ = 0..n`, with `f` the Gaussian
/// density truncated to `±8σ` and integrated by composite Gauss-Legendre.
fn local_scattering_lags(n: usize, angle: f64, spread: f64) -> Vec<Complex64> {
    const ORDER: usize = 16;
    let (nodes, weights) = gauss_legendre(ORDER);
    let width = 16.0 * spread;
    // keep the phase excursion per panel small compared with the rule's order
    let panels = ((spread * PI * (n.max(2) - 1) as f64).ceil() as usize).max(16);
    let h = width / panels as f64;
    let lo = angle - 8.0 * spread;

    let mut points = Vec::with_capacity(panels * ORDER);
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            let phi = mid + 0.5 * h * x;
            let u = (phi - angle) / spread;
            let wt = w * 0.5 * h * (-0.5 * u * u).exp();
            total += wt;
            points.push((Complex64::from_polar(1.0, PI * phi.sin()), wt));
        }
    }

    let mut lags = vec![Complex64::new(0.0, 0.0); n];
    for (z, wt) in points {
        let mut zk = Complex64::new(wt / total, 0.0);
        for lag in lags.iter_mut() {
            *lag += zk;
            zk *= z;
        }
    }
    lags
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod test {
    use super::*;

    fn assert_trace_psd(r: &CMat) {
        let n = r.nrows() as f64;
        assert!((linalg::trace(r).re - n).abs() < 1e-10 * n);
        assert!(linalg::max_asymmetry(r) < 1e-12);
        let vals = linalg::hermitian_eigenvalues(r).unwrap();
        let max = vals.iter().cloned().fold(0.0, f64::max);
        assert!(vals[0] >= -1e-10 * max, "min eigenvalue {}", vals[0]);
    }

    #[test]
    fn identity_builder() {
        let r = build_covariance(&CovarianceSpec::identity(4)).unwrap();
        assert_eq!(r, linalg::identity(4));
    }

    #[test]
    fn exponential_two_by_two() {
        let r = build_covariance(&CovarianceSpec::exponential(2, 0.9)).unwrap();
        assert_eq!(r[(0, 1)], Complex64::new(0.9, 0.0));
        assert_eq!(r[(1, 0)], Complex64::new(0.9, 0.0));
        assert_eq!(linalg::trace(&r).re, 2.0);
    }

    #[test]
    fn exponential_rejects_out_of_range() {
        for r in [1.0, 1.5, -0.1, f64::NAN] {
            assert!(build_covariance(&CovarianceSpec::exponential(3, r)).is_err());
        }
    }

    #[test]
    fn exponential_with_phase_is_psd() {
        let spec = CovarianceSpec { kind: CovarianceKind::Exponential { correlation: 0.8, phase: 0.7 }, dimension: 12 };
        let r = build_covariance(&spec).unwrap();
        assert_trace_psd(&r);
        assert!((r[(3, 1)] - Complex64::from_polar(0.64, 1.4)).norm() < 1e-14);
    }

    #[test]
    fn local_scattering_rejects_bad_spread() {
        assert!(build_covariance(&CovarianceSpec::local_scattering(4, 0.1, 0.0)).is_err());
        assert!(build_covariance(&CovarianceSpec::local_scattering(4, 0.1, -0.1)).is_err());
        assert!(build_covariance(&CovarianceSpec::exponential(0, 0.5)).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // ∫ x^30 = 2/31
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m - 2.0 / 31.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    /// Brute-force trapezoid rule of the untruncated angular integral.
    fn brute_force(n: usize, angle: f64, spread: f64) -> CMat {
        let samples = 400_000;
        let lo = angle - 20.0 * spread;
        let h = 40.0 * spread / samples as f64;
        let norm = 1.0 / (spread * (2.0 * PI).sqrt());
        Mat::from_fn(n, n, |m, k| {
            let delta = m as f64 - k as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..=samples {
                let phi = lo + s as f64 * h;
                let u = (phi - angle) / spread;
                let edge = if s == 0 || s == samples { 0.5 } else { 1.0 };
                acc += Complex64::from_polar(edge * h * norm * (-0.5 * u * u).exp(), PI * delta * phi.sin());
            }
            acc
        })
    }

    #[test]
    fn local_scattering_matches_brute_force_spectrum() {
        let (angle, spread) = (30f64.to_radians(), 5f64.to_radians());
        let r = build_covariance(&CovarianceSpec::local_scattering(8, angle, spread)).unwrap();
        assert_trace_psd(&r);
        let oracle = brute_force(8, angle, spread);
        assert!(linalg::frobenius_norm(&linalg::sub(&r, &oracle)) < 1e-9);
        let a = linalg::hermitian_eigenvalues(&r).unwrap();
        let b = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&oracle)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn local_scattering_large_array_is_psd() {
        let r = build_covariance(&CovarianceSpec::local_scattering(100, -1.1, 5f64.to_radians())).unwrap();
        assert_trace_psd(&r);
        // most energy lives in a small fraction of the eigenvalues
        let vals = linalg::hermitian_eigenvalues(&r).unwrap();
        let top: f64 = vals.iter().rev().take(30).sum();
        assert!(top > 0.99 * 100.0);
    }
}
