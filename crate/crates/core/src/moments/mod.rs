//! Closed-form single-step averages of the purity update and Monte Carlo
//! estimators that check them over Haar samples.

mod montecarlo;
mod orthogonal;

pub use montecarlo::{
    mc_m_covariance, mc_noise, mc_purity_statistic, CovarianceEntry, CovarianceReport, SpectralSampler, Statistic,
    TraceBatch, VarianceEstimate,
};
pub use orthogonal::{so_quartic_moments, QuarticCoefficients, QuarticMomentReport, QuarticMomentRow};

use serde::{Deserialize, Serialize};

use crate::linalg::pairwise_sum;
use crate::manybody::{DensityMatrix, Mode};
use crate::{Error, Result, RngStream};

/// Power sums t_k = tr ρ^k for k = 2, 3, 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceProfile {
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl TraceProfile {
    /// Checks 1/N ≤ t2 ≤ 1, t3 ≤ t2^{3/2} and t4 ≤ t2² to 1e-12.
    pub fn new(t2: f64, t3: f64, t4: f64, n: usize) -> Result<Self> {
        let tol = 1e-12;
        if t2 < 1.0 / n as f64 - tol || t2 > 1.0 + tol {
            return Err(Error::InvalidState(format!("t2 = {t2} outside [1/N, 1]")));
        }
        if t3 > t2.powf(1.5) + tol || t4 > t2 * t2 + tol {
            return Err(Error::InvalidState(format!("power sums violate Schatten monotonicity: {t2}, {t3}, {t4}")));
        }
        Ok(Self { t2, t3, t4 })
    }

    pub fn from_spectrum(lambda: &[f64]) -> Self {
        let pow = |k: i32| lambda.iter().map(|l| l.powi(k)).sum::<f64>();
        Self {
            t2: pow(2),
            t3: pow(3),
            t4: pow(4),
        }
    }

    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        Ok(Self::from_spectrum(&rho.eigenvalues()?))
    }

    /// The rank-2 profile with purity t2: t3 = (3t2 − 1)/2, t4 = (t2² + 2t2 − 1)/2.
    pub fn rank2(t2: f64) -> Self {
        Self {
            t2,
            t3: (3.0 * t2 - 1.0) / 2.0,
            t4: (t2 * t2 + 2.0 * t2 - 1.0) / 2.0,
        }
    }
}

/// E[tr(PρPρ)/tr(Pρ)²] ≈ t2 + (1 − 4t3 + 3t2²)/N.
pub fn analytic_postselected_mean(p: &TraceProfile, n: usize) -> f64 {
    p.t2 + (1.0 - 4.0 * p.t3 + 3.0 * p.t2 * p.t2) / n as f64
}

/// Born-averaged purity after one measurement ≈ t2 + (1 − 2t3 + t2²)/N.
pub fn analytic_measured_mean(p: &TraceProfile, n: usize) -> f64 {
    p.t2 + (1.0 - 2.0 * p.t3 + p.t2 * p.t2) / n as f64
}

/// Variance of the one-step purity update, (4/N)(t4 − 2t3t2 + t2³), the same
/// at leading order for both modes.
pub fn analytic_noise(p: &TraceProfile, n: usize) -> f64 {
    4.0 / n as f64 * (p.t4 - 2.0 * p.t3 * p.t2 + p.t2.powi(3))
}

/// E[(tr Pρ − 1/2)²] ≈ t2/(4N).
pub fn analytic_delta_sq(p: &TraceProfile, n: usize) -> f64 {
    p.t2 / (4.0 * n as f64)
}

/// E[tr PρPρ] ≈ t2/4 + 1/(4N).
pub fn analytic_pp_trace(p: &TraceProfile, n: usize) -> f64 {
    p.t2 / 4.0 + 1.0 / (4.0 * n as f64)
}

pub fn analytic_mean(p: &TraceProfile, n: usize, mode: Mode) -> f64 {
    match mode {
        Mode::Measurement => analytic_measured_mean(p, n),
        Mode::Postselection => analytic_postselected_mean(p, n),
    }
}

/// Leading-order prediction for any [`Statistic`].
pub fn analytic_statistic(p: &TraceProfile, n: usize, statistic: Statistic) -> f64 {
    match statistic {
        Statistic::Postselected => analytic_postselected_mean(p, n),
        Statistic::Measured => analytic_measured_mean(p, n),
        Statistic::PostselectedSecondMoment => analytic_noise(p, n) + analytic_postselected_mean(p, n).powi(2),
        Statistic::MeasuredSecondMoment => analytic_noise(p, n) + analytic_measured_mean(p, n).powi(2),
        Statistic::Delta => 0.0,
        Statistic::DeltaSq => analytic_delta_sq(p, n),
        Statistic::PpTrace => analytic_pp_trace(p, n),
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Mean and s/√n of `xs` (n ≥ 2), summed pairwise in index order.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::InvalidDimension(format!("need at least 2 samples, got {n}")));
        }
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Ok(Self {
            mean,
            standard_error: (var / n as f64).sqrt(),
            samples: n,
        })
    }

    /// |mean − target| ≤ k·stderr + slack.
    pub fn agrees_with(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.standard_error + slack
    }
}

/// Outcome of the nearly-pure noise bound sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBoundReport {
    pub epsilon: f64,
    pub dimension: usize,
    pub trials: usize,
    /// max over trials of noise / (4ε²/N).
    pub max_ratio: f64,
    pub violations: usize,
}

impl NoiseBoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Random states with tr ρ² = 1 − ε (one large eigenvalue plus a random
/// tail) checked against noise ≤ 4ε²/N + 4ε³/N.
pub fn nearly_pure_noise_bound_check(epsilon: f64, n: usize, trials: usize, rng: &mut RngStream) -> Result<NoiseBoundReport> {
    if !(0.0..0.5).contains(&epsilon) || n < 2 {
        return Err(Error::InvalidState(format!("need 0 ≤ ε < 1/2 and N ≥ 2, got ε = {epsilon}, N = {n}")));
    }
    let bound = 4.0 * epsilon * epsilon / n as f64;
    let slack = 4.0 * epsilon.powi(3) / n as f64;
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..trials {
        let lambda = nearly_pure_spectrum(epsilon, n, rng);
        let noise = analytic_noise(&TraceProfile::from_spectrum(&lambda), n);
        if bound > 0.0 {
            max_ratio = max_ratio.max(noise / bound);
        }
        if noise > bound + slack {
            violations += 1;
        }
    }
    Ok(NoiseBoundReport {
        epsilon,
        dimension: n,
        trials,
        max_ratio,
        violations,
    })
}

/// Spectrum (1 − η, η w₁, …, η w_k) with w a random point of the simplex on a
/// random number k ∈ [1, N − 1] of tail eigenvalues, and η chosen so that
/// Σλ² = 1 − ε.
pub fn nearly_pure_spectrum(epsilon: f64, n: usize, rng: &mut RngStream) -> Vec<f64> {
    let k = 1 + rng.below((n - 1) as u64) as usize;
    let mut w: Vec<f64> = (0..k).map(|_| -rng.uniform().max(f64::MIN_POSITIVE).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let s: f64 = w.iter().map(|x| x * x).sum();
    // (1 − η)² + η² s = 1 − ε
    let eta = epsilon / (1.0 + (1.0 - (1.0 + s) * epsilon).sqrt());
    let mut lambda = vec![0.0; n];
    lambda[0] = 1.0 - eta;
    for (l, x) in lambda[1..].iter_mut().zip(&w) {
        *l = eta * x;
    }
    lambda
}
