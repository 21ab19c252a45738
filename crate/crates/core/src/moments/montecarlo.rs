use serde::{Deserialize, Serialize};

use super::McEstimate;
use crate::linalg::pairwise_sum;
use crate::manybody::{DensityMatrix, Mode, BRANCH_THRESHOLD};
use crate::parallel::map_indexed;
use crate::randmat::compressed_projector;
use crate::{Error, Result, RngStream};

/// Per-sample trace statistics of one Haar projector P against ρ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// tr(PρPρ)/tr(Pρ)²
    Postselected,
    /// Born average of the post-measurement purity over both branches.
    Measured,
    /// [tr(PρPρ)/tr(Pρ)²]²
    PostselectedSecondMoment,
    /// Born average of the squared post-measurement purity.
    MeasuredSecondMoment,
    /// tr(Pρ) − 1/2
    Delta,
    /// (tr(Pρ) − 1/2)²
    DeltaSq,
    /// tr(PρPρ)
    PpTrace,
}

impl Statistic {
    pub const ALL: [Statistic; 7] = [
        Statistic::Postselected,
        Statistic::Measured,
        Statistic::PostselectedSecondMoment,
        Statistic::MeasuredSecondMoment,
        Statistic::Delta,
        Statistic::DeltaSq,
        Statistic::PpTrace,
    ];

    pub fn is_postselected(self) -> bool {
        matches!(self, Statistic::Postselected | Statistic::PostselectedSecondMoment)
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Postselected => "postselected",
            Statistic::Measured => "measured",
            Statistic::PostselectedSecondMoment => "postselected_second_moment",
            Statistic::MeasuredSecondMoment => "measured_second_moment",
            Statistic::Delta => "delta",
            Statistic::DeltaSq => "delta_sq",
            Statistic::PpTrace => "pp_trace",
        }
    }
}

/// Traces p = tr(Pρ), tr(PρPρ) and tr(QρQρ) with Q = I − P.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Traces {
    p: f64,
    pp: f64,
    qq: f64,
}

impl Traces {
    fn value(&self, s: Statistic) -> Option<f64> {
        let q = 1.0 - self.p;
        // a branch whose weight is below threshold contributes nothing
        let plus = |k: i32| if self.p > BRANCH_THRESHOLD { self.pp.powi(k) / self.p.powi(2 * k - 1) } else { 0.0 };
        let minus = |k: i32| if q > BRANCH_THRESHOLD { self.qq.powi(k) / q.powi(2 * k - 1) } else { 0.0 };
        match s {
            Statistic::Postselected | Statistic::PostselectedSecondMoment if self.p < BRANCH_THRESHOLD => None,
            Statistic::Postselected => Some(self.pp / (self.p * self.p)),
            Statistic::PostselectedSecondMoment => Some((self.pp / (self.p * self.p)).powi(2)),
            Statistic::Measured => Some(plus(1) + minus(1)),
            Statistic::MeasuredSecondMoment => Some(plus(2) + minus(2)),
            Statistic::Delta => Some(self.p - 0.5),
            Statistic::DeltaSq => Some((self.p - 0.5).powi(2)),
            Statistic::PpTrace => Some(self.pp),
        }
    }
}

/// Draws Haar rank-N/2 projectors in the eigenbasis of ρ, touching only the
/// block on ρ's support.
#[derive(Clone, Debug)]
pub struct SpectralSampler {
    n: usize,
    lambda: Vec<f64>,
}

impl SpectralSampler {
    pub fn new(rho: &DensityMatrix) -> Result<Self> {
        Self::from_spectrum(&rho.eigenvalues()?, rho.dimension())
    }

    pub fn from_spectrum(lambda: &[f64], n: usize) -> Result<Self> {
        if n < 2 || n % 2 == 1 {
            return Err(Error::InvalidDimension(format!("projector sampling needs even N ≥ 2, got {n}")));
        }
        let mut support: Vec<f64> = lambda.iter().copied().filter(|&l| l > 1e-15).collect();
        support.sort_by(|a, b| b.total_cmp(a));
        if support.is_empty() || support.len() > n {
            return Err(Error::InvalidState(format!("spectrum with {} positive values in dimension {n}", support.len())));
        }
        Ok(Self { n, lambda: support })
    }

    fn traces(&self, rng: &mut RngStream) -> Result<Traces> {
        let r = self.lambda.len();
        let pi = compressed_projector(self.n, self.n / 2, r, rng)?;
        let l = &self.lambda;
        let mut p = 0.0;
        let mut pp = 0.0;
        let mut qq = 0.0;
        for j in 0..r {
            p += l[j] * pi[(j, j)].re;
            for i in 0..r {
                let w = l[i] * l[j];
                let a = pi[(i, j)].norm_sqr();
                pp += w * a;
                qq += w * if i == j { (1.0 - pi[(i, i)].re).powi(2) } else { a };
            }
        }
        Ok(Traces { p, pp, qq })
    }

    /// One sample of `statistic`; `None` for an excluded post-selected sample.
    pub fn sample(&self, statistic: Statistic, rng: &mut RngStream) -> Result<Option<f64>> {
        Ok(self.traces(rng)?.value(statistic))
    }
}

fn collect_traces(rho: &DensityMatrix, samples: usize, rng: &RngStream, workers: usize) -> Result<Vec<Traces>> {
    if samples < 100 {
        return Err(Error::InvalidDimension(format!("Monte Carlo needs ≥ 100 samples, got {samples}")));
    }
    let sampler = SpectralSampler::new(rho)?;
    map_indexed(samples, workers, |i| sampler.traces(&mut rng.derive(i as u64)))
        .into_iter()
        .collect()
}

fn gather(traces: &[Traces], s: Statistic) -> Result<Vec<f64>> {
    let xs: Vec<f64> = traces.iter().filter_map(|t| t.value(s)).collect();
    let excluded = traces.len() - xs.len();
    if excluded as f64 > 1e-3 * traces.len() as f64 {
        return Err(Error::TooManyExclusions {
            excluded,
            samples: traces.len(),
        });
    }
    Ok(xs)
}

/// One set of sampled projectors, reusable for every statistic. Sample `i`
/// draws from `rng.derive(i)`, so nothing depends on `workers`.
#[derive(Clone, Debug)]
pub struct TraceBatch {
    traces: Vec<Traces>,
}

/// Variance estimate with a delta-method standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub standard_error: f64,
    pub samples: usize,
}

impl TraceBatch {
    pub fn draw(rho: &DensityMatrix, samples: usize, rng: &RngStream, workers: usize) -> Result<Self> {
        Ok(Self {
            traces: collect_traces(rho, samples, rng, workers)?,
        })
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn estimate(&self, statistic: Statistic) -> Result<McEstimate> {
        McEstimate::from_samples(&gather(&self.traces, statistic)?)
    }

    /// Variance of the one-step purity update: E[Y₂] − E[Y₁]² with Y₁ the
    /// (Born-averaged) updated purity and Y₂ its second moment.
    pub fn noise(&self, mode: Mode) -> Result<VarianceEstimate> {
        let (first, second) = match mode {
            Mode::Postselection => (Statistic::Postselected, Statistic::PostselectedSecondMoment),
            Mode::Measurement => (Statistic::Measured, Statistic::MeasuredSecondMoment),
        };
        let kept: Vec<&Traces> = self.traces.iter().filter(|t| t.value(first).is_some()).collect();
        let excluded = self.traces.len() - kept.len();
        if excluded as f64 > 1e-3 * self.traces.len() as f64 {
            return Err(Error::TooManyExclusions {
                excluded,
                samples: self.traces.len(),
            });
        }
        let y1: Vec<f64> = kept.iter().filter_map(|t| t.value(first)).collect();
        let y2: Vec<f64> = kept.iter().filter_map(|t| t.value(second)).collect();
        let m = y1.len() as f64;
        let mu1 = pairwise_sum(&y1) / m;
        let mu2 = pairwise_sum(&y2) / m;
        let z: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| b - 2.0 * mu1 * a).collect();
        let zm = pairwise_sum(&z) / m;
        let dev: Vec<f64> = z.iter().map(|v| (v - zm).powi(2)).collect();
        let var_z = pairwise_sum(&dev) / (m - 1.0);
        Ok(VarianceEstimate {
            variance: mu2 - mu1 * mu1,
            standard_error: (var_z / m).sqrt(),
            samples: y1.len(),
        })
    }
}

/// Monte Carlo mean of a per-sample trace statistic.
pub fn mc_purity_statistic(
    rho: &DensityMatrix,
    statistic: Statistic,
    samples: usize,
    rng: &RngStream,
    workers: usize,
) -> Result<McEstimate> {
    TraceBatch::draw(rho, samples, rng, workers)?.estimate(statistic)
}

pub fn mc_noise(rho: &DensityMatrix, mode: Mode, samples: usize, rng: &RngStream, workers: usize) -> Result<VarianceEstimate> {
    TraceBatch::draw(rho, samples, rng, workers)?.noise(mode)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    /// Zero-based (a, b, c, d) for E[M_ab M_cd], or (a, b) for E[M_ab].
    pub indices: Vec<usize>,
    /// δ_ad δ_bc / N for covariances, 0 for means.
    pub leading: f64,
    /// Exact finite-N value.
    pub exact: f64,
    pub real: McEstimate,
    pub imag: McEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub dimension: usize,
    pub entries: Vec<CovarianceEntry>,
}

/// Monte Carlo over M = 2UP₀U† − I on the leading 2×2 block. Covers
/// the δ_ad δ_bc pattern ((0,1,1,0) and (0,0,0,0)), two off-pattern
/// controls ((0,1,0,1) and (0,0,1,1)) and the means E[M₀₁], E[M₀₀].
pub fn mc_m_covariance(n: usize, samples: usize, rng: &RngStream, workers: usize) -> Result<CovarianceReport> {
    if n < 4 || n % 2 == 1 {
        return Err(Error::InvalidDimension(format!("M covariance needs even N ≥ 4, got {n}")));
    }
    let blocks: Vec<_> = map_indexed(samples, workers, |i| compressed_projector(n, n / 2, 2, &mut rng.derive(i as u64)))
        .into_iter()
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let e_pp = |a, b, c, dd| ((nf * nf - 2.0) * d(a, b) * d(c, dd) + nf * d(a, dd) * d(b, c)) / (4.0 * (nf * nf - 1.0));
    let m = |pi: &crate::linalg::CMat, a: usize, b: usize| pi[(a, b)] * 2.0 - crate::c64::new(d(a, b), 0.0);
    let mut entries = Vec::new();
    for (a, b, c, dd) in [(0, 1, 1, 0), (0, 0, 0, 0), (0, 1, 0, 1), (0, 0, 1, 1)] {
        let vals: Vec<_> = blocks.iter().map(|pi| m(pi, a, b) * m(pi, c, dd)).collect();
        let exact = 4.0 * e_pp(a, b, c, dd) - d(a, b) * d(c, dd) * 2.0 + d(a, b) * d(c, dd);
        entries.push(CovarianceEntry {
            indices: vec![a, b, c, dd],
            leading: d(a, dd) * d(b, c) / nf,
            exact,
            real: McEstimate::from_samples(&vals.iter().map(|z| z.re).collect::<Vec<_>>())?,
            imag: McEstimate::from_samples(&vals.iter().map(|z| z.im).collect::<Vec<_>>())?,
        });
    }
    for (a, b) in [(0, 1), (0, 0)] {
        let vals: Vec<_> = blocks.iter().map(|pi| m(pi, a, b)).collect();
        entries.push(CovarianceEntry {
            indices: vec![a, b],
            leading: 0.0,
            exact: 0.0,
            real: McEstimate::from_samples(&vals.iter().map(|z| z.re).collect::<Vec<_>>())?,
            imag: McEstimate::from_samples(&vals.iter().map(|z| z.im).collect::<Vec<_>>())?,
        });
    }
    Ok(CovarianceReport { dimension: n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::maximally_mixed;
    use crate::moments::{analytic_pp_trace, analytic_statistic, TraceProfile};

    #[test]
    fn maximally_mixed_is_deterministic() {
        let n = 16;
        let rho = maximally_mixed(n).unwrap();
        let rng = RngStream::new(1, 0);
        let p = mc_purity_statistic(&rho, Statistic::Postselected, 200, &rng, 1).unwrap();
        assert!((p.mean - 2.0 / n as f64).abs() < 1e-12);
        let d = mc_purity_statistic(&rho, Statistic::Delta, 200, &rng, 1).unwrap();
        assert!(d.mean.abs() < 1e-12);
    }

    #[test]
    fn delta_has_zero_mean_and_pp_trace_matches() {
        let n = 16;
        let rho = crate::manybody::DensityMatrix::diagonal(&{
            let mut w = vec![0.0; n];
            w[..4].copy_from_slice(&[0.4, 0.3, 0.2, 0.1]);
            w
        })
        .unwrap();
        let rng = RngStream::new(2, 0);
        let d = mc_purity_statistic(&rho, Statistic::Delta, 4000, &rng, 2).unwrap();
        assert!(d.agrees_with(0.0, 3.0, 0.0), "{d:?}");
        let prof = TraceProfile::from_state(&rho).unwrap();
        let pp = mc_purity_statistic(&rho, Statistic::PpTrace, 4000, &rng, 2).unwrap();
        let nf = n as f64;
        assert!(pp.agrees_with(analytic_pp_trace(&prof, n), 3.0, 4.0 / (nf * nf)), "{pp:?}");
        let m = mc_purity_statistic(&rho, Statistic::Measured, 4000, &rng, 2).unwrap();
        assert!(m.agrees_with(analytic_statistic(&prof, n, Statistic::Measured), 3.0, 4.0 / (nf * nf)));
    }

    #[test]
    fn projectors_at_n16_average_half() {
        let n = 16;
        let rho = maximally_mixed(n).unwrap();
        let rng = RngStream::new(3, 0);
        let e = mc_purity_statistic(&rho, Statistic::Delta, 10_000, &rng, 1).unwrap();
        assert!((e.mean + 0.5 - 0.5).abs() <= 3.0 * e.standard_error + 1e-12);
    }

    #[test]
    fn worker_count_does_not_change_estimates() {
        let rho = crate::manybody::DensityMatrix::diagonal(&[0.7, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let rng = RngStream::new(4, 0);
        let a = mc_purity_statistic(&rho, Statistic::MeasuredSecondMoment, 300, &rng, 1).unwrap();
        let b = mc_purity_statistic(&rho, Statistic::MeasuredSecondMoment, 300, &rng, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn covariance_pattern() {
        let n = 64;
        let r = mc_m_covariance(n, 20_000, &RngStream::new(5, 0), 2).unwrap();
        let nf = n as f64;
        for e in &r.entries {
            assert!(e.real.agrees_with(e.exact, 3.5, 0.0), "{e:?}");
            assert!(e.real.agrees_with(e.leading, 3.5, 4.0 / (nf * nf)), "{e:?}");
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let rho = maximally_mixed(4).unwrap();
        assert!(mc_purity_statistic(&rho, Statistic::Delta, 10, &RngStream::new(0, 0), 1).is_err());
    }
}
