//! Verification suites: each drives a module's closed-form checks and returns
//! a machine-readable pass/fail report.

use serde::{Deserialize, Serialize};

use crate::dyson::generator_identity_check;
use crate::fermion::oracle_check;
use crate::manybody::{inequality_check, DensityMatrix, Mode};
use crate::moments::{analytic_noise, analytic_statistic, Statistic, TraceBatch, TraceProfile};
use crate::stabilizer::{exponential_base, run_ensemble, StabilizerOptions};
use crate::{Result, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Moments,
    FermionOracle,
    DysonIdentity,
    Inequalities,
    StabilizerStats,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Moments,
        Suite::FermionOracle,
        Suite::DysonIdentity,
        Suite::Inequalities,
        Suite::StabilizerStats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Moments => "moments",
            Suite::FermionOracle => "fermion-oracle",
            Suite::DysonIdentity => "dyson-identity",
            Suite::Inequalities => "inequalities",
            Suite::StabilizerStats => "stabilizer-stats",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub details: serde_json::Value,
}

/// Sample counts for the Monte Carlo suites. Also the `verify` config file
/// format; missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub seed: u64,
    pub workers: usize,
    pub moment_dimensions: Vec<usize>,
    pub moment_samples: usize,
    pub stabilizer_trajectories: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            moment_dimensions: vec![32, 64, 128],
            moment_samples: 20_000,
            stabilizer_trajectories: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub dimension: usize,
    pub state: String,
    pub statistic: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub analytic: f64,
    /// Allowed |estimate − analytic| beyond 3 stderr.
    pub slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    pub samples: usize,
    pub checks: Vec<MomentCheck>,
}

impl MomentsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const MEAN_STATISTICS: [Statistic; 5] = [
    Statistic::Measured,
    Statistic::Postselected,
    Statistic::Delta,
    Statistic::DeltaSq,
    Statistic::PpTrace,
];

/// The test states: I/N and diag(0.7, 0.3, 0, …).
pub fn moment_states(n: usize) -> Result<Vec<(&'static str, DensityMatrix)>> {
    let mut w = vec![0.0; n];
    w[0] = 0.7;
    w[1] = 0.3;
    Ok(vec![("maximally_mixed", DensityMatrix::maximally_mixed(n)?), ("rank2", DensityMatrix::diagonal(&w)?)])
}

/// Every mean statistic with budget 3σ + 4/N² and both noise variances with
/// 3σ + 8/N², on each test state at each dimension.
pub fn verify_moments(dimensions: &[usize], samples: usize, seed: u64, workers: usize) -> Result<MomentsReport> {
    let base = RngStream::new(seed, 0);
    let mut checks = Vec::new();
    let mut label = 0u64;
    for &n in dimensions {
        let nf = n as f64;
        for (state, rho) in moment_states(n)? {
            let profile = TraceProfile::from_state(&rho)?;
            let batch = TraceBatch::draw(&rho, samples, &base.derive(label), workers)?;
            label += 1;
            for stat in MEAN_STATISTICS {
                let e = batch.estimate(stat)?;
                let analytic = analytic_statistic(&profile, n, stat);
                let slack = 4.0 / (nf * nf);
                checks.push(MomentCheck {
                    dimension: n,
                    state: state.into(),
                    statistic: stat.name().into(),
                    estimate: e.mean,
                    standard_error: e.standard_error,
                    analytic,
                    slack,
                    passed: e.agrees_with(analytic, 3.0, slack),
                });
            }
            for mode in [Mode::Measurement, Mode::Postselection] {
                let v = batch.noise(mode)?;
                let analytic = analytic_noise(&profile, n);
                let slack = 8.0 / (nf * nf);
                checks.push(MomentCheck {
                    dimension: n,
                    state: state.into(),
                    statistic: format!("noise_{mode}"),
                    estimate: v.variance,
                    standard_error: v.standard_error,
                    analytic,
                    slack,
                    passed: (v.variance - analytic).abs() <= 3.0 * v.standard_error + slack,
                });
            }
        }
    }
    Ok(MomentsReport { samples, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizerStatsReport {
    pub rates_n10: crate::stabilizer::EnsembleReport,
    pub mean_steps_to_pure: Vec<(usize, f64)>,
    pub fitted_base: f64,
    pub rates_agree: bool,
    pub monotone: bool,
}

impl StabilizerStatsReport {
    pub fn passed(&self) -> bool {
        self.rates_agree && self.monotone && (self.fitted_base - 2.0).abs() <= 0.2
    }
}

/// Rate check at n = 10 and the steps-to-pure fit over n ∈ {6, 8, 10}.
pub fn verify_stabilizer(trajectories: usize, seed: u64, workers: usize) -> Result<StabilizerStatsReport> {
    let mut points = Vec::new();
    let mut monotone = true;
    let mut rates = None;
    for n in [6usize, 8, 10] {
        let opts = StabilizerOptions::new(n, 1 << 20, seed.wrapping_add(n as u64));
        let r = run_ensemble(&opts, trajectories, workers)?;
        monotone &= r.monotone_violations == 0 && r.unpurified == 0;
        if let Some(t) = &r.steps_to_pure {
            points.push((n, t.mean));
        }
        if n == 10 {
            rates = Some(r);
        }
    }
    let rates = rates.expect("n = 10 is in the sweep");
    Ok(StabilizerStatsReport {
        rates_agree: rates.rates_agree(300, 3.0),
        fitted_base: exponential_base(&points)?,
        mean_steps_to_pure: points,
        monotone,
        rates_n10: rates,
    })
}

pub fn verify(suite: Suite, settings: &VerifySettings) -> Result<SuiteReport> {
    let seed = settings.seed;
    let (passed, details) = match suite {
        Suite::Moments => {
            let r = verify_moments(&settings.moment_dimensions, settings.moment_samples, seed, settings.workers)?;
            (r.passed(), serde_json::to_value(&r)?)
        }
        Suite::FermionOracle => {
            let r = oracle_check(&[2, 3, 4, 5], 100, &mut RngStream::new(seed, 0))?;
            (r.max_deviation() < 1e-10, serde_json::to_value(&r)?)
        }
        Suite::DysonIdentity => {
            let r = generator_identity_check(1000, 8, &mut RngStream::new(seed, 0))?;
            (r.passed(1e-12), serde_json::to_value(&r)?)
        }
        Suite::Inequalities => {
            let r = inequality_check(&[4, 8, 16], 1000, 1e-9, &RngStream::new(seed, 0))?;
            (r.passed(), serde_json::to_value(&r)?)
        }
        Suite::StabilizerStats => {
            let r = verify_stabilizer(settings.stabilizer_trajectories, seed, settings.workers)?;
            (r.passed(), serde_json::to_value(&r)?)
        }
    };
    Ok(SuiteReport { suite, passed, details })
}
