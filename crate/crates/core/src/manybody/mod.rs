//! Density-matrix dynamics under Haar-random rank-N/2 projective measurements.
//!
//! Each step draws P = U P₀ U† and either keeps the P branch unconditionally
//! (post-selection) or samples P versus I − P by the Born rule (measurement).

mod regimes;
mod trajectory;

pub use regimes::{late_decay_rate, longest_descent, mid_regime, initial_slope, RegimeReport};
pub use trajectory::{
    run_purity_ensemble, run_trajectory, run_trajectory_with, Engine, EnsembleRow, InitialState, PurityEnsemble, SupportState,
    TrajectoryOptions, TrajectoryRecord,
    TrajectoryRow, TrajectorySummary,
};

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat};
use crate::randmat::{sample_complete_measurement, sample_haar_unitary, Projector};
use crate::{c64, Error, Result, RngStream};

/// Probabilities below this are treated as zero when choosing a branch.
pub const BRANCH_THRESHOLD: f64 = 1e-12;
/// Eigenvalues at or below this are dropped from the entropy sum.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Measurement,
    Postselection,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Measurement => "measurement",
            Mode::Postselection => "postselection",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

/// The branch taken by one measurement and the Born weight tr(Pρ) of the
/// plus branch at the time of sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub branch: Branch,
    pub plus_probability: f64,
}

impl MeasurementOutcome {
    /// Probability of the branch that was realized.
    pub fn probability(&self) -> f64 {
        match self.branch {
            Branch::Plus => self.plus_probability,
            Branch::Minus => 1.0 - self.plus_probability,
        }
    }
}

/// Samples a branch with plus-probability `p`, forcing the dominant branch
/// when `p` is within [`BRANCH_THRESHOLD`] of 0 or 1. Always consumes exactly
/// one uniform draw.
pub(crate) fn choose_branch(p: f64, rng: &mut RngStream) -> Branch {
    let u = rng.uniform();
    if p >= 1.0 - BRANCH_THRESHOLD {
        Branch::Plus
    } else if p <= BRANCH_THRESHOLD || u >= p {
        Branch::Minus
    } else {
        Branch::Plus
    }
}

/// A unit-trace Hermitian positive semidefinite N×N matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    /// Validates Hermiticity (1e-12), trace (1e-9) and positivity (−1e-9).
    pub fn new(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || mat.ncols() != n {
            return Err(Error::InvalidDimension(format!("density matrix must be square and non-empty, got {}x{}", n, mat.ncols())));
        }
        let herm = linalg::hermiticity_error(mat.as_ref());
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!("not Hermitian (error {herm:e})")));
        }
        let tr = linalg::trace(mat.as_ref()).re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let min = linalg::eigvalsh(mat.as_ref())?.first().copied().unwrap_or(0.0);
        if min < -1e-9 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(mat))
    }

    pub(crate) fn from_raw(mut mat: CMat) -> Self {
        linalg::hermitize(&mut mat);
        let tr = linalg::trace(mat.as_ref()).re;
        Self(mat * faer::Scale(c64::new(1.0 / tr, 0.0)))
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(format!("maximally mixed state needs N ≥ 2, got {n}")));
        }
        Ok(Self(CMat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(1.0 / n as f64, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })))
    }

    /// diag(weights); weights must be non-negative and sum to 1.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        Self::new(CMat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(weights[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        }))
    }

    /// |v⟩⟨v| for a non-zero vector, normalized.
    pub fn pure(v: &[c64]) -> Result<Self> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let n = v.len();
        Ok(Self::from_raw(CMat::from_fn(n, n, |i, j| v[i] * v[j].conj() / norm)))
    }

    /// U diag(λ) U† for a unitary U.
    pub fn from_spectrum(lambda: &[f64], u: MatRef<'_, c64>) -> Result<Self> {
        let n = lambda.len();
        let ul = CMat::from_fn(n, n, |i, j| u[(i, j)] * lambda[j]);
        let mut m = &ul * u.adjoint();
        linalg::hermitize(&mut m);
        Self::new(m)
    }

    pub fn dimension(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(self.as_ref())
    }
}

pub fn maximally_mixed(n: usize) -> Result<DensityMatrix> {
    DensityMatrix::maximally_mixed(n)
}

/// tr ρ², clamped into [1/N, 1] when round-off leaves it by less than 1e-9.
pub fn purity(rho: &DensityMatrix) -> f64 {
    clamp_purity(linalg::frobenius_sq(rho.as_ref()), rho.dimension())
}

pub(crate) fn clamp_purity(p: f64, n: usize) -> f64 {
    let lo = 1.0 / n as f64;
    if p < lo && lo - p < 1e-9 {
        lo
    } else if p > 1.0 && p - 1.0 < 1e-9 {
        1.0
    } else {
        p
    }
}

/// −Σ λ ln λ over eigenvalues above [`ENTROPY_CUTOFF`].
pub fn entropy_of_spectrum(lambda: &[f64]) -> f64 {
    -lambda
        .iter()
        .filter(|&&l| l > ENTROPY_CUTOFF)
        .map(|&l| l * l.ln())
        .sum::<f64>()
}

pub fn vn_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(entropy_of_spectrum(&rho.eigenvalues()?))
}

fn sandwich(p: MatRef<'_, c64>, rho: MatRef<'_, c64>) -> CMat {
    let pr = p * rho;
    &pr * p
}

/// ρ' = PρP / tr(Pρ).
pub fn postselect_step(rho: &DensityMatrix, p: &Projector) -> Result<DensityMatrix> {
    check_dims(rho, p)?;
    let prob = linalg::trace_product(p.as_ref(), rho.as_ref()).re;
    if prob <= BRANCH_THRESHOLD {
        return Err(Error::ZeroProbabilityBranch(prob));
    }
    Ok(DensityMatrix::from_raw(sandwich(p.as_ref(), rho.as_ref())))
}

/// Born-rule measurement of {P, I − P}.
pub fn measure_step(rho: &DensityMatrix, p: &Projector, rng: &mut RngStream) -> Result<(DensityMatrix, MeasurementOutcome)> {
    check_dims(rho, p)?;
    let prob = linalg::trace_product(p.as_ref(), rho.as_ref()).re.clamp(0.0, 1.0);
    let branch = choose_branch(prob, rng);
    let next = match branch {
        Branch::Plus => sandwich(p.as_ref(), rho.as_ref()),
        Branch::Minus => sandwich(p.complement().as_ref(), rho.as_ref()),
    };
    Ok((
        DensityMatrix::from_raw(next),
        MeasurementOutcome {
            branch,
            plus_probability: prob,
        },
    ))
}

fn check_dims(rho: &DensityMatrix, p: &Projector) -> Result<()> {
    if rho.dimension() != p.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {}, projector {}",
            rho.dimension(),
            p.dimension()
        )));
    }
    Ok(())
}

/// Outcome-averaged entropy and square-root purity after a complete
/// projective measurement: (Σ pᵢ S(σᵢ), Σ pᵢ √tr σᵢ²) over branches with
/// pᵢ above [`BRANCH_THRESHOLD`].
pub fn avg_entropy_after_measurement(rho: &DensityMatrix, projectors: &[Projector]) -> Result<(f64, f64)> {
    let n = rho.dimension();
    if projectors.is_empty() {
        return Err(Error::InvalidMeasurement("empty projector list".into()));
    }
    let mut total = CMat::zeros(n, n);
    for (i, p) in projectors.iter().enumerate() {
        check_dims(rho, p)?;
        total += p.as_ref();
        for q in &projectors[i + 1..] {
            let pq = p.as_ref() * q.as_ref();
            let err = pq.norm_max();
            if err > 1e-10 {
                return Err(Error::InvalidMeasurement(format!("projectors not orthogonal (|PᵢPⱼ| = {err:e})")));
            }
        }
    }
    let err = linalg::max_abs_diff(total.as_ref(), CMat::identity(n, n).as_ref());
    if err > 1e-10 {
        return Err(Error::InvalidMeasurement(format!("projectors do not sum to I (error {err:e})")));
    }
    let mut entropy = 0.0;
    let mut root_purity = 0.0;
    for p in projectors {
        let prob = linalg::trace_product(p.as_ref(), rho.as_ref()).re;
        if prob <= BRANCH_THRESHOLD {
            continue;
        }
        let sigma = DensityMatrix::from_raw(sandwich(p.as_ref(), rho.as_ref()));
        entropy += prob * vn_entropy(&sigma)?;
        root_purity += prob * linalg::frobenius_sq(sigma.as_ref()).sqrt();
    }
    Ok((entropy, root_purity))
}

/// Violations of "measurement does not raise the outcome-averaged entropy,
/// nor lower the outcome-averaged square-root purity" over random cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub dimensions: Vec<usize>,
    pub cases: usize,
    pub slack: f64,
    pub entropy_violations: usize,
    pub root_purity_violations: usize,
    /// Largest Σ pᵢ S(σᵢ) − S(ρ) seen.
    pub max_entropy_change: f64,
    /// Largest √tr ρ² − Σ pᵢ √tr σᵢ² seen.
    pub max_root_purity_loss: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.entropy_violations == 0 && self.root_purity_violations == 0
    }
}

/// Random states (Haar basis, random rank, uniform-simplex-like spectrum)
/// against random complete measurements with 2..=N outcomes. Case `c` draws
/// from `rng.derive(c)`.
pub fn inequality_check(dimensions: &[usize], cases: usize, slack: f64, rng: &RngStream) -> Result<InequalityReport> {
    if dimensions.is_empty() || dimensions.iter().any(|&n| n < 2) {
        return Err(Error::InvalidDimension(format!("dimensions must be at least 2, got {dimensions:?}")));
    }
    let mut report = InequalityReport {
        dimensions: dimensions.to_vec(),
        cases,
        slack,
        entropy_violations: 0,
        root_purity_violations: 0,
        max_entropy_change: f64::NEG_INFINITY,
        max_root_purity_loss: f64::NEG_INFINITY,
    };
    for c in 0..cases {
        let mut r = rng.derive(c as u64);
        let n = dimensions[c % dimensions.len()];
        let rank = 1 + r.below(n as u64) as usize;
        let mut lambda: Vec<f64> = (0..rank).map(|_| -r.uniform().max(f64::MIN_POSITIVE).ln()).collect();
        lambda.resize(n, 0.0);
        let total: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= total);
        let u = sample_haar_unitary(n, &mut r)?;
        let rho = DensityMatrix::from_spectrum(&lambda, u.as_ref())?;

        let outcomes = 2 + r.below(n as u64 - 1) as usize;
        let mut ranks = vec![1usize; outcomes];
        for _ in outcomes..n {
            ranks[r.below(outcomes as u64) as usize] += 1;
        }
        let projectors = sample_complete_measurement(&ranks, &mut r)?;
        let (s_after, root_after) = avg_entropy_after_measurement(&rho, &projectors)?;
        let ds = s_after - vn_entropy(&rho)?;
        let dr = purity(&rho).sqrt() - root_after;
        report.max_entropy_change = report.max_entropy_change.max(ds);
        report.max_root_purity_loss = report.max_root_purity_loss.max(dr);
        report.entropy_violations += usize::from(ds > slack);
        report.root_purity_violations += usize::from(dr > slack);
    }
    Ok(report)
}

/// Leading-order ensemble purity for a rank-2 start at purity 1/2.
///
/// Measurement: 1 − 1/(3e^{t/N} − 1). Post-selection: 1 − 1/(3t/N + 2).
/// Both solve the closed rank-2 drift equations and are controlled only for
/// t ≪ N.
pub fn rank2_theory_purity(t: f64, n: usize, mode: Mode) -> f64 {
    let x = t / n as f64;
    match mode {
        Mode::Measurement => 1.0 - 1.0 / (3.0 * x.exp() - 1.0),
        Mode::Postselection => 1.0 - 1.0 / (3.0 * x + 2.0),
    }
}
