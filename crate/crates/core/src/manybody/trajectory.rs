use serde::{Deserialize, Serialize};

use super::{
    choose_branch, clamp_purity, entropy_of_spectrum, measure_step, postselect_step, Branch, DensityMatrix,
    MeasurementOutcome, Mode, BRANCH_THRESHOLD,
};
use crate::harness::output::float;
use crate::linalg::{self, CMat};
use crate::randmat::{self, haar_columns};
use crate::{c64, Error, Result, RngStream};

/// How a trajectory stores its state.
///
/// `Dense` keeps the full N×N density matrix and draws full projectors.
/// `Support` keeps only the r×r block of ρ on its support. Because Haar
/// measure is unitarily invariant, the block's spectrum follows exactly the
/// same law as the dense engine's, at O(N r²) per step instead of O(N³).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Support,
    Dense,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialState {
    #[default]
    MaximallyMixed,
    /// Maximally mixed on a rank-`rank` subspace.
    UniformOnSupport { rank: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub dimension: usize,
    pub steps: usize,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub engine: Engine,
    /// Entropy is evaluated on every `entropy_stride`-th step (0 disables it).
    #[serde(default = "one")]
    pub entropy_stride: usize,
    /// Stop once 1 − purity falls below this value.
    #[serde(default)]
    pub stop_below_impurity: Option<f64>,
}

fn one() -> usize {
    1
}

impl TrajectoryOptions {
    pub fn new(dimension: usize, steps: usize, mode: Mode, seed: u64) -> Self {
        Self {
            dimension,
            steps,
            mode,
            seed,
            stream: 0,
            initial: InitialState::MaximallyMixed,
            engine: Engine::Support,
            entropy_stride: 1,
            stop_below_impurity: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub purity: f64,
    pub entropy_nats: Option<f64>,
    pub outcome: Option<MeasurementOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub mode: Mode,
    pub dimension: usize,
    pub steps: usize,
    pub seed: u64,
    pub stream: u64,
    pub rows: Vec<TrajectoryRow>,
    /// Set when a post-selected run hit a zero-probability branch; the rows
    /// up to that point are kept.
    pub truncated: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub mode: Mode,
    #[serde(rename = "N")]
    pub dimension: usize,
    pub steps: usize,
    pub seed: u64,
    pub stream: u64,
    pub final_purity: f64,
    pub steps_to_purity_0_99: Option<usize>,
    pub truncated: Option<String>,
}

impl TrajectoryRecord {
    pub const CSV_HEADER: &'static str = "step,purity,entropy_nats,branch,prob";

    pub fn purities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.purity).collect()
    }

    pub fn final_purity(&self) -> f64 {
        self.rows.last().map(|r| r.purity).unwrap_or(f64::NAN)
    }

    /// First step at which purity exceeds `level`.
    pub fn first_step_above(&self, level: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.purity > level).map(|r| r.step)
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            mode: self.mode,
            dimension: self.dimension,
            steps: self.steps,
            seed: self.seed,
            stream: self.stream,
            final_purity: self.final_purity(),
            steps_to_purity_0_99: self.first_step_above(0.99),
            truncated: self.truncated.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let entropy = r.entropy_nats.map(float).unwrap_or_default();
            let (branch, prob) = match r.outcome {
                Some(o) => (o.branch.as_str(), float(o.probability())),
                None => ("", String::new()),
            };
            out.push_str(&format!("{},{},{},{},{}\n", r.step, float(r.purity), entropy, branch, prob));
        }
        out
    }
}

/// The state restricted to its support: an r×r unit-trace PSD block R whose
/// spectrum is the nonzero spectrum of ρ on C^N.
#[derive(Clone, Debug)]
pub struct SupportState {
    n: usize,
    block: CMat,
}

impl SupportState {
    pub fn new(n: usize, initial: InitialState) -> Result<Self> {
        if n < 2 || n % 2 == 1 {
            return Err(Error::InvalidDimension(format!("trajectories need even N ≥ 2, got {n}")));
        }
        let r = match initial {
            InitialState::MaximallyMixed => n,
            InitialState::UniformOnSupport { rank } => rank,
        };
        if r == 0 || r > n {
            return Err(Error::InvalidRank { dim: n, rank: r });
        }
        let block = CMat::from_fn(r, r, |i, j| c64::new(if i == j { 1.0 / r as f64 } else { 0.0 }, 0.0));
        Ok(Self { n, block })
    }

    /// Wraps an arbitrary unit-trace PSD block living in dimension `n`.
    pub fn from_block(n: usize, mut block: CMat) -> Result<Self> {
        if block.nrows() > n || block.nrows() != block.ncols() || n % 2 == 1 {
            return Err(Error::InvalidDimension(format!("block {}x{} in dimension {n}", block.nrows(), block.ncols())));
        }
        normalize(&mut block)?;
        Ok(Self { n, block })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> usize {
        self.block.nrows()
    }

    pub fn block(&self) -> &CMat {
        &self.block
    }

    pub fn purity(&self) -> f64 {
        clamp_purity(linalg::frobenius_sq(self.block.as_ref()), self.n)
    }

    /// Eigenvalues of the block, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(self.block.as_ref())
    }

    pub fn entropy(&self) -> Result<f64> {
        Ok(entropy_of_spectrum(&self.eigenvalues()?))
    }

    /// One Haar-random rank-N/2 measurement (or post-selection).
    pub fn step(&mut self, mode: Mode, rng: &mut RngStream) -> Result<MeasurementOutcome> {
        let (n, r, half) = (self.n, self.support(), self.n / 2);
        let (next, outcome) = if r >= half {
            // first r rows of U, split into the P₀ columns and the rest
            let w = haar_columns(n, r, rng)?;
            let c_plus = w.get(..half, ..).transpose();
            let rc = &self.block * c_plus;
            let mut p = 0.0;
            for j in 0..half {
                for i in 0..r {
                    p += (c_plus[(i, j)].conj() * rc[(i, j)]).re;
                }
            }
            let p = p.clamp(0.0, 1.0);
            let branch = pick(mode, p, rng)?;
            let next = match branch {
                Branch::Plus => c_plus.adjoint() * &rc,
                Branch::Minus => {
                    let c_minus = w.get(half.., ..).transpose();
                    let rc = &self.block * c_minus;
                    c_minus.adjoint() * &rc
                }
            };
            (next, MeasurementOutcome { branch, plus_probability: p })
        } else {
            let pi = randmat::compressed_projector(n, half, r, rng)?;
            let p = linalg::trace_product(pi.as_ref(), self.block.as_ref()).re.clamp(0.0, 1.0);
            let branch = pick(mode, p, rng)?;
            let factor = match branch {
                Branch::Plus => pi,
                Branch::Minus => {
                    let mut q = CMat::identity(r, r) - &pi;
                    linalg::hermitize(&mut q);
                    q
                }
            };
            // R' ∝ L†RL with LL† the compressed projector: same spectrum as PρP
            let l = match linalg::cholesky(factor.as_ref()) {
                Some(l) => l,
                None => linalg::psd_sqrt(factor.as_ref())?,
            };
            let rl = &self.block * &l;
            (l.adjoint() * &rl, MeasurementOutcome { branch, plus_probability: p })
        };
        self.block = next;
        normalize(&mut self.block)?;
        Ok(outcome)
    }
}

fn pick(mode: Mode, p: f64, rng: &mut RngStream) -> Result<Branch> {
    match mode {
        Mode::Measurement => Ok(choose_branch(p, rng)),
        Mode::Postselection if p <= BRANCH_THRESHOLD => Err(Error::ZeroProbabilityBranch(p)),
        Mode::Postselection => Ok(Branch::Plus),
    }
}

fn normalize(block: &mut CMat) -> Result<()> {
    linalg::hermitize(block);
    let tr = linalg::trace(block.as_ref()).re;
    if tr.is_nan() || tr <= 0.0 {
        return Err(Error::ZeroProbabilityBranch(tr));
    }
    *block *= faer::Scale(c64::new(1.0 / tr, 0.0));
    Ok(())
}

/// One trajectory from I/N with the support engine and stream 0.
pub fn run_trajectory(n: usize, steps: usize, mode: Mode, seed: u64) -> Result<TrajectoryRecord> {
    run_trajectory_with(&TrajectoryOptions::new(n, steps, mode, seed))
}

pub fn run_trajectory_with(opts: &TrajectoryOptions) -> Result<TrajectoryRecord> {
    let n = opts.dimension;
    let mut rng = RngStream::new(opts.seed, opts.stream);
    let mut record = TrajectoryRecord {
        mode: opts.mode,
        dimension: n,
        steps: opts.steps,
        seed: opts.seed,
        stream: opts.stream,
        rows: Vec::with_capacity(opts.steps + 1),
        truncated: None,
    };
    let wants_entropy = |step: usize| opts.entropy_stride > 0 && step.is_multiple_of(opts.entropy_stride);
    let done = |purity: f64| opts.stop_below_impurity.is_some_and(|f| 1.0 - purity < f);
    match opts.engine {
        Engine::Support => {
            let mut state = SupportState::new(n, opts.initial)?;
            record.rows.push(TrajectoryRow {
                step: 0,
                purity: state.purity(),
                entropy_nats: if wants_entropy(0) { Some(state.entropy()?) } else { None },
                outcome: None,
            });
            for step in 1..=opts.steps {
                if done(state.purity()) {
                    break;
                }
                let outcome = match state.step(opts.mode, &mut rng) {
                    Ok(o) => o,
                    Err(Error::ZeroProbabilityBranch(p)) => {
                        record.truncated = Some(format!("zero-probability branch (p = {p:e}) at step {step}"));
                        break;
                    }
                    Err(e) => return Err(e),
                };
                record.rows.push(TrajectoryRow {
                    step,
                    purity: state.purity(),
                    entropy_nats: if wants_entropy(step) { Some(state.entropy()?) } else { None },
                    outcome: Some(outcome),
                });
            }
        }
        Engine::Dense => {
            if n < 2 || n % 2 == 1 {
                return Err(Error::InvalidDimension(format!("trajectories need even N ≥ 2, got {n}")));
            }
            let mut rho = match opts.initial {
                InitialState::MaximallyMixed => DensityMatrix::maximally_mixed(n)?,
                InitialState::UniformOnSupport { rank } if rank >= 1 && rank <= n => {
                    let w: Vec<f64> = (0..n).map(|i| if i < rank { 1.0 / rank as f64 } else { 0.0 }).collect();
                    DensityMatrix::diagonal(&w)?
                }
                InitialState::UniformOnSupport { rank } => return Err(Error::InvalidRank { dim: n, rank }),
            };
            let entropy = |rho: &DensityMatrix, step: usize| -> Result<Option<f64>> {
                if wants_entropy(step) {
                    super::vn_entropy(rho).map(Some)
                } else {
                    Ok(None)
                }
            };
            record.rows.push(TrajectoryRow {
                step: 0,
                purity: super::purity(&rho),
                entropy_nats: entropy(&rho, 0)?,
                outcome: None,
            });
            for step in 1..=opts.steps {
                if done(super::purity(&rho)) {
                    break;
                }
                let p = randmat::sample_random_projector(n, n / 2, &mut rng)?;
                let (next, outcome) = match opts.mode {
                    Mode::Measurement => measure_step(&rho, &p, &mut rng)?,
                    Mode::Postselection => {
                        let prob = linalg::trace_product(p.as_ref(), rho.as_ref()).re;
                        match postselect_step(&rho, &p) {
                            Ok(next) => (next, MeasurementOutcome { branch: Branch::Plus, plus_probability: prob }),
                            Err(Error::ZeroProbabilityBranch(p)) => {
                                record.truncated = Some(format!("zero-probability branch (p = {p:e}) at step {step}"));
                                break;
                            }
                            Err(e) => return Err(e),
                        }
                    }
                };
                rho = next;
                record.rows.push(TrajectoryRow {
                    step,
                    purity: super::purity(&rho),
                    entropy_nats: entropy(&rho, step)?,
                    outcome: Some(outcome),
                });
            }
        }
    }
    Ok(record)
}

/// Per-step ensemble mean purity with the leading-order rank-2 prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub step: usize,
    pub mean: f64,
    pub standard_error: f64,
    pub theory: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityEnsemble {
    pub mode: Mode,
    pub dimension: usize,
    pub rank: usize,
    pub walkers: usize,
    pub seed: u64,
    pub rows: Vec<EnsembleRow>,
}

impl PurityEnsemble {
    pub const CSV_HEADER: &'static str = "step,mean_purity,stderr,theory";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.step, float(r.mean), float(r.standard_error), float(r.theory)));
        }
        out
    }

    /// Largest |mean/theory − 1| over steps t ≤ `until`.
    pub fn max_relative_deviation(&self, until: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.step <= until)
            .map(|r| (r.mean / r.theory - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `walkers` independent trajectories from the uniform state on a rank-`rank`
/// subspace; walker `w` uses stream `(seed, w)`. The theory column is the
/// rank-2 prediction and is only meaningful for `rank == 2`.
pub fn run_purity_ensemble(
    dimension: usize,
    rank: usize,
    steps: usize,
    mode: Mode,
    walkers: usize,
    seed: u64,
    workers: usize,
) -> Result<PurityEnsemble> {
    if walkers < 2 {
        return Err(Error::InvalidDimension(format!("need at least 2 walkers, got {walkers}")));
    }
    let paths = crate::parallel::map_indexed(walkers, workers, |w| {
        let mut opts = TrajectoryOptions::new(dimension, steps, mode, seed);
        opts.stream = w as u64;
        opts.initial = InitialState::UniformOnSupport { rank };
        opts.entropy_stride = 0;
        let rec = run_trajectory_with(&opts)?;
        if let Some(why) = rec.truncated {
            return Err(Error::Numerical(format!("walker {w}: {why}")));
        }
        Ok(rec.purities())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows = (0..=steps)
        .map(|t| {
            let xs: Vec<f64> = paths.iter().map(|p| p[t]).collect();
            let e = crate::moments::McEstimate::from_samples(&xs)?;
            Ok(EnsembleRow {
                step: t,
                mean: e.mean,
                standard_error: e.standard_error,
                theory: super::rank2_theory_purity(t as f64, dimension, mode),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PurityEnsemble {
        mode,
        dimension,
        rank,
        walkers,
        seed,
        rows,
    })
}
