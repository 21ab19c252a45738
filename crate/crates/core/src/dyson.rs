//! Low-rank eigenvalue diffusion: the generator of the measured purity
//! dynamics as an explicit drift/diffusion pair, and an Euler–Maruyama
//! integrator with dt = 1/N.

use serde::{Deserialize, Serialize};

use crate::linalg::{eigh_real, pairwise_sum, RMat};
use crate::manybody::{InitialState, Mode, SupportState};
use crate::moments::McEstimate;
use crate::parallel::map_indexed;
use crate::{Error, Result, RngStream};

/// Gap below which a spectrum counts as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;
/// Half-width of the symmetric splitting applied to degenerate spectra.
pub const SPLITTING: f64 = 1e-7;
/// Σ eigenvalues in [−CLIP_WINDOW, 0) are treated as round-off.
pub const CLIP_WINDOW: f64 = 1e-12;
/// Allowed negativity of an eigenvalue before it is clipped.
pub const NEGATIVITY: f64 = 1e-9;
/// Substep control: h ≤ κ·gap/max|μ| and h ≤ κ²·gap²/max Σ_aa.
pub const KAPPA: f64 = 0.1;

/// Eigenvalues of a rank-d state, kept sorted in descending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Checks Σλ = 1 to 1e-9 and λ ≥ −1e-9.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension("spectrum needs at least one value".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("spectrum sums to {sum}")));
        }
        if let Some(v) = values.iter().find(|v| **v < -NEGATIVITY || !v.is_finite()) {
            return Err(Error::InvalidState(format!("spectrum has entry {v}")));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self(values))
    }

    /// Uniform weight 1/d on d levels.
    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn purity(&self) -> f64 {
        self.0.iter().map(|l| l * l).sum()
    }

    /// Smallest pairwise gap, +∞ for d = 1.
    pub fn min_gap(&self) -> f64 {
        self.0.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
    }

    pub fn is_degenerate(&self) -> bool {
        self.min_gap() < DEGENERACY_GAP
    }

    /// Spreads the levels symmetrically by up to ±1e-7 around their values,
    /// preserving the sum. Returns whether anything changed.
    pub fn split_degeneracies(&mut self) -> bool {
        let d = self.rank();
        if d < 2 || !self.is_degenerate() {
            return false;
        }
        for (a, v) in self.0.iter_mut().enumerate() {
            // descending order, so the largest level gets +SPLITTING
            *v += SPLITTING * (1.0 - 2.0 * a as f64 / (d - 1) as f64);
        }
        true
    }
}

/// Drift μ and diffusion Σ of the generator at a spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorCoefficients {
    pub drift: Vec<f64>,
    pub diffusion: RMat,
}

/// μ_a = Σ_{b≠a} λ_aλ_b/(λ_a−λ_b), Σ_ab = λ_aλ_b(δ_ab − λ_a − λ_b + Σλ²).
pub fn generator_coefficients(lambda: &Spectrum) -> Result<GeneratorCoefficients> {
    let l = lambda.values();
    let d = l.len();
    if d > 1 && lambda.min_gap() < DEGENERACY_GAP {
        return Err(Error::DegenerateSpectrum {
            gap: lambda.min_gap(),
            threshold: DEGENERACY_GAP,
        });
    }
    let mut drift = vec![0.0; d];
    for a in 0..d {
        for b in (a + 1)..d {
            let pair = l[a] * l[b] / (l[a] - l[b]);
            drift[a] += pair;
            drift[b] -= pair;
        }
    }
    let s = lambda.purity();
    let diffusion = RMat::from_fn(d, d, |a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        l[a] * l[b] * (delta - l[a] - l[b] + s)
    });
    Ok(GeneratorCoefficients { drift, diffusion })
}

/// 𝔇F for F = Σλ² in closed form: (Σλ)² − Σλ² + S − 2Σλ³ + S².
pub fn apply_generator_to_purity(lambda: &Spectrum) -> f64 {
    let l = lambda.values();
    let t1: f64 = l.iter().sum();
    let s = lambda.purity();
    let t3: f64 = l.iter().map(|x| x.powi(3)).sum();
    t1 * t1 - s + s - 2.0 * t3 + s * s
}

/// 𝔇F = μ·∇F + ½ Σ:∇²F for a given gradient and Hessian of F at λ.
pub fn apply_generator(coeffs: &GeneratorCoefficients, gradient: &[f64], hessian: &RMat) -> f64 {
    let d = gradient.len();
    let first: f64 = coeffs.drift.iter().zip(gradient).map(|(m, g)| m * g).sum();
    let mut second = 0.0;
    for a in 0..d {
        for b in 0..d {
            second += coeffs.diffusion[(a, b)] * hessian[(a, b)];
        }
    }
    first + 0.5 * second
}

/// Deviations of the generator identities over random spectra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheck {
    pub cases: usize,
    pub max_rank: usize,
    /// |closed form − μ·∇F − ½Σ:∇²F| for F = Σλ².
    pub purity_deviation: f64,
    /// |closed form − (1 − 2Σλ³ + (Σλ²)²)| on normalized spectra.
    pub moment_deviation: f64,
    /// Largest |𝔇g(Σλ)| relative to the size of its two terms, over g = s², s³, eˢ.
    pub annihilation: f64,
}

impl GeneratorCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.purity_deviation <= tol && self.moment_deviation <= tol && self.annihilation <= tol
    }
}

/// Normalized spectrum of rank `d` with entries bounded away from zero.
pub fn random_spectrum(d: usize, rng: &mut RngStream) -> Result<Spectrum> {
    let raw: Vec<f64> = (0..d).map(|_| rng.uniform() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    Spectrum::new(raw.into_iter().map(|x| x / s).collect())
}

/// Checks the purity identity and that functions of Σλ are annihilated,
/// cycling the rank through 1..=`max_rank`.
pub fn generator_identity_check(cases: usize, max_rank: usize, rng: &mut RngStream) -> Result<GeneratorCheck> {
    let mut out = GeneratorCheck {
        cases,
        max_rank,
        purity_deviation: 0.0,
        moment_deviation: 0.0,
        annihilation: 0.0,
    };
    for i in 0..cases {
        let d = 1 + i % max_rank.max(1);
        let l = random_spectrum(d, rng)?;
        let c = generator_coefficients(&l)?;
        let v = l.values();
        let grad: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        let hess = RMat::from_fn(d, d, |a, b| if a == b { 2.0 } else { 0.0 });
        let closed = apply_generator_to_purity(&l);
        out.purity_deviation = out.purity_deviation.max((closed - apply_generator(&c, &grad, &hess)).abs());
        let t3: f64 = v.iter().map(|x| x.powi(3)).sum();
        let t2 = l.purity();
        out.moment_deviation = out.moment_deviation.max((closed - (1.0 - 2.0 * t3 + t2 * t2)).abs());

        let s: f64 = v.iter().sum();
        for (g1, g2) in [(2.0 * s, 2.0), (3.0 * s * s, 6.0 * s), (s.exp(), s.exp())] {
            let grad = vec![g1; d];
            let hess = RMat::from_fn(d, d, |_, _| g2);
            let scale = c.drift.iter().map(|m| (m * g1).abs()).sum::<f64>()
                + 0.5 * (0..d).flat_map(|a| (0..d).map(move |b| (a, b))).map(|(a, b)| (c.diffusion[(a, b)] * g2).abs()).sum::<f64>();
            let value = apply_generator(&c, &grad, &hess).abs();
            out.annihilation = out.annihilation.max(value / scale.max(1.0));
        }
    }
    Ok(out)
}

/// Factor L with LLᵀ = Σ from the symmetric eigendecomposition.
fn diffusion_factor(lambda: &Spectrum, sigma: &RMat) -> Result<RMat> {
    let (w, u) = eigh_real(sigma.as_ref())?;
    if let Some(&bad) = w.iter().find(|&&x| x < -CLIP_WINDOW) {
        return Err(Error::Covariance {
            eigenvalue: bad,
            spectrum: lambda.values().to_vec(),
        });
    }
    let d = w.len();
    Ok(RMat::from_fn(d, d, |i, j| u[(i, j)] * w[j].max(0.0).sqrt()))
}

/// Counters kept by the integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: u64,
    pub substeps: u64,
    pub splits: u64,
    pub clipped: u64,
}

impl StepStats {
    pub fn merge(&mut self, other: &StepStats) {
        self.steps += other.steps;
        self.substeps += other.substeps;
        self.splits += other.splits;
        self.clipped += other.clipped;
    }

    /// Fraction of substeps that needed positivity clipping.
    pub fn clip_fraction(&self) -> f64 {
        if self.substeps == 0 {
            0.0
        } else {
            self.clipped as f64 / self.substeps as f64
        }
    }
}

fn advance(lambda: &Spectrum, coeffs: &GeneratorCoefficients, h: f64, rng: &mut RngStream, stats: &mut StepStats) -> Result<Spectrum> {
    let d = lambda.rank();
    let factor = diffusion_factor(lambda, &coeffs.diffusion)?;
    let xi: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let root = h.sqrt();
    let mut next: Vec<f64> = (0..d)
        .map(|a| lambda.values()[a] + coeffs.drift[a] * h + root * (0..d).map(|b| factor[(a, b)] * xi[b]).sum::<f64>())
        .collect();
    let mut clipped = false;
    for v in next.iter_mut() {
        if *v < -NEGATIVITY {
            *v = 0.0;
            clipped = true;
        }
    }
    stats.clipped += clipped as u64;
    stats.substeps += 1;
    let sum: f64 = next.iter().sum();
    next.iter_mut().for_each(|v| *v /= sum);
    Spectrum::new(next)
}

/// One literal Euler–Maruyama step of size dt. Degenerate input is split
/// first so the drift is finite.
pub fn euler_maruyama_step(lambda: &Spectrum, dt: f64, rng: &mut RngStream) -> Result<Spectrum> {
    if dt <= 0.0 {
        return Err(Error::InvalidDimension(format!("dt must be positive, got {dt}")));
    }
    let mut l = lambda.clone();
    l.split_degeneracies();
    let coeffs = generator_coefficients(&l)?;
    advance(&l, &coeffs, dt, rng, &mut StepStats::default())
}

/// Advances λ by dt with adaptive substeps so that no substep moves a level
/// by more than a fraction κ of the smallest gap.
pub fn integrate_step(lambda: &mut Spectrum, dt: f64, rng: &mut RngStream, stats: &mut StepStats) -> Result<()> {
    let mut remaining = dt;
    while remaining > 0.0 {
        if lambda.split_degeneracies() {
            stats.splits += 1;
        }
        let coeffs = generator_coefficients(lambda)?;
        let gap = lambda.min_gap();
        let mut h = remaining;
        let max_drift = coeffs.drift.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_var = (0..lambda.rank()).fold(0.0f64, |m, a| m.max(coeffs.diffusion[(a, a)]));
        if gap.is_finite() {
            if max_drift > 0.0 {
                h = h.min(KAPPA * gap / max_drift);
            }
            if max_var > 0.0 {
                h = h.min(KAPPA * KAPPA * gap * gap / max_var);
            }
        }
        // guard against stalling on two levels pinned together at zero
        h = h.max(dt * 1e-9);
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
        }
        *lambda = advance(lambda, &coeffs, h, rng, stats)?;
        remaining -= h;
    }
    stats.steps += 1;
    Ok(())
}

/// Ensemble statistics of λ at one recorded time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    /// Time in steps (SDE time × N).
    pub step: usize,
    pub purity: McEstimate,
    pub mean: Vec<f64>,
    /// E[λ_a λ_b], row-major d×d.
    pub second: Vec<f64>,
}

fn moment_row(step: usize, spectra: &[Vec<f64>]) -> Result<MomentRow> {
    let d = spectra[0].len();
    let w = spectra.len() as f64;
    let purity: Vec<f64> = spectra.iter().map(|l| l.iter().map(|x| x * x).sum()).collect();
    let mean = (0..d)
        .map(|a| pairwise_sum(&spectra.iter().map(|l| l[a]).collect::<Vec<_>>()) / w)
        .collect();
    let second = (0..d * d)
        .map(|ab| pairwise_sum(&spectra.iter().map(|l| l[ab / d] * l[ab % d]).collect::<Vec<_>>()) / w)
        .collect();
    Ok(MomentRow {
        step,
        purity: McEstimate::from_samples(&purity)?,
        mean,
        second,
    })
}

/// Configuration of an SDE ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeOptions {
    pub initial: Vec<f64>,
    /// Sets dt = 1/N.
    pub dimension: usize,
    pub steps: usize,
    pub walkers: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeEnsemble {
    pub options: SdeOptions,
    pub moments: Vec<MomentRow>,
    pub stats: StepStats,
    /// Per walker, per recorded step (0..=steps), λ sorted descending.
    #[serde(skip)]
    pub paths: Vec<Vec<Vec<f64>>>,
}

impl SdeEnsemble {
    /// Fails when more than 0.1% of substeps needed positivity clipping.
    pub fn check_clipping(&self) -> Result<()> {
        if self.stats.clip_fraction() > 1e-3 {
            return Err(Error::Numerical(format!(
                "{} of {} substeps clipped; reduce dt",
                self.stats.clipped, self.stats.substeps
            )));
        }
        Ok(())
    }

    pub fn csv_header(&self) -> String {
        let d = self.options.initial.len();
        let mut h = String::from("step,walker");
        for a in 1..=d {
            h.push_str(&format!(",lambda_{a}"));
        }
        h
    }

    /// `step,walker,lambda_1,…,lambda_d` for every walker and step.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for step in 0..=self.options.steps {
            for (w, path) in self.paths.iter().enumerate() {
                out.push_str(&format!("{step},{w}"));
                for v in &path[step] {
                    out.push(',');
                    out.push_str(&crate::harness::output::float(*v));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Integrates `walkers` independent copies; walker `w` uses stream
/// `RngStream::new(seed, 0).derive(w)`.
pub fn run_sde_ensemble(opts: &SdeOptions, workers: usize) -> Result<SdeEnsemble> {
    if opts.dimension == 0 || opts.walkers < 2 {
        return Err(Error::InvalidDimension("SDE ensemble needs N ≥ 1 and at least 2 walkers".into()));
    }
    let start = Spectrum::new(opts.initial.clone())?;
    let dt = 1.0 / opts.dimension as f64;
    let base = RngStream::new(opts.seed, 0);
    let results: Vec<Result<(Vec<Vec<f64>>, StepStats)>> = map_indexed(opts.walkers, workers, |w| {
        let mut rng = base.derive(w as u64);
        let mut l = start.clone();
        let mut stats = StepStats::default();
        let mut path = Vec::with_capacity(opts.steps + 1);
        path.push(l.values().to_vec());
        for _ in 0..opts.steps {
            integrate_step(&mut l, dt, &mut rng, &mut stats)?;
            path.push(l.values().to_vec());
        }
        Ok((path, stats))
    });
    let mut paths = Vec::with_capacity(opts.walkers);
    let mut stats = StepStats::default();
    for r in results {
        let (p, s) = r?;
        stats.merge(&s);
        paths.push(p);
    }
    let moments = transpose_moments(&paths, opts.steps)?;
    Ok(SdeEnsemble {
        options: opts.clone(),
        moments,
        stats,
        paths,
    })
}

fn transpose_moments(paths: &[Vec<Vec<f64>>], steps: usize) -> Result<Vec<MomentRow>> {
    (0..=steps)
        .map(|t| moment_row(t, &paths.iter().map(|p| p[t].clone()).collect::<Vec<_>>()))
        .collect()
}

/// SDE ensemble against direct low-rank trajectories at matched steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroscopicComparison {
    pub rank: usize,
    pub dimension: usize,
    pub walkers: usize,
    pub sde: Vec<MomentRow>,
    pub microscopic: Vec<MomentRow>,
    /// max_t |E_sde F − E_micro F| / E_micro F
    pub max_relative_purity_gap: f64,
    pub sde_stats: StepStats,
}

/// Measurement-mode trajectories from the state uniform on a rank-d support,
/// compared with the SDE ensemble from λ = (1/d, …, 1/d).
pub fn microscopic_comparison(d: usize, n: usize, steps: usize, walkers: usize, seed: u64, workers: usize) -> Result<MicroscopicComparison> {
    if d == 0 || d > 8 {
        return Err(Error::InvalidRank { dim: n, rank: d });
    }
    if n < 100 * d {
        return Err(Error::InvalidDimension(format!("need N ≥ 100·d, got N = {n}, d = {d}")));
    }
    let sde = run_sde_ensemble(
        &SdeOptions {
            initial: vec![1.0 / d as f64; d],
            dimension: n,
            steps,
            walkers,
            seed,
        },
        workers,
    )?;
    let base = RngStream::new(seed, 1);
    let paths: Vec<Result<Vec<Vec<f64>>>> = map_indexed(walkers, workers, |w| {
        let mut rng = base.derive(w as u64);
        let mut state = SupportState::new(n, InitialState::UniformOnSupport { rank: d })?;
        let mut path = Vec::with_capacity(steps + 1);
        let top = |s: &SupportState| -> Result<Vec<f64>> {
            let mut ev = s.eigenvalues()?;
            ev.sort_by(|a, b| b.total_cmp(a));
            ev.resize(d, 0.0);
            Ok(ev)
        };
        path.push(top(&state)?);
        for _ in 0..steps {
            state.step(Mode::Measurement, &mut rng)?;
            path.push(top(&state)?);
        }
        Ok(path)
    });
    let paths: Vec<_> = paths.into_iter().collect::<Result<_>>()?;
    let micro = transpose_moments(&paths, steps)?;
    let max_relative_purity_gap = sde
        .moments
        .iter()
        .zip(&micro)
        .map(|(a, b)| (a.purity.mean - b.purity.mean).abs() / b.purity.mean)
        .fold(0.0, f64::max);
    Ok(MicroscopicComparison {
        rank: d,
        dimension: n,
        walkers,
        sde: sde.moments,
        microscopic: micro,
        max_relative_purity_gap,
        sde_stats: sde.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::rank2_theory_purity;
    use crate::moments::{analytic_measured_mean, TraceProfile};
    use proptest::prelude::*;

    fn random_spectrum(d: usize, rng: &mut RngStream) -> Spectrum {
        super::random_spectrum(d, rng).unwrap()
    }

    #[test]
    fn identity_check_passes() {
        let r = generator_identity_check(200, 8, &mut RngStream::new(13, 0)).unwrap();
        assert!(r.passed(1e-12), "{r:?}");
    }

    #[test]
    fn pure_state_is_fixed() {
        let l = Spectrum::new(vec![1.0]).unwrap();
        let c = generator_coefficients(&l).unwrap();
        assert_eq!(c.drift, vec![0.0]);
        assert_eq!(c.diffusion[(0, 0)], 0.0);
        assert_eq!(apply_generator_to_purity(&l), 0.0);
        let next = euler_maruyama_step(&l, 0.01, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(next, l);
    }

    #[test]
    fn rank_two_drift() {
        let c = generator_coefficients(&Spectrum::new(vec![0.75, 0.25]).unwrap()).unwrap();
        assert!((c.drift[0] - 0.375).abs() < 1e-15 && (c.drift[1] + 0.375).abs() < 1e-15);
    }

    #[test]
    fn uniform_d4_purity_generator() {
        assert!((apply_generator_to_purity(&Spectrum::uniform(4).unwrap()) - 0.9375).abs() < 1e-15);
    }

    #[test]
    fn degenerate_is_rejected_then_split() {
        let mut l = Spectrum::uniform(3).unwrap();
        assert!(matches!(generator_coefficients(&l), Err(Error::DegenerateSpectrum { .. })));
        assert!(l.split_degeneracies());
        assert!((l.values().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(generator_coefficients(&l).is_ok());
    }

    #[test]
    fn diffusion_has_exact_factor() {
        // Σ = BᵀB with B = (I − λ1ᵀ)diag(λ), i.e. noise λ_a(ξ_a − λ·ξ)
        let mut rng = RngStream::new(11, 0);
        for d in 1..=8 {
            let l = random_spectrum(d, &mut rng);
            let v = l.values();
            let b = RMat::from_fn(d, d, |i, j| (if i == j { 1.0 } else { 0.0 } - v[i]) * v[j]);
            let s = b.transpose() * &b;
            let c = generator_coefficients(&l).unwrap();
            assert!((&s - &c.diffusion).norm_max() < 1e-14);
        }
    }

    #[test]
    fn purity_identity_and_measured_mean() {
        let mut rng = RngStream::new(12, 0);
        for i in 0..1000 {
            let d = 1 + i % 8;
            let l = random_spectrum(d, &mut rng);
            let c = generator_coefficients(&l).unwrap();
            let grad: Vec<f64> = l.values().iter().map(|x| 2.0 * x).collect();
            let hess = RMat::from_fn(d, d, |a, b| if a == b { 2.0 } else { 0.0 });
            let quad = apply_generator(&c, &grad, &hess);
            let closed = apply_generator_to_purity(&l);
            assert!((quad - closed).abs() < 1e-12, "{quad} {closed}");
            let n = 1000;
            let p = TraceProfile::from_spectrum(l.values());
            let via_mean = n as f64 * (analytic_measured_mean(&p, n) - p.t2);
            assert!((via_mean - closed).abs() < 1e-10);
        }
    }

    #[test]
    fn sde_tracks_rank_two_theory() {
        let n = 1000;
        let e = run_sde_ensemble(
            &SdeOptions {
                initial: vec![0.5, 0.5],
                dimension: n,
                steps: 200,
                walkers: 400,
                seed: 3,
            },
            2,
        )
        .unwrap();
        e.check_clipping().unwrap();
        for row in e.moments.iter().step_by(20) {
            let th = rank2_theory_purity(row.step as f64, n, Mode::Measurement);
            assert!((row.purity.mean - th).abs() / th < 0.02, "{row:?} {th}");
        }
    }

    #[test]
    fn level_repulsion_keeps_gap_open() {
        let rng = RngStream::new(4, 0);
        let mut ok = 0;
        for w in 0..200 {
            let mut r = rng.derive(w);
            let mut l = Spectrum::new(vec![0.5005, 0.4995]).unwrap();
            let mut stats = StepStats::default();
            let mut min_gap = f64::INFINITY;
            for _ in 0..1000 {
                integrate_step(&mut l, 1e-3, &mut r, &mut stats).unwrap();
                min_gap = min_gap.min(l.min_gap());
            }
            ok += (stats.splits == 0 && min_gap >= DEGENERACY_GAP) as usize;
        }
        assert!(ok as f64 >= 0.99 * 200.0, "{ok}");
    }

    proptest! {
        #[test]
        fn kernel_and_drift_antisymmetry(seed in 0u64..10_000, d in 1usize..=8) {
            let l = random_spectrum(d, &mut RngStream::new(seed, 0));
            let c = generator_coefficients(&l).unwrap();
            prop_assert!(c.drift.iter().sum::<f64>().abs() < 1e-10 * c.drift.iter().map(|x| x.abs()).fold(1.0, f64::max));
            for a in 0..d {
                let row: f64 = (0..d).map(|b| c.diffusion[(a, b)]).sum();
                prop_assert!(row.abs() < 1e-10);
            }
            // F = (Σλ)²: gradient 2Σλ, Hessian all 2s
            let t1: f64 = l.values().iter().sum();
            let grad = vec![2.0 * t1; d];
            let hess = RMat::from_fn(d, d, |_, _| 2.0);
            prop_assert!(apply_generator(&c, &grad, &hess).abs() < 1e-12 * c.drift.iter().map(|x| x.abs()).fold(1.0, f64::max));
        }

        #[test]
        fn step_preserves_normalization(seed in 0u64..1000, d in 1usize..=6) {
            let mut rng = RngStream::new(seed, 0);
            let mut l = random_spectrum(d, &mut rng);
            let mut stats = StepStats::default();
            for _ in 0..20 {
                integrate_step(&mut l, 1e-3, &mut rng, &mut stats).unwrap();
                prop_assert!((l.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
