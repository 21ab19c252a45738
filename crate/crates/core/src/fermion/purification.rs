use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use super::*;
use crate::moments::McEstimate;
use crate::parallel::map_indexed;
use crate::randmat::{haar_orthogonal_columns, sample_haar_special_orthogonal, sample_haar_unitary};

/// Number-conserving (U(n), ℳ) or general (SO(2n), M) dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Conserving,
    General,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Conserving => "conserving",
            Variant::General => "general",
        }
    }
}

/// How one unitary-then-measure step is carried out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Conjugate by a full Haar matrix, then measure mode 0. O(n³).
    HaarRotation,
    /// Measure the occupation of a Haar-random orbital in place. The state
    /// differs from the literal protocol only by a unitary frame, which the
    /// next Haar step absorbs, so all invariant observables have the same
    /// law. O(n²).
    #[default]
    RandomOrbital,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurificationOptions {
    pub modes: usize,
    pub steps: usize,
    pub variant: Variant,
    #[serde(default)]
    pub protocol: Protocol,
    pub walkers: usize,
    pub seed: u64,
    /// Rows every `record_stride` steps (and at the last step).
    #[serde(default = "one")]
    pub record_stride: usize,
    /// Also compute the Rényi-2 entropy at recorded steps.
    #[serde(default)]
    pub renyi: bool,
}

fn one() -> usize {
    1
}

impl PurificationOptions {
    pub fn new(modes: usize, steps: usize, variant: Variant, walkers: usize, seed: u64) -> Self {
        Self {
            modes,
            steps,
            variant,
            protocol: Protocol::default(),
            walkers,
            seed,
            record_stride: 1,
            renyi: false,
        }
    }

    pub fn recorded_steps(&self) -> Vec<usize> {
        let stride = self.record_stride.max(1);
        let mut v: Vec<usize> = (0..=self.steps).step_by(stride).collect();
        if *v.last().unwrap() != self.steps {
            v.push(self.steps);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurificationRow {
    pub step: usize,
    /// s̄ = S_proxy/(n log 2) across walkers.
    pub s_density: McEstimate,
    /// (1 + t/n)⁻¹
    pub bound: f64,
    pub renyi2_density: Option<McEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurificationReport {
    pub options: PurificationOptions,
    pub rows: Vec<PurificationRow>,
    /// First recorded step with s̄ ≤ 1/2.
    pub half_entropy_time: Option<usize>,
    /// First recorded step with mean S_proxy ≤ log 2 (one bit left).
    pub order_one_time: Option<usize>,
    /// Rows where s̄ exceeds (1 + t/n)⁻¹ by more than 3 stderr. The bound is
    /// rigorous for the conserving variant; with pairing it holds only to
    /// leading order in 1/n.
    pub bound_violations: usize,
    /// Per walker, per recorded step: (S_proxy, S₂) in nats.
    #[serde(skip)]
    pub walkers: Vec<Vec<(f64, Option<f64>)>>,
}

impl PurificationReport {
    pub fn to_csv(&self) -> String {
        let steps = self.options.recorded_steps();
        let mut out = String::from("step,walker,s_proxy_nats,renyi2_nats\n");
        for (k, step) in steps.iter().enumerate() {
            for (w, rec) in self.walkers.iter().enumerate() {
                let (s, r) = rec[k];
                let r = r.map(crate::harness::output::float).unwrap_or_default();
                out.push_str(&format!("{step},{w},{},{r}\n", crate::harness::output::float(s)));
            }
        }
        out
    }
}

enum State {
    Mode(ModeCorrelationMatrix),
    Majorana(MajoranaCorrelationMatrix),
}

impl State {
    fn s_proxy(&self) -> f64 {
        match self {
            State::Mode(m) => s_proxy_mode(m),
            State::Majorana(m) => s_proxy(m),
        }
    }

    fn renyi2(&self) -> Result<f64> {
        Ok(renyi2_of(&match self {
            State::Mode(m) => m.williamson()?,
            State::Majorana(m) => m.williamson()?,
        }))
    }
}

/// Occupation measurement of the orbital v (unit vector): ℳ ↦ ±vv† + P(ℳ ∓ ℳvv†ℳ/(1 ± v†ℳv))P
/// with P = 1 − vv†.
fn measure_orbital(m: &ModeCorrelationMatrix, v: &[c64], rng: &mut RngStream) -> Result<ModeCorrelationMatrix> {
    let n = m.modes();
    let a = m.as_mat();
    let zero = c64::new(0.0, 0.0);
    let mut w = vec![zero; n];
    for (k, vk) in v.iter().enumerate() {
        for (wi, aik) in w.iter_mut().zip(a.col_as_slice(k)) {
            *wi += aik * vk;
        }
    }
    let c: f64 = v.iter().zip(&w).map(|(vi, wi)| vi.conj() * wi).sum::<c64>().re;
    let branch = Occupation::from_branch(choose_branch(((1.0 + c) / 2.0).clamp(0.0, 1.0), rng));
    let s = branch.sign();
    let denom = 1.0 + s * c;
    if denom <= BRANCH_THRESHOLD {
        return Err(Error::ZeroProbabilityBranch(denom / 2.0));
    }
    let k = s / denom;
    let mut b = a.clone();
    let mut bv = vec![zero; n];
    for j in 0..n {
        let wj = w[j].conj() * k;
        let vj = v[j];
        for ((bij, wi), x) in b.col_as_slice_mut(j).iter_mut().zip(&w).zip(bv.iter_mut()) {
            *bij -= wi * wj;
            *x += *bij * vj;
        }
    }
    // project out v and pin its occupation
    let vbv: c64 = v.iter().zip(&bv).map(|(vi, x)| vi.conj() * x).sum::<c64>() + s;
    for j in 0..n {
        let (vj, bvj) = (v[j].conj(), bv[j].conj());
        for ((bij, vi), x) in b.col_as_slice_mut(j).iter_mut().zip(v).zip(&bv) {
            *bij += vi * (vj * vbv - bvj) - x * vj;
        }
    }
    Ok(ModeCorrelationMatrix::from_raw(b))
}

/// Haar-random unit vector in Cⁿ.
fn random_orbital(n: usize, rng: &mut RngStream) -> Vec<c64> {
    let mut v: Vec<c64> = (0..n).map(|_| rng.complex_normal()).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

/// Occupation measurement of the mode spanned by orthonormal (o₁, o₂).
fn measure_real_mode(m: &MajoranaCorrelationMatrix, o1: &[f64], o2: &[f64], rng: &mut RngStream) -> Result<MajoranaCorrelationMatrix> {
    let d = o1.len();
    let a = m.as_mat();
    let u1: Vec<f64> = (0..d).map(|i| (0..d).map(|k| a[(i, k)] * o1[k]).sum()).collect();
    let u2: Vec<f64> = (0..d).map(|i| (0..d).map(|k| a[(i, k)] * o2[k]).sum()).collect();
    // α = o₁ᵀ M o₂ = −u₁·o₂
    let alpha: f64 = -(0..d).map(|i| u1[i] * o2[i]).sum::<f64>();
    let branch = Occupation::from_branch(choose_branch(((1.0 + alpha) / 2.0).clamp(0.0, 1.0), rng));
    let s = branch.sign();
    let denom = 1.0 + s * alpha;
    if denom <= BRANCH_THRESHOLD {
        return Err(Error::ZeroProbabilityBranch(denom / 2.0));
    }
    // M K̃ M with K̃ = o₁o₂ᵀ − o₂o₁ᵀ: (Mo₁)(o₂ᵀM) − (Mo₂)(o₁ᵀM) = −u₁u₂ᵀ + u₂u₁ᵀ
    let k = s / denom;
    let b = RMat::from_fn(d, d, |i, j| a[(i, j)] + k * (u2[i] * u1[j] - u1[i] * u2[j]));
    // P̃ B P̃ with P̃ = 1 − o₁o₁ᵀ − o₂o₂ᵀ, then ±K̃
    let proj = |x: &[f64]| -> Vec<f64> {
        let p1: f64 = x.iter().zip(o1).map(|(a, b)| a * b).sum();
        let p2: f64 = x.iter().zip(o2).map(|(a, b)| a * b).sum();
        x.iter().zip(o1.iter().zip(o2)).map(|(v, (a, b))| v - p1 * a - p2 * b).collect()
    };
    let rows: Vec<Vec<f64>> = (0..d).map(|i| proj(&(0..d).map(|j| b[(i, j)]).collect::<Vec<_>>())).collect();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| proj(&(0..d).map(|i| rows[i][j]).collect::<Vec<_>>())).collect();
    let out = RMat::from_fn(d, d, |i, j| cols[j][i] + s * (o1[i] * o2[j] - o2[i] * o1[j]));
    Ok(MajoranaCorrelationMatrix::from_raw(out))
}

fn step(state: &mut State, protocol: Protocol, rng: &mut RngStream) -> Result<()> {
    match (state, protocol) {
        (State::Mode(m), Protocol::HaarRotation) => {
            let u = sample_haar_unitary(m.modes(), rng)?.into_inner();
            let rotated = apply_mode_unitary(m, &u)?;
            *m = measure_mode_conserving(&rotated, 0, rng)?.0;
        }
        (State::Mode(m), Protocol::RandomOrbital) => {
            let v = random_orbital(m.modes(), rng);
            *m = measure_orbital(m, &v, rng)?;
        }
        (State::Majorana(m), Protocol::HaarRotation) => {
            let o = sample_haar_special_orthogonal(2 * m.modes(), rng)?;
            let rotated = apply_rotation(m, &o)?;
            *m = measure_mode_general(&rotated, 0, rng)?.0;
        }
        (State::Majorana(m), Protocol::RandomOrbital) => {
            let d = 2 * m.modes();
            let o = haar_orthogonal_columns(d, 2, rng)?;
            let o1: Vec<f64> = (0..d).map(|i| o[(i, 0)]).collect();
            let o2: Vec<f64> = (0..d).map(|i| o[(i, 1)]).collect();
            *m = measure_real_mode(m, &o1, &o2, rng)?;
        }
    }
    Ok(())
}

/// Runs `walkers` independent purification trajectories from the maximally
/// mixed state. Walker `w` draws from `RngStream::new(seed, 0).derive(w)`.
/// Per recorded step: entropy and, when tracked, Rényi-2 entropy, both in nats.
type Record = (f64, Option<f64>);

pub fn run_purification(opts: &PurificationOptions, workers: usize) -> Result<PurificationReport> {
    let n = opts.modes;
    if n < 2 {
        return Err(Error::InvalidDimension(format!("purification needs n ≥ 2 modes, got {n}")));
    }
    if opts.walkers < 2 {
        return Err(Error::InvalidDimension("purification needs at least 2 walkers".into()));
    }
    let recorded = opts.recorded_steps();
    let base = RngStream::new(opts.seed, 0);
    let runs: Vec<Result<Vec<Record>>> = map_indexed(opts.walkers, workers, |w| {
        let mut rng = base.derive(w as u64);
        let mut state = match opts.variant {
            Variant::Conserving => State::Mode(ModeCorrelationMatrix::zeros(n)),
            Variant::General => State::Majorana(MajoranaCorrelationMatrix::zeros(n)),
        };
        let mut out = Vec::with_capacity(recorded.len());
        let mut next = 0;
        let mut pure = false;
        for t in 0..=opts.steps {
            if t > 0 && !pure {
                step(&mut state, opts.protocol, &mut rng)?;
            }
            if recorded.get(next) == Some(&t) {
                let s = if pure { 0.0 } else { state.s_proxy() };
                let r = if opts.renyi { Some(if pure { 0.0 } else { state.renyi2()? }) } else { None };
                out.push((s, r));
                next += 1;
                // a pure Gaussian state stays pure under both unitaries and measurements
                pure = s < 1e-13;
            }
        }
        Ok(out)
    });
    let walkers: Vec<_> = runs.into_iter().collect::<Result<_>>()?;
    let scale = n as f64 * LN_2;
    let mut rows = Vec::with_capacity(recorded.len());
    for (k, &t) in recorded.iter().enumerate() {
        let s: Vec<f64> = walkers.iter().map(|w| w[k].0 / scale).collect();
        let renyi = if opts.renyi {
            Some(McEstimate::from_samples(&walkers.iter().map(|w| w[k].1.unwrap_or(0.0) / scale).collect::<Vec<_>>())?)
        } else {
            None
        };
        rows.push(PurificationRow {
            step: t,
            s_density: McEstimate::from_samples(&s)?,
            bound: 1.0 / (1.0 + t as f64 / n as f64),
            renyi2_density: renyi,
        });
    }
    let half_entropy_time = rows.iter().find(|r| r.s_density.mean <= 0.5).map(|r| r.step);
    let order_one_time = rows.iter().find(|r| r.s_density.mean <= 1.0 / n as f64).map(|r| r.step);
    let bound_violations = rows
        .iter()
        .filter(|r| r.s_density.mean > r.bound + 3.0 * r.s_density.standard_error)
        .count();
    Ok(PurificationReport {
        options: opts.clone(),
        rows,
        half_entropy_time,
        order_one_time,
        bound_violations,
        walkers,
    })
}

/// Exponent `a` of the least-squares fit `T ≈ c·nᵃ` on log–log axes.
pub fn power_law_exponent(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|p| p.0 == 0 || p.1.is_nan() || p.1 <= 0.0) {
        return Err(Error::InvalidDimension("need at least two positive points for a fit".into()));
    }
    let m = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// (log 2/4n²)[(tr(1 + M²))² − tr(1 + M²)²].
pub fn pairing_leading_order(m: &MajoranaCorrelationMatrix) -> f64 {
    let n = m.modes() as f64;
    let a = m.as_mat();
    let sq = a * a;
    let d = sq.nrows();
    let one_plus = RMat::from_fn(d, d, |i, j| sq[(i, j)] + if i == j { 1.0 } else { 0.0 });
    let tr: f64 = (0..d).map(|i| one_plus[(i, i)]).sum();
    let tr2 = one_plus.squared_norm_l2();
    LN_2 / (4.0 * n * n) * (tr * tr - tr2)
}

/// (log 2)[s² − s/(2n)] with s = S_proxy/(n log 2).
pub fn pairing_lower_bound(m: &MajoranaCorrelationMatrix) -> f64 {
    let n = m.modes() as f64;
    let s = s_proxy(m) / (n * LN_2);
    LN_2 * (s * s - s / (2.0 * n))
}

/// ΔS_proxy for measuring the mode spanned by (o₁, o₂) of M.
fn pairing_sample(m: &MajoranaCorrelationMatrix, o1: &[f64], o2: &[f64]) -> f64 {
    let d = o1.len();
    let a = m.as_mat();
    let u1: Vec<f64> = (0..d).map(|i| (0..d).map(|k| a[(i, k)] * o1[k]).sum()).collect();
    let u2: Vec<f64> = (0..d).map(|i| (0..d).map(|k| a[(i, k)] * o2[k]).sum()).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let alpha = -dot(&u1, o2);
    if alpha.abs() >= 1.0 - BRANCH_THRESHOLD {
        return 0.0;
    }
    // (OM²Oᵀ)_ab = o_aᵀM²o_b = −u_a·u_b
    let g11 = 1.0 - dot(&u1, &u1);
    let g22 = 1.0 - dot(&u2, &u2);
    let g12 = -dot(&u1, &u2);
    -LN_2 / (1.0 - alpha * alpha) * (g11 * g22 - g12 * g12)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub modes: usize,
    pub s_density: f64,
    /// Monte Carlo mean of |ΔS_proxy|.
    pub estimate: McEstimate,
    pub leading_order: f64,
    pub lower_bound: f64,
    /// |estimate − leading| / leading (0 when both vanish).
    pub relative_error: f64,
}

/// Monte Carlo over Haar O ∈ SO(2n) of |ΔS_proxy| for measuring mode 0 of
/// OMOᵀ. Only the first two rows of O enter, so each sample draws just
/// those (exact in distribution).
pub fn mc_delta_s_pairing(m: &MajoranaCorrelationMatrix, samples: usize, rng: &RngStream, workers: usize) -> Result<PairingReport> {
    let n = m.modes();
    if n < 8 {
        return Err(Error::InvalidDimension(format!("pairing Monte Carlo needs n ≥ 8, got {n}")));
    }
    let d = 2 * n;
    let xs: Vec<f64> = map_indexed(samples, workers, |i| {
        let o = haar_orthogonal_columns(d, 2, &mut rng.derive(i as u64))?;
        let o1: Vec<f64> = (0..d).map(|k| o[(k, 0)]).collect();
        let o2: Vec<f64> = (0..d).map(|k| o[(k, 1)]).collect();
        Ok(pairing_sample(m, &o1, &o2).abs())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let estimate = McEstimate::from_samples(&xs)?;
    let leading = pairing_leading_order(m);
    let relative_error = if leading.abs() < 1e-300 {
        if estimate.mean.abs() < 1e-300 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate.mean - leading).abs() / leading
    };
    Ok(PairingReport {
        modes: n,
        s_density: s_proxy(m) / (n as f64 * LN_2),
        estimate,
        leading_order: leading,
        lower_bound: pairing_lower_bound(m),
        relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_majorana, random_mode};
    use super::*;

    #[test]
    fn orbital_update_matches_rotated_frame() {
        let mut rng = RngStream::new(1, 0);
        for n in 2..7 {
            let m = random_mode(n, &mut rng);
            let u = sample_haar_unitary(n, &mut rng).unwrap().into_inner();
            // measuring mode 0 of 𝒰ℳ𝒰† = measuring orbital v = 𝒰†e₀ of ℳ, then conjugating
            let v: Vec<c64> = (0..n).map(|i| u[(0, i)].conj()).collect();
            let seed = rng.derive(n as u64);
            let direct = measure_mode_conserving(&apply_mode_unitary(&m, &u).unwrap(), 0, &mut seed.clone()).unwrap().0;
            let orbital = measure_orbital(&m, &v, &mut seed.clone()).unwrap();
            let back = apply_mode_unitary(&orbital, &u).unwrap();
            assert!(linalg::max_abs_diff(back.as_mat().as_ref(), direct.as_mat().as_ref()) < 1e-10);
        }
    }

    #[test]
    fn real_mode_update_matches_rotated_frame() {
        let mut rng = RngStream::new(2, 0);
        for n in 2..7 {
            let m = random_majorana(n, &mut rng);
            let o = sample_haar_special_orthogonal(2 * n, &mut rng).unwrap();
            let d = 2 * n;
            let o1: Vec<f64> = (0..d).map(|i| o.as_ref()[(0, i)]).collect();
            let o2: Vec<f64> = (0..d).map(|i| o.as_ref()[(1, i)]).collect();
            let seed = rng.derive(n as u64);
            let rotated = apply_rotation(&m, &o).unwrap();
            let direct = measure_mode_general(&rotated, 0, &mut seed.clone()).unwrap().0;
            let orbital = measure_real_mode(&m, &o1, &o2, &mut seed.clone()).unwrap();
            let back = apply_rotation(&orbital, &o).unwrap();
            assert!(linalg::max_abs_diff_real(back.as_mat().as_ref(), direct.as_mat().as_ref()) < 1e-10);
            let closed = delta_s_proxy_general(&rotated, 0).unwrap();
            assert!((pairing_sample(&m, &o1, &o2) - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn starts_maximally_mixed_and_respects_bound() {
        for protocol in [Protocol::HaarRotation, Protocol::RandomOrbital] {
            for variant in [Variant::Conserving, Variant::General] {
                let mut opts = PurificationOptions::new(6, 60, variant, 40, 3);
                opts.protocol = protocol;
                opts.renyi = true;
                let r = run_purification(&opts, 2).unwrap();
                assert_eq!(r.rows[0].s_density.mean, 1.0);
                // the bound is rigorous only with number conservation
                if variant == Variant::Conserving {
                    assert_eq!(r.bound_violations, 0, "{protocol:?}");
                }
                assert!(r.rows.last().unwrap().s_density.mean < 0.5);
                assert!(r.half_entropy_time.is_some());
            }
        }
    }

    #[test]
    fn protocols_agree_in_distribution() {
        let n = 8;
        let mut a = PurificationOptions::new(n, 64, Variant::Conserving, 400, 5);
        a.protocol = Protocol::HaarRotation;
        let mut b = a.clone();
        b.protocol = Protocol::RandomOrbital;
        let (ra, rb) = (run_purification(&a, 2).unwrap(), run_purification(&b, 2).unwrap());
        for (x, y) in ra.rows.iter().zip(&rb.rows).step_by(8) {
            let se = (x.s_density.standard_error.powi(2) + y.s_density.standard_error.powi(2)).sqrt();
            assert!((x.s_density.mean - y.s_density.mean).abs() <= 4.0 * se + 1e-12, "{x:?} {y:?}");
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let opts = PurificationOptions::new(5, 30, Variant::General, 7, 9);
        assert_eq!(run_purification(&opts, 1).unwrap(), run_purification(&opts, 3).unwrap());
    }

    #[test]
    fn pairing_examples() {
        let n = 16;
        let zero = MajoranaCorrelationMatrix::zeros(n);
        let expect = LN_2 * (1.0 - 1.0 / (2.0 * n as f64));
        assert!((pairing_leading_order(&zero) - expect).abs() < 1e-14);
        assert!((pairing_lower_bound(&zero) - expect).abs() < 1e-14);
        let pure = MajoranaCorrelationMatrix::canonical(&vec![1.0; n]);
        assert!(pairing_leading_order(&pure).abs() < 1e-14);
        let r = mc_delta_s_pairing(&pure, 100, &RngStream::new(0, 0), 1).unwrap();
        assert!(r.estimate.mean < 1e-12);
        let r = mc_delta_s_pairing(&zero, 2000, &RngStream::new(1, 0), 1).unwrap();
        assert!(r.relative_error < 0.1, "{r:?}");
    }

    #[test]
    fn power_law_fit() {
        let pts: Vec<_> = [4usize, 8, 16].iter().map(|&n| (n, 3.0 * (n as f64).powf(1.7))).collect();
        assert!((power_law_exponent(&pts).unwrap() - 1.7).abs() < 1e-12);
        assert!(power_law_exponent(&pts[..1]).is_err());
    }
}
