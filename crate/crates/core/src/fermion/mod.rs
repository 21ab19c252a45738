//! Gaussian fermionic states through their correlation matrices.
//!
//! Majoranas are γ_{2μ} = a_μ + a_μ† and γ_{2μ+1} = i(a_μ − a_μ†) (zero-based),
//! M_ij = (i/2) tr ρ[γ_i, γ_j] and ℳ_μν = 2 tr(ρ a_μ a_ν†) − δ_μν. A mode
//! with M_{2μ,2μ+1} = ℳ_μμ = 1 is empty. Mode indices are zero-based.

mod fock;
mod purification;

pub use fock::{fock_oracle, majorana_log, oracle_check, unitary_log, OracleBranch, OracleCheck, OracleInput, OracleResult, MAX_ORACLE_MODES};
pub use purification::{
    mc_delta_s_pairing, pairing_leading_order, pairing_lower_bound, power_law_exponent, run_purification, PairingReport, Protocol,
    PurificationOptions, PurificationReport, PurificationRow, Variant,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::linalg::{self, antisymmetrize, hermitize, CMat, RMat};
use crate::manybody::{choose_branch, Branch, BRANCH_THRESHOLD};
use crate::randmat::SpecialOrthogonal;
use crate::{c64, Error, Result, RngStream};

const STRUCTURE_TOL: f64 = 1e-12;
const RANGE_TOL: f64 = 1e-9;

/// n×n Hermitian ℳ of a state without pairing correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCorrelationMatrix(CMat);

impl ModeCorrelationMatrix {
    /// Checks Hermiticity to 1e-12 and spectrum in [−1, 1] to 1e-9.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidDimension(format!("ℳ must be square and nonempty, got {}x{}", m.nrows(), m.ncols())));
        }
        let herr = linalg::hermiticity_error(m.as_ref());
        if herr > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!("ℳ not Hermitian (error {herr:.3e})")));
        }
        let ev = linalg::eigvalsh(m.as_ref())?;
        if ev.iter().any(|e| e.abs() > 1.0 + RANGE_TOL) {
            return Err(Error::InvalidState(format!("ℳ spectrum outside [−1, 1]: {ev:?}")));
        }
        let mut m = m;
        hermitize(&mut m);
        Ok(Self(m))
    }

    /// Unchecked; hermitizes.
    pub(crate) fn from_raw(mut m: CMat) -> Self {
        hermitize(&mut m);
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn diagonal(lambda: &[f64]) -> Result<Self> {
        let n = lambda.len();
        Self::new(CMat::from_fn(n, n, |i, j| if i == j { c64::new(lambda[i], 0.0) } else { c64::new(0.0, 0.0) }))
    }

    pub fn modes(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    /// tr ℳ².
    pub fn trace_sq(&self) -> f64 {
        linalg::frobenius_sq(self.0.as_ref())
    }

    /// The Majorana form: block (μ,ν) is [[−Im ℳ, Re ℳ], [−Re ℳ, −Im ℳ]].
    pub fn to_majorana(&self) -> MajoranaCorrelationMatrix {
        let n = self.modes();
        let mut m = RMat::zeros(2 * n, 2 * n);
        for mu in 0..n {
            for nu in 0..n {
                let z = self.0[(mu, nu)];
                m[(2 * mu, 2 * nu)] = -z.im;
                m[(2 * mu, 2 * nu + 1)] = z.re;
                m[(2 * mu + 1, 2 * nu)] = -z.re;
                m[(2 * mu + 1, 2 * nu + 1)] = -z.im;
            }
        }
        antisymmetrize(&mut m);
        MajoranaCorrelationMatrix(m)
    }

    /// Williamson values |eig ℳ|, descending.
    pub fn williamson(&self) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = linalg::eigvalsh(self.0.as_ref())?.into_iter().map(|x| x.abs().min(1.0)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        Ok(v)
    }
}

/// 2n×2n real antisymmetric M.
#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaCorrelationMatrix(RMat);

impl MajoranaCorrelationMatrix {
    /// Checks shape and antisymmetry to 1e-12; Williamson range to 1e-9.
    pub fn new(m: RMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 || m.nrows() % 2 == 1 {
            return Err(Error::InvalidDimension(format!("M must be 2n×2n, got {}x{}", m.nrows(), m.ncols())));
        }
        let aerr = linalg::antisymmetry_error(m.as_ref());
        if aerr > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!("M not antisymmetric (error {aerr:.3e})")));
        }
        let mut m = m;
        antisymmetrize(&mut m);
        let s = Self(m);
        if let Some(l) = s.williamson()?.first() {
            if *l > 1.0 + RANGE_TOL {
                return Err(Error::InvalidState(format!("Williamson value {l} above 1")));
            }
        }
        Ok(s)
    }

    pub(crate) fn from_raw(mut m: RMat) -> Self {
        antisymmetrize(&mut m);
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(RMat::zeros(2 * n, 2 * n))
    }

    /// O M₀ Oᵀ with M₀ = ⊕ [[0, λ_μ], [−λ_μ, 0]].
    pub fn from_williamson(lambda: &[f64], o: &SpecialOrthogonal) -> Result<Self> {
        let n = lambda.len();
        if o.dimension() != 2 * n {
            return Err(Error::DimensionMismatch(format!("{} Williamson values, rotation of size {}", n, o.dimension())));
        }
        if lambda.iter().any(|l| l.abs() > 1.0) {
            return Err(Error::InvalidState("Williamson values must lie in [−1, 1]".into()));
        }
        apply_rotation(&Self::canonical(lambda), o)
    }

    /// ⊕ [[0, λ_μ], [−λ_μ, 0]].
    pub fn canonical(lambda: &[f64]) -> Self {
        let n = lambda.len();
        let mut m = RMat::zeros(2 * n, 2 * n);
        for (mu, l) in lambda.iter().enumerate() {
            m[(2 * mu, 2 * mu + 1)] = *l;
            m[(2 * mu + 1, 2 * mu)] = -*l;
        }
        Self(m)
    }

    pub fn modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn as_mat(&self) -> &RMat {
        &self.0
    }

    /// tr M² = −Σ M_ij².
    pub fn trace_sq(&self) -> f64 {
        -self.0.squared_norm_l2()
    }

    /// Williamson values from the spectrum ±λ of the Hermitian iM, descending.
    pub fn williamson(&self) -> Result<Vec<f64>> {
        let n = self.modes();
        let im = CMat::from_fn(2 * n, 2 * n, |i, j| c64::new(0.0, self.0[(i, j)]));
        let mut ev = linalg::eigvalsh(im.as_ref())?;
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev[..n].iter().map(|x| x.clamp(0.0, 1.0)).collect())
    }

    /// ℳ for a state without pairing, inverting [`ModeCorrelationMatrix::to_majorana`].
    pub fn to_mode(&self) -> ModeCorrelationMatrix {
        let n = self.modes();
        ModeCorrelationMatrix::from_raw(CMat::from_fn(n, n, |mu, nu| {
            c64::new(self.0[(2 * mu, 2 * nu + 1)], -self.0[(2 * mu, 2 * nu)])
        }))
    }

    /// Largest entry of the part of M that is not of the no-pairing form.
    pub fn pairing_norm(&self) -> f64 {
        let back = self.to_mode().to_majorana();
        linalg::max_abs_diff_real(self.0.as_ref(), back.0.as_ref())
    }
}

/// S_proxy from the mode matrix, in nats: (log 2)(n − tr ℳ²).
pub fn s_proxy_mode(m: &ModeCorrelationMatrix) -> f64 {
    clamp_proxy(LN_2 * (m.modes() as f64 - m.trace_sq()), m.modes())
}

/// S_proxy from the Majorana matrix, in nats: (log 2)(n + ½ tr M²).
pub fn s_proxy(m: &MajoranaCorrelationMatrix) -> f64 {
    clamp_proxy(LN_2 * (m.modes() as f64 + 0.5 * m.trace_sq()), m.modes())
}

fn clamp_proxy(s: f64, n: usize) -> f64 {
    let top = n as f64 * LN_2;
    if s < 0.0 && s > -RANGE_TOL {
        0.0
    } else if s > top && s < top + RANGE_TOL {
        top
    } else {
        s
    }
}

/// Second Rényi entropy n log 2 − Σ log(1 + λ_μ²), in nats.
pub fn renyi2(m: &MajoranaCorrelationMatrix) -> Result<f64> {
    Ok(renyi2_of(&m.williamson()?))
}

pub fn renyi2_of(williamson: &[f64]) -> f64 {
    williamson.iter().map(|l| LN_2 - (1.0 + l * l).ln()).sum()
}

/// O M Oᵀ.
pub fn apply_rotation(m: &MajoranaCorrelationMatrix, o: &SpecialOrthogonal) -> Result<MajoranaCorrelationMatrix> {
    if o.dimension() != m.0.nrows() {
        return Err(Error::DimensionMismatch(format!("rotation {} vs M {}", o.dimension(), m.0.nrows())));
    }
    let o = o.as_ref();
    Ok(MajoranaCorrelationMatrix::from_raw(o * &m.0 * o.transpose()))
}

/// 𝒰 ℳ 𝒰†.
pub fn apply_mode_unitary(m: &ModeCorrelationMatrix, u: &CMat) -> Result<ModeCorrelationMatrix> {
    if u.nrows() != m.modes() || u.ncols() != m.modes() {
        return Err(Error::DimensionMismatch(format!("unitary {}x{} vs ℳ {}", u.nrows(), u.ncols(), m.modes())));
    }
    Ok(ModeCorrelationMatrix::from_raw(u * &m.0 * u.adjoint()))
}

/// Real form of 𝒰: block (μ,ν) is [[Re 𝒰, −Im 𝒰], [Im 𝒰, Re 𝒰]].
///
/// Under this embedding the rotation acts on the mode matrix as ℳ ↦ 𝒰̄ℳ𝒰ᵀ.
pub fn embed_mode_unitary(u: &CMat) -> Result<SpecialOrthogonal> {
    if u.nrows() != u.ncols() {
        return Err(Error::DimensionMismatch("mode unitary must be square".into()));
    }
    let err = linalg::unitarity_error(u.as_ref());
    if err > 1e-10 {
        return Err(Error::InvalidState(format!("mode matrix is not unitary (error {err:.3e})")));
    }
    let n = u.nrows();
    let o = RMat::from_fn(2 * n, 2 * n, |r, c| {
        let z = u[(r / 2, c / 2)];
        match (r % 2, c % 2) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    });
    SpecialOrthogonal::new(o)
}

/// Occupation outcome of a single-mode number measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Occupation {
    /// The + branch.
    Empty,
    /// The − branch.
    Filled,
}

impl Occupation {
    pub fn sign(self) -> f64 {
        match self {
            Occupation::Empty => 1.0,
            Occupation::Filled => -1.0,
        }
    }

    fn from_branch(b: Branch) -> Self {
        match b {
            Branch::Plus => Occupation::Empty,
            Branch::Minus => Occupation::Filled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermionOutcome {
    pub branch: Occupation,
    /// p₊ = (1 + ℳ_jj)/2 = (1 + α)/2; p₋ is 1 − p₊.
    pub p_empty: f64,
}

impl FermionOutcome {
    pub fn p_filled(&self) -> f64 {
        1.0 - self.p_empty
    }

    pub fn probability(&self) -> f64 {
        match self.branch {
            Occupation::Empty => self.p_empty,
            Occupation::Filled => self.p_filled(),
        }
    }
}

fn check_mode(j: usize, n: usize) -> Result<()> {
    if j >= n {
        return Err(Error::InvalidMeasurement(format!("mode {j} out of range for {n} modes")));
    }
    Ok(())
}

/// Post-measurement ℳ for a given branch. Row and column j become ±e_j; the
/// rest is ℳ_μν ∓ ℳ_μj ℳ_jν/(1 ± ℳ_jj).
pub fn conserving_branch(m: &ModeCorrelationMatrix, j: usize, branch: Occupation) -> Result<ModeCorrelationMatrix> {
    let n = m.modes();
    check_mode(j, n)?;
    let s = branch.sign();
    let mjj = m.0[(j, j)].re;
    let denom = 1.0 + s * mjj;
    if denom <= BRANCH_THRESHOLD {
        return Err(Error::ZeroProbabilityBranch(denom / 2.0));
    }
    let a = &m.0;
    let out = CMat::from_fn(n, n, |mu, nu| {
        if mu == j || nu == j {
            if mu == nu {
                c64::new(s, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        } else {
            a[(mu, nu)] - a[(mu, j)] * a[(j, nu)] * (s / denom)
        }
    });
    Ok(ModeCorrelationMatrix::from_raw(out))
}

/// Samples the occupation of mode j with p₊ = (1 + Re ℳ_jj)/2.
pub fn measure_mode_conserving(
    m: &ModeCorrelationMatrix,
    j: usize,
    rng: &mut RngStream,
) -> Result<(ModeCorrelationMatrix, FermionOutcome)> {
    check_mode(j, m.modes())?;
    let p = ((1.0 + m.0[(j, j)].re) / 2.0).clamp(0.0, 1.0);
    let branch = Occupation::from_branch(choose_branch(p, rng));
    Ok((conserving_branch(m, j, branch)?, FermionOutcome { branch, p_empty: p }))
}

/// Outcome-averaged ΔS_proxy = −(log 2/(1 − ℳ_jj²))(1 − (ℳ²)_jj)²; zero
/// for a pure measured mode.
pub fn delta_s_proxy_conserving(m: &ModeCorrelationMatrix, j: usize) -> Result<f64> {
    check_mode(j, m.modes())?;
    let mjj = m.0[(j, j)].re;
    if mjj.abs() >= 1.0 - BRANCH_THRESHOLD {
        return Ok(0.0);
    }
    let sq: f64 = (0..m.modes()).map(|k| m.0[(j, k)].norm_sqr()).sum();
    Ok(-LN_2 / (1.0 - mjj * mjj) * (1.0 - sq).powi(2))
}

/// M'± = ±K + P(M ± MKM/(1 ± α))P at mode j, with K = e_{2j}e_{2j+1}ᵀ − e_{2j+1}e_{2j}ᵀ.
pub fn general_branch(m: &MajoranaCorrelationMatrix, j: usize, branch: Occupation) -> Result<MajoranaCorrelationMatrix> {
    let n = m.modes();
    check_mode(j, n)?;
    let (p, q) = (2 * j, 2 * j + 1);
    let s = branch.sign();
    let alpha = m.0[(p, q)];
    let denom = 1.0 + s * alpha;
    if denom <= BRANCH_THRESHOLD {
        return Err(Error::ZeroProbabilityBranch(denom / 2.0));
    }
    let a = &m.0;
    // (MKM)_ab = M_ap M_qb − M_aq M_pb
    let out = RMat::from_fn(2 * n, 2 * n, |x, y| {
        let in_q = |i: usize| i == p || i == q;
        if in_q(x) || in_q(y) {
            if x == p && y == q {
                s
            } else if x == q && y == p {
                -s
            } else {
                0.0
            }
        } else {
            a[(x, y)] + s / denom * (a[(x, p)] * a[(q, y)] - a[(x, q)] * a[(p, y)])
        }
    });
    Ok(MajoranaCorrelationMatrix::from_raw(out))
}

/// Samples the occupation of mode j with p₊ = (1 + α)/2, α = M_{2j,2j+1}.
pub fn measure_mode_general(
    m: &MajoranaCorrelationMatrix,
    j: usize,
    rng: &mut RngStream,
) -> Result<(MajoranaCorrelationMatrix, FermionOutcome)> {
    check_mode(j, m.modes())?;
    let p = ((1.0 + m.0[(2 * j, 2 * j + 1)]) / 2.0).clamp(0.0, 1.0);
    let branch = Occupation::from_branch(choose_branch(p, rng));
    Ok((general_branch(m, j, branch)?, FermionOutcome { branch, p_empty: p }))
}

/// Outcome-averaged ΔS_proxy = −(log 2/(1 − α²)) det[Q(1 + M²)Q] at mode j.
pub fn delta_s_proxy_general(m: &MajoranaCorrelationMatrix, j: usize) -> Result<f64> {
    let n = m.modes();
    check_mode(j, n)?;
    let (p, q) = (2 * j, 2 * j + 1);
    let alpha = m.0[(p, q)];
    if alpha.abs() >= 1.0 - BRANCH_THRESHOLD {
        return Ok(0.0);
    }
    let a = &m.0;
    let row = |r: usize, c: usize| -> f64 { (0..2 * n).map(|k| a[(r, k)] * a[(k, c)]).sum() };
    let g = [[1.0 + row(p, p), row(p, q)], [row(q, p), 1.0 + row(q, q)]];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    Ok(-LN_2 / (1.0 - alpha * alpha) * det)
}

/// p₊S(+) + p₋S(−) − S(before), evaluated branch by branch.
pub fn delta_s_direct_conserving(m: &ModeCorrelationMatrix, j: usize) -> Result<f64> {
    let p = (1.0 + m.0[(j, j)].re) / 2.0;
    let mut avg = 0.0;
    for (b, w) in [(Occupation::Empty, p), (Occupation::Filled, 1.0 - p)] {
        if w > BRANCH_THRESHOLD {
            avg += w * s_proxy_mode(&conserving_branch(m, j, b)?);
        }
    }
    Ok(avg - s_proxy_mode(m))
}

pub fn delta_s_direct_general(m: &MajoranaCorrelationMatrix, j: usize) -> Result<f64> {
    let p = (1.0 + m.0[(2 * j, 2 * j + 1)]) / 2.0;
    let mut avg = 0.0;
    for (b, w) in [(Occupation::Empty, p), (Occupation::Filled, 1.0 - p)] {
        if w > BRANCH_THRESHOLD {
            avg += w * s_proxy(&general_branch(m, j, b)?);
        }
    }
    Ok(avg - s_proxy(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randmat::{sample_haar_special_orthogonal, sample_haar_unitary};
    use proptest::prelude::*;

    pub(super) fn random_lambda(n: usize, rng: &mut RngStream) -> Vec<f64> {
        (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect()
    }

    pub(super) fn random_majorana(n: usize, rng: &mut RngStream) -> MajoranaCorrelationMatrix {
        let l = random_lambda(n, rng);
        let o = sample_haar_special_orthogonal(2 * n, rng).unwrap();
        MajoranaCorrelationMatrix::from_williamson(&l, &o).unwrap()
    }

    pub(super) fn random_mode(n: usize, rng: &mut RngStream) -> ModeCorrelationMatrix {
        let l = random_lambda(n, rng);
        let u = sample_haar_unitary(n, rng).unwrap().into_inner();
        apply_mode_unitary(&ModeCorrelationMatrix::diagonal(&l).unwrap(), &u).unwrap()
    }

    #[test]
    fn proxy_entropy_examples() {
        let n = 5;
        assert!((s_proxy(&MajoranaCorrelationMatrix::zeros(n)) - n as f64 * LN_2).abs() < 1e-15);
        let pure = MajoranaCorrelationMatrix::canonical(&[1.0, -1.0, 1.0]);
        assert_eq!(s_proxy(&pure), 0.0);
        let single = MajoranaCorrelationMatrix::canonical(&[0.3]);
        assert!((s_proxy(&single) - LN_2 * (1.0 - 0.09)).abs() < 1e-15);
        assert!((renyi2(&single).unwrap() - (LN_2 - 1.09f64.ln())).abs() < 1e-12);
        let half = MajoranaCorrelationMatrix::canonical(&[0.5]);
        assert!((renyi2(&half).unwrap() - (LN_2 - 1.25f64.ln())).abs() < 1e-12);
        assert!(renyi2(&pure).unwrap().abs() < 1e-12);
    }

    #[test]
    fn williamson_examples() {
        assert_eq!(MajoranaCorrelationMatrix::canonical(&[1.0]).williamson().unwrap(), vec![1.0]);
        assert!(MajoranaCorrelationMatrix::zeros(3).williamson().unwrap().iter().all(|x| x.abs() < 1e-15));
        let mut rng = RngStream::new(1, 0);
        let l = [0.9, 0.1, 0.5, 0.0];
        let o = sample_haar_special_orthogonal(8, &mut rng).unwrap();
        let w = MajoranaCorrelationMatrix::from_williamson(&l, &o).unwrap().williamson().unwrap();
        for (a, b) in w.iter().zip([0.9, 0.5, 0.1, 0.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut m = RMat::zeros(2, 2);
        m[(0, 1)] = 0.5;
        assert!(MajoranaCorrelationMatrix::new(m).is_err());
    }

    #[test]
    fn embedding_examples() {
        let id = embed_mode_unitary(&CMat::identity(3, 3)).unwrap();
        assert_eq!(id.as_ref(), RMat::identity(6, 6).as_ref());
        let i = CMat::from_fn(1, 1, |_, _| c64::new(0.0, 1.0));
        let o = embed_mode_unitary(&i).unwrap();
        assert_eq!((o.as_ref()[(0, 0)], o.as_ref()[(0, 1)], o.as_ref()[(1, 0)]), (0.0, -1.0, 1.0));
        let mut rng = RngStream::new(2, 0);
        for _ in 0..1000 {
            let u = sample_haar_unitary(4, &mut rng).unwrap().into_inner();
            assert!((linalg::det_real(embed_mode_unitary(&u).unwrap().as_ref()) - 1.0).abs() < 1e-10);
        }
        assert!(embed_mode_unitary(&CMat::from_fn(2, 2, |_, _| c64::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn embedded_rotation_conjugates_mode_matrix() {
        let mut rng = RngStream::new(3, 0);
        for n in 1..=6 {
            let m = random_mode(n, &mut rng);
            let u = sample_haar_unitary(n, &mut rng).unwrap().into_inner();
            let rotated = apply_rotation(&m.to_majorana(), &embed_mode_unitary(&u).unwrap()).unwrap();
            let ubar = CMat::from_fn(n, n, |i, j| u[(i, j)].conj());
            let expected = apply_mode_unitary(&m, &ubar).unwrap().to_majorana();
            assert!(linalg::max_abs_diff_real(rotated.as_mat().as_ref(), expected.as_mat().as_ref()) < 1e-10);
            assert!(rotated.pairing_norm() < 1e-12);
            assert!((s_proxy(&rotated) - s_proxy_mode(&m)).abs() < 1e-10);
        }
    }

    #[test]
    fn maximally_mixed_measurements() {
        let mut rng = RngStream::new(4, 0);
        let (m, out) = measure_mode_conserving(&ModeCorrelationMatrix::zeros(3), 0, &mut rng).unwrap();
        assert_eq!(out.p_empty, 0.5);
        let s = out.branch.sign();
        let expect = ModeCorrelationMatrix::diagonal(&[s, 0.0, 0.0]).unwrap();
        assert_eq!(m, expect);
        let (mm, out) = measure_mode_general(&MajoranaCorrelationMatrix::zeros(3), 0, &mut rng).unwrap();
        assert_eq!(out.p_empty, 0.5);
        assert_eq!(mm, MajoranaCorrelationMatrix::canonical(&[out.branch.sign(), 0.0, 0.0]));
        assert!((delta_s_proxy_conserving(&ModeCorrelationMatrix::zeros(3), 0).unwrap() + LN_2).abs() < 1e-15);
        assert!((delta_s_proxy_general(&MajoranaCorrelationMatrix::zeros(3), 0).unwrap() + LN_2).abs() < 1e-15);
    }

    #[test]
    fn pure_measured_mode_is_certain() {
        let m = ModeCorrelationMatrix::diagonal(&[1.0, 0.3]).unwrap();
        let mut rng = RngStream::new(5, 0);
        let (after, out) = measure_mode_conserving(&m, 0, &mut rng).unwrap();
        assert_eq!(out.branch, Occupation::Empty);
        assert_eq!(after, m);
        let mm = MajoranaCorrelationMatrix::canonical(&[-1.0, 0.3]);
        let (after, out) = measure_mode_general(&mm, 0, &mut rng).unwrap();
        assert_eq!(out.branch, Occupation::Filled);
        assert!(linalg::max_abs_diff_real(after.as_mat().as_ref(), mm.as_mat().as_ref()) < 1e-15);
        assert_eq!(delta_s_proxy_general(&mm, 0).unwrap(), 0.0);
        let pure = ModeCorrelationMatrix::diagonal(&[1.0, -1.0]).unwrap();
        assert_eq!(delta_s_proxy_conserving(&pure, 1).unwrap(), 0.0);
    }

    #[test]
    fn single_mode_fully_purifies() {
        let m = MajoranaCorrelationMatrix::canonical(&[0.4]);
        let d = delta_s_proxy_general(&m, 0).unwrap();
        assert!((d + LN_2 * (1.0 - 0.16)).abs() < 1e-15);
        assert!((d + s_proxy(&m)).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_direct_evaluation() {
        let mut rng = RngStream::new(6, 0);
        for i in 0..200 {
            let n = 1 + i % 8;
            let j = rng.below(n as u64) as usize;
            let mm = random_mode(n, &mut rng);
            let a = delta_s_proxy_conserving(&mm, j).unwrap();
            let b = delta_s_direct_conserving(&mm, j).unwrap();
            assert!((a - b).abs() < 1e-10, "conserving n={n}: {a} vs {b}");
            assert!(a <= 1e-15);
            let m = random_majorana(n, &mut rng);
            let a = delta_s_proxy_general(&m, j).unwrap();
            let b = delta_s_direct_general(&m, j).unwrap();
            assert!((a - b).abs() < 1e-10, "general n={n}: {a} vs {b}");
            assert!(a <= 1e-15);
        }
    }

    #[test]
    fn general_update_on_embedded_state_matches_conserving() {
        let mut rng = RngStream::new(7, 0);
        for n in 1..=6 {
            let mm = random_mode(n, &mut rng);
            let j = n / 2;
            let mut r1 = rng.derive(n as u64);
            let mut r2 = rng.derive(n as u64);
            let (a, oa) = measure_mode_conserving(&mm, j, &mut r1).unwrap();
            let (b, ob) = measure_mode_general(&mm.to_majorana(), j, &mut r2).unwrap();
            assert_eq!(oa.branch, ob.branch);
            assert!((oa.p_empty - ob.p_empty).abs() < 1e-12);
            assert!(linalg::max_abs_diff_real(a.to_majorana().as_mat().as_ref(), b.as_mat().as_ref()) < 1e-10);
            assert!(b.pairing_norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn measured_mode_becomes_pure(seed in 0u64..5000, n in 1usize..7) {
            let mut rng = RngStream::new(seed, 0);
            let m = random_majorana(n, &mut rng);
            let j = rng.below(n as u64) as usize;
            let (after, _) = measure_mode_general(&m, j, &mut rng).unwrap();
            prop_assert!((after.as_mat()[(2 * j, 2 * j + 1)].abs() - 1.0).abs() < 1e-10);
            prop_assert!(linalg::antisymmetry_error(after.as_mat().as_ref()) < 1e-12);
            prop_assert!(after.williamson().unwrap()[0] <= 1.0 + 1e-9);
            let p = (1.0 + m.as_mat()[(2 * j, 2 * j + 1)]) / 2.0;
            let avg = [(Occupation::Empty, p), (Occupation::Filled, 1.0 - p)].iter()
                .filter(|(_, w)| *w > BRANCH_THRESHOLD)
                .map(|(b, w)| w * s_proxy(&general_branch(&m, j, *b).unwrap()))
                .sum::<f64>();
            prop_assert!(avg <= s_proxy(&m) + 1e-12);
        }

        #[test]
        fn conserving_structure(seed in 0u64..5000, n in 1usize..7) {
            let mut rng = RngStream::new(seed, 1);
            let m = random_mode(n, &mut rng);
            let j = rng.below(n as u64) as usize;
            let (after, _) = measure_mode_conserving(&m, j, &mut rng).unwrap();
            prop_assert!(linalg::hermiticity_error(after.as_mat().as_ref()) < 1e-12);
            prop_assert!((after.as_mat()[(j, j)].re.abs() - 1.0).abs() < 1e-10);
            prop_assert!(after.williamson().unwrap()[0] <= 1.0 + 1e-9);
        }

        #[test]
        fn proxy_and_renyi_agree_at_extremes(seed in 0u64..1000, n in 1usize..6) {
            let mut rng = RngStream::new(seed, 2);
            let signs: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 }).collect();
            let o = sample_haar_special_orthogonal(2 * n, &mut rng).unwrap();
            let pure = MajoranaCorrelationMatrix::from_williamson(&signs, &o).unwrap();
            prop_assert!(s_proxy(&pure).abs() < 1e-10 && renyi2(&pure).unwrap().abs() < 1e-9);
            let mixed = random_majorana(n, &mut rng);
            let (sp, s2) = (s_proxy(&mixed), renyi2(&mixed).unwrap());
            prop_assert!(sp >= -1e-12 && s2 >= -1e-12);
            prop_assert!(sp <= n as f64 * LN_2 + 1e-12 && s2 <= n as f64 * LN_2 + 1e-12);
        }
    }
}
