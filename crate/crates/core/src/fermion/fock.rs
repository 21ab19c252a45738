//! Dense Fock-space reference implementation for n ≤ 5 modes.

use serde::Serialize;

use super::{
    apply_mode_unitary, conserving_branch, delta_s_direct_conserving, delta_s_direct_general, delta_s_proxy_conserving,
    delta_s_proxy_general, general_branch, s_proxy, MajoranaCorrelationMatrix, ModeCorrelationMatrix, Occupation,
};
use crate::linalg::{self, CMat, RMat};
use crate::randmat::{sample_haar_special_orthogonal, sample_haar_unitary, SpecialOrthogonal};
use crate::{c64, Error, Result, RngStream};

pub const MAX_ORACLE_MODES: usize = 5;

/// Generic weight for the Hermitian combination used to diagonalize a
/// normal matrix; keeps distinct unit-circle eigenvalues apart.
const MIX: f64 = 0.577_215_664_901_532_9;

/// Eigenvectors and phases of a unitary (or real orthogonal) matrix via the
/// commuting Hermitian pair (X + X†)/2, (X − X†)/(2i).
fn unitary_phases(x: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = x.nrows();
    let h = CMat::from_fn(n, n, |i, j| {
        let a = x[(i, j)];
        let b = x[(j, i)].conj();
        (a + b) * 0.5 + (a - b) * c64::new(0.0, -0.5 * MIX)
    });
    let (_, v) = linalg::eigh(h.as_ref())?;
    let xv = x * &v;
    let theta = (0..n)
        .map(|k| {
            let z: c64 = (0..n).map(|i| v[(i, k)].conj() * xv[(i, k)]).sum();
            z.im.atan2(z.re)
        })
        .collect();
    Ok((theta, v))
}

/// Principal Hermitian logarithm: H with exp(iH) = 𝒰.
pub fn unitary_log(u: &CMat) -> Result<CMat> {
    let n = u.nrows();
    let (theta, v) = unitary_phases(u)?;
    let d = CMat::from_fn(n, n, |i, j| if i == j { c64::new(theta[i], 0.0) } else { c64::new(0.0, 0.0) });
    let mut h = &v * d * v.adjoint();
    linalg::hermitize(&mut h);
    let back = linalg::expm_neg_i_hermitian((-&h).as_ref())?;
    let err = linalg::max_abs_diff(back.as_ref(), u.as_ref());
    if err > 1e-10 {
        return Err(Error::Numerical(format!("unitary logarithm failed (residual {err:.3e})")));
    }
    Ok(h)
}

/// Real antisymmetric A with exp(A) = O. Rotations with an eigenvalue at −1
/// have no unique real principal logarithm and are rejected.
pub fn majorana_log(o: &SpecialOrthogonal) -> Result<RMat> {
    let m = o.dimension();
    let oc = CMat::from_fn(m, m, |i, j| c64::new(o.as_ref()[(i, j)], 0.0));
    let (theta, v) = unitary_phases(&oc)?;
    if let Some(t) = theta.iter().find(|t| t.abs() > std::f64::consts::PI - 1e-6) {
        return Err(Error::Numerical(format!("rotation has an eigenvalue near −1 (phase {t})")));
    }
    let d = CMat::from_fn(m, m, |i, j| if i == j { c64::new(0.0, theta[i]) } else { c64::new(0.0, 0.0) });
    let a = &v * d * v.adjoint();
    let mut a = RMat::from_fn(m, m, |i, j| a[(i, j)].re);
    linalg::antisymmetrize(&mut a);
    // exp(A) = exp(−i·(iA)) with iA Hermitian
    let ia = CMat::from_fn(m, m, |i, j| c64::new(0.0, a[(i, j)]));
    let back = linalg::expm_neg_i_hermitian(ia.as_ref())?;
    let err = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (back[(i, j)] - c64::new(o.as_ref()[(i, j)], 0.0)).norm())
        .fold(0.0, f64::max);
    if err > 1e-10 {
        return Err(Error::Numerical(format!("rotation logarithm failed (residual {err:.3e})")));
    }
    Ok(a)
}

/// Jordan–Wigner operators on 2ⁿ states; bit μ of the basis index is n_μ.
struct Operators {
    dim: usize,
    a: Vec<CMat>,
    gamma: Vec<CMat>,
}

impl Operators {
    fn new(n: usize) -> Self {
        let dim = 1usize << n;
        let a: Vec<CMat> = (0..n)
            .map(|mu| {
                let mut op = CMat::zeros(dim, dim);
                for s in 0..dim {
                    if s >> mu & 1 == 1 {
                        let sign = if (s & ((1 << mu) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        op[(s ^ (1 << mu), s)] = c64::new(sign, 0.0);
                    }
                }
                op
            })
            .collect();
        let mut gamma = Vec::with_capacity(2 * n);
        for op in &a {
            let dag = op.adjoint().to_owned();
            gamma.push(op + &dag);
            gamma.push(CMat::from_fn(dim, dim, |i, j| (op[(i, j)] - dag[(i, j)]) * c64::new(0.0, 1.0)));
        }
        Self { dim, a, gamma }
    }

    fn identity(&self) -> CMat {
        CMat::identity(self.dim, self.dim)
    }

    /// 2⁻ⁿ Π (1 + iλ_μ γ_{2μ}γ_{2μ+1}).
    fn product_state(&self, lambda: &[f64]) -> CMat {
        let mut rho = self.identity();
        for (mu, l) in lambda.iter().enumerate() {
            let pair = &self.gamma[2 * mu] * &self.gamma[2 * mu + 1];
            let factor = self.identity() + faer::Scale(c64::new(0.0, *l)) * &pair;
            rho = &rho * factor * faer::Scale(c64::new(0.5, 0.0));
        }
        rho
    }

    fn majorana(&self, rho: &CMat) -> RMat {
        let m = self.gamma.len();
        let mut out = RMat::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let comm = &self.gamma[i] * &self.gamma[j] - &self.gamma[j] * &self.gamma[i];
                let v = (linalg::trace_product(rho.as_ref(), comm.as_ref()) * c64::new(0.0, 0.5)).re;
                out[(i, j)] = v;
                out[(j, i)] = -v;
            }
        }
        out
    }

    fn mode(&self, rho: &CMat) -> CMat {
        let n = self.a.len();
        CMat::from_fn(n, n, |mu, nu| {
            let op = &self.a[mu] * self.a[nu].adjoint();
            let delta = if mu == nu { 1.0 } else { 0.0 };
            linalg::trace_product(rho.as_ref(), op.as_ref()) * 2.0 - c64::new(delta, 0.0)
        })
    }
}

/// State handed to the oracle: Williamson values plus a rotation.
#[derive(Clone, Debug)]
pub enum OracleInput {
    /// ρ = Û ρ₀ Û† with Û = exp(¼ Σ A_ij γ_iγ_j), A = log O, so M = O M₀ Oᵀ.
    Majorana { lambda: Vec<f64>, rotation: SpecialOrthogonal },
    /// ρ = Û ρ₀ Û† with Û = exp(i Σ H_μν a_μ†a_ν), 𝒰 = exp(iH), so ℳ = 𝒰ℳ₀𝒰†.
    Mode { lambda: Vec<f64>, unitary: CMat },
}

impl OracleInput {
    fn lambda(&self) -> &[f64] {
        match self {
            OracleInput::Majorana { lambda, .. } | OracleInput::Mode { lambda, .. } => lambda,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleBranch {
    pub probability: f64,
    #[serde(skip)]
    pub rho: Option<CMat>,
    #[serde(skip)]
    pub majorana: Option<RMat>,
    #[serde(skip)]
    pub mode: Option<CMat>,
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub rho: CMat,
    pub majorana: MajoranaCorrelationMatrix,
    pub mode: ModeCorrelationMatrix,
    /// Mode j empty.
    pub empty: OracleBranch,
    /// Mode j filled.
    pub filled: OracleBranch,
}

/// Builds the dense state, measures n_j with the projectors a_j a_j† and
/// a_j† a_j, and reads correlation matrices off every resulting state.
pub fn fock_oracle(input: &OracleInput, j: usize) -> Result<OracleResult> {
    let n = input.lambda().len();
    if n == 0 || n > MAX_ORACLE_MODES {
        return Err(Error::OracleSize(n));
    }
    if j >= n {
        return Err(Error::InvalidMeasurement(format!("mode {j} out of range for {n} modes")));
    }
    let ops = Operators::new(n);
    let rho0 = ops.product_state(input.lambda());
    let generator = match input {
        OracleInput::Majorana { rotation, .. } => {
            if rotation.dimension() != 2 * n {
                return Err(Error::DimensionMismatch("rotation size must be 2n".into()));
            }
            let a = majorana_log(rotation)?;
            // Û = exp(G), G = ¼ Σ A_ij γ_iγ_j = −i·(iG)
            let mut g = CMat::zeros(ops.dim, ops.dim);
            for i in 0..2 * n {
                for k in 0..2 * n {
                    if a[(i, k)] != 0.0 {
                        g += faer::Scale(c64::new(0.25 * a[(i, k)], 0.0)) * (&ops.gamma[i] * &ops.gamma[k]);
                    }
                }
            }
            faer::Scale(c64::new(0.0, 1.0)) * g
        }
        OracleInput::Mode { unitary, .. } => {
            if unitary.nrows() != n || unitary.ncols() != n {
                return Err(Error::DimensionMismatch("mode unitary must be n×n".into()));
            }
            let h = unitary_log(unitary)?;
            // Û = exp(iĤ) = exp(−i·(−Ĥ)), Ĥ = Σ H_μν a_μ†a_ν
            let mut g = CMat::zeros(ops.dim, ops.dim);
            for mu in 0..n {
                for nu in 0..n {
                    g += faer::Scale(-h[(mu, nu)]) * (ops.a[mu].adjoint() * &ops.a[nu]);
                }
            }
            linalg::hermitize(&mut g);
            g
        }
    };
    let mut hg = generator;
    linalg::hermitize(&mut hg);
    let u = linalg::expm_neg_i_hermitian(hg.as_ref())?;
    let mut rho = &u * &rho0 * u.adjoint();
    linalg::hermitize(&mut rho);

    let empty_proj = &ops.a[j] * ops.a[j].adjoint();
    let filled_proj = ops.a[j].adjoint() * &ops.a[j];
    let branch = |proj: &CMat| -> OracleBranch {
        let p = linalg::trace_product(proj.as_ref(), rho.as_ref()).re;
        if p <= 1e-14 {
            return OracleBranch {
                probability: p.max(0.0),
                rho: None,
                majorana: None,
                mode: None,
            };
        }
        let mut post = proj * &rho * proj * faer::Scale(c64::new(1.0 / p, 0.0));
        linalg::hermitize(&mut post);
        let majorana = ops.majorana(&post);
        let mode = ops.mode(&post);
        OracleBranch {
            probability: p,
            rho: Some(post),
            majorana: Some(majorana),
            mode: Some(mode),
        }
    };
    let empty = branch(&empty_proj);
    let filled = branch(&filled_proj);
    Ok(OracleResult {
        majorana: MajoranaCorrelationMatrix::from_raw(ops.majorana(&rho)),
        mode: ModeCorrelationMatrix::from_raw(ops.mode(&rho)),
        rho,
        empty,
        filled,
    })
}

/// Largest deviations between the closed-form updates and the dense oracle
/// over a batch of random states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCheck {
    pub modes: Vec<usize>,
    pub cases: usize,
    pub probability: f64,
    pub update: f64,
    /// Closed-form ΔS_proxy against two-branch evaluation on the oracle's states.
    pub delta_s: f64,
}

impl OracleCheck {
    pub fn max_deviation(&self) -> f64 {
        self.probability.max(self.update).max(self.delta_s)
    }
}

fn oracle_s_average(r: &OracleResult) -> f64 {
    [&r.empty, &r.filled]
        .iter()
        .filter_map(|b| b.majorana.as_ref().map(|m| b.probability * s_proxy(&MajoranaCorrelationMatrix::from_raw(m.clone()))))
        .sum::<f64>()
        - s_proxy(&r.majorana)
}

/// `cases` random states cycling through `modes`; each case checks both the
/// general (Majorana) and the number-conserving (mode) update.
pub fn oracle_check(modes: &[usize], cases: usize, rng: &mut RngStream) -> Result<OracleCheck> {
    let mut out = OracleCheck {
        modes: modes.to_vec(),
        cases,
        probability: 0.0,
        update: 0.0,
        delta_s: 0.0,
    };
    if modes.is_empty() {
        return Err(Error::InvalidDimension("no mode counts given".into()));
    }
    for case in 0..cases {
        let n = modes[case % modes.len()];
        let j = rng.below(n as u64) as usize;
        let lambda: Vec<f64> = (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect();

        let o = sample_haar_special_orthogonal(2 * n, rng)?;
        let r = fock_oracle(&OracleInput::Majorana { lambda: lambda.clone(), rotation: o.clone() }, j)?;
        let m = MajoranaCorrelationMatrix::from_williamson(&lambda, &o)?;
        let alpha = m.as_mat()[(2 * j, 2 * j + 1)];
        out.probability = out.probability.max((r.empty.probability - (1.0 + alpha) / 2.0).abs());
        for (b, ob) in [(Occupation::Empty, &r.empty), (Occupation::Filled, &r.filled)] {
            if let Some(expect) = &ob.majorana {
                let lib = general_branch(&m, j, b)?;
                out.update = out.update.max(linalg::max_abs_diff_real(expect.as_ref(), lib.as_mat().as_ref()));
            }
        }
        let closed = delta_s_proxy_general(&m, j)?;
        out.delta_s = out
            .delta_s
            .max((closed - delta_s_direct_general(&m, j)?).abs())
            .max((closed - oracle_s_average(&r)).abs());

        let u = sample_haar_unitary(n, rng)?.into_inner();
        let r = fock_oracle(&OracleInput::Mode { lambda: lambda.clone(), unitary: u.clone() }, j)?;
        let mm = apply_mode_unitary(&ModeCorrelationMatrix::diagonal(&lambda)?, &u)?;
        out.probability = out.probability.max((r.empty.probability - (1.0 + mm.as_mat()[(j, j)].re) / 2.0).abs());
        for (b, ob) in [(Occupation::Empty, &r.empty), (Occupation::Filled, &r.filled)] {
            if let Some(expect) = &ob.mode {
                let lib = conserving_branch(&mm, j, b)?;
                out.update = out.update.max(linalg::max_abs_diff(expect.as_ref(), lib.as_mat().as_ref()));
            }
        }
        let closed = delta_s_proxy_conserving(&mm, j)?;
        out.delta_s = out
            .delta_s
            .max((closed - delta_s_direct_conserving(&mm, j)?).abs())
            .max((closed - oracle_s_average(&r)).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_lambda;
    use super::super::*;
    use super::*;

    fn close_real(a: &RMat, b: &RMat) -> f64 {
        linalg::max_abs_diff_real(a.as_ref(), b.as_ref())
    }

    fn close_complex(a: &CMat, b: &CMat) -> f64 {
        linalg::max_abs_diff(a.as_ref(), b.as_ref())
    }

    #[test]
    fn maximally_mixed_two_modes() {
        let r = fock_oracle(
            &OracleInput::Mode {
                lambda: vec![0.0, 0.0],
                unitary: CMat::identity(2, 2),
            },
            0,
        )
        .unwrap();
        let quarter = CMat::identity(4, 4) * faer::Scale(c64::new(0.25, 0.0));
        assert!(close_complex(&r.rho, &quarter) < 1e-15);
        assert!((r.empty.probability - 0.5).abs() < 1e-15 && (r.filled.probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_state_is_diagonal() {
        let lambda = vec![0.3, -0.6, 0.9];
        let r = fock_oracle(
            &OracleInput::Majorana {
                lambda: lambda.clone(),
                rotation: SpecialOrthogonal::identity(6),
            },
            1,
        )
        .unwrap();
        let expect = ModeCorrelationMatrix::diagonal(&lambda).unwrap();
        assert!(close_complex(r.mode.as_mat(), expect.as_mat()) < 1e-14);
        assert!(close_real(r.majorana.as_mat(), MajoranaCorrelationMatrix::canonical(&lambda).as_mat()) < 1e-14);
        // mode 1 empty with probability (1 + λ)/2
        assert!((r.empty.probability - 0.2).abs() < 1e-14);
    }

    #[test]
    fn logarithms_round_trip() {
        let mut rng = RngStream::new(1, 0);
        for n in 1..=5 {
            let u = sample_haar_unitary(n, &mut rng).unwrap().into_inner();
            unitary_log(&u).unwrap();
            let o = sample_haar_special_orthogonal(2 * n, &mut rng).unwrap();
            let a = majorana_log(&o).unwrap();
            assert!(linalg::antisymmetry_error(a.as_ref()) < 1e-14);
        }
        let mut flip = RMat::identity(2, 2);
        flip[(0, 0)] = -1.0;
        flip[(1, 1)] = -1.0;
        assert!(majorana_log(&SpecialOrthogonal::new(flip).unwrap()).is_err());
    }

    #[test]
    fn mode_conventions_agree_with_dense_state() {
        let mut rng = RngStream::new(2, 0);
        for n in 1..=4 {
            let lambda = random_lambda(n, &mut rng);
            let u = sample_haar_unitary(n, &mut rng).unwrap().into_inner();
            let r = fock_oracle(
                &OracleInput::Mode {
                    lambda: lambda.clone(),
                    unitary: u.clone(),
                },
                0,
            )
            .unwrap();
            let lib = apply_mode_unitary(&ModeCorrelationMatrix::diagonal(&lambda).unwrap(), &u).unwrap();
            assert!(close_complex(r.mode.as_mat(), lib.as_mat()) < 1e-10);
            // Majorana form of ℳ and embedding of the conjugate unitary
            assert!(close_real(r.majorana.as_mat(), lib.to_majorana().as_mat()) < 1e-10);
            let ubar = CMat::from_fn(n, n, |i, j| u[(i, j)].conj());
            let via_embed = MajoranaCorrelationMatrix::from_williamson(&lambda, &embed_mode_unitary(&ubar).unwrap()).unwrap();
            assert!(close_real(r.majorana.as_mat(), via_embed.as_mat()) < 1e-10);
        }
    }

    #[test]
    fn majorana_rotation_convention() {
        let mut rng = RngStream::new(3, 0);
        for n in 1..=4 {
            let lambda = random_lambda(n, &mut rng);
            let o = sample_haar_special_orthogonal(2 * n, &mut rng).unwrap();
            let r = fock_oracle(
                &OracleInput::Majorana {
                    lambda: lambda.clone(),
                    rotation: o.clone(),
                },
                0,
            )
            .unwrap();
            let lib = MajoranaCorrelationMatrix::from_williamson(&lambda, &o).unwrap();
            assert!(close_real(r.majorana.as_mat(), lib.as_mat()) < 1e-10);
        }
    }

    #[test]
    fn measurement_updates_match_oracle() {
        let mut rng = RngStream::new(4, 0);
        for case in 0..100 {
            let n = 2 + case % 4;
            let j = rng.below(n as u64) as usize;
            let lambda = random_lambda(n, &mut rng);
            let o = sample_haar_special_orthogonal(2 * n, &mut rng).unwrap();
            let r = fock_oracle(
                &OracleInput::Majorana {
                    lambda: lambda.clone(),
                    rotation: o.clone(),
                },
                j,
            )
            .unwrap();
            let m = MajoranaCorrelationMatrix::from_williamson(&lambda, &o).unwrap();
            let alpha = m.as_mat()[(2 * j, 2 * j + 1)];
            assert!((r.empty.probability - (1.0 + alpha) / 2.0).abs() < 1e-10);
            for (b, ob) in [(Occupation::Empty, &r.empty), (Occupation::Filled, &r.filled)] {
                let lib = general_branch(&m, j, b).unwrap();
                assert!(close_real(ob.majorana.as_ref().unwrap(), lib.as_mat()) < 1e-10, "case {case}");
            }

            let u = sample_haar_unitary(n, &mut rng).unwrap().into_inner();
            let r = fock_oracle(
                &OracleInput::Mode {
                    lambda: lambda.clone(),
                    unitary: u.clone(),
                },
                j,
            )
            .unwrap();
            let mm = apply_mode_unitary(&ModeCorrelationMatrix::diagonal(&lambda).unwrap(), &u).unwrap();
            assert!((r.empty.probability - (1.0 + mm.as_mat()[(j, j)].re) / 2.0).abs() < 1e-10);
            for (b, ob) in [(Occupation::Empty, &r.empty), (Occupation::Filled, &r.filled)] {
                let lib = conserving_branch(&mm, j, b).unwrap();
                assert!(close_complex(ob.mode.as_ref().unwrap(), lib.as_mat()) < 1e-10, "case {case}");
            }
        }
    }

    #[test]
    fn batch_check_is_exact() {
        let r = oracle_check(&[2, 3, 4, 5], 20, &mut RngStream::new(9, 0)).unwrap();
        assert!(r.max_deviation() < 1e-10, "{r:?}");
    }

    #[test]
    fn oracle_size_limit() {
        let input = OracleInput::Mode {
            lambda: vec![0.0; 6],
            unitary: CMat::identity(6, 6),
        };
        assert!(matches!(fock_oracle(&input, 0), Err(Error::OracleSize(6))));
    }
}
