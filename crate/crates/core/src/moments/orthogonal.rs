use serde::{Deserialize, Serialize};

use super::McEstimate;
use crate::linalg::{kron_real, RMat};
use crate::parallel::map_indexed;
use crate::randmat::sample_haar_special_orthogonal;
use crate::{Error, Result, RngStream};

/// Coefficients of E = E_O[O|a⟩⟨b|Oᵀ ⊗ O|c⟩⟨d|Oᵀ] = xI + yS + zW on R^m ⊗ R^m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoefficients {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl QuarticCoefficients {
    /// Exact solve of the Gram system against (Tr E, Tr ES, Tr EW) =
    /// (δ_ab δ_cd, δ_ad δ_bc, δ_ac δ_bd). The Gram matrix
    /// m(m−1)·I + m·11ᵀ is invertible for every m ≥ 2.
    pub fn solve(m: usize, a: usize, b: usize, c: usize, d: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::Numerical(format!("quartic moment system is singular for m = {m}")));
        }
        let k = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let rhs = [k(a, b) * k(c, d), k(a, d) * k(b, c), k(a, c) * k(b, d)];
        let mf = m as f64;
        let total: f64 = rhs.iter().sum();
        let scale = 1.0 / (mf * (mf - 1.0));
        let v = rhs.map(|r| scale * (r - total / (mf + 2.0)));
        Ok(Self { x: v[0], y: v[1], z: v[2] })
    }

    /// Entry ⟨j,k|E|j',k'⟩ = E[O_ja O_j'b O_kc O_k'd].
    pub fn entry(&self, j: usize, k: usize, jp: usize, kp: usize) -> f64 {
        let d = |i: usize, l: usize| if i == l { 1.0 } else { 0.0 };
        self.x * d(j, jp) * d(k, kp) + self.y * d(j, kp) * d(k, jp) + self.z * d(j, k) * d(jp, kp)
    }

    /// Dense m²×m² matrix with row index j·m + k.
    pub fn dense(&self, m: usize) -> RMat {
        RMat::from_fn(m * m, m * m, |r, c| self.entry(r / m, r % m, c / m, c % m))
    }

    /// max |E(R⊗R) − (R⊗R)E|, using the sparsity of I, S and W.
    pub fn commutant_error(&self, r: &RMat) -> f64 {
        let m = r.nrows();
        let kr = kron_real(r.as_ref(), r.as_ref());
        let at = |j: usize, k: usize| j * m + k;
        // Σ_l K_{(l,l),col} and Σ_l K_{row,(l,l)}
        let diag_rows: Vec<f64> = (0..m * m).map(|c| (0..m).map(|l| kr[(at(l, l), c)]).sum()).collect();
        let diag_cols: Vec<f64> = (0..m * m).map(|r| (0..m).map(|l| kr[(r, at(l, l))]).sum()).collect();
        let mut worst = 0.0f64;
        for j in 0..m {
            for k in 0..m {
                let row = at(j, k);
                for jp in 0..m {
                    for kp in 0..m {
                        let col = at(jp, kp);
                        let ek = self.x * kr[(row, col)]
                            + self.y * kr[(at(k, j), col)]
                            + if j == k { self.z * diag_rows[col] } else { 0.0 };
                        let ke = self.x * kr[(row, col)]
                            + self.y * kr[(row, at(kp, jp))]
                            + if jp == kp { self.z * diag_cols[row] } else { 0.0 };
                        worst = worst.max((ek - ke).abs());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticMomentRow {
    pub name: String,
    pub coefficients: QuarticCoefficients,
    /// Exact value from the solver.
    pub exact: f64,
    /// Leading order in 1/n.
    pub leading: f64,
    pub estimate: McEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticMomentReport {
    pub n: usize,
    pub samples: usize,
    /// Worst commutant residual over the random rotations tried.
    pub commutant_error: f64,
    pub commutant_trials: usize,
    pub rows: Vec<QuarticMomentRow>,
}

impl QuarticMomentReport {
    /// Commutant residual ≤ 1e-10 and every row within k·stderr + 4/n⁴ of
    /// its leading-order value.
    pub fn passed(&self, k: f64) -> bool {
        let slack = 4.0 / (self.n as f64).powi(4);
        self.commutant_error <= 1e-10 && self.rows.iter().all(|r| r.estimate.agrees_with(r.leading, k, slack))
    }
}

/// Exact and Monte Carlo quartic moments of Haar O ∈ SO(2n). Each sample
/// averages over all row pairs j ≠ k (or all rows j for the same-row moment).
pub fn so_quartic_moments(n: usize, samples: usize, rng: &RngStream, workers: usize) -> Result<QuarticMomentReport> {
    if n < 4 {
        return Err(Error::InvalidDimension(format!("SO(2n) quartic moments need n ≥ 4, got {n}")));
    }
    let m = 2 * n;
    let (mf, nf) = (m as f64, n as f64);
    // O_j1 O_j1 O_k2 O_k2, O_j1 O_j2 O_k1 O_k2, O_j1 O_j1 O_j2 O_j2
    let pair = QuarticCoefficients::solve(m, 0, 0, 1, 1)?;
    let cross = QuarticCoefficients::solve(m, 0, 1, 0, 1)?;
    let same = pair;

    let trials = 10;
    let rot_rng = rng.derive(u64::MAX);
    let mut commutant_error = 0.0f64;
    for t in 0..trials {
        let r = sample_haar_special_orthogonal(m, &mut rot_rng.derive(t))?.into_inner();
        for c in [pair, cross] {
            commutant_error = commutant_error.max(c.commutant_error(&r));
        }
    }

    let per_sample: Vec<[f64; 3]> = map_indexed(samples, workers, |i| {
        let o = sample_haar_special_orthogonal(m, &mut rng.derive(i as u64))?.into_inner();
        let (mut s1, mut s2, mut s12, mut s1122) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..m {
            let (a, b) = (o[(j, 0)], o[(j, 1)]);
            s1 += a * a;
            s2 += b * b;
            s12 += a * b;
            s1122 += a * a * b * b;
        }
        let pairs = mf * (mf - 1.0);
        Ok([(s1 * s2 - s1122) / pairs, (s12 * s12 - s1122) / pairs, s1122 / mf])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let column = |k: usize| McEstimate::from_samples(&per_sample.iter().map(|v| v[k]).collect::<Vec<_>>());

    let rows = vec![
        QuarticMomentRow {
            name: "pair".into(),
            coefficients: pair,
            exact: pair.entry(0, 1, 0, 1),
            leading: 1.0 / (4.0 * nf * nf),
            estimate: column(0)?,
        },
        QuarticMomentRow {
            name: "cross".into(),
            coefficients: cross,
            exact: cross.entry(0, 1, 0, 1),
            leading: -1.0 / (8.0 * nf.powi(3)),
            estimate: column(1)?,
        },
        QuarticMomentRow {
            name: "same_row".into(),
            coefficients: same,
            exact: same.entry(0, 0, 0, 0),
            leading: 1.0 / (4.0 * nf * nf) - 1.0 / (4.0 * nf.powi(3)),
            estimate: column(2)?,
        },
    ];
    Ok(QuarticMomentReport {
        n,
        samples,
        commutant_error,
        commutant_trials: trials as usize,
        rows,
    })
}
