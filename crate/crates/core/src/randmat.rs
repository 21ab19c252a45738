//! Haar samplers for U(N), SO(m) and rank-r projectors.

use faer::MatRef;

use crate::linalg::{self, CMat, RMat};
use crate::{c64, Error, Result, RngStream};

/// An N×N unitary drawn from Haar measure.
#[derive(Clone, Debug)]
pub struct HaarUnitary(CMat);

impl HaarUnitary {
    pub fn dimension(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }
}

/// An m×m real orthogonal matrix with unit determinant.
#[derive(Clone, Debug)]
pub struct SpecialOrthogonal(RMat);

impl SpecialOrthogonal {
    /// Wraps `o` after checking OᵀO = I to 1e-10 and det O = 1 to 1e-9.
    pub fn new(o: RMat) -> Result<Self> {
        if o.nrows() != o.ncols() {
            return Err(Error::InvalidDimension(format!(
                "rotation must be square, got {}x{}",
                o.nrows(),
                o.ncols()
            )));
        }
        let err = linalg::orthogonality_error(o.as_ref());
        if err > 1e-10 {
            return Err(Error::InvalidState(format!("not orthogonal: |OᵀO − I| = {err:e}")));
        }
        let det = linalg::det_real(o.as_ref());
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("determinant {det} ≠ 1")));
        }
        Ok(Self(o))
    }

    pub fn identity(m: usize) -> Self {
        Self(RMat::identity(m, m))
    }

    pub fn dimension(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    pub fn into_inner(self) -> RMat {
        self.0
    }
}

/// An orthogonal projector of rank r on C^N.
#[derive(Clone, Debug)]
pub struct Projector {
    rank: usize,
    mat: CMat,
}

impl Projector {
    /// Wraps a matrix already known to be a projector; checks P = P† and
    /// P² = P to 1e-10 and tr P = rank to 1e-9.
    pub fn new(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(Error::InvalidDimension(format!("projector must be square, got {}x{}", n, mat.ncols())));
        }
        let tr = linalg::trace(mat.as_ref()).re;
        let rank = tr.round() as usize;
        let sq = &mat * &mat;
        let err = linalg::max_abs_diff(sq.as_ref(), mat.as_ref()).max(linalg::hermiticity_error(mat.as_ref()));
        if err > 1e-10 || (tr - rank as f64).abs() > 1e-9 {
            return Err(Error::InvalidMeasurement(format!("not a projector (residual {err:e}, trace {tr})")));
        }
        Ok(Self { rank, mat })
    }

    pub fn dimension(&self) -> usize {
        self.mat.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    /// I − P.
    pub fn complement(&self) -> Projector {
        let n = self.dimension();
        let mut m = CMat::identity(n, n) - &self.mat;
        linalg::hermitize(&mut m);
        Projector {
            rank: n - self.rank,
            mat: m,
        }
    }
}

/// First `k` columns of a Haar unitary on C^n: Ginibre columns, thin QR, and
/// the phase correction R_jj/|R_jj| that makes the law exactly Haar.
pub fn haar_columns(n: usize, k: usize, rng: &mut RngStream) -> Result<CMat> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("cannot draw {k} Haar columns in dimension {n}")));
    }
    let g = linalg::complex_gaussian(n, k, rng);
    let qr = g.qr();
    let r = qr.thin_R();
    let mut q = qr.compute_thin_Q();
    for j in 0..k {
        let d = r[(j, j)];
        let a = d.norm();
        let phase = if a > 0.0 { d / a } else { c64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// First `k` columns of a Haar orthogonal matrix on R^m (sign-corrected QR).
pub fn haar_orthogonal_columns(m: usize, k: usize, rng: &mut RngStream) -> Result<RMat> {
    if m == 0 || k == 0 || k > m {
        return Err(Error::InvalidDimension(format!("cannot draw {k} orthogonal columns in dimension {m}")));
    }
    let g = linalg::real_gaussian(m, k, rng);
    let qr = g.qr();
    let r = qr.thin_R();
    let mut q = qr.compute_thin_Q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

pub fn sample_haar_unitary(n: usize, rng: &mut RngStream) -> Result<HaarUnitary> {
    if n == 0 {
        return Err(Error::InvalidDimension("U(N) needs N ≥ 1".into()));
    }
    haar_columns(n, n, rng).map(HaarUnitary)
}

/// Haar sample on SO(m), m even. A det = −1 draw has column 0 negated, which
/// maps Haar measure on the other component of O(m) onto Haar on SO(m).
pub fn sample_haar_special_orthogonal(m: usize, rng: &mut RngStream) -> Result<SpecialOrthogonal> {
    if m == 0 || m % 2 == 1 {
        return Err(Error::InvalidDimension(format!("SO(m) sampler needs even m ≥ 2, got {m}")));
    }
    let mut o = haar_orthogonal_columns(m, m, rng)?;
    if linalg::det_real(o.as_ref()) < 0.0 {
        for i in 0..m {
            o[(i, 0)] = -o[(i, 0)];
        }
    }
    Ok(SpecialOrthogonal(o))
}

/// P = U P₀ U† with P₀ the rank-r coordinate projector and U Haar.
pub fn sample_random_projector(n: usize, r: usize, rng: &mut RngStream) -> Result<Projector> {
    if r == 0 || r >= n {
        return Err(Error::InvalidRank { dim: n, rank: r });
    }
    let v = haar_columns(n, r, rng)?;
    let mut mat = &v * v.adjoint();
    linalg::hermitize(&mut mat);
    Ok(Projector { rank: r, mat })
}

/// Complete projective measurement {Pᵢ} on C^n in a Haar-random basis, with
/// `ranks` giving the rank of each outcome (they must sum to n).
pub fn sample_complete_measurement(ranks: &[usize], rng: &mut RngStream) -> Result<Vec<Projector>> {
    let n: usize = ranks.iter().sum();
    if ranks.contains(&0) || n == 0 {
        return Err(Error::InvalidDimension(format!("outcome ranks must be positive, got {ranks:?}")));
    }
    let u = sample_haar_unitary(n, rng)?.into_inner();
    let mut start = 0;
    Ok(ranks
        .iter()
        .map(|&r| {
            let v = u.subcols(start, r);
            start += r;
            let mut mat = v * v.adjoint();
            linalg::hermitize(&mut mat);
            Projector { rank: r, mat }
        })
        .collect())
}

/// Haar-random rank-`rank` projector on C^n compressed to its leading
/// `support`×`support` block, i.e. Π = (U P₀ U†)[..support, ..support].
///
/// Draws the cheaper of the two exact constructions: the first `support` rows
/// of U (via transpose invariance of Haar measure) or the first `rank`
/// columns.
pub fn compressed_projector(n: usize, rank: usize, support: usize, rng: &mut RngStream) -> Result<CMat> {
    if rank == 0 || rank >= n {
        return Err(Error::InvalidRank { dim: n, rank });
    }
    if support == 0 || support > n {
        return Err(Error::InvalidDimension(format!("support {support} in dimension {n}")));
    }
    let mut pi = if support <= rank {
        // rows of U: W = first `support` columns of a Haar unitary, transposed
        let w = haar_columns(n, support, rng)?;
        let c = w.get(..rank, ..);
        c.transpose() * c.conjugate()
    } else {
        let v = haar_columns(n, rank, rng)?;
        let c = v.get(..support, ..);
        c * c.adjoint()
    };
    linalg::hermitize(&mut pi);
    Ok(pi)
}
