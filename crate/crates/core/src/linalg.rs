//! Dense linear-algebra kernel shared by the simulators.
//!
//! Thin wrappers over `faer` that fix the conventions used in the crate:
//! eigenvalues ascending, Hermitian inputs read from the lower triangle, and
//! explicit re-symmetrization after products.

use faer::{Mat, MatRef, Side};

use crate::{c64, Error, Result, RngStream};

pub type CMat = Mat<c64>;
pub type RMat = Mat<f64>;

pub fn complex_gaussian(rows: usize, cols: usize, rng: &mut RngStream) -> CMat {
    // column-major fill so the draw order is fixed by (rows, cols) alone
    let mut g = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            g[(i, j)] = rng.complex_normal();
        }
    }
    g
}

pub fn real_gaussian(rows: usize, cols: usize, rng: &mut RngStream) -> RMat {
    let mut g = RMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            g[(i, j)] = rng.normal();
        }
    }
    g
}

/// Replaces `a` by (a + a†)/2.
pub fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = c64::new(a[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// Replaces `a` by (a − aᵀ)/2.
pub fn antisymmetrize(a: &mut RMat) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = 0.0;
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] - a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
}

/// Replaces `a` by (a + aᵀ)/2.
pub fn symmetrize(a: &mut RMat) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn trace_real(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// tr(AB) without forming the product.
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut s = c64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// Σ |a_ij|².
pub fn frobenius_sq(a: MatRef<'_, c64>) -> f64 {
    a.squared_norm_l2()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigenvalues: {e:?}")))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// unitary whose columns are the eigenvectors.
pub fn eigh(a: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigen-decomposition: {e:?}")))?;
    let s = evd.S().column_vector();
    let w = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok((w, evd.U().to_owned()))
}

pub fn eigvalsh_real(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigenvalues: {e:?}")))
}

pub fn eigh_real(a: MatRef<'_, f64>) -> Result<(Vec<f64>, RMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigen-decomposition: {e:?}")))?;
    let s = evd.S().column_vector();
    let w = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((w, evd.U().to_owned()))
}

/// Lower Cholesky factor of a Hermitian positive definite matrix, if it exists.
pub fn cholesky(a: MatRef<'_, c64>) -> Option<CMat> {
    a.llt(Side::Lower).ok().map(|f| f.L().to_owned())
}

/// Hermitian square root of a positive semidefinite matrix; eigenvalues below
/// zero are treated as zero.
pub fn psd_sqrt(a: MatRef<'_, c64>) -> Result<CMat> {
    let (w, v) = eigh(a)?;
    let n = w.len();
    let vs = CMat::from_fn(n, n, |i, j| v[(i, j)] * w[j].max(0.0).sqrt());
    let mut s = &vs * v.adjoint();
    hermitize(&mut s);
    Ok(s)
}

/// exp(−iH) for Hermitian H.
pub fn expm_neg_i_hermitian(h: MatRef<'_, c64>) -> Result<CMat> {
    let (w, v) = eigh(h)?;
    let n = w.len();
    let vp = CMat::from_fn(n, n, |i, j| v[(i, j)] * c64::cis(-w[j]));
    Ok(&vp * v.adjoint())
}

pub fn det_real(a: MatRef<'_, f64>) -> f64 {
    a.determinant()
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn max_abs_diff_real(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

/// max |a − a†|.
pub fn hermiticity_error(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// max |a + aᵀ|.
pub fn antisymmetry_error(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] + a[(j, i)]).abs());
        }
    }
    m
}

/// max |U†U − I|.
pub fn unitarity_error(u: MatRef<'_, c64>) -> f64 {
    let g = u.adjoint() * u;
    max_abs_diff(g.as_ref(), CMat::identity(u.ncols(), u.ncols()).as_ref())
}

/// max |OᵀO − I|.
pub fn orthogonality_error(o: MatRef<'_, f64>) -> f64 {
    let g = o.transpose() * o;
    max_abs_diff_real(g.as_ref(), RMat::identity(o.ncols(), o.ncols()).as_ref())
}

pub fn kron_real(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> RMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    RMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}
