//! Symmetric eigendecomposition, rank-`d` approximation, adjacency spectral
//! embedding and the singular-vector embedding used for directed weighted
//! graphs.
//!
//! Eigenvectors are sign-normalised so that the entry of largest magnitude is
//! positive (first such entry on ties). Everything downstream inherits that
//! convention, which makes embeddings comparable across runs.

use ndarray::{s, Array1, Array2, ArrayViewMut1, Axis};

use crate::error::{Error, Result};
use crate::graph::{check_finite, check_square, check_symmetric};
use crate::lapack::{self, Range};
use crate::models::LatentPositions;

/// Absolute asymmetry accepted by [`eig_sym`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in descending algebraic order with matching orthonormal
/// eigenvector columns. Holds either the full spectrum or its leading part.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `U diag(values) U^T`, symmetrised exactly.
    pub fn recompose(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values.view().insert_axis(Axis(0));
        let r = scaled.dot(&self.vectors.t());
        symmetrize(r)
    }

    /// Keeps the leading `d` pairs.
    pub fn truncated(&self, d: usize) -> EigenPairs {
        EigenPairs {
            values: self.values.slice(s![..d]).to_owned(),
            vectors: self.vectors.slice(s![.., ..d]).to_owned(),
        }
    }
}

fn symmetrize(mut r: Array2<f64>) -> Array2<f64> {
    let n = r.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (r[[i, j]] + r[[j, i]]);
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    r
}

/// Flips `v` so that its largest-magnitude entry (lowest index on ties) is
/// positive. Returns true when a flip happened.
pub(crate) fn normalize_sign(mut v: ArrayViewMut1<f64>) -> bool {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = k;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
        true
    } else {
        false
    }
}

fn validate_symmetric(a: &Array2<f64>) -> Result<usize> {
    let view = a.view();
    let n = check_square(&view)?;
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    check_finite(&view)?;
    check_symmetric(&view, SYMMETRY_TOL)?;
    Ok(n)
}

fn from_ascending(values: Array1<f64>, vectors: Array2<f64>) -> EigenPairs {
    let values: Array1<f64> = values.iter().rev().copied().collect();
    let mut vectors = vectors.slice(s![.., ..;-1]).to_owned();
    for col in vectors.columns_mut() {
        normalize_sign(col);
    }
    EigenPairs { values, vectors }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn eig_sym(a: &Array2<f64>) -> Result<EigenPairs> {
    validate_symmetric(a)?;
    let (w, z) = lapack::dsyevr(a, Range::All)?;
    Ok(from_ascending(w, z))
}

/// The `d` algebraically largest eigenpairs of a symmetric matrix.
pub fn top_eigenpairs(a: &Array2<f64>, d: usize) -> Result<EigenPairs> {
    let n = validate_symmetric(a)?;
    if d == 0 || d > n {
        return Err(Error::DimensionOutOfRange { d, max: n });
    }
    let (w, z) = lapack::dsyevr(a, Range::Top(d))?;
    if w.len() != d {
        return Err(Error::Lapack { routine: "dsyevr", info: -1 });
    }
    Ok(from_ascending(w, z))
}

/// Rank-`d` approximation from the `d` algebraically largest eigenpairs.
///
/// Negative eigenvalues are kept if they are among the largest `d`.
pub fn lowrank(a: &Array2<f64>, d: usize) -> Result<Array2<f64>> {
    Ok(top_eigenpairs(a, d)?.recompose())
}

/// Latent positions `U |S|^{1/2}` for leading pairs, failing if any of the
/// eigenvalues is negative.
pub fn embedding_from_pairs(pairs: &EigenPairs) -> Result<LatentPositions> {
    let nonnegative = pairs.values.iter().take_while(|&&v| v >= 0.0).count();
    if nonnegative < pairs.len() {
        return Err(Error::NegativeEigenvalues { requested: pairs.len(), nonnegative });
    }
    Ok(LatentPositions::estimate(scaled_columns(pairs)))
}

/// `U diag(sqrt(max(lambda, 0)))`: columns with negative eigenvalues vanish.
pub fn scaled_columns(pairs: &EigenPairs) -> Array2<f64> {
    let scale = pairs.values.mapv(|v| v.max(0.0).sqrt());
    &pairs.vectors * &scale.view().insert_axis(Axis(0))
}

/// Adjacency spectral embedding into `d` dimensions.
pub fn ase(a: &Array2<f64>, d: usize) -> Result<LatentPositions> {
    embedding_from_pairs(&top_eigenpairs(a, d)?)
}

/// Scaled singular-vector embedding of a possibly asymmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdEmbedding {
    /// Left singular vectors scaled by `sqrt(sigma)`.
    pub left: Array2<f64>,
    /// Right singular vectors scaled by `sqrt(sigma)`.
    pub right: Array2<f64>,
    pub singular_values: Array1<f64>,
}

impl SvdEmbedding {
    /// `left * right^T`, the best rank-`d` approximation of the input.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.left.dot(&self.right.t())
    }
}

pub fn svd_embed(w: &Array2<f64>, d: usize) -> Result<SvdEmbedding> {
    let view = w.view();
    check_finite(&view)?;
    let max = w.nrows().min(w.ncols());
    if d == 0 || d > max {
        return Err(Error::DimensionOutOfRange { d, max });
    }
    let (u, sigma, vt) = lapack::dgesdd(w)?;
    let mut u = u.slice(s![.., ..d]).to_owned();
    let mut v = vt.slice(s![..d, ..]).t().to_owned();
    for k in 0..d {
        if normalize_sign(u.column_mut(k)) {
            v.column_mut(k).mapv_inplace(|x| -x);
        }
    }
    let singular_values = sigma.slice(s![..d]).to_owned();
    let scale = singular_values.mapv(f64::sqrt);
    let scale = scale.view().insert_axis(Axis(0));
    Ok(SvdEmbedding { left: &u * &scale, right: &v * &scale, singular_values })
}

/// Singular values of a symmetric matrix, descending (absolute eigenvalues).
pub fn symmetric_singular_values(pairs: &EigenPairs) -> Vec<f64> {
    let mut sv: Vec<f64> = pairs.values.iter().map(|v| v.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
