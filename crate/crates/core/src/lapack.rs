//! Thin safe wrappers over the LAPACK routines the spectral code needs.

use std::os::raw::{c_char, c_int};
use std::sync::Once;

use ndarray::{Array1, Array2, ShapeBuilder};

use crate::error::{Error, Result};

extern "C" {
    fn openblas_set_num_threads(num_threads: c_int);
}

static SINGLE_THREADED: Once = Once::new();

/// OpenBLAS splits work differently per thread count, which changes rounding.
/// Parallelism lives at the replicate level instead.
fn init() {
    SINGLE_THREADED.call_once(|| unsafe { openblas_set_num_threads(1) });
}

pub(crate) enum Range {
    All,
    /// The `d` algebraically largest eigenvalues.
    Top(usize),
}

/// Eigenvalues in ascending order and column eigenvectors of a symmetric
/// matrix given as its row-major data (only the lower triangle is read).
pub(crate) fn dsyevr(a: &Array2<f64>, range: Range) -> Result<(Array1<f64>, Array2<f64>)> {
    init();
    let n = a.nrows();
    // Row-major storage of a symmetric matrix is its column-major storage.
    let mut buf: Vec<f64> = a.iter().copied().collect();
    let nn = n as c_int;
    let (range_flag, il, iu, want) = match range {
        Range::All => (b'A', 1, nn, n),
        Range::Top(d) => (b'I', nn - d as c_int + 1, nn, d),
    };
    let mut m: c_int = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n * want.max(1)];
    let mut isuppz = vec![0 as c_int; 2 * n.max(1)];
    let mut info: c_int = 0;
    let jobz = b'V' as c_char;
    let rng = range_flag as c_char;
    let uplo = b'U' as c_char;
    let ldz = nn.max(1);

    let mut work_query = [0.0f64];
    let mut iwork_query = [0 as c_int];
    unsafe {
        lapack_sys::dsyevr_(
            &jobz, &rng, &uplo, &nn, buf.as_mut_ptr(), &nn.max(1), &0.0, &0.0, &il, &iu, &0.0,
            &mut m, w.as_mut_ptr(), z.as_mut_ptr(), &ldz, isuppz.as_mut_ptr(),
            work_query.as_mut_ptr(), &-1, iwork_query.as_mut_ptr(), &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevr", info });
    }
    let lwork = work_query[0] as c_int;
    let liwork = iwork_query[0];
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevr_(
            &jobz, &rng, &uplo, &nn, buf.as_mut_ptr(), &nn.max(1), &0.0, &0.0, &il, &iu, &0.0,
            &mut m, w.as_mut_ptr(), z.as_mut_ptr(), &ldz, isuppz.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevr", info });
    }
    let m = m as usize;
    w.truncate(m);
    z.truncate(n * m);
    let vectors = Array2::from_shape_vec((n, m).f(), z).expect("dsyevr output shape");
    Ok((Array1::from(w), vectors))
}

/// Thin SVD `a = u diag(s) vt` with singular values in descending order.
pub(crate) fn dgesdd(a: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    init();
    let (rows, cols) = a.dim();
    let k = rows.min(cols);
    let mut buf: Vec<f64> = a.t().iter().copied().collect();
    let (m, n) = (rows as c_int, cols as c_int);
    let mut s = vec![0.0; k];
    let mut u = vec![0.0; rows * k];
    let mut vt = vec![0.0; k * cols];
    let mut iwork = vec![0 as c_int; 8 * k.max(1)];
    let mut info: c_int = 0;
    let jobz = b'S' as c_char;
    let lda = m.max(1);
    let ldu = m.max(1);
    let ldvt = (k as c_int).max(1);

    let mut work_query = [0.0f64];
    unsafe {
        lapack_sys::dgesdd_(
            &jobz, &m, &n, buf.as_mut_ptr(), &lda, s.as_mut_ptr(), u.as_mut_ptr(), &ldu,
            vt.as_mut_ptr(), &ldvt, work_query.as_mut_ptr(), &-1, iwork.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dgesdd", info });
    }
    let lwork = work_query[0] as c_int;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack_sys::dgesdd_(
            &jobz, &m, &n, buf.as_mut_ptr(), &lda, s.as_mut_ptr(), u.as_mut_ptr(), &ldu,
            vt.as_mut_ptr(), &ldvt, work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dgesdd", info });
    }
    let u = Array2::from_shape_vec((rows, k).f(), u).expect("dgesdd u shape");
    let vt = Array2::from_shape_vec((k, cols).f(), vt).expect("dgesdd vt shape");
    Ok((u, Array1::from(s), vt))
}
