//! Tall-skinny block kernels on column-major blocks of length-`n` vectors,
//! backed by the `gemm` crate.

use gemm::{c64, Parallelism};
use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn cast(z: Complex64) -> c64 {
    c64::new(z.re, z.im)
}

/// `Aᴴ B` for `A` of `ka` columns and `B` of `kb` columns, each column of length `n`.
pub fn gram(a: &[Complex64], ka: usize, b: &[Complex64], kb: usize, n: usize) -> DMatrix<Complex64> {
    assert_eq!(a.len(), n * ka, "gram: left block length");
    assert_eq!(b.len(), n * kb, "gram: right block length");
    let mut out = DMatrix::<Complex64>::zeros(ka, kb);
    if ka == 0 || kb == 0 || n == 0 {
        return out;
    }
    // SAFETY: `Complex64` and `c64` share the `{re, im}` layout. The left operand
    // is `Aᵀ` (`ka × n`, unit column stride, row stride `n`), the right operand is
    // `B` (`n × kb`, column stride `n`), and `out` is a column-major `ka × kb`
    // matrix; all extents were checked above.
    unsafe {
        gemm::gemm(
            ka,
            kb,
            n,
            out.as_mut_ptr() as *mut c64,
            ka as isize,
            1,
            false,
            a.as_ptr() as *const c64,
            1,
            n as isize,
            b.as_ptr() as *const c64,
            n as isize,
            1,
            c64::new(0.0, 0.0),
            c64::new(1.0, 0.0),
            false,
            true,
            false,
            Parallelism::None,
        );
    }
    out
}

/// `Y ← beta Y + X C` with `X` of `kx` columns, `C` a `kx × ky` matrix and `Y` of `ky` columns.
pub fn gemm_update(y: &mut [Complex64], ky: usize, x: &[Complex64], kx: usize, c: &DMatrix<Complex64>, beta: Complex64, n: usize) {
    assert_eq!(y.len(), n * ky, "gemm: output block length");
    assert_eq!(x.len(), n * kx, "gemm: input block length");
    assert_eq!((c.nrows(), c.ncols()), (kx, ky), "gemm: coefficient shape");
    if ky == 0 || n == 0 {
        return;
    }
    if kx == 0 {
        y.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let read_dst = beta != ZERO;
    // SAFETY: contiguous column-major operands with sizes asserted above; `y`
    // and `x` are distinct borrows and cannot alias.
    unsafe {
        gemm::gemm(
            n,
            ky,
            kx,
            y.as_mut_ptr() as *mut c64,
            n as isize,
            1,
            read_dst,
            x.as_ptr() as *const c64,
            n as isize,
            1,
            c.as_ptr() as *const c64,
            kx as isize,
            1,
            cast(beta),
            c64::new(1.0, 0.0),
            false,
            false,
            false,
            Parallelism::None,
        );
    }
}

/// `X C` as a fresh block.
pub fn gemm(x: &[Complex64], kx: usize, c: &DMatrix<Complex64>, n: usize) -> Vec<Complex64> {
    let mut y = vec![ZERO; n * c.ncols()];
    gemm_update(&mut y, c.ncols(), x, kx, c, ZERO, n);
    y
}

/// Copies the selected columns into a new block.
pub fn select_columns(x: &[Complex64], cols: &[usize], n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cols.len() * n);
    for &c in cols {
        out.extend_from_slice(&x[c * n..(c + 1) * n]);
    }
    out
}

pub fn column_norms(x: &[Complex64], k: usize, n: usize) -> Vec<f64> {
    (0..k).map(|c| crate::grid::norm(&x[c * n..(c + 1) * n])).collect()
}
