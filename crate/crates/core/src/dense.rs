//! Explicit matrices of the matrix-free operators, for small grids only.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::compensation::CompensatedOperator;
use crate::dielectric::M0Diagonal;
use crate::error::{Error, Result};
use crate::lobpcg::sorted_eigh;
use crate::stencil::ShiftedOperators;

/// Largest grid accepted by [`dense_assemble`].
pub const DENSE_MAX_N: usize = 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug)]
pub enum DenseKind<'a> {
    /// Node → Edge.
    Grad,
    /// Edge → Face.
    Curl,
    /// Face → Cell.
    Div,
    /// `D̂ᵢ` for `i ∈ 0..3`, or its adjoint.
    D { dir: usize, adjoint: bool },
    /// `CURL CURL' + γ DIV' DIV + c`.
    P { gamma: f64, c: f64 },
    /// The compensated operator, shift included.
    S(&'a CompensatedOperator),
}

/// Columns are the images of the canonical basis vectors under `f`.
pub fn dense_from_fn<F>(cols: usize, rows: usize, mut f: F) -> DMatrix<Complex64>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let mut out = DMatrix::zeros(rows, cols);
    let mut e = vec![ZERO; cols];
    let mut y = vec![ZERO; rows];
    for j in 0..cols {
        e[j] = Complex64::new(1.0, 0.0);
        f(&e, &mut y);
        out.column_mut(j).copy_from_slice(&y);
        e[j] = ZERO;
    }
    out
}

pub fn dense_assemble(kind: DenseKind<'_>, ops: &ShiftedOperators) -> Result<DMatrix<Complex64>> {
    let n = ops.n();
    if n > DENSE_MAX_N {
        return Err(Error::TooLarge(n));
    }
    let s = ops.scalar_len();
    let v = 3 * s;
    let m = match kind {
        DenseKind::Grad => dense_from_fn(s, v, |x, y| {
            for c in 0..3 {
                ops.apply_d_into(c, x, &mut y[c * s..(c + 1) * s], false);
            }
        }),
        DenseKind::Curl => dense_from_fn(v, v, |x, y| ops.curl_raw(x, y, false)),
        DenseKind::Div => dense_from_fn(v, s, |x, y| ops.div_raw(x, y)),
        DenseKind::D { dir, adjoint } => {
            if dir > 2 {
                return Err(Error::InvalidParameter(format!("direction {dir} out of range")));
            }
            dense_from_fn(s, s, |x, y| ops.apply_d_into(dir, x, y, adjoint))
        }
        DenseKind::P { gamma, c } => {
            let p = CompensatedOperator::with_raw_shift(ops.clone(), M0Diagonal::identity(v), gamma, c)?;
            dense_from_fn(v, v, |x, y| p.apply_raw(x, y))
        }
        DenseKind::S(op) => {
            if op.ops.n() != n {
                return Err(Error::Shape { expected: n, actual: op.ops.n() });
            }
            dense_from_fn(v, v, |x, y| op.apply_raw(x, y))
        }
    };
    Ok(m)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &DMatrix<Complex64>) -> Vec<f64> {
    sorted_eigh(a).0
}

/// Ascending eigenvalues of `A x = λ B x` with `B` Hermitian positive definite.
pub fn generalized_eigenvalues(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("right-hand matrix is not positive definite".into()))?;
    let l = chol.l();
    // Complex square roots never fail, so an indefinite `B` shows up as a non-real pivot.
    if l.diagonal().iter().any(|d| !(d.re > 0.0) || d.im.abs() > 1e-12 * d.re) {
        return Err(Error::Degenerate("right-hand matrix is not positive definite".into()));
    }
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&y.adjoint())
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    Ok(hermitian_eigenvalues(&c))
}

/// Eigenvalues whose magnitude exceeds `tol` times the largest one.
pub fn nonzero_eigenvalues(a: &DMatrix<Complex64>, tol: f64) -> Vec<f64> {
    let all = hermitian_eigenvalues(a);
    let scale = all.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    all.into_iter().filter(|v| v.abs() > tol * scale).collect()
}

pub fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.norm()))
}
