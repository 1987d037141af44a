//! Matrix-free photonic band-structure solver built on shifted mimetic finite
//! differences with kernel compensation.
//!
//! The magnetic field lives on the face space of a periodic staggered grid
//! over the unit reference cell. The compensated operator
//! `S = CURL M₀ CURL' + γ DIV' DIV (+ c)` is Hermitian positive semidefinite,
//! its low spectrum is computed with a preconditioned LOBPCG, and the
//! preconditioner `P = CURL CURL' + γ DIV' DIV + c` is inverted either
//! exactly by FFT or approximately by a distributive multigrid V-cycle.

pub mod accuracy;
pub mod bands;
pub mod block;
pub mod compensation;
pub mod dense;
pub mod dielectric;
pub mod error;
pub mod fft;
pub mod grid;
pub mod lattice;
pub mod lobpcg;
pub mod multigrid;
pub mod output;
pub mod stencil;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarField, Space, VectorField};
pub use lattice::{make_lattice, BlochVector, KPath, LatticeKind, LatticeSpec};
pub use stencil::{stencil_coeffs, ShiftedOperators, StencilCoeffs};

/// A linear map on `ℂⁿ` applied out of place.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);

    /// Applies the operator to `ncols` column-major vectors.
    fn apply_block(&self, x: &[Complex64], y: &mut [Complex64], ncols: usize) {
        let n = self.dim();
        for c in 0..ncols {
            self.apply(&x[c * n..(c + 1) * n], &mut y[c * n..(c + 1) * n]);
        }
    }
}
