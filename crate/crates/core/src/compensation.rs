//! The kernel-compensated operator `S = CURL M₀ CURL' + γ DIV' DIV + c` and the
//! Rayleigh recomputation check that separates curl-type eigenpairs from
//! penalty-branch intruders.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dielectric::M0Diagonal;
use crate::error::{check_len, Error, Result};
use crate::grid::{expect_space, norm, Space, VectorField};
use crate::lattice::{BlochVector, LatticeSpec};
use crate::stencil::ShiftedOperators;
use crate::LinearOperator;

/// Penalty `2 max(1/h, |k|⁻²)`, or `2/h` at `k = 0`.
pub fn penalty_gamma(h: f64, k: &BlochVector) -> f64 {
    if k.is_zero() {
        2.0 / h
    } else {
        2.0 * (1.0 / h).max(1.0 / k.norm().powi(2))
    }
}

/// Default positive shift at `k = 0`: `(2π)² ‖B‖₂²`.
pub fn default_shift(lattice: &LatticeSpec) -> f64 {
    (2.0 * std::f64::consts::PI * lattice.b_norm()).powi(2)
}

#[derive(Clone, Debug)]
pub struct CompensatedOperator {
    pub ops: ShiftedOperators,
    pub m0: M0Diagonal,
    pub gamma: f64,
    pub shift_c: f64,
}

impl CompensatedOperator {
    /// `shift` is only used at `k = 0`, where it defaults to [`default_shift`].
    pub fn new(ops: ShiftedOperators, m0: M0Diagonal, gamma: f64, shift: Option<f64>) -> Result<CompensatedOperator> {
        check_len(ops.grid.vector_len(), m0.beta.len())?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("penalty must be positive, got {gamma}")));
        }
        let shift_c = if ops.bloch.is_zero() {
            let c = shift.unwrap_or_else(|| default_shift(&ops.lattice));
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("k = 0 requires a positive shift, got {c}")));
            }
            c
        } else {
            0.0
        };
        Ok(CompensatedOperator { ops, m0, gamma, shift_c })
    }

    /// Operator with an explicit shift, including `c = 0` at `k = 0`; used for kernel studies.
    pub fn with_raw_shift(ops: ShiftedOperators, m0: M0Diagonal, gamma: f64, shift_c: f64) -> Result<CompensatedOperator> {
        check_len(ops.grid.vector_len(), m0.beta.len())?;
        if !(gamma > 0.0) || shift_c < 0.0 {
            return Err(Error::InvalidParameter(format!("invalid gamma {gamma} or shift {shift_c}")));
        }
        Ok(CompensatedOperator { ops, m0, gamma, shift_c })
    }

    pub fn with_gamma(&self, gamma: f64) -> CompensatedOperator {
        CompensatedOperator { gamma, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.ops.grid.vector_len()
    }

    /// `y = S x` on raw face-space slices.
    pub fn apply_raw(&self, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.ops.scalar_len();
        let mut e = vec![Complex64::new(0.0, 0.0); 3 * m];
        self.ops.curl_raw(x, &mut e, true);
        for (v, b) in e.iter_mut().zip(&self.m0.beta) {
            *v *= b;
        }
        self.ops.curl_raw(&e, y, false);
        let d = &mut e[..m];
        self.ops.div_raw(x, d);
        self.ops.div_adj_raw(d, y, Complex64::new(self.gamma, 0.0), true);
        if self.shift_c != 0.0 {
            for (o, v) in y.iter_mut().zip(x) {
                *o += self.shift_c * v;
            }
        }
    }

    pub fn apply_s(&self, x: &VectorField) -> Result<VectorField> {
        expect_space(Space::Face, x.space)?;
        check_len(self.dim(), x.values.len())?;
        let mut y = VectorField::zeros(x.n, Space::Face);
        self.apply_raw(&x.values, &mut y.values);
        Ok(y)
    }

    /// `‖M₀^{1/2} CURL' x‖² / ‖x‖²`.
    pub fn curl_rayleigh(&self, x: &[Complex64]) -> Result<f64> {
        let nx = norm(x);
        if !(nx > 0.0) {
            return Err(Error::Degenerate("zero-norm eigenvector".into()));
        }
        let mut e = vec![Complex64::new(0.0, 0.0); x.len()];
        self.ops.curl_raw(x, &mut e, true);
        let num: f64 = e.iter().zip(&self.m0.beta).map(|(v, b)| b * v.norm_sqr()).sum();
        Ok(num / (nx * nx))
    }

    /// `‖DIV x‖ / ‖x‖`.
    pub fn divergence_ratio(&self, x: &[Complex64]) -> f64 {
        let mut d = vec![Complex64::new(0.0, 0.0); self.ops.scalar_len()];
        self.ops.div_raw(x, &mut d);
        norm(&d) / norm(x)
    }
}

impl LinearOperator for CompensatedOperator {
    fn dim(&self) -> usize {
        CompensatedOperator::dim(self)
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply_raw(x, y)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EigResult {
    /// Eigenvalues `ω_h²` with the shift removed, ascending.
    pub lambdas: Vec<f64>,
    /// Unit eigenvectors in the face space.
    #[serde(skip)]
    pub vectors: Vec<VectorField>,
    pub lambdas_re: Vec<f64>,
    /// Relative residuals `‖Sx − θx‖ / (θ ‖x‖)` with `θ` the shifted value.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub spurious_flags: Vec<bool>,
    pub converged: bool,
    pub gamma: f64,
    pub shift_c: f64,
}

impl EigResult {
    pub fn any_spurious(&self) -> bool {
        self.spurious_flags.iter().any(|&f| f)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub const DEFAULT_RECOMPUTE_TOL: f64 = 1e-6;

/// Recomputes `λ_re = ‖M₀^{1/2} CURL' x‖²/‖x‖²` for every pair and flags the ones
/// where it disagrees with `λ` beyond `rel_tol · max(1, λ)`.
pub fn recompute_check(mut result: EigResult, op: &CompensatedOperator, rel_tol: f64) -> Result<EigResult> {
    let mut re = Vec::with_capacity(result.vectors.len());
    let mut flags = Vec::with_capacity(result.vectors.len());
    for (v, &lam) in result.vectors.iter().zip(&result.lambdas) {
        let lr = op.curl_rayleigh(&v.values)?;
        flags.push((lr - lam).abs() > rel_tol * lam.abs().max(1.0));
        re.push(lr);
    }
    result.lambdas_re = re;
    result.spurious_flags = flags;
    Ok(result)
}
