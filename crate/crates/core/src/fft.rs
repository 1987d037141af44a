//! Exact FFT inversion of the preconditioner `P = CURL CURL' + γ DIV' DIV + c`.
//!
//! All `D̂ᵢ` are 3D circulants, so the discrete Fourier basis diagonalizes them
//! simultaneously. At frequency `f` the face-space block of `P` is
//! `(s + c) I + (γ − 1) v v*` with `v = conj δ(f)` and `s = |δ(f)|²`, which is
//! inverted in closed form.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::grid::delinearize;
use crate::stencil::ShiftedOperators;
use crate::LinearOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Unnormalized forward / normalized inverse 3D DFT on an `n³` lexicographic array.
#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Fft3 {
        let mut planner = FftPlanner::new();
        Fft3 { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let plane = n * n;
        assert_eq!(data.len(), plane * n, "FFT buffer length");
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        let mut buf = vec![ZERO; plane];
        // Axis 1: transpose each z-plane so y becomes the fast index.
        for k in 0..n {
            let slab = &mut data[k * plane..(k + 1) * plane];
            for j in 0..n {
                for i in 0..n {
                    buf[i * n + j] = slab[j * n + i];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..n {
                for i in 0..n {
                    slab[j * n + i] = buf[i * n + j];
                }
            }
        }
        // Axis 2: for each y-row, gather the (x, z) slab with z fast.
        for j in 0..n {
            for k in 0..n {
                let row = &data[k * plane + j * n..k * plane + j * n + n];
                for i in 0..n {
                    buf[i * n + k] = row[i];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..n {
                let row = &mut data[k * plane + j * n..k * plane + j * n + n];
                for i in 0..n {
                    row[i] = buf[i * n + k];
                }
            }
        }
    }
}

/// One-dimensional symbol `ξ(f) = Σ_m a_m ωᶠᵐ`, `ω = e^{2πi/N}`, of a circulant with generator `a`.
pub fn circulant_symbol(generator: &[f64]) -> Vec<Complex64> {
    let n = generator.len();
    (0..n)
        .map(|f| {
            generator
                .iter()
                .enumerate()
                .map(|(m, &a)| a * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((f * m) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Fourier multipliers `δᵢ(f)` of the three `D̂ᵢ` and `s(f) = Σᵢ |δᵢ(f)|²`.
#[derive(Clone, Debug)]
pub struct FourierSymbols {
    pub n: usize,
    pub delta: [Vec<Complex64>; 3],
    pub s: Vec<f64>,
}

pub fn build_symbols(ops: &ShiftedOperators) -> FourierSymbols {
    let n = ops.n();
    let h = ops.grid.h();
    let xi1 = circulant_symbol(&ops.coeffs.derivative_generator(n, 1.0 / h));
    let xi0 = circulant_symbol(&ops.coeffs.average_generator(n));
    let m = n * n * n;
    let delta: [Vec<Complex64>; 3] = std::array::from_fn(|i| {
        let k = ops.bloch.0[i];
        (0..m)
            .map(|idx| {
                let f = delinearize(idx, n);
                let mut d: Complex64 = (0..3).map(|j| xi1[f[j]] * ops.lattice.b_coeff(j, i)).sum();
                d += Complex64::new(0.0, k) * xi0[f[i]];
                d
            })
            .collect()
    });
    let s = (0..m).map(|f| delta.iter().map(|d| d[f].norm_sqr()).sum()).collect();
    FourierSymbols { n, delta, s }
}

impl FourierSymbols {
    /// Smallest strictly positive `s(f)`, treating values below `1e-12 · max s` as zero.
    pub fn min_nonzero_s(&self) -> f64 {
        let max = self.s.iter().copied().fold(0.0, f64::max);
        self.s.iter().copied().filter(|&v| v > 1e-12 * max).fold(f64::INFINITY, f64::min)
    }

    /// The `m`-th smallest nonzero eigenvalue of `CURL CURL'`: its nonzero
    /// spectrum is `s(f)` with multiplicity two.
    pub fn curl_eigenvalue(&self, m: usize) -> f64 {
        let max = self.s.iter().copied().fold(0.0, f64::max);
        let mut v: Vec<f64> = self.s.iter().copied().filter(|&x| x > 1e-12 * max).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        let idx = (m.max(1) - 1) / 2;
        v.get(idx).copied().unwrap_or(max)
    }
}

/// Penalty guaranteeing that the `m` lowest nonzero eigenvalues of `S` are
/// curl-type: with `β_max = max M₀`, the `m`-th curl eigenvalue of `S` is at most
/// `β_max μ_m` while the penalty branch starts at `γ s_min`. A factor 2 margin
/// is added.
pub fn gamma_safe(symbols: &FourierSymbols, beta_max: f64, m: usize) -> f64 {
    2.0 * beta_max * symbols.curl_eigenvalue(m) / symbols.min_nonzero_s()
}

/// Applies `P` in Fourier space; used as an independent path for testing.
pub fn apply_p(b: &[Complex64], symbols: &FourierSymbols, fft: &Fft3, gamma: f64, c: f64) -> Result<Vec<Complex64>> {
    let m = symbols.n.pow(3);
    check_len(3 * m, b.len())?;
    let mut x = b.to_vec();
    for comp in x.chunks_mut(m) {
        fft.forward(comp);
    }
    for f in 0..m {
        let v = [symbols.delta[0][f].conj(), symbols.delta[1][f].conj(), symbols.delta[2][f].conj()];
        let bh = [x[f], x[m + f], x[2 * m + f]];
        let vb: Complex64 = (0..3).map(|i| v[i].conj() * bh[i]).sum();
        for i in 0..3 {
            x[i * m + f] = bh[i] * (symbols.s[f] + c) + v[i] * vb * (gamma - 1.0);
        }
    }
    for comp in x.chunks_mut(m) {
        fft.inverse(comp);
    }
    Ok(x)
}

/// Solves `P x = b` in place of `out`.
pub fn solve_p_into(b: &[Complex64], out: &mut [Complex64], symbols: &FourierSymbols, fft: &Fft3, gamma: f64, c: f64) -> Result<()> {
    let m = symbols.n.pow(3);
    check_len(3 * m, b.len())?;
    check_len(3 * m, out.len())?;
    out.copy_from_slice(b);
    for comp in out.chunks_mut(m) {
        fft.forward(comp);
    }
    for f in 0..m {
        let s = symbols.s[f];
        let alpha = s + c;
        let denom = s + c + (gamma - 1.0) * s;
        if alpha <= 0.0 || denom <= 0.0 {
            return Err(Error::SingularPreconditioner { frequency: delinearize(f, symbols.n) });
        }
        let v = [symbols.delta[0][f].conj(), symbols.delta[1][f].conj(), symbols.delta[2][f].conj()];
        let bh = [out[f], out[m + f], out[2 * m + f]];
        let vb: Complex64 = (0..3).map(|i| v[i].conj() * bh[i]).sum();
        let t = vb * ((gamma - 1.0) / denom);
        for i in 0..3 {
            out[i * m + f] = (bh[i] - t * v[i]) / alpha;
        }
    }
    for comp in out.chunks_mut(m) {
        fft.inverse(comp);
    }
    Ok(())
}

pub fn solve_p(b: &[Complex64], symbols: &FourierSymbols, fft: &Fft3, gamma: f64, c: f64) -> Result<Vec<Complex64>> {
    let mut out = vec![ZERO; b.len()];
    solve_p_into(b, &mut out, symbols, fft, gamma, c)?;
    Ok(out)
}

/// `P⁻¹` as a linear operator, with symbols and plans built once.
#[derive(Clone, Debug)]
pub struct FftPreconditioner {
    pub symbols: FourierSymbols,
    fft: Fft3,
    pub gamma: f64,
    pub c: f64,
}

impl FftPreconditioner {
    pub fn new(ops: &ShiftedOperators, gamma: f64, c: f64) -> Result<FftPreconditioner> {
        let symbols = build_symbols(ops);
        FftPreconditioner::from_symbols(symbols, gamma, c)
    }

    pub fn from_symbols(symbols: FourierSymbols, gamma: f64, c: f64) -> Result<FftPreconditioner> {
        if !(gamma > 0.0) || c < 0.0 {
            return Err(Error::InvalidParameter(format!("invalid gamma {gamma} or shift {c}")));
        }
        if let Some(f) = symbols.s.iter().position(|&s| s + c <= 0.0) {
            return Err(Error::SingularPreconditioner { frequency: delinearize(f, symbols.n) });
        }
        let fft = Fft3::new(symbols.n);
        Ok(FftPreconditioner { symbols, fft, gamma, c })
    }

    pub fn with_gamma(&self, gamma: f64) -> FftPreconditioner {
        FftPreconditioner { gamma, ..self.clone() }
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }
}

impl LinearOperator for FftPreconditioner {
    fn dim(&self) -> usize {
        3 * self.symbols.n.pow(3)
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        solve_p_into(x, y, &self.symbols, &self.fft, self.gamma, self.c).expect("preconditioner validated at construction");
    }
}
