//! Shifted mimetic difference operators on the periodic reference grid.
//!
//! Every operator here is a sum of 3D shifts of the input, so each one is
//! stored as a short list of taps `(offset, coefficient)` and applied by
//! plane-wise periodic sweeps. `D̂ᵢ = Σⱼ b_ji Kⱼ + i kᵢ Lᵢ` where `Kⱼ` is the
//! one-dimensional staggered derivative along axis `j` (already divided by
//! `h`) and `Lᵢ` the matching averaging along axis `i`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::grid::{expect_space, GridSpec, ScalarField, Space, VectorField};
use crate::lattice::{BlochVector, LatticeSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct StencilCoeffs {
    pub order_k: usize,
    /// Derivative weights `c₁..c_k`.
    pub c: Vec<f64>,
    /// Averaging weights `d₁..d_k`.
    pub d: Vec<f64>,
}

pub fn stencil_coeffs(order_k: usize) -> Result<StencilCoeffs> {
    let (c, d): (Vec<f64>, Vec<f64>) = match order_k {
        1 => (vec![1.0], vec![0.5]),
        2 => (vec![9.0 / 8.0, -1.0 / 24.0], vec![9.0 / 16.0, -1.0 / 16.0]),
        3 => (
            vec![75.0 / 64.0, -25.0 / 384.0, 3.0 / 640.0],
            vec![75.0 / 128.0, -25.0 / 256.0, 3.0 / 256.0],
        ),
        4 => (
            vec![1225.0 / 1024.0, -245.0 / 3072.0, 49.0 / 5120.0, -5.0 / 7168.0],
            vec![1225.0 / 2048.0, -245.0 / 2048.0, 49.0 / 2048.0, -5.0 / 2048.0],
        ),
        _ => return Err(Error::InvalidParameter(format!("order_k must be in 1..=4, got {order_k}"))),
    };
    let coeffs = StencilCoeffs { order_k, c, d };
    coeffs.check()?;
    Ok(coeffs)
}

impl StencilCoeffs {
    /// Consistency: averaging reproduces constants, the derivative is exact on linears.
    pub fn check(&self) -> Result<()> {
        let avg: f64 = self.d.iter().map(|d| 2.0 * d).sum();
        let lin: f64 = self.c.iter().enumerate().map(|(s, c)| c * (2 * s + 1) as f64).sum();
        if (avg - 1.0).abs() > 1e-14 || (lin - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "inconsistent stencil of half-order {}: Σ2d = {avg}, Σc(2s-1) = {lin}",
                self.order_k
            )));
        }
        Ok(())
    }

    /// One-dimensional derivative stencil as `(offset, weight)`, unscaled by `1/h`.
    pub fn derivative_taps(&self) -> Vec<(isize, f64)> {
        let mut taps = Vec::with_capacity(2 * self.order_k);
        for (s, &c) in self.c.iter().enumerate() {
            let s = s as isize;
            taps.push((s + 1, c));
            taps.push((-s, -c));
        }
        taps
    }

    pub fn average_taps(&self) -> Vec<(isize, f64)> {
        let mut taps = Vec::with_capacity(2 * self.order_k);
        for (s, &d) in self.d.iter().enumerate() {
            let s = s as isize;
            taps.push((s + 1, d));
            taps.push((-s, d));
        }
        taps
    }

    /// Generator `v₁` of the derivative circulant, length `n`, scaled by `scale`.
    pub fn derivative_generator(&self, n: usize, scale: f64) -> Vec<f64> {
        generator(&self.derivative_taps(), n, scale)
    }

    pub fn average_generator(&self, n: usize) -> Vec<f64> {
        generator(&self.average_taps(), n, 1.0)
    }
}

fn generator(taps: &[(isize, f64)], n: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(o, w) in taps {
        v[o.rem_euclid(n as isize) as usize] += w * scale;
    }
    v
}

/// A periodic 3D shift `offset` with complex weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    pub offset: [isize; 3],
    pub coeff: Complex64,
}

/// Merges taps with identical offsets and drops exact zeros.
pub fn merge_taps(taps: impl IntoIterator<Item = Tap>) -> Vec<Tap> {
    let mut out: Vec<Tap> = Vec::new();
    for t in taps {
        match out.iter_mut().find(|u| u.offset == t.offset) {
            Some(u) => u.coeff += t.coeff,
            None => out.push(t),
        }
    }
    out.retain(|t| t.coeff != ZERO);
    out.sort_by_key(|t| (t.offset[2], t.offset[1], t.offset[0]));
    out
}

pub fn adjoint_taps(taps: &[Tap]) -> Vec<Tap> {
    let mut adj: Vec<Tap> = taps
        .iter()
        .map(|t| Tap { offset: [-t.offset[0], -t.offset[1], -t.offset[2]], coeff: t.coeff.conj() })
        .collect();
    adj.sort_by_key(|t| (t.offset[2], t.offset[1], t.offset[0]));
    adj
}

/// Composition of two tap lists (both operators are shift-invariant, so they commute).
pub fn compose_taps(a: &[Tap], b: &[Tap]) -> Vec<Tap> {
    merge_taps(a.iter().flat_map(|s| {
        b.iter().map(move |t| Tap {
            offset: [s.offset[0] + t.offset[0], s.offset[1] + t.offset[1], s.offset[2] + t.offset[2]],
            coeff: s.coeff * t.coeff,
        })
    }))
}

/// `y (+)= alpha · Σ_taps c · x[· + offset]` with periodic wrap on an `n³` grid.
pub fn sweep(taps: &[Tap], n: usize, x: &[Complex64], y: &mut [Complex64], alpha: Complex64, accumulate: bool) {
    let plane = n * n;
    let m = n as isize;
    let w = |a: isize| a.rem_euclid(m) as usize;
    let body = |(k, out): (usize, &mut [Complex64])| {
        for j in 0..n {
            let dst = &mut out[j * n..j * n + n];
            if !accumulate {
                dst.fill(ZERO);
            }
            for t in taps {
                let c = alpha * t.coeff;
                let kk = w(k as isize + t.offset[2]);
                let jj = w(j as isize + t.offset[1]);
                let dx = w(t.offset[0]);
                let src = &x[kk * plane + jj * n..kk * plane + jj * n + n];
                let (d_lo, d_hi) = dst.split_at_mut(n - dx);
                for (o, s) in d_lo.iter_mut().zip(&src[dx..]) {
                    *o += c * s;
                }
                for (o, s) in d_hi.iter_mut().zip(&src[..dx]) {
                    *o += c * s;
                }
            }
        }
    };
    if n >= 16 {
        y.par_chunks_mut(plane).enumerate().for_each(body);
    } else {
        y.chunks_mut(plane).enumerate().for_each(body);
    }
}

/// Matrix-free `D̂ᵢ` operators for one grid, lattice and Bloch vector.
#[derive(Clone, Debug)]
pub struct ShiftedOperators {
    pub grid: GridSpec,
    pub lattice: LatticeSpec,
    pub bloch: BlochVector,
    pub coeffs: StencilCoeffs,
    taps: [Vec<Tap>; 3],
    adj_taps: [Vec<Tap>; 3],
}

impl ShiftedOperators {
    pub fn new(grid: GridSpec, lattice: LatticeSpec, bloch: BlochVector) -> Result<ShiftedOperators> {
        if !bloch.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite Bloch vector {:?}", bloch.0)));
        }
        let coeffs = stencil_coeffs(grid.order_k)?;
        let inv_h = grid.n as f64;
        let der = coeffs.derivative_taps();
        let avg = coeffs.average_taps();
        let taps: [Vec<Tap>; 3] = std::array::from_fn(|i| {
            let mut raw = Vec::new();
            for j in 0..3 {
                let b = lattice.b_coeff(j, i);
                if b == 0.0 {
                    continue;
                }
                for &(o, c) in &der {
                    let mut offset = [0; 3];
                    offset[j] = o;
                    raw.push(Tap { offset, coeff: Complex64::new(b * c * inv_h, 0.0) });
                }
            }
            let ki = bloch.0[i];
            if ki != 0.0 {
                for &(o, d) in &avg {
                    let mut offset = [0; 3];
                    offset[i] = o;
                    raw.push(Tap { offset, coeff: I * (ki * d) });
                }
            }
            merge_taps(raw)
        });
        let adj_taps = std::array::from_fn(|i| adjoint_taps(&taps[i]));
        Ok(ShiftedOperators { grid, lattice, bloch, coeffs, taps, adj_taps })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn scalar_len(&self) -> usize {
        self.grid.scalar_len()
    }

    pub fn taps(&self, dir: usize, adjoint: bool) -> &[Tap] {
        if adjoint {
            &self.adj_taps[dir]
        } else {
            &self.taps[dir]
        }
    }

    /// `y = D̂_dir x` (or `D̂_dir' x`), `dir` zero-based.
    pub fn apply_d_into(&self, dir: usize, x: &[Complex64], y: &mut [Complex64], adjoint: bool) {
        sweep(self.taps(dir, adjoint), self.grid.n, x, y, Complex64::new(1.0, 0.0), false);
    }

    /// `y += alpha · D̂_dir x` (or its adjoint).
    pub fn apply_d_acc(&self, dir: usize, x: &[Complex64], y: &mut [Complex64], alpha: Complex64, adjoint: bool) {
        sweep(self.taps(dir, adjoint), self.grid.n, x, y, alpha, true);
    }

    pub fn apply_d(&self, dir: usize, x: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>> {
        if dir > 2 {
            return Err(Error::InvalidParameter(format!("direction must be 0, 1 or 2, got {dir}")));
        }
        check_len(self.scalar_len(), x.len())?;
        let mut y = vec![ZERO; x.len()];
        self.apply_d_into(dir, x, &mut y, adjoint);
        Ok(y)
    }

    fn check_field(&self, n: usize, space: Space, expected: Space) -> Result<()> {
        expect_space(expected, space)?;
        check_len(self.grid.n, n)
    }

    pub fn apply_grad_k(&self, phi: &ScalarField) -> Result<VectorField> {
        self.check_field(phi.n, phi.space, Space::Node)?;
        let mut out = VectorField::zeros(self.grid.n, Space::Edge);
        for i in 0..3 {
            self.apply_d_into(i, &phi.values, out.component_mut(i), false);
        }
        Ok(out)
    }

    pub fn apply_grad_k_adj(&self, u: &VectorField) -> Result<ScalarField> {
        self.check_field(u.n, u.space, Space::Edge)?;
        let mut out = ScalarField::zeros(self.grid.n, Space::Node);
        for i in 0..3 {
            self.apply_d_acc(i, u.component(i), &mut out.values, Complex64::new(1.0, 0.0), true);
        }
        Ok(out)
    }

    pub fn apply_curl_k(&self, u: &VectorField) -> Result<VectorField> {
        self.check_field(u.n, u.space, Space::Edge)?;
        let mut out = VectorField::zeros(self.grid.n, Space::Face);
        self.curl_raw(&u.values, &mut out.values, false);
        Ok(out)
    }

    pub fn apply_curl_k_adj(&self, v: &VectorField) -> Result<VectorField> {
        self.check_field(v.n, v.space, Space::Face)?;
        let mut out = VectorField::zeros(self.grid.n, Space::Edge);
        self.curl_raw(&v.values, &mut out.values, true);
        Ok(out)
    }

    /// `y = CURL x` or `y = CURL' x` on raw `3N³` slices. The block matrix is
    /// skew in its block pattern, so the adjoint reuses the same pattern with
    /// adjoint blocks and flipped signs.
    pub fn curl_raw(&self, x: &[Complex64], y: &mut [Complex64], adjoint: bool) {
        let m = self.scalar_len();
        let one = Complex64::new(1.0, 0.0);
        let (plus, minus) = if adjoint { (-one, one) } else { (one, -one) };
        let (x1, rest) = x.split_at(m);
        let (x2, x3) = rest.split_at(m);
        let (y1, rest) = y.split_at_mut(m);
        let (y2, y3) = rest.split_at_mut(m);
        // y1 = -D3 x2 + D2 x3
        sweep(self.taps(2, adjoint), self.grid.n, x2, y1, minus, false);
        self.apply_d_acc(1, x3, y1, plus, adjoint);
        // y2 = D3 x1 - D1 x3
        sweep(self.taps(2, adjoint), self.grid.n, x1, y2, plus, false);
        self.apply_d_acc(0, x3, y2, minus, adjoint);
        // y3 = -D2 x1 + D1 x2
        sweep(self.taps(1, adjoint), self.grid.n, x1, y3, minus, false);
        self.apply_d_acc(0, x2, y3, plus, adjoint);
    }

    pub fn apply_div_k(&self, v: &VectorField) -> Result<ScalarField> {
        self.check_field(v.n, v.space, Space::Face)?;
        let mut out = ScalarField::zeros(self.grid.n, Space::Cell);
        self.div_raw(&v.values, &mut out.values);
        Ok(out)
    }

    pub fn div_raw(&self, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.scalar_len();
        self.apply_d_into(0, &x[..m], y, false);
        self.apply_d_acc(1, &x[m..2 * m], y, Complex64::new(1.0, 0.0), false);
        self.apply_d_acc(2, &x[2 * m..], y, Complex64::new(1.0, 0.0), false);
    }

    /// `y (+)= alpha · DIV' psi`.
    pub fn div_adj_raw(&self, psi: &[Complex64], y: &mut [Complex64], alpha: Complex64, accumulate: bool) {
        let m = self.scalar_len();
        for i in 0..3 {
            sweep(self.taps(i, true), self.grid.n, psi, &mut y[i * m..(i + 1) * m], alpha, accumulate);
        }
    }

    pub fn apply_div_k_adj(&self, psi: &ScalarField) -> Result<VectorField> {
        self.check_field(psi.n, psi.space, Space::Cell)?;
        let mut out = VectorField::zeros(self.grid.n, Space::Face);
        self.div_adj_raw(&psi.values, &mut out.values, Complex64::new(1.0, 0.0), false);
        Ok(out)
    }

    /// Taps of the scalar Laplacian `L_k = Σᵢ D̂ᵢ D̂ᵢ'`.
    pub fn laplacian_taps(&self) -> Vec<Tap> {
        merge_taps((0..3).flat_map(|i| compose_taps(&self.taps[i], &self.adj_taps[i])))
    }

    /// Block-diagonal vector Laplacian on edges or faces.
    pub fn apply_vector_laplacian(&self, u: &VectorField) -> Result<VectorField> {
        if u.space.is_scalar() {
            return Err(Error::SpaceMismatch { expected: Space::Face, actual: u.space });
        }
        check_len(self.grid.n, u.n)?;
        let taps = self.laplacian_taps();
        let mut out = VectorField::zeros(u.n, u.space);
        for c in 0..3 {
            sweep(&taps, u.n, u.component(c), out.component_mut(c), Complex64::new(1.0, 0.0), false);
        }
        Ok(out)
    }
}
