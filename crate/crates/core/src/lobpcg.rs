//! Block LOBPCG for the smallest eigenpairs of a Hermitian positive operator.
//!
//! Trial space per iteration is `[X, W, P]` with `W` the preconditioned
//! residuals of the still-active columns and `P` the previous search
//! directions. `W` and `P` are orthonormalized with their operator images
//! carried along, and the small generalized Rayleigh–Ritz problem is solved by
//! Cholesky reduction. If the Gram matrix is not positive definite, `W` is
//! projected against `X` and the step retried.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::{column_norms, gemm, gemm_update, gram};
use crate::error::{check_len, Error, Result};
use crate::LinearOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const REFRESH_EVERY: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub m: usize,
    /// Guard vectors beyond `m`; `None` uses `max(2, m/5)`.
    pub block_extra: Option<usize>,
    pub tol: f64,
    pub maxit: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { m: 10, block_extra: None, tol: 1e-5, maxit: 500, seed: 0 }
    }
}

impl SolverConfig {
    pub fn block_size(&self) -> usize {
        self.m + self.block_extra.unwrap_or_else(|| (self.m / 5).max(2))
    }
}

#[derive(Clone, Debug)]
pub struct LobpcgOutput {
    /// Ritz values of the operator as given (any shift included), ascending.
    pub values: Vec<f64>,
    /// `m` column-major eigenvectors.
    pub vectors: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Sum of the `m` lowest Ritz values after each iteration.
    pub trace_history: Vec<f64>,
    /// Full final block (`block_size` columns) for warm starts.
    pub block: Vec<Complex64>,
}

impl LobpcgOutput {
    pub fn vector(&self, i: usize) -> &[Complex64] {
        let n = self.vectors.len() / self.values.len().max(1);
        &self.vectors[i * n..(i + 1) * n]
    }
}

fn hermitian_part(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Ascending eigen-decomposition of a Hermitian matrix.
pub fn sorted_eigh(a: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut idx: Vec<usize> = (0..a.nrows()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// Orthonormalizes the block in place by the eigen-decomposition of its Gram
/// matrix, dropping numerically dependent directions. Returns the transform
/// `T` with `V_new = V_old T`, so images under a linear map can follow.
fn svqb(v: &mut Vec<Complex64>, k: usize, n: usize, drop_tol: f64) -> DMatrix<Complex64> {
    let t = svqb_transform(v, k, n, drop_tol);
    *v = gemm(v, k, &t, n);
    t
}

fn svqb_transform(v: &[Complex64], k: usize, n: usize, drop_tol: f64) -> DMatrix<Complex64> {
    let g = gram(v, k, v, k, n);
    let d: Vec<f64> = (0..k).map(|i| g[(i, i)].re.max(f64::MIN_POSITIVE).sqrt().recip()).collect();
    let gs = DMatrix::from_fn(k, k, |r, c| g[(r, c)] * (d[r] * d[c]));
    let (vals, vecs) = sorted_eigh(&gs);
    let max = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..k).filter(|&i| vals[i] > drop_tol * max && vals[i] > 0.0).collect();
    DMatrix::from_fn(k, keep.len(), |r, c| vecs[(r, keep[c])] * (d[r] / vals[keep[c]].sqrt()))
}

fn random_block(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n * k).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn apply_block(op: &dyn LinearOperator, x: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut y = vec![ZERO; x.len()];
    op.apply_block(x, &mut y, k);
    y
}

struct Ritz {
    x: Vec<Complex64>,
    sx: Vec<Complex64>,
    theta: Vec<f64>,
}

/// Rayleigh–Ritz on an orthonormal block with known image.
fn rayleigh_ritz(x: &[Complex64], sx: &[Complex64], k: usize, n: usize) -> Ritz {
    let h = gram(x, k, sx, k, n);
    let (theta, c) = sorted_eigh(&h);
    Ritz { x: gemm(x, k, &c, n), sx: gemm(sx, k, &c, n), theta }
}

/// Computes the `cfg.m` smallest eigenpairs of `op`. `x0` optionally seeds the
/// leading columns of the starting block (column-major, length multiple of the dimension).
pub fn lobpcg(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    cfg: &SolverConfig,
    x0: Option<&[Complex64]>,
) -> Result<LobpcgOutput> {
    let n = op.dim();
    let m = cfg.m;
    let b = cfg.block_size();
    if m == 0 || !(cfg.tol > 0.0) || cfg.maxit == 0 {
        return Err(Error::InvalidParameter(format!("invalid solver config {cfg:?}")));
    }
    if b > n {
        return Err(Error::InvalidParameter(format!("block size {b} exceeds dimension {n}")));
    }
    if let Some(p) = precond {
        check_len(n, p.dim())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = random_block(n, b, &mut rng);
    if let Some(x0) = x0 {
        if x0.len() % n != 0 {
            return Err(Error::Shape { expected: n, actual: x0.len() });
        }
        let q = (x0.len() / n).min(b);
        x[..q * n].copy_from_slice(&x0[..q * n]);
    }
    let t = svqb(&mut x, b, n, 1e-14);
    if t.ncols() < b {
        // Warm start was rank deficient; refill with random vectors.
        let q = t.ncols();
        x.extend(random_block(n, b - q, &mut rng));
        let t2 = svqb(&mut x, b, n, 1e-14);
        if t2.ncols() < b {
            return Err(Error::Degenerate("could not build an independent starting block".into()));
        }
    }
    let sx0 = apply_block(op, &x, b);
    let Ritz { mut x, mut sx, mut theta } = rayleigh_ritz(&x, &sx0, b, n);
    drop(sx0);

    // Work buffers, each `b` columns long; slices select the live columns.
    let full = b * n;
    let mut p = vec![ZERO; full];
    let mut sp = vec![ZERO; full];
    let mut r = vec![ZERO; full];
    let mut w = vec![ZERO; full];
    let mut sw = vec![ZERO; full];
    let mut pa = vec![ZERO; full];
    let mut spa = vec![ZERO; full];
    let mut tmp = vec![ZERO; full];
    let mut have_p = false;

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut residuals = vec![f64::INFINITY; b];
    let mut breakdowns = 0;

    loop {
        r.copy_from_slice(&sx);
        for c in 0..b {
            let th = Complex64::new(theta[c], 0.0);
            for (rv, xv) in r[c * n..(c + 1) * n].iter_mut().zip(&x[c * n..(c + 1) * n]) {
                *rv -= th * xv;
            }
        }
        let rn = column_norms(&r, b, n);
        for c in 0..b {
            residuals[c] = rn[c] / theta[c].abs().max(f64::MIN_POSITIVE);
        }
        if residuals[..m].iter().all(|&v| v <= cfg.tol) {
            converged = true;
            break;
        }
        if iterations >= cfg.maxit {
            break;
        }
        iterations += 1;

        let active: Vec<usize> = (0..b).filter(|&c| residuals[c] > cfg.tol).collect();
        let a = active.len();
        gather(&r, &active, n, &mut tmp);
        match precond {
            Some(pc) => pc.apply_block(&tmp[..a * n], &mut w[..a * n], a),
            None => w[..a * n].copy_from_slice(&tmp[..a * n]),
        }
        let mut wa = orthonormalize(&mut w, &mut tmp, a, n, 1e-13);
        op.apply_block(&w[..wa * n], &mut sw[..wa * n], wa);

        let mut pk = 0;
        if have_p {
            gather(&p, &active, n, &mut pa);
            gather(&sp, &active, n, &mut spa);
            pk = a;
            // Unit columns; conditioning is checked in the Rayleigh–Ritz step.
            let norms = column_norms(&pa[..pk * n], pk, n);
            for c in 0..pk {
                let s = 1.0 / norms[c].max(f64::MIN_POSITIVE);
                pa[c * n..(c + 1) * n].iter_mut().for_each(|v| *v *= s);
                spa[c * n..(c + 1) * n].iter_mut().for_each(|v| *v *= s);
            }
        }

        let mut use_p = pk > 0;
        let mut projected = false;
        let (coef, new_theta) = loop {
            let pu = if use_p { pk } else { 0 };
            let (ga, gb) = ritz_matrices(&x, &theta, &w[..wa * n], &sw[..wa * n], &pa[..pu * n], &spa[..pu * n], b, n);
            match generalized_lowest(&ga, &gb, b) {
                Some(sol) => break sol,
                None if use_p => use_p = false,
                None if !projected => {
                    // W nearly inside span X: project it out and retry.
                    for _ in 0..2 {
                        let xw = gram(&x, b, &w[..wa * n], wa, n);
                        gemm_update(&mut w[..wa * n], wa, &x, b, &(-xw), ONE, n);
                    }
                    wa = orthonormalize(&mut w, &mut tmp, wa, n, 1e-13);
                    op.apply_block(&w[..wa * n], &mut sw[..wa * n], wa);
                    projected = true;
                    use_p = pk > 0;
                }
                None => {
                    breakdowns += 1;
                    if breakdowns > 3 {
                        return Err(Error::Degenerate("Rayleigh-Ritz basis repeatedly ill-conditioned".into()));
                    }
                    let k = b + wa;
                    use_p = false;
                    break (DMatrix::identity(k, b), theta.clone());
                }
            }
        };
        let pu = if use_p { pk } else { 0 };
        let cx = coef.rows(0, b).into_owned();
        let cw = coef.rows(b, wa).into_owned();
        gemm_update(&mut p, b, &w[..wa * n], wa, &cw, ZERO, n);
        gemm_update(&mut sp, b, &sw[..wa * n], wa, &cw, ZERO, n);
        if pu > 0 {
            let cp = coef.rows(b + wa, pu).into_owned();
            gemm_update(&mut p, b, &pa[..pu * n], pu, &cp, ONE, n);
            gemm_update(&mut sp, b, &spa[..pu * n], pu, &cp, ONE, n);
        }
        have_p = true;
        tmp.copy_from_slice(&p);
        gemm_update(&mut tmp, b, &x, b, &cx, ONE, n);
        std::mem::swap(&mut x, &mut tmp);
        tmp.copy_from_slice(&sp);
        gemm_update(&mut tmp, b, &sx, b, &cx, ONE, n);
        std::mem::swap(&mut sx, &mut tmp);
        theta = new_theta;
        history.push(theta[..m].iter().sum());

        if iterations % REFRESH_EVERY == 0 {
            if orthonormalize(&mut x, &mut tmp, b, n, 1e-14) < b {
                return Err(Error::Degenerate("iteration block lost rank".into()));
            }
            op.apply_block(&x, &mut sx, b);
            let rr = rayleigh_ritz(&x, &sx, b, n);
            x = rr.x;
            sx = rr.sx;
            theta = rr.theta;
            have_p = false;
        }
    }
    drop((p, sp, r, w, sw, pa, spa, tmp));

    // Final residuals from a fresh operator image.
    let fresh = apply_block(op, &x, b);
    let rr = rayleigh_ritz(&x, &fresh, b, n);
    let mut res = Vec::with_capacity(m);
    for c in 0..m {
        let th = rr.theta[c];
        let r: f64 = rr.sx[c * n..(c + 1) * n]
            .iter()
            .zip(&rr.x[c * n..(c + 1) * n])
            .map(|(s, v)| (s - v * th).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let xn = crate::grid::norm(&rr.x[c * n..(c + 1) * n]);
        res.push(r / (th.abs().max(f64::MIN_POSITIVE) * xn));
    }
    let converged = converged && res.iter().all(|&v| v <= cfg.tol * 1.5);
    Ok(LobpcgOutput {
        values: rr.theta[..m].to_vec(),
        vectors: rr.x[..m * n].to_vec(),
        residuals: res,
        iterations,
        converged,
        trace_history: history,
        block: rr.x,
    })
}

fn gather(src: &[Complex64], cols: &[usize], n: usize, dst: &mut [Complex64]) {
    for (i, &c) in cols.iter().enumerate() {
        dst[i * n..(i + 1) * n].copy_from_slice(&src[c * n..(c + 1) * n]);
    }
}

/// Orthonormalizes the first `k` columns of `v` using `scratch`, returning the new column count.
fn orthonormalize(v: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>, k: usize, n: usize, drop_tol: f64) -> usize {
    let t = svqb_transform(&v[..k * n], k, n, drop_tol);
    let kk = t.ncols();
    gemm_update(&mut scratch[..kk * n], kk, &v[..k * n], k, &t, ZERO, n);
    std::mem::swap(v, scratch);
    kk
}

/// Projected matrices of the trial space `[X, W, P]`; `X` and `W` have orthonormal columns.
#[allow(clippy::too_many_arguments)]
fn ritz_matrices(
    x: &[Complex64],
    theta: &[f64],
    w: &[Complex64],
    sw: &[Complex64],
    p: &[Complex64],
    sp: &[Complex64],
    b: usize,
    n: usize,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let wa = w.len() / n;
    let pk = p.len() / n;
    let k = b + wa + pk;
    let mut ga = DMatrix::<Complex64>::zeros(k, k);
    let mut gb = DMatrix::<Complex64>::identity(k, k);
    for (i, &t) in theta.iter().enumerate() {
        ga[(i, i)] = Complex64::new(t, 0.0);
    }
    ga.view_mut((0, b), (b, wa)).copy_from(&gram(x, b, sw, wa, n));
    ga.view_mut((b, b), (wa, wa)).copy_from(&gram(w, wa, sw, wa, n));
    gb.view_mut((0, b), (b, wa)).copy_from(&gram(x, b, w, wa, n));
    if pk > 0 {
        let o = b + wa;
        ga.view_mut((0, o), (b, pk)).copy_from(&gram(x, b, sp, pk, n));
        ga.view_mut((b, o), (wa, pk)).copy_from(&gram(w, wa, sp, pk, n));
        ga.view_mut((o, o), (pk, pk)).copy_from(&gram(p, pk, sp, pk, n));
        gb.view_mut((0, o), (b, pk)).copy_from(&gram(x, b, p, pk, n));
        gb.view_mut((b, o), (wa, pk)).copy_from(&gram(w, wa, p, pk, n));
        gb.view_mut((o, o), (pk, pk)).copy_from(&gram(p, pk, p, pk, n));
    }
    for r in 0..k {
        for c in 0..r {
            ga[(r, c)] = ga[(c, r)].conj();
            gb[(r, c)] = gb[(c, r)].conj();
        }
    }
    (ga, gb)
}

/// Lowest `b` eigenpairs of `A c = θ B c`, or `None` if `B` is not safely positive definite.
fn generalized_lowest(a: &DMatrix<Complex64>, bm: &DMatrix<Complex64>, b: usize) -> Option<(DMatrix<Complex64>, Vec<f64>)> {
    let k = a.nrows();
    let d: Vec<f64> = (0..k).map(|i| bm[(i, i)].re.sqrt().recip()).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let bs = DMatrix::from_fn(k, k, |r, c| bm[(r, c)] * (d[r] * d[c]));
    let as_ = DMatrix::from_fn(k, k, |r, c| a[(r, c)] * (d[r] * d[c]));
    let (bvals, _) = sorted_eigh(&bs);
    if bvals[0] < 1e-12 * bvals[k - 1] {
        return None;
    }
    let chol = nalgebra::Cholesky::new(hermitian_part(&bs))?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let h = &linv * as_ * linv.adjoint();
    let (vals, vecs) = sorted_eigh(&h);
    let y = vecs.columns(0, b).into_owned();
    let c = linv.adjoint() * y;
    let c = DMatrix::from_fn(k, b, |r, col| c[(r, col)] * d[r]);
    Some((c, vals[..b].to_vec()))
}
