//! Geometric multigrid for the preconditioner system with a distributive
//! transformation and ILU(0) smoothing.
//!
//! Writing `A = CURL`, `B = DIV`, `L = B B'` and `𝐋 = A A' + B' B`, the
//! augmented system `[A A' + (γ+1) B'B + c, −B'; −B, I]` is right-multiplied by
//! `[I, B'; γB, (γ+1) L + c]`. The product is block lower triangular,
//! `[𝐋 + c, 0; (γ−1) B, γ L + c]`, so a solve reduces to scalar Laplacian
//! problems: three for the face components and one on cells. Every level is a
//! re-discretization of the same operators on a grid half as fine.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::grid::{norm, GridSpec, Space};
use crate::stencil::{ShiftedOperators, Tap};
use crate::LinearOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Compressed sparse rows with sorted column indices.
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl Csr {
    /// `alpha · (stencil) + shift · I` on a periodic `n³` grid, matching [`crate::stencil::sweep`].
    pub fn from_taps(taps: &[Tap], n: usize, alpha: f64, shift: f64) -> Csr {
        let len = n * n * n;
        let m = n as isize;
        let mut row_ptr = Vec::with_capacity(len + 1);
        let mut cols = Vec::with_capacity(len * (taps.len() + 1));
        let mut vals = Vec::with_capacity(len * (taps.len() + 1));
        let mut row: Vec<(usize, Complex64)> = Vec::with_capacity(taps.len() + 1);
        row_ptr.push(0);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = i + n * (j + n * k);
                    row.clear();
                    row.push((p, Complex64::new(shift, 0.0)));
                    for t in taps {
                        let ii = (i as isize + t.offset[0]).rem_euclid(m) as usize;
                        let jj = (j as isize + t.offset[1]).rem_euclid(m) as usize;
                        let kk = (k as isize + t.offset[2]).rem_euclid(m) as usize;
                        row.push((ii + n * (jj + n * kk), t.coeff * alpha));
                    }
                    row.sort_by_key(|e| e.0);
                    let mut last = usize::MAX;
                    for &(c, v) in &row {
                        if c == last {
                            *vals.last_mut().unwrap() += v;
                        } else {
                            cols.push(c);
                            vals.push(v);
                            last = c;
                        }
                    }
                    row_ptr.push(cols.len());
                }
            }
        }
        Csr { n: len, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[e] * x[self.cols[e]];
            }
            *out = acc;
        }
    }

    /// `r = b − A x`.
    pub fn residual(&self, x: &[Complex64], b: &[Complex64], r: &mut [Complex64]) {
        for (row, out) in r.iter_mut().enumerate() {
            let mut acc = b[row];
            for e in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc -= self.vals[e] * x[self.cols[e]];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[(r, self.cols[e])] += self.vals[e];
            }
        }
        d
    }

    fn entry(&self, r: usize, c: usize) -> Option<usize> {
        let row = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        row.binary_search(&c).ok().map(|i| self.row_ptr[r] + i)
    }

    /// Largest `|A_rc − conj(A_cr)|`, with missing entries counted as zero.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[e];
                let t = self.entry(c, r).map_or(ZERO, |i| self.vals[i]);
                worst = worst.max((self.vals[e] - t.conj()).norm());
            }
        }
        worst
    }
}

/// ILU(0) factors stored in the pattern of `A`: strict lower part of `L`
/// (unit diagonal implied) and `U` including its diagonal.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    /// Fails with the offending row when a pivot vanishes.
    pub fn factor(a: &Csr) -> std::result::Result<Ilu0, usize> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![0; n];
        for r in 0..n {
            diag[r] = lu.entry(r, r).ok_or(r)?;
        }
        let scale = a.vals.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        // Dense position lookup for the current row.
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for e in start..end {
                pos[lu.cols[e]] = e;
            }
            for e in start..end {
                let k = lu.cols[e];
                if k >= i {
                    break;
                }
                let piv = lu.vals[diag[k]];
                let lik = lu.vals[e] / piv;
                lu.vals[e] = lik;
                for f in diag[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.cols[f];
                    let p = pos[j];
                    if p != usize::MAX {
                        let ukj = lu.vals[f];
                        lu.vals[p] -= lik * ukj;
                    }
                }
            }
            for e in start..end {
                pos[lu.cols[e]] = usize::MAX;
            }
            if !(lu.vals[diag[i]].norm() > 1e-14 * scale) {
                return Err(i);
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solves `L U z = r` in place.
    pub fn solve_in_place(&self, z: &mut [Complex64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut acc = z[i];
            for e in lu.row_ptr[i]..self.diag[i] {
                acc -= lu.vals[e] * z[lu.cols[e]];
            }
            z[i] = acc;
        }
        for i in (0..lu.n).rev() {
            let mut acc = z[i];
            for e in self.diag[i] + 1..lu.row_ptr[i + 1] {
                acc -= lu.vals[e] * z[lu.cols[e]];
            }
            z[i] = acc / lu.vals[self.diag[i]];
        }
    }
}

/// Scalar systems solved by the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MgSystem {
    /// `L + c`, one per face component.
    VectorLaplacian,
    /// `γ L + c` on cells.
    CellLaplacian,
}

/// Staggering per axis: `true` where the unknown sits on grid lines, `false` at half steps.
pub type Family = [bool; 3];

pub fn family(space: Space, comp: usize) -> Family {
    let o = space.offsets(comp);
    [o[0] == 0.0, o[1] == 0.0, o[2] == 0.0]
}

#[derive(Clone, Debug)]
struct LevelSystem {
    a: Csr,
    smoother: Option<Ilu0>,
    coarse: Option<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
}

#[derive(Clone, Debug)]
pub struct MgLevel {
    pub n: usize,
    pub ops: ShiftedOperators,
    vec_lap: LevelSystem,
    cell_lap: LevelSystem,
}

/// Level 0 is the finest grid.
#[derive(Clone, Debug)]
pub struct MgHierarchy {
    pub levels: Vec<MgLevel>,
    pub n1: usize,
    pub n2: usize,
    pub gamma: f64,
    pub c: f64,
}

/// Largest grid handed to the dense direct solver.
pub const MAX_COARSE_N: usize = 8;

/// Deepest hierarchy whose coarsest grid has at most [`MAX_COARSE_N`] points per axis.
pub fn auto_depth(n: usize) -> usize {
    let mut depth = 1;
    let mut m = n;
    while m > MAX_COARSE_N && m % 2 == 0 {
        m /= 2;
        depth += 1;
    }
    depth
}

fn level_system(a: Csr, coarsest: bool, level: usize, n: usize) -> Result<LevelSystem> {
    if coarsest {
        let lu = a.to_dense().lu();
        if !lu.is_invertible() {
            return Err(Error::Factorization { level, n });
        }
        Ok(LevelSystem { a, smoother: None, coarse: Some(lu) })
    } else {
        let ilu = Ilu0::factor(&a).map_err(|_| Error::Factorization { level, n })?;
        Ok(LevelSystem { a, smoother: Some(ilu), coarse: None })
    }
}

pub fn build_hierarchy(ops: &ShiftedOperators, gamma: f64, c: f64, depth: usize) -> Result<MgHierarchy> {
    let n = ops.n();
    if ops.grid.order_k != 1 {
        return Err(Error::InvalidParameter("multigrid supports the second-order scheme only (order_k = 1)".into()));
    }
    if depth == 0 || n % (1 << (depth - 1)) != 0 {
        return Err(Error::InvalidParameter(format!("N = {n} is not divisible by 2^{}", depth.saturating_sub(1))));
    }
    let coarsest = n >> (depth - 1);
    if coarsest > MAX_COARSE_N || coarsest < 2 {
        return Err(Error::InvalidParameter(format!(
            "coarsest grid N = {coarsest} must lie in 2..={MAX_COARSE_N}; choose a different depth"
        )));
    }
    if !(gamma > 0.0) || c < 0.0 {
        return Err(Error::InvalidParameter(format!("invalid gamma {gamma} or shift {c}")));
    }
    if ops.bloch.is_zero() && !(c > 0.0) {
        return Err(Error::InvalidParameter("k = 0 requires a positive shift".into()));
    }
    let mut levels = Vec::with_capacity(depth);
    for l in 0..depth {
        let nl = n >> l;
        let lops = ShiftedOperators::new(GridSpec::new(nl, 1)?, ops.lattice.clone(), ops.bloch)?;
        let taps = lops.laplacian_taps();
        let last = l + 1 == depth;
        // Levels are reported coarsest-first as 1..=depth.
        let tag = depth - l;
        let vec_lap = level_system(Csr::from_taps(&taps, nl, 1.0, c), last, tag, nl)?;
        let cell_lap = level_system(Csr::from_taps(&taps, nl, gamma, c), last, tag, nl)?;
        levels.push(MgLevel { n: nl, ops: lops, vec_lap, cell_lap });
    }
    Ok(MgHierarchy { levels, n1: 2, n2: 2, gamma, c })
}

/// One-dimensional restriction along `axis` of an `dims` array (x fastest).
fn restrict_axis(src: &[Complex64], dims: [usize; 3], axis: usize, node: bool) -> (Vec<Complex64>, [usize; 3]) {
    let mut cd = dims;
    cd[axis] /= 2;
    let nf = dims[axis] as isize;
    let stride = [1, dims[0], dims[0] * dims[1]];
    let cstride = [1, cd[0], cd[0] * cd[1]];
    let mut out = vec![ZERO; cd[0] * cd[1] * cd[2]];
    let w = |a: isize| a.rem_euclid(nf) as usize;
    for k in 0..cd[2] {
        for j in 0..cd[1] {
            for i in 0..cd[0] {
                let idx = [i, j, k];
                let mut base = [i, j, k];
                base[axis] = 0;
                let b = base[0] * stride[0] + base[1] * stride[1] + base[2] * stride[2];
                let at = |f: isize| src[b + w(f) * stride[axis]];
                let ci = 2 * idx[axis] as isize;
                let v = if node {
                    at(ci - 1) * 0.25 + at(ci) * 0.5 + at(ci + 1) * 0.25
                } else {
                    (at(ci - 1) + at(ci + 2)) * 0.125 + (at(ci) + at(ci + 1)) * 0.375
                };
                out[i * cstride[0] + j * cstride[1] + k * cstride[2]] = v;
            }
        }
    }
    (out, cd)
}

/// Adjoint of [`restrict_axis`] scaled by 2: linear interpolation.
fn prolong_axis(src: &[Complex64], dims: [usize; 3], axis: usize, node: bool) -> (Vec<Complex64>, [usize; 3]) {
    let mut fd = dims;
    fd[axis] *= 2;
    let nc = dims[axis] as isize;
    let stride = [1, dims[0], dims[0] * dims[1]];
    let fstride = [1, fd[0], fd[0] * fd[1]];
    let mut out = vec![ZERO; fd[0] * fd[1] * fd[2]];
    let w = |a: isize| a.rem_euclid(nc) as usize;
    for k in 0..fd[2] {
        for j in 0..fd[1] {
            for i in 0..fd[0] {
                let idx = [i, j, k];
                let mut base = [i, j, k];
                base[axis] = 0;
                let b = base[0] * stride[0] + base[1] * stride[1] + base[2] * stride[2];
                let at = |c: isize| src[b + w(c) * stride[axis]];
                let f = idx[axis] as isize;
                let half = f.div_euclid(2);
                let v = match (node, f % 2 == 0) {
                    (true, true) => at(half),
                    (true, false) => (at(half) + at(half + 1)) * 0.5,
                    (false, true) => at(half) * 0.75 + at(half - 1) * 0.25,
                    (false, false) => at(half) * 0.75 + at(half + 1) * 0.25,
                };
                out[i * fstride[0] + j * fstride[1] + k * fstride[2]] = v;
            }
        }
    }
    (out, fd)
}

/// Full-weighting restriction of an `n³` field to `(n/2)³`.
pub fn restrict(fine: &[Complex64], n: usize, fam: Family) -> Vec<Complex64> {
    let mut dims = [n; 3];
    let mut v = fine.to_vec();
    for (axis, &node) in fam.iter().enumerate() {
        let (nv, nd) = restrict_axis(&v, dims, axis, node);
        v = nv;
        dims = nd;
    }
    v
}

/// Trilinear interpolation of an `n³` coarse field to `(2n)³`.
pub fn prolong(coarse: &[Complex64], n: usize, fam: Family) -> Vec<Complex64> {
    let mut dims = [n; 3];
    let mut v = coarse.to_vec();
    for (axis, &node) in fam.iter().enumerate() {
        let (nv, nd) = prolong_axis(&v, dims, axis, node);
        v = nv;
        dims = nd;
    }
    v
}

impl MgHierarchy {
    pub fn with_smoothing(mut self, n1: usize, n2: usize) -> MgHierarchy {
        self.n1 = n1;
        self.n2 = n2;
        self
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n).collect()
    }

    fn system(&self, level: usize, which: MgSystem) -> &LevelSystem {
        match which {
            MgSystem::VectorLaplacian => &self.levels[level].vec_lap,
            MgSystem::CellLaplacian => &self.levels[level].cell_lap,
        }
    }

    pub fn matrix(&self, level: usize, which: MgSystem) -> &Csr {
        &self.system(level, which).a
    }

    /// One V-cycle for `A_level x = b` from `x0`.
    pub fn vcycle(&self, x0: &[Complex64], b: &[Complex64], level: usize, which: MgSystem, fam: Family) -> Result<Vec<Complex64>> {
        let len = self.levels.get(level).map(|l| l.n.pow(3)).ok_or_else(|| {
            Error::InvalidParameter(format!("level {level} out of range for depth {}", self.depth()))
        })?;
        check_len(len, x0.len())?;
        check_len(len, b.len())?;
        let mut x = x0.to_vec();
        self.vcycle_in_place(&mut x, b, level, which, fam);
        Ok(x)
    }

    fn vcycle_in_place(&self, x: &mut [Complex64], b: &[Complex64], level: usize, which: MgSystem, fam: Family) {
        let sys = self.system(level, which);
        if let Some(lu) = &sys.coarse {
            let rhs = DMatrix::from_column_slice(b.len(), 1, b);
            let sol = lu.solve(&rhs).expect("coarse factor checked at build time");
            x.copy_from_slice(sol.as_slice());
            return;
        }
        let ilu = sys.smoother.as_ref().expect("non-coarsest levels carry a smoother");
        let n = self.levels[level].n;
        let mut r = vec![ZERO; x.len()];
        let smooth = |x: &mut [Complex64], r: &mut Vec<Complex64>, sweeps: usize| {
            for _ in 0..sweeps {
                sys.a.residual(x, b, r);
                ilu.solve_in_place(r);
                for (xv, rv) in x.iter_mut().zip(r.iter()) {
                    *xv += rv;
                }
            }
        };
        smooth(x, &mut r, self.n1);
        sys.a.residual(x, b, &mut r);
        let rc = restrict(&r, n, fam);
        let mut ec = vec![ZERO; rc.len()];
        self.vcycle_in_place(&mut ec, &rc, level + 1, which, fam);
        let e = prolong(&ec, n / 2, fam);
        for (xv, ev) in x.iter_mut().zip(&e) {
            *xv += ev;
        }
        smooth(x, &mut r, self.n2);
    }

    /// Repeats V-cycles on the finest level from zero until the relative
    /// residual drops below `tol` or `max_cycles` is reached.
    pub fn solve_scalar(&self, b: &[Complex64], which: MgSystem, fam: Family, tol: f64, max_cycles: usize) -> (Vec<Complex64>, usize, f64) {
        let a = &self.system(0, which).a;
        let bn = norm(b);
        let mut x = vec![ZERO; b.len()];
        if bn == 0.0 {
            return (x, 0, 0.0);
        }
        let mut r = vec![ZERO; b.len()];
        let mut rel = 1.0;
        let mut cycles = 0;
        while cycles < max_cycles && rel > tol {
            self.vcycle_in_place(&mut x, b, 0, which, fam);
            cycles += 1;
            a.residual(&x, b, &mut r);
            rel = norm(&r) / bn;
        }
        (x, cycles, rel)
    }

    /// Solves `P x = f` on the face space through the block-triangular system.
    pub fn distributive_solve(&self, f: &[Complex64], tol: f64, max_cycles: usize) -> Result<MgSolve> {
        let top = &self.levels[0];
        let m = top.n.pow(3);
        check_len(3 * m, f.len())?;
        let mut y = vec![ZERO; 3 * m];
        let mut cycles = 0;
        let mut worst: f64 = 0.0;
        for c in 0..3 {
            let (yc, k, rel) = self.solve_scalar(&f[c * m..(c + 1) * m], MgSystem::VectorLaplacian, family(Space::Face, c), tol, max_cycles);
            y[c * m..(c + 1) * m].copy_from_slice(&yc);
            cycles = cycles.max(k);
            worst = worst.max(rel);
        }
        let mut x = y.clone();
        if self.gamma != 1.0 {
            let mut rhs = vec![ZERO; m];
            top.ops.div_raw(&y, &mut rhs);
            rhs.iter_mut().for_each(|v| *v *= -(self.gamma - 1.0));
            let (q, k, rel) = self.solve_scalar(&rhs, MgSystem::CellLaplacian, family(Space::Cell, 0), tol, max_cycles);
            cycles = cycles.max(k);
            worst = worst.max(rel);
            top.ops.div_adj_raw(&q, &mut x, ONE, true);
        }
        Ok(MgSolve { x, cycles, worst_residual: worst })
    }
}

#[derive(Clone, Debug)]
pub struct MgSolve {
    pub x: Vec<Complex64>,
    /// Largest cycle count over the scalar sub-solves.
    pub cycles: usize,
    pub worst_residual: f64,
}

/// Approximate `P⁻¹` by a fixed number of V-cycles per scalar sub-solve.
#[derive(Clone, Debug)]
pub struct MgPreconditioner {
    pub hierarchy: MgHierarchy,
    pub cycles: usize,
}

impl LinearOperator for MgPreconditioner {
    fn dim(&self) -> usize {
        3 * self.hierarchy.levels[0].n.pow(3)
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let sol = self
            .hierarchy
            .distributive_solve(x, 0.0, self.cycles)
            .expect("preconditioner input length matches its dimension");
        y.copy_from_slice(&sol.x);
    }
}
