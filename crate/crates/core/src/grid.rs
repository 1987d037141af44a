//! Grid metadata and the four discrete field spaces.
//!
//! Index `(i, j, k)` refers to the node at reference position `(i, j, k)·h`,
//! zero-based. Staggered quantities sit half a cell forward of their index:
//! edge component `c` is shifted by `h/2` along axis `c`, face component `c`
//! along the two other axes, and cell values along all three.

use std::io::{Read, Write};

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lattice::LatticeSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Half-order `k`; the scheme is of order `2k`.
    pub order_k: usize,
}

impl GridSpec {
    pub fn new(n: usize, order_k: usize) -> Result<GridSpec> {
        if !(1..=4).contains(&order_k) {
            return Err(Error::InvalidParameter(format!("order_k must be in 1..=4, got {order_k}")));
        }
        // Stencils wider than the grid wrap around and alias; that is still a
        // valid periodic operator, so only degenerate grids are rejected.
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid size N = {n} too small (need N >= 2)")));
        }
        Ok(GridSpec { n, order_k })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of scalar unknowns, `N³`.
    pub fn scalar_len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn vector_len(&self) -> usize {
        3 * self.scalar_len()
    }

    #[inline]
    pub fn index(&self, i: isize, j: isize, k: isize) -> usize {
        linearize(i, j, k, self.n)
    }
}

/// Periodic lexicographic index with `i` fastest.
#[inline]
pub fn linearize(i: isize, j: isize, k: isize, n: usize) -> usize {
    let m = n as isize;
    let w = |a: isize| a.rem_euclid(m) as usize;
    w(i) + n * (w(j) + n * w(k))
}

/// Inverse of [`linearize`] on `0..N³`.
#[inline]
pub fn delinearize(idx: usize, n: usize) -> [usize; 3] {
    [idx % n, (idx / n) % n, idx / (n * n)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Node,
    Edge,
    Face,
    Cell,
}

impl Space {
    pub fn is_scalar(self) -> bool {
        matches!(self, Space::Node | Space::Cell)
    }

    pub fn tag(self) -> u32 {
        match self {
            Space::Node => 0,
            Space::Edge => 1,
            Space::Face => 2,
            Space::Cell => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Space> {
        match tag {
            0 => Some(Space::Node),
            1 => Some(Space::Edge),
            2 => Some(Space::Face),
            3 => Some(Space::Cell),
            _ => None,
        }
    }

    /// Half-cell offsets (in units of `h`) of component `comp` relative to its index.
    pub fn offsets(self, comp: usize) -> [f64; 3] {
        let mut o = [0.0; 3];
        match self {
            Space::Node => {}
            Space::Cell => o = [0.5; 3],
            Space::Edge => o[comp] = 0.5,
            Space::Face => {
                o = [0.5; 3];
                o[comp] = 0.0;
            }
        }
        o
    }
}

pub(crate) fn expect_space(expected: Space, actual: Space) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::SpaceMismatch { expected, actual })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub n: usize,
    pub space: Space,
    pub values: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(n: usize, space: Space) -> ScalarField {
        debug_assert!(space.is_scalar());
        ScalarField { n, space, values: vec![Complex64::new(0.0, 0.0); n * n * n] }
    }

    pub fn from_values(n: usize, space: Space, values: Vec<Complex64>) -> Result<ScalarField> {
        if !space.is_scalar() {
            return Err(Error::SpaceMismatch { expected: Space::Node, actual: space });
        }
        check_len(n * n * n, values.len())?;
        Ok(ScalarField { n, space, values })
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

/// Three component blocks `[u₁; u₂; u₃]`, each of length `N³`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub n: usize,
    pub space: Space,
    pub values: Vec<Complex64>,
}

impl VectorField {
    pub fn zeros(n: usize, space: Space) -> VectorField {
        debug_assert!(!space.is_scalar());
        VectorField { n, space, values: vec![Complex64::new(0.0, 0.0); 3 * n * n * n] }
    }

    pub fn from_values(n: usize, space: Space, values: Vec<Complex64>) -> Result<VectorField> {
        if space.is_scalar() {
            return Err(Error::SpaceMismatch { expected: Space::Face, actual: space });
        }
        check_len(3 * n * n * n, values.len())?;
        Ok(VectorField { n, space, values })
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let m = self.n * self.n * self.n;
        &self.values[c * m..(c + 1) * m]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let m = self.n * self.n * self.n;
        &mut self.values[c * m..(c + 1) * m]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn reference_point(idx: [usize; 3], offsets: [f64; 3], h: f64) -> Vector3<f64> {
    Vector3::new(
        (idx[0] as f64 + offsets[0]) * h,
        (idx[1] as f64 + offsets[1]) * h,
        (idx[2] as f64 + offsets[2]) * h,
    )
}

/// Samples `f` at the node or cell points of the grid.
pub fn project_scalar<F>(f: F, grid: &GridSpec, lattice: &LatticeSpec, space: Space) -> Result<ScalarField>
where
    F: Fn(Vector3<f64>) -> Complex64,
{
    if !space.is_scalar() {
        return Err(Error::SpaceMismatch { expected: Space::Node, actual: space });
    }
    let n = grid.n;
    let h = grid.h();
    let offsets = space.offsets(0);
    let values = (0..grid.scalar_len())
        .map(|idx| f(lattice.to_cartesian(reference_point(delinearize(idx, n), offsets, h))))
        .collect();
    Ok(ScalarField { n, space, values })
}

/// Samples component `c` of `u` at the staggered point of component `c`.
pub fn project_vector<F>(u: F, grid: &GridSpec, lattice: &LatticeSpec, space: Space) -> Result<VectorField>
where
    F: Fn(Vector3<f64>) -> [Complex64; 3],
{
    if space.is_scalar() {
        return Err(Error::SpaceMismatch { expected: Space::Edge, actual: space });
    }
    let n = grid.n;
    let h = grid.h();
    let m = grid.scalar_len();
    let mut out = VectorField::zeros(n, space);
    for c in 0..3 {
        let offsets = space.offsets(c);
        for idx in 0..m {
            let x = lattice.to_cartesian(reference_point(delinearize(idx, n), offsets, h));
            out.values[c * m + idx] = u(x)[c];
        }
    }
    Ok(out)
}

const DUMP_MAGIC: &[u8; 4] = b"MFDF";

/// Writes the little-endian field dump: 16-byte header (`MFDF`, N, space tag,
/// component count) followed by interleaved `(re, im)` doubles.
pub fn write_field_dump<W: Write>(mut w: W, n: usize, space: Space, values: &[Complex64]) -> Result<()> {
    let ncomp = if space.is_scalar() { 1 } else { 3 };
    check_len(ncomp * n * n * n, values.len())?;
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&space.tag().to_le_bytes())?;
    w.write_all(&(ncomp as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 16);
    for z in values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a dump written by [`write_field_dump`], returning `(N, space, values)`.
pub fn read_field_dump<R: Read>(mut r: R) -> Result<(usize, Space, Vec<Complex64>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != DUMP_MAGIC {
        return Err(Error::InvalidParameter("not a field dump (bad magic)".into()));
    }
    let word = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let n = word(4) as usize;
    let space = Space::from_tag(word(8))
        .ok_or_else(|| Error::InvalidParameter(format!("unknown space tag {}", word(8))))?;
    let ncomp = word(12) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    check_len(ncomp * n * n * n * 16, body.len())?;
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((n, space, values))
}
