//! Dielectric geometries and the diagonal inverse-permittivity matrix `M₀`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{delinearize, linearize, GridSpec};
use crate::lattice::{make_lattice, LatticeKind, LatticeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Homogeneous,
    ScCurved,
    BccSingleGyroid,
    FccDiamond,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Homogeneous => "homogeneous",
            Geometry::ScCurved => "sc_curved",
            Geometry::BccSingleGyroid => "bcc_single_gyroid",
            Geometry::FccDiamond => "fcc_diamond",
        }
    }

    /// Lattice the structure is defined on, if any.
    pub fn native_lattice(self) -> Option<LatticeKind> {
        match self {
            Geometry::Homogeneous => None,
            Geometry::ScCurved => Some(LatticeKind::Sc),
            Geometry::BccSingleGyroid => Some(LatticeKind::Bcc),
            Geometry::FccDiamond => Some(LatticeKind::Fcc),
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(Geometry::Homogeneous),
            "sc_curved" => Ok(Geometry::ScCurved),
            "bcc_single_gyroid" | "bcc_gyroid" => Ok(Geometry::BccSingleGyroid),
            "fcc_diamond" => Ok(Geometry::FccDiamond),
            other => Err(Error::InvalidParameter(format!("unknown geometry '{other}'"))),
        }
    }
}

/// Sphere of radius `0.345 l` at the cube center joined to three axis-parallel
/// rods of radius `0.11 l` through the center, repeated with period `l`.
pub fn geometry_sc_curved(l: f64) -> impl Fn(&Vector3<f64>) -> bool + Send + Sync + Clone {
    move |x: &Vector3<f64>| {
        let p = x.map(|v| v.rem_euclid(l) - 0.5 * l);
        let (r_s, r_c) = (0.345 * l, 0.11 * l);
        p.norm_squared() < r_s * r_s
            || p[1] * p[1] + p[2] * p[2] < r_c * r_c
            || p[0] * p[0] + p[2] * p[2] < r_c * r_c
            || p[0] * p[0] + p[1] * p[1] < r_c * r_c
    }
}

pub fn gyroid_level(x: &Vector3<f64>, l: f64) -> f64 {
    let s = |v: f64| (2.0 * PI * v / l).sin();
    let c = |v: f64| (2.0 * PI * v / l).cos();
    s(x[0]) * c(x[1]) + s(x[1]) * c(x[2]) + s(x[2]) * c(x[0])
}

pub fn geometry_bcc_gyroid(l: f64) -> impl Fn(&Vector3<f64>) -> bool + Send + Sync + Clone {
    move |x: &Vector3<f64>| gyroid_level(x, l) > 1.1
}

/// Diamond network: spheres of radius `0.12 l` on both basis sites of the FCC
/// cell, joined along the four tetrahedral bonds by prolate spheroids whose foci
/// are the bonded sites and whose semi-minor axis is `0.11 l`.
pub fn geometry_fcc_diamond(l: f64) -> impl Fn(&Vector3<f64>) -> bool + Send + Sync + Clone {
    let lattice = make_lattice(LatticeKind::Fcc, l).expect("positive lattice constant");
    let a = lattice.a;
    let b = lattice.b;
    let q = 0.25 * l;
    let r = 0.12 * l;
    let minor = 0.11 * l;
    let half_bond = 3f64.sqrt() * l / 8.0;
    let major = (half_bond * half_bond + minor * minor).sqrt();
    let bonds = [
        Vector3::new(q, q, q),
        Vector3::new(q, -q, -q),
        Vector3::new(-q, q, -q),
        Vector3::new(-q, -q, q),
    ];
    move |x: &Vector3<f64>| diamond_contains(x, &a, &b, &bonds, r, major)
}

fn diamond_contains(x: &Vector3<f64>, a: &Matrix3<f64>, b: &Matrix3<f64>, bonds: &[Vector3<f64>; 4], r: f64, major: f64) -> bool {
    let y = b * x;
    let p = a * y.map(|v| v - v.floor());
    let site1 = bonds[0];
    for n0 in -1..=1 {
        for n1 in -1..=1 {
            for n2 in -1..=1 {
                let t = a * Vector3::new(n0 as f64, n1 as f64, n2 as f64);
                let d0 = p - t;
                if d0.norm_squared() < r * r || (d0 - site1).norm_squared() < r * r {
                    return true;
                }
                if bonds.iter().any(|bd| d0.norm() + (d0 - bd).norm() < 2.0 * major) {
                    return true;
                }
            }
        }
    }
    false
}

/// Piecewise-constant permittivity: `eps_in` inside the structure, `eps_out` elsewhere.
#[derive(Clone)]
pub struct DielectricModel {
    pub geometry: Geometry,
    pub eps_in: f64,
    pub eps_out: f64,
    inside: std::sync::Arc<dyn Fn(&Vector3<f64>) -> bool + Send + Sync>,
}

impl fmt::Debug for DielectricModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DielectricModel")
            .field("geometry", &self.geometry)
            .field("eps_in", &self.eps_in)
            .field("eps_out", &self.eps_out)
            .finish()
    }
}

impl DielectricModel {
    pub fn new(geometry: Geometry, l: f64, eps_in: f64, eps_out: f64) -> Result<DielectricModel> {
        if !(eps_in > 0.0 && eps_out > 0.0) || !eps_in.is_finite() || !eps_out.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "permittivities must be positive, got eps_in = {eps_in}, eps_out = {eps_out}"
            )));
        }
        if !(l > 0.0) {
            return Err(Error::InvalidParameter(format!("lattice constant must be positive, got {l}")));
        }
        let inside: std::sync::Arc<dyn Fn(&Vector3<f64>) -> bool + Send + Sync> = match geometry {
            Geometry::Homogeneous => std::sync::Arc::new(|_: &Vector3<f64>| false),
            Geometry::ScCurved => std::sync::Arc::new(geometry_sc_curved(l)),
            Geometry::BccSingleGyroid => std::sync::Arc::new(geometry_bcc_gyroid(l)),
            Geometry::FccDiamond => std::sync::Arc::new(geometry_fcc_diamond(l)),
        };
        Ok(DielectricModel { geometry, eps_in, eps_out, inside })
    }

    /// Uniform permittivity `eps`.
    pub fn homogeneous(eps: f64) -> Result<DielectricModel> {
        DielectricModel::new(Geometry::Homogeneous, 1.0, eps, eps)
    }

    /// Arbitrary user predicate on Cartesian points.
    pub fn custom<F>(inside: F, eps_in: f64, eps_out: f64) -> Result<DielectricModel>
    where
        F: Fn(&Vector3<f64>) -> bool + Send + Sync + 'static,
    {
        let mut m = DielectricModel::homogeneous(1.0)?;
        m.inside = std::sync::Arc::new(inside);
        m.eps_in = eps_in;
        m.eps_out = eps_out;
        m.geometry = Geometry::Homogeneous;
        if !(eps_in > 0.0 && eps_out > 0.0) {
            return Err(Error::InvalidParameter("permittivities must be positive".into()));
        }
        Ok(m)
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        (self.inside)(x)
    }

    pub fn eps(&self, x: &Vector3<f64>) -> f64 {
        if self.contains(x) {
            self.eps_in
        } else {
            self.eps_out
        }
    }

    pub fn beta_bounds(&self) -> (f64, f64) {
        let (a, b) = (1.0 / self.eps_in, 1.0 / self.eps_out);
        (a.min(b), a.max(b))
    }
}

/// Entries of the diagonal matrix `M₀` over the `3N³` edge unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct M0Diagonal {
    pub beta: Vec<f64>,
}

impl M0Diagonal {
    pub fn identity(len: usize) -> M0Diagonal {
        M0Diagonal { beta: vec![1.0; len] }
    }

    pub fn min(&self) -> f64 {
        self.beta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.beta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.beta.first().copied().unwrap_or(1.0);
        self.beta.iter().all(|&b| b == first)
    }
}

/// Permittivity at every cell center, lexicographic order.
pub fn cell_permittivity(grid: &GridSpec, lattice: &LatticeSpec, model: &DielectricModel) -> Vec<f64> {
    let n = grid.n;
    let h = grid.h();
    (0..grid.scalar_len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = delinearize(idx, n);
            let y = Vector3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
            model.eps(&lattice.to_cartesian(y))
        })
        .collect()
}

/// Edge `c` at index `(i, j, k)` is shared by the cells whose index equals the
/// edge index along axis `c` and is either equal or one less along the other two
/// axes. Uniform neighborhoods give `1/ε`; mixed ones the harmonic mean `4/Σε`.
pub fn assemble_m0(grid: &GridSpec, lattice: &LatticeSpec, model: &DielectricModel) -> M0Diagonal {
    let eps = cell_permittivity(grid, lattice, model);
    m0_from_cells(grid.n, &eps)
}

pub fn m0_from_cells(n: usize, eps: &[f64]) -> M0Diagonal {
    let m = n * n * n;
    let mut beta = vec![0.0; 3 * m];
    beta.par_chunks_mut(m).enumerate().for_each(|(c, out)| {
        let (a1, a2) = ((c + 1) % 3, (c + 2) % 3);
        for (idx, b) in out.iter_mut().enumerate() {
            let base = delinearize(idx, n).map(|v| v as isize);
            let mut vals = [0.0; 4];
            for (q, (s1, s2)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                let mut p = base;
                p[a1] -= s1;
                p[a2] -= s2;
                vals[q] = eps[linearize(p[0], p[1], p[2], n)];
            }
            *b = if vals.iter().all(|&v| v == vals[0]) { 1.0 / vals[0] } else { 4.0 / vals.iter().sum::<f64>() };
        }
    });
    M0Diagonal { beta }
}

/// Fraction of cell centers inside the structure.
pub fn volume_fraction(grid: &GridSpec, lattice: &LatticeSpec, model: &DielectricModel) -> f64 {
    let n = grid.n;
    let h = grid.h();
    let inside = (0..grid.scalar_len())
        .into_par_iter()
        .filter(|&idx| {
            let [i, j, k] = delinearize(idx, n);
            let y = Vector3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
            model.contains(&lattice.to_cartesian(y))
        })
        .count();
    inside as f64 / grid.scalar_len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sc_curved_points() {
        let l = 2.0;
        let g = geometry_sc_curved(l);
        assert!(g(&Vector3::new(1.0, 1.0, 1.0)));
        assert!(!g(&Vector3::new(0.0, 0.0, 0.0)));
        assert!(g(&Vector3::new(0.0, 1.0, 1.0)));
        assert!(g(&Vector3::new(1.0, 0.0, 1.0)));
        assert!(g(&Vector3::new(0.05, 1.0 + 0.21, 1.0)));
        assert!(!g(&Vector3::new(0.05, 1.0 + 0.23, 1.0)));
        assert!(g(&Vector3::new(1.0 + 0.68, 1.0, 1.0)));
        assert!(g(&Vector3::new(3.0, 3.0, 3.0)));
    }

    #[test]
    fn gyroid_points_and_periodicity() {
        let l = 1.5;
        let g = geometry_bcc_gyroid(l);
        let p = Vector3::new(l / 8.0, 0.0, l / 8.0);
        assert!((gyroid_level(&p, l) - (0.5f64.sqrt() + 0.5)).abs() < 1e-14);
        assert!(g(&p));
        assert!(!g(&Vector3::zeros()));
        let lat = make_lattice(LatticeKind::Bcc, l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * l;
            for n in 0..3 {
                let shifted = x + lat.translation(n);
                assert!((gyroid_level(&x, l) - gyroid_level(&shifted, l)).abs() < 1e-12);
            }
        }
    }

    /// Brute-force oracle: every sphere and spheroid with sites in a wide block of translates.
    fn diamond_brute(x: &Vector3<f64>, l: f64) -> bool {
        let lat = make_lattice(LatticeKind::Fcc, l).unwrap();
        let q = l / 4.0;
        let b = 0.11 * l;
        let a = ((3f64.sqrt() * l / 8.0).powi(2) + b * b).sqrt();
        let bonds = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        for n0 in -3..=3 {
            for n1 in -3..=3 {
                for n2 in -3..=3 {
                    let t = lat.a * Vector3::new(n0 as f64, n1 as f64, n2 as f64);
                    let s1 = t + Vector3::new(q, q, q);
                    if (x - t).norm() < 0.12 * l || (x - s1).norm() < 0.12 * l {
                        return true;
                    }
                    for bd in bonds {
                        let f2 = t + Vector3::new(bd[0], bd[1], bd[2]) * q;
                        if (x - t).norm() + (x - f2).norm() < 2.0 * a {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn diamond_points() {
        let l = 1.0;
        let g = geometry_fcc_diamond(l);
        assert!(g(&Vector3::zeros()));
        assert!(g(&Vector3::new(l / 8.0, l / 8.0, l / 8.0)));
        assert!(g(&Vector3::new(l / 4.0, l / 4.0, l / 4.0)));
        assert!(!g(&Vector3::new(l / 2.0, 0.0, 0.0)));
        assert!(!diamond_brute(&Vector3::new(l / 2.0, 0.0, 0.0), l));
        // Each site-1 atom has its own four bonds, e.g. toward (l/2, l/2, 0).
        assert!(g(&Vector3::new(3.0 * l / 8.0, 3.0 * l / 8.0, l / 8.0)));
    }

    #[test]
    fn diamond_matches_brute_force() {
        let l = 1.3;
        let g = geometry_fcc_diamond(l);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut hits = 0;
        for _ in 0..3000 {
            let x = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * l;
            let fast = g(&x);
            assert_eq!(fast, diamond_brute(&x, l), "at {x:?}");
            hits += fast as usize;
        }
        assert!(hits > 100 && hits < 2900);
    }

    #[test]
    fn m0_formula_and_bounds() {
        let mut eps = vec![1.0; 27];
        // Cells sharing the x-edge at (1,1,1): (1, 0|1, 0|1).
        eps[linearize(1, 0, 0, 3)] = 13.0;
        eps[linearize(1, 1, 0, 3)] = 13.0;
        let m0 = m0_from_cells(3, &eps);
        assert!((m0.beta[linearize(1, 1, 1, 3)] - 1.0 / 7.0).abs() < 1e-15);
        let all = m0_from_cells(3, &[13.0; 27]);
        assert!(all.beta.iter().all(|&b| (b - 1.0 / 13.0).abs() < 1e-15));

        let lat = make_lattice(LatticeKind::Sc, 1.0).unwrap();
        let grid = GridSpec::new(12, 1).unwrap();
        let model = DielectricModel::new(Geometry::ScCurved, 1.0, 13.0, 1.0).unwrap();
        let m0 = assemble_m0(&grid, &lat, &model);
        assert!(m0.min() >= 1.0 / 13.0 - 1e-15 && m0.max() <= 1.0 + 1e-15);
        assert!(m0.beta.iter().any(|&b| (b - 1.0 / 13.0).abs() < 1e-15));
        assert!(m0.beta.iter().any(|&b| b == 1.0));
        assert!(m0.beta.iter().any(|&b| b > 1.0 / 13.0 && b < 1.0));

        let homo = DielectricModel::homogeneous(2.5).unwrap();
        let m0 = assemble_m0(&grid, &lat, &homo);
        assert!(m0.beta.iter().all(|&b| b == 0.4));
    }

    #[test]
    fn invalid_permittivity_rejected() {
        assert!(DielectricModel::new(Geometry::ScCurved, 1.0, 0.0, 1.0).is_err());
        assert!(DielectricModel::new(Geometry::ScCurved, 1.0, 13.0, -1.0).is_err());
        assert!("nope".parse::<Geometry>().is_err());
        assert_eq!("fcc_diamond".parse::<Geometry>().unwrap(), Geometry::FccDiamond);
    }

    #[test]
    fn volume_fraction_stabilizes() {
        for (geom, kind) in [
            (Geometry::ScCurved, LatticeKind::Sc),
            (Geometry::BccSingleGyroid, LatticeKind::Bcc),
            (Geometry::FccDiamond, LatticeKind::Fcc),
        ] {
            let lat = make_lattice(kind, 1.0).unwrap();
            let model = DielectricModel::new(geom, 1.0, 13.0, 1.0).unwrap();
            let f: Vec<f64> = [32usize, 64]
                .iter()
                .map(|&n| volume_fraction(&GridSpec::new(n, 1).unwrap(), &lat, &model))
                .collect();
            assert!(f[0] > 0.05 && f[0] < 0.6, "{geom}: {f:?}");
            assert!((f[0] - f[1]).abs() < 0.01, "{geom}: {f:?}");
        }
    }

    proptest! {
        #[test]
        fn sc_curved_is_periodic(x in prop::array::uniform3(-3.0f64..3.0), n in prop::array::uniform3(-2i32..=2)) {
            let l = 1.7;
            let g = geometry_sc_curved(l);
            let p = Vector3::from(x);
            let q = p + Vector3::new(n[0] as f64, n[1] as f64, n[2] as f64) * l;
            // Exclude points that sit within rounding distance of an interface.
            let c = p.map(|v| v.rem_euclid(l) - 0.5 * l);
            let margins = [c.norm() - 0.345 * l, c.xy().norm() - 0.11 * l, c.yz().norm() - 0.11 * l, c.xz().norm() - 0.11 * l];
            prop_assume!(margins.iter().all(|m| m.abs() > 1e-9));
            prop_assert_eq!(g(&p), g(&q));
        }
    }
}
