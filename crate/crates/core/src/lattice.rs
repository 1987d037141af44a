//! Cubic-family Bravais lattices, Brillouin-zone symmetry points and k-paths.
//!
//! The computational cell is the unit cube in reference coordinates `y`, with
//! Cartesian points recovered as `x = A y`. The columns of `A` are the lattice
//! translation vectors, so the lattice constant lives entirely inside `A` and
//! `B = A⁻¹` carries the inverse-length scale into the discrete operators.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Sc,
    Fcc,
    Bcc,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Sc => "sc",
            LatticeKind::Fcc => "fcc",
            LatticeKind::Bcc => "bcc",
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(LatticeKind::Sc),
            "fcc" => Ok(LatticeKind::Fcc),
            "bcc" => Ok(LatticeKind::Bcc),
            other => Err(Error::InvalidParameter(format!("unknown lattice kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub l: f64,
    /// Translation vectors as columns.
    pub a: Matrix3<f64>,
    /// `A⁻¹`; entry `(i, j)` is the coefficient `b_ij` of the coordinate change.
    pub b: Matrix3<f64>,
}

pub fn make_lattice(kind: LatticeKind, l: f64) -> Result<LatticeSpec> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidParameter(format!("lattice constant must be positive, got {l}")));
    }
    let h = l / 2.0;
    let a = match kind {
        LatticeKind::Sc => Matrix3::from_diagonal_element(l),
        LatticeKind::Fcc => Matrix3::from_columns(&[
            Vector3::new(0.0, h, h),
            Vector3::new(h, 0.0, h),
            Vector3::new(h, h, 0.0),
        ]),
        LatticeKind::Bcc => Matrix3::from_columns(&[
            Vector3::new(-h, h, h),
            Vector3::new(h, -h, h),
            Vector3::new(h, h, -h),
        ]),
    };
    let b = a
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular translation matrix".into()))?;
    let residual = (a * b - Matrix3::identity()).abs().max();
    if residual > 1e-13 {
        return Err(Error::InvalidParameter(format!("A·B deviates from identity by {residual:e}")));
    }
    Ok(LatticeSpec { kind, l, a, b })
}

impl LatticeSpec {
    /// Maps reference coordinates in the unit cube to Cartesian coordinates.
    pub fn to_cartesian(&self, y: Vector3<f64>) -> Vector3<f64> {
        self.a * y
    }

    pub fn to_reference(&self, x: Vector3<f64>) -> Vector3<f64> {
        self.b * x
    }

    /// Coefficient `b_ij = (A⁻¹)_ij` with zero-based indices.
    #[inline]
    pub fn b_coeff(&self, i: usize, j: usize) -> f64 {
        self.b[(i, j)]
    }

    /// Spectral norm of `B`.
    pub fn b_norm(&self) -> f64 {
        self.b.singular_values().max()
    }

    pub fn translation(&self, n: usize) -> Vector3<f64> {
        self.a.column(n).into_owned()
    }
}

/// Bloch wave vector in Cartesian coordinates (inverse length units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(pub [f64; 3]);

impl BlochVector {
    pub const ZERO: BlochVector = BlochVector([0.0; 3]);

    pub fn new(kx: f64, ky: f64, kz: f64) -> Self {
        BlochVector([kx, ky, kz])
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::from(self.0)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn lerp(&self, other: &BlochVector, t: f64) -> BlochVector {
        let mut out = [0.0; 3];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a + t * (b - a);
        }
        BlochVector(out)
    }
}

/// Labeled high-symmetry points of the first Brillouin zone, in a fixed order.
pub fn symmetry_points(kind: LatticeKind, l: f64) -> Vec<(String, BlochVector)> {
    let p = PI / l;
    let pts: Vec<(&str, [f64; 3])> = match kind {
        LatticeKind::Sc => vec![
            ("Γ", [0.0, 0.0, 0.0]),
            ("L", [p, 0.0, 0.0]),
            ("M", [p, p, 0.0]),
            ("N", [p, p, p]),
        ],
        LatticeKind::Fcc => vec![
            ("X", [0.0, 2.0 * p, 0.0]),
            ("U", [0.5 * p, 0.0, 0.5 * p]),
            ("L", [p, p, p]),
            ("Γ", [0.0, 0.0, 0.0]),
            ("W", [p, 2.0 * p, 0.0]),
            ("K", [1.5 * p, 1.5 * p, 0.0]),
        ],
        LatticeKind::Bcc => vec![
            ("H'", [0.0, 0.0, 2.0 * p]),
            ("Γ", [0.0, 0.0, 0.0]),
            ("P", [p, p, p]),
            ("N", [p, 0.0, p]),
            ("H", [0.0, 2.0 * p, 0.0]),
        ],
    };
    pts.into_iter().map(|(s, k)| (s.to_string(), BlochVector(k))).collect()
}

/// Looks up a symmetry point by label. `G`, `Gamma` and `Γ` are accepted for the zone center.
pub fn symmetry_point(kind: LatticeKind, l: f64, label: &str) -> Option<BlochVector> {
    let wanted = match label {
        "G" | "Gamma" | "gamma" => "Γ",
        "Hp" | "H′" => "H'",
        other => other,
    };
    symmetry_points(kind, l).into_iter().find(|(s, _)| s == wanted).map(|(_, k)| k)
}

/// Default traversal used when a run does not name its own path.
pub fn default_path_labels(kind: LatticeKind) -> &'static [&'static str] {
    match kind {
        LatticeKind::Sc => &["Γ", "L", "M", "N", "Γ", "M"],
        LatticeKind::Fcc => &["X", "U", "L", "Γ", "X", "W", "K"],
        LatticeKind::Bcc => &["H'", "Γ", "P", "N", "H"],
    }
}

pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct KPath {
    pub vertices: Vec<(String, BlochVector)>,
    pub samples_per_segment: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KSample {
    /// Vertex label, `None` for interior samples.
    pub label: Option<String>,
    pub k: BlochVector,
    /// Cumulative arc length along the path.
    pub abscissa: f64,
}

impl KPath {
    pub fn from_labels(kind: LatticeKind, l: f64, labels: &[&str], samples: usize) -> Result<KPath> {
        let vertices = labels
            .iter()
            .map(|s| {
                symmetry_point(kind, l, s)
                    .map(|k| (s.to_string(), k))
                    .ok_or_else(|| Error::InvalidParameter(format!("no symmetry point '{s}' for {kind}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KPath { vertices, samples_per_segment: samples })
    }
}

pub fn sample_kpath(path: &KPath) -> Result<Vec<KSample>> {
    if path.vertices.len() < 2 {
        return Err(Error::InvalidParameter("a k-path needs at least two vertices".into()));
    }
    if let Some((label, _)) = path.vertices.iter().find(|(_, k)| !k.is_finite()) {
        return Err(Error::InvalidParameter(format!("vertex '{label}' has non-finite components")));
    }
    let steps = path.samples_per_segment + 1;
    let mut out = Vec::with_capacity((path.vertices.len() - 1) * steps + 1);
    let mut s = 0.0;
    let (l0, k0) = &path.vertices[0];
    out.push(KSample { label: Some(l0.clone()), k: *k0, abscissa: 0.0 });
    for pair in path.vertices.windows(2) {
        let (_, ka) = &pair[0];
        let (lb, kb) = &pair[1];
        let seg = (kb.as_vector() - ka.as_vector()).norm();
        for step in 1..=steps {
            let t = step as f64 / steps as f64;
            let last = step == steps;
            out.push(KSample {
                label: last.then(|| lb.clone()),
                k: if last { *kb } else { ka.lerp(kb, t) },
                abscissa: s + t * seg,
            });
        }
        s += seg;
    }
    Ok(out)
}
