//! Analytic spectrum of the homogeneous medium and convergence-order studies.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bands::{solve_kpoint, Problem, SolveSettings};
use crate::dielectric::DielectricModel;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lattice::{make_lattice, BlochVector, LatticeKind};

/// The `count` smallest values of `|k + (2π/l) m|²` over integer `m`, each
/// listed twice for the two transverse polarizations.
pub fn exact_iso_eigs(k: &BlochVector, l: f64, count: usize) -> Vec<f64> {
    let g = 2.0 * PI / l;
    let kn = k.norm();
    let mut radius: i64 = 1;
    loop {
        let mut vals = Vec::new();
        for a in -radius..=radius {
            for b in -radius..=radius {
                for c in -radius..=radius {
                    let q = [k.0[0] + g * a as f64, k.0[1] + g * b as f64, k.0[2] + g * c as f64];
                    let v = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
                    vals.push(v);
                    vals.push(v);
                }
            }
        }
        vals.sort_by(|x, y| x.total_cmp(y));
        vals.truncate(count);
        // Any m outside the box has |k + g m| ≥ g (radius + 1) − |k|.
        let bound = g * (radius + 1) as f64 - kn;
        if vals.len() == count && bound > 0.0 && vals[count - 1] <= bound * bound {
            return vals;
        }
        radius += 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderRow {
    /// Order of accuracy `2k`.
    pub order: usize,
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub errors: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderTable {
    pub k: [f64; 3],
    pub l: f64,
    pub exact: Vec<f64>,
    pub rows: Vec<OrderRow>,
}

impl OrderTable {
    pub fn rows_for(&self, order: usize) -> Vec<&OrderRow> {
        self.rows.iter().filter(|r| r.order == order).collect()
    }

    /// Observed rates `log(e_i / e_j) / log(N_j / N_i)` between successive resolutions
    /// of one order, per eigenvalue.
    pub fn rates(&self, order: usize) -> Vec<(usize, usize, Vec<f64>)> {
        let rows = self.rows_for(order);
        rows.windows(2)
            .map(|w| {
                let r: Vec<f64> = w[0]
                    .errors
                    .iter()
                    .zip(&w[1].errors)
                    .map(|(a, b)| (a / b).ln() / (w[1].n as f64 / w[0].n as f64).ln())
                    .collect();
                (w[0].n, w[1].n, r)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("k = {:?}, l = {}\nexact: {:?}\n", self.k, self.l, self.exact);
        let mut orders: Vec<usize> = self.rows.iter().map(|r| r.order).collect();
        orders.dedup();
        for order in orders {
            s.push_str(&format!("order {order}\n"));
            let rows = self.rows_for(order);
            let rates = self.rates(order);
            for (i, row) in rows.iter().enumerate() {
                s.push_str(&format!("  N={:<4}", row.n));
                for (j, e) in row.errors.iter().enumerate() {
                    match i.checked_sub(1).map(|p| rates[p].2[j]) {
                        Some(r) if r.is_finite() => s.push_str(&format!(" {e:9.2e} ({r:5.2})")),
                        _ => s.push_str(&format!(" {e:9.2e}        ")),
                    }
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Solves the homogeneous (`ε ≡ 1`) SC problem at every order and resolution and
/// compares the lowest `nev` eigenvalues with [`exact_iso_eigs`].
pub fn verify_order(orders: &[usize], ns: &[usize], k: BlochVector, l: f64, nev: usize, tol: f64) -> Result<OrderTable> {
    if orders.iter().any(|o| ![2, 4, 6, 8].contains(o)) {
        return Err(Error::InvalidParameter(format!("orders must be among 2, 4, 6, 8, got {orders:?}")));
    }
    if ns.is_empty() || nev == 0 {
        return Err(Error::InvalidParameter("need at least one N and one eigenvalue".into()));
    }
    let lattice = make_lattice(LatticeKind::Sc, l)?;
    let model = DielectricModel::homogeneous(1.0)?;
    let exact = exact_iso_eigs(&k, l, nev);
    let settings = SolveSettings { nev, tol, ..SolveSettings::default() };
    let mut rows = Vec::new();
    for &order in orders {
        for &n in ns {
            let problem = Problem::new(GridSpec::new(n, order / 2)?, lattice.clone(), &model);
            let sol = solve_kpoint(&problem, k, &settings, 0, None)?;
            let errors = sol.eig.lambdas.iter().zip(&exact).map(|(a, b)| (a - b).abs()).collect();
            rows.push(OrderRow { order, n, eigenvalues: sol.eig.lambdas, errors, iterations: sol.eig.iterations });
        }
    }
    Ok(OrderTable { k: k.0, l, exact, rows })
}
