//! Preconditioned LOBPCG on the compensated operator of a homogeneous medium,
//! compared with the exact spectrum.

use std::f64::consts::PI;

use kcmfd::accuracy::exact_iso_eigs;
use kcmfd::compensation::{penalty_gamma, CompensatedOperator};
use kcmfd::dielectric::M0Diagonal;
use kcmfd::fft::FftPreconditioner;
use kcmfd::lobpcg::{lobpcg, SolverConfig};
use kcmfd::{make_lattice, BlochVector, GridSpec, LatticeKind, LinearOperator, ShiftedOperators};

fn main() -> kcmfd::Result<()> {
    let l = 2.0 * PI;
    let k = BlochVector([0.5, 0.2, 0.0]);
    let ops = ShiftedOperators::new(GridSpec::new(24, 3)?, make_lattice(LatticeKind::Sc, l)?, k)?;
    let gamma = penalty_gamma(ops.grid.h(), &k);
    let op = CompensatedOperator::new(ops.clone(), M0Diagonal::identity(ops.grid.vector_len()), gamma, None)?;
    let exact = exact_iso_eigs(&k, l, 8);
    let cfg = SolverConfig { m: 8, block_extra: None, tol: 1e-8, maxit: 300, seed: 1 };
    for (name, pre) in [("none", None), ("fft", Some(FftPreconditioner::new(&ops, gamma, 0.0)?))] {
        let out = lobpcg(&op, pre.as_ref().map(|p| p as &dyn LinearOperator), &cfg, None)?;
        let err = out.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("preconditioner {name:>4}: {} iterations, max |lambda - exact| {err:.2e}", out.iterations);
    }
    println!("exact: {exact:?}");
    Ok(())
}
