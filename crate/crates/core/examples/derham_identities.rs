//! Discrete de Rham complex on the shifted staggered grid: GRAD, CURL and DIV
//! compose to zero and their adjoints are conjugate transposes.

use kcmfd::grid::inner;
use kcmfd::{make_lattice, BlochVector, Complex64, GridSpec, LatticeKind, ScalarField, ShiftedOperators, Space, VectorField};

fn field(len: usize, seed: f64) -> Vec<Complex64> {
    (0..len).map(|i| Complex64::new((seed * i as f64).sin(), (1.7 * seed + i as f64).cos())).collect()
}

fn main() -> kcmfd::Result<()> {
    let n = 8;
    let k = BlochVector([0.7, -1.3, 2.2]);
    for kind in [LatticeKind::Sc, LatticeKind::Fcc, LatticeKind::Bcc] {
        for order_k in 1..=4 {
            let ops = ShiftedOperators::new(GridSpec::new(n, order_k)?, make_lattice(kind, 1.0)?, k)?;
            let s = n * n * n;
            let phi = ScalarField::from_values(n, Space::Node, field(s, 0.3))?;
            let u = VectorField::from_values(n, Space::Edge, field(3 * s, 0.7))?;
            let g = ops.apply_grad_k(&phi)?;
            let cg = ops.apply_curl_k(&g)?.norm() / phi.norm();
            let cu = ops.apply_curl_k(&u)?;
            let dc = ops.apply_div_k(&cu)?.norm() / u.norm();
            let adj = (inner(&g.values, &u.values) - inner(&phi.values, &ops.apply_grad_k_adj(&u)?.values)).norm() / (g.norm() * u.norm());
            println!("{kind} order {}: |CURL GRAD| {cg:.1e}  |DIV CURL| {dc:.1e}  grad adjoint {adj:.1e}", 2 * order_k);
        }
    }
    Ok(())
}
