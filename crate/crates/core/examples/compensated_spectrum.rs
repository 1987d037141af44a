//! Dense check at N=4: the nonzero spectrum of the compensated operator is the
//! curl-curl spectrum together with γ times the grad-div spectrum.

use kcmfd::compensation::CompensatedOperator;
use kcmfd::dense::{dense_assemble, hermitian_eigenvalues, DenseKind};
use kcmfd::dielectric::M0Diagonal;
use kcmfd::{make_lattice, BlochVector, GridSpec, LatticeKind, ShiftedOperators};

fn main() -> kcmfd::Result<()> {
    let ops = ShiftedOperators::new(GridSpec::new(4, 1)?, make_lattice(LatticeKind::Bcc, 1.0)?, BlochVector([0.4, 1.2, -0.8]))?;
    let c = dense_assemble(DenseKind::Curl, &ops)?;
    let d = dense_assemble(DenseKind::Div, &ops)?;
    let curl_part = hermitian_eigenvalues(&(&c * c.adjoint()));
    let div_part = hermitian_eigenvalues(&(d.adjoint() * &d));
    for gamma in [0.5, 2.0, 37.0] {
        let op = CompensatedOperator::with_raw_shift(ops.clone(), M0Diagonal::identity(ops.grid.vector_len()), gamma, 0.0)?;
        let s = hermitian_eigenvalues(&dense_assemble(DenseKind::S(&op), &ops)?);
        let cut = 1e-9 * s[s.len() - 1];
        let mut union: Vec<f64> = curl_part.iter().copied().filter(|v| *v > cut).collect();
        union.extend(div_part.iter().map(|v| gamma * v).filter(|v| *v > cut));
        union.sort_by(f64::total_cmp);
        let nonzero: Vec<f64> = s.iter().copied().filter(|v| *v > cut).collect();
        let dev = union.iter().zip(&nonzero).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("gamma {gamma:>4}: {} nonzero eigenvalues, {} expected, max deviation {dev:.2e}, smallest {:.4}", nonzero.len(), union.len(), nonzero[0]);
    }
    Ok(())
}
