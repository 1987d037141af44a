//! The three curved-interface structures: volume fractions and the diagonal
//! `M₀` with harmonic averaging on interface edges.

use kcmfd::dielectric::{assemble_m0, volume_fraction, DielectricModel, Geometry};
use kcmfd::{make_lattice, GridSpec, LatticeKind};

fn main() -> kcmfd::Result<()> {
    let cases = [
        (LatticeKind::Sc, Geometry::ScCurved, 13.0),
        (LatticeKind::Bcc, Geometry::BccSingleGyroid, 16.0),
        (LatticeKind::Fcc, Geometry::FccDiamond, 13.0),
    ];
    for (kind, geometry, eps) in cases {
        let lattice = make_lattice(kind, 1.0)?;
        let model = DielectricModel::new(geometry, 1.0, eps, 1.0)?;
        print!("{geometry:>18} (eps {eps}):");
        for n in [16, 32, 64] {
            let grid = GridSpec::new(n, 1)?;
            let m0 = assemble_m0(&grid, &lattice, &model);
            let mixed = m0.beta.iter().filter(|b| **b < 1.0 && **b > 1.0 / eps).count();
            print!("  N={n}: fill {:.4}, mixed edges {:.1}%", volume_fraction(&grid, &lattice, &model), 100.0 * mixed as f64 / m0.beta.len() as f64);
        }
        println!();
    }
    Ok(())
}
