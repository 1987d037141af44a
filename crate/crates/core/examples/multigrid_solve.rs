//! Distributive multigrid for `P`: agreement with the FFT solve and V-cycle
//! counts that do not grow with the grid.

use std::time::Instant;

use kcmfd::fft::{build_symbols, solve_p, Fft3};
use kcmfd::grid::norm;
use kcmfd::multigrid::{auto_depth, build_hierarchy};
use kcmfd::{make_lattice, BlochVector, Complex64, GridSpec, LatticeKind, ShiftedOperators};

fn main() -> kcmfd::Result<()> {
    let k = BlochVector([0.9, -0.4, 1.7]);
    for kind in [LatticeKind::Sc, LatticeKind::Fcc, LatticeKind::Bcc] {
        for n in [16, 32, 64] {
            let ops = ShiftedOperators::new(GridSpec::new(n, 1)?, make_lattice(kind, 1.0)?, k)?;
            let gamma = 10.0;
            let b: Vec<Complex64> = (0..ops.grid.vector_len()).map(|i| Complex64::new((i as f64 * 0.61).sin(), 0.0)).collect();
            let t = Instant::now();
            let h = build_hierarchy(&ops, gamma, 0.0, auto_depth(n))?;
            let built = t.elapsed();
            let sol = h.distributive_solve(&b, 1e-8, 100)?;
            let xf = solve_p(&b, &build_symbols(&ops), &Fft3::new(n), gamma, 0.0)?;
            let d: Vec<Complex64> = sol.x.iter().zip(&xf).map(|(a, c)| a - c).collect();
            println!(
                "{kind} N={n:>2} levels {:?}: {} V-cycles, |x_mg - x_fft| / |x_fft| = {:.1e} (setup {built:?}, total {:?})",
                h.level_sizes(),
                sol.cycles,
                norm(&d) / norm(&xf),
                t.elapsed()
            );
        }
    }
    Ok(())
}
