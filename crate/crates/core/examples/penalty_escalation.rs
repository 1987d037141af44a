//! A deliberately tiny penalty lets divergence modes into the low spectrum;
//! the Rayleigh recomputation flags them and the driver raises γ.

use std::f64::consts::PI;

use kcmfd::bands::{solve_kpoint, Problem, SolveSettings};
use kcmfd::dielectric::{DielectricModel, Geometry};
use kcmfd::{make_lattice, BlochVector, GridSpec, LatticeKind};

fn main() -> kcmfd::Result<()> {
    let model = DielectricModel::new(Geometry::FccDiamond, 1.0, 13.0, 1.0)?;
    let problem = Problem::new(GridSpec::new(16, 1)?, make_lattice(LatticeKind::Fcc, 1.0)?, &model);
    let k = BlochVector([PI, PI, PI]);
    for gamma in [None, Some(1e-4)] {
        let settings = SolveSettings { nev: 6, gamma, ..SolveSettings::default() };
        let sol = solve_kpoint(&problem, k, &settings, 0, None)?;
        println!(
            "initial gamma {:>10}: final gamma {:8.2}, {} escalation(s), lambdas {:.4?}",
            gamma.map_or("default".to_string(), |g| format!("{g:e}")),
            sol.eig.gamma,
            sol.escalations,
            sol.eig.lambdas
        );
    }
    let strict = SolveSettings { nev: 6, gamma: Some(1e-4), max_escalations: 0, ..SolveSettings::default() };
    match solve_kpoint(&problem, k, &strict, 0, None) {
        Err(e) => println!("without escalation: {e}"),
        Ok(_) => println!("without escalation: no intruders found"),
    }
    Ok(())
}
