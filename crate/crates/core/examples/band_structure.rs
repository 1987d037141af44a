//! A full band diagram for the curved-interface SC structure, written as CSV,
//! SVG and a JSON manifest into a directory given on the command line.

use std::path::PathBuf;
use std::time::Instant;

use kcmfd::bands::{run_bandstructure_with, RunConfig};
use kcmfd::dielectric::Geometry;
use kcmfd::output::emit_outputs;
use kcmfd::LatticeKind;

fn main() -> kcmfd::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "band_structure_out".into()));
    std::fs::create_dir_all(&dir)?;
    let mut cfg = RunConfig::new(LatticeKind::Sc, Geometry::ScCurved, 16);
    cfg.eps1 = 13.0;
    cfg.nev = 8;
    cfg.kpath.samples_per_segment = Some(3);
    cfg.warm_start = true;
    cfg.output.csv = Some(dir.join("bands.csv"));
    cfg.output.svg = Some(dir.join("bands.svg"));
    cfg.output.manifest = Some(dir.join("manifest.json"));
    let t = Instant::now();
    let bs = run_bandstructure_with(&cfg, |r| println!("k {:2} {:?}: {} iterations", r.index, r.k, r.iterations))?;
    emit_outputs(&bs, &cfg, t.elapsed().as_secs_f64())?;
    match bs.gap {
        Some(g) => println!("gap above band {}: ratio {:.4}", g.band, g.ratio),
        None => println!("no gap"),
    }
    println!("wrote {}", dir.display());
    Ok(())
}
