//! Lattice vectors, symmetry points and a sampled Brillouin-zone path.

use kcmfd::lattice::{default_path_labels, sample_kpath, symmetry_points};
use kcmfd::{make_lattice, KPath, LatticeKind};

fn main() -> kcmfd::Result<()> {
    let l = 1.0;
    for kind in [LatticeKind::Sc, LatticeKind::Fcc, LatticeKind::Bcc] {
        let lat = make_lattice(kind, l)?;
        println!("{kind}: |B| = {:.4}", lat.b_norm());
        for (name, k) in symmetry_points(kind, l) {
            println!("  {name:>3} = ({:8.4}, {:8.4}, {:8.4})", k.0[0], k.0[1], k.0[2]);
        }
        let path = KPath::from_labels(kind, l, default_path_labels(kind), 4)?;
        let samples = sample_kpath(&path)?;
        let labels: Vec<&str> = samples.iter().filter_map(|s| s.label.as_deref()).collect();
        println!("  path {} with {} samples, length {:.4}", labels.join(" -> "), samples.len(), samples.last().unwrap().abscissa);
    }
    Ok(())
}
