//! Convergence study of orders 2 to 8 against the exact homogeneous spectrum.

use std::f64::consts::PI;

use kcmfd::accuracy::verify_order;
use kcmfd::BlochVector;

fn main() -> kcmfd::Result<()> {
    let table = verify_order(&[2, 4, 6, 8], &[10, 20, 40], BlochVector([0.5, 0.0, 0.0]), 2.0 * PI, 6, 1e-9)?;
    print!("{}", table.to_text());
    Ok(())
}
