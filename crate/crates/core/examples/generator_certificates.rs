//! Dissipativity, Lumer-Phillips and the sectorial constants for a diffusion
//! generator, and what goes wrong for a rotation.

use semigroup_lab::generator::{self, log_grid};
use semigroup_lab::operator::parse_operator;

fn main() -> semigroup_lab::Result<()> {
    let heat = parse_operator("laplacian1d:n=32,h=0.0303")?;
    let t_grid: Vec<f64> = (0..=50).map(|k| 5.0 * k as f64 / 50.0).collect();
    let lp = generator::check_lumer_phillips(&heat, &t_grid)?;
    println!("{}: Lumer-Phillips pass = {}", heat.label(), lp.pass);

    let counter = parse_operator("dense:-1,3;0,-1")?;
    let d = generator::check_dissipative(&counter, generator::DISSIPATIVITY_PROBES, &generator::default_alpha_grid(3.0))?;
    println!("{}: max Re<Ax,x> = {:.3}, dissipative = {}", counter.label(), d.inner_product_margin, d.is_dissipative);

    let etas = log_grid(1e-2, 1e4, 4);
    let gammas = [1e-3, 1e-2, 1e-1, 1.0];
    let ts = log_grid(1e-4, 1.0, 4);
    for op in [heat, parse_operator("diag:-1+i,-1-i")?] {
        let s = generator::check_sectorial(&op, &etas, &gammas, &ts)?;
        println!(
            "{}: delta {:?}, K {:.4}, C_line {:.4}, L {:.4}, sectorial {}",
            op.label(),
            s.delta,
            s.k,
            s.c_line,
            s.l,
            s.sectorial
        );
    }
    Ok(())
}
