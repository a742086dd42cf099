//! Resolvent of a built-in generator: LU and Neumann agree, the resolvent
//! identity holds, and the Hille-Yosida power bounds are tight.

use num_complex::Complex64;
use semigroup_lab::operator::{self, parse_operator};
use semigroup_lab::resolvent;

fn main() -> semigroup_lab::Result<()> {
    let a = parse_operator("random_dissipative:n=6,seed=42")?;
    let norm = operator::operator_norm(&a)?.value;
    println!("{}: ||A|| = {norm:.4}", a.label());

    let lambda = Complex64::new(1.5 * norm, 0.5);
    let lu = resolvent::resolvent(&a, lambda);
    let series = resolvent::neumann_resolvent(&a, lambda, 1e-14)?;
    let gap = (lu.matrix()? - series.matrix()?).norm();
    println!("||R(lambda)|| = {:.6}, Neumann terms {:?}, gap {gap:.2e}", lu.norm_estimate, series.terms);

    let report = resolvent::check_resolvent_identity(&a, lambda, Complex64::new(2.0, -1.0))?;
    println!("resolvent identity: pass = {}", report.pass);

    let env = operator::estimate_growth_envelope(&a, 5.0, 33)?;
    let grid = resolvent::default_shift_grid(env.omega);
    let hy = resolvent::check_hille_yosida_bounds(&a, &env, &grid, 6)?;
    println!("M = {:.4}, omega = {:.4}, worst Hille-Yosida ratio {:.9}", env.m, env.omega, hy.worst_ratio());
    Ok(())
}
