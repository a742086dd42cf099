//! Eigenvalues of `e^{tA}`, `A^n e^{tA}` and `R(lambda)` from those of `A`.

use num_complex::Complex64;
use semigroup_lab::operator::parse_operator;
use semigroup_lab::spectral;

fn main() -> semigroup_lab::Result<()> {
    let a = parse_operator("jordan:lambda=-1,n=3")?;
    let m = spectral::spectral_mapping_check(&a, 2.0)?;
    println!("e^(t sigma) vs sigma(e^tA): pass {}, bottleneck {:.2e}", m.pass, m.max_pair_distance);

    let rot = parse_operator("rotation2")?;
    let m = spectral::derivative_spectral_mapping_check(&rot, std::f64::consts::PI, 2)?;
    let values: Vec<String> = m.right.iter().map(|z| format!("{z:.6}")).collect();
    println!("lambda^2 e^(pi lambda) on rotation2: {}", values.join(", "));

    let lambda = Complex64::new(1.0, 0.5);
    let m = spectral::recover_spectrum(&parse_operator("random_dissipative:n=6,seed=42")?, lambda)?;
    println!("spectrum recovered from R(lambda): pass {}", m.pass);
    for z in &m.left {
        println!("  {z:.6}");
    }
    Ok(())
}
