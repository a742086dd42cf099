//! Generator sequences: resolvent and semigroup convergence rates agree.

use semigroup_lab::lab::{self, GeneratorSequence};
use semigroup_lab::linalg::c;
use semigroup_lab::operator::parse_operator;

fn main() -> semigroup_lab::Result<()> {
    let base = parse_operator("diag:-1,-2")?;
    let sequences = [
        GeneratorSequence::perturbation(&base, 1.0, None)?,
        GeneratorSequence::perturbation(&base, 2.0, Some(2))?,
        GeneratorSequence::yosida(&base)?,
        GeneratorSequence::laplacian_refine(6)?,
    ];
    for seq in &sequences {
        let report = lab::check_tk_equivalence(seq, c(1.0), 1.0)?;
        println!(
            "{:<40} resolvent order {:.3}, semigroup order {:.3}, pass {}",
            seq.labels.first().map(String::as_str).unwrap_or(""),
            report.metrics["resolvent_order"],
            report.metrics["semigroup_order"],
            report.pass
        );
    }

    let a = parse_operator("random_dissipative:n=5,seed=9")?;
    let b = parse_operator("random_dissipative:n=5,seed=10")?;
    let bridge = lab::bridge_identity_check(&a, &b, c(1.0), 0.8, 32)?;
    println!("bridge identity residual {:.2e}", bridge.residual("residual").map_or(f64::NAN, |r| r.value));
    Ok(())
}
