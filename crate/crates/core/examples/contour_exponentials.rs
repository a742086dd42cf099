//! `e^{tA}` from contour integrals of the resolvent, against the oracle.

use semigroup_lab::contour::{self, ContourSpec};
use semigroup_lab::linalg;
use semigroup_lab::operator::parse_operator;
use semigroup_lab::semigroup;

fn main() -> semigroup_lab::Result<()> {
    let a = parse_operator("jordan:lambda=-1,n=3")?;
    let t = 1.0;
    let exact = semigroup::expm_oracle(&a, t)?;

    let circle = ContourSpec::Circle { center: linalg::c(-1.0), radius: 3.0, nodes: 64 };
    let dunford = contour::dunford_exp(&a, t, &circle)?;
    println!("Dunford circle error {:.2e}", linalg::spectral_norm(&(dunford - &exact)));

    let bromwich = contour::bromwich_auto(&a, t)?;
    println!(
        "Bromwich error {:.2e}, tail estimate {:.2e}, {} nodes, validated {}",
        linalg::spectral_norm(&(&bromwich.value - &exact)),
        bromwich.tail_estimate,
        bromwich.nodes,
        bromwich.validated
    );
    Ok(())
}
