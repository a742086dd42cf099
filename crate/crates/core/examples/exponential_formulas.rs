//! First-order product formulas converging to `e^{tA}`.

use semigroup_lab::operator::parse_operator;
use semigroup_lab::semigroup::{self, CrankNicolson, LimitProblem};
use std::sync::Arc;

fn main() -> semigroup_lab::Result<()> {
    let ns = [10.0, 20.0, 40.0, 80.0, 160.0];
    let a = parse_operator("diag:-1")?;
    let shift = parse_operator("dense:0,1;0,0")?;
    let transpose = parse_operator("dense:0,0;1,0")?;
    let rotation = parse_operator("rotation2")?;

    let problems = [
        LimitProblem::ExpFormula(a.clone()),
        LimitProblem::Euler(a.clone()),
        LimitProblem::Trotter(shift, transpose),
        LimitProblem::Chernoff(Arc::new(CrankNicolson::new(&rotation)?), rotation),
    ];
    for problem in &problems {
        let table = semigroup::converge_table(problem, &[1.0], &ns)?;
        println!("{}  order {}", table.target, table.order_label());
        print!("{}", table.to_csv());
    }
    Ok(())
}
