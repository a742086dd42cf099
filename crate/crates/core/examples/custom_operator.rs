//! A user-defined matrix-free generator without a shifted solver: a damped
//! circulant shift.

use semigroup_lab::linalg::c;
use semigroup_lab::operator::{MatrixFreeOperator, OperatorHandle};
use semigroup_lab::{semigroup, spectral, CVector};
use std::sync::Arc;

#[derive(Debug)]
struct DampedShift {
    n: usize,
    damping: f64,
}

impl MatrixFreeOperator for DampedShift {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &CVector) -> CVector {
        CVector::from_fn(self.n, |i, _| x[(i + 1) % self.n] - x[i] * c(self.damping))
    }

    fn apply_adjoint(&self, x: &CVector) -> CVector {
        CVector::from_fn(self.n, |i, _| x[(i + self.n - 1) % self.n] - x[i] * c(self.damping))
    }
}

fn main() -> semigroup_lab::Result<()> {
    let op = OperatorHandle::matrix_free("damped_shift:n=8", Arc::new(DampedShift { n: 8, damping: 1.5 }))?;
    let exact = semigroup::expm_oracle(&op, 1.0)?;
    let euler = semigroup::euler_product(&op, 1.0, 400)?;
    println!("Euler n=400 error {:.3e}", (euler - &exact).norm());
    let m = spectral::spectral_mapping_check(&op, 1.0)?;
    println!("spectral mapping pass {} on {} eigenvalues", m.pass, m.left.len());
    Ok(())
}
