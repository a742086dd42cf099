//! Spectral mapping: `e^{t sigma(A)}` against `sigma(e^{tA})`, the derivative
//! form `lambda^n e^{t lambda}` and the resolvent spectrum `1/(lambda - zeta)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, LabError, Result};
use crate::linalg::{self, c};
use crate::operator::OperatorHandle;
use crate::resolvent;

/// Relative tolerance of the semigroup spectral mapping match.
pub const MAPPING_TOL: f64 = 1e-7;
/// Relative tolerance of the resolvent spectrum match.
pub const RESOLVENT_SPECTRUM_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultisetMatch {
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
    /// `(left index, right index)` in left order.
    pub pairing: Vec<(usize, usize)>,
    pub max_pair_distance: f64,
    /// Left elements without a partner.
    pub unmatched: usize,
    /// Right elements left over in a subset match.
    pub extras: usize,
    /// Pair `k` passes when its distance is at most `tolerance * max(1, |left_k|)`.
    pub tolerance: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

fn sort_key(values: &mut [Complex64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

impl MultisetMatch {
    /// Greedy nearest-pair matching after sorting both sides by `(Re, Im)`;
    /// ties go to the lower index. With `subset` set, surplus right elements
    /// are allowed and counted in `extras`.
    pub fn build(mut left: Vec<Complex64>, mut right: Vec<Complex64>, tolerance: f64, subset: bool) -> Self {
        sort_key(&mut left);
        sort_key(&mut right);
        let mut used = vec![false; right.len()];
        let mut pairing = Vec::with_capacity(left.len());
        let mut max_pair_distance: f64 = 0.0;
        let mut within = true;
        for (i, l) in left.iter().enumerate() {
            let best = right
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, r)| (j, (l - r).norm()))
                .fold(None, |acc: Option<(usize, f64)>, cand| match acc {
                    Some(b) if b.1 <= cand.1 => Some(b),
                    _ => Some(cand),
                });
            if let Some((j, d)) = best {
                used[j] = true;
                pairing.push((i, j));
                max_pair_distance = max_pair_distance.max(d);
                within &= d <= tolerance * l.norm().max(1.0);
            }
        }
        let unmatched = left.len() - pairing.len();
        let extras = right.len() - pairing.len();
        let mut notes = Vec::new();
        if subset && extras > 0 {
            notes.push(format!("{extras} surplus eigenvalue(s) on the right"));
        }
        let pass = within && unmatched == 0 && (subset || extras == 0);
        MultisetMatch { left, right, pairing, max_pair_distance, unmatched, extras, tolerance, pass, notes }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("match serializes")
    }
}

/// `{e^{t lambda_i}}` against `eig(e^{tA})`.
pub fn spectral_mapping_check(a: &OperatorHandle, t: f64) -> Result<MultisetMatch> {
    if !t.is_finite() {
        return Err(precondition(format!("t must be finite, got {t}")));
    }
    let m = a.to_dense()?;
    let left = linalg::eigenvalues(&m)?.into_iter().map(|z| (z * t).exp()).collect();
    let right = linalg::eigenvalues(&linalg::expm(&m, t)?)?;
    Ok(MultisetMatch::build(left, right, MAPPING_TOL, false))
}

/// `{lambda_i^n e^{t lambda_i}}` as a subset of `eig(A^n e^{tA})`.
pub fn derivative_spectral_mapping_check(a: &OperatorHandle, t: f64, n: usize) -> Result<MultisetMatch> {
    if !(t > 0.0) {
        return Err(precondition(format!("t must be positive, got {t}")));
    }
    if !(1..=4).contains(&n) {
        return Err(precondition(format!("n must be in 1..=4, got {n}")));
    }
    let m = a.to_dense()?;
    let left = linalg::eigenvalues(&m)?
        .into_iter()
        .map(|z| z.powu(n as u32) * (z * t).exp())
        .collect();
    let tn = linalg::matrix_power(&m, n) * linalg::expm(&m, t)?;
    let right = linalg::eigenvalues(&tn)?;
    Ok(MultisetMatch::build(left, right, MAPPING_TOL, true))
}

/// `{1/(lambda - zeta_i)}` against `eig(R(lambda))`; the point `0` of the
/// infinite-dimensional statement has no finite-dimensional counterpart.
pub fn resolvent_spectrum_check(a: &OperatorHandle, lambda: Complex64) -> Result<MultisetMatch> {
    let r = resolvent::resolvent_matrix(a, lambda)?;
    let m = a.to_dense()?;
    let left = linalg::eigenvalues(&m)?.into_iter().map(|z| (lambda - z).inv()).collect();
    let right = linalg::eigenvalues(&r)?;
    let mut out = MultisetMatch::build(left, right, RESOLVENT_SPECTRUM_TOL, false);
    out.notes.push("0 excluded: R(lambda) is invertible in finite dimension".into());
    Ok(out)
}

/// `sigma(A)` recovered as `lambda - 1/mu` over `mu` in `eig(R(lambda))`,
/// matched against a direct eigensolve.
pub fn recover_spectrum(a: &OperatorHandle, lambda: Complex64) -> Result<MultisetMatch> {
    let r = resolvent::resolvent_matrix(a, lambda)?;
    let recovered = linalg::eigenvalues(&r)?
        .into_iter()
        .map(|mu| {
            if mu.norm() == 0.0 {
                Err(LabError::Eigensolver("zero eigenvalue of a resolvent".into()))
            } else {
                Ok(lambda - mu.inv())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let direct = linalg::eigenvalues(&a.to_dense()?)?;
    Ok(MultisetMatch::build(recovered, direct, MAPPING_TOL, false))
}

/// Convenience for real shifts.
pub fn resolvent_spectrum_check_real(a: &OperatorHandle, lambda: f64) -> Result<MultisetMatch> {
    resolvent_spectrum_check(a, c(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::parse_operator;
    use approx::assert_relative_eq;
    use std::f64::consts::{LN_2, PI};

    fn op(s: &str) -> OperatorHandle {
        parse_operator(s).unwrap()
    }

    #[test]
    fn mapping_examples() {
        let m = spectral_mapping_check(&op("zero:n=3"), 4.0).unwrap();
        assert!(m.pass);
        assert!(m.right.iter().all(|&z| z == c(1.0)));

        let a = OperatorHandle::from_real_rows("d", &[&[0.0, 0.0], &[0.0, LN_2]]).unwrap();
        let m = spectral_mapping_check(&a, 1.0).unwrap();
        assert!(m.pass);
        assert_relative_eq!(m.right[1].re, 2.0, epsilon = 1e-14);

        let m = spectral_mapping_check(&op("jordan:lambda=-1,n=3"), 2.0).unwrap();
        assert!(m.pass, "{}", m.to_json());
        for z in &m.right {
            assert_relative_eq!(z.re, (-2f64).exp(), epsilon = 1e-14);
        }
    }

    #[test]
    fn derivative_examples() {
        let m = derivative_spectral_mapping_check(&op("diag:-1,-2"), 1.0, 1).unwrap();
        assert!(m.pass);
        assert_relative_eq!(m.left[0].re, -(-1f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(m.left[1].re, -2.0 * (-2f64).exp(), epsilon = 1e-15);

        let m = derivative_spectral_mapping_check(&op("zero:n=2"), 1.0, 3).unwrap();
        assert!(m.pass && m.left.iter().chain(&m.right).all(|z| z.norm() == 0.0));

        let m = derivative_spectral_mapping_check(&op("rotation2"), PI, 2).unwrap();
        assert!(m.pass, "{}", m.to_json());
        for z in m.left.iter().chain(&m.right) {
            assert!((z - c(1.0)).norm() < 1e-12);
        }
        assert!(derivative_spectral_mapping_check(&op("rotation2"), 1.0, 5).is_err());
        assert!(derivative_spectral_mapping_check(&op("rotation2"), 0.0, 1).is_err());
    }

    #[test]
    fn resolvent_spectrum_examples() {
        let m = resolvent_spectrum_check_real(&op("zero:n=2"), 2.0).unwrap();
        assert!(m.pass && m.right.iter().all(|&z| z == c(0.5)));
        let m = resolvent_spectrum_check_real(&op("diag:1,3"), 5.0).unwrap();
        assert!(m.pass);
        assert_relative_eq!(m.left[0].re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(m.left[1].re, 0.5, epsilon = 1e-15);
        let lambda = Complex64::new(1.0, 1.0);
        let m = resolvent_spectrum_check(&op("jordan:lambda=0,n=2"), lambda).unwrap();
        assert!(m.pass);
        assert!(m.right.iter().all(|z| (z - lambda.inv()).norm() < 1e-14));
        assert!(resolvent_spectrum_check_real(&op("diag:1,3"), 3.0).is_err());
    }

    #[test]
    fn recovery_reproduces_spectrum() {
        for s in ["diag:-1,-5", "rotation2", "random_dissipative:n=6,seed=42", "jordan:lambda=-1,n=3"] {
            let m = recover_spectrum(&op(s), Complex64::new(1.0, 0.5)).unwrap();
            assert!(m.pass, "{s}: {}", m.to_json());
        }
    }

    #[test]
    fn normal_operators_match_tightly() {
        for s in ["diag:-1,-2,-3", "laplacian1d:n=8,h=0.5", "rotation2"] {
            let m = spectral_mapping_check(&op(s), 0.7).unwrap();
            assert!(m.max_pair_distance <= 1e-10, "{s}: {}", m.max_pair_distance);
        }
    }

    #[test]
    fn greedy_match_reports_unmatched_and_extras() {
        let m = MultisetMatch::build(vec![c(1.0), c(2.0)], vec![c(2.0)], 1e-8, false);
        assert_eq!(m.unmatched, 1);
        assert!(!m.pass);
        let m = MultisetMatch::build(vec![c(2.0)], vec![c(1.0), c(2.0)], 1e-8, true);
        assert!(m.pass && m.extras == 1);
        assert_eq!(m.pairing, vec![(0, 1)]);
    }
}
