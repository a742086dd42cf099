//! Dense complex linear algebra shared by every module.
//!
//! Everything here works on `DMatrix<Complex64>` and uses the Euclidean
//! vector norm with the induced (spectral) operator norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LabError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvector matrices with a condition number above this are treated as
/// defective and the exponential falls back to scaling-and-squaring.
pub const EIGENVECTOR_CONDITION_LIMIT: f64 = 1e8;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `lambda * I - a`.
pub fn shifted(a: &CMatrix, lambda: Complex64) -> CMatrix {
    let mut m = -a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += lambda;
    }
    m
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn vector_norm(x: &CVector) -> f64 {
    x.norm()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &CMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    a.clone().lu().solve(&identity(n))
}

/// `a^n` by sequential multiplication, `a^0 = I`.
pub fn matrix_power(a: &CMatrix, n: usize) -> CMatrix {
    let mut acc = identity(a.nrows());
    for _ in 0..n {
        acc = &acc * a;
    }
    acc
}

pub fn is_upper_triangular(a: &CMatrix) -> bool {
    let zero = Complex64::new(0.0, 0.0);
    (0..a.nrows()).all(|i| (0..i.min(a.ncols())).all(|j| a[(i, j)] == zero))
}

pub fn is_hermitian(a: &CMatrix) -> bool {
    a.is_square() && a == &a.adjoint()
}

fn sort_spectrum(values: &mut [Complex64]) {
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

/// All eigenvalues with multiplicity, sorted by (Re, Im).
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(LabError::InvalidOperator("eigenvalues of a non-square matrix".into()));
    }
    let n = a.nrows();
    let mut values: Vec<Complex64> = if n == 0 {
        Vec::new()
    } else if is_upper_triangular(a) {
        a.diagonal().iter().copied().collect()
    } else if is_hermitian(a) {
        a.clone()
            .symmetric_eigenvalues()
            .iter()
            .map(|&v| c(v))
            .collect()
    } else {
        let schur = a
            .clone()
            .try_schur(f64::EPSILON, 10_000 * n.max(1))
            .ok_or_else(|| LabError::Eigensolver(format!("Schur iteration failed for dim {n}")))?;
        let (_, t) = schur.unpack();
        t.diagonal().iter().copied().collect()
    };
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LabError::Eigensolver("non-finite eigenvalue".into()));
    }
    sort_spectrum(&mut values);
    Ok(values)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Eigen-decomposition `a = V diag(values) V^{-1}` with the condition number
/// of `V`. Eigenvectors come from back-substitution on the Schur form.
pub struct EigenDecomposition {
    pub values: Vec<Complex64>,
    pub vectors: CMatrix,
    pub condition: f64,
}

pub fn eigen_decomposition(a: &CMatrix) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if is_hermitian(a) {
        let eig = a.clone().symmetric_eigen();
        return Ok(EigenDecomposition {
            values: eig.eigenvalues.iter().map(|&v| c(v)).collect(),
            vectors: eig.eigenvectors,
            condition: 1.0,
        });
    }
    let (q, t) = if is_upper_triangular(a) {
        (identity(n), a.clone())
    } else {
        a.clone()
            .try_schur(f64::EPSILON, 10_000 * n.max(1))
            .ok_or_else(|| LabError::Eigensolver(format!("Schur iteration failed for dim {n}")))?
            .unpack()
    };
    let small = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let tkk = t[(k, k)];
        y[(k, k)] = c(1.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for i in (j + 1)..=k {
                s += t[(j, i)] * y[(i, k)];
            }
            let mut d = t[(j, j)] - tkk;
            if d.norm() < small {
                d = c(small);
            }
            y[(j, k)] = -s / d;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 && norm.is_finite() {
            col /= c(norm);
        }
    }
    let condition = if vectors.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        condition_number(&vectors)
    } else {
        f64::INFINITY
    };
    Ok(EigenDecomposition {
        values: t.diagonal().iter().copied().collect(),
        vectors,
        condition,
    })
}

/// `e^{t a}`. Diagonalizable input with a well-conditioned eigenbasis goes
/// through the eigen-decomposition, everything else through
/// scaling-and-squaring on a Taylor core.
pub fn expm(a: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = a.nrows();
    if t == 0.0 || n == 0 {
        return Ok(identity(n));
    }
    if let Ok(eig) = eigen_decomposition(a) {
        if eig.condition < EIGENVECTOR_CONDITION_LIMIT {
            if let Some(vinv) = inverse(&eig.vectors) {
                let mut scaled = eig.vectors.clone();
                for (j, lambda) in eig.values.iter().enumerate() {
                    let e = (lambda * t).exp();
                    for i in 0..n {
                        scaled[(i, j)] *= e;
                    }
                }
                let result = scaled * vinv;
                if result.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Ok(result);
                }
            }
        }
    }
    Ok(expm_scaling_squaring(a, t))
}

/// Scaling-and-squaring with `||t a / 2^s||_F <= 0.5` and a Taylor core
/// truncated once the term falls below 1e-16 relative to the partial sum.
pub fn expm_scaling_squaring(a: &CMatrix, t: f64) -> CMatrix {
    let n = a.nrows();
    let scaled_norm = (a * c(t)).norm();
    let squarings = if scaled_norm > 0.5 {
        (scaled_norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a * c(t / 2f64.powi(squarings));
    let mut sum = identity(n);
    let mut term = identity(n);
    for k in 1..=60 {
        term = &term * &b * c(1.0 / k as f64);
        sum += &term;
        if term.norm() <= 1e-16 * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Deterministic complex Gaussian probes normalized to unit length.
pub fn probe_vectors(dim: usize, count: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v = CVector::from_fn(dim, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            let norm = v.norm();
            if norm > 0.0 {
                v /= c(norm);
            }
            v
        })
        .collect()
}

pub fn canonical_basis(dim: usize) -> Vec<CVector> {
    (0..dim)
        .map(|i| {
            let mut e = CVector::zeros(dim);
            e[i] = c(1.0);
            e
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| c(x)))
    }

    #[test]
    fn triangular_spectrum_is_read_off_the_diagonal() {
        let j = real(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0]);
        assert_eq!(eigenvalues(&j).unwrap(), vec![c(-1.0); 3]);
    }

    #[test]
    fn rotation_spectrum_is_plus_minus_i() {
        let r = real(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ev = eigenvalues(&r).unwrap();
        assert_relative_eq!(ev[0].im.abs(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].im.abs(), 1.0, epsilon = 1e-14);
        assert!(ev[0].im * ev[1].im < 0.0);
    }

    #[test]
    fn jordan_block_is_flagged_defective() {
        let j = real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let eig = eigen_decomposition(&j).unwrap();
        assert!(eig.condition > EIGENVECTOR_CONDITION_LIMIT);
    }

    #[test]
    fn both_exponential_routes_agree() {
        let a = real(3, 3, &[-1.0, 0.5, 0.2, 0.3, -2.0, 0.1, 0.0, 0.4, -0.5]);
        let e1 = expm(&a, 1.3).unwrap();
        let e2 = expm_scaling_squaring(&a, 1.3);
        assert!((e1 - e2).norm() < 1e-13);
    }

    #[test]
    fn nilpotent_exponential_is_exact() {
        let n = real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&n, 3.0).unwrap();
        assert_eq!(e, real(2, 2, &[1.0, 3.0, 0.0, 1.0]));
    }

    #[test]
    fn rank_and_condition() {
        let a = real(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(numerical_rank(&a, 1e-10), 1);
        assert!(condition_number(&a) > 1e12);
        assert_eq!(numerical_rank(&CMatrix::zeros(3, 3), 1e-10), 0);
    }

    #[test]
    fn probes_are_deterministic_unit_vectors() {
        let p = probe_vectors(5, 3, 7);
        let q = probe_vectors(5, 3, 7);
        assert_eq!(p, q);
        for v in &p {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-14);
        }
    }
}
