//! Resolvents `R(lambda; A) = (lambda I - A)^{-1}`, their identities, the
//! Neumann series and pseudo-resolvent families.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Dyn, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{precondition, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::operator::{self, GrowthEnvelope, OperatorHandle};
use crate::report::CheckReport;

/// Shifts whose condition estimate exceeds this are treated as spectrum.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Largest resolvent power accepted by the Hille-Yosida check.
pub const MAX_POWER: usize = 12;
/// Relative singular-value cut for numerical rank.
pub const RANK_TOL: f64 = 1e-10;
pub const NEUMANN_MAX_TERMS: usize = 10_000;

#[derive(Clone)]
enum Action {
    Lu(Arc<LU<Complex64, Dyn, Dyn>>),
    Matrix(Arc<CMatrix>),
    Shifted(OperatorHandle),
    Singular,
}

/// `R(lambda; A)` at one shift.
#[derive(Clone)]
pub struct ResolventSample {
    pub lambda: Complex64,
    /// `||R(lambda)||`; infinite outside the resolvent set.
    pub norm_estimate: f64,
    pub in_resolvent_set: bool,
    /// 2-norm condition estimate of `lambda I - A`.
    pub condition: f64,
    /// Number of Neumann terms summed, for series-built samples.
    pub terms: Option<usize>,
    dim: usize,
    action: Action,
}

impl fmt::Debug for ResolventSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolventSample")
            .field("lambda", &self.lambda)
            .field("norm_estimate", &self.norm_estimate)
            .field("in_resolvent_set", &self.in_resolvent_set)
            .field("condition", &self.condition)
            .finish()
    }
}

impl ResolventSample {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `R(lambda) b`.
    pub fn apply(&self, b: &CVector) -> Result<CVector> {
        if b.len() != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, found: b.len() });
        }
        match &self.action {
            Action::Lu(lu) => lu.solve(b).ok_or(LabError::NotInResolventSet(self.lambda)),
            Action::Matrix(m) => Ok(m.as_ref() * b),
            Action::Shifted(a) => a.solve_shifted(self.lambda, b),
            Action::Singular => Err(LabError::NotInResolventSet(self.lambda)),
        }
    }

    /// Dense matrix of `R(lambda)`.
    pub fn matrix(&self) -> Result<CMatrix> {
        match &self.action {
            Action::Lu(lu) => lu
                .solve(&linalg::identity(self.dim))
                .ok_or(LabError::NotInResolventSet(self.lambda)),
            Action::Matrix(m) => Ok(m.as_ref().clone()),
            Action::Shifted(_) => {
                if self.dim > operator::MAX_DENSE_DIM {
                    return Err(precondition("resolvent too large to densify"));
                }
                let mut m = CMatrix::zeros(self.dim, self.dim);
                for (j, e) in linalg::canonical_basis(self.dim).iter().enumerate() {
                    m.set_column(j, &self.apply(e)?);
                }
                Ok(m)
            }
            Action::Singular => Err(LabError::NotInResolventSet(self.lambda)),
        }
    }

    fn require_regular(&self) -> Result<()> {
        if self.in_resolvent_set {
            Ok(())
        } else {
            Err(LabError::NotInResolventSet(self.lambda))
        }
    }
}

/// `R(lambda; A)`. Singular shifts come back with `in_resolvent_set = false`.
pub fn resolvent(a: &OperatorHandle, lambda: Complex64) -> ResolventSample {
    let dim = a.dim();
    let singular = |condition: f64| ResolventSample {
        lambda,
        norm_estimate: f64::INFINITY,
        in_resolvent_set: false,
        condition,
        terms: None,
        dim,
        action: Action::Singular,
    };
    if let Some(m) = a.dense_data() {
        let shifted = linalg::shifted(m, lambda);
        let sv = linalg::singular_values(&shifted);
        let (hi, lo) = (sv[0], sv[sv.len() - 1]);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= CONDITION_LIMIT) {
            return singular(condition);
        }
        return ResolventSample {
            lambda,
            norm_estimate: 1.0 / lo,
            in_resolvent_set: true,
            condition,
            terms: None,
            dim,
            action: Action::Lu(Arc::new(shifted.lu())),
        };
    }
    if !a.has_shifted_solver() {
        return match a.to_dense().and_then(|m| OperatorHandle::from_dense(a.label(), m)) {
            Ok(dense) => resolvent(&dense, lambda),
            Err(_) => singular(f64::INFINITY),
        };
    }
    let op = a.as_matrix_free().expect("matrix-free operator");
    // ||R||^2 is the top eigenvalue of R^* R
    let gram = |x: &CVector| -> Option<CVector> {
        let y = op.solve_shifted(lambda, x).ok()?;
        op.solve_shifted_adjoint(lambda, &y).ok()
    };
    let probe = CVector::from_element(dim, c(1.0));
    if gram(&probe).is_none() {
        return singular(f64::INFINITY);
    }
    let norm = operator::power_iteration(dim, |x| gram(x).unwrap_or_else(|| CVector::zeros(dim)), 1e-8)
        .map(|(v, _)| v.sqrt())
        .unwrap_or(f64::INFINITY);
    let shifted_norm = op.norm_upper_bound().unwrap_or(f64::INFINITY) + lambda.norm();
    let condition = shifted_norm * norm;
    if !(condition <= CONDITION_LIMIT) {
        return singular(condition);
    }
    ResolventSample {
        lambda,
        norm_estimate: norm,
        in_resolvent_set: true,
        condition,
        terms: None,
        dim,
        action: Action::Shifted(a.clone()),
    }
}

/// Dense `R(lambda; A)`, failing outside the resolvent set.
pub fn resolvent_matrix(a: &OperatorHandle, lambda: Complex64) -> Result<CMatrix> {
    let r = resolvent(a, lambda);
    r.require_regular()?;
    r.matrix()
}

fn identity_tolerance(norm_l: f64, norm_m: f64) -> f64 {
    1e-9 * (norm_l * norm_m).max(1.0)
}

/// Residuals of `R(l) - R(m) = (m - l) R(l) R(m)` and of `R(l) R(m) = R(m) R(l)`.
pub fn check_resolvent_identity(a: &OperatorHandle, lambda: Complex64, mu: Complex64) -> Result<CheckReport> {
    let rl = resolvent(a, lambda);
    let rm = resolvent(a, mu);
    rl.require_regular()?;
    rm.require_regular()?;
    let (ml, mm) = (rl.matrix()?, rm.matrix()?);
    let identity = linalg::spectral_norm(&(&ml - &mm - (&ml * &mm) * (mu - lambda)));
    let commutation = linalg::spectral_norm(&(&ml * &mm - &mm * &ml));
    let tol = identity_tolerance(rl.norm_estimate, rm.norm_estimate);
    let mut report = CheckReport::new("resolvent_identity");
    report
        .at_most("identity", identity, tol)
        .at_most("commutation", commutation, tol)
        .metric("norm_r_lambda", rl.norm_estimate)
        .metric("norm_r_mu", rm.norm_estimate);
    Ok(report)
}

/// `Sum_k A^k / lambda^{k+1}`, stopped once the bound `||A||^K / |lambda|^{K+1}`
/// drops below `tol` or a power of `A` vanishes.
///
/// Accepts `|lambda| >= 1.01 ||A||`, and any nonzero `lambda` when `A` is
/// nilpotent (the series is then finite).
pub fn neumann_resolvent(a: &OperatorHandle, lambda: Complex64, tol: f64) -> Result<ResolventSample> {
    if !(tol > 0.0) {
        return Err(precondition(format!("tolerance must be positive, got {tol}")));
    }
    if lambda.norm() == 0.0 {
        return Err(precondition("Neumann series needs lambda != 0"));
    }
    let m = a.to_dense()?;
    let dim = m.nrows();
    let norm = linalg::spectral_norm(&m);
    let nilpotent = linalg::matrix_power(&m, dim).iter().all(|z| *z == c(0.0));
    if !nilpotent && lambda.norm() < 1.01 * norm {
        return Err(precondition(format!(
            "|lambda| = {} must be at least 1.01 ||A|| = {}",
            lambda.norm(),
            1.01 * norm
        )));
    }
    let ratio = norm / lambda.norm();
    let mut sum = CMatrix::zeros(dim, dim);
    let mut power = linalg::identity(dim);
    let mut lambda_pow = lambda;
    let mut bound = 1.0 / lambda.norm();
    let mut terms = 0;
    loop {
        sum += &power / lambda_pow;
        terms += 1;
        power = &power * &m;
        bound *= ratio;
        if bound < tol || power.iter().all(|z| *z == c(0.0)) {
            break;
        }
        if terms >= NEUMANN_MAX_TERMS {
            return Err(LabError::NonConvergence { what: "Neumann series", iterations: terms });
        }
        lambda_pow *= lambda;
    }
    let norm_estimate = linalg::spectral_norm(&sum);
    Ok(ResolventSample {
        lambda,
        norm_estimate,
        in_resolvent_set: true,
        condition: linalg::condition_number(&sum),
        terms: Some(terms),
        dim,
        action: Action::Matrix(Arc::new(sum)),
    })
}

/// Finite family `lambda -> R_lambda` of operators on `C^dim`.
#[derive(Clone, Debug)]
pub struct PseudoResolventFamily {
    pub samples: Vec<(Complex64, CMatrix)>,
}

impl PseudoResolventFamily {
    pub fn new(samples: Vec<(Complex64, CMatrix)>) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.1.nrows());
        if samples.iter().any(|(_, m)| m.nrows() != dim || m.ncols() != dim) {
            return Err(precondition("family members must share one square shape"));
        }
        Ok(PseudoResolventFamily { samples })
    }

    /// Resolvents of `a` at the given shifts.
    pub fn from_operator(a: &OperatorHandle, lambdas: &[Complex64]) -> Result<Self> {
        let samples = lambdas
            .iter()
            .map(|&l| resolvent_matrix(a, l).map(|m| (l, m)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.1.nrows())
    }

    /// `lambda I - R_lambda^{-1}` for every member, when all are invertible.
    pub fn reconstructions(&self) -> Option<Vec<CMatrix>> {
        self.samples
            .iter()
            .map(|(l, r)| {
                if linalg::numerical_rank(r, RANK_TOL) < r.nrows() {
                    return None;
                }
                linalg::inverse(r).map(|inv| linalg::shifted(&inv, *l))
            })
            .collect()
    }
}

/// Pairwise identity, commutation, constant rank and, for injective
/// families, agreement of the generators `lambda I - R_lambda^{-1}`.
pub fn check_pseudo_resolvent(family: &PseudoResolventFamily) -> Result<CheckReport> {
    if family.samples.len() < 2 {
        return Err(precondition("pseudo-resolvent check needs at least 2 samples"));
    }
    let norms: Vec<f64> = family.samples.iter().map(|(_, r)| linalg::spectral_norm(r)).collect();
    let mut worst_identity: f64 = 0.0;
    let mut worst_commutation: f64 = 0.0;
    let mut identity_ok = true;
    let mut commutation_ok = true;
    for i in 0..family.samples.len() {
        for j in (i + 1)..family.samples.len() {
            let (l, rl) = &family.samples[i];
            let (m, rm) = &family.samples[j];
            let scale = 1e-9 * norms[i] * norms[j];
            let prod = rl * rm;
            let id = linalg::spectral_norm(&(rl - rm - &prod * (m - l)));
            let cm = linalg::spectral_norm(&(&prod - rm * rl));
            identity_ok &= id <= scale;
            commutation_ok &= cm <= scale;
            worst_identity = worst_identity.max(id);
            worst_commutation = worst_commutation.max(cm);
        }
    }
    let ranks: Vec<usize> = family
        .samples
        .iter()
        .map(|(_, r)| linalg::numerical_rank(r, RANK_TOL))
        .collect();
    let mut report = CheckReport::new("pseudo_resolvent");
    report
        .require("identity", identity_ok)
        .require("commutation", commutation_ok)
        .require("constant_rank", ranks.iter().all(|&r| r == ranks[0]))
        .metric("identity_residual", worst_identity)
        .metric("commutation_residual", worst_commutation)
        .metric("rank", ranks[0] as f64);
    match family.reconstructions() {
        Some(gens) => {
            let spread = gens
                .iter()
                .skip(1)
                .map(|g| linalg::spectral_norm(&(g - &gens[0])))
                .fold(0.0, f64::max);
            let scale = linalg::spectral_norm(&gens[0]).max(1.0);
            report.at_most("reconstruction", spread, 1e-8 * scale);
        }
        None => {
            report.note("family is not injective; no generator reconstruction");
        }
    }
    Ok(report)
}

/// Generator recovered from the first member of an injective family.
pub fn reconstruct_generator(family: &PseudoResolventFamily) -> Option<CMatrix> {
    family.reconstructions().and_then(|g| g.into_iter().next())
}

/// `||R(lambda)^n|| <= M / (Re lambda - omega)^n` for every grid shift and
/// `n <= n_max`; the report carries the worst ratio.
pub fn check_hille_yosida_bounds(
    a: &OperatorHandle,
    env: &GrowthEnvelope,
    lambda_grid: &[Complex64],
    n_max: usize,
) -> Result<CheckReport> {
    if n_max == 0 || n_max > MAX_POWER {
        return Err(precondition(format!("n_max must be in 1..={MAX_POWER}, got {n_max}")));
    }
    if let Some(l) = lambda_grid.iter().find(|l| l.re <= env.omega) {
        return Err(precondition(format!("shift {l} has Re <= omega = {}", env.omega)));
    }
    let ratios: Vec<f64> = lambda_grid
        .par_iter()
        .map(|&l| -> Result<f64> {
            let r = resolvent_matrix(a, l)?;
            let gap = l.re - env.omega;
            let mut power = r.clone();
            let mut worst: f64 = 0.0;
            for n in 1..=n_max {
                if n > 1 {
                    power = &power * &r;
                }
                let bound = env.m / gap.powi(n as i32);
                worst = worst.max(linalg::spectral_norm(&power) / bound);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let mut report = CheckReport::new("hille_yosida_bounds");
    report
        .at_most("worst_ratio", worst, 1.0 + 1e-8)
        .metric("shifts", lambda_grid.len() as f64)
        .metric("n_max", n_max as f64)
        .metric("m", env.m)
        .metric("omega", env.omega);
    Ok(report)
}

/// Central difference of `lambda -> R(lambda)` against `-R(lambda)^2`,
/// step `1e-5 max(1, |lambda|)`; returns the relative error.
pub fn resolvent_derivative_error(a: &OperatorHandle, lambda: Complex64) -> Result<f64> {
    let h = 1e-5 * lambda.norm().max(1.0);
    let r = resolvent_matrix(a, lambda)?;
    let plus = resolvent_matrix(a, lambda + h)?;
    let minus = resolvent_matrix(a, lambda - h)?;
    let fd = (plus - minus) / c(2.0 * h);
    let exact = -(&r * &r);
    Ok(linalg::spectral_norm(&(fd - &exact)) / linalg::spectral_norm(&exact).max(f64::MIN_POSITIVE))
}

/// Twelve shifts right of `omega`: three real parts times four imaginary parts.
pub fn default_shift_grid(omega: f64) -> Vec<Complex64> {
    let mut grid = Vec::with_capacity(12);
    for re in [0.25, 1.0, 4.0] {
        for im in [0.0, 0.5, -2.0, 8.0] {
            grid.push(Complex64::new(omega + re, im));
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::parse_operator;
    use approx::assert_relative_eq;

    fn op(s: &str) -> OperatorHandle {
        parse_operator(s).unwrap()
    }

    #[test]
    fn zero_operator_resolvent_is_identity() {
        let r = resolvent(&op("zero:n=2"), c(1.0));
        assert!(r.in_resolvent_set);
        assert!((r.matrix().unwrap() - linalg::identity(2)).norm() < 1e-15);
    }

    #[test]
    fn nilpotent_resolvent_is_finite_series() {
        let r = resolvent(&op("nilpotent_shift:n=2"), c(2.0)).matrix().unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.25), c(0.0), c(0.5)]);
        assert!((r - expected).norm() < 1e-15);
    }

    #[test]
    fn dissipative_resolvent_residual() {
        let a = op("random_dissipative:n=6,seed=3");
        let dense = a.dense_data().unwrap();
        let lambda = Complex64::new(0.5, 2.0);
        let r = resolvent(&a, lambda);
        for b in linalg::probe_vectors(6, 10, 5) {
            let y = r.apply(&b).unwrap();
            assert!((linalg::shifted(dense, lambda) * y - &b).norm() <= 1e-10 * b.norm());
        }
    }

    #[test]
    fn singular_shift_is_reported_not_raised() {
        let r = resolvent(&op("diag:1,2"), c(2.0));
        assert!(!r.in_resolvent_set);
        assert!(r.apply(&CVector::zeros(2)).is_err());
        let r = resolvent(&op("laplacian1d:n=1,h=1"), c(-2.0));
        assert!(!r.in_resolvent_set);
    }

    #[test]
    fn matrix_free_resolvent_matches_dense() {
        let a = op("laplacian1d:n=8,h=0.5");
        let dense = OperatorHandle::from_dense("d", a.to_dense().unwrap()).unwrap();
        let lambda = Complex64::new(1.0, 1.0);
        let rf = resolvent(&a, lambda);
        let rd = resolvent(&dense, lambda);
        assert!((rf.matrix().unwrap() - rd.matrix().unwrap()).norm() < 1e-12);
        assert_relative_eq!(rf.norm_estimate, rd.norm_estimate, max_relative = 1e-6);
    }

    #[test]
    fn identity_examples() {
        let a = op("diag:-1,-2");
        let rep = check_resolvent_identity(&a, c(1.0), c(1.0)).unwrap();
        assert_eq!(rep.residual("identity").unwrap().value, 0.0);
        let rep = check_resolvent_identity(&a, c(1.0), c(2.0)).unwrap();
        assert!(rep.residual("identity").unwrap().value <= 1e-12);
        let rep = check_resolvent_identity(&op("jordan:lambda=0,n=3"), Complex64::new(1.0, 1.0), Complex64::new(2.0, -1.0)).unwrap();
        assert!(rep.pass);
        assert!(check_resolvent_identity(&a, c(-1.0), c(2.0)).is_err());
    }

    #[test]
    fn neumann_examples() {
        let z = neumann_resolvent(&op("zero:n=3"), Complex64::new(0.0, 2.0), 1e-12).unwrap();
        assert_eq!(z.terms, Some(1));
        assert!((z.matrix().unwrap() - linalg::identity(3) / Complex64::new(0.0, 2.0)).norm() == 0.0);

        let a = op("nilpotent_shift:n=3");
        let s = neumann_resolvent(&a, c(1.0), 1e-12).unwrap();
        assert_eq!(s.terms, Some(3));
        let m = a.dense_data().unwrap();
        assert_eq!(s.matrix().unwrap(), linalg::identity(3) + m + m * m);

        let b = op("random_bounded:n=5,seed=7,cap=0.8");
        let s = neumann_resolvent(&b, c(2.0), 1e-10).unwrap();
        let lu = resolvent_matrix(&b, c(2.0)).unwrap();
        assert!(linalg::spectral_norm(&(s.matrix().unwrap() - lu)) <= 1e-9);

        assert!(neumann_resolvent(&b, c(0.8), 1e-10).is_err());
    }

    #[test]
    fn pseudo_resolvent_examples() {
        let a = op("diag:-1,-2");
        let fam = PseudoResolventFamily::from_operator(&a, &[c(1.0), c(2.0), c(3.0)]).unwrap();
        let rep = check_pseudo_resolvent(&fam).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
        assert!(rep.metrics["identity_residual"] <= 1e-10);
        let g = reconstruct_generator(&fam).unwrap();
        assert!((g - a.dense_data().unwrap()).norm() <= 1e-9);

        let zero = PseudoResolventFamily::new(vec![(c(1.0), CMatrix::zeros(2, 2)), (c(2.0), CMatrix::zeros(2, 2))]).unwrap();
        let rep = check_pseudo_resolvent(&zero).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.metrics["rank"], 0.0);
        assert!(rep.residual("reconstruction").is_none());

        let mut bad = fam.clone();
        bad.samples[1].1 += linalg::identity(2) * c(0.1);
        let rep = check_pseudo_resolvent(&bad).unwrap();
        assert!(!rep.pass);
        assert!(rep.metrics["identity_residual"] > 1e-2);

        let one = PseudoResolventFamily::new(vec![(c(1.0), CMatrix::zeros(1, 1))]).unwrap();
        assert!(check_pseudo_resolvent(&one).is_err());
    }

    #[test]
    fn hille_yosida_examples() {
        let neg = op("identity:n=3").map_dense("-I", |m| -m).unwrap();
        let env = GrowthEnvelope::contraction();
        let rep = check_hille_yosida_bounds(&neg, &env, &[c(2.0)], 4).unwrap();
        assert!(rep.pass);
        // ||R(2)^n|| 2^n = (2/3)^n, largest at n = 1
        assert_relative_eq!(rep.residual("worst_ratio").unwrap().value, 2.0 / 3.0, epsilon = 1e-14);

        let l = Complex64::new(1.0, 1.0);
        let rep = check_hille_yosida_bounds(&op("diag:-1,-5"), &env, &[l], 3).unwrap();
        let expected = 1.0 / (l + 1.0).norm();
        assert_relative_eq!(rep.residual("worst_ratio").unwrap().value, expected, epsilon = 1e-14);

        let a = op("random_dissipative:n=8,seed=2");
        let env = operator::estimate_growth_envelope(&a, 5.0, 32).unwrap();
        let rep = check_hille_yosida_bounds(&a, &env, &default_shift_grid(env.omega), 6).unwrap();
        assert!(rep.pass, "{}", rep.to_json());

        assert!(check_hille_yosida_bounds(&a, &env, &[c(env.omega)], 2).is_err());
        assert!(check_hille_yosida_bounds(&a, &env, &[c(1.0)], 13).is_err());
    }

    #[test]
    fn derivative_matches_minus_square() {
        let a = op("random_dissipative:n=5,seed=9");
        assert!(resolvent_derivative_error(&a, Complex64::new(1.0, 0.5)).unwrap() <= 1e-6);
    }
}
