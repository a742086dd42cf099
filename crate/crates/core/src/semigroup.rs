//! Time-domain approximations of `T(t) = e^{tA}`.
//!
//! Every product formula is a [`ChernoffFamily`]: a one-step map `F(h)` with
//! `F(0) = I` and `F'(0) = A`, raised to the `n`-th power at `h = t/n`.
//! The exponential formula, the Euler product and the Lie-Trotter product
//! are the backward-Euler, forward-Euler and splitting families, so a
//! generic Chernoff product over those families runs the same code.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{self, ContourSpec};
use crate::error::{precondition, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::operator::{OperatorHandle, MAX_DENSE_DIM};
use crate::quadrature::Rule;
use crate::report::{CheckReport, ConvergenceRow, ConvergenceTable};
use crate::resolvent;

/// Largest `||tA||` accepted by the Taylor series.
pub const TAYLOR_NORM_LIMIT: f64 = 20.0;
/// Largest `||tA||` accepted by the Euler product.
pub const EULER_NORM_LIMIT: f64 = 50.0;
const TAYLOR_MAX_TERMS: usize = 1000;

fn dense(a: &OperatorHandle) -> Result<CMatrix> {
    if a.dim() > MAX_DENSE_DIM {
        return Err(precondition(format!("dimension {} exceeds dense limit {MAX_DENSE_DIM}", a.dim())));
    }
    a.to_dense()
}

/// Reference `e^{tA}`.
pub fn expm_oracle(a: &OperatorHandle, t: f64) -> Result<CMatrix> {
    linalg::expm(&dense(a)?, t)
}

/// Partial sums of `Sum (tA)^k / k!` until the term's Frobenius norm drops
/// below `tol`.
pub fn expm_taylor(a: &OperatorHandle, t: f64, tol: f64) -> Result<CMatrix> {
    if !(tol > 0.0) {
        return Err(precondition(format!("tolerance must be positive, got {tol}")));
    }
    let m = dense(a)?;
    let ta = &m * c(t);
    let norm = linalg::spectral_norm(&ta);
    if norm > TAYLOR_NORM_LIMIT {
        return Err(precondition(format!("||tA|| = {norm} exceeds {TAYLOR_NORM_LIMIT}")));
    }
    let n = m.nrows();
    let mut sum = linalg::identity(n);
    let mut term = linalg::identity(n);
    for k in 1..=TAYLOR_MAX_TERMS {
        term = &term * &ta / c(k as f64);
        sum += &term;
        if term.norm() < tol {
            return Ok(sum);
        }
    }
    Err(LabError::NonConvergence { what: "Taylor series", iterations: TAYLOR_MAX_TERMS })
}

/// `A_lambda = lambda^2 R(lambda; A) - lambda I`.
pub fn yosida_generator(a: &OperatorHandle, lambda: Complex64) -> Result<CMatrix> {
    let abscissa = linalg::spectral_abscissa(&dense(a)?)?;
    if lambda.re <= abscissa {
        return Err(precondition(format!("Re lambda = {} must exceed the abscissa {abscissa}", lambda.re)));
    }
    let r = resolvent::resolvent_matrix(a, lambda)?;
    Ok(r * (lambda * lambda) - linalg::identity(a.dim()) * lambda)
}

/// Rows `(lambda, max_t ||e^{tA_lambda} - e^{tA}||)` along real shifts.
pub fn yosida_semigroup_error(a: &OperatorHandle, t_grid: &[f64], lambdas: &[f64]) -> Result<ConvergenceTable> {
    let m = dense(a)?;
    let omega = linalg::spectral_abscissa(&m)?.max(0.0);
    if let Some(l) = lambdas.iter().find(|&&l| !(l > 2.0 * omega)) {
        return Err(precondition(format!("shift {l} must exceed 2 omega = {}", 2.0 * omega)));
    }
    let oracle: Vec<CMatrix> = t_grid.iter().map(|&t| linalg::expm(&m, t)).collect::<Result<_>>()?;
    let rows = lambdas
        .par_iter()
        .map(|&l| -> Result<ConvergenceRow> {
            let gen = yosida_generator(a, c(l))?;
            let mut error: f64 = 0.0;
            for (&t, target) in t_grid.iter().zip(&oracle) {
                error = error.max(linalg::spectral_norm(&(linalg::expm(&gen, t)? - target)));
            }
            Ok(ConvergenceRow { n: l, error })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::new(LimitMethod::Yosida.target(), rows))
}

/// One-step maps `h -> F(h)` for product formulas.
pub trait ChernoffFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;

    /// Dense `F(h)`.
    fn step(&self, h: f64) -> Result<CMatrix>;

    /// `F(h)^n x`.
    fn apply_power(&self, h: f64, n: usize, x: &CMatrix) -> Result<CMatrix> {
        let f = self.step(h)?;
        let mut y = x.clone();
        for _ in 0..n {
            y = &f * &y;
        }
        Ok(y)
    }

    /// `F(h)^n`.
    fn power(&self, h: f64, n: usize) -> Result<CMatrix> {
        self.apply_power(h, n, &linalg::identity(self.dim()))
    }
}

/// `F(h) = e^{hA}`.
#[derive(Debug, Clone)]
pub struct SemigroupStep {
    a: CMatrix,
}

impl SemigroupStep {
    pub fn new(a: &OperatorHandle) -> Result<Self> {
        Ok(SemigroupStep { a: dense(a)? })
    }
}

impl ChernoffFamily for SemigroupStep {
    fn name(&self) -> String {
        "semigroup".into()
    }
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn step(&self, h: f64) -> Result<CMatrix> {
        linalg::expm(&self.a, h)
    }
}

/// `F(h) = (I - hA)^{-1} = (1/h) R(1/h; A)`, applied by shifted solves.
#[derive(Debug, Clone)]
pub struct BackwardEuler {
    a: OperatorHandle,
}

impl BackwardEuler {
    pub fn new(a: &OperatorHandle) -> Self {
        BackwardEuler { a: a.clone() }
    }
}

impl ChernoffFamily for BackwardEuler {
    fn name(&self) -> String {
        "backward-euler".into()
    }
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn step(&self, h: f64) -> Result<CMatrix> {
        self.apply_power(h, 1, &linalg::identity(self.dim()))
    }

    fn apply_power(&self, h: f64, n: usize, x: &CMatrix) -> Result<CMatrix> {
        if h == 0.0 || n == 0 {
            return Ok(x.clone());
        }
        let s = 1.0 / h;
        let shift = c(s);
        let mut y = x.clone();
        if let Some(m) = self.a.dense_data() {
            // I - hA = h (sI - A)
            let lhs = linalg::identity(m.nrows()) - m * c(h);
            if linalg::condition_number(&lhs) > resolvent::CONDITION_LIMIT {
                return Err(LabError::NotInResolventSet(shift));
            }
            let lu = lhs.lu();
            for _ in 0..n {
                y = lu.solve(&y).ok_or(LabError::NotInResolventSet(shift))?;
            }
        } else {
            for _ in 0..n {
                for j in 0..y.ncols() {
                    let col: CVector = y.column(j).into_owned();
                    let next = self.a.solve_shifted(shift, &col)? * shift;
                    y.set_column(j, &next);
                }
            }
        }
        Ok(y)
    }
}

/// `F(h) = I + hA`.
#[derive(Debug, Clone)]
pub struct ForwardEuler {
    a: CMatrix,
}

impl ForwardEuler {
    pub fn new(a: &OperatorHandle) -> Result<Self> {
        Ok(ForwardEuler { a: dense(a)? })
    }
}

impl ChernoffFamily for ForwardEuler {
    fn name(&self) -> String {
        "forward-euler".into()
    }
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn step(&self, h: f64) -> Result<CMatrix> {
        Ok(linalg::identity(self.dim()) + &self.a * c(h))
    }
}

/// `F(h) = I + h(A + hA^2)`: Euler with the perturbation `A_n(t) = (t/n) A^2`.
#[derive(Debug, Clone)]
pub struct PerturbedEuler {
    a: CMatrix,
    a2: CMatrix,
}

impl PerturbedEuler {
    pub fn new(a: &OperatorHandle) -> Result<Self> {
        let a = dense(a)?;
        let a2 = &a * &a;
        Ok(PerturbedEuler { a, a2 })
    }
}

impl ChernoffFamily for PerturbedEuler {
    fn name(&self) -> String {
        "perturbed-euler".into()
    }
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn step(&self, h: f64) -> Result<CMatrix> {
        Ok(linalg::identity(self.dim()) + (&self.a + &self.a2 * c(h)) * c(h))
    }
}

/// `F(h) = (I - hA/2)^{-1} (I + hA/2)`.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    a: CMatrix,
}

impl CrankNicolson {
    pub fn new(a: &OperatorHandle) -> Result<Self> {
        Ok(CrankNicolson { a: dense(a)? })
    }
}

impl ChernoffFamily for CrankNicolson {
    fn name(&self) -> String {
        "crank-nicolson".into()
    }
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn step(&self, h: f64) -> Result<CMatrix> {
        let n = self.dim();
        let half = &self.a * c(0.5 * h);
        let lhs = linalg::identity(n) - &half;
        lhs.lu()
            .solve(&(linalg::identity(n) + half))
            .ok_or_else(|| LabError::NotInResolventSet(c(2.0 / h)))
    }
}

/// `F(h) = e^{hA_1} e^{hA_2}`.
#[derive(Debug, Clone)]
pub struct LieSplitting {
    a1: CMatrix,
    a2: CMatrix,
}

impl LieSplitting {
    pub fn new(a1: &OperatorHandle, a2: &OperatorHandle) -> Result<Self> {
        if a1.dim() != a2.dim() {
            return Err(LabError::DimensionMismatch { expected: a1.dim(), found: a2.dim() });
        }
        Ok(LieSplitting { a1: dense(a1)?, a2: dense(a2)? })
    }

    pub fn sum(&self) -> CMatrix {
        &self.a1 + &self.a2
    }
}

impl ChernoffFamily for LieSplitting {
    fn name(&self) -> String {
        "lie-splitting".into()
    }
    fn dim(&self) -> usize {
        self.a1.nrows()
    }
    fn step(&self, h: f64) -> Result<CMatrix> {
        Ok(linalg::expm(&self.a1, h)? * linalg::expm(&self.a2, h)?)
    }
}

/// Caller-supplied `F`.
pub struct FnFamily<F> {
    name: String,
    dim: usize,
    f: F,
}

impl<F> FnFamily<F>
where
    F: Fn(f64) -> Result<CMatrix> + Send + Sync,
{
    pub fn new(name: impl Into<String>, dim: usize, f: F) -> Self {
        FnFamily { name: name.into(), dim, f }
    }
}

impl<F> fmt::Debug for FnFamily<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnFamily").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl<F> ChernoffFamily for FnFamily<F>
where
    F: Fn(f64) -> Result<CMatrix> + Send + Sync,
{
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn step(&self, h: f64) -> Result<CMatrix> {
        (self.f)(h)
    }
}

fn check_steps(n: usize) -> Result<()> {
    if n == 0 {
        Err(precondition("product needs n >= 1"))
    } else {
        Ok(())
    }
}

/// `[(n/t) R(n/t; A)]^n` by `n` shifted solves per basis column.
pub fn exp_formula(a: &OperatorHandle, t: f64, n: usize) -> Result<CMatrix> {
    check_steps(n)?;
    BackwardEuler::new(a).power(t / n as f64, n)
}

/// `(I + (t/n) A)^n`.
pub fn euler_product(a: &OperatorHandle, t: f64, n: usize) -> Result<CMatrix> {
    check_steps(n)?;
    let family = ForwardEuler::new(a)?;
    let norm = linalg::spectral_norm(&family.a) * t.abs();
    if norm > EULER_NORM_LIMIT {
        return Err(precondition(format!("||tA|| = {norm} exceeds {EULER_NORM_LIMIT}")));
    }
    family.power(t / n as f64, n)
}

/// `[I + (t/n)(A + (t/n) A^2)]^n`.
pub fn perturbed_euler_product(a: &OperatorHandle, t: f64, n: usize) -> Result<CMatrix> {
    check_steps(n)?;
    PerturbedEuler::new(a)?.power(t / n as f64, n)
}

/// `[e^{(t/n)A_1} e^{(t/n)A_2}]^n`.
pub fn lie_trotter(a1: &OperatorHandle, a2: &OperatorHandle, t: f64, n: usize) -> Result<CMatrix> {
    check_steps(n)?;
    LieSplitting::new(a1, a2)?.power(t / n as f64, n)
}

/// Steps at which the consistency defect `||(F(h) - I)/h - A||` is sampled.
pub const CONSISTENCY_STEPS: [f64; 2] = [1e-3, 1e-4];

#[derive(Clone, Debug)]
pub struct ChernoffProduct {
    pub value: CMatrix,
    /// `(h, ||(F(h) - I)/h - A||)` at [`CONSISTENCY_STEPS`].
    pub consistency: Vec<(f64, f64)>,
}

/// `F(t/n)^n` after checking `F(0) = I` and that the consistency defect
/// shrinks from `h = 1e-3` to `h = 1e-4`.
pub fn chernoff_product(f: &dyn ChernoffFamily, a: &OperatorHandle, t: f64, n: usize) -> Result<ChernoffProduct> {
    check_steps(n)?;
    if f.dim() != a.dim() {
        return Err(LabError::DimensionMismatch { expected: a.dim(), found: f.dim() });
    }
    let m = dense(a)?;
    let id = linalg::identity(m.nrows());
    let at_zero = linalg::spectral_norm(&(f.step(0.0)? - &id));
    if at_zero > 1e-12 {
        return Err(precondition(format!("F(0) differs from I by {at_zero}")));
    }
    let consistency: Vec<(f64, f64)> = CONSISTENCY_STEPS
        .iter()
        .map(|&h| Ok((h, linalg::spectral_norm(&((f.step(h)? - &id) / c(h) - &m)))))
        .collect::<Result<_>>()?;
    let floor = 1e-6 * linalg::spectral_norm(&m).max(1.0);
    if consistency[1].1 > floor && consistency[1].1 >= consistency[0].1 {
        return Err(precondition(format!(
            "consistency defect grows: {:.3e} at h=1e-3, {:.3e} at h=1e-4",
            consistency[0].1, consistency[1].1
        )));
    }
    Ok(ChernoffProduct { value: f.power(t / n as f64, n)?, consistency })
}

/// `M N^{n-1} e^{(N-1)n} sqrt(n^2 (N-1)^2 + nN) defect`: bound on
/// `||e^{n(T-I)}x - T^n x||` when `||T^k|| <= M N^k`.
pub fn chernoff_lemma_bound(m: f64, big_n: f64, n: usize, defect: f64) -> Result<f64> {
    if !(m >= 1.0 && big_n >= 1.0 && m.is_finite() && big_n.is_finite()) {
        return Err(precondition(format!("need M >= 1 and N >= 1, got M = {m}, N = {big_n}")));
    }
    if !(defect >= 0.0 && defect.is_finite()) {
        return Err(precondition(format!("defect must be a finite nonnegative number, got {defect}")));
    }
    let nf = n as f64;
    let radical = (nf * nf * (big_n - 1.0).powi(2) + nf * big_n).sqrt();
    Ok(m * big_n.powf(nf - 1.0) * ((big_n - 1.0) * nf).exp() * radical * defect)
}

/// Empirical `||e^{n(T-I)}x - T^n x||` against [`chernoff_lemma_bound`]
/// for each probe, after confirming `||T^k|| <= M N^k` for `k <= n`.
pub fn check_chernoff_lemma(t_op: &CMatrix, m: f64, big_n: f64, n: usize, probes: &[CVector]) -> Result<CheckReport> {
    let dim = t_op.nrows();
    let id = linalg::identity(dim);
    let mut power = id.clone();
    let mut power_ok = true;
    for k in 1..=n {
        power = &power * t_op;
        power_ok &= linalg::spectral_norm(&power) <= m * big_n.powi(k as i32) * (1.0 + 1e-10);
    }
    let lhs = linalg::expm(&(t_op - &id), n as f64)?;
    let mut violations = 0usize;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    for x in probes {
        let empirical = (&lhs * x - &power * x).norm();
        let bound = chernoff_lemma_bound(m, big_n, n, (t_op * x - x).norm())?;
        if empirical > bound * (1.0 + 1e-9) + 1e-13 * x.norm() {
            violations += 1;
        }
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(empirical / bound);
        }
        worst_gap = worst_gap.max(empirical - bound);
    }
    let mut report = CheckReport::new("chernoff_lemma");
    report
        .require("power_bound", power_ok)
        .at_most("violations", violations as f64, 0.0)
        .metric("worst_ratio", worst_ratio)
        .metric("worst_gap", worst_gap)
        .metric("probes", probes.len() as f64);
    Ok(report)
}

fn taylor_remainder_residual(m: &CMatrix, t: f64, n: usize, q: usize, probes: &[CVector]) -> Result<f64> {
    let dim = m.nrows();
    let target = linalg::expm(m, t)?;
    let an = linalg::matrix_power(m, n);
    let rule = Rule::composite(0.0, t, q);
    let factorial: f64 = (1..n).map(|k| k as f64).product();
    let mut integral = CMatrix::zeros(dim, dim);
    for &(u, w) in &rule.points {
        integral += linalg::expm(m, u)? * c(w * (t - u).powi(n as i32 - 1));
    }
    let integral = integral * &an / c(factorial);
    let mut poly = CMatrix::zeros(dim, dim);
    let mut term = linalg::identity(dim);
    for i in 0..n {
        if i > 0 {
            term = &term * m * c(t / i as f64);
        }
        poly += &term;
    }
    let diff = target - poly - integral;
    Ok(probes.iter().map(|x| (&diff * x).norm() / x.norm()).fold(0.0, f64::max))
}

/// Both sides of the Taylor formula with integral remainder on random probes.
/// A failing residual that does not shrink when the node count doubles is
/// reported as under-resolved quadrature.
pub fn taylor_remainder_check(a: &OperatorHandle, t: f64, n: usize, quad_points: usize, seed: u64) -> Result<CheckReport> {
    if n == 0 {
        return Err(precondition("Taylor remainder needs n >= 1"));
    }
    if quad_points == 0 {
        return Err(precondition("quad_points must be positive"));
    }
    let m = dense(a)?;
    let probes = linalg::probe_vectors(m.nrows(), 8, seed);
    let residual = taylor_remainder_residual(&m, t, n, quad_points, &probes)?;
    let tol = 1e-8;
    if residual > tol {
        let refined = taylor_remainder_residual(&m, t, n, 2 * quad_points, &probes)?;
        if refined >= 0.5 * residual {
            return Err(LabError::QuadratureUnderResolved(format!(
                "Taylor remainder residual {residual:.3e} with {quad_points} nodes, {refined:.3e} with {}",
                2 * quad_points
            )));
        }
    }
    let mut report = CheckReport::new("taylor_remainder");
    report
        .at_most("residual", residual, tol)
        .metric("n", n as f64)
        .metric("quad_points", quad_points as f64);
    Ok(report)
}

/// Limit formulas with stable ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitMethod {
    #[serde(rename = "euler")]
    Euler,
    #[serde(rename = "exp-formula")]
    ExpFormula,
    #[serde(rename = "yosida")]
    Yosida,
    #[serde(rename = "trotter")]
    Trotter,
    #[serde(rename = "chernoff")]
    Chernoff,
}

impl LimitMethod {
    pub const ALL: [LimitMethod; 5] = [
        LimitMethod::Euler,
        LimitMethod::ExpFormula,
        LimitMethod::Yosida,
        LimitMethod::Trotter,
        LimitMethod::Chernoff,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            LimitMethod::Euler => "euler",
            LimitMethod::ExpFormula => "exp-formula",
            LimitMethod::Yosida => "yosida",
            LimitMethod::Trotter => "trotter",
            LimitMethod::Chernoff => "chernoff",
        }
    }

    pub fn target(&self) -> String {
        match self {
            LimitMethod::Euler => "(I + (t/n)A)^n -> e^{tA}",
            LimitMethod::ExpFormula => "((n/t)R(n/t;A))^n -> e^{tA}",
            LimitMethod::Yosida => "e^{tA_lambda} -> e^{tA} as lambda -> inf",
            LimitMethod::Trotter => "(e^{(t/n)A1} e^{(t/n)A2})^n -> e^{t(A1+A2)}",
            LimitMethod::Chernoff => "F(t/n)^n -> e^{tA}",
        }
        .to_string()
    }
}

impl std::str::FromStr for LimitMethod {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        LimitMethod::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| LabError::Parse(format!("unknown method '{s}'")))
    }
}

/// Operands of a convergence study.
#[derive(Clone, Debug)]
pub enum LimitProblem {
    Euler(OperatorHandle),
    ExpFormula(OperatorHandle),
    /// The sequence entries are the real shifts `lambda`.
    Yosida(OperatorHandle),
    Trotter(OperatorHandle, OperatorHandle),
    Chernoff(Arc<dyn ChernoffFamily>, OperatorHandle),
}

impl LimitProblem {
    pub fn method(&self) -> LimitMethod {
        match self {
            LimitProblem::Euler(_) => LimitMethod::Euler,
            LimitProblem::ExpFormula(_) => LimitMethod::ExpFormula,
            LimitProblem::Yosida(_) => LimitMethod::Yosida,
            LimitProblem::Trotter(..) => LimitMethod::Trotter,
            LimitProblem::Chernoff(..) => LimitMethod::Chernoff,
        }
    }

    /// Generator whose semigroup is the limit.
    pub fn limit_generator(&self) -> Result<CMatrix> {
        match self {
            LimitProblem::Euler(a) | LimitProblem::ExpFormula(a) | LimitProblem::Yosida(a) | LimitProblem::Chernoff(_, a) => dense(a),
            LimitProblem::Trotter(a1, a2) => Ok(LieSplitting::new(a1, a2)?.sum()),
        }
    }

    pub fn evaluate(&self, t: f64, n: f64) -> Result<CMatrix> {
        let steps = || -> Result<usize> {
            if n >= 1.0 && n.fract() == 0.0 {
                Ok(n as usize)
            } else {
                Err(precondition(format!("product count must be a positive integer, got {n}")))
            }
        };
        match self {
            LimitProblem::Euler(a) => euler_product(a, t, steps()?),
            LimitProblem::ExpFormula(a) => exp_formula(a, t, steps()?),
            LimitProblem::Yosida(a) => linalg::expm(&yosida_generator(a, c(n))?, t),
            LimitProblem::Trotter(a1, a2) => lie_trotter(a1, a2, t, steps()?),
            LimitProblem::Chernoff(f, a) => Ok(chernoff_product(f.as_ref(), a, t, steps()?)?.value),
        }
    }
}

/// `error(n) = max_t ||method(t, n) - e^{tA}||` with a least-squares order.
pub fn converge_table(problem: &LimitProblem, t_grid: &[f64], n_sequence: &[f64]) -> Result<ConvergenceTable> {
    if n_sequence.len() < 3 {
        return Err(precondition("n_sequence needs at least 3 entries"));
    }
    if n_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(precondition("n_sequence must be strictly increasing"));
    }
    if t_grid.is_empty() {
        return Err(precondition("t_grid is empty"));
    }
    let gen = problem.limit_generator()?;
    if let LimitProblem::Yosida(a) = problem {
        return yosida_semigroup_error(a, t_grid, n_sequence);
    }
    let oracle: Vec<CMatrix> = t_grid.iter().map(|&t| linalg::expm(&gen, t)).collect::<Result<_>>()?;
    let rows = n_sequence
        .par_iter()
        .map(|&n| -> Result<ConvergenceRow> {
            let mut error: f64 = 0.0;
            for (&t, target) in t_grid.iter().zip(&oracle) {
                error = error.max(linalg::spectral_norm(&(problem.evaluate(t, n)? - target)));
            }
            Ok(ConvergenceRow { n, error })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::new(problem.method().target(), rows))
}

/// How an evaluator produces `T(t)`.
#[derive(Clone, Debug)]
pub enum EvalMethod {
    Oracle,
    Taylor { tol: f64 },
    Yosida { lambda: Complex64 },
    ExpFormula { n: usize },
    Euler { n: usize },
    Chernoff { family: Arc<dyn ChernoffFamily>, n: usize },
    /// Approximates the semigroup of `A + second`.
    Trotter { second: OperatorHandle, n: usize },
    Dunford { contour: ContourSpec },
    Bromwich { a: f64, y: f64, nodes: usize },
}

#[derive(Clone, Debug)]
pub struct SemigroupEvaluator {
    pub a: OperatorHandle,
    pub method: EvalMethod,
}

impl SemigroupEvaluator {
    pub fn new(a: OperatorHandle, method: EvalMethod) -> Self {
        SemigroupEvaluator { a, method }
    }

    pub fn evaluate(&self, t: f64) -> Result<CMatrix> {
        let a = &self.a;
        match &self.method {
            EvalMethod::Oracle => expm_oracle(a, t),
            EvalMethod::Taylor { tol } => expm_taylor(a, t, *tol),
            EvalMethod::Yosida { lambda } => linalg::expm(&yosida_generator(a, *lambda)?, t),
            EvalMethod::ExpFormula { n } => exp_formula(a, t, *n),
            EvalMethod::Euler { n } => euler_product(a, t, *n),
            EvalMethod::Chernoff { family, n } => Ok(chernoff_product(family.as_ref(), a, t, *n)?.value),
            EvalMethod::Trotter { second, n } => lie_trotter(a, second, t, *n),
            EvalMethod::Dunford { contour } => contour::dunford_exp(a, t, contour),
            EvalMethod::Bromwich { a: line, y, nodes } => {
                if t == 0.0 {
                    return Ok(linalg::identity(a.dim()));
                }
                Ok(contour::bromwich_exp(a, t, *line, *y, *nodes)?.value)
            }
        }
    }

    pub fn apply(&self, t: f64, x: &CVector) -> Result<CVector> {
        Ok(self.evaluate(t)? * x)
    }
}
