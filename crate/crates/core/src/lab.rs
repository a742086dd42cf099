//! Trotter-Kato experiments: strong resolvent convergence of a generator
//! sequence against convergence of the semigroups uniformly on `[0, t0]`,
//! and the identity linking the two.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{precondition, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::operator::{GeneratorSpec, OperatorHandle, SpecArgs, DEFAULT_SEED};
use crate::quadrature::Rule;
use crate::report::{CheckReport, ConvergenceRow, ConvergenceTable, EXACT_FLOOR};
use crate::resolvent;
use crate::semigroup;

/// Points of the uniform grid standing in for "uniformly on `[0, t0]`".
pub const T_GRID_SIZE: usize = 33;
/// Errors of the two tables may differ by at most this factor.
pub const TK_ERROR_FACTOR: f64 = 100.0;
/// Empirical orders of the two tables may differ by at most this much.
pub const TK_ORDER_GAP: f64 = 0.3;
const BRIDGE_PROBES: usize = 3;

/// What the members converge to.
#[derive(Clone, Debug)]
pub enum SequenceLimit {
    Operator(OperatorHandle),
    /// Dirichlet Laplacian on `(0, 1)`, probed with `sin(k pi x)` whose
    /// resolvent and semigroup are known in closed form.
    DirichletLaplacian,
}

#[derive(Clone, Debug)]
pub struct GeneratorSequence {
    pub items: Vec<OperatorHandle>,
    pub limit: SequenceLimit,
    pub labels: Vec<String>,
    /// Refinement parameter reported in the `n` column.
    pub params: Vec<f64>,
    pub seed: u64,
}

fn default_base() -> Result<OperatorHandle> {
    OperatorHandle::from_real_rows("diag:-1,-2", &[&[-1.0, 0.0], &[0.0, -2.0]])
}

impl GeneratorSequence {
    pub fn new(items: Vec<OperatorHandle>, limit: OperatorHandle, params: Vec<f64>, seed: u64) -> Result<Self> {
        if items.is_empty() || items.len() != params.len() {
            return Err(precondition("sequence needs one parameter per member"));
        }
        for item in &items {
            if item.dim() != limit.dim() {
                return Err(LabError::DimensionMismatch { expected: limit.dim(), found: item.dim() });
            }
        }
        let labels = items.iter().map(|i| i.label().to_string()).collect();
        Ok(GeneratorSequence { items, limit: SequenceLimit::Operator(limit), labels, params, seed })
    }

    /// `A + n^{-p} B` for `n` in 10, 20, 40, 80, 160. `B` is `rotation2`
    /// for the default 2x2 base; with a `seed` (or another base) it is a
    /// seeded random matrix of norm 1.
    pub fn perturbation(base: &OperatorHandle, p: f64, b_seed: Option<u64>) -> Result<Self> {
        let a = base.to_dense()?;
        let n = a.nrows();
        let b = match b_seed {
            None if n == 2 => GeneratorSpec::Rotation2.build()?,
            s => GeneratorSpec::RandomBounded { n, seed: s.unwrap_or(DEFAULT_SEED), norm_cap: 1.0 }.build()?,
        }
        .to_dense()?;
        let params = vec![10.0, 20.0, 40.0, 80.0, 160.0];
        let items = params
            .iter()
            .map(|&k: &f64| OperatorHandle::from_dense(format!("A + n^-{p} B, n={k}"), &a + &b * c(k.powf(-p))))
            .collect::<Result<_>>()?;
        Self::new(items, base.clone(), params, b_seed.unwrap_or(DEFAULT_SEED))
    }

    /// Yosida approximants `A_lambda` for `lambda = 2^k`, `k = 1..=8`,
    /// starting above the spectral abscissa.
    pub fn yosida(base: &OperatorHandle) -> Result<Self> {
        let abscissa = linalg::spectral_abscissa(&base.to_dense()?)?;
        let params: Vec<f64> = (1..=12).map(|k| 2f64.powi(k)).filter(|&l| l > 2.0 * abscissa.max(0.0)).take(8).collect();
        let items = params
            .iter()
            .map(|&l| OperatorHandle::from_dense(format!("yosida lambda={l}"), semigroup::yosida_generator(base, c(l))?))
            .collect::<Result<_>>()?;
        Self::new(items, base.clone(), params, DEFAULT_SEED)
    }

    pub fn constant(base: &OperatorHandle) -> Result<Self> {
        let params = vec![1.0, 2.0, 4.0, 8.0];
        Self::new(vec![base.clone(); params.len()], base.clone(), params, DEFAULT_SEED)
    }

    /// `A + N` for every `n` with `N` the unit corner nilpotent: the
    /// members stay away from the limit.
    pub fn adversarial(base: &OperatorHandle) -> Result<Self> {
        let a = base.to_dense()?;
        let n = a.nrows();
        if n < 2 {
            return Err(precondition("adversarial family needs dim >= 2"));
        }
        let mut nil = CMatrix::zeros(n, n);
        nil[(0, n - 1)] = c(1.0);
        let params = vec![10.0, 20.0, 40.0, 80.0, 160.0];
        let member = OperatorHandle::from_dense("A + N", a + nil)?;
        Self::new(vec![member; params.len()], base.clone(), params, DEFAULT_SEED)
    }

    /// Dirichlet Laplacians on `2^{k+2} - 1` interior points, `k < levels`.
    pub fn laplacian_refine(levels: usize) -> Result<Self> {
        if !(2..=8).contains(&levels) {
            return Err(precondition(format!("levels must be in 2..=8, got {levels}")));
        }
        let mut items = Vec::new();
        let mut params = Vec::new();
        for k in 0..levels {
            let n = (1usize << (k + 2)) - 1;
            let h = 1.0 / (n + 1) as f64;
            items.push(GeneratorSpec::Laplacian1d { n, h }.build()?);
            params.push((n + 1) as f64);
        }
        let labels = items.iter().map(|i| i.label().to_string()).collect();
        Ok(GeneratorSequence { items, limit: SequenceLimit::DirichletLaplacian, labels, params, seed: DEFAULT_SEED })
    }

    /// Family specs: `perturb:p=1[,seed=2]`, `yosida`, `constant`,
    /// `adversarial`, `laplacian-refine:levels=5`. `base` defaults to
    /// `diag(-1, -2)`; the refinement family ignores it.
    pub fn parse(spec: &str, base: Option<&OperatorHandle>) -> Result<Self> {
        let (name, args) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
        let args = SpecArgs::parse(args);
        let base = match base {
            Some(b) => b.clone(),
            None => default_base()?,
        };
        match name {
            "perturb" => {
                let p = args.real("p", 0)?.unwrap_or(1.0);
                if !(p > 0.0) {
                    return Err(LabError::Parse(format!("perturbation power must be positive, got {p}")));
                }
                let seed = args
                    .get("seed", 1)
                    .map(|s| s.parse::<u64>().map_err(|_| LabError::Parse(format!("bad seed '{s}'"))))
                    .transpose()?;
                Self::perturbation(&base, p, seed)
            }
            "yosida" => Self::yosida(&base),
            "constant" => Self::constant(&base),
            "adversarial" => Self::adversarial(&base),
            "laplacian-refine" => {
                let levels = args.real("levels", 0)?.unwrap_or(5.0);
                if levels.fract() != 0.0 || levels < 0.0 {
                    return Err(LabError::Parse(format!("bad level count {levels}")));
                }
                Self::laplacian_refine(levels as usize)
            }
            other => Err(LabError::Parse(format!("unknown family '{other}'"))),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn target(&self, what: &str) -> String {
        let limit = match &self.limit {
            SequenceLimit::Operator(a) => a.label().to_string(),
            SequenceLimit::DirichletLaplacian => "dirichlet laplacian".to_string(),
        };
        format!("{what} -> {limit}")
    }

    fn limit_abscissa(&self) -> Result<f64> {
        match &self.limit {
            SequenceLimit::Operator(a) => linalg::spectral_abscissa(&a.to_dense()?),
            SequenceLimit::DirichletLaplacian => Ok(-PI * PI),
        }
    }

    fn check_shift(&self, lambda: Complex64) -> Result<()> {
        let mut worst = self.limit_abscissa()?;
        for item in &self.items {
            worst = worst.max(linalg::spectral_abscissa(&item.to_dense()?)?);
        }
        if lambda.re <= worst {
            return Err(precondition(format!("Re lambda = {} must exceed the growth bound {worst}", lambda.re)));
        }
        Ok(())
    }

    /// Seeded random probes, or sampled sine modes `k = 1..=count` on the
    /// grid of member `i`.
    fn probes(&self, i: usize, count: usize) -> Vec<CVector> {
        match &self.limit {
            SequenceLimit::Operator(a) => linalg::probe_vectors(a.dim(), count, self.seed),
            SequenceLimit::DirichletLaplacian => {
                let n = self.items[i].dim();
                (1..=count).map(|k| sine_mode(n, k)).collect()
            }
        }
    }
}

fn sine_mode(n: usize, k: usize) -> CVector {
    let h = 1.0 / (n + 1) as f64;
    CVector::from_iterator(n, (1..=n).map(|j| c((k as f64 * PI * j as f64 * h).sin())))
}

fn relative_error(approx: &CVector, exact: &CVector, x: &CVector) -> f64 {
    // the grid factor sqrt(h) cancels in the ratio
    (approx - exact).norm() / x.norm()
}

/// Rows `(n, max_x ||R(lambda; A_n)x - R(lambda; A)x|| / ||x||)`.
pub fn resolvent_convergence_table(seq: &GeneratorSequence, lambda: Complex64, probes: usize) -> Result<ConvergenceTable> {
    if probes == 0 {
        return Err(precondition("need at least one probe"));
    }
    seq.check_shift(lambda)?;
    let limit_r = match &seq.limit {
        SequenceLimit::Operator(a) => Some(resolvent::resolvent_matrix(a, lambda)?),
        SequenceLimit::DirichletLaplacian => None,
    };
    let errors: Vec<f64> = (0..seq.len())
        .into_par_iter()
        .map(|i| {
            let rn = resolvent::resolvent_matrix(&seq.items[i], lambda)?;
            let mut worst: f64 = 0.0;
            for (k, x) in seq.probes(i, probes).iter().enumerate() {
                let exact = match &limit_r {
                    Some(r) => r * x,
                    None => x * (lambda + (PI * (k + 1) as f64).powi(2)).inv(),
                };
                worst = worst.max(relative_error(&(&rn * x), &exact, x));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(table(seq, "resolvent", errors))
}

/// Rows `(n, max over t in a uniform grid of [0, t0] and probes x of
/// ||e^{tA_n}x - e^{tA}x|| / ||x||)`.
pub fn semigroup_convergence_table(seq: &GeneratorSequence, t0: f64, t_grid_size: usize, probes: usize) -> Result<ConvergenceTable> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(precondition(format!("t0 must be positive, got {t0}")));
    }
    if t_grid_size < 2 || probes == 0 {
        return Err(precondition("need at least two grid points and one probe"));
    }
    let ts: Vec<f64> = (0..t_grid_size).map(|k| t0 * k as f64 / (t_grid_size - 1) as f64).collect();
    let limit_t: Option<Vec<CMatrix>> = match &seq.limit {
        SequenceLimit::Operator(a) => {
            let m = a.to_dense()?;
            Some(ts.iter().map(|&t| linalg::expm(&m, t)).collect::<Result<_>>()?)
        }
        SequenceLimit::DirichletLaplacian => None,
    };
    let errors: Vec<f64> = (0..seq.len())
        .into_par_iter()
        .map(|i| {
            let m = seq.items[i].to_dense()?;
            let xs = seq.probes(i, probes);
            let mut worst: f64 = 0.0;
            for (j, &t) in ts.iter().enumerate() {
                let tn = linalg::expm(&m, t)?;
                for (k, x) in xs.iter().enumerate() {
                    let exact = match &limit_t {
                        Some(l) => &l[j] * x,
                        None => x * c((-(PI * (k + 1) as f64).powi(2) * t).exp()),
                    };
                    worst = worst.max(relative_error(&(&tn * x), &exact, x));
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(table(seq, "semigroup", errors))
}

fn table(seq: &GeneratorSequence, what: &str, errors: Vec<f64>) -> ConvergenceTable {
    let rows = seq.params.iter().zip(errors).map(|(&n, error)| ConvergenceRow { n, error }).collect();
    ConvergenceTable::new(seq.target(what), rows)
}

fn stagnates(t: &ConvergenceTable) -> bool {
    let e = t.errors();
    match (e.first(), e.last()) {
        (Some(&first), Some(&last)) => first > EXACT_FLOOR && last >= 0.5 * first,
        _ => false,
    }
}

/// Both convergence notions computed side by side: errors within a factor
/// [`TK_ERROR_FACTOR`] row by row and empirical orders within
/// [`TK_ORDER_GAP`]. When both tables stagnate the check passes with a
/// `no_convergence` flag.
pub fn check_tk_equivalence(seq: &GeneratorSequence, lambda: Complex64, t0: f64) -> Result<CheckReport> {
    let probes = 4;
    let rt = resolvent_convergence_table(seq, lambda, probes)?;
    let st = semigroup_convergence_table(seq, t0, T_GRID_SIZE, probes)?;
    let worst_ratio = rt
        .errors()
        .iter()
        .zip(st.errors())
        .map(|(&a, b)| {
            let (a, b) = (a.max(EXACT_FLOOR), b.max(EXACT_FLOOR));
            a.max(b) / a.min(b)
        })
        .fold(1.0, f64::max);
    let mut report = CheckReport::new("trotter_kato_equivalence");
    report.at_most("error_ratio", worst_ratio, TK_ERROR_FACTOR);
    let no_convergence = stagnates(&rt) && stagnates(&st);
    if no_convergence {
        report.metric("no_convergence", 1.0).note("no-convergence: both error sequences stagnate");
    } else {
        report.metric("no_convergence", 0.0);
        match (rt.empirical_order, st.empirical_order) {
            (Some(p), Some(q)) => {
                report.at_most("order_gap", (p - q).abs(), TK_ORDER_GAP);
            }
            (None, None) if rt.is_exact() && st.is_exact() => {
                report.note("both sequences exact");
            }
            _ => {
                report.require("orders_defined", false);
            }
        }
    }
    if let Some(p) = rt.empirical_order {
        report.metric("resolvent_order", p);
    }
    if let Some(q) = st.empirical_order {
        report.metric("semigroup_order", q);
    }
    report.metric("worst_error_ratio", worst_ratio);
    Ok(report)
}

struct BridgeSides {
    ma: CMatrix,
    mb: CMatrix,
    left_op: CMatrix,
    diff: CMatrix,
    probes: Vec<CVector>,
}

impl BridgeSides {
    fn new(a: &OperatorHandle, b: &OperatorHandle, lambda: Complex64, t: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(LabError::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(precondition(format!("need t >= 0, got {t}")));
        }
        let ra = resolvent::resolvent_matrix(a, lambda)?;
        let rb = resolvent::resolvent_matrix(b, lambda)?;
        let (ma, mb) = (a.to_dense()?, b.to_dense()?);
        let left_op = &rb * (linalg::expm(&ma, t)? - linalg::expm(&mb, t)?) * &ra;
        let diff = ra - rb;
        let probes = linalg::probe_vectors(a.dim(), BRIDGE_PROBES, DEFAULT_SEED);
        Ok(BridgeSides { ma, mb, left_op, diff, probes })
    }

    /// Right sides on every probe at `points` nodes.
    fn right(&self, t: f64, points: usize) -> Result<Vec<CVector>> {
        let rule = Rule::composite(0.0, t, points);
        let mut acc = vec![CVector::zeros(self.ma.nrows()); self.probes.len()];
        for &(s, w) in &rule.points {
            let op = linalg::expm(&self.mb, t - s)? * &self.diff * linalg::expm(&self.ma, s)? * c(w);
            for (sum, x) in acc.iter_mut().zip(&self.probes) {
                *sum += &op * x;
            }
        }
        Ok(acc)
    }

    fn residual(&self, right: &[CVector]) -> f64 {
        self.probes
            .iter()
            .zip(right)
            .map(|(x, r)| (&self.left_op * x - r).norm() / x.norm())
            .fold(0.0, f64::max)
    }
}

/// Worst `||left - right|| / ||x||` of the bridge identity over the seeded
/// probes with `quad_points` nodes, without any resolution check.
pub fn bridge_residual(a: &OperatorHandle, b: &OperatorHandle, lambda: Complex64, t: f64, quad_points: usize) -> Result<f64> {
    let sides = BridgeSides::new(a, b, lambda, t)?;
    Ok(sides.residual(&sides.right(t, quad_points.max(1))?))
}

/// `R(lambda; B)[T(t) - S(t)]R(lambda; A)x` against
/// `int_0^t S(t - s)[R(lambda; A) - R(lambda; B)]T(s)x ds` on seeded probes,
/// with `T`, `S` generated by `A`, `B`. Fails with
/// [`LabError::QuadratureUnderResolved`] when doubling `quad_points` moves
/// the integral by more than the tolerance.
pub fn bridge_identity_check(a: &OperatorHandle, b: &OperatorHandle, lambda: Complex64, t: f64, quad_points: usize) -> Result<CheckReport> {
    if quad_points == 0 {
        return Err(precondition("need at least one node"));
    }
    let sides = BridgeSides::new(a, b, lambda, t)?;
    let right = sides.right(t, quad_points)?;
    let finer = sides.right(t, 2 * quad_points)?;
    let doubling = sides
        .probes
        .iter()
        .zip(right.iter().zip(&finer))
        .map(|(x, (r, f))| (r - f).norm() / x.norm())
        .fold(0.0, f64::max);
    if doubling > 1e-8 {
        return Err(LabError::QuadratureUnderResolved(format!(
            "bridge integral moved by {doubling:.3e} when doubling {quad_points} nodes"
        )));
    }
    let mut report = CheckReport::new("bridge_identity");
    report
        .at_most("residual", sides.residual(&right), 1e-8)
        .metric("doubling_change", doubling);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::parse_operator;
    use approx::assert_relative_eq;

    #[test]
    fn constant_family_is_exact() {
        let seq = GeneratorSequence::parse("constant", None).unwrap();
        let r = resolvent_convergence_table(&seq, c(1.0), 3).unwrap();
        let s = semigroup_convergence_table(&seq, 1.0, 33, 3).unwrap();
        assert!(r.errors().iter().chain(&s.errors()).all(|&e| e == 0.0));
        let rep = check_tk_equivalence(&seq, c(1.0), 1.0).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn perturbation_orders() {
        for p in [1.0, 2.0] {
            let seq = GeneratorSequence::parse(&format!("perturb:p={p}"), None).unwrap();
            let r = resolvent_convergence_table(&seq, c(1.0), 4).unwrap();
            let s = semigroup_convergence_table(&seq, 1.0, 33, 4).unwrap();
            assert!((r.empirical_order.unwrap() - p).abs() < 0.1, "{r:?}");
            assert!((s.empirical_order.unwrap() - p).abs() < 0.1, "{s:?}");
            assert!(check_tk_equivalence(&seq, c(1.0), 1.0).unwrap().pass);
        }
    }

    #[test]
    fn yosida_family_first_order_in_lambda() {
        let seq = GeneratorSequence::parse("yosida", None).unwrap();
        let s = semigroup_convergence_table(&seq, 1.0, 33, 3).unwrap();
        assert!((s.empirical_order.unwrap() - 1.0).abs() < 0.15, "{s:?}");
        assert!(check_tk_equivalence(&seq, c(1.0), 1.0).unwrap().pass);
    }

    #[test]
    fn adversarial_family_flags_no_convergence() {
        let seq = GeneratorSequence::parse("adversarial", None).unwrap();
        let rep = check_tk_equivalence(&seq, c(1.0), 1.0).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
        assert_eq!(rep.metrics["no_convergence"], 1.0);
    }

    #[test]
    fn laplacian_refinement_second_order() {
        let seq = GeneratorSequence::parse("laplacian-refine:levels=4", None).unwrap();
        let r = resolvent_convergence_table(&seq, c(1.0), 3).unwrap();
        let last = r.running_orders().last().copied().flatten().unwrap();
        assert!((last - 2.0).abs() < 0.05, "{r:?}");
        let rep = check_tk_equivalence(&seq, c(1.0), 0.5).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
    }

    #[test]
    fn shift_must_exceed_growth_bound() {
        let seq = GeneratorSequence::parse("constant", Some(&parse_operator("diag:1,2").unwrap())).unwrap();
        assert!(resolvent_convergence_table(&seq, c(1.5), 1).is_err());
        assert!(GeneratorSequence::parse("nope", None).is_err());
    }

    #[test]
    fn bridge_identity_scalar_oracle() {
        let a = parse_operator("diag:-1").unwrap();
        let b = parse_operator("diag:-2").unwrap();
        // R(1; B) = 1/3, R(1; A) = 1/2
        let expected = ((-1f64).exp() - (-2f64).exp()) / 6.0;
        let oracle: f64 = Rule::gauss(0.0, 1.0, 40).integrate(|s| (-2.0 * (1.0 - s)).exp() * (0.5 - 1.0 / 3.0) * (-s).exp());
        assert_relative_eq!(oracle, expected, epsilon = 1e-14);
        let rep = bridge_identity_check(&a, &b, c(1.0), 1.0, 16).unwrap();
        assert!(rep.residual("residual").unwrap().value <= 1e-10);
    }

    #[test]
    fn bridge_identity_random_and_degenerate() {
        let a = parse_operator("random_dissipative:n=5,seed=9").unwrap();
        let b = parse_operator("random_dissipative:n=5,seed=10").unwrap();
        let rep = bridge_identity_check(&a, &b, Complex64::new(1.0, 0.5), 0.8, 16).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
        let rep = bridge_identity_check(&a, &a, c(1.0), 0.8, 8).unwrap();
        assert_eq!(rep.residual("residual").unwrap().value, 0.0);
        assert!(matches!(
            bridge_identity_check(&a, &b, Complex64::new(1.0, 0.5), 0.8, 1),
            Err(LabError::QuadratureUnderResolved(_))
        ));
    }
}
