//! Finite-dimensional operators: the handle type, the built-in generators,
//! matrix files, norms, spectra and growth envelopes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector};

/// Above this dimension densifying a matrix-free operator logs a warning.
pub const DENSIFY_WARN_DIM: usize = 512;
/// Above this dimension dense eigensolves and exponentials are refused.
pub const MAX_DENSE_DIM: usize = 2048;
/// Seed used when a generator spec does not name one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Dense,
    MatrixFree,
}

/// An operator known only through its action.
pub trait MatrixFreeOperator: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CVector) -> CVector;
    fn apply_adjoint(&self, x: &CVector) -> CVector;

    /// Solves `(lambda I - A) y = b`. Operators without a shifted solver
    /// keep the default.
    fn solve_shifted(&self, lambda: Complex64, _b: &CVector) -> Result<CVector> {
        Err(precondition(format!(
            "operator has no shifted solver (lambda = {lambda})"
        )))
    }

    /// Solves `(lambda I - A)^* y = b`.
    fn solve_shifted_adjoint(&self, lambda: Complex64, _b: &CVector) -> Result<CVector> {
        Err(precondition(format!(
            "operator has no adjoint shifted solver (lambda = {lambda})"
        )))
    }

    fn has_shifted_solver(&self) -> bool {
        false
    }

    /// A cheap upper bound on the spectral norm.
    fn norm_upper_bound(&self) -> Option<f64> {
        None
    }
}

/// Tridiagonal operator; `lower[i]` sits at `(i+1, i)`, `upper[i]` at `(i, i+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<Complex64>, diag: Vec<Complex64>, upper: Vec<Complex64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(LabError::InvalidOperator("tridiagonal operator of dimension 0".into()));
        }
        if lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(LabError::InvalidOperator("tridiagonal band lengths disagree".into()));
        }
        if lower.iter().chain(&diag).chain(&upper).any(|z| !is_finite(*z)) {
            return Err(LabError::InvalidOperator("NaN or infinite entry".into()));
        }
        Ok(Tridiagonal { lower, diag, upper })
    }

    pub fn adjoint(&self) -> Tridiagonal {
        Tridiagonal {
            lower: self.upper.iter().map(|z| z.conj()).collect(),
            diag: self.diag.iter().map(|z| z.conj()).collect(),
            upper: self.lower.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.diag.len();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.lower[i];
                m[(i, i + 1)] = self.upper[i];
            }
        }
        m
    }

    /// Thomas algorithm on `(lambda I - T)`; a pivot below `1e-14` of the
    /// band scale marks the shift as singular.
    fn thomas(&self, lambda: Complex64, b: &CVector) -> Result<CVector> {
        let n = self.diag.len();
        if b.len() != n {
            return Err(LabError::DimensionMismatch { expected: n, found: b.len() });
        }
        let scale = self
            .diag
            .iter()
            .map(|d| (lambda - d).norm())
            .chain(self.lower.iter().chain(&self.upper).map(|z| z.norm()))
            .fold(0.0, f64::max);
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut cp = vec![Complex64::new(0.0, 0.0); n];
        let mut dp = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = lambda - self.diag[0];
        if pivot.norm() <= tiny {
            return Err(LabError::NotInResolventSet(lambda));
        }
        if n > 1 {
            cp[0] = -self.upper[0] / pivot;
        }
        dp[0] = b[0] / pivot;
        for i in 1..n {
            let low = -self.lower[i - 1];
            pivot = (lambda - self.diag[i]) - low * cp[i - 1];
            if pivot.norm() <= tiny {
                return Err(LabError::NotInResolventSet(lambda));
            }
            if i + 1 < n {
                cp[i] = -self.upper[i] / pivot;
            }
            dp[i] = (b[i] - low * dp[i - 1]) / pivot;
        }
        let mut y = CVector::zeros(n);
        y[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = dp[i] - cp[i] * y[i + 1];
        }
        Ok(y)
    }
}

impl MatrixFreeOperator for Tridiagonal {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &CVector) -> CVector {
        let n = self.diag.len();
        CVector::from_fn(n, |i, _| {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            s
        })
    }

    fn apply_adjoint(&self, x: &CVector) -> CVector {
        self.adjoint().apply(x)
    }

    fn solve_shifted(&self, lambda: Complex64, b: &CVector) -> Result<CVector> {
        self.thomas(lambda, b)
    }

    fn solve_shifted_adjoint(&self, lambda: Complex64, b: &CVector) -> Result<CVector> {
        self.adjoint().thomas(lambda.conj(), b)
    }

    fn has_shifted_solver(&self) -> bool {
        true
    }

    fn norm_upper_bound(&self) -> Option<f64> {
        // sqrt(||T||_1 ||T||_inf)
        let n = self.diag.len();
        let row = |i: usize| {
            let mut s = self.diag[i].norm();
            if i > 0 {
                s += self.lower[i - 1].norm();
            }
            if i + 1 < n {
                s += self.upper[i].norm();
            }
            s
        };
        let col = |j: usize| {
            let mut s = self.diag[j].norm();
            if j > 0 {
                s += self.upper[j - 1].norm();
            }
            if j + 1 < n {
                s += self.lower[j].norm();
            }
            s
        };
        let r = (0..n).map(row).fold(0.0, f64::max);
        let cl = (0..n).map(col).fold(0.0, f64::max);
        Some((r * cl).sqrt())
    }
}

#[derive(Clone)]
enum Repr {
    Dense(Arc<CMatrix>),
    MatrixFree(Arc<dyn MatrixFreeOperator>),
}

/// Immutable, cheaply clonable handle to a linear operator on `C^dim`.
#[derive(Clone)]
pub struct OperatorHandle {
    label: String,
    repr: Repr,
}

impl fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("kind", &self.kind())
            .finish()
    }
}

fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl OperatorHandle {
    pub fn from_dense(label: impl Into<String>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(LabError::InvalidOperator(format!(
                "non-square matrix {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(LabError::InvalidOperator("dimension must be positive".into()));
        }
        if matrix.iter().any(|z| !is_finite(*z)) {
            return Err(LabError::InvalidOperator("NaN or infinite entry".into()));
        }
        Ok(OperatorHandle {
            label: label.into(),
            repr: Repr::Dense(Arc::new(matrix)),
        })
    }

    pub fn from_real_rows(label: impl Into<String>, rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(LabError::InvalidOperator("ragged rows".into()));
        }
        let matrix = CMatrix::from_fn(n, m, |i, j| c(rows[i][j]));
        Self::from_dense(label, matrix)
    }

    pub fn matrix_free(label: impl Into<String>, op: Arc<dyn MatrixFreeOperator>) -> Result<Self> {
        if op.dim() == 0 {
            return Err(LabError::InvalidOperator("dimension must be positive".into()));
        }
        Ok(OperatorHandle {
            label: label.into(),
            repr: Repr::MatrixFree(op),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.nrows(),
            Repr::MatrixFree(op) => op.dim(),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        match self.repr {
            Repr::Dense(_) => OperatorKind::Dense,
            Repr::MatrixFree(_) => OperatorKind::MatrixFree,
        }
    }

    pub fn dense_data(&self) -> Option<&CMatrix> {
        match &self.repr {
            Repr::Dense(m) => Some(m),
            Repr::MatrixFree(_) => None,
        }
    }

    pub fn as_matrix_free(&self) -> Option<&dyn MatrixFreeOperator> {
        match &self.repr {
            Repr::Dense(_) => None,
            Repr::MatrixFree(op) => Some(op.as_ref()),
        }
    }

    fn check_len(&self, x: &CVector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(LabError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    pub fn apply(&self, x: &CVector) -> Result<CVector> {
        self.check_len(x)?;
        Ok(match &self.repr {
            Repr::Dense(m) => m.as_ref() * x,
            Repr::MatrixFree(op) => op.apply(x),
        })
    }

    pub fn apply_adjoint(&self, x: &CVector) -> Result<CVector> {
        self.check_len(x)?;
        Ok(match &self.repr {
            Repr::Dense(m) => m.adjoint() * x,
            Repr::MatrixFree(op) => op.apply_adjoint(x),
        })
    }

    pub fn has_shifted_solver(&self) -> bool {
        match &self.repr {
            Repr::Dense(_) => true,
            Repr::MatrixFree(op) => op.has_shifted_solver(),
        }
    }

    /// `y` with `(lambda I - A) y = b`.
    pub fn solve_shifted(&self, lambda: Complex64, b: &CVector) -> Result<CVector> {
        self.check_len(b)?;
        match &self.repr {
            Repr::Dense(m) => linalg::shifted(m, lambda)
                .lu()
                .solve(b)
                .ok_or(LabError::NotInResolventSet(lambda)),
            Repr::MatrixFree(op) => op.solve_shifted(lambda, b),
        }
    }

    /// Dense matrix of the operator; matrix-free operators are applied to
    /// the canonical basis.
    pub fn to_dense(&self) -> Result<CMatrix> {
        match &self.repr {
            Repr::Dense(m) => Ok(m.as_ref().clone()),
            Repr::MatrixFree(op) => {
                let n = op.dim();
                if n > MAX_DENSE_DIM {
                    return Err(precondition(format!(
                        "cannot densify dimension {n} (limit {MAX_DENSE_DIM})"
                    )));
                }
                if n > DENSIFY_WARN_DIM {
                    log::warn!("densifying matrix-free operator '{}' of dimension {n}", self.label);
                }
                let mut m = CMatrix::zeros(n, n);
                for (j, e) in linalg::canonical_basis(n).iter().enumerate() {
                    m.set_column(j, &op.apply(e));
                }
                Ok(m)
            }
        }
    }

    /// Dense operator `f(A)` built from the densified matrix.
    pub fn map_dense(&self, label: impl Into<String>, f: impl FnOnce(CMatrix) -> CMatrix) -> Result<Self> {
        Self::from_dense(label, f(self.to_dense()?))
    }

    /// `A + s I` as a dense operator.
    pub fn shifted_by(&self, s: Complex64) -> Result<Self> {
        let label = format!("{}{:+}I", self.label, s);
        self.map_dense(label, |mut m| {
            for i in 0..m.nrows() {
                m[(i, i)] += s;
            }
            m
        })
    }
}

/// Built-in operator families, parsed from strings such as
/// `laplacian1d:n=64,h=0.015625` or `diag:1,-3`.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    Zero(usize),
    Identity(usize),
    Diag(Vec<Complex64>),
    Jordan { lambda: Complex64, n: usize },
    NilpotentShift(usize),
    Rotation2,
    Laplacian1d { n: usize, h: f64 },
    Advection1d { n: usize, h: f64 },
    RandomDissipative { n: usize, seed: u64 },
    RandomBounded { n: usize, seed: u64, norm_cap: f64 },
    /// Real row-major entries, rows separated by `;`.
    Dense(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSource {
    Generator(GeneratorSpec),
    File(PathBuf),
}

impl FromStr for OperatorSource {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        OperatorSource::parse(s, DEFAULT_SEED)
    }
}

impl OperatorSource {
    /// Parses a source; random generators without `seed=` get `default_seed`.
    pub fn parse(s: &str, default_seed: u64) -> Result<Self> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(OperatorSource::File(PathBuf::from(path)));
        }
        GeneratorSpec::parse(s, default_seed).map(OperatorSource::Generator)
    }
}

pub(crate) struct SpecArgs {
    positional: Vec<String>,
    named: Vec<(String, String)>,
}

impl SpecArgs {
    pub(crate) fn parse(args: &str) -> Self {
        let mut positional = Vec::new();
        let mut named = Vec::new();
        for item in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((k, v)) => named.push((k.trim().to_string(), v.trim().to_string())),
                None => positional.push(item.to_string()),
            }
        }
        SpecArgs { positional, named }
    }

    pub(crate) fn get(&self, key: &str, position: usize) -> Option<&str> {
        self.named
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .or_else(|| self.positional.get(position).map(String::as_str))
    }

    fn dim(&self, position: usize) -> Result<usize> {
        let raw = self
            .get("n", position)
            .ok_or_else(|| LabError::Parse("missing dimension n".into()))?;
        let n: i64 = raw.parse().map_err(|_| LabError::Parse(format!("bad dimension '{raw}'")))?;
        if n <= 0 {
            return Err(LabError::InvalidOperator(format!("dimension must be positive, got {n}")));
        }
        Ok(n as usize)
    }

    pub(crate) fn real(&self, key: &str, position: usize) -> Result<Option<f64>> {
        self.get(key, position).map(parse_real).transpose()
    }

    pub(crate) fn seed(&self, position: usize, default: u64) -> Result<u64> {
        match self.get("seed", position) {
            Some(raw) => raw.parse().map_err(|_| LabError::Parse(format!("bad seed '{raw}'"))),
            None => Ok(default),
        }
    }
}

pub fn parse_real(raw: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| LabError::Parse(format!("bad number '{raw}'")))?;
    if v.is_nan() {
        return Err(LabError::InvalidOperator("NaN entry".into()));
    }
    Ok(v)
}

/// Accepts `1.5`, `-2i`, `1+2i`, `0.5-1e-3i`.
pub fn parse_complex(raw: &str) -> Result<Complex64> {
    let s = raw.trim();
    let z = Complex64::from_str(s).map_err(|_| LabError::Parse(format!("bad complex number '{raw}'")))?;
    if !is_finite(z) {
        return Err(LabError::InvalidOperator(format!("non-finite entry '{raw}'")));
    }
    Ok(z)
}

impl GeneratorSpec {
    pub fn parse(s: &str, default_seed: u64) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let a = SpecArgs::parse(args);
        let spec = match name.trim() {
            "zero" => GeneratorSpec::Zero(a.dim(0)?),
            "identity" => GeneratorSpec::Identity(a.dim(0)?),
            "diag" => {
                let values = a
                    .positional
                    .iter()
                    .map(|v| parse_complex(v))
                    .collect::<Result<Vec<_>>>()?;
                if values.is_empty() {
                    return Err(LabError::InvalidOperator("diag needs at least one value".into()));
                }
                GeneratorSpec::Diag(values)
            }
            "jordan" => {
                let lambda = parse_complex(
                    a.get("lambda", 0)
                        .ok_or_else(|| LabError::Parse("jordan needs lambda".into()))?,
                )?;
                GeneratorSpec::Jordan { lambda, n: a.dim(1)? }
            }
            "nilpotent_shift" | "nilpotent" => GeneratorSpec::NilpotentShift(a.dim(0)?),
            "rotation2" | "rotation" => GeneratorSpec::Rotation2,
            "laplacian1d" | "advection1d" => {
                let n = a.dim(0)?;
                let h = a.real("h", 1)?.unwrap_or(1.0 / (n as f64 + 1.0));
                if !(h > 0.0 && h.is_finite()) {
                    return Err(LabError::InvalidOperator(format!("grid spacing must be positive, got {h}")));
                }
                if name.trim() == "laplacian1d" {
                    GeneratorSpec::Laplacian1d { n, h }
                } else {
                    GeneratorSpec::Advection1d { n, h }
                }
            }
            "random_dissipative" => GeneratorSpec::RandomDissipative {
                n: a.dim(0)?,
                seed: a.seed(1, default_seed)?,
            },
            "random_bounded" => {
                let norm_cap = a.real("cap", 2)?.unwrap_or(1.0);
                if !(norm_cap > 0.0 && norm_cap.is_finite()) {
                    return Err(LabError::InvalidOperator(format!("norm cap must be positive, got {norm_cap}")));
                }
                GeneratorSpec::RandomBounded {
                    n: a.dim(0)?,
                    seed: a.seed(1, default_seed)?,
                    norm_cap,
                }
            }
            "dense" => {
                let rows = args
                    .split(';')
                    .map(|row| row.split(',').map(parse_real).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                GeneratorSpec::Dense(rows)
            }
            other => return Err(LabError::Parse(format!("unknown operator spec '{other}'"))),
        };
        Ok(spec)
    }

    /// Canonical spec string.
    pub fn label(&self) -> String {
        match self {
            GeneratorSpec::Zero(n) => format!("zero:n={n}"),
            GeneratorSpec::Identity(n) => format!("identity:n={n}"),
            GeneratorSpec::Diag(v) => {
                let items: Vec<String> = v.iter().map(|z| format_complex(*z)).collect();
                format!("diag:{}", items.join(","))
            }
            GeneratorSpec::Jordan { lambda, n } => format!("jordan:lambda={},n={n}", format_complex(*lambda)),
            GeneratorSpec::NilpotentShift(n) => format!("nilpotent_shift:n={n}"),
            GeneratorSpec::Rotation2 => "rotation2".to_string(),
            GeneratorSpec::Laplacian1d { n, h } => format!("laplacian1d:n={n},h={h}"),
            GeneratorSpec::Advection1d { n, h } => format!("advection1d:n={n},h={h}"),
            GeneratorSpec::RandomDissipative { n, seed } => format!("random_dissipative:n={n},seed={seed}"),
            GeneratorSpec::RandomBounded { n, seed, norm_cap } => {
                format!("random_bounded:n={n},seed={seed},cap={norm_cap}")
            }
            GeneratorSpec::Dense(rows) => {
                let rows: Vec<String> = rows
                    .iter()
                    .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
                    .collect();
                format!("dense:{}", rows.join(";"))
            }
        }
    }

    pub fn build(&self) -> Result<OperatorHandle> {
        let label = self.label();
        match self {
            GeneratorSpec::Zero(n) => OperatorHandle::from_dense(label, CMatrix::zeros(*n, *n)),
            GeneratorSpec::Identity(n) => OperatorHandle::from_dense(label, linalg::identity(*n)),
            GeneratorSpec::Diag(v) => {
                OperatorHandle::from_dense(label, CMatrix::from_diagonal(&CVector::from_vec(v.clone())))
            }
            GeneratorSpec::Jordan { lambda, n } => {
                let mut m = CMatrix::from_diagonal_element(*n, *n, *lambda);
                for i in 0..n - 1 {
                    m[(i, i + 1)] = c(1.0);
                }
                OperatorHandle::from_dense(label, m)
            }
            GeneratorSpec::NilpotentShift(n) => {
                let mut m = CMatrix::zeros(*n, *n);
                for i in 0..n - 1 {
                    m[(i, i + 1)] = c(1.0);
                }
                OperatorHandle::from_dense(label, m)
            }
            GeneratorSpec::Rotation2 => OperatorHandle::from_real_rows(label, &[&[0.0, 1.0], &[-1.0, 0.0]]),
            GeneratorSpec::Laplacian1d { n, h } => {
                let s = 1.0 / (h * h);
                let t = Tridiagonal::new(vec![c(s); n - 1], vec![c(-2.0 * s); *n], vec![c(s); n - 1])?;
                OperatorHandle::matrix_free(label, Arc::new(t))
            }
            GeneratorSpec::Advection1d { n, h } => {
                // upwind discretization of -d/dx with inflow value 0
                let s = 1.0 / h;
                let t = Tridiagonal::new(vec![c(s); n - 1], vec![c(-s); *n], vec![c(0.0); n - 1])?;
                OperatorHandle::matrix_free(label, Arc::new(t))
            }
            GeneratorSpec::RandomDissipative { n, seed } => {
                OperatorHandle::from_dense(label, random_dissipative_matrix(*n, *seed))
            }
            GeneratorSpec::RandomBounded { n, seed, norm_cap } => {
                let g = gaussian_matrix(*n, &mut ChaCha8Rng::seed_from_u64(*seed));
                let norm = linalg::spectral_norm(&g);
                OperatorHandle::from_dense(label, g * c(norm_cap / norm))
            }
            GeneratorSpec::Dense(rows) => {
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                OperatorHandle::from_real_rows(label, &refs)
            }
        }
    }
}

pub(crate) fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

fn gaussian_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        c(x * scale)
    })
}

/// `S - H H^T / 2 - I / 20` with `S` skew-symmetric: real, with
/// `Re<Ax, x> <= -||x||^2 / 20` for every `x`.
fn random_dissipative_matrix(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(n, &mut rng);
    let h = gaussian_matrix(n, &mut rng);
    let skew = (&g - g.transpose()) * c(0.5);
    let damping = &h * h.transpose() * c(0.5);
    skew - damping - linalg::identity(n) * c(0.05)
}

/// Builds the operator named by `source`.
pub fn make_operator(source: &OperatorSource) -> Result<OperatorHandle> {
    match source {
        OperatorSource::Generator(spec) => spec.build(),
        OperatorSource::File(path) => {
            let m = read_matrix_file(path)?;
            OperatorHandle::from_dense(format!("file:{}", path.display()), m)
        }
    }
}

/// Parses a spec string (`file:` prefix for matrix files) and builds it.
pub fn parse_operator(spec: &str) -> Result<OperatorHandle> {
    make_operator(&spec.parse()?)
}

/// JSON matrix file layout, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut re = Vec::with_capacity(m.len());
        let mut im = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixFile { rows: m.nrows(), cols: m.ncols(), re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let len = self.rows * self.cols;
        if self.re.len() != len || !(self.im.is_empty() || self.im.len() == len) {
            return Err(LabError::Parse(format!(
                "matrix file declares {}x{} but carries {} real / {} imaginary entries",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        let im = |k: usize| self.im.get(k).copied().unwrap_or(0.0);
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            Complex64::new(self.re[k], im(k))
        }))
    }
}

/// Reads a CSV of real entries or a JSON [`MatrixFile`], chosen by extension
/// (content sniffing when the extension is neither).
pub fn read_matrix_file(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path)?;
    let is_json = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => true,
        Some("csv") => false,
        _ => text.trim_start().starts_with('{'),
    };
    let m = if is_json {
        serde_json::from_str::<MatrixFile>(&text)?.to_matrix()?
    } else {
        parse_csv_matrix(&text)?
    };
    if m.nrows() != m.ncols() {
        return Err(LabError::InvalidOperator(format!("non-square matrix {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|z| !is_finite(*z)) {
        return Err(LabError::InvalidOperator("NaN or infinite entry".into()));
    }
    Ok(m)
}

pub fn parse_csv_matrix(text: &str) -> Result<CMatrix> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(parse_real).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(LabError::InvalidOperator("ragged CSV rows".into()));
    }
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| c(rows[i][j])))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    /// True for power-iteration estimates on matrix-free operators.
    pub estimated: bool,
    pub iterations: usize,
}

pub const POWER_ITERATION_LIMIT: usize = 10_000;

/// Spectral norm: exact (largest singular value) for dense operators,
/// power iteration on `A^*A` for matrix-free ones.
pub fn operator_norm(a: &OperatorHandle) -> Result<NormEstimate> {
    if let Some(m) = a.dense_data() {
        return Ok(NormEstimate { value: linalg::spectral_norm(m), estimated: false, iterations: 0 });
    }
    let op = a.as_matrix_free().expect("matrix-free operator");
    let (value, iterations) = power_iteration(a.dim(), |x| op.apply_adjoint(&op.apply(x)), 1e-8)?;
    Ok(NormEstimate { value: value.sqrt(), estimated: true, iterations })
}

/// Largest eigenvalue of a positive semi-definite map by power iteration.
pub(crate) fn power_iteration(
    dim: usize,
    gram: impl Fn(&CVector) -> CVector,
    rel_tol: f64,
) -> Result<(f64, usize)> {
    // deterministic start with no special alignment to grid modes
    let mut x = CVector::from_fn(dim, |i, _| c(1.0 + 0.5 * ((i as f64 + 1.0) * 0.7).sin()));
    x /= c(x.norm());
    let mut estimate = 0.0;
    for k in 1..=POWER_ITERATION_LIMIT {
        let y = gram(&x);
        let next = y.norm();
        if next == 0.0 {
            return Ok((0.0, k));
        }
        x = y / c(next);
        if (next - estimate).abs() <= rel_tol * next {
            return Ok((next, k));
        }
        estimate = next;
    }
    Err(LabError::NonConvergence { what: "power iteration", iterations: POWER_ITERATION_LIMIT })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub spectral_radius: f64,
    pub spectral_abscissa: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Self {
        let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let spectral_abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        SpectrumReport { eigenvalues, spectral_radius, spectral_abscissa }
    }
}

/// All eigenvalues (with multiplicity) of the densified operator.
pub fn spectrum(a: &OperatorHandle) -> Result<SpectrumReport> {
    if a.dim() > MAX_DENSE_DIM {
        return Err(precondition(format!("spectrum limited to dimension {MAX_DENSE_DIM}")));
    }
    let m = a.to_dense()?;
    Ok(SpectrumReport::from_eigenvalues(linalg::eigenvalues(&m)?))
}

/// Constants `(M, omega)` with `||T(t)|| <= M e^{omega t}`, plus the samples
/// that certified them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEnvelope {
    pub m: f64,
    pub omega: f64,
    /// `(t, ||T(t)||)` pairs.
    pub samples: Vec<(f64, f64)>,
}

impl GrowthEnvelope {
    /// Envelope with caller-supplied constants and no certifying samples.
    pub fn new(m: f64, omega: f64) -> Result<Self> {
        if !(m >= 1.0) || !(omega >= 0.0) {
            return Err(precondition(format!("envelope needs M >= 1 and omega >= 0, got ({m}, {omega})")));
        }
        Ok(GrowthEnvelope { m, omega, samples: Vec::new() })
    }

    pub fn contraction() -> Self {
        GrowthEnvelope { m: 1.0, omega: 0.0, samples: Vec::new() }
    }

    pub fn bound(&self, t: f64) -> f64 {
        self.m * (self.omega * t).exp()
    }

    /// Largest `||T(t)|| / (M e^{omega t})` over the given samples.
    pub fn worst_ratio(&self, samples: &[(f64, f64)]) -> f64 {
        samples.iter().map(|&(t, n)| n / self.bound(t)).fold(0.0, f64::max)
    }
}

/// Margin added to the spectral abscissa when fixing `omega`.
pub const OMEGA_MARGIN: f64 = 1e-6;

/// `omega = max(0, abscissa + 1e-6)`; `M` is the largest
/// `||e^{tA}|| e^{-omega t}` on a uniform grid of `[0, t_max]`, at least 1.
pub fn estimate_growth_envelope(a: &OperatorHandle, t_max: f64, grid_size: usize) -> Result<GrowthEnvelope> {
    if !(t_max > 0.0) {
        return Err(precondition(format!("t_max must be positive, got {t_max}")));
    }
    if grid_size < 8 {
        return Err(precondition(format!("grid_size must be at least 8, got {grid_size}")));
    }
    let m = a.to_dense()?;
    let spec = SpectrumReport::from_eigenvalues(linalg::eigenvalues(&m)?);
    let omega = (spec.spectral_abscissa + OMEGA_MARGIN).max(0.0);
    let ts: Vec<f64> = (0..grid_size)
        .map(|k| t_max * k as f64 / (grid_size - 1) as f64)
        .collect();
    let samples = semigroup_norms(&m, &ts)?;
    let big_m = samples
        .iter()
        .map(|&(t, n)| n * (-omega * t).exp())
        .fold(1.0, f64::max);
    Ok(GrowthEnvelope { m: big_m, omega, samples })
}

/// `(t, ||e^{tA}||)` for each `t`, computed in parallel and returned in grid order.
pub fn semigroup_norms(a: &CMatrix, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
    ts.par_iter()
        .map(|&t| Ok((t, linalg::spectral_norm(&linalg::expm(a, t)?))))
        .collect()
}

/// Six small operators with modest norms used for cross-validating the
/// exponential evaluators and the spectral mapping.
pub fn builtin_suite() -> Vec<OperatorHandle> {
    [
        "diag:-1,-2",
        "rotation2",
        "jordan:lambda=-1,n=3",
        "nilpotent_shift:n=3",
        "laplacian1d:n=6,h=1",
        "random_dissipative:n=6,seed=42",
    ]
    .iter()
    .map(|s| parse_operator(s).expect("built-in spec"))
    .collect()
}

/// Built-in generators of contraction semigroups.
pub fn builtin_dissipative() -> Vec<OperatorHandle> {
    [
        "zero:n=3",
        "identity:n=3",
        "diag:-1,-5",
        "rotation2",
        "laplacian1d:n=16,h=0.0588235294117647",
        "advection1d:n=12,h=0.25",
        "random_dissipative:n=6,seed=42",
        "random_dissipative:n=8,seed=2",
    ]
    .iter()
    .map(|s| {
        let op = parse_operator(s).expect("built-in spec");
        if *s == "identity:n=3" {
            // -I
            op.map_dense("neg_identity:n=3", |m| -m).expect("dense negation")
        } else {
            op
        }
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn op(s: &str) -> OperatorHandle {
        parse_operator(s).unwrap()
    }

    #[test]
    fn zero_operator_annihilates() {
        let a = op("zero:n=3");
        let x = linalg::probe_vectors(3, 1, 1).remove(0);
        assert_eq!(a.apply(&x).unwrap(), CVector::zeros(3));
    }

    #[test]
    fn nilpotent_shift_layout() {
        let a = op("nilpotent_shift:n=2");
        assert_eq!(a.kind(), OperatorKind::Dense);
        assert_eq!(a.dense_data().unwrap(), &CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]));
    }

    #[test]
    fn laplacian_stencil() {
        let a = op("laplacian1d:n=3,h=1.0");
        assert_eq!(a.kind(), OperatorKind::MatrixFree);
        assert!(a.has_shifted_solver());
        let expected = CMatrix::from_row_slice(
            3,
            3,
            &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0].map(c),
        );
        assert_eq!(a.to_dense().unwrap(), expected);
    }

    #[test]
    fn rejects_bad_sources() {
        assert!(matches!(parse_operator("zero:n=0"), Err(LabError::InvalidOperator(_))));
        assert!(matches!(parse_operator("zero:n=-2"), Err(LabError::InvalidOperator(_))));
        assert!(matches!(parse_operator("diag:1,NaN"), Err(LabError::InvalidOperator(_))));
        assert!(matches!(parse_operator("dense:1,2;3"), Err(LabError::InvalidOperator(_))));
        assert!(matches!(parse_operator("dense:1,2"), Err(LabError::InvalidOperator(_))));
        assert!(matches!(parse_operator("banana:n=2"), Err(LabError::Parse(_))));
    }

    #[test]
    fn tridiagonal_solver_matches_dense_solve() {
        let a = op("laplacian1d:n=7,h=0.125");
        let dense = a.to_dense().unwrap();
        let lambda = Complex64::new(0.5, 2.0);
        let b = linalg::probe_vectors(7, 1, 3).remove(0);
        let y = a.solve_shifted(lambda, &b).unwrap();
        let residual = (linalg::shifted(&dense, lambda) * &y - &b).norm();
        assert!(residual <= 1e-10 * b.norm());
        let op = a.as_matrix_free().unwrap();
        let z = op.solve_shifted_adjoint(lambda, &b).unwrap();
        let residual = (linalg::shifted(&dense, lambda).adjoint() * &z - &b).norm();
        assert!(residual <= 1e-10 * b.norm());
    }

    #[test]
    fn singular_shift_detected_by_tridiagonal_solver() {
        let a = op("zero:n=1");
        assert!(a.solve_shifted(c(0.0), &CVector::from_element(1, c(1.0))).is_err());
        let t = Tridiagonal::new(vec![], vec![c(2.0)], vec![]).unwrap();
        assert!(matches!(t.solve_shifted(c(2.0), &CVector::from_element(1, c(1.0))), Err(LabError::NotInResolventSet(_))));
    }

    #[test]
    fn norm_examples() {
        assert_relative_eq!(operator_norm(&op("identity:n=4")).unwrap().value, 1.0, epsilon = 1e-14);
        assert_relative_eq!(operator_norm(&op("diag:1,-3")).unwrap().value, 3.0, epsilon = 1e-14);
        let nb = operator_norm(&op("random_bounded:n=6,seed=1,cap=1")).unwrap();
        assert!(nb.value > 0.0 && nb.value <= 1.0 + 1e-12);
        assert!(!nb.estimated);
    }

    #[test]
    fn matrix_free_norm_is_flagged_estimate() {
        let a = op("laplacian1d:n=10,h=1");
        let est = operator_norm(&a).unwrap();
        assert!(est.estimated);
        let exact = 4.0 * (10.0 * std::f64::consts::PI / 22.0).sin().powi(2);
        assert_relative_eq!(est.value, exact, max_relative = 1e-6);
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&op("nilpotent_shift:n=3")).unwrap();
        assert_eq!(s.eigenvalues, vec![c(0.0); 3]);
        assert_eq!(s.spectral_radius, 0.0);
        let s = spectrum(&op("diag:1,2,3")).unwrap();
        assert_eq!(s.spectral_radius, 3.0);
        assert_eq!(s.spectral_abscissa, 3.0);
    }

    #[test]
    fn envelope_examples() {
        let neg = op("identity:n=2").map_dense("-I", |m| -m).unwrap();
        let env = estimate_growth_envelope(&neg, 3.0, 16).unwrap();
        assert_eq!(env.omega, 0.0);
        assert_relative_eq!(env.m, 1.0, epsilon = 1e-12);

        let env = estimate_growth_envelope(&op("diag:1"), 3.0, 16).unwrap();
        assert_relative_eq!(env.omega, 1.0, epsilon = 1e-5);
        assert_relative_eq!(env.m, 1.0, epsilon = 1e-12);
        assert!(estimate_growth_envelope(&op("diag:1"), 0.0, 16).is_err());
        assert!(estimate_growth_envelope(&op("diag:1"), 1.0, 7).is_err());
    }

    #[test]
    fn csv_and_json_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("a.csv");
        std::fs::write(&csv, "0,1\n-1,0\n").unwrap();
        let a = make_operator(&OperatorSource::File(csv)).unwrap();
        assert_eq!(a.dense_data().unwrap()[(1, 0)], c(-1.0));

        let json = dir.path().join("b.json");
        std::fs::write(&json, r#"{"rows":2,"cols":2,"re":[1,0,0,1],"im":[0,1,0,0]}"#).unwrap();
        let b = parse_operator(&format!("file:{}", json.display())).unwrap();
        assert_eq!(b.dense_data().unwrap()[(0, 1)], Complex64::new(0.0, 1.0));

        let bad = dir.path().join("c.csv");
        std::fs::write(&bad, "1,2,3\n4,5,6\n").unwrap();
        assert!(read_matrix_file(&bad).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for s in [
            "zero:n=3",
            "diag:1,-3",
            "jordan:lambda=-1,n=3",
            "laplacian1d:n=64,h=0.015625",
            "random_bounded:n=6,seed=1,cap=1",
            "dense:-1,3;0,-1",
        ] {
            let spec = GeneratorSpec::parse(s, DEFAULT_SEED).unwrap();
            assert_eq!(GeneratorSpec::parse(&spec.label(), DEFAULT_SEED).unwrap(), spec);
        }
    }
}
