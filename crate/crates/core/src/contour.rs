//! Contour-integral representations of the semigroup: the Dunford integral
//! over a circle, the Bromwich integral over a vertical line (for `T(t)` and
//! for `Int_0^t T(s) ds`), and the operator `B_lambda(t)`.
//!
//! The line integrals subtract the leading terms of the expansion
//!
//! ```text
//! R(z) = Sum_{k<m} B^k / (z - z0)^{k+1} + B^m R(z) / (z - z0)^m,   B = A - z0 I
//! ```
//!
//! whose integrals are known in closed form, so the quadrature only sees a
//! remainder decaying like `|z|^{-m-1}`.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::operator::{parse_complex, parse_real, OperatorHandle};
use crate::quadrature::{Rule, PANEL_ORDER};
use crate::report::CheckReport;
use crate::resolvent;

/// Expansion terms subtracted from the Bromwich integrands.
pub const LAURENT_TERMS: usize = 8;
/// Absolute truncation target for self-validated Bromwich runs.
pub const BROMWICH_TOL: f64 = 1e-9;
/// Nodes summed sequentially inside one parallel chunk.
const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ContourSpec {
    Circle { center: Complex64, radius: f64, nodes: usize },
    VerticalLine { a: f64, y: f64, nodes: usize },
    /// The two rays `r e^{+-i(pi/2 + nu)}`, `0 <= r <= r_max`.
    SectorBoundary { nu: f64, r_max: f64, nodes: usize },
}

impl ContourSpec {
    pub fn circle(radius: f64, nodes: usize) -> Result<Self> {
        let spec = ContourSpec::Circle { center: c(0.0), radius, nodes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn line(a: f64, y: f64, nodes: usize) -> Result<Self> {
        let spec = ContourSpec::VerticalLine { a, y, nodes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn nodes(&self) -> usize {
        match self {
            ContourSpec::Circle { nodes, .. }
            | ContourSpec::VerticalLine { nodes, .. }
            | ContourSpec::SectorBoundary { nodes, .. } => *nodes,
        }
    }

    fn validate(&self) -> Result<()> {
        let nodes = self.nodes();
        if nodes < 8 || nodes % 2 != 0 {
            return Err(precondition(format!("contour needs an even node count >= 8, got {nodes}")));
        }
        match self {
            ContourSpec::Circle { radius, center, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) || !(center.re.is_finite() && center.im.is_finite()) {
                    return Err(precondition(format!("circle radius must be positive, got {radius}")));
                }
            }
            ContourSpec::VerticalLine { a, y, .. } => {
                if !a.is_finite() || !(*y > 0.0 && y.is_finite()) {
                    return Err(precondition(format!("line needs finite a and Y > 0, got a = {a}, Y = {y}")));
                }
            }
            ContourSpec::SectorBoundary { nu, r_max, .. } => {
                if !(*nu > 0.0 && *nu < PI / 2.0) || !(*r_max > 0.0 && r_max.is_finite()) {
                    return Err(precondition(format!("sector needs 0 < nu < pi/2 and r_max > 0, got {nu}, {r_max}")));
                }
            }
        }
        Ok(())
    }

    /// Quadrature points `(z, dz weight)` along the contour.
    pub fn points(&self) -> Vec<(Complex64, Complex64)> {
        match *self {
            ContourSpec::Circle { center, radius, nodes } => (0..nodes)
                .map(|k| {
                    let theta = 2.0 * PI * k as f64 / nodes as f64;
                    let e = Complex64::from_polar(1.0, theta);
                    (center + e * radius, Complex64::i() * e * radius * (2.0 * PI / nodes as f64))
                })
                .collect(),
            ContourSpec::VerticalLine { a, y, nodes } => Rule::composite(-y, y, nodes)
                .points
                .into_iter()
                .map(|(eta, w)| (Complex64::new(a, eta), Complex64::new(0.0, w)))
                .collect(),
            ContourSpec::SectorBoundary { nu, r_max, nodes } => {
                let rule = Rule::composite(0.0, r_max, nodes / 2);
                let mut pts = Vec::with_capacity(nodes);
                // oriented upward: in along the lower ray, out along the upper one
                let up = Complex64::from_polar(1.0, PI / 2.0 + nu);
                let down = up.conj();
                for &(r, w) in rule.points.iter().rev() {
                    pts.push((down * r, -down * w));
                }
                for &(r, w) in &rule.points {
                    pts.push((up * r, up * w));
                }
                pts
            }
        }
    }
}

impl FromStr for ContourSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let (shape, args) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut kv = std::collections::BTreeMap::new();
        for item in args.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| LabError::Parse(format!("contour argument '{item}' is not key=value")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let real = |k: &str| -> Result<f64> {
            parse_real(kv.get(k).ok_or_else(|| LabError::Parse(format!("contour '{shape}' needs {k}")))?)
        };
        let nodes = |default: usize| -> Result<usize> {
            kv.get("n")
                .map(|v| v.parse().map_err(|_| LabError::Parse(format!("bad node count '{v}'"))))
                .unwrap_or(Ok(default))
        };
        let spec = match shape {
            "circle" => ContourSpec::Circle {
                center: kv.get("c").map(|v| parse_complex(v)).transpose()?.unwrap_or(c(0.0)),
                radius: real("r")?,
                nodes: nodes(64)?,
            },
            "line" => ContourSpec::VerticalLine {
                a: real("a")?,
                y: kv.get("Y").or_else(|| kv.get("y")).map(|v| parse_real(v)).transpose()?.unwrap_or(200.0),
                nodes: nodes(2000)?,
            },
            "sector" => ContourSpec::SectorBoundary { nu: real("nu")?, r_max: real("r")?, nodes: nodes(64)? },
            other => return Err(LabError::Parse(format!("unknown contour shape '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `Sum_k f(k)` over `0..count`, chunked for parallelism and reduced in
/// index order so the result does not depend on the thread count.
fn ordered_sum(count: usize, dim: usize, f: impl Fn(usize) -> Result<CMatrix> + Sync) -> Result<CMatrix> {
    let chunks: Vec<CMatrix> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = CMatrix::zeros(dim, dim);
            for k in chunk * CHUNK..((chunk + 1) * CHUNK).min(count) {
                acc += f(k)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m))
}

/// `(1 / 2 pi i) Int e^{lambda t} R(lambda) d lambda` over a circle by the
/// trapezoid rule. The circle must enclose the spectrum with a 5% margin:
/// `1.05 max |sigma - center| <= r`.
pub fn dunford_exp(a: &OperatorHandle, t: f64, contour: &ContourSpec) -> Result<CMatrix> {
    let ContourSpec::Circle { center, radius, nodes } = *contour else {
        return Err(precondition("Dunford integral needs a circle contour"));
    };
    contour.validate()?;
    let eig = linalg::eigenvalues(&a.to_dense()?)?;
    let reach = eig.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    if 1.05 * reach > radius {
        return Err(precondition(format!(
            "circle of radius {radius} does not enclose the spectrum (reach {reach}) with margin"
        )));
    }
    let dim = a.dim();
    let sum = ordered_sum(nodes, dim, |k| {
        let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / nodes as f64);
        let lambda = center + e * radius;
        let r = resolvent::resolvent_matrix(a, lambda)?;
        Ok(r * ((lambda * t).exp() * e * radius))
    })?;
    Ok(sum / c(nodes as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BromwichResult {
    /// Value from the `2Y` run.
    pub value: CMatrix,
    /// `||I_Y - I_2Y||`.
    pub tail_estimate: f64,
    pub truncation: f64,
    /// Quadrature nodes in the `2Y` run.
    pub nodes: usize,
    /// Tail within `10 * BROMWICH_TOL * max(1, ||value||)`.
    pub validated: bool,
}

/// Order-8 panels on `[-y, y]`, symmetric about 0. A panel at height `eta`
/// is no wider than `pi / (4t)`, than `(dist + |eta|) / 2` where `dist` is
/// the distance from the line to the nearest singularity, and than the
/// uniform width implied by `nodes`; all caps are divided by `refine`.
fn line_rule(y: f64, t: f64, dist: f64, nodes: usize, refine: f64) -> Rule {
    let cap = (PI / (4.0 * t)).min(2.0 * y * PANEL_ORDER as f64 / nodes as f64) / refine;
    let mut upper = vec![0.0];
    let mut e = 0.0;
    while e < y {
        e = (e + cap.min(0.5 * (dist + e) / refine)).min(y);
        upper.push(e);
    }
    let mut edges: Vec<f64> = upper.iter().rev().map(|&v| -v).collect();
    edges.extend_from_slice(&upper[1..]);
    Rule::from_edges(&edges, PANEL_ORDER)
}

/// Expansion centre `z0 = a - d` left of the line, with `d >= 1` chosen to
/// minimise `||z0 I - A|| / d`, the decay ratio of the subtracted terms.
fn laurent_center(m: &CMatrix, a: f64) -> f64 {
    let norm = linalg::spectral_norm(m);
    let mut best = (f64::INFINITY, a - 1.0);
    let mut d: f64 = 1.0;
    while d <= 2.0 * (norm + a.abs()) + 2.0 {
        let q = linalg::spectral_norm(&linalg::shifted(m, c(a - d))) / d;
        if q < best.0 {
            best = (q, a - d);
        }
        d *= 1.25;
    }
    best.1
}

/// `(1 / 2 pi) Int w(z) R(z) d eta` along `Re z = a` for the weight `w`.
fn line_integral(
    a_op: &OperatorHandle,
    a: f64,
    rule: &Rule,
    weight: impl Fn(Complex64) -> Complex64 + Sync,
) -> Result<CMatrix> {
    let dim = a_op.dim();
    let sum = ordered_sum(rule.len(), dim, |k| {
        let (eta, w) = rule.points[k];
        let z = Complex64::new(a, eta);
        Ok(resolvent::resolvent_matrix(a_op, z)? * (weight(z) * w))
    })?;
    Ok(sum / c(2.0 * PI))
}

/// Validates the line and returns the spectral abscissa.
fn check_line(m: &CMatrix, t: f64, a: f64, y: f64, nodes: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(precondition(format!("Bromwich integrals need t > 0, got {t}")));
    }
    ContourSpec::line(a, y, nodes.max(8) + nodes % 2)?;
    let abscissa = linalg::spectral_abscissa(m)?;
    if a <= abscissa {
        return Err(precondition(format!("line Re z = {a} is not right of the spectral abscissa {abscissa}")));
    }
    Ok(abscissa)
}

#[allow(clippy::too_many_arguments)]
fn bromwich_once(
    a_op: &OperatorHandle,
    m: &CMatrix,
    t: f64,
    a: f64,
    z0: f64,
    dist: f64,
    y: f64,
    nodes: usize,
    refine: f64,
) -> Result<(CMatrix, usize)> {
    let dim = m.nrows();
    let b = linalg::shifted(m, c(z0)) * c(-1.0);
    let rule = line_rule(y, t, dist, nodes, refine);
    let mm = LAURENT_TERMS as i32;
    let remainder = line_integral(a_op, a, &rule, |z| (z * t).exp() / (z - z0).powi(mm))?;
    let mut exact = CMatrix::zeros(dim, dim);
    let mut term = linalg::identity(dim);
    for k in 0..LAURENT_TERMS {
        if k > 0 {
            term = &term * &b * c(t / k as f64);
        }
        exact += &term;
    }
    let value = exact * c((z0 * t).exp()) + linalg::matrix_power(&b, LAURENT_TERMS) * remainder;
    Ok((value, rule.len()))
}

/// `(1 / 2 pi i) Int_{a - iY}^{a + iY} e^{zt} R(z) dz` with the first
/// [`LAURENT_TERMS`] expansion terms about a centre left of the line
/// integrated exactly. A second run at `2Y` with panels half as wide is
/// returned; its difference from the first is the tail estimate.
pub fn bromwich_exp(a_op: &OperatorHandle, t: f64, a: f64, y: f64, nodes: usize) -> Result<BromwichResult> {
    let m = a_op.to_dense()?;
    let abscissa = check_line(&m, t, a, y, nodes)?;
    let dense = OperatorHandle::from_dense(a_op.label(), m.clone())?;
    let dist = (a - abscissa).min(1.0);
    let z0 = laurent_center(&m, a);
    let (short, _) = bromwich_once(&dense, &m, t, a, z0, dist, y, nodes, 1.0)?;
    let (value, used) = bromwich_once(&dense, &m, t, a, z0, dist, 2.0 * y, 2 * nodes, 2.0)?;
    let tail_estimate = linalg::spectral_norm(&(&short - &value));
    let validated = tail_estimate <= 10.0 * BROMWICH_TOL * linalg::spectral_norm(&value).max(1.0);
    Ok(BromwichResult { value, tail_estimate, truncation: y, nodes: used, validated })
}

/// Line abscissa, truncation and node count chosen from the operator:
/// `a` one unit right of the spectrum, `B = z0 - A` for the expansion
/// centre `z0`, panels no wider than `pi / (4t)`
/// away from the real axis, and `Y` where the remainder tail bound
/// `e^{at} ||B||^m C / (pi (m-1) Y^{m-1})` falls below [`BROMWICH_TOL`],
/// `C` being the largest sampled `||R||` on the line.
pub fn bromwich_auto(a_op: &OperatorHandle, t: f64) -> Result<BromwichResult> {
    let (a, y, nodes) = bromwich_parameters(a_op, t)?;
    bromwich_exp(a_op, t, a, y, nodes)
}

pub fn bromwich_parameters(a_op: &OperatorHandle, t: f64) -> Result<(f64, f64, usize)> {
    if !(t > 0.0) {
        return Err(precondition(format!("Bromwich integrals need t > 0, got {t}")));
    }
    let m = a_op.to_dense()?;
    let eig = linalg::eigenvalues(&m)?;
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let a = abscissa + 1.0;
    let z0 = laurent_center(&m, a);
    let b_norm = linalg::spectral_norm(&(linalg::shifted(&m, c(z0)) * c(-1.0))).max(1.0);
    let dense = OperatorHandle::from_dense(a_op.label(), m.clone())?;
    let mut etas = vec![0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0];
    etas.extend(eig.iter().map(|z| z.im));
    let mut sup_r: f64 = 1.0;
    for eta in etas {
        sup_r = sup_r.max(linalg::spectral_norm(&resolvent::resolvent_matrix(&dense, Complex64::new(a, eta))?));
    }
    let mm = LAURENT_TERMS as f64;
    let tol = BROMWICH_TOL * (z0 * t).exp().max(1.0);
    let ratio = (a * t).exp() * b_norm.powf(mm) * sup_r / (PI * (mm - 1.0) * tol);
    let y = ratio.powf(1.0 / (mm - 1.0)).max(20.0);
    let width = PI / (4.0 * t);
    let nodes = ((2.0 * y / width).ceil() as usize * PANEL_ORDER).max(8);
    Ok((a, y, nodes + nodes % 2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegral {
    /// Line-integral value from the `2Y` run.
    pub value: CVector,
    pub tail_estimate: f64,
    /// Gauss-Legendre quadrature of `s -> T(s) x` on `[0, t]`.
    pub time_quadrature: CVector,
    pub discrepancy: f64,
}

#[allow(clippy::too_many_arguments)]
fn time_integral_once(a_op: &OperatorHandle, m: &CMatrix, t: f64, a: f64, dist: f64, y: f64, nodes: usize, refine: f64) -> Result<CMatrix> {
    let dim = m.nrows();
    let rule = line_rule(y, t, dist, nodes, refine);
    let mm = LAURENT_TERMS as i32;
    let remainder = line_integral(a_op, a, &rule, |z| (z * t).exp() / z.powi(mm + 1))?;
    // Int e^{zt} z^{-k-2} dz / (2 pi i) = t^{k+1} / (k+1)!
    let mut exact = CMatrix::zeros(dim, dim);
    let mut term = linalg::identity(dim) * c(t);
    for k in 0..LAURENT_TERMS {
        if k > 0 {
            term = &term * m * c(t / (k + 1) as f64);
        }
        exact += &term;
    }
    Ok(exact + linalg::matrix_power(m, LAURENT_TERMS) * remainder)
}

/// `(1 / 2 pi i) Int e^{zt} R(z) x dz / z` over `Re z = a`, which equals
/// `Int_0^t T(s) x ds` when `a > max(0, abscissa)`.
pub fn bromwich_time_integral(a_op: &OperatorHandle, x: &CVector, t: f64, a: f64, y: f64, nodes: usize) -> Result<TimeIntegral> {
    if x.len() != a_op.dim() {
        return Err(LabError::DimensionMismatch { expected: a_op.dim(), found: x.len() });
    }
    let m = a_op.to_dense()?;
    let abscissa = check_line(&m, t, a, y, nodes)?;
    if a <= 0.0 {
        return Err(precondition(format!("time integral needs a > 0 so the pole at 0 lies left of the line, got {a}")));
    }
    let dist = (a - abscissa).min(a);
    let short = time_integral_once(a_op, &m, t, a, dist, y, nodes, 1.0)? * x;
    let value = time_integral_once(a_op, &m, t, a, dist, 2.0 * y, 2 * nodes, 2.0)? * x;
    let tail_estimate = (&short - &value).norm();
    let rule = Rule::composite(0.0, t, 64);
    let mut time_quadrature = CVector::zeros(x.len());
    for &(s, w) in &rule.points {
        time_quadrature += linalg::expm(&m, s)? * x * c(w);
    }
    let discrepancy = (&value - &time_quadrature).norm();
    Ok(TimeIntegral { value, tail_estimate, time_quadrature, discrepancy })
}

/// `B_lambda(t) = Int_0^t e^{lambda (t-s)} T(s) ds` with its defining
/// identity and commutation residuals.
#[derive(Clone, Debug)]
pub struct BLambdaOperator {
    pub lambda: Complex64,
    pub t: f64,
    pub matrix: CMatrix,
    pub report: CheckReport,
}

impl BLambdaOperator {
    pub fn apply(&self, b: &CVector) -> Result<CVector> {
        if b.len() != self.matrix.nrows() {
            return Err(LabError::DimensionMismatch { expected: self.matrix.nrows(), found: b.len() });
        }
        Ok(&self.matrix * b)
    }
}

fn b_lambda_matrix(m: &CMatrix, lambda: Complex64, t: f64, quad_points: usize) -> Result<CMatrix> {
    let rule = Rule::composite(0.0, t, quad_points);
    let mut acc = CMatrix::zeros(m.nrows(), m.nrows());
    for &(s, w) in &rule.points {
        acc += linalg::expm(m, s)? * ((lambda * (t - s)).exp() * w);
    }
    Ok(acc)
}

/// `(identity, commutation)` residuals of `B_lambda(t)` at `quad_points`,
/// each relative to `max(1, scale)`.
pub fn b_lambda_residuals(a: &OperatorHandle, lambda: Complex64, t: f64, quad_points: usize) -> Result<(f64, f64)> {
    let m = a.to_dense()?;
    let b = b_lambda_matrix(&m, lambda, t, quad_points)?;
    residuals(&m, &b, lambda, t)
}

fn residuals(m: &CMatrix, b: &CMatrix, lambda: Complex64, t: f64) -> Result<(f64, f64)> {
    let tt = linalg::expm(m, t)?;
    let rhs = linalg::identity(m.nrows()) * (lambda * t).exp() - &tt;
    let identity = linalg::spectral_norm(&(linalg::shifted(m, lambda) * b - &rhs)) / linalg::spectral_norm(&rhs).max(1.0);
    let commutation =
        linalg::spectral_norm(&(b * &tt - &tt * b)) / (linalg::spectral_norm(b) * linalg::spectral_norm(&tt)).max(1.0);
    Ok((identity, commutation))
}

/// Quadrature of `B_lambda(t)` with `quad_points` and `2 quad_points`
/// nodes; the finer one is kept once both agree.
pub fn b_lambda(a: &OperatorHandle, lambda: Complex64, t: f64, quad_points: usize) -> Result<BLambdaOperator> {
    if !(t > 0.0) {
        return Err(precondition(format!("B_lambda needs t > 0, got {t}")));
    }
    if quad_points == 0 {
        return Err(precondition("quad_points must be positive"));
    }
    let m = a.to_dense()?;
    let coarse = b_lambda_matrix(&m, lambda, t, quad_points)?;
    let fine = b_lambda_matrix(&m, lambda, t, 2 * quad_points)?;
    let change = linalg::spectral_norm(&(&coarse - &fine));
    if change > 1e-8 * linalg::spectral_norm(&fine).max(1.0) {
        return Err(LabError::QuadratureUnderResolved(format!(
            "B_lambda moved by {change:.3e} when doubling {quad_points} nodes"
        )));
    }
    let (identity, commutation) = residuals(&m, &fine, lambda, t)?;
    let mut report = CheckReport::new("b_lambda");
    report
        .at_most("identity", identity, 1e-8)
        .at_most("commutation", commutation, 1e-8)
        .metric("doubling_change", change);
    Ok(BLambdaOperator { lambda, t, matrix: fine, report })
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
    fn contour_strings() {
        assert_eq!(
            "circle:r=3,n=64".parse::<ContourSpec>().unwrap(),
            ContourSpec::Circle { center: c(0.0), radius: 3.0, nodes: 64 }
        );
        assert_eq!(
            "line:a=0.5,Y=200,n=2000".parse::<ContourSpec>().unwrap(),
            ContourSpec::VerticalLine { a: 0.5, y: 200.0, nodes: 2000 }
        );
        assert!("circle:r=-1,n=64".parse::<ContourSpec>().is_err());
        assert!("circle:r=1,n=7".parse::<ContourSpec>().is_err());
        assert!("sector:nu=0.3,r=50,n=32".parse::<ContourSpec>().is_ok());
        assert!("ellipse:r=1".parse::<ContourSpec>().is_err());
    }

    #[test]
    fn circle_points_integrate_cauchy_kernel() {
        // (1 / 2 pi i) contour of dz / z = 1
        let spec = ContourSpec::circle(2.0, 16).unwrap();
        let s: Complex64 = spec.points().iter().map(|(z, w)| w / z).sum::<Complex64>() / Complex64::new(0.0, 2.0 * PI);
        assert_relative_eq!(s.re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dunford_examples() {
        let circle = |r: f64, n: usize| ContourSpec::circle(r, n).unwrap();
        // trapezoid aliasing error is about t^16 / 16!
        for t in [0.0, 0.5, 1.0] {
            let e = dunford_exp(&op("zero:n=2"), t, &circle(1.0, 16)).unwrap();
            assert!((e - linalg::identity(2)).norm() < 1e-12);
        }
        let e = dunford_exp(&op("diag:1,2"), 1.0, &circle(3.0, 64)).unwrap();
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1f64.exp()), c(2f64.exp())]));
        assert!((e - expected).norm() <= 1e-10);
        let e = dunford_exp(&op("nilpotent_shift:n=2"), 1.0, &circle(1.0, 64)).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!((e - expected).norm() <= 1e-10);
        assert!(dunford_exp(&op("diag:1,2"), 1.0, &circle(2.0, 64)).is_err());
    }

    #[test]
    fn dunford_is_radius_independent() {
        let a = op("random_dissipative:n=4,seed=2");
        let e1 = dunford_exp(&a, 1.0, &ContourSpec::circle(3.0, 96).unwrap()).unwrap();
        let e2 = dunford_exp(&a, 1.0, &ContourSpec::circle(4.5, 96).unwrap()).unwrap();
        assert!(linalg::spectral_norm(&(e1 - e2)) <= 1e-9);
    }

    #[test]
    fn bromwich_scalar() {
        let r = bromwich_exp(&op("diag:-1"), 1.0, 0.5, 200.0, 2000).unwrap();
        assert_relative_eq!(r.value[(0, 0)].re, (-1f64).exp(), epsilon = 1e-6);
        assert!(r.value[(0, 0)].im.abs() <= 1e-10);
        assert!(r.validated);
    }

    #[test]
    fn bromwich_diagonal_and_symmetry() {
        let r = bromwich_exp(&op("diag:-1,-2"), 2.0, 0.5, 200.0, 2000).unwrap();
        assert_relative_eq!(r.value[(0, 0)].re, (-2f64).exp(), epsilon = 1e-6);
        assert_relative_eq!(r.value[(1, 1)].re, (-4f64).exp(), epsilon = 1e-6);
        let r = bromwich_exp(&op("random_dissipative:n=4,seed=1"), 1.0, 0.5, 100.0, 1000).unwrap();
        assert!(r.value.iter().all(|z| z.im.abs() <= 1e-10));
    }

    #[test]
    fn bromwich_preconditions() {
        let a = op("diag:1");
        assert!(bromwich_exp(&a, 1.0, 0.5, 100.0, 1000).is_err());
        assert!(bromwich_exp(&a, 0.0, 2.0, 100.0, 1000).is_err());
    }

    #[test]
    fn bromwich_auto_matches_oracle() {
        for s in ["jordan:lambda=-1,n=3", "rotation2", "laplacian1d:n=6,h=1"] {
            let a = op(s);
            let r = bromwich_auto(&a, 1.0).unwrap();
            let oracle = linalg::expm(&a.to_dense().unwrap(), 1.0).unwrap();
            assert!(linalg::spectral_norm(&(r.value - oracle)) <= 1e-6, "{s}");
            assert!(r.validated, "{s}");
        }
    }

    #[test]
    fn time_integral_examples() {
        let x = CVector::from_vec(vec![c(1.0), c(-2.0)]);
        let r = bromwich_time_integral(&op("zero:n=2"), &x, 1.5, 0.5, 100.0, 1000).unwrap();
        assert!((r.value - &x * c(1.5)).norm() < 1e-9);

        let one = CVector::from_element(1, c(1.0));
        let r = bromwich_time_integral(&op("diag:-1"), &one, 1.0, 0.5, 200.0, 2000).unwrap();
        assert_relative_eq!(r.value[0].re, 1.0 - (-1f64).exp(), epsilon = 1e-6);

        let e1 = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let r = bromwich_time_integral(&op("rotation2"), &e1, PI, 1.0, 200.0, 4000).unwrap();
        assert!((r.value[0].re).abs() <= 1e-6);
        assert_relative_eq!(r.value[1].re, -2.0, epsilon = 1e-6);
        assert!(r.discrepancy <= 1e-6);

        assert!(bromwich_time_integral(&op("diag:-1"), &one, 1.0, -0.5, 200.0, 2000).is_err());
    }

    #[test]
    fn b_lambda_examples() {
        let b = b_lambda(&op("zero:n=2"), c(0.0), 1.5, 8).unwrap();
        assert!((&b.matrix - linalg::identity(2) * c(1.5)).norm() < 1e-14);
        assert!(b.report.pass);

        let b = b_lambda(&op("diag:-1"), c(1.0), 1.0, 16).unwrap();
        assert_relative_eq!(b.matrix[(0, 0)].re, 1f64.sinh(), epsilon = 1e-13);
        assert_relative_eq!(2.0 * b.matrix[(0, 0)].re, 1f64.exp() - (-1f64).exp(), epsilon = 1e-12);

        let b = b_lambda(&op("random_dissipative:n=5,seed=8"), Complex64::new(1.0, 1.0), 0.7, 16).unwrap();
        assert!(b.report.pass, "{}", b.report.to_json());
        assert!(b_lambda(&op("diag:-1"), c(1.0), 0.0, 16).is_err());
        assert!(matches!(
            b_lambda(&op("diag:-40"), c(1.0), 2.0, 2),
            Err(LabError::QuadratureUnderResolved(_))
        ));
    }
}
