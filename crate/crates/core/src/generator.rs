//! Structural checks on a candidate generator: dissipativity, the
//! Lumer-Phillips conclusion, contraction resolvent bounds, sectorial
//! constants, derivative identities and commutation with bounded operators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::operator::{self, GrowthEnvelope, OperatorHandle};
use crate::report::CheckReport;
use crate::resolvent;

/// Random probes used by the dissipativity check, on top of the canonical basis.
pub const DISSIPATIVITY_PROBES: usize = 100;
const PROBE_SEED: u64 = 0x5eed;
/// Angular resolution of the sector half-angle bisection.
pub const SECTOR_RESOLUTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    /// `max Re<Ax, x>` over unit probes.
    pub inner_product_margin: f64,
    /// `min (||(alpha I - A)x|| - alpha ||x||) / max(1, alpha)` over unit
    /// probes and the alpha grid.
    pub norm_criterion_margin: f64,
    pub is_dissipative: bool,
    /// Verdict of the norm criterion alone.
    pub norm_criterion_holds: bool,
    pub criteria_agree: bool,
    /// `alpha0 I - A` nonsingular at `alpha0 = 1` and `||A|| + 1`.
    pub range_condition: bool,
    pub probes: usize,
}

impl DissipativityReport {
    pub fn m_dissipative(&self) -> bool {
        self.is_dissipative && self.range_condition
    }

    pub fn to_check_report(&self) -> CheckReport {
        let mut r = CheckReport::new("dissipative");
        r.at_most("inner_product_margin", self.inner_product_margin, 1e-10)
            .require("criteria_agree", self.criteria_agree)
            .require("range_condition", self.range_condition)
            .metric("norm_criterion_margin", self.norm_criterion_margin);
        r
    }
}

/// Default alpha grid: eight decades around `||A||`.
pub fn default_alpha_grid(norm: f64) -> Vec<f64> {
    let base = norm.max(1.0);
    (-3..=6).map(|k| base * 10f64.powi(k)).collect()
}

/// Both dissipativity criteria over unit probes (random plus canonical basis)
/// with `J(x) = {x}`.
pub fn check_dissipative(a: &OperatorHandle, probes: usize, alpha_grid: &[f64]) -> Result<DissipativityReport> {
    if probes < DISSIPATIVITY_PROBES {
        return Err(precondition(format!("need at least {DISSIPATIVITY_PROBES} probes, got {probes}")));
    }
    if alpha_grid.is_empty() || alpha_grid.iter().any(|&al| !(al > 0.0)) {
        return Err(precondition("alpha grid must be nonempty and positive"));
    }
    let dim = a.dim();
    let mut xs = linalg::probe_vectors(dim, probes, PROBE_SEED);
    xs.extend(linalg::canonical_basis(dim));
    let images: Vec<CVector> = xs.iter().map(|x| a.apply(x)).collect::<Result<_>>()?;
    let inner = xs
        .iter()
        .zip(&images)
        .map(|(x, ax)| ax.dotc(x).re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut norm_margin = f64::INFINITY;
    for (x, ax) in xs.iter().zip(&images) {
        for &alpha in alpha_grid {
            let v = ((x * c(alpha) - ax).norm() - alpha) / alpha.max(1.0);
            norm_margin = norm_margin.min(v);
        }
    }
    let is_dissipative = inner <= 1e-10;
    let norm_criterion_holds = norm_margin >= -1e-10;
    let norm = operator::operator_norm(a)?.value;
    let range_condition = [1.0, norm + 1.0]
        .iter()
        .all(|&alpha| resolvent::resolvent(a, c(alpha)).in_resolvent_set);
    Ok(DissipativityReport {
        inner_product_margin: inner,
        norm_criterion_margin: norm_margin,
        is_dissipative,
        norm_criterion_holds,
        criteria_agree: is_dissipative == norm_criterion_holds,
        range_condition,
        probes: xs.len(),
    })
}

/// m-dissipative implies `||e^{tA}|| <= 1 + 1e-9` on the grid, and growth
/// above `1 + 1e-6` implies failure of dissipativity.
pub fn check_lumer_phillips(a: &OperatorHandle, t_grid: &[f64]) -> Result<CheckReport> {
    let norm = operator::operator_norm(a)?.value;
    let diss = check_dissipative(a, DISSIPATIVITY_PROBES, &default_alpha_grid(norm))?;
    let m = a.to_dense()?;
    let norms = operator::semigroup_norms(&m, t_grid)?;
    let max_norm = norms.iter().map(|p| p.1).fold(0.0, f64::max);
    let grows = max_norm > 1.0 + 1e-6;
    let mut report = CheckReport::new("lumer_phillips");
    report
        .require("m_dissipative_implies_contraction", !diss.m_dissipative() || max_norm <= 1.0 + 1e-9)
        .require("growth_implies_not_dissipative", !grows || !diss.is_dissipative)
        .require("criteria_agree", diss.criteria_agree)
        .metric("inner_product_margin", diss.inner_product_margin)
        .metric("norm_criterion_margin", diss.norm_criterion_margin)
        .metric("max_semigroup_norm", max_norm)
        .metric("m_dissipative", f64::from(u8::from(diss.m_dissipative())));
    report.note(if diss.m_dissipative() {
        "m-dissipative: contraction semigroup expected"
    } else if grows {
        "not dissipative and the semigroup grows"
    } else {
        "not m-dissipative"
    });
    Ok(report)
}

/// `||R(lambda)^n|| <= lambda^{-n}` on a real positive grid.
pub fn check_contraction_hy(a: &OperatorHandle, lambda_grid: &[f64], n_max: usize) -> Result<CheckReport> {
    if lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(precondition("contraction check needs real positive shifts"));
    }
    let grid: Vec<Complex64> = lambda_grid.iter().map(|&l| c(l)).collect();
    let mut report = resolvent::check_hille_yosida_bounds(a, &GrowthEnvelope::contraction(), &grid, n_max)?;
    report.name = "contraction_hille_yosida".into();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    /// Certified half-angle margin; `None` when no positive angle passes.
    pub delta: Option<f64>,
    /// `sup |lambda| ||R(lambda)||` over the closed right half-plane fan.
    pub k: f64,
    /// Same supremum over the fan widened to `pi/2 + delta/2`.
    pub k_sector: f64,
    pub c_line: f64,
    /// `(gamma, max_eta |eta| ||R(gamma + i eta)||)`.
    pub c_line_by_gamma: Vec<(f64, f64)>,
    /// `C(gamma)` grows in proportion to `1/gamma` at the two smallest `gamma`.
    pub c_line_diverges: bool,
    pub l: f64,
    /// `(t, t ||A e^{tA}||)`.
    pub l_samples: Vec<(f64, f64)>,
    /// Largest `t ||A e^{tA}||` within each decade of the t grid.
    pub l_by_decade: Vec<f64>,
    /// Per-decade maxima vary by at most 20%.
    pub l_stable: bool,
    pub sectorial: bool,
}

impl SectorReport {
    pub fn to_check_report(&self) -> CheckReport {
        let mut r = CheckReport::new("sectorial");
        r.require("sectorial", self.sectorial)
            .require("l_stable", self.l_stable)
            .metric("k", self.k)
            .metric("k_sector", self.k_sector)
            .metric("c_line", self.c_line)
            .metric("l", self.l)
            .metric("delta", self.delta.unwrap_or(0.0));
        if self.c_line_diverges {
            r.note("C_line diverges as gamma -> 0");
        }
        r
    }
}

fn fan_sup(a: &OperatorHandle, angles: &[f64], radii: &[f64]) -> f64 {
    angles
        .par_iter()
        .map(|&theta| {
            radii
                .iter()
                .map(|&r| {
                    let lambda = Complex64::from_polar(r, theta);
                    let s = resolvent::resolvent(a, lambda);
                    if s.in_resolvent_set {
                        r * s.norm_estimate
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn symmetric_angles(max_angle: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| -max_angle + 2.0 * max_angle * k as f64 / (count - 1) as f64)
        .collect()
}

/// Resolvent and derivative constants of an analytic semigroup.
///
/// `delta` is bisected on `[0, pi/2 - 0.01]` to [`SECTOR_RESOLUTION`]; an
/// angle passes when every eigenvalue lies strictly outside the sector
/// `|arg lambda| <= pi/2 + delta` and resolvents on its boundary rays stay
/// below the condition limit. The eta grid is augmented with the imaginary
/// parts of the spectrum. `t_grid` must span at least 4 decades.
pub fn check_sectorial(a: &OperatorHandle, eta_grid: &[f64], gamma_grid: &[f64], t_grid: &[f64]) -> Result<SectorReport> {
    if !resolvent::resolvent(a, c(0.0)).in_resolvent_set {
        return Err(precondition("sectorial check needs an invertible A"));
    }
    if eta_grid.iter().any(|&e| e == 0.0 || !e.is_finite())
        || gamma_grid.iter().any(|&g| !(g > 0.0))
        || t_grid.iter().any(|&t| !(t > 0.0))
    {
        return Err(precondition("grids must be positive with eta != 0"));
    }
    if gamma_grid.len() < 2 || eta_grid.is_empty() || t_grid.is_empty() {
        return Err(precondition("need at least two gammas and nonempty eta and t grids"));
    }
    let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    if t_max / t_min < 1e4 * (1.0 - 1e-12) {
        return Err(precondition("t grid must span at least 4 decades"));
    }
    let m = a.to_dense()?;
    let eig = linalg::eigenvalues(&m)?;
    let dense = OperatorHandle::from_dense(a.label(), m.clone())?;
    let a = &dense;
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let radii: Vec<f64> = (0..=40).map(|k| scale * 10f64.powf(-4.0 + 8.0 * k as f64 / 40.0)).collect();

    let admissible = |delta: f64| {
        let edge = PI / 2.0 + delta;
        eig.iter().all(|z| z.arg().abs() > edge)
            && [edge, -edge].iter().all(|&theta| {
                radii
                    .iter()
                    .all(|&r| resolvent::resolvent(a, Complex64::from_polar(r, theta)).in_resolvent_set)
            })
    };
    let delta = {
        let (mut lo, mut hi): (f64, f64) = (0.0, PI / 2.0 - SECTOR_RESOLUTION);
        if admissible(hi) {
            Some(hi)
        } else if !admissible(SECTOR_RESOLUTION) {
            None
        } else {
            lo = lo.max(SECTOR_RESOLUTION);
            while hi - lo > SECTOR_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if admissible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(lo)
        }
    };

    let right_half = symmetric_angles(PI / 2.0, 33);
    let k = fan_sup(a, &right_half, &radii);
    let k_sector = match delta {
        Some(d) => {
            let mut angles = right_half.clone();
            angles.extend(symmetric_angles(PI / 2.0 + d / 2.0, 9));
            fan_sup(a, &angles, &radii)
        }
        None => f64::INFINITY,
    };

    let mut etas: Vec<f64> = eta_grid.to_vec();
    etas.extend(eig.iter().map(|z| z.im).filter(|&e| e != 0.0));
    let mut gammas = gamma_grid.to_vec();
    gammas.sort_by(f64::total_cmp);
    let c_line_by_gamma: Vec<(f64, f64)> = gammas
        .par_iter()
        .map(|&g| {
            let v = etas
                .iter()
                .map(|&eta| {
                    let s = resolvent::resolvent(a, Complex64::new(g, eta));
                    if s.in_resolvent_set {
                        eta.abs() * s.norm_estimate
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max);
            (g, v)
        })
        .collect();
    let c_line = c_line_by_gamma.iter().map(|p| p.1).fold(0.0, f64::max);
    let (g0, c0) = c_line_by_gamma[0];
    let (g1, c1) = c_line_by_gamma[1];
    let c_line_diverges = !c0.is_finite() || c0 / c1 >= 0.99 * (g1 / g0);

    let l_samples: Vec<(f64, f64)> = t_grid
        .par_iter()
        .map(|&t| Ok((t, t * linalg::spectral_norm(&(&m * linalg::expm(&m, t)?)))))
        .collect::<Result<_>>()?;
    let l = l_samples.iter().map(|p| p.1).fold(0.0, f64::max);
    let decades = (t_max / t_min).log10().round().max(1.0) as usize;
    let mut l_by_decade = vec![0.0f64; decades];
    for &(t, v) in &l_samples {
        let d = (((t / t_min).log10()).floor().max(0.0) as usize).min(decades - 1);
        l_by_decade[d] = l_by_decade[d].max(v);
    }
    let hi = l_by_decade.iter().copied().fold(0.0, f64::max);
    let lo = l_by_decade.iter().copied().fold(f64::INFINITY, f64::min);
    let l_stable = hi > 0.0 && (hi - lo) / hi <= 0.2;

    let sectorial = delta.is_some() && k.is_finite() && k_sector.is_finite() && c_line.is_finite() && l.is_finite() && !c_line_diverges;
    Ok(SectorReport {
        delta,
        k,
        k_sector,
        c_line,
        c_line_by_gamma,
        c_line_diverges,
        l,
        l_samples,
        l_by_decade,
        l_stable,
        sectorial,
    })
}

/// Log-spaced grid with `per_decade` points per decade on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).round() as usize;
    (0..=count).map(|k| lo * 10f64.powf(decades * k as f64 / count as f64)).collect()
}

/// `A^n e^{tA} = (A e^{(t/n)A})^n` for `n <= n_max`, and finite-difference
/// derivatives of `t -> e^{tA}` against `A e^{tA}` and `A^2 e^{tA}`.
pub fn check_differentiable_identities(a: &OperatorHandle, t: f64, n_max: usize) -> Result<CheckReport> {
    if !(t > 0.0) {
        return Err(precondition(format!("t must be positive, got {t}")));
    }
    if n_max == 0 || n_max > 6 {
        return Err(precondition(format!("n_max must be in 1..=6, got {n_max}")));
    }
    let m = a.to_dense()?;
    let tt = linalg::expm(&m, t)?;
    let mut report = CheckReport::new("differentiable_identities");
    for n in 1..=n_max {
        let lhs = linalg::matrix_power(&m, n) * &tt;
        let step = &m * linalg::expm(&m, t / n as f64)?;
        let rhs = linalg::matrix_power(&step, n);
        let scale = linalg::spectral_norm(&lhs);
        let diff = linalg::spectral_norm(&(&lhs - rhs));
        let value = if scale > 0.0 { diff / scale } else { diff };
        report.at_most(format!("power_identity_n{n}"), value, 1e-9);
    }
    let t_norm = linalg::spectral_norm(&tt);
    let h1 = (1e-5 * t.max(1.0)).min(0.5 * t);
    let h2 = (1e-3 * t.max(1.0)).min(0.5 * t);
    if h1 < 1e-12 {
        return Err(precondition(format!("finite-difference step underflow at t = {t}")));
    }
    let at = &m * &tt;
    let fd1 = (linalg::expm(&m, t + h1)? - linalg::expm(&m, t - h1)?) / c(2.0 * h1);
    let tol1 = 1e-6 * linalg::spectral_norm(&at) + 1e-10 * t_norm;
    report.at_most("first_derivative", linalg::spectral_norm(&(fd1 - &at)), tol1);
    let a2t = &m * &at;
    let fd2 = (linalg::expm(&m, t + h2)? - &tt * c(2.0) + linalg::expm(&m, t - h2)?) / c(h2 * h2);
    let tol2 = 1e-4 * linalg::spectral_norm(&a2t) + 1e-7 * t_norm;
    report.at_most("second_derivative", linalg::spectral_norm(&(fd2 - &a2t)), tol2);
    Ok(report)
}

/// `FA = AF` if and only if `F e^{tA} = e^{tA} F` on the grid, exercised on
/// `F` and on a witness `F'` built from the matrix unit that fails to
/// commute with `A` the most.
pub fn check_commuting_bounded(a: &OperatorHandle, f: &CMatrix, t_grid: &[f64]) -> Result<CheckReport> {
    let m = a.to_dense()?;
    let n = m.nrows();
    if f.nrows() != n || f.ncols() != n {
        return Err(LabError::DimensionMismatch { expected: n, found: f.nrows() });
    }
    let semigroups: Vec<CMatrix> = t_grid.iter().map(|&t| linalg::expm(&m, t)).collect::<Result<_>>()?;
    let a_norm = linalg::spectral_norm(&m);
    let sg_commutator = |g: &CMatrix| {
        semigroups
            .iter()
            .map(|tt| linalg::spectral_norm(&(g * tt - tt * g)) / (linalg::spectral_norm(g) * linalg::spectral_norm(tt)).max(1.0))
            .fold(0.0, f64::max)
    };
    let gen_comm = linalg::spectral_norm(&(f * &m - &m * f));
    let gen_tol = 1e-9 * (linalg::spectral_norm(f) * a_norm).max(1.0);
    let sg_comm = sg_commutator(f);
    let commutes = gen_comm <= gen_tol;
    let mut report = CheckReport::new("commuting_bounded");
    report
        .require("equivalence", if commutes { sg_comm <= 1e-9 } else { sg_comm > 1e-9 })
        .metric("generator_commutator", gen_comm)
        .metric("semigroup_commutator", sg_comm);

    // witness: E_ij with the largest ||E_ij A - A E_ij||, scaled to unit commutator
    let mut best = (0.0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(i, j)] = c(1.0);
            let v = linalg::spectral_norm(&(&e * &m - &m * &e));
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    if best.0 > 1e-12 * a_norm.max(1.0) {
        let mut witness = CMatrix::zeros(n, n);
        witness[(best.1, best.2)] = c(1.0 / best.0);
        let w = semigroups
            .iter()
            .map(|tt| linalg::spectral_norm(&(&witness * tt - tt * &witness)))
            .fold(0.0, f64::max);
        report.at_least("witness_semigroup_commutator", w, 1e-3);
    } else {
        report.note("A is a multiple of the identity; no non-commuting witness exists");
    }
    Ok(report)
}
