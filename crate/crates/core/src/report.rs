//! Output artifacts: named-residual check reports and convergence tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Errors at or below this are treated as exact zeros when fitting orders.
pub const EXACT_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `value <= tolerance`
    #[default]
    AtMost,
    /// `value >= tolerance`
    AtLeast,
}

impl Bound {
    fn is_default(&self) -> bool {
        *self == Bound::AtMost
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub label: String,
    pub value: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Bound::is_default")]
    pub bound: Bound,
}

impl Residual {
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.tolerance,
            Bound::AtLeast => self.value >= self.tolerance,
        }
    }
}

/// Named residuals, each with its tolerance; `pass` is the conjunction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub residuals: Vec<Residual>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            pass: true,
            residuals: Vec::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, residual: Residual) -> &mut Self {
        self.residuals.push(residual);
        self.pass = self.residuals.iter().all(Residual::passed);
        self
    }

    pub fn at_most(&mut self, label: impl Into<String>, value: f64, tolerance: f64) -> &mut Self {
        self.push(Residual {
            label: label.into(),
            value,
            tolerance,
            bound: Bound::AtMost,
        })
    }

    pub fn at_least(&mut self, label: impl Into<String>, value: f64, tolerance: f64) -> &mut Self {
        self.push(Residual {
            label: label.into(),
            value,
            tolerance,
            bound: Bound::AtLeast,
        })
    }

    /// Boolean condition recorded as a violation count that must be zero.
    pub fn require(&mut self, label: impl Into<String>, holds: bool) -> &mut Self {
        self.at_most(label, if holds { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    pub fn residual(&self, label: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.label == label)
    }

    /// Largest `value / tolerance` over upper-bound residuals.
    pub fn worst_ratio(&self) -> f64 {
        self.residuals
            .iter()
            .filter(|r| r.bound == Bound::AtMost && r.tolerance > 0.0)
            .map(|r| r.value / r.tolerance)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per residual, then one per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,label,value,tolerance,pass\n");
        for r in &self.residuals {
            let _ = writeln!(out, "residual,{},{},{},{}", r.label, format_sci(r.value), format_sci(r.tolerance), r.passed());
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "metric,{k},{},,", format_sci(*v));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Refinement parameter: the product count `n`, or the shift for
    /// Yosida tables.
    pub n: f64,
    pub error: f64,
}

/// Error of a limit formula against its target, one row per refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub target: String,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `-log(error)` against `log(n)`.
    pub empirical_order: Option<f64>,
}

impl ConvergenceTable {
    pub fn new(target: impl Into<String>, mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| a.n.total_cmp(&b.n));
        let empirical_order = fit_order(&rows);
        ConvergenceTable {
            target: target.into(),
            rows,
            empirical_order,
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Every error is below [`EXACT_FLOOR`].
    pub fn is_exact(&self) -> bool {
        self.rows.iter().all(|r| r.error <= EXACT_FLOOR)
    }

    /// Order between consecutive rows; `None` for the first row or when
    /// either error is at the exact floor.
    pub fn running_orders(&self) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            out.push(if a.error > EXACT_FLOOR && b.error > EXACT_FLOOR {
                Some((a.error / b.error).ln() / (b.n / a.n).ln())
            } else {
                None
            });
        }
        out.truncate(self.rows.len());
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,error,order_running\n");
        for (row, order) in self.rows.iter().zip(self.running_orders()) {
            let _ = write!(out, "{},{}", format_param(row.n), format_sci(row.error));
            match order {
                Some(o) => {
                    let _ = writeln!(out, ",{}", format_sci(o));
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn order_label(&self) -> String {
        match self.empirical_order {
            Some(o) => format!("{o:.3}"),
            None if self.is_exact() => "exact".to_string(),
            None => "undefined".to_string(),
        }
    }
}

fn fit_order(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > EXACT_FLOOR && r.n > 0.0 && r.error.is_finite())
        .map(|r| (r.n.ln(), r.error.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// Scientific notation with 12 significant digits.
pub fn format_sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

fn format_param(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format_sci(n)
    }
}
