//! Gauss-Legendre rules, single-panel and composite.

use std::f64::consts::PI;

/// Largest per-panel order used by the composite rule.
pub const PANEL_ORDER: usize = 8;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature points `(x, w)` on `[a, b]`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub points: Vec<(f64, f64)>,
}

impl Rule {
    /// Single-panel Gauss-Legendre with `n` nodes on `[a, b]`.
    pub fn gauss(a: f64, b: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule {
            points: x.iter().zip(&w).map(|(&x, &w)| (mid + half * x, half * w)).collect(),
        }
    }

    /// `panels` equal panels of order `order`.
    pub fn panels(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut points = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + width * p as f64;
            let mid = lo + 0.5 * width;
            for (&x, &w) in x.iter().zip(&w) {
                points.push((mid + 0.5 * width * x, 0.5 * width * w));
            }
        }
        Rule { points }
    }

    /// About `total` nodes split into panels of at most [`PANEL_ORDER`].
    pub fn composite(a: f64, b: f64, total: usize) -> Self {
        let total = total.max(1);
        let order = total.min(PANEL_ORDER);
        Self::panels(a, b, total.div_ceil(order), order)
    }

    /// One panel of order `order` between each pair of consecutive edges.
    pub fn from_edges(edges: &[f64], order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut points = Vec::with_capacity(edges.len().saturating_sub(1) * order);
        for pair in edges.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            let mid = 0.5 * (pair[0] + pair[1]);
            points.extend(x.iter().zip(&w).map(|(&x, &w)| (mid + half * x, half * w)));
        }
        Rule { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().map(|&(x, w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 33, 64] {
            let (_, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_degree_two_n_minus_one() {
        let rule = Rule::gauss(0.0, 2.0, 4);
        // x^7 over [0, 2] = 2^8 / 8
        assert_relative_eq!(rule.integrate(|x| x.powi(7)), 32.0, epsilon = 1e-12);
    }

    #[test]
    fn composite_integrates_exponential() {
        let rule = Rule::composite(0.0, 1.0, 32);
        assert_eq!(rule.len(), 32);
        assert_relative_eq!(rule.integrate(f64::exp), 1f64.exp() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn three_point_nodes() {
        let (x, w) = gauss_legendre(3);
        assert_relative_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_eq!(x[1], 0.0);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
    }
}
