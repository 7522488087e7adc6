//! Gauss-Legendre rules on `[-1, 1]`, mapped to arbitrary intervals.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `order`-point rule, exact for polynomials of degree `2 order - 1`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
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
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + r * x, r * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule on `pieces` equal subintervals.
    pub fn integrate_composite(
        &self,
        a: f64,
        b: f64,
        pieces: usize,
        f: impl Fn(f64) -> f64,
    ) -> f64 {
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let lo = a + h * k as f64;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        for n in 1..=20 {
            let gl = GaussLegendre::new(n);
            let wsum: f64 = gl.weights().iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "order {n}");
            for deg in 0..(2 * n) {
                let got = gl.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-13, "order {n}, degree {deg}: {got}");
            }
        }
    }

    #[test]
    fn known_nodes() {
        let gl = GaussLegendre::new(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((gl.nodes()[0] + r).abs() < 1e-15 && (gl.nodes()[1] - r).abs() < 1e-15);
        let gl = GaussLegendre::new(3);
        assert_eq!(gl.nodes()[1], 0.0);
        assert!((gl.weights()[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_integrand() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate_composite(0.0, PI, 4, f64::sin);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
