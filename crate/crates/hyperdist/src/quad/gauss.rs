//! Gauss-Legendre panel rules of arbitrary order.
//!
//! Besides nodes and weights, each rule carries the integrated Lagrange
//! basis `B_j(s) = integral_{-1}^{s} L_j(t) dt`, which turns the stored node
//! values of a panel into partial integrals up to any interior point without
//! re-evaluating the integrand (used by the cumulative anti-derivative
//! tables). `B_j(1)` recovers the Gauss weight `w_j`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

#[derive(Debug)]
pub struct PanelRule {
    pub order: usize,
    /// Nodes on (-1, 1), ascending.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Ascending monomial coefficients of B_j, degree = order.
    cum_basis: Vec<Vec<f64>>,
}

impl PanelRule {
    fn build(order: usize) -> Self {
        assert!(order >= 2, "panel order must be at least 2");
        let (nodes, weights) = legendre_nodes(order);
        let mut cum_basis = Vec::with_capacity(order);
        for j in 0..order {
            // monomial coefficients of L_j
            let mut c = vec![1.0f64];
            let mut denom = 1.0;
            for m in 0..order {
                if m == j {
                    continue;
                }
                // multiply by (t - nodes[m])
                let mut next = vec![0.0; c.len() + 1];
                for (i, &ci) in c.iter().enumerate() {
                    next[i] -= nodes[m] * ci;
                    next[i + 1] += ci;
                }
                c = next;
                denom *= nodes[j] - nodes[m];
            }
            for ci in c.iter_mut() {
                *ci /= denom;
            }
            // integrate: B_j' = L_j, fix B_j(-1) = 0
            let mut b = vec![0.0; c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                b[i + 1] = ci / (i as f64 + 1.0);
            }
            let at_minus_one: f64 = b
                .iter()
                .enumerate()
                .map(|(i, &bi)| bi * (-1.0f64).powi(i as i32))
                .sum();
            b[0] = -at_minus_one;
            cum_basis.push(b);
        }
        PanelRule { order, nodes, weights, cum_basis }
    }

    /// Fill `out[j] = B_j(sigma)` for sigma in [-1, 1].
    pub fn partial_weights(&self, sigma: f64, out: &mut [f64]) {
        for (j, b) in self.cum_basis.iter().enumerate() {
            let mut acc = 0.0;
            for &c in b.iter().rev() {
                acc = acc * sigma + c;
            }
            out[j] = acc;
        }
    }
}

/// Nodes and weights of the order-n Gauss-Legendre rule on (-1, 1), by
/// Newton iteration on the Legendre polynomial.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

static RULES: RwLock<Option<HashMap<usize, Arc<PanelRule>>>> = RwLock::new(None);

pub fn panel_rule(order: usize) -> Arc<PanelRule> {
    {
        let guard = RULES.read().unwrap();
        if let Some(map) = guard.as_ref() {
            if let Some(rule) = map.get(&order) {
                return Arc::clone(rule);
            }
        }
    }
    let rule = Arc::new(PanelRule::build(order));
    let mut guard = RULES.write().unwrap();
    guard
        .get_or_insert_with(HashMap::new)
        .entry(order)
        .or_insert_with(|| Arc::clone(&rule))
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_eight_matches_reference() {
        // reference values for the 8-point rule
        let expect_nodes = [
            -9.6028985649753618e-01,
            -7.9666647741362673e-01,
            -5.2553240991632899e-01,
            -1.8343464249564978e-01,
            1.8343464249564978e-01,
            5.2553240991632899e-01,
            7.9666647741362673e-01,
            9.6028985649753618e-01,
        ];
        let expect_weights = [
            1.0122853629037669e-01,
            2.2238103445337434e-01,
            3.1370664587788705e-01,
            3.6268378337836177e-01,
            3.6268378337836177e-01,
            3.1370664587788705e-01,
            2.2238103445337434e-01,
            1.0122853629037669e-01,
        ];
        let rule = panel_rule(8);
        for i in 0..8 {
            assert!((rule.nodes[i] - expect_nodes[i]).abs() < 1e-14, "node {i}");
            assert!((rule.weights[i] - expect_weights[i]).abs() < 1e-14, "weight {i}");
        }
    }

    #[test]
    fn partial_weights_at_endpoints() {
        let rule = panel_rule(8);
        let mut b = [0.0; 8];
        rule.partial_weights(-1.0, &mut b);
        for (j, &v) in b.iter().enumerate() {
            assert!(v.abs() < 1e-13, "B_{j}(-1) = {v}");
        }
        rule.partial_weights(1.0, &mut b);
        for (j, &v) in b.iter().enumerate() {
            assert!((v - rule.weights[j]).abs() < 1e-12, "B_{j}(1) = {v}");
        }
    }

    #[test]
    fn partial_integral_of_polynomial_is_exact() {
        // integral of t^5 over [-1, s] via the basis equals the closed form
        let rule = panel_rule(8);
        let vals: Vec<f64> = rule.nodes.iter().map(|&t| t.powi(5)).collect();
        let mut b = [0.0; 8];
        for &s in &[-0.8, -0.3, 0.0, 0.4, 0.9] {
            rule.partial_weights(s, &mut b);
            let got: f64 = vals.iter().zip(&b).map(|(v, w)| v * w).sum();
            let expect = (s.powi(6) - 1.0) / 6.0;
            assert!((got - expect).abs() < 1e-13, "s={s}: {got} vs {expect}");
        }
    }
}
