//! The standard bump `exp(-1/(1-x^2))` and its exact derivatives.
//!
//! The k-th derivative factors as `r_k(x) * bump(x)` with a rational
//! prefactor `r_k(x) = p_k(x) / (1-x^2)^(2k)`. The polynomials `p_k` are
//! produced once per order by the recurrence
//!
//!   p_{k+1} = p_k' * (1-x^2)^2 + 4k x p_k (1-x^2) - 2x p_k
//!
//! (denominator power 2k -> 2k+2) with integer coefficients, and cached.
//! Near the support boundary the prefactor has poles, but the bump factor
//! vanishes faster; evaluation clamps to 0 within 1e-12 of |x| = 1.

use std::sync::RwLock;

/// Clamp margin: within this distance of the support edge the kernel is 0.
pub const EDGE_CLAMP: f64 = 1e-12;

/// `exp(-1/(1-x^2))` for |x| < 1, exactly 0 otherwise.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 - EDGE_CLAMP {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

// p_k coefficients, ascending degree, exact integers. p_k has degree 3k-2.
// i128 stays exact comfortably past k = 16 (max coefficient of p_12 is ~2^45).
static PREFACTORS: RwLock<Vec<Vec<i128>>> = RwLock::new(Vec::new());

fn polynomial_for(k: usize) -> Vec<f64> {
    debug_assert!(k >= 1);
    {
        let cache = PREFACTORS.read().unwrap();
        if let Some(p) = cache.get(k - 1) {
            return p.iter().map(|&c| c as f64).collect();
        }
    }
    let mut cache = PREFACTORS.write().unwrap();
    if cache.is_empty() {
        // p_1 = -2x
        cache.push(vec![0, -2]);
    }
    while cache.len() < k {
        let order = cache.len(); // p_{order} known, produce p_{order+1}
        let p = cache.last().unwrap().clone();
        let m = 2 * order as i128;

        // p' * (1 - x^2)^2 = p' * (1 - 2x^2 + x^4)
        let dp: Vec<i128> = p
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as i128)
            .collect();
        let mut next = vec![0i128; p.len() + 3];
        for (i, &c) in dp.iter().enumerate() {
            next[i] += c;
            next[i + 2] -= 2 * c;
            next[i + 4] += c;
        }
        // + 2m x p (1 - x^2) = 2m (x p - x^3 p)
        for (i, &c) in p.iter().enumerate() {
            next[i + 1] += 2 * m * c;
            next[i + 3] -= 2 * m * c;
        }
        // - 2x p
        for (i, &c) in p.iter().enumerate() {
            next[i + 1] -= 2 * c;
        }
        while next.len() > 1 && *next.last().unwrap() == 0 {
            next.pop();
        }
        cache.push(next);
    }
    cache[k - 1].iter().map(|&c| c as f64).collect()
}

/// Exact k-th derivative of the bump, via the cached prefactor.
pub fn bump_deriv(k: usize, x: f64) -> f64 {
    if k == 0 {
        return bump(x);
    }
    let b = bump(x);
    if b == 0.0 {
        return 0.0;
    }
    let p = polynomial_for(k);
    // Horner
    let mut num = 0.0;
    for &c in p.iter().rev() {
        num = num * x + c;
    }
    let den = (1.0 - x * x).powi(2 * k as i32);
    num / den * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_center_and_outside() {
        assert!((bump(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(bump(1.5), 0.0);
        assert_eq!(bump(-1.0), 0.0);
        assert_eq!(bump(1.0 - 5e-13), 0.0);
    }

    #[test]
    fn second_derivative_at_zero_is_minus_two_over_e() {
        // r_2 = (6x^4 - 2)/(1-x^2)^4, so bump''(0) = -2/e.
        let expect = -2.0 * (-1.0f64).exp();
        assert!((bump_deriv(2, 0.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for k in 1..=6usize {
            for &x in &[-0.7, -0.3, 0.1, 0.45, 0.8] {
                let fd = (bump_deriv(k - 1, x + h) - bump_deriv(k - 1, x - h)) / (2.0 * h);
                let exact = bump_deriv(k, x);
                let scale = 1.0 + exact.abs();
                assert!(
                    (fd - exact).abs() / scale < 1e-5,
                    "k={k} x={x}: fd={fd} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn high_order_derivatives_vanish_outside_support() {
        for k in 0..=8 {
            for &x in &[-2.0, -1.0, 1.0, 1.0000001, 3.0] {
                assert_eq!(bump_deriv(k, x), 0.0, "k={k} x={x}");
            }
        }
    }
}
