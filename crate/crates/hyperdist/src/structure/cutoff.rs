//! Smooth cutoffs that are exactly 1 on an inner box and supported in an
//! outer box.
//!
//! Per axis the cutoff is the partition ratio `A / (A + B_l + B_r)` where
//! `A` is a bump spanning the outer interval and `B_l`, `B_r` are bumps
//! covering the two transition collars, vanishing to all orders exactly at
//! the inner endpoints. On the inner interval the denominator reduces to
//! `A`, so the ratio is exactly 1 there (and all its derivatives vanish on
//! the closed inner interval); outside the outer interval the numerator is
//! exactly 0. The 0/0 region beyond every support evaluates to 0 by the
//! quotient rule.

use crate::expr::Expression;
use crate::quad::CompactBox;

fn bump_on(lo: f64, hi: f64, axis: usize) -> Expression {
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    Expression::bump(Expression::quotient(
        Expression::sub(Expression::coord(axis), Expression::constant(c)),
        Expression::constant(r),
    ))
}

/// Tensor-product cutoff: exactly 1 on `inner`, supported in `outer`.
/// `inner` must be strictly inside `outer` on every axis.
pub fn cutoff_expr(inner: &CompactBox, outer: &CompactBox) -> Expression {
    assert_eq!(inner.dimension(), outer.dimension());
    let mut acc: Option<Expression> = None;
    for i in 0..inner.dimension() {
        let (p, q) = inner.axis(i);
        let (cap_p, cap_q) = outer.axis(i);
        assert!(
            cap_p < p && q < cap_q,
            "inner box must be strictly inside the outer box on axis {i}"
        );
        let a = bump_on(cap_p, cap_q, i);
        // collars vanish flat exactly at p and q and cover past the outer edge
        let b_left = bump_on(p - 2.0 * (p - cap_p), p, i);
        let b_right = bump_on(q, q + 2.0 * (cap_q - q), i);
        let den = Expression::sum(Expression::sum(a.clone(), b_left), b_right);
        let c = Expression::quotient(a, den);
        acc = Some(match acc {
            None => c,
            Some(prod) => Expression::product(prod, c),
        });
    }
    acc.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::NoPrimitives;

    #[test]
    fn exactly_one_inside_and_zero_outside() {
        let inner = CompactBox::new(vec![(-1.0, 1.0)]);
        let outer = CompactBox::new(vec![(-1.25, 1.25)]);
        let c = cutoff_expr(&inner, &outer);
        for &x in &[-1.0, -0.99, -0.5, 0.0, 0.7, 1.0] {
            assert_eq!(c.eval_at(&[x], 1.0, &NoPrimitives).unwrap(), 1.0, "x={x}");
        }
        for &x in &[-3.0, -1.5, -1.25, 1.25, 1.5, 2.0, 10.0] {
            assert_eq!(c.eval_at(&[x], 1.0, &NoPrimitives).unwrap(), 0.0, "x={x}");
        }
        // strictly between 0 and 1 in the collar
        for &x in &[-1.2, -1.1, 1.1, 1.2] {
            let v = c.eval_at(&[x], 1.0, &NoPrimitives).unwrap();
            assert!(v > 0.0 && v < 1.0, "x={x}: {v}");
        }
    }

    #[test]
    fn derivatives_vanish_on_the_inner_box() {
        let inner = CompactBox::new(vec![(-1.0, 1.0)]);
        let outer = CompactBox::new(vec![(-1.25, 1.25)]);
        let c = cutoff_expr(&inner, &outer);
        for order in 1..=3usize {
            let d = c.differentiate(&[order]);
            for &x in &[-1.0, -0.3, 0.0, 1.0] {
                let v = d.eval_at(&[x], 1.0, &NoPrimitives).unwrap();
                assert_eq!(v, 0.0, "order={order} x={x}");
            }
        }
    }

    #[test]
    fn two_dimensional_cutoff() {
        let inner = CompactBox::new(vec![(-1.0, 1.0), (0.0, 2.0)]);
        let outer = CompactBox::new(vec![(-1.5, 1.5), (-0.5, 2.5)]);
        let c = cutoff_expr(&inner, &outer);
        assert_eq!(c.eval_at(&[0.0, 1.0], 1.0, &NoPrimitives).unwrap(), 1.0);
        assert_eq!(c.eval_at(&[0.0, 3.0], 1.0, &NoPrimitives).unwrap(), 0.0);
        assert_eq!(c.eval_at(&[2.0, 1.0], 1.0, &NoPrimitives).unwrap(), 0.0);
        let v = c.eval_at(&[1.2, 1.0], 1.0, &NoPrimitives).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}
