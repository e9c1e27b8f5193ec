//! Exact symbolic differentiation.
//!
//! The AST is closed: anti-derivative nodes differentiate back to their body
//! in their own axis and commute with the others, the bump differentiates
//! into `bump_deriv` kernels, and the bounded integral is constant in its
//! integration axis.

use super::{ExprKind, Expression};

impl Expression {
    /// Partial derivative with respect to coordinate `axis` (zero-based).
    pub fn derivative(&self, axis: usize) -> Expression {
        if !self.depends_on(axis) {
            return Expression::constant(0.0);
        }
        match self.kind() {
            ExprKind::Const(_) | ExprKind::Omega | ExprKind::OmegaCeilPow(_) => {
                Expression::constant(0.0)
            }
            ExprKind::Coord(i) => {
                Expression::constant(if *i == axis { 1.0 } else { 0.0 })
            }
            ExprKind::Sum(a, b) => Expression::sum(a.derivative(axis), b.derivative(axis)),
            ExprKind::Product(a, b) => Expression::sum(
                Expression::product(a.derivative(axis), b.clone()),
                Expression::product(a.clone(), b.derivative(axis)),
            ),
            ExprKind::Quotient(num, den) => {
                // (u/v)' = (u'v - uv') / v^2
                let u = num.clone();
                let v = den.clone();
                Expression::quotient(
                    Expression::sub(
                        Expression::product(num.derivative(axis), v.clone()),
                        Expression::product(u, den.derivative(axis)),
                    ),
                    Expression::int_pow(v, 2),
                )
            }
            ExprKind::IntPow(base, k) => Expression::product(
                Expression::product(
                    Expression::constant(*k as f64),
                    Expression::int_pow(base.clone(), k - 1),
                ),
                base.derivative(axis),
            ),
            ExprKind::Sin(a) => {
                Expression::product(Expression::cos(a.clone()), a.derivative(axis))
            }
            ExprKind::Cos(a) => Expression::product(
                Expression::neg(Expression::sin(a.clone())),
                a.derivative(axis),
            ),
            ExprKind::Exp(a) => {
                Expression::product(Expression::exp(a.clone()), a.derivative(axis))
            }
            ExprKind::Bump(a) => {
                Expression::product(Expression::bump_deriv(1, a.clone()), a.derivative(axis))
            }
            ExprKind::BumpDeriv(k, a) => {
                Expression::product(Expression::bump_deriv(k + 1, a.clone()), a.derivative(axis))
            }
            ExprKind::Antideriv { body, axis: v, lower } => {
                if *v == axis {
                    body.clone()
                } else {
                    Expression::antideriv(body.derivative(axis), *v, *lower)
                }
            }
            ExprKind::DefInt { body, axis: v, lower, upper } => {
                // depends_on already excludes axis == *v
                Expression::defint(body.derivative(axis), *v, *lower, *upper)
            }
        }
    }

    /// Apply `d^alpha`: `alpha[i]` derivatives in coordinate `i`, in axis
    /// order (mixed partials commute, see the property tests).
    pub fn differentiate(&self, alpha: &[usize]) -> Expression {
        let mut e = self.clone();
        for (axis, &count) in alpha.iter().enumerate() {
            for _ in 0..count {
                e = e.derivative(axis);
            }
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_rule_on_modulated_sine() {
        // d/dx sin(w x) = w cos(w x)
        let e = Expression::sin(Expression::product(Expression::omega(), Expression::coord(0)));
        let d = e.derivative(0);
        let expect = Expression::product(
            Expression::cos(Expression::product(Expression::omega(), Expression::coord(0))),
            Expression::omega(),
        );
        assert_eq!(d, expect);
    }

    #[test]
    fn antideriv_collapses_in_its_own_axis() {
        let f = Expression::sin(Expression::coord(0));
        let anti = Expression::antideriv(f.clone(), 0, -0.5);
        assert_eq!(anti.differentiate(&[1]), f);
    }

    #[test]
    fn antideriv_commutes_with_other_axes() {
        let f = Expression::product(
            Expression::sin(Expression::coord(0)),
            Expression::coord(1),
        );
        let anti = Expression::antideriv(f.clone(), 0, 0.0);
        let d = anti.differentiate(&[0, 1]);
        // d/dy antideriv(f, x) = antideriv(d/dy f, x)
        let inner = match d.kind() {
            ExprKind::Antideriv { body, axis: 0, .. } => body.clone(),
            other => panic!("expected antideriv, got {other:?}"),
        };
        assert_eq!(inner, f.derivative(1));
    }

    #[test]
    fn defint_is_constant_in_its_axis() {
        let body = Expression::product(
            Expression::bump(Expression::coord(0)),
            Expression::coord(1),
        );
        let d = Expression::defint(body, 0, -1.0, 1.0);
        assert_eq!(d.derivative(0).as_const(), Some(0.0));
        assert!(!d.derivative(1).as_const().is_some());
    }

    #[test]
    fn bump_chain() {
        let e = Expression::bump(Expression::coord(0));
        let d2 = e.differentiate(&[2]);
        // second derivative is bump_deriv(2)(x) (chain factors fold to 1)
        assert_eq!(d2, Expression::bump_deriv(2, Expression::coord(0)));
    }
}
