//! Numeric evaluation, scalar and batched.
//!
//! Anti-derivative and bounded-integral nodes delegate to a
//! [`PrimitiveEvaluator`] (implemented by the quadrature module), so the
//! expression layer stays independent of the integration machinery.
//!
//! The batched path evaluates a whole point set per tree node over flat
//! buffers; sweeps over quadrature grids and sampling grids run through it.

use super::{bump, ExprKind, Expression};
use crate::error::EvalError;

/// Supplies values of anti-derivative and bounded-integral nodes.
pub trait PrimitiveEvaluator: Sync {
    /// `integral_lower^{x_axis} body(t, x~) dt` at `point` (sign convention:
    /// an upper limit below `lower` yields the negated value).
    fn antideriv_value(
        &self,
        body: &Expression,
        axis: usize,
        lower: f64,
        point: &[f64],
        omega: f64,
    ) -> Result<f64, EvalError>;

    /// `integral_lower^upper body dt` along `axis` with the remaining
    /// coordinates read from `point` (the axis entry of `point` is ignored).
    fn defint_value(
        &self,
        body: &Expression,
        axis: usize,
        lower: f64,
        upper: f64,
        point: &[f64],
        omega: f64,
    ) -> Result<f64, EvalError>;
}

/// A primitive evaluator that rejects integral nodes; usable when the
/// expression is known to be integral-free.
pub struct NoPrimitives;

impl PrimitiveEvaluator for NoPrimitives {
    fn antideriv_value(
        &self,
        _body: &Expression,
        _axis: usize,
        _lower: f64,
        _point: &[f64],
        _omega: f64,
    ) -> Result<f64, EvalError> {
        panic!("expression contains antideriv nodes but no quadrature was supplied")
    }

    fn defint_value(
        &self,
        _body: &Expression,
        _axis: usize,
        _lower: f64,
        _upper: f64,
        _point: &[f64],
        _omega: f64,
    ) -> Result<f64, EvalError> {
        panic!("expression contains defint nodes but no quadrature was supplied")
    }
}

fn quotient_value(num: f64, den: f64) -> Result<f64, EvalError> {
    if den == 0.0 {
        // Partition-of-unity cutoffs evaluate to 0/0 outside the union of
        // their supports; the limit value there is 0.
        if num == 0.0 {
            Ok(0.0)
        } else {
            Err(EvalError::DivisionByZero)
        }
    } else {
        Ok(num / den)
    }
}

fn int_pow_value(base: f64, k: i32) -> Result<f64, EvalError> {
    if base == 0.0 && k < 0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(base.powi(k))
}

impl Expression {
    /// Evaluate at a single point.
    pub fn eval_at(
        &self,
        point: &[f64],
        omega: f64,
        prim: &dyn PrimitiveEvaluator,
    ) -> Result<f64, EvalError> {
        match self.kind() {
            ExprKind::Const(c) => Ok(*c),
            ExprKind::Coord(i) => Ok(point[*i]),
            ExprKind::Omega => Ok(omega),
            ExprKind::Sum(a, b) => Ok(a.eval_at(point, omega, prim)? + b.eval_at(point, omega, prim)?),
            ExprKind::Product(a, b) => {
                Ok(a.eval_at(point, omega, prim)? * b.eval_at(point, omega, prim)?)
            }
            ExprKind::Quotient(a, b) => {
                quotient_value(a.eval_at(point, omega, prim)?, b.eval_at(point, omega, prim)?)
            }
            ExprKind::IntPow(a, k) => int_pow_value(a.eval_at(point, omega, prim)?, *k),
            ExprKind::Sin(a) => Ok(a.eval_at(point, omega, prim)?.sin()),
            ExprKind::Cos(a) => Ok(a.eval_at(point, omega, prim)?.cos()),
            ExprKind::Exp(a) => Ok(a.eval_at(point, omega, prim)?.exp()),
            ExprKind::Bump(a) => Ok(bump::bump(a.eval_at(point, omega, prim)?)),
            ExprKind::BumpDeriv(k, a) => {
                Ok(bump::bump_deriv(*k as usize, a.eval_at(point, omega, prim)?))
            }
            ExprKind::Antideriv { body, axis, lower } => {
                prim.antideriv_value(body, *axis, *lower, point, omega)
            }
            ExprKind::DefInt { body, axis, lower, upper } => {
                prim.defint_value(body, *axis, *lower, *upper, point, omega)
            }
            ExprKind::OmegaCeilPow(p) => Ok(omega.powf(*p).ceil()),
        }
    }

    /// Evaluate over a point set given as per-coordinate slices (all the same
    /// length). Results are written to `out`, which is cleared first.
    pub fn eval_batch(
        &self,
        coords: &[&[f64]],
        omega: f64,
        prim: &dyn PrimitiveEvaluator,
        buffers: &mut BatchBuffers,
        out: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        let len = coords.first().map_or(0, |c| c.len());
        debug_assert!(coords.iter().all(|c| c.len() == len));
        out.clear();
        out.resize(len, 0.0);
        self.fill_batch(coords, omega, prim, buffers, out)
    }

    fn fill_batch(
        &self,
        coords: &[&[f64]],
        omega: f64,
        prim: &dyn PrimitiveEvaluator,
        buffers: &mut BatchBuffers,
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        match self.kind() {
            ExprKind::Const(c) => out.fill(*c),
            ExprKind::Coord(i) => out.copy_from_slice(coords[*i]),
            ExprKind::Omega => out.fill(omega),
            ExprKind::Sum(a, b) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                let mut tmp = buffers.take(out.len());
                b.fill_batch(coords, omega, prim, buffers, &mut tmp)?;
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += t;
                }
                buffers.put(tmp);
            }
            ExprKind::Product(a, b) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                let mut tmp = buffers.take(out.len());
                b.fill_batch(coords, omega, prim, buffers, &mut tmp)?;
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o *= t;
                }
                buffers.put(tmp);
            }
            ExprKind::Quotient(a, b) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                let mut tmp = buffers.take(out.len());
                b.fill_batch(coords, omega, prim, buffers, &mut tmp)?;
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o = quotient_value(*o, *t)?;
                }
                buffers.put(tmp);
            }
            ExprKind::IntPow(a, k) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                for o in out.iter_mut() {
                    *o = int_pow_value(*o, *k)?;
                }
            }
            ExprKind::Sin(a) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                for o in out.iter_mut() {
                    *o = o.sin();
                }
            }
            ExprKind::Cos(a) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                for o in out.iter_mut() {
                    *o = o.cos();
                }
            }
            ExprKind::Exp(a) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                for o in out.iter_mut() {
                    *o = o.exp();
                }
            }
            ExprKind::Bump(a) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                for o in out.iter_mut() {
                    *o = bump::bump(*o);
                }
            }
            ExprKind::BumpDeriv(k, a) => {
                a.fill_batch(coords, omega, prim, buffers, out)?;
                for o in out.iter_mut() {
                    *o = bump::bump_deriv(*k as usize, *o);
                }
            }
            ExprKind::Antideriv { body, axis, lower } => {
                let mut point = vec![0.0; coords.len()];
                // prime the cumulative table with the extreme queries so its
                // range is established once instead of growing incrementally
                if out.len() > 2 {
                    let axis_vals = coords[*axis];
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    let (mut lo_i, mut hi_i) = (0usize, 0usize);
                    for (i, &v) in axis_vals.iter().enumerate() {
                        if v < lo {
                            lo = v;
                            lo_i = i;
                        }
                        if v > hi {
                            hi = v;
                            hi_i = i;
                        }
                    }
                    for idx in [lo_i, hi_i] {
                        for (j, c) in coords.iter().enumerate() {
                            point[j] = c[idx];
                        }
                        prim.antideriv_value(body, *axis, *lower, &point, omega)?;
                    }
                }
                for (idx, o) in out.iter_mut().enumerate() {
                    for (j, c) in coords.iter().enumerate() {
                        point[j] = c[idx];
                    }
                    *o = prim.antideriv_value(body, *axis, *lower, &point, omega)?;
                }
            }
            ExprKind::DefInt { body, axis, lower, upper } => {
                let mut point = vec![0.0; coords.len()];
                for (idx, o) in out.iter_mut().enumerate() {
                    for (j, c) in coords.iter().enumerate() {
                        point[j] = c[idx];
                    }
                    *o = prim.defint_value(body, *axis, *lower, *upper, &point, omega)?;
                }
            }
            ExprKind::OmegaCeilPow(p) => out.fill(omega.powf(*p).ceil()),
        }
        Ok(())
    }
}

/// Reusable scratch buffers for batched evaluation.
#[derive(Default)]
pub struct BatchBuffers {
    pool: Vec<Vec<f64>>,
}

impl BatchBuffers {
    pub fn new() -> Self {
        Self::default()
    }

    fn take(&mut self, len: usize) -> Vec<f64> {
        let mut v = self.pool.pop().unwrap_or_default();
        v.clear();
        v.resize(len, 0.0);
        v
    }

    fn put(&mut self, v: Vec<f64>) {
        if self.pool.len() < 64 {
            self.pool.push(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn scalar_matches_batch() {
        let e = parse("omega^-1*sin(omega*x)+bump(x)*x^2", 1).unwrap();
        let xs: Vec<f64> = (0..100).map(|i| -0.99 + 0.02 * i as f64).collect();
        let mut buffers = BatchBuffers::new();
        let mut out = Vec::new();
        e.eval_batch(&[&xs], 2.0, &NoPrimitives, &mut buffers, &mut out).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            let s = e.eval_at(&[x], 2.0, &NoPrimitives).unwrap();
            assert_eq!(s, out[i]);
        }
    }

    #[test]
    fn eval_examples() {
        // omega^-1 sin(omega x) at x=1, omega=2 -> sin(2)/2
        let e = parse("omega^-1*sin(omega*x)", 1).unwrap();
        let v = e.eval_at(&[1.0], 2.0, &NoPrimitives).unwrap();
        assert!((v - 2.0f64.sin() / 2.0).abs() < 1e-15);
        assert!((v - 0.45464871341284085).abs() < 1e-12);

        let b = parse("bump(x)", 1).unwrap();
        assert!((b.eval_at(&[0.0], 1.0, &NoPrimitives).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(b.eval_at(&[1.5], 1.0, &NoPrimitives).unwrap(), 0.0);
    }

    #[test]
    fn zero_over_zero_is_zero() {
        // bump(x)/bump(x) outside the support
        let e = parse("bump(x)/bump(x)", 1).unwrap();
        assert_eq!(e.eval_at(&[2.0], 1.0, &NoPrimitives).unwrap(), 0.0);
        assert_eq!(e.eval_at(&[0.3], 1.0, &NoPrimitives).unwrap(), 1.0);
    }

    #[test]
    fn division_by_zero_with_nonzero_numerator_errors() {
        let e = parse("1/bump(x)", 1).unwrap();
        assert!(matches!(
            e.eval_at(&[2.0], 1.0, &NoPrimitives),
            Err(EvalError::DivisionByZero)
        ));
    }
}
