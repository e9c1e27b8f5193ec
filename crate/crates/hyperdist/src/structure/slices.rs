//! Mollified slices and polynomial-coefficient reconstruction through
//! Vandermonde systems.

use crate::error::StructureError;
use crate::expr::{Expression, NetFunction};
use crate::pairing::{mollifier_expr, MollifierScale};
use crate::net::OmegaGrid;
use crate::quad::Quadrature;

/// Minimum pairwise gap between slice points, as a fraction of the axis
/// length (the quantitative form of `c_i !~ c_j`).
pub const SLICE_SEPARATION_FRACTION: f64 = 0.1;

/// Chebyshev-style points scaled into the middle 60% of the interval, with
/// the separation guard enforced.
pub fn slice_points(interval: (f64, f64), count: usize) -> Result<Vec<f64>, StructureError> {
    assert!(count >= 1);
    let (a, b) = interval;
    let len = b - a;
    let mid = 0.5 * (a + b);
    let span = 0.3 * len; // middle 60%
    let mut pts: Vec<f64> = if count == 1 {
        vec![mid]
    } else {
        (0..count)
            .map(|j| {
                let theta = std::f64::consts::PI * (2.0 * j as f64 + 1.0) / (2.0 * count as f64);
                mid - span * theta.cos()
            })
            .collect()
    };
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let required = SLICE_SEPARATION_FRACTION * len;
    for w in pts.windows(2) {
        let gap = w[1] - w[0];
        if gap < required {
            return Err(StructureError::SliceSeparation { min_gap: gap, required });
        }
    }
    Ok(pts)
}

/// The averaged slice `x~ |-> integral f(t, x~) psi_M(c - t) dt` with
/// mollifier scale `M = ceil(omega^theta)`. The result lives on the full
/// domain but is structurally independent of `axis`; for S-continuous `f`
/// it recovers `f(c, x~)` up to an infinitesimal.
pub fn mollified_slice(
    quad: &Quadrature,
    f: &NetFunction,
    axis: usize,
    c: f64,
    theta: f64,
    grid: &OmegaGrid,
) -> Result<NetFunction, StructureError> {
    let scale = MollifierScale::OmegaCeilPow(theta);
    let width = 1.0 / scale.min_scale(grid.min_omega());
    let (da, db) = f.domain().axis(axis);
    if !(c - width > da && c + width < db) {
        return Err(StructureError::SliceMargin { center: c, margin: width });
    }
    let psi = mollifier_expr(quad, axis, c, &scale);
    let body = Expression::product(f.expr().clone(), psi);
    let slice = Expression::defint(body, axis, c - width, c + width);
    debug_assert!(!slice.depends_on(axis));
    Ok(f.with_expr(slice))
}

/// Result of a 1-axis Vandermonde reconstruction.
#[derive(Debug, Clone)]
pub struct VandermondeSolve {
    /// Coefficient nets: `coefficients[j]` multiplies the degree-`j`
    /// monomial of the axis.
    pub coefficients: Vec<Expression>,
    pub determinant: f64,
    /// The closed form `prod_{i<j} (c_j - c_i)`.
    pub determinant_formula: f64,
    /// `max |V X - I|` of the inverse used.
    pub residual: f64,
}

/// Solve the Vandermonde system mapping monomial coefficients to slice
/// values: given slices `s_i ~= sum_j coeff_j c_i^j`, return the coefficient
/// nets as linear combinations of the slice expressions.
pub fn vandermonde_reconstruct(
    slices: &[(f64, NetFunction)],
    degree: usize,
    axis_len: f64,
) -> Result<VandermondeSolve, StructureError> {
    assert_eq!(slices.len(), degree, "need exactly `degree` slice points");
    let points: Vec<f64> = slices.iter().map(|s| s.0).collect();
    let required = SLICE_SEPARATION_FRACTION * axis_len;
    for i in 0..degree {
        for j in i + 1..degree {
            let gap = (points[j] - points[i]).abs();
            if gap < required {
                return Err(StructureError::SliceSeparation { min_gap: gap, required });
            }
        }
    }
    let v = vandermonde_matrix(&points);
    let (inv, det) = invert(&v)?;
    let residual = inverse_residual(&v, &inv);
    if residual > 1e-8 {
        return Err(StructureError::SolveResidual { residual });
    }
    let mut coefficients = Vec::with_capacity(degree);
    for j in 0..degree {
        // coeff_j = sum_i inv[j][i] * slice_i
        let mut acc: Option<Expression> = None;
        for (i, (_, s)) in slices.iter().enumerate() {
            let term =
                Expression::product(Expression::constant(inv[j][i]), s.expr().clone());
            acc = Some(match acc {
                None => term,
                Some(prev) => Expression::sum(prev, term),
            });
        }
        coefficients.push(acc.unwrap());
    }
    Ok(VandermondeSolve {
        coefficients,
        determinant: det,
        determinant_formula: vandermonde_det_formula(&points),
        residual,
    })
}

/// Result of the Kronecker (two-axis) reconstruction.
#[derive(Debug, Clone)]
pub struct VandermondeSolve2d {
    /// `coefficients[j1][j2]` multiplies `x_{a1}^{j1} x_{a2}^{j2}`.
    pub coefficients: Vec<Vec<Expression>>,
    pub determinant: f64,
    /// `prod(c-gaps)^{deg2} * prod(d-gaps)^{deg1}`.
    pub determinant_formula: f64,
    pub residual: f64,
}

/// Solve the Kronecker-product Vandermonde system for cross terms: slices on
/// the `deg1 x deg2` tensor grid of points recover the coefficients of
/// `x^{j1} y^{j2}`.
pub fn vandermonde_reconstruct_2d(
    slices: &[Vec<(f64, f64, NetFunction)>],
    deg1: usize,
    deg2: usize,
    axis_lens: (f64, f64),
) -> Result<VandermondeSolve2d, StructureError> {
    assert_eq!(slices.len(), deg1);
    for row in slices {
        assert_eq!(row.len(), deg2);
    }
    let cs: Vec<f64> = slices.iter().map(|r| r[0].0).collect();
    let ds: Vec<f64> = slices[0].iter().map(|s| s.1).collect();
    for (pts, len) in [(&cs, axis_lens.0), (&ds, axis_lens.1)] {
        let required = SLICE_SEPARATION_FRACTION * len;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let gap = (pts[j] - pts[i]).abs();
                if gap < required {
                    return Err(StructureError::SliceSeparation { min_gap: gap, required });
                }
            }
        }
    }
    let vc = vandermonde_matrix(&cs);
    let vd = vandermonde_matrix(&ds);
    let (inv_c, _) = invert(&vc)?;
    let (inv_d, _) = invert(&vd)?;
    // honesty check on the full Kronecker matrix
    let full = kronecker(&vc, &vd);
    let (full_inv, det) = invert(&full)?;
    let residual = inverse_residual(&full, &full_inv);
    if residual > 1e-8 {
        return Err(StructureError::SolveResidual { residual });
    }
    let formula = vandermonde_det_formula(&cs).powi(deg2 as i32)
        * vandermonde_det_formula(&ds).powi(deg1 as i32);

    let mut coefficients = vec![vec![Expression::constant(0.0); deg2]; deg1];
    for j1 in 0..deg1 {
        for j2 in 0..deg2 {
            let mut acc: Option<Expression> = None;
            for i1 in 0..deg1 {
                for i2 in 0..deg2 {
                    let w = inv_c[j1][i1] * inv_d[j2][i2];
                    let term = Expression::product(
                        Expression::constant(w),
                        slices[i1][i2].2.expr().clone(),
                    );
                    acc = Some(match acc {
                        None => term,
                        Some(prev) => Expression::sum(prev, term),
                    });
                }
            }
            coefficients[j1][j2] = acc.unwrap();
        }
    }
    Ok(VandermondeSolve2d { coefficients, determinant: det, determinant_formula: formula, residual })
}

fn vandermonde_matrix(points: &[f64]) -> Vec<Vec<f64>> {
    let n = points.len();
    (0..n)
        .map(|i| (0..n).map(|j| points[i].powi(j as i32)).collect())
        .collect()
}

fn vandermonde_det_formula(points: &[f64]) -> f64 {
    let mut det = 1.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            det *= points[j] - points[i];
        }
    }
    det
}

fn kronecker(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![vec![0.0; na * nb]; na * nb];
    for i1 in 0..na {
        for j1 in 0..na {
            for i2 in 0..nb {
                for j2 in 0..nb {
                    out[i1 * nb + i2][j1 * nb + j2] = a[i1][j1] * b[i2][j2];
                }
            }
        }
    }
    out
}

/// Gauss elimination with partial pivoting; returns the inverse and the
/// determinant.
fn invert(m: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64), StructureError> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col] == 0.0 {
            return Err(StructureError::SolveResidual { residual: f64::INFINITY });
        }
        if pivot != col {
            a.swap(pivot, col);
            inv.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r][j] -= factor * a[col][j];
                inv[r][j] -= factor * inv[col][j];
            }
        }
    }
    Ok((inv, det))
}

fn inverse_residual(m: &[Vec<f64>], inv: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += m[i][k] * inv[k][j];
            }
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - expect).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, DomainBox};
    use crate::quad::QuadratureConfig;

    #[test]
    fn slice_points_separation() {
        let pts = slice_points((-1.25, 1.25), 3).unwrap();
        assert_eq!(pts.len(), 3);
        assert!((pts[1] - 0.0).abs() < 1e-12);
        for w in pts.windows(2) {
            assert!(w[1] - w[0] >= 0.25);
        }
        // too many points for the separation guard
        assert!(matches!(
            slice_points((-1.0, 1.0), 8),
            Err(StructureError::SliceSeparation { .. })
        ));
    }

    #[test]
    fn determinant_matches_pairwise_product() {
        let pts = [-0.5, 0.0, 0.5];
        let v = vandermonde_matrix(&pts);
        let (_, det) = invert(&v).unwrap();
        let formula = vandermonde_det_formula(&pts);
        assert!(
            (det - formula).abs() <= 1e-12 * formula.abs(),
            "det {det} vs formula {formula}"
        );
        // 0.5 * 1.0 * 0.5 = 0.25
        assert!((formula - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degree_one_reconstruction_is_identity() {
        let quad = Quadrature::new(QuadratureConfig::default());
        let grid = OmegaGrid::geometric(16.0, 2.0, 4);
        let f = NetFunction::new(parse("sin(x)", 1).unwrap(), DomainBox::new(vec![(-2.0, 2.0)]));
        let s = mollified_slice(&quad, &f, 0, 0.3, 0.5, &grid).unwrap();
        let solve = vandermonde_reconstruct(&[(0.3, s.clone())], 1, 2.0).unwrap();
        let a = solve.coefficients[0].eval_at(&[0.0], 256.0, &quad).unwrap();
        let b = s.expr().eval_at(&[0.0], 256.0, &quad).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn slice_of_axis_independent_function_is_exact() {
        let quad = Quadrature::new(QuadratureConfig::default());
        let grid = OmegaGrid::geometric(16.0, 2.0, 4);
        // f(x, y) = sin(y): slicing along x recovers sin(y) exactly
        let f = NetFunction::new(
            parse("sin(y)", 2).unwrap(),
            DomainBox::new(vec![(-2.0, 2.0), (-2.0, 2.0)]),
        );
        let s = mollified_slice(&quad, &f, 0, 0.0, 0.5, &grid).unwrap();
        for &y in &[-1.0, 0.4, 1.2] {
            let v = s.expr().eval_at(&[0.0, y], 64.0, &quad).unwrap();
            assert!((v - y.sin()).abs() < 1e-8, "y={y}: {v}");
        }
    }

    #[test]
    fn slice_margin_enforced() {
        let quad = Quadrature::new(QuadratureConfig::default());
        let grid = OmegaGrid::geometric(16.0, 2.0, 4);
        let f = NetFunction::new(parse("sin(x)", 1).unwrap(), DomainBox::new(vec![(-2.0, 2.0)]));
        // width at omega_min = 1/ceil(sqrt(16)) = 0.25
        assert!(matches!(
            mollified_slice(&quad, &f, 0, 1.9, 0.5, &grid),
            Err(StructureError::SliceMargin { .. })
        ));
    }
}
