//! Zero-representative decomposition: a net that is D'-close to zero is,
//! locally, a finite-order derivative of an infinitesimal-valued net.
//!
//! The finite S-continuous primitive `h` from the local structure pipeline
//! is D'-close to a polynomial with S-continuous coefficient nets; mollified
//! slices at separated standard points recover those coefficients through a
//! Vandermonde solve, and subtracting the polynomial leaves an
//! infinitesimal-valued net with the same derivative on `K`.

use super::cutoff::cutoff_expr;
use super::local::{local_structure, verify_decomposition};
use super::slices::{mollified_slice, slice_points, vandermonde_reconstruct, vandermonde_reconstruct_2d};
use super::{inflate_box, Decomposition, DecompositionMode};
use crate::error::StructureError;
use crate::expr::{Expression, NetFunction};
use crate::net::{NetConfig, OmegaGrid};
use crate::pairing::{dprime_close, ProbeBattery};
use crate::quad::{CompactBox, Quadrature};

/// Mollifier-scale exponent: `M = ceil(omega^theta)`; sqrt balances slice
/// bias against oscillation leakage.
pub const SLICE_THETA: f64 = 0.5;

pub fn zero_local_structure(
    quad: &Quadrature,
    f: &NetFunction,
    k: &CompactBox,
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
    m_max: usize,
) -> Result<Decomposition, StructureError> {
    if !k.within_domain(f.domain()) {
        return Err(StructureError::DomainNotBox);
    }
    let k_prime = inflate_box(k, f.domain(), 0.25)?;

    // precondition: f ~ 0 in D'
    let fin = ProbeBattery::fin_default(quad, &k_prime, grid)?;
    let zero = f.with_expr(Expression::constant(0.0));
    let close = dprime_close(quad, f, &zero, &fin, grid, net_cfg)?;
    if !close.verdict {
        let probe = close
            .probes
            .iter()
            .find(|p| !p.class.is_infinitesimal())
            .map(|p| p.probe_id.clone())
            .unwrap_or_default();
        return Err(StructureError::Pairing(crate::error::PairingError::NotSDistribution {
            probe,
        }));
    }

    // finite S-continuous primitive on the inflated box
    let base = local_structure(quad, f, &k_prime, grid, net_cfg, m_max)?;
    let h = base.g.clone();
    let alpha = base.alpha.clone();
    let n = k.dimension();

    // reconstruct the polynomial part of h
    let mut remainder = h.expr().clone();
    let mut worst_residual = 0.0f64;
    let mut h_tilde = Expression::constant(0.0);
    for axis in 0..n {
        let deg = alpha.0[axis];
        if deg == 0 {
            continue;
        }
        let pts = slice_points(k.axis(axis), deg)?;
        let current = f.with_expr(remainder.clone());
        let mut slices = Vec::with_capacity(deg);
        for &c in &pts {
            let s = mollified_slice(quad, &current, axis, c, SLICE_THETA, grid)?;
            slices.push((c, s));
        }
        let solve = vandermonde_reconstruct(&slices, deg, k.len(axis))?;
        worst_residual = worst_residual.max(solve.residual);
        let mut axis_poly = Expression::constant(0.0);
        for (j, coeff) in solve.coefficients.iter().enumerate() {
            let term = Expression::product(
                coeff.clone(),
                Expression::int_pow(Expression::coord(axis), j as i32),
            );
            axis_poly = Expression::sum(axis_poly, term);
        }
        h_tilde = Expression::sum(h_tilde, axis_poly.clone());
        remainder = Expression::sub(remainder, axis_poly);
    }
    // cross terms for axis pairs (the eq.-(7)/(8) stage; constants in 2D)
    for a1 in 0..n {
        for a2 in a1 + 1..n {
            let (d1, d2) = (alpha.0[a1], alpha.0[a2]);
            if d1 == 0 || d2 == 0 {
                continue;
            }
            let pts1 = slice_points(k.axis(a1), d1)?;
            let pts2 = slice_points(k.axis(a2), d2)?;
            let current = f.with_expr(remainder.clone());
            let mut grid_slices = Vec::with_capacity(d1);
            for &c in &pts1 {
                let sc = mollified_slice(quad, &current, a1, c, SLICE_THETA, grid)?;
                let mut row = Vec::with_capacity(d2);
                for &d in &pts2 {
                    let sd = mollified_slice(quad, &sc, a2, d, SLICE_THETA, grid)?;
                    row.push((c, d, sd));
                }
                grid_slices.push(row);
            }
            let solve =
                vandermonde_reconstruct_2d(&grid_slices, d1, d2, (k.len(a1), k.len(a2)))?;
            worst_residual = worst_residual.max(solve.residual);
            let mut cross_poly = Expression::constant(0.0);
            for (j1, row) in solve.coefficients.iter().enumerate() {
                for (j2, coeff) in row.iter().enumerate() {
                    let term = Expression::product(
                        coeff.clone(),
                        Expression::product(
                            Expression::int_pow(Expression::coord(a1), j1 as i32),
                            Expression::int_pow(Expression::coord(a2), j2 as i32),
                        ),
                    );
                    cross_poly = Expression::sum(cross_poly, term);
                }
            }
            h_tilde = Expression::sum(h_tilde, cross_poly.clone());
            remainder = Expression::sub(remainder, cross_poly);
        }
    }

    let cut = cutoff_expr(k, &k_prime);
    let g = f.with_expr(Expression::product(
        Expression::sub(h.expr().clone(), h_tilde),
        cut,
    ));

    let report = verify_decomposition(
        quad,
        f,
        &g,
        &alpha,
        DecompositionMode::Infinitesimal,
        k,
        grid,
        net_cfg,
        Some(worst_residual),
    )?;
    Ok(Decomposition {
        alpha,
        g,
        f: f.clone(),
        mode: DecompositionMode::Infinitesimal,
        k: k.clone(),
        grid: grid.clone(),
        report,
    })
}
