//! The constructive pipeline: corrected anti-derivatives, order reduction,
//! bounded and S-continuous primitives, local structure decompositions,
//! mollified-slice Vandermonde reconstruction, zero-representative
//! decompositions, and point values.

mod antider;
mod cutoff;
mod local;
mod pointval;
mod slices;
mod zero;

pub use antider::{
    axis_weight, corrected_antiderivative, primitive_order_zero, reduce_order, AxisWeight,
    PrimitiveVariant, PrimitiveZeroResult,
};
pub use cutoff::cutoff_expr;
pub use local::{local_structure, verify_decomposition};
pub use pointval::point_value;
pub use slices::{
    mollified_slice, slice_points, vandermonde_reconstruct, vandermonde_reconstruct_2d,
    VandermondeSolve, VandermondeSolve2d, SLICE_SEPARATION_FRACTION,
};
pub use zero::zero_local_structure;

use crate::error::StructureError;
use crate::expr::{DomainBox, NetFunction};
use crate::net::{GrowthClass, OmegaGrid, SModulusReport};
use crate::quad::CompactBox;
use serde::{Deserialize, Serialize};

/// A multi-index `alpha = (alpha_1 .. alpha_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn uniform(n: usize, v: usize) -> Self {
        MultiIndex(vec![v; n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMode {
    FiniteScontinuous,
    Infinitesimal,
}

/// Output of the structure theorems: `f = d^alpha g` on `*K` with `g`
/// finite-valued and S-continuous (or infinitesimal-valued), plus the
/// verification report.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub alpha: MultiIndex,
    pub g: NetFunction,
    pub f: NetFunction,
    pub mode: DecompositionMode,
    pub k: CompactBox,
    pub grid: OmegaGrid,
    pub report: DecompositionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualCheck {
    /// max over grid points and omegas of |d^alpha g - f| / (1 + |f|)
    pub max_rel: f64,
    pub tolerance: f64,
    pub per_omega: Vec<(f64, f64)>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupCheck {
    pub per_omega: Vec<(f64, f64)>,
    pub class: GrowthClass,
    /// sup at the largest omega over sup at the smallest (guarded near 0).
    pub cross_grid_ratio: f64,
    /// fitted slope of the sup (infinitesimal mode wants <= -0.8)
    pub slope: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingEquivalenceRow {
    pub probe_id: String,
    pub omega: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingEquivalenceCheck {
    pub rows: Vec<PairingEquivalenceRow>,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub residual: ResidualCheck,
    pub sup: SupCheck,
    pub s_modulus: Option<SModulusReport>,
    pub pairing_equivalence: PairingEquivalenceCheck,
    /// Vandermonde solve residual (zero-structure mode only).
    pub reconstruction_residual: Option<f64>,
    pub overall: bool,
}

/// Serialized form of a decomposition (`schema` 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub schema: u32,
    pub alpha: Vec<usize>,
    pub mode: DecompositionMode,
    pub k: Vec<(f64, f64)>,
    /// Domain axes; `None` encodes an infinite endpoint.
    pub domain: Vec<(Option<f64>, Option<f64>)>,
    pub f: String,
    pub g: String,
    pub omega_grid: Vec<f64>,
    pub report: DecompositionReport,
}

impl Decomposition {
    pub fn to_json(&self) -> DecompositionJson {
        let domain = self
            .f
            .domain()
            .axes()
            .iter()
            .map(|&(a, b)| {
                (
                    if a.is_finite() { Some(a) } else { None },
                    if b.is_finite() { Some(b) } else { None },
                )
            })
            .collect();
        DecompositionJson {
            schema: 1,
            alpha: self.alpha.0.clone(),
            mode: self.mode,
            k: self.k.axes().to_vec(),
            domain,
            f: self.f.expr().canonical(),
            g: self.g.expr().canonical(),
            omega_grid: self.grid.values().to_vec(),
            report: self.report.clone(),
        }
    }

    pub fn from_json(json: &DecompositionJson) -> Result<Self, StructureError> {
        let n = json.domain.len();
        let domain = DomainBox::new(
            json.domain
                .iter()
                .map(|&(a, b)| {
                    (a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY))
                })
                .collect(),
        );
        let parse = |src: &str| {
            crate::expr::Expression::from_canonical(src, n)
                .map_err(|e| StructureError::BadSerialization(e.to_string()))
        };
        let f_expr = parse(&json.f)?;
        let g_expr = parse(&json.g)?;
        let grid_values = json.omega_grid.clone();
        if grid_values.len() < 2 {
            return Err(StructureError::BadSerialization("omega grid too short".into()));
        }
        let ratio = grid_values[1] / grid_values[0];
        let grid = OmegaGrid::geometric(grid_values[0], ratio, grid_values.len() - 1);
        Ok(Decomposition {
            alpha: MultiIndex(json.alpha.clone()),
            g: NetFunction::new(g_expr, domain.clone()),
            f: NetFunction::new(f_expr, domain),
            mode: json.mode,
            k: CompactBox::new(json.k.clone()),
            grid,
            report: json.report.clone(),
        })
    }
}

/// Inflate `k` by `factor` of its length per axis (split between the two
/// sides), clipped so at least half the gap to the domain boundary remains.
/// Errors when `k` touches the boundary.
pub fn inflate_box(
    k: &CompactBox,
    domain: &DomainBox,
    factor: f64,
) -> Result<CompactBox, StructureError> {
    let mut axes = Vec::with_capacity(k.dimension());
    for i in 0..k.dimension() {
        let (a, b) = k.axis(i);
        let (da, db) = domain.axis(i);
        let side = 0.5 * factor * (b - a);
        let gap_lo = a - da;
        let gap_hi = db - b;
        if gap_lo <= 0.0 || gap_hi <= 0.0 {
            return Err(StructureError::NoInflationRoom { axis: i });
        }
        let ext_lo = if gap_lo.is_finite() { side.min(0.5 * gap_lo) } else { side };
        let ext_hi = if gap_hi.is_finite() { side.min(0.5 * gap_hi) } else { side };
        axes.push((a - ext_lo, b + ext_hi));
    }
    Ok(CompactBox::new(axes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inflation_respects_gaps() {
        let k = CompactBox::new(vec![(-1.0, 1.0)]);
        let domain = DomainBox::new(vec![(-2.0, 2.0)]);
        let k1 = inflate_box(&k, &domain, 0.25).unwrap();
        assert!((k1.axis(0).0 + 1.25).abs() < 1e-14);
        assert!((k1.axis(0).1 - 1.25).abs() < 1e-14);

        // tight domain: only half the gap is used
        let tight = DomainBox::new(vec![(-1.1, 2.0)]);
        let k2 = inflate_box(&k, &tight, 0.25).unwrap();
        assert!((k2.axis(0).0 + 1.05).abs() < 1e-14);

        // touching: error
        let touch = DomainBox::new(vec![(-1.0, 2.0)]);
        assert!(matches!(
            inflate_box(&k, &touch, 0.25),
            Err(StructureError::NoInflationRoom { axis: 0 })
        ));
    }
}
