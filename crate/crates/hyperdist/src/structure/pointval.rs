//! Point values of S-continuous representatives.
//!
//! When a representative is S-continuous near a standard point, its value
//! there is finite and the standard part is representative-independent; the
//! S-continuity gate runs first and rejects oscillatory nets.

use crate::error::StructureError;
use crate::expr::NetFunction;
use crate::net::{classify_growth, s_modulus, GrowthClass, GrowthLabel, NetConfig, OmegaGrid};
use crate::quad::{CompactBox, Quadrature};

pub const DEFAULT_POINT_RADIUS: f64 = 0.1;

/// Classification of `f(a, omega)` along the grid, gated on S-continuity in
/// a small box around `a` (radius clipped into the domain).
pub fn point_value(
    quad: &Quadrature,
    f: &NetFunction,
    a: &[f64],
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
    radius: f64,
) -> Result<GrowthClass, StructureError> {
    let domain = f.domain();
    if !domain.contains(a) {
        return Err(StructureError::Eval(crate::error::EvalError::OutsideDomain {
            point: a.to_vec(),
            axis: 0,
        }));
    }
    let axes: Vec<(f64, f64)> = (0..domain.dimension())
        .map(|i| {
            let (da, db) = domain.axis(i);
            let r = radius.min(0.5 * (a[i] - da)).min(0.5 * (db - a[i]));
            (a[i] - r, a[i] + r)
        })
        .collect();
    let gate_box = CompactBox::new(axes);
    let report = s_modulus(quad, f, &gate_box, grid, &[0.1, 0.03, 0.01], net_cfg)
        .map_err(StructureError::Pairing)?;
    if !report.s_continuous {
        return Err(StructureError::NotSContinuous { point: a.to_vec() });
    }
    let samples: Result<Vec<(f64, f64)>, StructureError> = grid
        .values()
        .iter()
        .map(|&omega| {
            let v = f.expr().eval_at(a, omega, quad).map_err(StructureError::Eval)?;
            Ok((omega, v))
        })
        .collect();
    let mut class = classify_growth(&samples?, net_cfg).map_err(StructureError::Pairing)?;
    if class.label == GrowthLabel::Infinitesimal {
        // the standard part of an infinitesimal value is 0
        class.standard_part = Some(0.0);
    }
    Ok(class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, DomainBox};
    use crate::quad::QuadratureConfig;

    #[test]
    fn standard_part_of_perturbed_sine() {
        let quad = Quadrature::new(QuadratureConfig::default());
        let grid = OmegaGrid::default_1d();
        let cfg = NetConfig::default();
        let f = NetFunction::new(
            parse("sin(x)+omega^-1*sin(omega*x)", 1).unwrap(),
            DomainBox::new(vec![(-2.0, 2.0)]),
        );
        let class = point_value(&quad, &f, &[1.0], &grid, &cfg, DEFAULT_POINT_RADIUS).unwrap();
        assert_eq!(class.label, GrowthLabel::Finite);
        let sp = class.standard_part.unwrap();
        assert!((sp - 1.0f64.sin()).abs() < 1e-3, "st = {sp}");
    }

    #[test]
    fn rejects_oscillatory_net() {
        let quad = Quadrature::new(QuadratureConfig::default());
        let grid = OmegaGrid::default_1d();
        let cfg = NetConfig::default();
        let f = NetFunction::new(
            parse("sin(omega*x)", 1).unwrap(),
            DomainBox::new(vec![(-2.0, 2.0)]),
        );
        assert!(matches!(
            point_value(&quad, &f, &[0.3], &grid, &cfg, DEFAULT_POINT_RADIUS),
            Err(StructureError::NotSContinuous { .. })
        ));
    }

    #[test]
    fn constant_net_standard_part() {
        let quad = Quadrature::new(QuadratureConfig::default());
        let grid = OmegaGrid::default_1d();
        let cfg = NetConfig::default();
        let f = NetFunction::new(parse("2.5", 1).unwrap(), DomainBox::new(vec![(-2.0, 2.0)]));
        let class = point_value(&quad, &f, &[0.1], &grid, &cfg, DEFAULT_POINT_RADIUS).unwrap();
        assert_eq!(class.label, GrowthLabel::Finite);
        assert_eq!(class.standard_part, Some(2.5));
    }
}
