//! Corrected anti-derivatives, order reduction, and order-zero primitives.

use super::{cutoff_expr, inflate_box};
use crate::error::StructureError;
use crate::expr::{Expression, NetFunction};
use crate::net::{classify_growth, GrowthClass, NetConfig, OmegaGrid, SModulusReport};
use crate::pairing::{
    bump_mass, estimate_s_order, is_s_distribution, pair, ProbeBattery, TestFunctionSpec,
};
use crate::quad::{CompactBox, Quadrature};
use rayon::prelude::*;

/// A 1-variable weight along one axis with unit integral: the phi_0 of the
/// anti-derivative correction.
#[derive(Debug, Clone)]
pub struct AxisWeight {
    pub expr: Expression,
    pub axis: usize,
    /// Support interval along the axis.
    pub interval: (f64, f64),
}

/// Normalized bump weight on the middle half of `within`, along `axis`.
pub fn axis_weight(quad: &Quadrature, axis: usize, within: (f64, f64)) -> AxisWeight {
    let (a, b) = within;
    assert!(a.is_finite() && b.is_finite() && a < b, "weight placement needs a finite interval");
    let c = 0.5 * (a + b);
    let r = 0.25 * (b - a);
    let mass = bump_mass(quad);
    let expr = Expression::product(
        Expression::constant(1.0 / (r * mass)),
        Expression::bump(Expression::quotient(
            Expression::sub(Expression::coord(axis), Expression::constant(c)),
            Expression::constant(r),
        )),
    );
    AxisWeight { expr, axis, interval: (c - r, c + r) }
}

/// The anti-derivative of `f` in `axis` with the integration "constant"
/// (a function of the other coordinates) corrected so the result pairs
/// finitely again: `g = F + G`, `F = antideriv(f, axis, c)` anchored at the
/// axis midpoint, and `G(x~) = - integral F(t, x~) phi0(t) dt`.
/// `differentiate(g, e_axis)` reduces structurally to `f`.
pub fn corrected_antiderivative(
    quad: &Quadrature,
    f: &NetFunction,
    axis: usize,
    phi0: &AxisWeight,
) -> Result<NetFunction, StructureError> {
    let domain = f.domain();
    if axis >= domain.dimension() || phi0.axis != axis {
        return Err(StructureError::DomainNotBox);
    }
    let (da, db) = domain.axis(axis);
    let (s_lo, s_hi) = phi0.interval;
    if !(s_lo > da && s_hi < db) {
        return Err(StructureError::UnboundedAxis { axis });
    }
    // weight must be 1-variable in `axis`
    for i in 0..domain.dimension() {
        if i != axis && phi0.expr.depends_on(i) {
            return Err(StructureError::DomainNotBox);
        }
    }
    // unit integral along the axis
    let mut probe_point = vec![0.0; domain.dimension()];
    probe_point[axis] = s_hi;
    let integral = quad
        .primitive_eval(&phi0.expr, axis, s_lo, s_hi, &probe_point, 1.0)
        .map_err(StructureError::Eval)?;
    if (integral - 1.0).abs() > 1e-8 {
        return Err(StructureError::Pairing(
            crate::error::PairingError::NormalizationFailed { integral },
        ));
    }

    let anchor = if da.is_finite() && db.is_finite() {
        0.5 * (da + db)
    } else {
        0.5 * (s_lo + s_hi)
    };
    let big_f = Expression::antideriv(f.expr().clone(), axis, anchor);
    let g_corr = Expression::neg(Expression::defint(
        Expression::product(big_f.clone(), phi0.expr.clone()),
        axis,
        s_lo,
        s_hi,
    ));
    Ok(f.with_expr(Expression::sum(big_f, g_corr)))
}

/// One order-reduction step: corrected anti-derivatives along every axis in
/// order, then a standard cutoff equal to 1 on `k`. The result satisfies
/// `d_1 ... d_n g = f` on `*K` and its order estimate drops by one (until 0).
///
/// When `membership` is given, the `f in D'(Omega)` precondition is checked
/// against it first.
pub fn reduce_order(
    quad: &Quadrature,
    f: &NetFunction,
    k: &CompactBox,
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
    membership: Option<&ProbeBattery>,
) -> Result<NetFunction, StructureError> {
    if !k.within_domain(f.domain()) {
        return Err(StructureError::DomainNotBox);
    }
    if let Some(battery) = membership {
        let report = is_s_distribution(quad, f, battery, grid, net_cfg)?;
        if !report.verdict {
            let probe = report
                .probes
                .iter()
                .find(|p| !p.class.is_bounded())
                .map(|p| p.probe_id.clone())
                .unwrap_or_default();
            return Err(StructureError::Pairing(
                crate::error::PairingError::NotSDistribution { probe },
            ));
        }
    }
    let n = k.dimension();
    let mut g = f.clone();
    for axis in 0..n {
        let phi0 = axis_weight(quad, axis, k.axis(axis));
        g = corrected_antiderivative(quad, &g, axis, &phi0)?;
    }
    let outer = inflate_box(k, f.domain(), 0.25)?;
    let cut = cutoff_expr(k, &outer);
    Ok(f.with_expr(Expression::product(g.expr().clone(), cut)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveVariant {
    /// Iterated corner anti-derivative: `d_1..d_n g = f` on `*K`, `g`
    /// bounded on `*K` by a standard constant.
    Bounded,
    /// Second iteration: `d_1^2..d_n^2 h = f` on `*K`, `h` S-continuous and
    /// bounded, with finite per-axis Lipschitz constants.
    SContinuous,
}

/// Output of [`primitive_order_zero`] with its verification data.
#[derive(Debug, Clone)]
pub struct PrimitiveZeroResult {
    pub net: NetFunction,
    /// Classification of `sup_K |g(., omega)|`.
    pub sup_class: GrowthClass,
    /// L-infinity indicator probes `integral f chi_[corner, x]`, classified.
    pub indicator_classes: Vec<(String, GrowthClass)>,
    /// Per-axis Lipschitz-constant classification (S-continuous variant).
    pub lipschitz: Option<Vec<GrowthClass>>,
    pub s_modulus: Option<SModulusReport>,
}

fn corner_antiderivative(expr: &Expression, k: &CompactBox) -> Expression {
    let n = k.dimension();
    let mut e = expr.clone();
    for axis in (0..n).rev() {
        e = Expression::antideriv(e, axis, k.axis(axis).0);
    }
    e
}

/// The order-zero primitive of the representation lemma. Precondition
/// (checked when `order_battery` is given): `estimate_s_order(f, K) = 0`.
pub fn primitive_order_zero(
    quad: &Quadrature,
    f: &NetFunction,
    k: &CompactBox,
    variant: PrimitiveVariant,
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
    order_battery: Option<&ProbeBattery>,
) -> Result<PrimitiveZeroResult, StructureError> {
    if !k.within_domain(f.domain()) {
        return Err(StructureError::DomainNotBox);
    }
    if let Some(battery) = order_battery {
        let est = estimate_s_order(quad, f, k, battery, grid, 2, net_cfg)?;
        if est.m != 0 {
            return Err(StructureError::OrderNotZero { estimated: est.m });
        }
    }
    let n = k.dimension();
    let g = corner_antiderivative(f.expr(), k);
    let result_expr = match variant {
        PrimitiveVariant::Bounded => g.clone(),
        PrimitiveVariant::SContinuous => corner_antiderivative(&g, k),
    };
    let net = f.with_expr(result_expr.clone());

    // sup classification over the grid (this realizes the L-infinity
    // indicator bound: g(x) is exactly the pairing with chi_[corner, x])
    let sup_samples: Result<Vec<(f64, f64)>, StructureError> = grid
        .values()
        .par_iter()
        .map(|&omega| {
            let omega_eff = if result_expr.depends_on_omega() { omega } else { 1.0 };
            let axes = quad.sup_grid(k, omega_eff);
            let sup = quad.sup_on_grid(&result_expr, &axes, omega).map_err(StructureError::Eval)?;
            Ok((omega, sup))
        })
        .collect();
    let sup_class = classify_growth(&sup_samples?, net_cfg).map_err(StructureError::Pairing)?;

    // a few explicit indicator probes chi_[corner, x] along the diagonal
    let mut indicator_classes = Vec::new();
    for step in 1..=4usize {
        let frac = step as f64 / 4.0;
        let axes: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let (a, b) = k.axis(i);
                (a, a + frac * (b - a))
            })
            .collect();
        let sub = CompactBox::new(axes);
        let spec = TestFunctionSpec::Indicator { box_: sub };
        let probe = crate::pairing::build_test_function(quad, &spec, f.domain(), grid)?;
        let sweep = pair(quad, f, &probe, grid, net_cfg)?;
        indicator_classes.push((format!("indicator_diag_{step}of4"), sweep.class));
    }

    let (lipschitz, s_modulus) = if variant == PrimitiveVariant::SContinuous {
        let mut lips = Vec::new();
        for axis in 0..n {
            let d = result_expr.derivative(axis);
            let samples: Result<Vec<(f64, f64)>, StructureError> = grid
                .values()
                .par_iter()
                .map(|&omega| {
                    let omega_eff = if d.depends_on_omega() { omega } else { 1.0 };
                    let axes = quad.sup_grid(k, omega_eff);
                    let sup = quad.sup_on_grid(&d, &axes, omega).map_err(StructureError::Eval)?;
                    Ok((omega, sup))
                })
                .collect();
            lips.push(classify_growth(&samples?, net_cfg).map_err(StructureError::Pairing)?);
        }
        let report = crate::net::s_modulus(
            quad,
            &net,
            k,
            grid,
            &[0.1, 0.03, 0.01],
            net_cfg,
        )
        .map_err(StructureError::Pairing)?;
        (Some(lips), Some(report))
    } else {
        (None, None)
    };

    Ok(PrimitiveZeroResult { net, sup_class, indicator_classes, lipschitz, s_modulus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, DomainBox};
    use crate::quad::QuadratureConfig;

    fn setup() -> (Quadrature, OmegaGrid, NetConfig) {
        (
            Quadrature::new(QuadratureConfig::default()),
            OmegaGrid::geometric(16.0, 2.0, 4),
            NetConfig::default(),
        )
    }

    #[test]
    fn corrected_antiderivative_differentiates_back() {
        let (quad, _, _) = setup();
        let f = NetFunction::new(
            parse("cos(omega*x)", 1).unwrap(),
            DomainBox::new(vec![(-2.0, 2.0)]),
        );
        let phi0 = axis_weight(&quad, 0, (-1.0, 1.0));
        let g = corrected_antiderivative(&quad, &f, 0, &phi0).unwrap();
        // node identity: d/dx g = f exactly
        assert_eq!(g.expr().differentiate(&[1]), *f.expr());
    }

    #[test]
    fn corrected_antiderivative_of_one_is_x_for_centered_weight() {
        let (quad, _, _) = setup();
        let f = NetFunction::new(parse("1", 1).unwrap(), DomainBox::new(vec![(-2.0, 2.0)]));
        let phi0 = axis_weight(&quad, 0, (-1.0, 1.0));
        let g = corrected_antiderivative(&quad, &f, 0, &phi0).unwrap();
        // F(x) = x (midpoint anchor 0); centered weight kills the constant
        for &x in &[-1.5, -0.3, 0.0, 0.9] {
            let v = g.expr().eval_at(&[x], 4.0, &quad).unwrap();
            assert!((v - x).abs() < 1e-8, "x={x}, got {v}");
        }
    }

    #[test]
    fn corrected_antiderivative_of_oscillation_is_small() {
        let (quad, _, _) = setup();
        let f = NetFunction::new(
            parse("cos(omega*x)", 1).unwrap(),
            DomainBox::new(vec![(-2.0, 2.0)]),
        );
        let phi0 = axis_weight(&quad, 0, (-1.0, 1.0));
        let g = corrected_antiderivative(&quad, &f, 0, &phi0).unwrap();
        // g = sin(omega x)/omega + O(1/omega): sup is infinitesimal
        for &omega in &[64.0, 256.0] {
            for &x in &[-1.0, 0.2, 1.3] {
                let v = g.expr().eval_at(&[x], omega, &quad).unwrap();
                assert!(v.abs() < 4.0 / omega, "omega={omega} x={x}: {v}");
            }
        }
    }

    #[test]
    fn primitive_order_zero_of_dirac_net_is_bounded() {
        let (quad, grid, cfg) = setup();
        // rho_omega = omega * bump(omega x) / mass: cumulative stays in [0, 1]
        let mass = bump_mass(&quad);
        let src = format!("omega*bump(omega*x)/{mass}");
        let f = NetFunction::new(parse(&src, 1).unwrap(), DomainBox::new(vec![(-2.0, 2.0)]));
        let k = CompactBox::new(vec![(-1.0, 1.0)]);
        let res =
            primitive_order_zero(&quad, &f, &k, PrimitiveVariant::Bounded, &grid, &cfg, None)
                .unwrap();
        assert!(res.sup_class.is_bounded(), "{:?}", res.sup_class.label);
        // cumulative mass from the corner is in [0, 1]
        let v = res.net.expr().eval_at(&[0.9], 64.0, &quad).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "got {v}");
        for (_, class) in &res.indicator_classes {
            assert!(class.is_bounded());
        }
    }

    #[test]
    fn primitive_order_zero_scontinuous_dirac_ramp() {
        let (quad, grid, cfg) = setup();
        let mass = bump_mass(&quad);
        let src = format!("omega*bump(omega*x)/{mass}");
        let f = NetFunction::new(parse(&src, 1).unwrap(), DomainBox::new(vec![(-2.0, 2.0)]));
        let k = CompactBox::new(vec![(-1.0, 1.0)]);
        let res =
            primitive_order_zero(&quad, &f, &k, PrimitiveVariant::SContinuous, &grid, &cfg, None)
                .unwrap();
        // d^2/dx^2 h = f structurally
        assert_eq!(res.net.expr().differentiate(&[2]), *f.expr());
        let lips = res.lipschitz.as_ref().unwrap();
        assert!(lips[0].is_bounded());
        // Lipschitz constant about 1, uniformly in omega
        let sup_d = lips[0].samples.iter().fold(0.0f64, |a, &(_, v)| a.max(v));
        assert!(sup_d < 1.1, "Lipschitz {sup_d}");
        assert!(res.s_modulus.as_ref().unwrap().s_continuous);
    }
}
