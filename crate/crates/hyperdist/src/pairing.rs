//! Test functions, probe batteries, distributional pairing, and the two
//! order estimators.
//!
//! A verdict produced here is sound only relative to its battery: a finite
//! probe set cannot exhaust `Fin(*D(Omega))`, so every report carries that
//! caveat. The default batteries cover the worked adversaries: tensor bumps
//! at several centers and radii, their first derivatives, omega-translated
//! and omega-scaled bumps, and (for the unrestricted kind) bumps modulated
//! by `sin(omega x + theta)` whose first derivative is infinite.

use crate::error::PairingError;
use crate::expr::{DomainBox, Expression, NetFunction};
use crate::net::{
    classify_growth_with_noise, GrowthClass, NetConfig, OmegaGrid,
};
use crate::quad::{CompactBox, Quadrature};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// `integral of bump over [-1,1]`, computed once by quadrature.
pub fn bump_mass(quad: &Quadrature) -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let e = Expression::bump(Expression::coord(0));
        let k = CompactBox::new(vec![(-1.0, 1.0)]);
        quad.integrate_expr(&e, &k, 1.0).expect("bump mass").value
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunctionKind {
    Standard,
    OmegaDependent,
    Indicator,
}

/// A compactly supported probe: an expression plus its support box.
#[derive(Debug, Clone)]
pub struct TestFunction {
    id: String,
    expr: Expression,
    support: CompactBox,
    kind: TestFunctionKind,
    /// Measured integral when the probe was normalized.
    normalized_integral: Option<f64>,
    /// Probe is omega-dependent only through uniformly bounded deformations
    /// (translations/scalings), so sup-norm sampling needs no omega-scaled
    /// density.
    band_limited: bool,
}

impl TestFunction {
    /// Build from parts, verifying that the expression vanishes on and just
    /// outside the support boundary.
    pub fn from_parts(
        id: impl Into<String>,
        expr: Expression,
        support: CompactBox,
        kind: TestFunctionKind,
        quad: &Quadrature,
        check_omegas: &[f64],
    ) -> Result<Self, PairingError> {
        let tf = TestFunction {
            id: id.into(),
            expr,
            support,
            kind,
            normalized_integral: None,
            band_limited: false,
        };
        if kind != TestFunctionKind::Indicator {
            tf.verify_support(quad, check_omegas)?;
        }
        Ok(tf)
    }

    fn verify_support(&self, quad: &Quadrature, omegas: &[f64]) -> Result<(), PairingError> {
        let n = self.support.dimension();
        for axis in 0..n {
            for &side in &[0usize, 1] {
                for &bulge in &[0.0, 0.01, 0.1] {
                    let (a, b) = self.support.axis(axis);
                    let x_axis = if side == 0 {
                        a - bulge * (b - a)
                    } else {
                        b + bulge * (b - a)
                    };
                    // sample the face at a handful of interior points
                    for t in 0..5 {
                        let frac = 0.1 + 0.2 * t as f64;
                        let point: Vec<f64> = (0..n)
                            .map(|i| {
                                if i == axis {
                                    x_axis
                                } else {
                                    let (ai, bi) = self.support.axis(i);
                                    ai + frac * (bi - ai)
                                }
                            })
                            .collect();
                        for &omega in omegas {
                            let v = self.expr.eval_at(&point, omega, quad)?;
                            if v.abs() > 1e-10 {
                                return Err(PairingError::SupportLeak { value: v, at: point });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Scale the probe so its integral over the support is 1.
    pub fn normalized(mut self, quad: &Quadrature, omega: f64) -> Result<Self, PairingError> {
        let i = quad.integrate_expr(&self.expr, &self.support, omega)?;
        if i.value.abs() < 1e-12 {
            return Err(PairingError::NormalizationFailed { integral: i.value });
        }
        self.expr = Expression::product(Expression::constant(1.0 / i.value), self.expr);
        let check = quad.integrate_expr(&self.expr, &self.support, omega)?;
        if (check.value - 1.0).abs() > 1e-10 {
            return Err(PairingError::NormalizationFailed { integral: check.value });
        }
        self.normalized_integral = Some(check.value);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn expr(&self) -> &Expression {
        &self.expr
    }

    pub fn support(&self) -> &CompactBox {
        &self.support
    }

    pub fn kind(&self) -> TestFunctionKind {
        self.kind
    }

    pub fn normalized_integral(&self) -> Option<f64> {
        self.normalized_integral
    }

    pub fn is_band_limited(&self) -> bool {
        self.band_limited
    }

    /// Derivative probe `d^alpha phi`, same support.
    pub fn derivative(&self, alpha: &[usize]) -> Result<TestFunction, PairingError> {
        if self.kind == TestFunctionKind::Indicator {
            return Err(PairingError::IndicatorDifferentiated);
        }
        let suffix: String = alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("");
        Ok(TestFunction {
            id: format!("{}_d{}", self.id, suffix),
            expr: self.expr.differentiate(alpha),
            support: self.support.clone(),
            kind: self.kind,
            normalized_integral: None,
            band_limited: self.band_limited,
        })
    }

    /// View the probe as a net over the given domain.
    pub fn as_net(&self, domain: DomainBox) -> NetFunction {
        NetFunction::new(self.expr.clone(), domain)
    }
}

/// Construction specs accepted by [`build_test_function`].
#[derive(Debug, Clone)]
pub enum TestFunctionSpec {
    /// Tensor bump `prod_i bump((x_i - c_i)/r_i)`.
    Bump { center: Vec<f64>, radius: Vec<f64>, normalize: bool },
    /// `sin(omega x_axis + theta) * phi0` with `phi0` a normalized tensor bump.
    ModulatedBump { axis: usize, theta: f64, center: Vec<f64>, radius: Vec<f64> },
    /// 1D mollifier `psi_m(x) = m psi(m (x - center))` on the given axis of an
    /// n-dimensional ambient space; `psi` is the mass-one bump.
    Mollifier { dim: usize, axis: usize, center: f64, scale: MollifierScale },
    /// The characteristic function of a box (L-infinity probe; not
    /// differentiable, consumed only by order-zero machinery).
    Indicator { box_: CompactBox },
}

/// Mollifier scale rules: a fixed integer, omega itself, or `ceil(omega^p)`.
#[derive(Debug, Clone, Copy)]
pub enum MollifierScale {
    Fixed(f64),
    Omega,
    OmegaCeilPow(f64),
}

impl MollifierScale {
    pub fn expr(&self) -> Expression {
        match self {
            MollifierScale::Fixed(m) => Expression::constant(*m),
            MollifierScale::Omega => Expression::omega(),
            MollifierScale::OmegaCeilPow(p) => Expression::omega_ceil_pow(*p),
        }
    }

    /// Smallest scale over the grid (fixes the support box).
    pub fn min_scale(&self, omega_min: f64) -> f64 {
        match self {
            MollifierScale::Fixed(m) => *m,
            MollifierScale::Omega => omega_min,
            MollifierScale::OmegaCeilPow(p) => omega_min.powf(*p).ceil(),
        }
    }
}

/// Tensor bump expression `prod_i bump((x_i - c_i)/r_i)`.
pub fn tensor_bump_expr(center: &[f64], radius: &[f64]) -> Expression {
    assert_eq!(center.len(), radius.len());
    let mut acc: Option<Expression> = None;
    for (i, (&c, &r)) in center.iter().zip(radius).enumerate() {
        let arg = Expression::quotient(
            Expression::sub(Expression::coord(i), Expression::constant(c)),
            Expression::constant(r),
        );
        let b = Expression::bump(arg);
        acc = Some(match acc {
            None => b,
            Some(p) => Expression::product(p, b),
        });
    }
    acc.unwrap()
}

/// Normalized 1D mollifier expression of the given scale along `axis`.
pub fn mollifier_expr(quad: &Quadrature, axis: usize, center: f64, scale: &MollifierScale) -> Expression {
    let mass = bump_mass(quad);
    let m = scale.expr();
    let arg = Expression::product(
        m.clone(),
        Expression::sub(Expression::coord(axis), Expression::constant(center)),
    );
    Expression::product(
        Expression::product(m, Expression::constant(1.0 / mass)),
        Expression::bump(arg),
    )
}

/// Build a test function from a spec; the support box is derived from the
/// spec and verified. `ambient` bounds the allowed support.
pub fn build_test_function(
    quad: &Quadrature,
    spec: &TestFunctionSpec,
    ambient: &DomainBox,
    grid: &OmegaGrid,
) -> Result<TestFunction, PairingError> {
    let check_omegas = [grid.min_omega(), grid.max_omega()];
    let tf = match spec {
        TestFunctionSpec::Bump { center, radius, normalize } => {
            let support = CompactBox::new(
                center.iter().zip(radius).map(|(&c, &r)| (c - r, c + r)).collect(),
            );
            check_support_in_domain(&support, ambient)?;
            let expr = tensor_bump_expr(center, radius);
            let tf = TestFunction::from_parts(
                format!("bump_c{center:?}_r{radius:?}"),
                expr,
                support,
                TestFunctionKind::Standard,
                quad,
                &check_omegas,
            )?;
            if *normalize {
                tf.normalized(quad, grid.min_omega())?
            } else {
                tf
            }
        }
        TestFunctionSpec::ModulatedBump { axis, theta, center, radius } => {
            let support = CompactBox::new(
                center.iter().zip(radius).map(|(&c, &r)| (c - r, c + r)).collect(),
            );
            check_support_in_domain(&support, ambient)?;
            let phi0 = tensor_bump_expr(center, radius);
            let phi0 = TestFunction::from_parts(
                "phi0",
                phi0,
                support.clone(),
                TestFunctionKind::Standard,
                quad,
                &check_omegas,
            )?
            .normalized(quad, grid.min_omega())?;
            let carrier = Expression::sin(Expression::sum(
                Expression::product(Expression::omega(), Expression::coord(*axis)),
                Expression::constant(*theta),
            ));
            TestFunction {
                id: format!("mod_a{axis}_t{theta:.2}"),
                expr: Expression::product(carrier, phi0.expr().clone()),
                support,
                kind: TestFunctionKind::OmegaDependent,
                normalized_integral: None,
                band_limited: false,
            }
        }
        TestFunctionSpec::Mollifier { dim, axis, center, scale } => {
            let m_min = scale.min_scale(grid.min_omega());
            let w = 1.0 / m_min;
            let support = CompactBox::new(
                (0..*dim)
                    .map(|i| {
                        if i == *axis {
                            (center - w, center + w)
                        } else {
                            let (a, b) = ambient.axis(i);
                            (a.max(-1e12), b.min(1e12))
                        }
                    })
                    .collect(),
            );
            check_support_in_domain(&support, ambient)?;
            let expr = mollifier_expr(quad, *axis, *center, scale);
            let mut tf = TestFunction::from_parts(
                format!("mollifier_a{axis}_c{center}"),
                expr,
                support,
                if matches!(scale, MollifierScale::Fixed(_)) {
                    TestFunctionKind::Standard
                } else {
                    TestFunctionKind::OmegaDependent
                },
                quad,
                &check_omegas,
            )?;
            tf.normalized_integral = Some(1.0);
            tf
        }
        TestFunctionSpec::Indicator { box_ } => {
            check_support_in_domain(box_, ambient)?;
            TestFunction {
                id: format!("indicator_{box_:?}"),
                expr: Expression::constant(1.0),
                support: box_.clone(),
                kind: TestFunctionKind::Indicator,
                normalized_integral: None,
                band_limited: true,
            }
        }
    };
    Ok(tf)
}

fn check_support_in_domain(support: &CompactBox, ambient: &DomainBox) -> Result<(), PairingError> {
    for i in 0..support.dimension() {
        let (a, b) = support.axis(i);
        let (da, db) = ambient.axis(i);
        if a < da || b > db {
            return Err(PairingError::SupportOutsideDomain { axis: i });
        }
    }
    Ok(())
}

// ----- probe batteries -----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryKind {
    Fin,
    Unrestricted,
}

/// A list of probes modeling a quantifier over test functions.
#[derive(Debug, Clone)]
pub struct ProbeBattery {
    kind: BatteryKind,
    probes: Vec<TestFunction>,
}

impl ProbeBattery {
    pub fn kind(&self) -> BatteryKind {
        self.kind
    }

    pub fn probes(&self) -> &[TestFunction] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn from_probes(kind: BatteryKind, mut probes: Vec<TestFunction>) -> Self {
        probes.sort_by(|a, b| a.id.cmp(&b.id));
        ProbeBattery { kind, probes }
    }

    /// The default Fin battery on `k`: 6 tensor bumps (3 centers x 2 radii),
    /// the 3 wide bumps' first derivatives, two bumps translated by `h/omega`
    /// (= `1/omega` on a unit-half-width box), and one bump scaled by
    /// `(1 + 1/omega)` -- 12 probes.
    pub fn fin_default(
        quad: &Quadrature,
        k: &CompactBox,
        grid: &OmegaGrid,
    ) -> Result<Self, PairingError> {
        let n = k.dimension();
        let center = k.center();
        let half: Vec<f64> = (0..n).map(|i| 0.5 * k.len(i)).collect();
        let check_omegas = [grid.min_omega(), grid.max_omega()];
        let mut probes = Vec::new();

        let center_fracs = [-0.3, 0.0, 0.3];
        let radius_fracs = [0.7, 0.35];
        for (ci, &cf) in center_fracs.iter().enumerate() {
            for (ri, &rf) in radius_fracs.iter().enumerate() {
                let c: Vec<f64> =
                    (0..n).map(|i| center[i] + cf * half[i]).collect();
                let r: Vec<f64> = (0..n).map(|i| rf * half[i]).collect();
                let support = CompactBox::new(
                    c.iter().zip(&r).map(|(&c, &r)| (c - r, c + r)).collect(),
                );
                let tf = TestFunction::from_parts(
                    format!("fin_bump_c{ci}_r{ri}"),
                    tensor_bump_expr(&c, &r),
                    support,
                    TestFunctionKind::Standard,
                    quad,
                    &check_omegas,
                )?;
                probes.push(tf);
            }
        }
        // first derivatives of the wide bumps
        for (ci, &cf) in center_fracs.iter().enumerate() {
            let c: Vec<f64> = (0..n).map(|i| center[i] + cf * half[i]).collect();
            let r: Vec<f64> = (0..n).map(|i| 0.7 * half[i]).collect();
            let support =
                CompactBox::new(c.iter().zip(&r).map(|(&c, &r)| (c - r, c + r)).collect());
            let mut alpha = vec![0usize; n];
            alpha[0] = 1;
            let tf = TestFunction::from_parts(
                format!("fin_dbump_c{ci}"),
                tensor_bump_expr(&c, &r).differentiate(&alpha),
                support,
                TestFunctionKind::Standard,
                quad,
                &check_omegas,
            )?;
            probes.push(tf);
        }
        // translated by h/omega (both signs), radius 0.7h, centered
        for (label, sign) in [("neg", -1.0f64), ("pos", 1.0f64)] {
            let mut expr: Option<Expression> = None;
            let mut support_axes = Vec::new();
            for i in 0..n {
                let r = 0.7 * half[i];
                let shift = Expression::product(
                    Expression::constant(sign * half[i]),
                    Expression::int_pow(Expression::omega(), -1),
                );
                let arg = Expression::quotient(
                    Expression::sub(
                        Expression::sub(Expression::coord(i), Expression::constant(center[i])),
                        shift,
                    ),
                    Expression::constant(r),
                );
                let b = Expression::bump(arg);
                expr = Some(match expr {
                    None => b,
                    Some(p) => Expression::product(p, b),
                });
                let max_shift = half[i] / grid.min_omega();
                support_axes.push((center[i] - r - max_shift, center[i] + r + max_shift));
            }
            let mut tf = TestFunction::from_parts(
                format!("fin_shift_{label}"),
                expr.unwrap(),
                CompactBox::new(support_axes),
                TestFunctionKind::OmegaDependent,
                quad,
                &check_omegas,
            )?;
            tf.band_limited = true;
            probes.push(tf);
        }
        // scaled by (1 + 1/omega), centered, radius 0.7h
        {
            let mut expr: Option<Expression> = None;
            let mut support_axes = Vec::new();
            for i in 0..n {
                let r = 0.7 * half[i];
                let scale = Expression::product(
                    Expression::constant(r),
                    Expression::sum(
                        Expression::constant(1.0),
                        Expression::int_pow(Expression::omega(), -1),
                    ),
                );
                let arg = Expression::quotient(
                    Expression::sub(Expression::coord(i), Expression::constant(center[i])),
                    scale,
                );
                let b = Expression::bump(arg);
                expr = Some(match expr {
                    None => b,
                    Some(p) => Expression::product(p, b),
                });
                let max_r = r * (1.0 + 1.0 / grid.min_omega());
                support_axes.push((center[i] - max_r, center[i] + max_r));
            }
            let mut tf = TestFunction::from_parts(
                "fin_scaled",
                expr.unwrap(),
                CompactBox::new(support_axes),
                TestFunctionKind::OmegaDependent,
                quad,
                &check_omegas,
            )?;
            tf.band_limited = true;
            probes.push(tf);
        }
        for tf in &probes {
            if !k.contains_box(tf.support()) {
                return Err(PairingError::SupportOutsideDomain { axis: 0 });
            }
        }
        Ok(Self::from_probes(BatteryKind::Fin, probes))
    }

    /// The default unrestricted battery: the Fin battery plus, per axis,
    /// `sin(omega x_i + theta) * phi0` for theta in {0, pi/2} with `phi0` the
    /// normalized centered bump of radius 0.7h.
    pub fn unrestricted_default(
        quad: &Quadrature,
        k: &CompactBox,
        grid: &OmegaGrid,
    ) -> Result<Self, PairingError> {
        let fin = Self::fin_default(quad, k, grid)?;
        let n = k.dimension();
        let center = k.center();
        let radius: Vec<f64> = (0..n).map(|i| 0.35 * k.len(i)).collect();
        let mut probes = fin.probes;
        let ambient = DomainBox::new(k.axes().to_vec());
        let ambient = DomainBox::new(
            ambient
                .axes()
                .iter()
                .map(|&(a, b)| (a - 1.0, b + 1.0))
                .collect(),
        );
        for axis in 0..n {
            for (ti, theta) in [(0usize, 0.0f64), (90, std::f64::consts::FRAC_PI_2)] {
                let spec = TestFunctionSpec::ModulatedBump {
                    axis,
                    theta,
                    center: center.clone(),
                    radius: radius.clone(),
                };
                let mut tf = build_test_function(quad, &spec, &ambient, grid)?;
                tf.id = format!("unres_mod_a{axis}_t{ti:03}");
                probes.push(tf);
            }
        }
        Ok(Self::from_probes(BatteryKind::Unrestricted, probes))
    }

    /// Check the Fin invariant: every probe's order-8 seminorm classifies as
    /// omega-uniformly bounded. High-order bump derivatives are large
    /// standard constants, so the absolute bound here is `abs_bound`
    /// (default 1e18), not the pairing-value bound.
    pub fn verify_fin(
        &self,
        quad: &Quadrature,
        grid: &OmegaGrid,
        abs_bound: f64,
    ) -> Result<BatteryCheck, PairingError> {
        let cfg = NetConfig { abs_bound, ..NetConfig::default() };
        let mut entries = Vec::new();
        let mut ok = true;
        for tf in &self.probes {
            if tf.kind == TestFunctionKind::Indicator {
                continue;
            }
            let samples: Result<Vec<(f64, f64)>, PairingError> = grid
                .values()
                .par_iter()
                .map(|&omega| {
                    let s = quad
                        .seminorm_levels_at_density(tf.expr(), tf.support(), 8, omega, 1.0)
                        .map_err(PairingError::Eval)?;
                    Ok((omega, s.seminorm(8)))
                })
                .collect();
            let class = classify_growth_with_noise(&samples?, None, &cfg)?;
            if !class.is_bounded() {
                ok = false;
            }
            entries.push((tf.id.clone(), class));
        }
        Ok(BatteryCheck { all_bounded: ok, entries })
    }
}

/// Result of the Fin-battery derivative-boundedness check.
#[derive(Debug, Clone)]
pub struct BatteryCheck {
    pub all_bounded: bool,
    pub entries: Vec<(String, GrowthClass)>,
}

// ----- pairing -----

/// One probe's pairing sweep along the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingSweep {
    pub probe_id: String,
    /// (omega, integral value)
    pub samples: Vec<(f64, f64)>,
    /// per-omega quadrature error bounds
    pub noise: Vec<f64>,
    pub class: GrowthClass,
}

/// `integral of f * phi` per omega, classified along the grid.
pub fn pair(
    quad: &Quadrature,
    f: &NetFunction,
    phi: &TestFunction,
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
) -> Result<PairingSweep, PairingError> {
    if !phi.support().within_domain(f.domain()) {
        return Err(PairingError::SupportOutsideDomain { axis: 0 });
    }
    let integrand = match phi.kind {
        TestFunctionKind::Indicator => f.expr().clone(),
        _ => Expression::product(f.expr().clone(), phi.expr().clone()),
    };
    let results: Result<Vec<(f64, f64, f64)>, PairingError> = grid
        .values()
        .par_iter()
        .map(|&omega| {
            let v = quad
                .integrate_expr(&integrand, phi.support(), omega)
                .map_err(PairingError::Eval)?;
            Ok((omega, v.value, v.error_bound))
        })
        .collect();
    let results = results?;
    let samples: Vec<(f64, f64)> = results.iter().map(|&(w, v, _)| (w, v)).collect();
    let noise: Vec<f64> = results.iter().map(|&(_, _, e)| e).collect();
    let class = classify_growth_with_noise(&samples, Some(&noise), net_cfg)?;
    Ok(PairingSweep { probe_id: phi.id.clone(), samples, noise, class })
}

/// Battery-wide pairing sweeps (parallel over probes).
pub fn pair_battery(
    quad: &Quadrature,
    f: &NetFunction,
    battery: &ProbeBattery,
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
) -> Result<Vec<PairingSweep>, PairingError> {
    battery
        .probes
        .par_iter()
        .map(|phi| pair(quad, f, phi, grid, net_cfg))
        .collect()
}

pub const BATTERY_CAVEAT: &str =
    "verdict is sound only relative to this finite probe battery; \
     it cannot exhaust the internal test functions";

/// Report of an S-distribution membership test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SDistributionReport {
    pub verdict: bool,
    pub probes: Vec<PairingSweep>,
    pub caveat: String,
}

/// Is every battery pairing finite (or infinitesimal)?
pub fn is_s_distribution(
    quad: &Quadrature,
    f: &NetFunction,
    battery: &ProbeBattery,
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
) -> Result<SDistributionReport, PairingError> {
    if battery.kind != BatteryKind::Fin {
        return Err(PairingError::WrongBatteryKind { expected: "fin" });
    }
    let probes = pair_battery(quad, f, battery, grid, net_cfg)?;
    let verdict = probes.iter().all(|p| p.class.is_bounded());
    Ok(SDistributionReport { verdict, probes, caveat: BATTERY_CAVEAT.into() })
}

/// Are `f` and `g` D'-infinitely close (every pairing of the difference
/// infinitesimal)?
pub fn dprime_close(
    quad: &Quadrature,
    f: &NetFunction,
    g: &NetFunction,
    battery: &ProbeBattery,
    grid: &OmegaGrid,
    net_cfg: &NetConfig,
) -> Result<SDistributionReport, PairingError> {
    if battery.kind != BatteryKind::Fin {
        return Err(PairingError::WrongBatteryKind { expected: "fin" });
    }
    assert_eq!(f.domain(), g.domain(), "dprime_close requires a common domain");
    let diff = NetFunction::new(
        Expression::sub(f.expr().clone(), g.expr().clone()),
        f.domain().clone(),
    );
    let probes = pair_battery(quad, &diff, battery, grid, net_cfg)?;
    let verdict = probes.iter().all(|p| p.class.is_infinitesimal());
    Ok(SDistributionReport { verdict, probes, caveat: BATTERY_CAVEAT.into() })
}

// ----- order estimation -----

/// Ratio sweep of one probe at one candidate order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioRow {
    pub m: usize,
    /// (omega, |pairing| / seminorm_m)
    pub ratios: Vec<(f64, f64)>,
    pub class: GrowthClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRatioTable {
    pub probe_id: String,
    pub pair_samples: Vec<(f64, f64)>,
    pub noise: Vec<f64>,
    /// per-omega seminorm levels (level l = max over |alpha| = l)
    pub seminorm_levels: Vec<Vec<f64>>,
    pub rows: Vec<RatioRow>,
}

/// Result of an order estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderEstimate {
    /// The smallest qualifying order, or `m_max + 1` when `exceeded`.
    pub m: usize,
    pub exceeded: bool,
    /// Largest qualifying ratio at the largest omega (the witness constant).
    pub witness_c: f64,
    pub m_max: usize,
    pub probes: Vec<ProbeRatioTable>,
    pub caveat: String,
}

fn probe_ratio_tables(
    quad: &Quadrature,
    f: &NetFunction,
    k: &CompactBox,
    battery: &ProbeBattery,
    grid: &OmegaGrid,
    m_max: usize,
) -> Result<Vec<ProbeRatioTable>, PairingError> {
    for phi in &battery.probes {
        if !k.contains_box(phi.support()) {
            return Err(PairingError::SupportOutsideDomain { axis: 0 });
        }
    }
    battery
        .probes
        .par_iter()
        .map(|phi| {
            let integrand = match phi.kind {
                TestFunctionKind::Indicator => f.expr().clone(),
                _ => Expression::product(f.expr().clone(), phi.expr().clone()),
            };
            let per_omega: Result<Vec<(f64, f64, f64, Vec<f64>)>, PairingError> = grid
                .values()
                .par_iter()
                .map(|&omega| {
                    let v = quad
                        .integrate_expr(&integrand, phi.support(), omega)
                        .map_err(PairingError::Eval)?;
                    let omega_eff = if phi.is_band_limited() { 1.0 } else { omega };
                    let levels = quad
                        .seminorm_levels_at_density(phi.expr(), phi.support(), m_max, omega, omega_eff)
                        .map_err(PairingError::Eval)?;
                    Ok((omega, v.value, v.error_bound, levels.per_level))
                })
                .collect();
            let per_omega = per_omega?;
            let pair_samples: Vec<(f64, f64)> =
                per_omega.iter().map(|r| (r.0, r.1)).collect();
            let noise: Vec<f64> = per_omega.iter().map(|r| r.2).collect();
            let seminorm_levels: Vec<Vec<f64>> =
                per_omega.iter().map(|r| r.3.clone()).collect();
            Ok(ProbeRatioTable {
                probe_id: phi.id.clone(),
                pair_samples,
                noise,
                seminorm_levels,
                rows: Vec::new(),
            })
        })
        .collect()
}

fn seminorm_at(table: &ProbeRatioTable, idx: usize, m: usize) -> f64 {
    table.seminorm_levels[idx][..=m].iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Smallest `m <= m_max` such that for every probe the ratio
/// `|pairing| / seminorm_m` classifies bounded along the grid; the order
/// definition with unrestricted (including omega-dependent) probes.
pub fn estimate_s_order(
    quad: &Quadrature,
    f: &NetFunction,
    k: &CompactBox,
    battery: &ProbeBattery,
    grid: &OmegaGrid,
    m_max: usize,
    net_cfg: &NetConfig,
) -> Result<OrderEstimate, PairingError> {
    if battery.kind != BatteryKind::Unrestricted {
        return Err(PairingError::WrongBatteryKind { expected: "unrestricted" });
    }
    let mut tables = probe_ratio_tables(quad, f, k, battery, grid, m_max)?;
    let mut chosen: Option<usize> = None;
    for m in 0..=m_max {
        let mut all_bounded = true;
        for t in tables.iter_mut() {
            let ratios: Vec<(f64, f64)> = t
                .pair_samples
                .iter()
                .enumerate()
                .map(|(i, &(w, v))| (w, v.abs() / seminorm_at(t, i, m)))
                .collect();
            let noise: Vec<f64> = t
                .noise
                .iter()
                .enumerate()
                .map(|(i, &e)| e / seminorm_at(t, i, m))
                .collect();
            let class = classify_growth_with_noise(&ratios, Some(&noise), net_cfg)?;
            if !class.is_bounded() {
                all_bounded = false;
            }
            t.rows.push(RatioRow { m, ratios, class });
        }
        if all_bounded && chosen.is_none() {
            chosen = Some(m);
        }
    }
    let (m, exceeded) = match chosen {
        Some(m) => (m, false),
        None => (m_max + 1, true),
    };
    let witness_c = if exceeded {
        f64::INFINITY
    } else {
        tables
            .iter()
            .map(|t| t.rows[m].ratios.last().map_or(0.0, |r| r.1))
            .fold(0.0f64, f64::max)
    };
    Ok(OrderEstimate {
        m,
        exceeded,
        witness_c,
        m_max,
        probes: tables,
        caveat: format!(
            "{BATTERY_CAVEAT}; the reported m is the estimator's m (no finite-omega surrogate \
             exists for the underspill step)"
        ),
    })
}

/// Distributional order of the standard part: the order bound relaxed by an
/// infinitesimal excess over some standard constant (searched over a decade
/// ladder), restricted to Fin probes.
pub fn estimate_distributional_order(
    quad: &Quadrature,
    f: &NetFunction,
    k: &CompactBox,
    battery: &ProbeBattery,
    grid: &OmegaGrid,
    m_max: usize,
    net_cfg: &NetConfig,
) -> Result<OrderEstimate, PairingError> {
    if battery.kind != BatteryKind::Fin {
        return Err(PairingError::WrongBatteryKind { expected: "fin" });
    }
    let sdist = is_s_distribution(quad, f, battery, grid, net_cfg)?;
    if !sdist.verdict {
        let probe = sdist
            .probes
            .iter()
            .find(|p| !p.class.is_bounded())
            .map(|p| p.probe_id.clone())
            .unwrap_or_default();
        return Err(PairingError::NotSDistribution { probe });
    }
    const C0_LADDER: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
    let mut tables = probe_ratio_tables(quad, f, k, battery, grid, m_max)?;
    let mut chosen: Option<usize> = None;
    for m in 0..=m_max {
        let mut all_pass = true;
        for t in tables.iter_mut() {
            let ratios: Vec<(f64, f64)> = t
                .pair_samples
                .iter()
                .enumerate()
                .map(|(i, &(w, v))| (w, v.abs() / seminorm_at(t, i, m)))
                .collect();
            let noise: Vec<f64> = t
                .noise
                .iter()
                .enumerate()
                .map(|(i, &e)| e / seminorm_at(t, i, m))
                .collect();
            let mut passed_class: Option<GrowthClass> = None;
            for &c0 in &C0_LADDER {
                let excess: Vec<(f64, f64)> =
                    ratios.iter().map(|&(w, r)| (w, (r - c0).max(0.0))).collect();
                let class = classify_growth_with_noise(&excess, Some(&noise), net_cfg)?;
                if class.is_infinitesimal() {
                    passed_class = Some(class);
                    break;
                }
            }
            let class = match passed_class {
                Some(c) => c,
                None => {
                    all_pass = false;
                    classify_growth_with_noise(&ratios, Some(&noise), net_cfg)?
                }
            };
            t.rows.push(RatioRow { m, ratios, class });
        }
        if all_pass && chosen.is_none() {
            chosen = Some(m);
        }
    }
    let (m, exceeded) = match chosen {
        Some(m) => (m, false),
        None => (m_max + 1, true),
    };
    let witness_c = if exceeded {
        f64::INFINITY
    } else {
        tables
            .iter()
            .map(|t| t.rows[m].ratios.last().map_or(0.0, |r| r.1))
            .fold(0.0f64, f64::max)
    };
    Ok(OrderEstimate {
        m,
        exceeded,
        witness_c,
        m_max,
        probes: tables,
        caveat: BATTERY_CAVEAT.into(),
    })
}
