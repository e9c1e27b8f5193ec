//! Asymptotic interpretation of nonstandard predicates along a geometric
//! omega grid: infinitesimal / finite / infinite classification by log-log
//! slope fitting, standard parts, and S-continuity as an omega-uniform
//! modulus of continuity.

use crate::error::PairingError;
use crate::expr::NetFunction;
use crate::quad::{CompactBox, Quadrature};
use serde::{Deserialize, Serialize};

/// Geometric omega grid `omega_j = omega0 * r^j`, `j = 0..=levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    values: Vec<f64>,
}

impl OmegaGrid {
    pub fn geometric(omega0: f64, ratio: f64, levels: usize) -> Self {
        assert!(omega0 >= 1.0 && ratio > 1.0);
        let values = (0..=levels).map(|j| omega0 * ratio.powi(j as i32)).collect();
        OmegaGrid { values }
    }

    /// Default 1D grid: 16, 32, ..., 4096.
    pub fn default_1d() -> Self {
        OmegaGrid::geometric(16.0, 2.0, 8)
    }

    /// Default 2D grid: 16, 32, ..., 256.
    pub fn default_2d() -> Self {
        OmegaGrid::geometric(16.0, 2.0, 4)
    }

    pub fn for_dimension(n: usize) -> Self {
        if n >= 2 {
            OmegaGrid::default_2d()
        } else {
            OmegaGrid::default_1d()
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_omega(&self) -> f64 {
        self.values[0]
    }

    pub fn max_omega(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Thresholds for growth classification; see config keys `net.*`.
#[derive(Debug, Clone)]
pub struct NetConfig {
    /// Slope threshold separating the classes (default 0.1).
    pub tau: f64,
    /// Absolute bound a finite quantity must respect (default 1e6).
    pub abs_bound: f64,
    /// Magnitude floor below which values count as numerically zero
    /// (default 1e-14); per-sample noise bounds can raise it.
    pub floor: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { tau: 0.1, abs_bound: 1e6, floor: 1e-14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthLabel {
    Infinitesimal,
    Finite,
    Infinite,
    Indeterminate,
}

/// Classification of a quantity's behavior along the omega grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthClass {
    pub label: GrowthLabel,
    /// Least-squares slope of log|q| vs log omega over the fit window
    /// (absent when every point sat below the floor).
    pub exponent: Option<f64>,
    /// RMS residual of the fit, natural-log scale.
    pub residual: f64,
    /// Value at the largest omega; only populated for finite quantities.
    pub standard_part: Option<f64>,
    /// How many fit-window points were censored at the noise floor.
    pub censored: usize,
    pub samples: Vec<(f64, f64)>,
}

impl GrowthClass {
    pub fn is_bounded(&self) -> bool {
        matches!(self.label, GrowthLabel::Infinitesimal | GrowthLabel::Finite)
    }

    pub fn is_infinitesimal(&self) -> bool {
        self.label == GrowthLabel::Infinitesimal
    }
}

/// Classify samples `(omega, value)` along the grid.
pub fn classify_growth(
    samples: &[(f64, f64)],
    cfg: &NetConfig,
) -> Result<GrowthClass, PairingError> {
    classify_growth_with_noise(samples, None, cfg)
}

/// As [`classify_growth`], with optional per-sample noise bounds (quadrature
/// error estimates). The effective floor of a sample is
/// `max(cfg.floor, 4 * noise)`: a value below its own numerical noise is
/// indistinguishable from zero, so such samples are censored rather than
/// fitted.
pub fn classify_growth_with_noise(
    samples: &[(f64, f64)],
    noise: Option<&[f64]>,
    cfg: &NetConfig,
) -> Result<GrowthClass, PairingError> {
    if samples.len() < 4 {
        return Err(PairingError::TooFewSamples { got: samples.len(), need: 4 });
    }
    for w in samples.windows(2) {
        assert!(w[0].0 < w[1].0, "omegas must be strictly increasing");
    }
    let floors: Vec<f64> = (0..samples.len())
        .map(|i| cfg.floor.max(4.0 * noise.map_or(0.0, |n| n[i])))
        .collect();

    let all_floor = samples.iter().zip(&floors).all(|(&(_, q), &fl)| q.abs() <= fl);
    let window = samples.len().max(8).div_ceil(2).max(4).min(samples.len());
    let start = samples.len() - window;
    let win = &samples[start..];
    let win_floors = &floors[start..];

    let uncensored: Vec<(f64, f64)> = win
        .iter()
        .zip(win_floors)
        .filter(|(&(_, q), &fl)| q.abs() > fl)
        .map(|(&s, _)| s)
        .collect();
    let censored = win.len() - uncensored.len();

    let fit = if uncensored.len() >= 2 { Some(log_fit(&uncensored)) } else { None };

    if all_floor {
        return Ok(GrowthClass {
            label: GrowthLabel::Infinitesimal,
            exponent: fit.map(|f| f.0),
            residual: fit.map_or(0.0, |f| f.1),
            standard_part: None,
            censored,
            samples: samples.to_vec(),
        });
    }

    // tail censoring: the quantity decayed into the numeric floor and stayed
    let tail_censored = censored > 0
        && win
            .iter()
            .zip(win_floors)
            .rev()
            .take_while(|(&(_, q), &fl)| q.abs() <= fl)
            .count()
            == censored;
    if tail_censored || uncensored.len() < 2 {
        return Ok(GrowthClass {
            label: GrowthLabel::Infinitesimal,
            exponent: fit.map(|f| f.0),
            residual: fit.map_or(0.0, |f| f.1),
            standard_part: None,
            censored,
            samples: samples.to_vec(),
        });
    }

    let (p, residual) = fit.unwrap();
    let max_abs = samples.iter().fold(0.0f64, |a, &(_, q)| a.max(q.abs()));
    let label = if residual <= 0.5 {
        if censored > 0 {
            // interior censoring with a recovery afterwards: unreliable
            GrowthLabel::Indeterminate
        } else if p <= -cfg.tau {
            GrowthLabel::Infinitesimal
        } else if p >= cfg.tau {
            GrowthLabel::Infinite
        } else if p >= cfg.tau / 2.0 {
            // [tau/2, tau): ambiguous between finite and infinite
            GrowthLabel::Indeterminate
        } else if max_abs <= cfg.abs_bound {
            // (-tau, tau/2): bounded; the negative half-band is ambiguous
            // between finite and infinitesimal, but both are bounded, so the
            // weaker label applies
            GrowthLabel::Finite
        } else {
            GrowthLabel::Indeterminate
        }
    } else {
        // high residual: only a consistently accelerating decay or growth
        // still gets a verdict
        let slopes: Vec<f64> = uncensored
            .windows(2)
            .map(|w| (w[1].1.abs().ln() - w[0].1.abs().ln()) / (w[1].0.ln() - w[0].0.ln()))
            .collect();
        if p <= -cfg.tau && slopes.iter().all(|&s| s <= -cfg.tau) {
            GrowthLabel::Infinitesimal
        } else if p >= cfg.tau && slopes.iter().all(|&s| s >= cfg.tau) {
            GrowthLabel::Infinite
        } else {
            GrowthLabel::Indeterminate
        }
    };

    Ok(GrowthClass {
        label,
        exponent: Some(p),
        residual,
        standard_part: if label == GrowthLabel::Finite {
            Some(samples.last().unwrap().1)
        } else {
            None
        },
        censored,
        samples: samples.to_vec(),
    })
}

/// Least-squares slope and RMS residual of `ln|q|` against `ln omega`.
fn log_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(w, _)| w.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, q)| q.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = my + slope * (x - mx);
            (y - pred) * (y - pred)
        })
        .sum();
    (slope, (rss / n).sqrt())
}

// ----- S-continuity as an omega-uniform modulus -----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub omega: f64,
    pub modulus: f64,
}

/// Report of the modulus-of-continuity sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SModulusReport {
    pub table: Vec<ModulusRow>,
    pub per_delta: Vec<(f64, GrowthClass)>,
    /// Half-oscillation of the sampled values (shift-invariant size of f).
    pub scale: f64,
    /// Acceptance threshold `mu = 0.05 * (1 + scale)`.
    pub threshold: f64,
    pub s_continuous: bool,
    pub grid_points: usize,
}

/// Omega-uniform modulus of continuity over axis-aligned pairs.
///
/// For each delta and omega, `modulus(delta, omega)` is the largest
/// oscillation of `f` over an axis-aligned window of side `delta` sampled at
/// the omega-scaled grid density. The verdict requires every
/// `modulus(delta, .)` to classify bounded along the grid and the modulus at
/// the finest delta and largest omega to stay below the threshold.
pub fn s_modulus(
    quad: &Quadrature,
    f: &NetFunction,
    k: &CompactBox,
    grid: &OmegaGrid,
    deltas: &[f64],
    net_cfg: &NetConfig,
) -> Result<SModulusReport, PairingError> {
    assert!(!deltas.is_empty());
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let delta_min = *deltas.last().unwrap();
    let n = k.dimension();

    // grid density: the sup rule, but at least 4 samples per delta_min
    let qcfg = quad.config();
    let mut rows: Vec<ModulusRow> = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut grid_points = 0usize;
    let mut per_delta_samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); deltas.len()];

    for &omega in grid.values() {
        let omega_eff = if f.expr().depends_on_omega() { omega } else { 1.0 };
        let mut counts: Vec<usize> = (0..n)
            .map(|i| {
                let rule =
                    qcfg.sup_factor * qcfg.base_nodes * k.len(i) * (omega_eff / 8.0).max(1.0);
                let pairs = 4.0 * k.len(i) / delta_min;
                (rule.max(pairs).ceil() as usize).max(8)
            })
            .collect();
        crate::quad::clamp_counts(&mut counts, qcfg.node_cap);
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let (a, b) = k.axis(i);
                crate::quad::linspace(a, b, counts[i] + 1)
            })
            .collect();
        let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let values = quad.eval_product_grid(f.expr(), &axes, omega).map_err(PairingError::Eval)?;
        grid_points = grid_points.max(values.len());
        for &v in &values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for (di, &delta) in deltas.iter().enumerate() {
            let mut osc = 0.0f64;
            for axis in 0..n {
                let spacing = k.len(axis) / (dims[axis] - 1) as f64;
                let w = ((delta / spacing).floor() as usize).min(dims[axis] - 1).max(1);
                osc = osc.max(axis_window_osc(&values, &dims, axis, w + 1));
            }
            rows.push(ModulusRow { delta, omega, modulus: osc });
            per_delta_samples[di].push((omega, osc));
        }
    }

    let scale = if hi > lo { 0.5 * (hi - lo) } else { 0.0 };
    let threshold = 0.05 * (1.0 + scale);
    let mut per_delta = Vec::new();
    let mut verdict = true;
    for (di, &delta) in deltas.iter().enumerate() {
        let class = classify_growth(&per_delta_samples[di], net_cfg)?;
        if !class.is_bounded() {
            verdict = false;
        }
        per_delta.push((delta, class));
    }
    let finest_last = rows
        .iter()
        .filter(|r| r.delta == delta_min && r.omega == grid.max_omega())
        .map(|r| r.modulus)
        .next_back()
        .unwrap_or(0.0);
    if finest_last > threshold {
        verdict = false;
    }

    Ok(SModulusReport {
        table: rows,
        per_delta,
        scale,
        threshold,
        s_continuous: verdict,
        grid_points,
    })
}

/// Max over all axis-aligned windows of `window` consecutive samples of
/// (max - min), over every grid line along `axis`. Monotonic-deque sliding
/// window, O(total).
fn axis_window_osc(values: &[f64], dims: &[usize], axis: usize, window: usize) -> f64 {
    let n = dims.len();
    let len = dims[axis];
    if len < 2 {
        return 0.0;
    }
    // stride of the axis in the row-major (last axis fastest) layout
    let stride: usize = dims[axis + 1..].iter().product();
    let lines: usize = values.len() / len;
    let mut best = 0.0f64;
    let mut maxq: Vec<usize> = Vec::with_capacity(window);
    let mut minq: Vec<usize> = Vec::with_capacity(window);
    let _ = n;
    for line in 0..lines {
        // base offset of this line: decompose line index over the other axes
        let mut rem = line;
        let mut base = 0usize;
        let mut mult = 1usize;
        // walk axes from last to first, skipping `axis`
        let mut strides = vec![0usize; dims.len()];
        {
            let mut m = 1usize;
            for ax in (0..dims.len()).rev() {
                strides[ax] = m;
                m *= dims[ax];
            }
        }
        for ax in (0..dims.len()).rev() {
            if ax == axis {
                continue;
            }
            let j = rem % dims[ax];
            rem /= dims[ax];
            base += j * strides[ax];
            mult *= dims[ax];
        }
        let _ = mult;
        maxq.clear();
        minq.clear();
        for i in 0..len {
            let v = values[base + i * stride];
            while let Some(&b) = maxq.last() {
                if values[base + b * stride] <= v {
                    maxq.pop();
                } else {
                    break;
                }
            }
            maxq.push(i);
            while let Some(&b) = minq.last() {
                if values[base + b * stride] >= v {
                    minq.pop();
                } else {
                    break;
                }
            }
            minq.push(i);
            if i + 1 >= window {
                let lo_idx = i + 1 - window;
                while maxq[0] < lo_idx {
                    maxq.remove(0);
                }
                while minq[0] < lo_idx {
                    minq.remove(0);
                }
                let osc = values[base + maxq[0] * stride] - values[base + minq[0] * stride];
                if osc > best {
                    best = osc;
                }
            }
        }
        // also windows shorter than `window` at the start (delta larger than
        // the line): covered by the full-line pass when window >= len
        if window >= len {
            let osc = values[base + maxq[0] * stride] - values[base + minq[0] * stride];
            if osc > best {
                best = osc;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NetConfig {
        NetConfig::default()
    }

    fn grid_samples(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        OmegaGrid::default_1d().values().iter().map(|&w| (w, f(w))).collect()
    }

    #[test]
    fn classifies_exact_power_laws() {
        let c = classify_growth(&grid_samples(|w| 1.0 / w), &cfg()).unwrap();
        assert_eq!(c.label, GrowthLabel::Infinitesimal);
        assert!((c.exponent.unwrap() + 1.0).abs() < 0.01);

        let c = classify_growth(&grid_samples(|w| 3.0 + 1.0 / w), &cfg()).unwrap();
        assert_eq!(c.label, GrowthLabel::Finite);
        assert!((c.standard_part.unwrap() - 3.0).abs() < 1e-3);

        let c = classify_growth(&grid_samples(|w| 0.5 * w * w), &cfg()).unwrap();
        assert_eq!(c.label, GrowthLabel::Infinite);
        assert!((c.exponent.unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn all_floor_values_are_infinitesimal() {
        let c = classify_growth(&grid_samples(|_| 1e-16), &cfg()).unwrap();
        assert_eq!(c.label, GrowthLabel::Infinitesimal);
    }

    #[test]
    fn superpolynomial_decay_is_infinitesimal_despite_residual() {
        // e^{-sqrt(w)}: strongly convex in log-log, residual > 0.5
        let c = classify_growth(&grid_samples(|w| (-w.sqrt()).exp()), &cfg()).unwrap();
        assert_eq!(c.label, GrowthLabel::Infinitesimal);
    }

    #[test]
    fn decay_into_noise_floor_is_infinitesimal() {
        // decays like w^-3 until it hits a 1e-9 noise floor
        let samples = grid_samples(|w| (w.powi(-3)).max(1e-9) * if w > 1000.0 { 1.3 } else { 1.0 });
        let noise: Vec<f64> = samples.iter().map(|_| 1e-9f64).collect();
        let c = classify_growth_with_noise(&samples, Some(&noise), &cfg()).unwrap();
        assert_eq!(c.label, GrowthLabel::Infinitesimal);
    }

    #[test]
    fn scale_equivariance_on_power_laws() {
        for k in [-2i32, -1, 1, 2] {
            let base = grid_samples(|w| 2.0 * w.powi(-1));
            let scaled = grid_samples(|w| 2.0 * w.powi(-1) * w.powi(k));
            let p0 = classify_growth(&base, &cfg()).unwrap().exponent.unwrap();
            let p1 = classify_growth(&scaled, &cfg()).unwrap().exponent.unwrap();
            assert!((p1 - p0 - k as f64).abs() < 0.02, "k={k}");
        }
    }

    #[test]
    fn reciprocal_duality() {
        let q = grid_samples(|w| w.powf(-1.5));
        let r = grid_samples(|w| w.powf(1.5));
        assert_eq!(classify_growth(&q, &cfg()).unwrap().label, GrowthLabel::Infinitesimal);
        assert_eq!(classify_growth(&r, &cfg()).unwrap().label, GrowthLabel::Infinite);
    }

    #[test]
    fn too_few_samples_errors() {
        let s = vec![(1.0, 1.0), (2.0, 1.0), (4.0, 1.0)];
        assert!(matches!(
            classify_growth(&s, &cfg()),
            Err(PairingError::TooFewSamples { got: 3, need: 4 })
        ));
    }

    #[test]
    fn window_oscillation_1d() {
        let dims = [5usize];
        let values = [0.0, 1.0, 0.5, -1.0, 0.0];
        // window of 2 samples: max adjacent jump is 1.5
        assert!((axis_window_osc(&values, &dims, 0, 2) - 1.5).abs() < 1e-15);
        // window of the whole line: 2.0
        assert!((axis_window_osc(&values, &dims, 0, 5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn window_oscillation_2d_axes() {
        // 2x3 grid, values = x (row) index -> oscillation only along axis 0
        let dims = [2usize, 3usize];
        let values = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert!((axis_window_osc(&values, &dims, 0, 2) - 1.0).abs() < 1e-15);
        assert_eq!(axis_window_osc(&values, &dims, 1, 2), 0.0);
    }
}
