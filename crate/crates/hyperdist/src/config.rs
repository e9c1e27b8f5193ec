//! Run configuration: defaults, `key = value` config files, and merging.
//!
//! File format: one `section.key = value` per line, `#` comments, sections
//! `net.*`, `quad.*`, `battery.*`. Unknown keys are errors.

use crate::error::ConfigError;
use crate::net::{NetConfig, OmegaGrid};
use crate::quad::QuadratureConfig;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub quad_base_nodes: f64,
    pub quad_panel_order: usize,
    pub quad_tolerance: f64,
    pub quad_node_cap: usize,
    pub quad_sup_factor: f64,
    pub net_omega0: f64,
    pub net_ratio: f64,
    /// Grid levels J (count = J + 1); `None` picks the per-dimension default
    /// (8 in 1D, 4 in 2D and above).
    pub net_levels: Option<usize>,
    pub net_tau: f64,
    pub net_abs_bound: f64,
    /// Absolute bound for the battery derivative-sup check (high-order bump
    /// derivatives are large standard constants).
    pub battery_abs_bound: f64,
    /// Verify the Fin-battery invariant at construction.
    pub battery_verify: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        let n = NetConfig::default();
        RunConfig {
            quad_base_nodes: q.base_nodes,
            quad_panel_order: q.panel_order,
            quad_tolerance: q.tolerance,
            quad_node_cap: q.node_cap,
            quad_sup_factor: q.sup_factor,
            net_omega0: 16.0,
            net_ratio: 2.0,
            net_levels: None,
            net_tau: n.tau,
            net_abs_bound: n.abs_bound,
            battery_abs_bound: 1e18,
            battery_verify: true,
        }
    }
}

impl RunConfig {
    pub fn quadrature_config(&self) -> QuadratureConfig {
        QuadratureConfig {
            base_nodes: self.quad_base_nodes,
            panel_order: self.quad_panel_order,
            tolerance: self.quad_tolerance,
            node_cap: self.quad_node_cap,
            sup_factor: self.quad_sup_factor,
        }
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig { tau: self.net_tau, abs_bound: self.net_abs_bound, ..NetConfig::default() }
    }

    pub fn omega_grid(&self, dimension: usize) -> OmegaGrid {
        let levels = self.net_levels.unwrap_or(if dimension >= 2 { 4 } else { 8 });
        OmegaGrid::geometric(self.net_omega0, self.net_ratio, levels)
    }

    /// Apply a config file's contents (later settings win).
    pub fn apply_file_contents(&mut self, contents: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in contents.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::BadLine { line: lineno + 1, content: raw.to_string() });
            };
            self.apply_kv(key.trim(), value.trim(), lineno + 1)?;
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn f64_of(key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        fn usize_of(key: &str, value: &str, line: usize) -> Result<usize, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key {
            "quad.base_nodes" => self.quad_base_nodes = f64_of(key, value, line)?,
            "quad.panel_order" => self.quad_panel_order = usize_of(key, value, line)?,
            "quad.tolerance" => self.quad_tolerance = f64_of(key, value, line)?,
            "quad.node_cap" => self.quad_node_cap = usize_of(key, value, line)?,
            "quad.sup_factor" => self.quad_sup_factor = f64_of(key, value, line)?,
            "net.omega0" => self.net_omega0 = f64_of(key, value, line)?,
            "net.ratio" => self.net_ratio = f64_of(key, value, line)?,
            "net.levels" => self.net_levels = Some(usize_of(key, value, line)?),
            "net.tau" => self.net_tau = f64_of(key, value, line)?,
            "net.abs_bound" => self.net_abs_bound = f64_of(key, value, line)?,
            "battery.abs_bound" => self.battery_abs_bound = f64_of(key, value, line)?,
            "battery.verify" => {
                self.battery_verify = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                        })
                    }
                }
            }
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sectioned_file() {
        let mut cfg = RunConfig::default();
        cfg.apply_file_contents(
            "# comment\n\
             quad.base_nodes = 16\n\
             net.omega0 = 8 # inline comment\n\
             battery.verify = false\n",
        )
        .unwrap();
        assert_eq!(cfg.quad_base_nodes, 16.0);
        assert_eq!(cfg.net_omega0, 8.0);
        assert!(!cfg.battery_verify);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_file_contents("quad.bogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
    }

    #[test]
    fn bad_line_is_an_error() {
        let mut cfg = RunConfig::default();
        assert!(matches!(
            cfg.apply_file_contents("just words\n"),
            Err(ConfigError::BadLine { line: 1, .. })
        ));
    }
}
