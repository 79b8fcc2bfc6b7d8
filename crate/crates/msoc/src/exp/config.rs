//! Experiment configuration: one human-editable TOML file per run.
//!
//! The schema is versioned (`msoc-config-v1`) and strict: unknown keys are
//! rejected so that typos fail loudly instead of silently running defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_SCHEMA: &str = "msoc-config-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentTag {
    LangevinDw,
    PeriodicMsp,
    LqrSweep,
    EntropyGap,
    L2Convergence,
}

impl ExperimentTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentTag::LangevinDw => "langevin_dw",
            ExperimentTag::PeriodicMsp => "periodic_msp",
            ExperimentTag::LqrSweep => "lqr_sweep",
            ExperimentTag::EntropyGap => "entropy_gap",
            ExperimentTag::L2Convergence => "l2_convergence",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "langevin_dw" => Ok(ExperimentTag::LangevinDw),
            "periodic_msp" => Ok(ExperimentTag::PeriodicMsp),
            "lqr_sweep" => Ok(ExperimentTag::LqrSweep),
            "entropy_gap" => Ok(ExperimentTag::EntropyGap),
            "l2_convergence" => Ok(ExperimentTag::L2Convergence),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Absolute Euler-Maruyama step; when absent, `dt_over_eps2 * eps^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Step rule for scale-separated runs, dt = dt_over_eps2 * eps^2.
    pub dt_over_eps2: f64,
    pub t_max: f64,
    pub n_traj: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn dt_for(&self, epsilon: f64) -> f64 {
        self.dt.unwrap_or(self.dt_over_eps2 * epsilon * epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// Amplitude of the periodic perturbation `p(y) = a sin(2 pi y)`.
    pub p_amplitude: f64,
    /// Constant running cost G.
    pub g_const: f64,
    /// Exit threshold: paths stop once x >= this value.
    pub stop_threshold: f64,
    /// Initial fast coordinate for two-variable sampling runs.
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrConfig {
    /// Block-matrix file to load; the bundled synthetic fixture when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_file: Option<String>,
    pub are_tol: f64,
}

/// Full description of one experiment run; round-trips losslessly through
/// TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub experiment: ExperimentTag,
    pub beta: f64,
    pub epsilon_list: Vec<f64>,
    pub x0_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub grid: GridConfig,
    pub mc: McConfig,
    pub potential: PotentialConfig,
    pub lqr: LqrConfig,
}

impl ExperimentConfig {
    /// Built-in defaults per experiment; these carry the worked-example
    /// parameter choices (beta = 2 and p = 0.5 sin 2 pi y for the periodic
    /// runs, beta = 0.01 for the LQR sweep, x0 in {1.0, 1.2, 1.5} for the
    /// double-well runs).
    pub fn default_for(tag: ExperimentTag) -> Self {
        let base = ExperimentConfig {
            schema: CONFIG_SCHEMA.to_string(),
            experiment: tag,
            beta: 1.0,
            epsilon_list: vec![0.5, 0.35, 0.25, 0.15, 0.1],
            x0_list: vec![1.0, 1.2, 1.5],
            delta_list: vec![],
            output_dir: None,
            grid: GridConfig {
                x_min: -3.0,
                x_max: 2.0,
                n_nodes: 2001,
            },
            mc: McConfig {
                dt: None,
                dt_over_eps2: 0.025,
                t_max: 200.0,
                n_traj: 10_000,
                seed: 7_240_001,
            },
            potential: PotentialConfig {
                p_amplitude: 0.0,
                g_const: 1.0,
                stop_threshold: 2.0,
                y0: 0.0,
            },
            lqr: LqrConfig {
                system_file: None,
                are_tol: 1e-11,
            },
        };
        match tag {
            ExperimentTag::LangevinDw => base,
            ExperimentTag::PeriodicMsp => ExperimentConfig {
                beta: 2.0,
                epsilon_list: vec![0.1, 0.05],
                x0_list: vec![-3.5, -2.5, -1.5, -0.5, 0.5],
                grid: GridConfig {
                    x_min: -6.0,
                    x_max: 1.5,
                    n_nodes: 1501,
                },
                mc: McConfig {
                    dt: None,
                    dt_over_eps2: 0.025,
                    t_max: 100.0,
                    n_traj: 10_000,
                    seed: 7_240_002,
                },
                potential: PotentialConfig {
                    p_amplitude: 0.5,
                    g_const: 1.0,
                    stop_threshold: 1.5,
                    y0: 0.0,
                },
                ..base
            },
            ExperimentTag::L2Convergence => ExperimentConfig {
                beta: 2.0,
                epsilon_list: vec![0.1, 0.05, 0.025],
                x0_list: vec![],
                grid: GridConfig {
                    x_min: -6.0,
                    x_max: 1.5,
                    n_nodes: 1501,
                },
                potential: PotentialConfig {
                    p_amplitude: 0.5,
                    g_const: 1.0,
                    stop_threshold: 1.5,
                    y0: 0.0,
                },
                ..base
            },
            ExperimentTag::LqrSweep => ExperimentConfig {
                beta: 0.01,
                epsilon_list: vec![0.2, 0.1, 0.05, 0.025],
                x0_list: vec![],
                ..base
            },
            ExperimentTag::EntropyGap => ExperimentConfig {
                beta: 1.0,
                epsilon_list: vec![],
                x0_list: vec![1.0],
                delta_list: vec![0.05, 0.1, 0.2, 0.4],
                mc: McConfig {
                    dt: Some(1e-4),
                    dt_over_eps2: 0.025,
                    t_max: 100.0,
                    n_traj: 50_000,
                    seed: 7_240_003,
                },
                ..base
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("TOML parse failed: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("TOML emit failed: {e}")))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        Self::from_toml_str(&content)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported config schema `{}`, expected `{CONFIG_SCHEMA}`",
                self.schema
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        for &e in &self.epsilon_list {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Config(format!("epsilon values must be positive, got {e}")));
            }
        }
        if self.epsilon_list.len() > 64 || self.x0_list.len() > 64 || self.delta_list.len() > 64 {
            return Err(Error::Config("parameter lists capped at 64 entries".into()));
        }
        if !(self.grid.x_min < self.grid.x_max)
            || !self.grid.x_min.is_finite()
            || !self.grid.x_max.is_finite()
        {
            return Err(Error::Config(format!(
                "grid range [{}, {}] is not an interval",
                self.grid.x_min, self.grid.x_max
            )));
        }
        if self.grid.n_nodes < 3 || self.grid.n_nodes > 2_000_000 {
            return Err(Error::Config(format!(
                "grid n_nodes must be in [3, 2000000], got {}",
                self.grid.n_nodes
            )));
        }
        if let Some(dt) = self.mc.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!("mc.dt must be positive, got {dt}")));
            }
        }
        if !(self.mc.dt_over_eps2 > 0.0) || !self.mc.dt_over_eps2.is_finite() {
            return Err(Error::Config(format!(
                "mc.dt_over_eps2 must be positive, got {}",
                self.mc.dt_over_eps2
            )));
        }
        if !(self.mc.t_max > 0.0) || !self.mc.t_max.is_finite() {
            return Err(Error::Config(format!(
                "mc.t_max must be positive, got {}",
                self.mc.t_max
            )));
        }
        if self.mc.n_traj == 0 || self.mc.n_traj > 100_000_000 {
            return Err(Error::Config(format!(
                "mc.n_traj must be in [1, 1e8], got {}",
                self.mc.n_traj
            )));
        }
        for &x in &self.x0_list {
            if !x.is_finite() {
                return Err(Error::Config("x0 values must be finite".into()));
            }
        }
        for &d in &self.delta_list {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Config(format!(
                    "delta values must be finite and nonnegative, got {d}"
                )));
            }
        }
        if !(self.potential.g_const >= 0.0) || !self.potential.g_const.is_finite() {
            return Err(Error::Config(format!(
                "potential.g_const must be nonnegative, got {}",
                self.potential.g_const
            )));
        }
        if !self.potential.p_amplitude.is_finite()
            || !self.potential.stop_threshold.is_finite()
            || !self.potential.y0.is_finite()
        {
            return Err(Error::Config("potential parameters must be finite".into()));
        }
        if !(self.lqr.are_tol > 0.0) || !self.lqr.are_tol.is_finite() {
            return Err(Error::Config(format!(
                "lqr.are_tol must be positive, got {}",
                self.lqr.are_tol
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_experiment() {
        for tag in [
            ExperimentTag::LangevinDw,
            ExperimentTag::PeriodicMsp,
            ExperimentTag::LqrSweep,
            ExperimentTag::EntropyGap,
            ExperimentTag::L2Convergence,
        ] {
            ExperimentConfig::default_for(tag).validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        for tag in [
            ExperimentTag::LangevinDw,
            ExperimentTag::PeriodicMsp,
            ExperimentTag::LqrSweep,
            ExperimentTag::EntropyGap,
            ExperimentTag::L2Convergence,
        ] {
            let cfg = ExperimentConfig::default_for(tag);
            let text = cfg.to_toml_string().unwrap();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ExperimentConfig::default_for(ExperimentTag::LangevinDw)
            .to_toml_string()
            .unwrap();
        text.push_str("\nmystery_knob = 3\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let cfg = ExperimentConfig::default_for(ExperimentTag::LangevinDw);
        let text = cfg.to_toml_string().unwrap().replace(CONFIG_SCHEMA, "msoc-config-v0");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dt_rule_scales_with_eps_squared() {
        let cfg = ExperimentConfig::default_for(ExperimentTag::LangevinDw);
        assert!((cfg.mc.dt_for(0.1) - 0.025 * 0.01).abs() < 1e-15);
        let mut cfg = cfg;
        cfg.mc.dt = Some(1e-3);
        assert_eq!(cfg.mc.dt_for(0.1), 1e-3);
    }
}
