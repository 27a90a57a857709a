//! Versioned run configuration. Every field has a default, so `{}` is a complete config and
//! reproduces the reference sweep.

use crate::error::{Error, Result};
use crate::forcing::{BodyForce, TimeProfile};
use crate::geometry::{reciprocal_index, ObstacleShape};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub geometry: GeometryConfig,
    pub time: TimeConfig,
    pub forcing: BodyForce,
    pub sweep: SweepConfig,
    pub tolerance: ToleranceConfig,
    /// Output directory; the CLI flag and the environment variable take precedence.
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub shape: ObstacleShape,
    pub obstacle_extent: f64,
    pub n_cell: usize,
    pub kappa0: f64,
}

/// `horizon` is `T`, `steps` is `M`. The kernel study uses the graded grid with exponent
/// `gamma`; the expansion sweep needs a uniform grid with the same `T` and `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub steps: usize,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// Cells per side of the grid for `p₀`.
    pub n_macro: usize,
    /// Run the boundary-layer correctors for every `ε ≤ 1/8`.
    pub boundary_layer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Relative update tolerance of the homogenized fixed point.
    pub homogenized: f64,
    /// Relative tolerance for the divergence solves.
    pub divergence: f64,
    /// Singular values of the force history below this fraction of the largest are dropped.
    pub force_modes: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometryConfig::default(),
            time: TimeConfig::default(),
            forcing: BodyForce { curl: 1.0, grad: 1.0, profile: TimeProfile::Sine { omega: std::f64::consts::FRAC_PI_2 } },
            sweep: SweepConfig::default(),
            tolerance: ToleranceConfig::default(),
            output: None,
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { shape: ObstacleShape::Square, obstacle_extent: 0.25, n_cell: 32, kappa0: 2.0 }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { horizon: 2.0, steps: 128, gamma: 2.0 }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { epsilons: vec![0.25, 0.125, 0.0625], n_macro: 64, boundary_layer: true }
    }
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { homogenized: 1e-10, divergence: 1e-9, force_modes: 1e-6 }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        let g = &self.geometry;
        if !(0.0..0.5).contains(&g.obstacle_extent) {
            return Err(bad("geometry.obstacle_extent", format!("must lie in [0, 1/2), got {}", g.obstacle_extent)));
        }
        if g.n_cell < 4 {
            return Err(bad("geometry.n_cell", format!("must be at least 4, got {}", g.n_cell)));
        }
        if !(g.kappa0 >= 2.0) {
            return Err(bad("geometry.kappa0", format!("must be at least 2, got {}", g.kappa0)));
        }
        let t = &self.time;
        if !(t.horizon > 0.0 && t.horizon.is_finite()) {
            return Err(bad("time.horizon", format!("must be positive, got {}", t.horizon)));
        }
        if t.steps == 0 {
            return Err(bad("time.steps", "must be at least 1"));
        }
        if !(t.gamma >= 1.0) {
            return Err(bad("time.gamma", format!("must be at least 1, got {}", t.gamma)));
        }
        self.forcing.validate().map_err(|e| bad("forcing", e))?;
        let s = &self.sweep;
        if s.epsilons.is_empty() {
            return Err(bad("sweep.epsilons", "must not be empty"));
        }
        for (k, &e) in s.epsilons.iter().enumerate() {
            let key = format!("sweep.epsilons[{k}]");
            let m = reciprocal_index(e, &key)?;
            if m < 4 {
                return Err(bad(&key, format!("ε = {e} is coarser than 1/4")));
            }
            if s.epsilons[..k].iter().any(|&p| (p - e).abs() < 1e-12) {
                return Err(bad(&key, format!("ε = {e} is listed twice")));
            }
        }
        if s.n_macro < 4 {
            return Err(bad("sweep.n_macro", format!("must be at least 4, got {}", s.n_macro)));
        }
        let tol = &self.tolerance;
        for (key, v) in [
            ("tolerance.homogenized", tol.homogenized),
            ("tolerance.divergence", tol.divergence),
            ("tolerance.force_modes", tol.force_modes),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(bad(key, format!("must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    /// Fine cells per side for a given `ε`.
    pub fn fine_n(&self, eps: f64) -> Result<usize> {
        Ok(reciprocal_index(eps, "epsilon")? * self.geometry.n_cell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
        let back = RunConfig::from_json(&RunConfig::default().to_json()).unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::from_json(r#"{"sweep": {"epsilons": [0.25, 0.3]}}"#).unwrap_err();
        assert!(e.is_config() && e.to_string().contains("sweep.epsilons[1]"), "{e}");
        let e = RunConfig::from_json(r#"{"time": {"steps": 0}}"#).unwrap_err();
        assert!(e.to_string().contains("time.steps"), "{e}");
        let e = RunConfig::from_json(r#"{"geometry": {"radius": 0.2}}"#).unwrap_err();
        assert!(e.to_string().contains("radius"), "{e}");
        let e = RunConfig::from_json(r#"{"schema_version": 7}"#).unwrap_err();
        assert!(e.to_string().contains("schema_version"), "{e}");
    }
}
