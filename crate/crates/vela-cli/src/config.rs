//! TOML-backed run configuration.
//!
//! Every field has a documented default, missing sections and keys fall back
//! to those defaults, and `to_toml`/`from_toml` round-trip exactly so a config
//! written by the tool can be re-read and diffed by hand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vela::dynamics::SolverConfig;
use vela::{CutoffParams, Error, Grid, MaterialModel, MaterialParams, Result};

/// Which constitutive closure to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    /// Isotropic polynomial strain energy parameterized by (c1, nu).
    Builtin,
    /// Oldroyd-B closure (wave speeds fixed at 1); only `nu` is read.
    OldroydB,
}

/// Periodic box discretization: `n` points per axis on [-l, l)³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Points per axis (power of two, ≥ 8). Default 64.
    pub n: usize,
    /// Box half-length. Default 2π.
    pub l: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 64, l: 2.0 * std::f64::consts::PI }
    }
}

/// Material parameters and closure choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    /// Pressure-wave speed (> 1; the shear speed is normalized to 1).
    /// Default 1.6. Ignored by the Oldroyd-B closure.
    pub c1: f64,
    /// Viscosity ν ≥ 0. Default 0.01.
    pub nu: f64,
    /// Constitutive closure. Default "builtin".
    pub model: ModelChoice,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self { c1: 1.6, nu: 0.01, model: ModelChoice::Builtin }
    }
}

/// Time stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Step size override. Default: the CFL bound 0.5·spacing/c1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Horizon override. Default: the box cap 0.55·l/c1, the longest time the
    /// compactly supported data can run before touching the boundary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// 2/3-rule dealiasing of the quadratic terms. Default true.
    pub dealias: bool,
    /// Emit a diagnostics row / snapshot every this many steps. Default 8.
    pub output_every: usize,
    /// Drop the nonlinear terms (linearized evolution). Default false.
    pub linear: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { dt: None, t_end: None, dealias: true, output_every: 8, linear: false }
    }
}

/// Initial data generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Master seed; every random draw in a run derives from it. Default 1.
    pub seed: u64,
    /// Data amplitude in [0, 0.05]; 0 gives the zero state. Default 0.01.
    pub epsilon: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { seed: 1, epsilon: 0.01 }
    }
}

/// Diagnostics controls and pass/fail thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Cutoff steepness for the interior/wave-zone partition (> 4). Default 5.
    pub m: u32,
    /// Allowed growth exponent δ ∈ [0, 1) in E(t) ≤ C′E(0)⟨t⟩^δ. Default 0.5.
    pub delta: f64,
    /// Largest admissible C′ in the two-sided energy estimate. Default 4.
    pub c_threshold: f64,
    /// Max |div v̇| allowed over the run. Default 1e-10.
    pub div_threshold: f64,
    /// Max determinant-constraint residual allowed. Default 1e-6.
    pub det_threshold: f64,
    /// Max curl-constraint residual allowed. Default 1e-6.
    pub curl_threshold: f64,
    /// Also run the null-condition check and include it in the summary.
    /// Default false.
    pub nullcheck: bool,
    /// Sample count for the null-condition check. Default 1000.
    pub null_samples: usize,
    /// Residual threshold for the null-condition check. Default 1e-6.
    pub null_threshold: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            m: 5,
            delta: 0.5,
            c_threshold: 4.0,
            div_threshold: 1e-10,
            det_threshold: 1e-6,
            curl_threshold: 1e-6,
            nullcheck: false,
            null_samples: 1000,
            null_threshold: 1e-6,
        }
    }
}

/// Where artifacts are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory (created if absent). Default "out".
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Full run configuration. All sections optional in the file; defaults apply.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub material: MaterialSection,
    pub solver: SolverSection,
    pub data: DataSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.l)
    }

    pub fn model(&self) -> Result<MaterialModel> {
        match self.material.model {
            ModelChoice::Builtin => {
                MaterialModel::builtin(MaterialParams::new(self.material.c1, self.material.nu)?)
            }
            ModelChoice::OldroydB => MaterialModel::oldroyd_b(self.material.nu),
        }
    }

    pub fn cutoff_params(&self) -> Result<CutoffParams> {
        CutoffParams::new(self.diagnostics.m)
    }

    /// Assemble and validate the solver configuration on the given grid,
    /// applying the optional dt / horizon overrides.
    pub fn solver_config(&self, grid: &Grid) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.model()?, grid);
        if let Some(dt) = self.solver.dt {
            cfg.dt = dt;
        }
        if let Some(t_end) = self.solver.t_end {
            cfg.t_end = t_end;
        }
        cfg.dealias = self.solver.dealias;
        cfg.output_every = self.solver.output_every;
        cfg.seed = self.data.seed;
        cfg.epsilon = self.data.epsilon;
        cfg.linear = self.solver.linear;
        cfg.validate(grid)?;
        Ok(cfg)
    }

    /// Full validation: grid, material, solver bounds, diagnostics thresholds.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.solver_config(&grid)?;
        self.cutoff_params()?;
        let d = &self.diagnostics;
        if !(0.0..1.0).contains(&d.delta) {
            return Err(Error::Config(format!("delta must lie in [0, 1), got {}", d.delta)));
        }
        if !(d.c_threshold > 0.0) {
            return Err(Error::Config(format!(
                "c_threshold must be positive, got {}",
                d.c_threshold
            )));
        }
        for (name, v) in [
            ("div_threshold", d.div_threshold),
            ("det_threshold", d.det_threshold),
            ("curl_threshold", d.curl_threshold),
            ("null_threshold", d.null_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if d.null_samples == 0 {
            return Err(Error::Config("null_samples must be at least 1".into()));
        }
        Ok(())
    }
}
