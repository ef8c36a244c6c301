//! Experiment configuration: one JSON file, unknown keys rejected.
//!
//! Every block has defaults; the resolved form (defaults filled in, `--tol`
//! applied) is what gets echoed into output files.

use std::fmt;
use std::path::Path;

use liouville::algebra::{CoefficientMatrix, SingularityProfile};
use liouville::blowup::{CoefficientField, NlTerm, Regime};
use liouville::green::{Point, DEFAULT_MODES};
use liouville::radial::{ProblemSpec, DEFAULT_R_MAX, DEFAULT_TOL};
use serde::{Deserialize, Serialize};

/// A configuration problem; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field_error(field: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError(format!("config field `{field}`: {reason}"))
}

fn core_error(field: &str, e: liouville::Error) -> ConfigError {
    match e {
        liouville::Error::InvalidInput { reason, .. } => field_error(field, reason),
        e => field_error(field, e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_matrix")]
    pub matrix: Vec<Vec<f64>>,
    /// Strength of the singularity at the origin, in `(-1, 0]`.
    #[serde(default)]
    pub gamma: f64,
    /// Full `U(0)`; exclusive with `reduced_alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<Vec<f64>>,
    /// `(α_2, …, α_n)` with `α_1 = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_alpha: Option<Vec<f64>>,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invert: Option<InvertBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenBlock>,
}

fn default_matrix() -> Vec<Vec<f64>> {
    vec![vec![1.0]]
}

fn default_r_max() -> f64 {
    DEFAULT_R_MAX
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertBlock {
    /// `(σ_2, …, σ_n)`; empty for a single component.
    pub target_sigma: Vec<f64>,
    /// Starting `(α_2, …, α_n)`; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guess: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceBlock {
    #[serde(default = "one")]
    pub n_l: f64,
    /// Defaults to `Q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    /// `γ` of the singular points entering the critical set.
    #[serde(default)]
    pub strengths: Vec<f64>,
    #[serde(default = "two")]
    pub m_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

/// `ρ = t·Q` for `steps` equally spaced `t`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        if self.steps < 2 || !(self.from.is_finite() && self.to.is_finite()) {
            return Err(field_error(
                "surface.sweep",
                "needs finite endpoints and at least 2 steps",
            ));
        }
        let h = (self.to - self.from) / (self.steps - 1) as f64;
        Ok((0..self.steps).map(|k| self.from + h * k as f64).collect())
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    /// Strength of the `p` bubble; the top-level `gamma` gives `μ_q`.
    pub mu_p: f64,
    pub m_p: f64,
    pub m_q: f64,
    /// `(α_2, …)` of the `p` bubble; defaults to the top-level values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_alpha_p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            lx: 1.0,
            modes: DEFAULT_MODES,
        }
    }
}

fn default_modes() -> usize {
    DEFAULT_MODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupBlock {
    #[serde(default)]
    pub geometry: Geometry,
    pub points: Vec<Point>,
    /// One `γ` per point; all regular when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Defaults to `Q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    /// One preset per component; constant 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<CoefficientField>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<Vec<f64>>,
    /// `D_i`; with `alpha`, or both taken from solving the top-level problem.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub nl_term: NlTerm,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
}

fn default_regime() -> Regime {
    Regime::General
}

fn default_eps() -> f64 {
    1e-3
}

fn default_delta0() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenBlock {
    #[serde(default)]
    pub geometry: Geometry,
    pub points: Vec<Point>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn matrix(&self) -> Result<CoefficientMatrix, ConfigError> {
        CoefficientMatrix::from_rows(&self.matrix).map_err(|e| core_error("matrix", e))
    }

    pub fn singularity(&self) -> Result<SingularityProfile, ConfigError> {
        singularity("gamma", self.gamma)
    }

    /// `U(0)` from `alpha0`, `reduced_alpha`, or zeros.
    pub fn initial_values(&self, n: usize) -> Result<Vec<f64>, ConfigError> {
        match (&self.alpha0, &self.reduced_alpha) {
            (Some(_), Some(_)) => Err(field_error(
                "alpha0",
                "give either alpha0 or reduced_alpha, not both",
            )),
            (Some(a), None) => Ok(a.clone()),
            (None, Some(r)) => Ok(std::iter::once(0.0).chain(r.iter().copied()).collect()),
            (None, None) => Ok(vec![0.0; n]),
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        let a = self.matrix()?;
        let alpha0 = self.initial_values(a.n())?;
        ProblemSpec::new(a, self.singularity()?, alpha0).map_err(|e| core_error("alpha0", e))
    }

    /// Structural checks shared by every command.
    pub fn check(&self) -> Result<(), ConfigError> {
        if !(self.r_max >= 10.0 && self.r_max.is_finite()) {
            return Err(field_error("r_max", format!("{} must be >= 10", self.r_max)));
        }
        if !(1e-13..=1e-4).contains(&self.tol) {
            return Err(field_error(
                "tol",
                format!("{:e} outside the supported range [1e-13, 1e-4]", self.tol),
            ));
        }
        self.problem().map(|_| ())
    }
}

pub fn singularity(field: &str, gamma: f64) -> Result<SingularityProfile, ConfigError> {
    SingularityProfile::new(gamma).map_err(|_| {
        field_error(field, format!("{gamma} is outside the valid range (-1, 0]"))
    })
}

pub fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    block
        .as_ref()
        .ok_or_else(|| ConfigError(format!("config has no `{name}` block")))
}

pub fn check_len(field: &str, got: usize, want: usize) -> Result<(), ConfigError> {
    if got != want {
        return Err(field_error(field, format!("length {got}, expected {want}")));
    }
    Ok(())
}
