//! Scenario files: a versioned TOML (or equivalent JSON) description of the
//! base grid, the family, the task and the numerical parameters.

use std::path::{Path, PathBuf};

use maslov_eta::eta_engine::{Route, TQuadrature, DEFAULT_K, DEFAULT_N_X};
use maslov_eta::families::AxisMap;
use maslov_eta::forms_grid::GridKind;
use maslov_eta::interval_dirac::EtaMode;
use maslov_eta::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Current scenario schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// A complete scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Must equal [`SCHEMA_VERSION`].
    pub schema_version: u32,
    /// Free-form name echoed in the report.
    pub name: String,
    /// Base grid.
    pub base: BaseSpec,
    /// Family of Lagrangian triples.
    pub family: FamilySpec,
    /// What to compute.
    pub task: Task,
    /// Numerical parameters.
    #[serde(default)]
    pub params: Params,
    /// Sweep definition (required by the `convergence` task).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// Base grid specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    /// Grid shape.
    pub kind: GridKind,
    /// Nodes per axis (empty for a point).
    #[serde(default)]
    pub sizes: Vec<usize>,
}

/// Family specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Scalar triple `(P(u₀), P(u₁), P(u₂))` over a point; each `u` is
    /// `[re, im]`.
    ScalarTriple {
        /// The three unimodular numbers.
        u: [Complex64; 3],
    },
    /// `count` scalar triples with phases drawn from the scenario seed.
    RandomScalarTriples {
        /// Number of triples.
        count: usize,
        /// Minimum angular separation of the three phases.
        #[serde(default = "default_separation")]
        min_separation: f64,
    },
    /// Diagonal winding family over a circle or torus:
    /// `p_i(b) = diag_j exp(i(phases[i][j] + windings[j]·b))`.
    WindingCircle {
        /// Base phases, one list of `d` numbers per projection.
        phases: [Vec<f64>; 3],
        /// Winding numbers per branch and base axis.
        windings: Vec<Vec<i32>>,
    },
    /// Bott triple `(Ps, P(2q − 1), P(1 − 2q))`, `q = ½(1 + n·σ)`.
    BottSphere {
        /// Axis map `n`.
        #[serde(default)]
        axis: AxisMap,
    },
    /// Node-wise unitary blocks read from a JSON file.
    Explicit {
        /// Path, relative to the scenario file.
        path: PathBuf,
    },
}

fn default_separation() -> f64 {
    0.1
}

/// Task to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Maslov index of the family.
    Maslov,
    /// Eta-forms of the three cyclic pairs.
    Eta,
    /// `ch τ = Σ η` in degrees 0 and 2.
    VerifyClm,
    /// `τ(P(u₀),P(u₁),P(u₂)) = Σ circle_eta(u_i* u_{i+1})`.
    VerifyGlue,
    /// Parameter sweep of a verification (see [`SweepSpec`]).
    Convergence,
}

/// Numerical parameters and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Mode cutoff.
    pub k_max: usize,
    /// Spatial intervals.
    pub n_x: usize,
    /// Boundary path route.
    pub route: Route,
    /// `t`-quadrature of the Volterra term.
    pub t_quadrature: TQuadrature,
    /// Evaluation of the degree-0 eta-invariants.
    pub eta0: EtaMode,
    /// Seed for randomized families.
    pub seed: u64,
    /// Absolute tolerance of degree-0 identities.
    pub tol_deg0: f64,
    /// Relative tolerance of the integrated degree-2 identity.
    pub tol_deg2_rel: f64,
    /// Absolute tolerance of the gluing identity.
    pub tol_glue: f64,
    /// Optional bound on the outermost-shell share of the degree-2 part.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            k_max: DEFAULT_K,
            n_x: DEFAULT_N_X,
            route: Route::default(),
            t_quadrature: TQuadrature::ClosedForm,
            eta0: EtaMode::ClosedForm,
            seed: 0,
            tol_deg0: 1e-9,
            tol_deg2_rel: 0.05,
            tol_glue: 1e-9,
            tail_tol: None,
        }
    }
}

/// Sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Mode cutoff `K`.
    K,
    /// Spatial intervals `N_x`.
    NX,
    /// Base grid size (all axes set to the value).
    Grid,
    /// Transition width `ε` of the localized route.
    Eps,
}

/// Sweep definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Axis.
    pub axis: SweepAxis,
    /// Parameter values in sweep order.
    pub values: Vec<f64>,
}

impl Scenario {
    /// Parse TOML or JSON (chosen by extension, JSON for `.json`).
    pub fn from_file(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let s = if path.extension().and_then(|e| e.to_str()) == Some("json") { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((s, dir))
    }

    /// Parse TOML text.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        s.check_schema()?;
        Ok(s)
    }

    /// Parse JSON text.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        s.check_schema()?;
        Ok(s)
    }

    /// TOML rendering.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises to TOML")
    }

    fn check_schema(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        Ok(())
    }
}
