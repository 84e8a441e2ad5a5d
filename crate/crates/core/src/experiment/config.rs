//! Strict TOML schema for experiment runs.
//!
//! ```toml
//! seed = 7
//! half_widths = [200, 400]
//!
//! [kernel]
//! family = "power_law"
//! exponent = 4.0
//!
//! [potential.perturbation]
//! kind = "uniform_random"
//! amplitude = 0.5
//!
//! [ule]
//! alphas = [3.0]
//!
//! [dynamics]
//! sources = [0]
//! moments = [2.5]
//! ```
//!
//! Absent analysis tables are disabled. Every default that applies is written
//! back into the manifest through [`ExperimentConfig::resolved`].

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::TimeGrid;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{build_kernel, HoppingKernel, KernelParams};
use crate::operator::{OnSiteField, Perturbation, PotentialSpec, DEFAULT_MAX_DIMENSION};
use crate::spectral::{SpectralOptions, DEFAULT_DEGENERACY_GAP, DEFAULT_EIG_TOLERANCE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the CLI's `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub half_widths: Vec<usize>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ule: Option<UleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    NearestNeighbor,
    PowerLaw {
        exponent: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<u64>,
    },
    /// `positive = [[re, im], ...]` for `a(1), a(2), ...`
    FiniteSupport { positive: Vec<[f64; 2]> },
    /// `entries = [[m, re, im], ...]`
    Custom { entries: Vec<(i64, f64, f64)> },
}

impl KernelConfig {
    pub fn params(&self) -> KernelParams {
        match self {
            KernelConfig::NearestNeighbor => KernelParams::NearestNeighbor,
            KernelConfig::PowerLaw { exponent, cutoff } => KernelParams::PowerLaw {
                exponent: *exponent,
                cutoff: *cutoff,
            },
            KernelConfig::FiniteSupport { positive } => KernelParams::FiniteSupport {
                positive: positive.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            },
            KernelConfig::Custom { entries } => KernelParams::Custom {
                entries: entries.iter().map(|&(m, re, im)| (m, Complex64::new(re, im))).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default = "unit_field")]
    pub field: FieldConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            field: unit_field(),
            perturbation: PerturbationConfig::None,
        }
    }
}

fn unit_field() -> FieldConfig {
    FieldConfig::Linear { slope: 1.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Linear {
        #[serde(default = "one")]
        slope: f64,
    },
    Maryland { coupling: f64, frequency: f64, phase: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationConfig {
    #[default]
    None,
    Constant { value: f64 },
    /// `seed` falls back to the top-level seed.
    UniformRandom {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Periodic { values: Vec<f64> },
    Explicit { first_site: i64, values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_eig")]
    pub eigen: f64,
    #[serde(default = "default_gap")]
    pub degeneracy_gap: f64,
    /// Interior window `W`; unset means the size-dependent default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default = "default_max_dim")]
    pub max_dimension: usize,
    /// Domination and unitarity checks on moment series.
    #[serde(default = "default_dyn_tol")]
    pub dynamics: f64,
}

fn default_eig() -> f64 {
    DEFAULT_EIG_TOLERANCE
}
fn default_gap() -> f64 {
    DEFAULT_DEGENERACY_GAP
}
fn default_max_dim() -> usize {
    DEFAULT_MAX_DIMENSION
}
fn default_dyn_tol() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen: default_eig(),
            degeneracy_gap: default_gap(),
            window: None,
            max_dimension: default_max_dim(),
            dynamics: default_dyn_tol(),
        }
    }
}

fn enabled() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsConfig {
    #[serde(default = "enabled")]
    pub enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UleConfig {
    #[serde(default = "enabled")]
    pub enabled: bool,
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "enabled")]
    pub enabled: bool,
    /// Defaults to `||a||_0 + 2 ||b||_inf + 1` per box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "enabled")]
    pub enabled: bool,
    #[serde(default = "default_sources")]
    pub sources: Vec<i64>,
    pub moments: Vec<f64>,
    #[serde(default)]
    pub time_grid: TimeGrid,
}

fn default_sources() -> Vec<i64> {
    vec![0, -5, 5, -20, 20]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("<document>@{}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".into());
            Error::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn asymptotics_enabled(&self) -> bool {
        self.asymptotics.as_ref().is_some_and(|a| a.enabled)
    }

    pub fn ule_alphas(&self) -> Option<&[f64]> {
        self.ule.as_ref().filter(|u| u.enabled).map(|u| u.alphas.as_slice())
    }

    pub fn bootstrap_enabled(&self) -> bool {
        self.bootstrap.as_ref().is_some_and(|b| b.enabled)
    }

    pub fn dynamics_enabled(&self) -> Option<&DynamicsConfig> {
        self.dynamics.as_ref().filter(|d| d.enabled)
    }

    pub fn build_kernel(&self) -> Result<HoppingKernel> {
        build_kernel(self.kernel.params())
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        let field = match self.potential.field {
            FieldConfig::Linear { slope } => OnSiteField::Linear { slope },
            FieldConfig::Maryland { coupling, frequency, phase } => OnSiteField::Maryland { coupling, frequency, phase },
        };
        let perturbation = match &self.potential.perturbation {
            PerturbationConfig::None => Perturbation::None,
            PerturbationConfig::Constant { value } => Perturbation::Constant { value: *value },
            PerturbationConfig::UniformRandom { amplitude, seed } => Perturbation::UniformRandom {
                amplitude: *amplitude,
                seed: seed.unwrap_or(self.seed),
            },
            PerturbationConfig::Periodic { values } => Perturbation::Periodic { values: values.clone() },
            PerturbationConfig::Explicit { first_site, values } => Perturbation::Explicit {
                first_site: *first_site,
                values: values.clone(),
            },
        };
        PotentialSpec { field, perturbation }
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions {
            window: self.tolerances.window,
            eig_tolerance: self.tolerances.eigen,
            degeneracy_gap: self.tolerances.degeneracy_gap,
        }
    }

    /// Every problem found, as `(field path, message)`.
    pub fn issues(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut issue = |path: &str, msg: String| out.push((path.to_string(), msg));

        if self.half_widths.is_empty() {
            issue("half_widths", "at least one half-width is required".into());
        }
        if self.half_widths.contains(&0) {
            issue("half_widths", "half-widths must be positive".into());
        }
        if self.half_widths.windows(2).any(|w| w[0] >= w[1]) {
            issue("half_widths", "half-widths must be strictly ascending".into());
        }
        if let Some(&n) = self.half_widths.iter().max() {
            let d = 2 * n + 1;
            if d > self.tolerances.max_dimension {
                issue(
                    "half_widths",
                    format!("dimension {d} exceeds tolerances.max_dimension = {}", self.tolerances.max_dimension),
                );
            }
        }
        if let Err(e) = self.build_kernel() {
            issue("kernel", e.to_string());
        }
        if let Err(e) = self.potential_spec().validate() {
            issue("potential", e.to_string());
        }

        let t = &self.tolerances;
        if !(t.eigen > 0.0 && t.eigen.is_finite()) {
            issue("tolerances.eigen", format!("must be positive, got {}", t.eigen));
        }
        if !(t.degeneracy_gap >= 0.0 && t.degeneracy_gap.is_finite()) {
            issue("tolerances.degeneracy_gap", format!("must be nonnegative, got {}", t.degeneracy_gap));
        }
        if !(t.dynamics > 0.0 && t.dynamics.is_finite()) {
            issue("tolerances.dynamics", format!("must be positive, got {}", t.dynamics));
        }

        if let Some(u) = &self.ule {
            if u.alphas.is_empty() {
                issue("ule.alphas", "at least one exponent is required".into());
            }
            if let Some(a) = u.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                issue("ule.alphas", format!("exponents must be positive, got {a}"));
            }
        }
        if let Some(g) = self.bootstrap.as_ref().and_then(|b| b.gamma) {
            if !(g >= 0.0 && g.is_finite()) {
                issue("bootstrap.gamma", format!("must be nonnegative, got {g}"));
            }
        }
        if let Some(d) = &self.dynamics {
            if d.sources.is_empty() {
                issue("dynamics.sources", "at least one source site is required".into());
            }
            if d.moments.is_empty() {
                issue("dynamics.moments", "at least one moment order is required".into());
            }
            if let Some(q) = d.moments.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
                issue("dynamics.moments", format!("moment orders must be positive, got {q}"));
            }
            if let Err(e) = d.time_grid.validate() {
                issue("dynamics.time_grid", e.to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        match issues.first() {
            None => Ok(()),
            Some((path, _)) => Err(Error::config(
                path.clone(),
                issues.iter().map(|(p, m)| format!("{p}: {m}")).collect::<Vec<_>>().join("; "),
            )),
        }
    }

    /// The config with every default made explicit and the output directory
    /// dropped, as echoed into the manifest and hashed.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.output = None;
        if let PerturbationConfig::UniformRandom { seed, .. } = &mut cfg.potential.perturbation {
            seed.get_or_insert(self.seed);
        }
        cfg
    }

    /// SHA-256 of the resolved config's JSON form, lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.resolved()).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
