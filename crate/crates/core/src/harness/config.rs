use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::ensembles::{Bath, EnsembleSpec, SymmetryClass};
use crate::numerics::Tolerance;
use crate::spectral::{Method, Spacing, TimeGrid, DEFAULT_CHUNK};
use crate::theory::{Formula, P_FULL_TOLERANCE};

/// Ensemble parameters as written in a config file. Exactly one of `g` and
/// `gamma` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub class: SymmetryClass,
    pub n: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub epsilon0: f64,
    #[serde(default)]
    pub bath: Bath,
}

fn one() -> f64 {
    1.0
}

impl SpecConfig {
    pub fn resolve(&self) -> Result<EnsembleSpec, HarnessError> {
        let spec = match (self.g, self.gamma) {
            (Some(g), None) => EnsembleSpec::new(self.class, self.n, self.lambda, g),
            (None, Some(gamma)) => EnsembleSpec::from_gamma(self.class, self.n, self.lambda, gamma),
            _ => return Err(HarnessError::config("spec: give exactly one of `g` and `gamma`")),
        }
        .map_err(|e| HarnessError::config(format!("spec: {e}")))?;
        spec.with_bath(self.bath)
            .with_epsilon0(self.epsilon0)
            .validate()
            .map_err(|e| HarnessError::config(format!("spec: {e}")))?;
        Ok(spec.with_bath(self.bath).with_epsilon0(self.epsilon0))
    }

    /// Same ensemble at coupling `gamma`.
    pub fn with_gamma(&self, gamma: f64) -> SpecConfig {
        SpecConfig {
            g: None,
            gamma: Some(gamma),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            min: 1e-3,
            max: 10.0,
            points: 200,
            spacing: Spacing::Geometric,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<TimeGrid, HarnessError> {
        TimeGrid::new(self.min, self.max, self.points, self.spacing)
            .map_err(|e| HarnessError::config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    #[serde(default)]
    pub formulas: Vec<Formula>,
    #[serde(default = "default_rel")]
    pub rel_tol: f64,
    #[serde(default = "default_abs")]
    pub abs_tol: f64,
}

fn default_rel() -> f64 {
    P_FULL_TOLERANCE.rel
}

fn default_abs() -> f64 {
    P_FULL_TOLERANCE.abs
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            formulas: Vec::new(),
            rel_tol: default_rel(),
            abs_tol: default_abs(),
        }
    }
}

impl TheoryConfig {
    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.rel_tol, self.abs_tol)
    }
}

/// Thresholds applied by the comparison step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Points with `|z|` above this count as outliers.
    #[serde(default = "default_z")]
    pub z_threshold: f64,
    /// Largest tolerated fraction of outliers.
    #[serde(default = "default_outliers")]
    pub max_outlier_fraction: f64,
    #[serde(default)]
    pub tau_min: Option<f64>,
    #[serde(default)]
    pub tau_max: Option<f64>,
    /// τ intervals left out of the comparison.
    #[serde(default)]
    pub exclude: Vec<[f64; 2]>,
    /// Interpolate the theory curve onto the Monte Carlo grid when they
    /// differ.
    #[serde(default)]
    pub interpolate: bool,
    /// Expected plateau/offset ratio and its tolerance.
    #[serde(default)]
    pub ratio_target: Option<f64>,
    #[serde(default)]
    pub ratio_tolerance: Option<f64>,
}

fn default_z() -> f64 {
    3.0
}

fn default_outliers() -> f64 {
    0.02
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            z_threshold: default_z(),
            max_outlier_fraction: default_outliers(),
            tau_min: None,
            tau_max: None,
            exclude: Vec::new(),
            interpolate: false,
            ratio_target: None,
            ratio_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub points: usize,
    /// Also run the decoupled point `γ = 0`.
    #[serde(default)]
    pub include_zero: bool,
    #[serde(default)]
    pub late_time: LateTime,
    /// τ points whose per-realization mean gives the late-time value when
    /// `late_time = "window"`.
    #[serde(default = "default_window")]
    pub window: GridConfig,
}

/// How a sweep measures the late-time population.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LateTime {
    /// Mean of `P` over the sweep window.
    #[default]
    Window,
    /// The exact infinite-time average `Σ|c_α|⁴` of each realization.
    Infinite,
}

fn default_window() -> GridConfig {
    GridConfig {
        min: 2.0,
        max: 5.0,
        points: 16,
        spacing: Spacing::Linear,
    }
}

impl SweepConfig {
    pub fn gammas(&self) -> Result<Vec<f64>, HarnessError> {
        let grid = TimeGrid::new(self.gamma_min, self.gamma_max, self.points, Spacing::Geometric)
            .map_err(|e| HarnessError::config(format!("sweep: {e}")))?;
        let mut g = Vec::with_capacity(self.points + 1);
        if self.include_zero {
            g.push(0.0);
        }
        g.extend_from_slice(grid.taus());
        Ok(g)
    }
}

/// A complete experiment description, loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub spec: SpecConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
    #[serde(default)]
    pub theory: TheoryConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_chunk() -> usize {
    DEFAULT_CHUNK
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(HarnessError::config(format!(
                "name {:?}: use letters, digits, '-' or '_'",
                self.name
            )));
        }
        self.spec.resolve()?;
        self.grid.build()?;
        if self.n_samples < 2 {
            return Err(HarnessError::config("n_samples must be at least 2"));
        }
        if self.chunk_size == 0 {
            return Err(HarnessError::config("chunk_size must be positive"));
        }
        if !(self.theory.rel_tol > 0.0) || !(self.theory.abs_tol >= 0.0) {
            return Err(HarnessError::config("theory tolerances must be positive"));
        }
        if let Some(sweep) = &self.sweep {
            sweep.gammas()?;
            sweep.window.build()?;
        }
        Ok(())
    }

    pub fn ensemble(&self) -> Result<EnsembleSpec, HarnessError> {
        self.spec.resolve()
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }
}

/// Named, ready-to-run configurations.
pub fn presets() -> Vec<ExperimentConfig> {
    let desk = |name: &str, class: SymmetryClass, gamma: f64| ExperimentConfig {
        name: name.to_string(),
        spec: SpecConfig {
            class,
            n: 399,
            lambda: 1.0,
            g: None,
            gamma: Some(gamma),
            epsilon0: 0.0,
            bath: Bath::Rmt,
        },
        grid: GridConfig::default(),
        n_samples: 2000,
        seed: 20240601,
        method: Method::Eigenbasis,
        chunk_size: DEFAULT_CHUNK,
        theory: TheoryConfig::default(),
        compare: CompareConfig::default(),
        sweep: None,
        output_dir: None,
    };
    let full = |mut c: ExperimentConfig| {
        c.name.push_str("-full");
        c.spec.n = 999;
        c.n_samples = 10_000;
        c
    };
    let full_formulas = vec![Formula::Full, Formula::LargeGamma];

    let mut smoke = desk("smoke", SymmetryClass::Unitary, 10.0);
    smoke.spec.n = 63;
    smoke.n_samples = 50;
    smoke.grid.points = 60;
    smoke.theory.formulas = vec![Formula::LargeGamma];
    smoke.sweep = Some(SweepConfig {
        gamma_min: 0.1,
        gamma_max: 10.0,
        points: 3,
        include_zero: true,
        late_time: LateTime::Window,
        window: default_window(),
    });

    let mut out = vec![smoke];
    for (name, gamma) in [("fig2a", 46.0), ("fig2b", 0.46), ("fig2c", 0.022)] {
        let mut c = desk(name, SymmetryClass::Unitary, gamma);
        c.theory.formulas = full_formulas.clone();
        if gamma > 1.0 {
            c.compare.ratio_target = Some(2.0);
            c.compare.ratio_tolerance = Some(0.2);
        }
        out.push(c.clone());
        out.push(full(c));
    }

    let mut d = desk("fig2d", SymmetryClass::Unitary, 1.0);
    d.sweep = Some(SweepConfig {
        gamma_min: 0.02,
        gamma_max: 50.0,
        points: 12,
        include_zero: false,
        late_time: LateTime::Infinite,
        window: default_window(),
    });
    out.push(d.clone());
    let mut dp = full(d);
    if let Some(s) = dp.sweep.as_mut() {
        s.points = 20;
    }
    out.push(dp);

    for (name, class, ratio, tol) in [
        ("fig2e-u", SymmetryClass::Unitary, 2.0, 0.2),
        ("fig2e-o", SymmetryClass::Orthogonal, 1.5, 0.15),
        ("fig2e-s", SymmetryClass::Symplectic, 3.0, 0.4),
    ] {
        let mut c = desk(name, class, 46.0);
        c.theory.formulas = vec![Formula::Profile];
        c.compare.tau_min = Some(0.2);
        c.compare.tau_max = Some(5.0);
        c.compare.max_outlier_fraction = 0.05;
        if class == SymmetryClass::Symplectic {
            c.compare.exclude = vec![[0.9, 1.1]];
        }
        c.compare.ratio_target = Some(ratio);
        c.compare.ratio_tolerance = Some(tol);
        out.push(c);
    }

    let mut p = desk("poisson", SymmetryClass::Unitary, 46.0);
    p.spec.bath = Bath::Poisson;
    p.theory.formulas = vec![Formula::LargeGamma];
    p.compare.ratio_target = Some(2.0);
    p.compare.ratio_tolerance = Some(0.3);
    out.push(p);
    out
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    presets().into_iter().find(|c| c.name == name)
}
