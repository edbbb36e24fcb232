//! Point-by-point comparison of a Monte Carlo curve with a prediction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::CompareConfig;
use super::io::{self, Table};
use super::HarnessError;
use crate::spectral::estimators::{offset_estimate, plateau_window_mean};
use crate::spectral::{Estimate, SurvivalCurve};
use crate::theory::TheoryCurve;

/// A curve on a τ grid with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub taus: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl From<&SurvivalCurve> for Series {
    fn from(c: &SurvivalCurve) -> Self {
        Series {
            taus: c.taus.clone(),
            mean: c.mean.clone(),
            stderr: c.stderr.clone(),
        }
    }
}

impl From<&TheoryCurve> for Series {
    fn from(c: &TheoryCurve) -> Self {
        Series {
            taus: c.taus.clone(),
            mean: c.values.clone(),
            stderr: vec![0.0; c.taus.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparePoint {
    pub tau: f64,
    pub theory: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub z: f64,
    pub outlier: bool,
}

/// Offset (smoothed minimum), plateau over `τ ∈ [2, 5]`, their ratio, and
/// the late-time value, which uses the same window as the plateau.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DerivedObservables {
    pub p_off: Option<Estimate>,
    pub tau_off: Option<f64>,
    pub p_pl: Option<Estimate>,
    pub ratio: Option<Estimate>,
    pub p_res: Option<Estimate>,
}

impl DerivedObservables {
    pub fn of(s: &Series) -> Self {
        let off = offset_estimate(&s.taus, &s.mean, &s.stderr);
        let pl = plateau_window_mean(&s.taus, &s.mean, &s.stderr);
        DerivedObservables {
            p_off: off.map(|o| o.0),
            tau_off: off.map(|o| o.1),
            p_pl: pl,
            ratio: pl.zip(off).map(|(p, o)| p.ratio(o.0)),
            p_res: pl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub formula: Option<String>,
    pub points: Vec<ComparePoint>,
    pub compared: usize,
    pub outliers: usize,
    pub outlier_fraction: f64,
    pub max_abs_z: f64,
    pub z_threshold: f64,
    pub max_outlier_fraction: f64,
    pub mc: DerivedObservables,
    pub theory: DerivedObservables,
    pub ratio_target: Option<f64>,
    pub ratio_tolerance: Option<f64>,
    pub ratio_pass: Option<bool>,
    pub outliers_pass: bool,
    pub passed: bool,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()))
}

/// Linear interpolation in `ln τ` (in τ if the grid touches zero); NaN
/// outside the grid.
fn interpolate(taus: &[f64], values: &[f64], at: f64) -> f64 {
    let n = taus.len();
    if n == 0 || at < taus[0] || at > taus[n - 1] {
        return f64::NAN;
    }
    let i = taus.partition_point(|&t| t <= at);
    if i == 0 {
        return values[0];
    }
    if i == n {
        return values[n - 1];
    }
    let (t0, t1) = (taus[i - 1], taus[i]);
    let w = if t0 > 0.0 {
        (at / t0).ln() / (t1 / t0).ln()
    } else {
        (at - t0) / (t1 - t0)
    };
    values[i - 1] + w * (values[i] - values[i - 1])
}

fn z_score(diff: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        diff / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Compares `mc` with `theory` on the points selected by `cfg`. Grids must
/// agree unless `cfg.interpolate` is set, in which case the prediction is
/// interpolated onto the Monte Carlo grid. Points where the prediction is
/// not finite are skipped.
pub fn compare_curves(mc: &Series, theory: &Series, cfg: &CompareConfig) -> Result<ComparisonReport, HarnessError> {
    let aligned: Vec<f64> = if same_grid(&mc.taus, &theory.taus) {
        theory.mean.clone()
    } else if cfg.interpolate {
        mc.taus.iter().map(|&t| interpolate(&theory.taus, &theory.mean, t)).collect()
    } else {
        return Err(HarnessError::GridMismatch(format!(
            "Monte Carlo grid has {} points, prediction {}; enable interpolation",
            mc.taus.len(),
            theory.taus.len()
        )));
    };
    let keep = |tau: f64| {
        cfg.tau_min.is_none_or(|lo| tau >= lo)
            && cfg.tau_max.is_none_or(|hi| tau <= hi)
            && !cfg.exclude.iter().any(|[lo, hi]| tau >= *lo && tau <= *hi)
    };
    let points: Vec<ComparePoint> = (0..mc.taus.len())
        .filter(|&i| keep(mc.taus[i]) && aligned[i].is_finite())
        .map(|i| {
            let z = z_score(mc.mean[i] - aligned[i], mc.stderr[i]);
            ComparePoint {
                tau: mc.taus[i],
                theory: aligned[i],
                mc_mean: mc.mean[i],
                mc_stderr: mc.stderr[i],
                z,
                outlier: z.abs() > cfg.z_threshold,
            }
        })
        .collect();
    let compared = points.len();
    let outliers = points.iter().filter(|p| p.outlier).count();
    let outlier_fraction = if compared == 0 { 0.0 } else { outliers as f64 / compared as f64 };
    let max_abs_z = points.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    let mc_obs = DerivedObservables::of(mc);
    let ratio_pass = match (cfg.ratio_target, cfg.ratio_tolerance, mc_obs.ratio) {
        (Some(target), Some(tol), Some(r)) => Some((r.value - target).abs() <= tol),
        (Some(_), Some(_), None) => Some(false),
        _ => None,
    };
    let outliers_pass = compared > 0 && outlier_fraction <= cfg.max_outlier_fraction;
    Ok(ComparisonReport {
        config_hash: None,
        seed: None,
        formula: None,
        points,
        compared,
        outliers,
        outlier_fraction,
        max_abs_z,
        z_threshold: cfg.z_threshold,
        max_outlier_fraction: cfg.max_outlier_fraction,
        mc: mc_obs,
        theory: DerivedObservables::of(theory),
        ratio_target: cfg.ratio_target,
        ratio_tolerance: cfg.ratio_tolerance,
        ratio_pass,
        outliers_pass,
        passed: outliers_pass && ratio_pass != Some(false),
    })
}

/// Reads a survival CSV and a theory CSV and compares them.
pub fn run_compare(mc_path: &Path, theory_path: &Path, cfg: &CompareConfig) -> Result<ComparisonReport, HarnessError> {
    let mc = io::read_survival(mc_path)?;
    let theory = io::read_theory(theory_path)?;
    let meta = Table::read(mc_path)?.meta;
    let mut report = compare_curves(&Series::from(&mc), &Series::from(&theory), cfg)?;
    report.config_hash = meta.get("config_hash").cloned();
    report.seed = Some(mc.master_seed);
    report.formula = Some(theory.formula.tag().to_string());
    Ok(report)
}
