use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decompose::{decompose, decompose_eigenbasis, plateau_estimate, OverlapSet, Solver};
use super::SpectralError;
use crate::ensembles::{EnsembleSpec, Realization, SeedPath};

/// `P(t) = |Σ_α |c_α|² e^{−iε_α t}|²`; exactly 1 at `t = 0`.
pub fn survival_at(overlaps: &OverlapSet, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let (mut re, mut im) = (0.0, 0.0);
    for (&e, &w) in overlaps.energies.iter().zip(&overlaps.weights) {
        let (s, c) = (e * t).sin_cos();
        re += w * c;
        im += w * s;
    }
    re * re + im * im
}

pub fn survival(overlaps: &OverlapSet, times: &[f64]) -> Vec<f64> {
    times.iter().map(|&t| survival_at(overlaps, t)).collect()
}

/// Spacing of a [`TimeGrid`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Geometric,
    Linear,
}

/// Ascending grid of Heisenberg-scaled times `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    taus: Vec<f64>,
}

impl Default for TimeGrid {
    /// 200 geometric points on `[10⁻³, 10]`.
    fn default() -> Self {
        TimeGrid::new(1e-3, 10.0, 200, Spacing::Geometric).expect("valid default grid")
    }
}

impl TimeGrid {
    pub fn new(min: f64, max: f64, points: usize, spacing: Spacing) -> Result<Self, SpectralError> {
        let bad = |why: &str| Err(SpectralError::Grid(format!("{why} (min {min}, max {max}, points {points})")));
        if !(min.is_finite() && max.is_finite()) || min < 0.0 || max < min {
            return bad("need 0 <= min <= max, both finite");
        }
        if points == 0 {
            return bad("need at least one point");
        }
        if points == 1 {
            return Ok(TimeGrid { taus: vec![min] });
        }
        let taus = match spacing {
            Spacing::Geometric => {
                if min <= 0.0 {
                    return bad("geometric spacing needs min > 0");
                }
                let ratio = (max / min).ln() / (points - 1) as f64;
                (0..points)
                    .map(|k| if k + 1 == points { max } else { min * (ratio * k as f64).exp() })
                    .collect()
            }
            Spacing::Linear => {
                let step = (max - min) / (points - 1) as f64;
                (0..points)
                    .map(|k| if k + 1 == points { max } else { min + step * k as f64 })
                    .collect()
            }
        };
        Ok(TimeGrid { taus })
    }

    pub fn from_taus(taus: Vec<f64>) -> Result<Self, SpectralError> {
        if taus.is_empty() || taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(SpectralError::Grid("taus must be finite and non-negative".into()));
        }
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SpectralError::Grid("taus must be strictly increasing".into()));
        }
        Ok(TimeGrid { taus })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn times(&self, spec: &EnsembleSpec) -> Vec<f64> {
        self.taus.iter().map(|&tau| spec.time_from_tau(tau)).collect()
    }
}

/// Running mean and centred second moment of a vector observable
/// (Welford updates, Chan et al. merge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Moments {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.mean.len(), "observable length changed");
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        assert_eq!(self.len(), other.len(), "merging moments of different length");
        if other.count == 0 {
            return self.clone();
        }
        if self.count == 0 {
            return other.clone();
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let mut out = Moments::new(self.len());
        out.count = self.count + other.count;
        for k in 0..self.len() {
            let d = other.mean[k] - self.mean[k];
            out.mean[k] = self.mean[k] + d * (nb / n);
            out.m2[k] = self.m2[k] + other.m2[k] + d * d * (na * nb / n);
        }
        out
    }

    /// Unbiased sample variance (zero for fewer than two samples).
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|s| (s / d).max(0.0)).collect()
    }

    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.variance().iter().map(|v| (v / n).sqrt()).collect()
    }
}

/// Sampling route for ensemble averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Sample the full matrices and diagonalize them densely.
    Dense,
    /// Sample directly in the dot eigenbasis (see [`decompose_eigenbasis`]).
    #[default]
    Eigenbasis,
}

/// Default number of realizations per reduction chunk.
pub const DEFAULT_CHUNK: usize = 64;
/// Minimum fraction of realizations that must decompose successfully.
pub const MIN_SUCCESS_FRACTION: f64 = 0.9;

/// Accumulated statistics of one contiguous block of realization indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkResult {
    pub index: u64,
    pub moments: Moments,
    pub failures: u64,
}

pub fn chunk_count(n_samples: u64, chunk_size: usize) -> u64 {
    n_samples.div_ceil(chunk_size.max(1) as u64)
}

/// Overlaps for realization `seed` by the requested route.
pub fn sample_overlaps(spec: &EnsembleSpec, seed: SeedPath, method: Method) -> Result<OverlapSet, SpectralError> {
    match method {
        Method::Eigenbasis => decompose_eigenbasis(spec, seed),
        Method::Dense => {
            let r = Realization::sample(spec, seed)?;
            decompose(spec, &r, Solver::Dense)
        }
    }
}

/// Processes realizations `[chunk·size, min((chunk+1)·size, n))` in index
/// order. Failed realizations are logged and skipped.
pub fn run_chunk<F>(n_samples: u64, chunk_size: usize, chunk: u64, master: u64, dim: usize, observable: &F) -> ChunkResult
where
    F: Fn(SeedPath) -> Result<Vec<f64>, SpectralError> + ?Sized,
{
    let size = chunk_size.max(1) as u64;
    let start = chunk * size;
    let end = ((chunk + 1) * size).min(n_samples);
    let mut moments = Moments::new(dim);
    let mut failures = 0;
    for index in start..end {
        let seed = SeedPath::new(master, index);
        match observable(seed) {
            Ok(x) => moments.push(&x),
            Err(e) => {
                failures += 1;
                warn!("realization {index} (seed {master}) discarded: {e}");
            }
        }
    }
    ChunkResult {
        index: chunk,
        moments,
        failures,
    }
}

/// Pairwise tree reduction in chunk-index order. The result depends only on
/// the set of chunks, never on the order in which they were computed.
pub fn reduce_chunks(chunks: &[ChunkResult], dim: usize) -> (Moments, u64) {
    let mut sorted: Vec<&ChunkResult> = chunks.iter().collect();
    sorted.sort_by_key(|c| c.index);
    let failures = sorted.iter().map(|c| c.failures).sum();
    let mut level: Vec<Moments> = sorted.iter().map(|c| c.moments.clone()).collect();
    if level.is_empty() {
        return (Moments::new(dim), failures);
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| if p.len() == 2 { p[0].merge(&p[1]) } else { p[0].clone() })
            .collect();
    }
    (level.pop().expect("non-empty"), failures)
}

/// Checks the success fraction of a finished reduction.
pub fn check_success(n_samples: u64, failures: u64) -> Result<(), SpectralError> {
    let ok = n_samples - failures.min(n_samples);
    if (ok as f64) < MIN_SUCCESS_FRACTION * n_samples as f64 || ok < 2 {
        return Err(SpectralError::TooManyFailures {
            failed: failures,
            total: n_samples,
        });
    }
    Ok(())
}

/// Ensemble mean and variance of a per-realization vector observable, over
/// realization indices `0..n_samples` of `master`. Chunks run on the
/// current rayon pool; the reduction is independent of the worker count.
pub fn ensemble_moments<F>(n_samples: u64, master: u64, chunk_size: usize, dim: usize, observable: F) -> Result<(Moments, u64), SpectralError>
where
    F: Fn(SeedPath) -> Result<Vec<f64>, SpectralError> + Sync,
{
    if n_samples < 2 {
        return Err(SpectralError::Grid(format!("need at least 2 samples, got {n_samples}")));
    }
    let chunks: Vec<ChunkResult> = (0..chunk_count(n_samples, chunk_size))
        .into_par_iter()
        .map(|c| run_chunk(n_samples, chunk_size, c, master, dim, &observable))
        .collect();
    let (moments, failures) = reduce_chunks(&chunks, dim);
    check_success(n_samples, failures)?;
    Ok((moments, failures))
}

/// Ensemble-averaged survival probability on a τ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub taus: Vec<f64>,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: u64,
    pub failures: u64,
    pub spec: EnsembleSpec,
    pub master_seed: u64,
}

impl SurvivalCurve {
    pub fn from_moments(spec: &EnsembleSpec, grid: &TimeGrid, moments: &Moments, failures: u64, master_seed: u64) -> Self {
        SurvivalCurve {
            taus: grid.taus().to_vec(),
            times: grid.times(spec),
            mean: moments.mean.clone(),
            stderr: moments.stderr(),
            samples: moments.count,
            failures,
            spec: *spec,
            master_seed,
        }
    }
}

/// Per-realization observable: `P(t)` on the grid.
pub fn survival_observable(spec: EnsembleSpec, times: Vec<f64>, method: Method) -> impl Fn(SeedPath) -> Result<Vec<f64>, SpectralError> + Sync {
    move |seed| Ok(survival(&sample_overlaps(&spec, seed, method)?, &times))
}

/// Per-realization observable: `Σ|c_α|⁴` (degeneracy-grouped).
pub fn plateau_observable(spec: EnsembleSpec, method: Method) -> impl Fn(SeedPath) -> Result<Vec<f64>, SpectralError> + Sync {
    move |seed| Ok(vec![plateau_estimate(&sample_overlaps(&spec, seed, method)?)])
}

/// Per-realization observable: mean of `P(t)` over the τ values in `window`.
pub fn window_observable(spec: EnsembleSpec, window: &TimeGrid, method: Method) -> impl Fn(SeedPath) -> Result<Vec<f64>, SpectralError> + Sync {
    let times = window.times(&spec);
    move |seed| {
        let p = survival(&sample_overlaps(&spec, seed, method)?, &times);
        Ok(vec![p.iter().sum::<f64>() / p.len() as f64])
    }
}

/// Settings for [`average_survival_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageOptions {
    pub method: Method,
    pub chunk_size: usize,
}

impl Default for AverageOptions {
    fn default() -> Self {
        AverageOptions {
            method: Method::default(),
            chunk_size: DEFAULT_CHUNK,
        }
    }
}

pub fn average_survival(spec: &EnsembleSpec, grid: &TimeGrid, n_samples: u64, master_seed: u64) -> Result<SurvivalCurve, SpectralError> {
    average_survival_with(spec, grid, n_samples, master_seed, AverageOptions::default())
}

pub fn average_survival_with(
    spec: &EnsembleSpec,
    grid: &TimeGrid,
    n_samples: u64,
    master_seed: u64,
    options: AverageOptions,
) -> Result<SurvivalCurve, SpectralError> {
    spec.validate()?;
    let observable = survival_observable(*spec, grid.times(spec), options.method);
    let (moments, failures) = ensemble_moments(n_samples, master_seed, options.chunk_size, grid.len(), observable)?;
    Ok(SurvivalCurve::from_moments(spec, grid, &moments, failures, master_seed))
}
