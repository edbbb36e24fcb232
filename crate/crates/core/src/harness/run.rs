//! Monte Carlo, theory and sweep runs. Each run writes into
//! `<root>/<config name>/` together with the resolved config.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, LateTime};
use super::io::{self, Header};
use super::HarnessError;
use crate::ensembles::{derive_seed, SymmetryClass};
use crate::spectral::{
    check_success, chunk_count, ensemble_moments, reduce_chunks, run_chunk, survival_observable,
    plateau_observable, window_observable, ChunkResult, SurvivalCurve,
};
use crate::theory::{crossover_point, p_res_closed, theory_curve, Formula, TheoryCurve};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "LEVELDOT_OUT";
pub const SURVIVAL_FILE: &str = "survival.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const RESIDENCE_FILE: &str = "residence.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
const DEFAULT_ROOT: &str = "leveldot-out";

/// Output root: command line, then config, then environment, then
/// `./leveldot-out`.
pub fn output_root(cli: Option<&Path>, config: &ExperimentConfig, env: Option<&Path>) -> PathBuf {
    cli.or(config.output_dir.as_deref())
        .or(env)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub root: PathBuf,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Stop after computing this many new chunks, leaving a checkpoint.
    pub max_chunks: Option<u64>,
}

impl RunOptions {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunOptions {
            root: root.into(),
            ..Default::default()
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn run_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.root.join(&config.name)
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> Result<R, HarnessError>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(HarnessError::config("workers must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn run_header(kind: &str, config: &ExperimentConfig) -> Header {
    let mut h = io::header(kind);
    h.push(("config".into(), config.name.clone()));
    h.push(("config_hash".into(), config.hash()));
    h
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> Result<(), HarnessError> {
    io::write_atomic(&dir.join(CONFIG_FILE), &config.to_toml_string())
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config_hash: String,
    chunks: Vec<ChunkResult>,
}

fn load_checkpoint(path: &Path, hash: &str) -> Result<Vec<ChunkResult>, HarnessError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::io(path, e)),
    };
    match serde_json::from_str::<Checkpoint>(&text) {
        Ok(c) if c.config_hash == hash => {
            info!("resuming from {} ({} chunks)", path.display(), c.chunks.len());
            Ok(c.chunks)
        }
        Ok(_) => {
            warn!("{}: written for a different config, starting over", path.display());
            Ok(Vec::new())
        }
        Err(e) => {
            warn!("{}: unreadable ({e}), starting over", path.display());
            Ok(Vec::new())
        }
    }
}

fn save_checkpoint(path: &Path, hash: &str, chunks: &[ChunkResult]) -> Result<(), HarnessError> {
    let state = Checkpoint {
        config_hash: hash.to_string(),
        chunks: chunks.to_vec(),
    };
    io::write_atomic(path, &serde_json::to_string(&state).expect("checkpoint serializes"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimulateStatus {
    Complete { dir: PathBuf, curve: SurvivalCurve },
    /// Stopped early; rerunning resumes from the checkpoint.
    Partial { dir: PathBuf, done: u64, total: u64 },
}

/// Ensemble-averaged survival curve for `config`, written to
/// `survival.csv`. Progress is checkpointed per batch of chunks so an
/// interrupted run resumes where it stopped and yields the same curve.
pub fn run_simulate(config: &ExperimentConfig, opts: &RunOptions) -> Result<SimulateStatus, HarnessError> {
    config.validate()?;
    let spec = config.ensemble()?;
    let grid = config.grid.build()?;
    let dir = opts.run_dir(config);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let hash = config.hash();
    let ckpt = dir.join(CHECKPOINT_FILE);
    let mut chunks = load_checkpoint(&ckpt, &hash)?;
    let total = chunk_count(config.n_samples, config.chunk_size);
    let done: BTreeSet<u64> = chunks.iter().map(|c| c.index).collect();
    let pending: Vec<u64> = (0..total).filter(|c| !done.contains(c)).collect();
    let limit = opts.max_chunks.map_or(pending.len(), |m| (m as usize).min(pending.len()));
    let observable = survival_observable(spec, grid.times(&spec), config.method);

    with_workers(opts.workers, || -> Result<(), HarnessError> {
        let batch = 2 * rayon::current_num_threads().max(1);
        for group in pending[..limit].chunks(batch) {
            let fresh: Vec<ChunkResult> = group
                .par_iter()
                .map(|&c| run_chunk(config.n_samples, config.chunk_size, c, config.seed, grid.len(), &observable))
                .collect();
            chunks.extend(fresh);
            save_checkpoint(&ckpt, &hash, &chunks)?;
            info!("{}: {}/{} chunks", config.name, chunks.len(), total);
        }
        Ok(())
    })??;

    if (chunks.len() as u64) < total {
        save_checkpoint(&ckpt, &hash, &chunks)?;
        return Ok(SimulateStatus::Partial {
            dir,
            done: chunks.len() as u64,
            total,
        });
    }
    let (moments, failures) = reduce_chunks(&chunks, grid.len());
    check_success(config.n_samples, failures)?;
    let curve = SurvivalCurve::from_moments(&spec, &grid, &moments, failures, config.seed);
    io::write_survival(&dir.join(SURVIVAL_FILE), &curve, run_header("survival", config))?;
    write_config(&dir, config)?;
    fs::remove_file(&ckpt).map_err(|e| HarnessError::io(&ckpt, e))?;
    Ok(SimulateStatus::Complete { dir, curve })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryOutcome {
    pub dir: PathBuf,
    pub curves: Vec<TheoryCurve>,
    pub files: Vec<PathBuf>,
    /// Grid points, over all curves, where quadrature missed the tolerance.
    pub failed_points: usize,
}

pub fn theory_file(formula: Formula) -> String {
    format!("theory_{}.csv", formula.tag())
}

/// Evaluates every configured formula on the config grid, plus the
/// residence-probability table when a sweep is configured. Points where
/// quadrature fails are flagged in the file header and the run continues.
pub fn run_theory(config: &ExperimentConfig, opts: &RunOptions) -> Result<TheoryOutcome, HarnessError> {
    config.validate()?;
    let spec = config.ensemble()?;
    if config.theory.formulas.is_empty() && config.sweep.is_none() {
        return Err(HarnessError::config("no theory formulas configured"));
    }
    if spec.class != SymmetryClass::Unitary && config.theory.formulas.contains(&Formula::Full) {
        return Err(HarnessError::config(format!(
            "formula {} needs class U, config has class {}",
            Formula::Full,
            spec.class
        )));
    }
    let grid = config.grid.build()?;
    let dir = opts.run_dir(config);
    let tol = config.theory.tolerance();
    let mut outcome = TheoryOutcome {
        dir: dir.clone(),
        curves: Vec::new(),
        files: Vec::new(),
        failed_points: 0,
    };
    with_workers(opts.workers, || -> Result<(), HarnessError> {
        for &formula in &config.theory.formulas {
            let curve = theory_curve(formula, spec.class, spec.gamma(), grid.taus(), tol)?;
            let mut meta = run_header("theory", config);
            let failed: Vec<String> = curve.failed.iter().map(|i| i.to_string()).collect();
            if !failed.is_empty() {
                warn!("{formula}: quadrature missed tolerance at {} points", failed.len());
            }
            meta.push(("failed_points".into(), failed.join(" ")));
            let path = dir.join(theory_file(formula));
            io::write_theory(&path, &curve, meta)?;
            outcome.failed_points += curve.failed.len();
            outcome.files.push(path);
            outcome.curves.push(curve);
        }
        if let Some(sweep) = &config.sweep {
            let points = sweep
                .gammas()?
                .par_iter()
                .map(|&g| crossover_point(g))
                .collect::<Result<Vec<_>, _>>()?;
            let path = dir.join(RESIDENCE_FILE);
            io::write_residence(&path, &points, run_header("residence", config))?;
            outcome.files.push(path);
        }
        Ok(())
    })??;
    write_config(&dir, config)?;
    Ok(outcome)
}

/// Late-time population against coupling: for each γ of the sweep, the
/// per-realization late-time value (window mean or infinite-time average),
/// averaged over the ensemble. Realizations at the k-th γ use master seed
/// `derive_seed(seed, k)`.
pub fn run_sweep(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<io::SweepRow>, HarnessError> {
    config.validate()?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::config("no [sweep] section"))?;
    let window = sweep.window.build()?;
    let gammas = sweep.gammas()?;
    let rows = with_workers(opts.workers, || {
        gammas
            .iter()
            .enumerate()
            .map(|(k, &gamma)| -> Result<io::SweepRow, HarnessError> {
                let spec = config.spec.with_gamma(gamma).resolve()?;
                let master = derive_seed(config.seed, k as u64);
                let (m, _) = match sweep.late_time {
                    LateTime::Window => {
                        let observable = window_observable(spec, &window, config.method);
                        ensemble_moments(config.n_samples, master, config.chunk_size, 1, observable)?
                    }
                    LateTime::Infinite => {
                        let observable = plateau_observable(spec, config.method);
                        ensemble_moments(config.n_samples, master, config.chunk_size, 1, observable)?
                    }
                };
                info!("{}: gamma {gamma}: {}", config.name, m.mean[0]);
                Ok(io::SweepRow {
                    gamma,
                    g: spec.g,
                    p_res_mc: m.mean[0],
                    p_res_stderr: m.stderr()[0],
                    n: m.count,
                    p_res_theory: p_res_closed(gamma)?,
                    p_fgr: 1.0 / gamma,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    let dir = opts.run_dir(config);
    let mut meta = run_header("sweep", config);
    meta.push(("seed".into(), config.seed.to_string()));
    meta.push(("samples".into(), config.n_samples.to_string()));
    meta.push(("late_time".into(), format!("{:?}", sweep.late_time).to_lowercase()));
    io::write_sweep(&dir.join(SWEEP_FILE), &rows, meta)?;
    write_config(&dir, config)?;
    Ok(rows)
}
