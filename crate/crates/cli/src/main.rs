use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use leveldot::harness::{
    self, io, output_root, preset, presets, run_compare, run_simulate, run_sweep, run_theory,
    theory_file, ExperimentConfig, HarnessError, RunOptions, SimulateStatus, EXIT_COMPARISON,
    EXIT_NUMERICAL, EXIT_OK, OUT_ENV, SURVIVAL_FILE,
};

/// Decay of a level coupled to a random-matrix bath: Monte Carlo runs,
/// analytic predictions and their comparison.
#[derive(Parser)]
#[command(name = "leveldot", version)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble-averaged survival curve.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Stop after this many chunks; rerun to resume.
        #[arg(long)]
        max_chunks: Option<u64>,
    },
    /// Analytic curves for the configured formulas.
    Theory {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Late-time population over the configured coupling sweep.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare a simulated curve with the analytic ones.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Survival CSV; defaults to the run directory's.
        #[arg(long, requires = "theory")]
        mc: Option<PathBuf>,
        /// Theory CSV to compare against.
        #[arg(long, requires = "mc")]
        theory: Option<PathBuf>,
    },
    /// Built-in configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// One line per preset.
    List,
    /// Print a preset as TOML.
    Show { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config by name.
    #[arg(long)]
    preset: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Output root; each run writes to `<out>/<name>/`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, RunOptions), HarnessError> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name).ok_or_else(|| {
                HarnessError::config(format!("unknown preset {name:?}; see `leveldot presets list`"))
            })?,
            (None, None) => return Err(HarnessError::config("give --config or --preset")),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let env = std::env::var_os(OUT_ENV).map(PathBuf::from);
        let root = output_root(self.out.as_deref(), &config, env.as_deref());
        let opts = RunOptions {
            root,
            workers: self.workers,
            max_chunks: None,
        };
        Ok((config, opts))
    }
}

fn simulate(run: &RunArgs, max_chunks: Option<u64>) -> Result<i32, HarnessError> {
    let (config, mut opts) = run.load()?;
    opts.max_chunks = max_chunks;
    match run_simulate(&config, &opts)? {
        SimulateStatus::Complete { dir, curve } => {
            println!(
                "{}: {} samples ({} failed) -> {}",
                config.name,
                curve.samples,
                curve.failures,
                dir.join(SURVIVAL_FILE).display()
            );
        }
        SimulateStatus::Partial { dir, done, total } => {
            println!("{}: stopped at {done}/{total} chunks, checkpoint in {}", config.name, dir.display());
        }
    }
    Ok(EXIT_OK)
}

fn theory(run: &RunArgs) -> Result<i32, HarnessError> {
    let (config, opts) = run.load()?;
    let out = run_theory(&config, &opts)?;
    for f in &out.files {
        println!("{}", f.display());
    }
    if out.failed_points > 0 {
        eprintln!("quadrature missed the tolerance at {} points", out.failed_points);
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

fn sweep(run: &RunArgs) -> Result<i32, HarnessError> {
    let (config, opts) = run.load()?;
    let rows = run_sweep(&config, &opts)?;
    println!("gamma,p_res_mc,p_res_stderr,p_res_theory");
    for r in &rows {
        println!("{},{},{},{}", r.gamma, r.p_res_mc, r.p_res_stderr, r.p_res_theory);
    }
    Ok(EXIT_OK)
}

fn report_line(label: &str, r: &harness::ComparisonReport) -> String {
    let ratio = r
        .mc
        .ratio
        .map_or("n/a".to_string(), |e| format!("{:.4} ± {:.4}", e.value, e.stderr));
    format!(
        "{label}: {} {}/{} points beyond |z| > {} (max |z| {:.2}), ratio {ratio}",
        if r.passed { "PASS" } else { "FAIL" },
        r.outliers,
        r.compared,
        r.z_threshold,
        r.max_abs_z
    )
}

fn compare(run: &RunArgs, mc: Option<&Path>, theory: Option<&Path>) -> Result<i32, HarnessError> {
    let (config, opts) = run.load()?;
    let dir = opts.run_dir(&config);
    let pairs: Vec<(PathBuf, PathBuf, PathBuf)> = match (mc, theory) {
        (Some(m), Some(t)) => {
            let stem = t.file_stem().and_then(|s| s.to_str()).unwrap_or("theory");
            vec![(m.to_path_buf(), t.to_path_buf(), dir.join(format!("compare_{stem}.json")))]
        }
        _ => {
            if config.theory.formulas.is_empty() {
                return Err(HarnessError::config(format!("{}: no theory formulas to compare", config.name)));
            }
            config
                .theory
                .formulas
                .iter()
                .map(|&f| {
                    (
                        dir.join(SURVIVAL_FILE),
                        dir.join(theory_file(f)),
                        dir.join(format!("compare_{}.json", f.tag())),
                    )
                })
                .collect()
        }
    };
    let mut code = EXIT_OK;
    for (m, t, out) in pairs {
        let mut report = run_compare(&m, &t, &config.compare)?;
        if report.config_hash.is_none() {
            report.config_hash = Some(config.hash());
        }
        io::write_atomic(&out, &report.to_json())?;
        info!("report written to {}", out.display());
        println!("{}", report_line(&t.display().to_string(), &report));
        if !report.passed {
            code = EXIT_COMPARISON;
        }
    }
    Ok(code)
}

fn list_presets() {
    for p in presets() {
        let spec = p.ensemble().expect("presets are valid");
        let what = match &p.sweep {
            Some(s) => format!("sweep of {} gammas in [{}, {}]", s.points, s.gamma_min, s.gamma_max),
            None => format!("gamma {}", p.spec.gamma.unwrap_or_else(|| spec.gamma())),
        };
        println!(
            "{:<14} class {} N+1={} {what}, {} samples",
            p.name,
            spec.class,
            spec.n + 1,
            p.n_samples
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Simulate { run, max_chunks } => simulate(run, *max_chunks),
        Command::Theory { run } => theory(run),
        Command::Sweep { run } => sweep(run),
        Command::Compare { run, mc, theory } => compare(run, mc.as_deref(), theory.as_deref()),
        Command::Presets { action } => match action {
            PresetAction::List => {
                list_presets();
                Ok(EXIT_OK)
            }
            PresetAction::Show { name } => match preset(name) {
                Some(p) => {
                    print!("{}", p.to_toml_string());
                    Ok(EXIT_OK)
                }
                None => Err(HarnessError::config(format!("unknown preset {name:?}"))),
            },
        },
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
