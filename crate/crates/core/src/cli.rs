//! Command-line front end: `derive`, `train`, `eval`, `inspect`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime
//! failure, 3 non-convergence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::QBundle;
use crate::config::{Config, RunContext, CONFIG_ENV};
use crate::curriculum::{train_curriculum, TrainingRun, TrainingStatus};
use crate::error::{Error, Result};
use crate::evaluation::{battery_configs, run_battery, stats_csv, stats_table, trajectory_csv, TrialStats};
use crate::math::round_half_even;
use crate::platform::DerivedHyperparams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "landing",
    version,
    about = "Curriculum Double Q-Learning for moving-platform landing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print derived hyperparameters and curriculum geometry.
    Derive {
        #[command(flatten)]
        source: ConfigSource,
        /// Emit key=value lines instead of a table.
        #[arg(long)]
        machine: bool,
    },
    /// Train agents, writing a bundle, episode log and manifest per seed.
    Train {
        #[command(flatten)]
        source: ConfigSource,
        /// Rerun from a manifest written by an earlier training run.
        #[arg(long, conflicts_with_all = ["preset", "config", "seed"])]
        manifest: Option<PathBuf>,
        /// Master seeds; each produces an independent agent.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64])]
        seed: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for independent seeds.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate bundles on the configured scenario battery.
    Eval {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, required = true, num_args = 1..)]
        bundle: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = NoiseMode::Off)]
        noise: NoiseMode,
        /// Trials per scenario (defaults to the configuration).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for results.csv and results.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-trial trajectory CSVs.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Worker threads for trials (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Summarize visit counts and action values of a bundle.
    Inspect {
        #[arg(long)]
        bundle: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ConfigSource {
    /// Named preset, e.g. hardware-rpm-0.4.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// TOML configuration file (falls back to $LANDING_CONFIG).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseMode {
    Off,
    On,
    Both,
}

impl ConfigSource {
    pub fn load(&self) -> Result<Config> {
        if let Some(name) = &self.preset {
            return Config::preset(name);
        }
        if let Some(path) = &self.config {
            return Config::load(path);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) => Config::load(Path::new(&p)),
            None => Err(Error::Config(format!(
                "no configuration: pass --preset or --config, or set {CONFIG_ENV}"
            ))),
        }
    }
}

/// Run manifest written next to each bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub status: String,
    pub bundle: String,
    pub episode_log: String,
    pub derived: DerivedHyperparams,
    pub steps: Vec<ManifestStep>,
    pub config: Config,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestStep {
    pub step: usize,
    pub episodes: usize,
    pub converged: bool,
    pub final_window_rate: f64,
    pub wall_clock_s: f64,
    pub transfer_ratio: f64,
    pub transfer_violations: usize,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidScenario(_) | Error::GeometryMismatch(_) | Error::OutOfRange { .. } => {
            EXIT_USAGE
        }
        Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        Error::NonFinite(_) | Error::Format(_) | Error::Io { .. } => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Derive { source, machine } => {
            let ctx = RunContext::new(source.load()?)?;
            print!(
                "{}",
                if machine {
                    derive_machine(&ctx)?
                } else {
                    derive_table(&ctx)?
                }
            );
            Ok(())
        }
        Command::Train {
            source,
            manifest,
            seed,
            out,
            jobs,
        } => {
            let (config, seeds) = match manifest {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
                    m.config.validate()?;
                    (m.config, vec![m.seed])
                }
                None => (source.load()?, seed),
            };
            cmd_train(config, &seeds, &out, jobs)
        }
        Command::Eval {
            source,
            bundle,
            noise,
            trials,
            seed,
            out,
            trajectories,
            jobs,
        } => {
            let pool = thread_pool(jobs)?;
            let config = source.load()?;
            pool.install(|| {
                cmd_eval(
                    config,
                    &bundle,
                    noise,
                    trials,
                    seed,
                    out.as_deref(),
                    trajectories.as_deref(),
                )
            })
        }
        Command::Inspect { bundle } => {
            let b = QBundle::load(&bundle)?;
            print!("{}", inspect_report(&b));
            Ok(())
        }
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn r2(x: f64) -> String {
    format!("{:.2}", round_half_even(x, 2))
}

pub fn derive_table(ctx: &RunContext) -> Result<String> {
    let d = &ctx.derived;
    let mut s = String::new();
    let _ = writeln!(s, "scenario         {}", ctx.config.scenario.name);
    let rows = [
        ("a_mp_max", d.a_mp_max, "m/s^2"),
        ("omega_mp", d.omega_mp, "rad/s"),
        ("theta_max", d.theta_max, "rad"),
        ("f_ag", d.f_ag, "Hz"),
        ("dt_agent", d.dt_agent, "s"),
        ("t_0", d.t_0, "s"),
        ("delta_theta", d.delta_theta, "rad"),
        ("p_max", d.p_max, "m"),
        ("v_max", d.v_max, "m/s"),
        ("a_max", d.a_max, "m/s^2"),
    ];
    for (k, v, unit) in rows {
        let _ = writeln!(s, "{k:<16} {:>10} {unit}", r2(v));
    }
    let _ = writeln!(s, "{:<16} {:>10}", "n_cs", d.n_cs);
    let _ = writeln!(s, "\nstep  p_lim  v_lim  a_lim  p_goal  v_goal  a_goal");
    for g in &ctx.config.geometry(d.n_cs)?.steps {
        let _ = writeln!(
            s,
            "{:>4} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}",
            g.index,
            r2(g.p_lim),
            r2(g.v_lim),
            r2(g.a_lim),
            r2(g.p_goal),
            r2(g.v_goal),
            r2(g.a_goal)
        );
    }
    Ok(s)
}

pub fn derive_machine(ctx: &RunContext) -> Result<String> {
    let d = &ctx.derived;
    let mut s = String::new();
    for (k, v) in [
        ("a_mp_max", d.a_mp_max),
        ("omega_mp", d.omega_mp),
        ("theta_max", d.theta_max),
        ("f_ag", d.f_ag),
        ("dt_agent", d.dt_agent),
        ("t_0", d.t_0),
        ("delta_theta", d.delta_theta),
        ("p_max", d.p_max),
        ("v_max", d.v_max),
        ("a_max", d.a_max),
    ] {
        let _ = writeln!(s, "{k}={v}");
    }
    let _ = writeln!(s, "n_cs={}", d.n_cs);
    for g in &ctx.config.geometry(d.n_cs)?.steps {
        let i = g.index;
        for (k, v) in [
            ("p_lim", g.p_lim),
            ("v_lim", g.v_lim),
            ("a_lim", g.a_lim),
            ("p_goal", g.p_goal),
            ("v_goal", g.v_goal),
            ("a_goal", g.a_goal),
        ] {
            let _ = writeln!(s, "step{i}.{k}={v}");
        }
    }
    Ok(s)
}

pub fn bundle_from_run(run: &TrainingRun, ctx: &RunContext) -> QBundle {
    QBundle {
        config_hash: ctx.config.hash(),
        n_cs: ctx.derived.n_cs as u32,
        n_theta: ctx.n_theta(),
        converged: run.status == TrainingStatus::Converged,
        geometry: run.geometry.clone(),
        tables: run.tables.clone(),
    }
}

fn manifest_for(run: &TrainingRun, ctx: &RunContext) -> Manifest {
    Manifest {
        seed: run.seed,
        config_hash: format!("{:016x}", ctx.config.hash()),
        status: match run.status {
            TrainingStatus::Converged => "converged".into(),
            TrainingStatus::NonConverged { step, episodes } => {
                format!("non-converged at step {step} after {episodes} episodes")
            }
        },
        bundle: "bundle.qlb".into(),
        episode_log: "episodes.csv".into(),
        derived: ctx.derived,
        steps: run
            .steps
            .iter()
            .map(|s| ManifestStep {
                step: s.step_index,
                episodes: s.episodes,
                converged: s.converged,
                final_window_rate: s.final_window_rate,
                wall_clock_s: s.wall_clock_s,
                transfer_ratio: s.transfer_ratio,
                transfer_violations: s.transfer_violations,
            })
            .collect(),
        config: ctx.config.clone(),
    }
}

/// Directory receiving the artifacts of `seed`.
pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Trains one agent and writes its artifacts into `dir`.
pub fn train_to_dir(ctx: &RunContext, seed: u64, dir: &Path) -> Result<TrainingRun> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let run = train_curriculum(ctx, seed)?;
    bundle_from_run(&run, ctx).save(&dir.join("bundle.qlb"))?;
    write(&dir.join("episodes.csv"), run.episode_log_csv())?;
    let manifest = toml::to_string(&manifest_for(&run, ctx)).map_err(|e| Error::Config(e.to_string()))?;
    write(&dir.join("manifest.toml"), manifest)?;
    Ok(run)
}

fn cmd_train(config: Config, seeds: &[u64], out: &Path, jobs: usize) -> Result<()> {
    let ctx = RunContext::new(config)?;
    let pool = thread_pool(jobs.max(1))?;
    let results: Vec<(u64, Result<TrainingRun>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| (s, train_to_dir(&ctx, s, &seed_dir(out, s))))
            .collect()
    });
    let mut first_err = None;
    for (seed, res) in results {
        match res {
            Ok(run) => {
                for s in &run.steps {
                    println!(
                        "seed {seed} step {}: {} episodes, window {:.2}, {} ({:.1} s)",
                        s.step_index,
                        s.episodes,
                        s.final_window_rate,
                        if s.converged { "converged" } else { "NOT converged" },
                        s.wall_clock_s
                    );
                }
                if let Err(e) = run.ensure_converged() {
                    eprintln!(
                        "seed {seed}: {e}; partial bundle written to {}",
                        seed_dir(out, seed).display()
                    );
                    first_err.get_or_insert(e);
                }
            }
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_eval(
    config: Config,
    bundles: &[PathBuf],
    noise: NoiseMode,
    trials: Option<usize>,
    seed: u64,
    out: Option<&Path>,
    trajectories: Option<&Path>,
) -> Result<()> {
    let ctx = RunContext::new(config)?;
    let modes: &[bool] = match noise {
        NoiseMode::Off => &[false],
        NoiseMode::On => &[true],
        NoiseMode::Both => &[false, true],
    };
    let mut rows: Vec<(String, Vec<TrialStats>)> = Vec::new();
    for path in bundles {
        let b = QBundle::load(path)?;
        if b.config_hash != ctx.config.hash() {
            eprintln!(
                "warning: {} was trained with config hash {:016x}, evaluating with {:016x}",
                path.display(),
                b.config_hash,
                ctx.config.hash()
            );
        }
        if b.n_theta != ctx.n_theta() || b.n_cs as usize != ctx.derived.n_cs {
            return Err(Error::GeometryMismatch(format!(
                "bundle has n_theta = {}, n_cs = {}; configuration derives n_theta = {}, n_cs = {}",
                b.n_theta,
                b.n_cs,
                ctx.n_theta(),
                ctx.derived.n_cs
            )));
        }
        let policy = b.policy()?;
        policy.check_compatible(&ctx)?;
        let name = path
            .parent()
            .and_then(Path::file_name)
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "agent".into());
        for &noisy in modes {
            let mut cfgs = battery_configs(&ctx, noisy, seed);
            for c in &mut cfgs {
                if let Some(n) = trials {
                    c.n_trials = n;
                }
                c.record = trajectories.is_some();
            }
            let stats = run_battery(&ctx, &policy, &cfgs);
            let label = if noisy { format!("{name} noisy") } else { name.clone() };
            if let Some(dir) = trajectories {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                for s in &stats {
                    for (i, log) in s.trajectories.iter().flatten().enumerate() {
                        let file = dir.join(format!("{}_{}_{i:03}.csv", sanitize(&label), sanitize(&s.label)));
                        write(&file, trajectory_csv(log))?;
                    }
                }
            }
            rows.push((label, stats));
        }
    }
    let table = stats_table(&rows);
    print!("{table}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("results.csv"), stats_csv(&rows))?;
        write(&dir.join("results.txt"), &table)?;
    }
    Ok(())
}

pub fn inspect_report(b: &QBundle) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "config hash {:016x}  n_cs {}  n_theta {}  steps {}  {}",
        b.config_hash,
        b.n_cs,
        b.n_theta,
        b.tables.len(),
        if b.converged { "converged" } else { "not converged" }
    );
    let _ = writeln!(s, "step  visits      coverage  q_min      q_max");
    for (i, t) in b.tables.iter().enumerate() {
        let covered = t.visits.iter().filter(|&&n| n > 0).count();
        let (lo, hi) = t
            .q_a
            .iter()
            .chain(&t.q_b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &q| {
                (lo.min(q), hi.max(q))
            });
        let _ = writeln!(
            s,
            "{i:>4}  {:>10}  {:>8}  {:>9}  {:>9}",
            t.total_visits(),
            r2(covered as f64 / t.visits.len().max(1) as f64),
            r2(lo),
            r2(hi)
        );
    }
    s
}
