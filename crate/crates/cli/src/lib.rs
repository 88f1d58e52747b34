//! Command-line driver: configuration, snapshot files, CSV/JSON outputs and the
//! `tcm` subcommands.

pub mod config;
pub mod output;
pub mod snapshot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tcm_core::diagnostics::{energy_identity_residual, gronwall_bound_check, sup_t_monitor};
use tcm_core::harness::{
    generate, mms_verify, sweep, twin_run, ManufacturedSolution, MmsSpec, Perturbation,
    SweepParameter, SweepSpec, TwinSpec,
};
use tcm_core::{Forcing, NoForcing, State, SystemVariant};

use config::{Config, ConfigError, ForcingId, InitSource};
use output::{Manifest, SnapshotEntry};
use snapshot::SnapshotError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error("{path}: {source}")]
    Snapshot {
        path: PathBuf,
        #[source]
        source: SnapshotError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Core(#[from] tcm_core::Error),
    #[error("{0}")]
    Invalid(String),
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "tcm", version, about = "Pseudo-spectral solver for a moist two-mode tropical climate model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (`key = value` with optional `[section]` headers).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `run.out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed of the initial-data generator; overrides `init.seed`.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; overrides the TCM_THREADS environment variable.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a single trajectory.
    Run(Common),
    /// Run a decreasing sequence of humidity diffusivities and compare neighbours.
    SweepEta(Common),
    /// Run a decreasing sequence of mollification widths and compare neighbours.
    SweepEps(Common),
    /// Run a base state and a perturbed copy side by side.
    Twin(Common),
    /// Convergence study against a manufactured solution.
    Mms(Common),
    /// Print a snapshot header and per-field statistics.
    Inspect {
        #[arg(value_name = "SNAPSHOT")]
        path: PathBuf,
    },
}

/// Runs the CLI on `args` (without the program name) and returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("tcm")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Inspect { path } => inspect(&path),
        Command::Run(c) => with_setup(c, "run", run),
        Command::SweepEta(c) => with_setup(c, "sweep-eta", |s| sweep_cmd(s, SweepParameter::Eta)),
        Command::SweepEps(c) => with_setup(c, "sweep-eps", |s| sweep_cmd(s, SweepParameter::Eps)),
        Command::Twin(c) => with_setup(c, "twin", twin),
        Command::Mms(c) => with_setup(c, "mms", mms),
    }
}

/// Everything a command needs after argument handling.
struct Setup {
    command: &'static str,
    config: Config,
    out: PathBuf,
    threads: usize,
}

impl Setup {
    fn manifest(&self, status: &str, error: Option<String>) -> Manifest {
        Manifest {
            command: self.command.to_string(),
            status: status.to_string(),
            error,
            config: config_json(&self.config),
            threads: self.threads,
            snapshots: Vec::new(),
            files: Vec::new(),
            results: Value::Null,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn save(&self, manifest: &Manifest) -> CliResult<()> {
        let path = self.path("manifest.json");
        output::write_manifest(&path, manifest).map_err(io_err(&path))
    }
}

fn thread_count(flag: Option<u32>) -> CliResult<usize> {
    if let Some(n) = flag {
        return Ok(n as usize);
    }
    match std::env::var("TCM_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Invalid(format!(
                "TCM_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        _ => Ok(0),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            config::parse_config(&text).map_err(|source| CliError::Config {
                path: p.to_path_buf(),
                source,
            })
        }
    }
}

fn with_setup(common: Common, command: &'static str, body: impl FnOnce(&Setup) -> CliResult<()> + Send) -> CliResult<()> {
    let mut config = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.set_seed(seed);
    }
    let out = common.out.clone().unwrap_or_else(|| config.out.clone());
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(common.threads)?)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start worker threads: {e}")))?;
    let setup = Setup {
        command,
        config,
        out,
        threads: pool.current_num_threads(),
    };
    pool.install(|| body(&setup))
}

fn forcing(config: &Config) -> CliResult<Box<dyn Forcing>> {
    Ok(match config.forcing {
        ForcingId::None => Box::new(NoForcing),
        ForcingId::Manufactured(family) => Box::new(ManufacturedSolution::new(family, config.consts, config.variant)?),
    })
}

fn initial_state(config: &Config) -> CliResult<State> {
    if let ForcingId::Manufactured(family) = config.forcing {
        return Ok(ManufacturedSolution::new(family, config.consts, config.variant)?.exact(config.grid, 0.0)?);
    }
    match &config.init {
        InitSource::Generated(spec) => Ok(generate(config.grid, &config.consts, spec)?),
        InitSource::Snapshot(path) => {
            let (state, meta) = snapshot::read(path).map_err(|source| CliError::Snapshot {
                path: path.clone(),
                source,
            })?;
            if meta.grid != config.grid {
                return Err(CliError::Invalid(format!(
                    "{}: snapshot grid (n = {}, L = {}) differs from the configured grid (n = {}, L = {})",
                    path.display(),
                    meta.grid.n(),
                    meta.grid.length(),
                    config.grid.n(),
                    config.grid.length()
                )));
            }
            Ok(state)
        }
    }
}

fn variant_json(v: &SystemVariant) -> Value {
    json!({
        "kind": v.name(),
        "eps": v.eps().map(output::num),
        "eta": output::num(v.eta()),
        "alpha": v.alpha().map(output::num),
    })
}

fn config_json(c: &Config) -> Value {
    let k = &c.consts;
    let init = match &c.init {
        InitSource::Generated(s) => json!({
            "seed": s.seed,
            "regime": s.regime.name(),
            "margin": s.margin,
            "kmax": s.kmax,
            "amp_u": s.amp_u,
            "amp_v": s.amp_v,
            "amp_t": s.amp_t,
            "amp_q": s.amp_q,
        }),
        InitSource::Snapshot(p) => json!({ "snapshot": p }),
    };
    json!({
        "grid": { "n": c.grid.n(), "length": c.grid.length() },
        "variant": variant_json(&c.variant),
        "consts": {
            "latent_heat": k.latent_heat, "r_dry": k.r_dry, "r_vapor": k.r_vapor, "c_p": k.c_p,
            "gravity": k.gravity, "h_trop": k.h_trop, "theta0": k.theta0,
            "brunt_vaisala": k.brunt_vaisala, "q_bar": k.q_bar, "q_s": k.q_s, "mu": k.mu,
            "xi0": k.xi0(),
        },
        "step": {
            "dt": c.policy.dt, "cfl": c.policy.cfl_target, "eps_safety": c.policy.eps_substep_safety,
            "scheme": c.policy.scheme.name(), "min_dt": c.policy.min_dt,
        },
        "run": {
            "t_end": c.t_end,
            "cadence": c.cadence,
            "forcing": match c.forcing {
                ForcingId::None => "none",
                ForcingId::Manufactured(f) => f.name(),
            },
        },
        "init": init,
    })
}

fn snapshot_file(dir: &Path, rel: &str, k: usize) -> (PathBuf, PathBuf) {
    let name = PathBuf::from(rel).join(format!("snapshot_{k:04}.tcm"));
    (dir.join(&name), name)
}

fn write_snap(path: &Path, state: &State, t: f64, v: SystemVariant) -> CliResult<()> {
    snapshot::write(path, state, t, v).map_err(|source| CliError::Snapshot {
        path: path.to_path_buf(),
        source,
    })
}

fn trajectory_summary(config: &Config, records: &[tcm_core::diagnostics::DiagnosticsRecord]) -> CliResult<Value> {
    let model = config.run_config().model()?;
    let gron = gronwall_bound_check(&model, records);
    let sup = sup_t_monitor(records, config.consts.xi0());
    Ok(json!({
        "steps": records.len().saturating_sub(1),
        "final_time": records.last().map(|r| r.time),
        "max_energy_residual": energy_identity_residual(records).ok().map(output::num),
        "gronwall": {
            "constant": output::num(gron.constant),
            "max_ratio": output::num(gron.max_ratio),
            "satisfied": gron.satisfied(),
        },
        "sup_t": {
            "max": output::num(sup.max_sup_t),
            "recorded": sup.recorded,
            "exceeded_xi0": sup.exceeded_xi0,
            "first_exceedance": sup.first_exceedance,
        },
    }))
}

fn run(setup: &Setup) -> CliResult<()> {
    let config = &setup.config;
    let initial = initial_state(config)?;
    let forcing = forcing(config)?;
    let stepper = config.run_config().stepper()?;
    let mut manifest = setup.manifest("ok", None);
    let mut snapshots = Vec::new();
    let result = stepper.run_with(&initial, config.t_end, config.cadence, forcing.as_ref(), |t, s| {
        let (path, name) = snapshot_file(&setup.out, "", snapshots.len());
        write_snap(&path, s, t, config.variant).map_err(|e| tcm_core::Error::InvalidParameter {
            name: "snapshot output",
            reason: e.to_string(),
        })?;
        snapshots.push(SnapshotEntry { time: t, file: name });
        Ok(())
    });
    manifest.snapshots = snapshots;
    let csv_path = setup.path("diagnostics.csv");
    manifest.files.push("diagnostics.csv".into());
    match result {
        Ok(traj) => {
            output::write_diagnostics(&csv_path, &traj.records)?;
            manifest.results = trajectory_summary(config, &traj.records)?;
            setup.save(&manifest)
        }
        Err(tcm_core::Error::RunFailed(failure)) => {
            output::write_diagnostics(&csv_path, &failure.partial.records)?;
            write_snap(&setup.path("last_good.tcm"), &failure.last_good, failure.last_good_time, config.variant)?;
            manifest.files.push("last_good.tcm".into());
            manifest.status = "failed".into();
            manifest.error = Some(failure.cause.to_string());
            manifest.results = json!({
                "steps_completed": failure.steps_completed,
                "last_good_time": failure.last_good_time,
            });
            setup.save(&manifest)?;
            Err(tcm_core::Error::RunFailed(failure).into())
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
            setup.save(&manifest)?;
            Err(e.into())
        }
    }
}

fn comparison_times(config: &Config) -> CliResult<Vec<f64>> {
    if !config.sweep.times.is_empty() {
        return Ok(config.sweep.times.clone());
    }
    if config.t_end <= 0.0 {
        return Err(CliError::Invalid("a sweep needs run.t_end > 0".into()));
    }
    Ok(config.run_config().output_times()?)
}

fn sweep_cmd(setup: &Setup, parameter: SweepParameter) -> CliResult<()> {
    let config = &setup.config;
    let (values, variant) = match parameter {
        SweepParameter::Eta => {
            let values = config.sweep.eta_values.clone();
            let eps = config.variant.eps().unwrap_or(1e-2);
            let v = SystemVariant::PEpsEta { eps, eta: values.first().copied().unwrap_or(1e-2) };
            (values, v)
        }
        SweepParameter::Eps => {
            let values = config.sweep.eps_values.clone();
            let first = values.first().copied().unwrap_or(1e-2);
            let v = match config.variant {
                SystemVariant::PEpsEta { eta, .. } => SystemVariant::PEpsEta { eps: first, eta },
                _ => SystemVariant::PEps { eps: first },
            };
            (values, v)
        }
    };
    let spec = SweepSpec {
        parameter,
        values,
        base: config.run_config().with_variant(variant),
        norm: config.sweep.norm,
        times: comparison_times(config)?,
    };
    let initial = initial_state(config)?;
    let forcing = forcing(config)?;
    let mut manifest = setup.manifest("ok", None);
    let table_path = setup.path("sweep.csv");
    manifest.files.push("sweep.csv".into());
    let outcome = match sweep(&spec, &initial, forcing.as_ref()) {
        Ok(o) => o,
        Err(tcm_core::Error::SweepMemberFailed { index, parameter, value, source, partial }) => {
            output::write_sweep_table(&table_path, &partial)?;
            let err = tcm_core::Error::SweepMemberFailed { index, parameter, value, source, partial };
            manifest.status = "failed".into();
            manifest.error = Some(err.to_string());
            setup.save(&manifest)?;
            return Err(err.into());
        }
        Err(e) => return Err(e.into()),
    };
    output::write_sweep_table(&table_path, &outcome.table)?;
    let mut members = Vec::new();
    for (k, m) in outcome.members.iter().enumerate() {
        let rel = format!("member_{k:02}");
        let dir = setup.path(&rel);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        output::write_diagnostics(&dir.join("diagnostics.csv"), &m.trajectory.records)?;
        manifest.files.push(PathBuf::from(&rel).join("diagnostics.csv"));
        for (j, (t, s)) in m.trajectory.snapshots.iter().enumerate() {
            let (path, name) = snapshot_file(&setup.out, &rel, j);
            write_snap(&path, s, *t, m.config.variant)?;
            manifest.snapshots.push(SnapshotEntry { time: *t, file: name });
        }
        members.push(json!({
            "index": k,
            "value": m.value,
            "variant": variant_json(&m.config.variant),
            "directory": rel,
        }));
    }
    let rows: Vec<Value> = outcome
        .table
        .rows
        .iter()
        .map(|r| {
            json!({
                "time": r.time, "index": r.index, "value": r.value, "next_value": r.next_value,
                "distance": output::num(r.distance),
                "per_field": r.per_field.iter().map(|&d| output::num(d)).collect::<Vec<_>>(),
                "rate": r.rate.map(output::num),
            })
        })
        .collect();
    manifest.results = json!({
        "parameter": parameter.name(),
        "norm": outcome.table.norm.name(),
        "values": outcome.table.values,
        "times": outcome.table.times,
        "all_zero": outcome.table.all_zero(),
        "members": members,
        "table": rows,
    });
    setup.save(&manifest)?;
    for &t in &outcome.table.times {
        let d = outcome.table.distances_at(t);
        println!(
            "t = {t}: {}",
            d.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
        );
    }
    Ok(())
}

fn twin(setup: &Setup) -> CliResult<()> {
    let config = &setup.config;
    let regime = match (config.twin.regime, &config.init) {
        (Some(r), _) => r,
        (None, InitSource::Generated(spec)) => spec.regime,
        (None, InitSource::Snapshot(_)) => {
            return Err(CliError::Invalid("twin.regime is required with init.snapshot".into()))
        }
    };
    let perturbation = if config.twin.delta0 == 0.0 {
        Perturbation::None
    } else {
        Perturbation::Field {
            component: config.twin.component,
            delta0: config.twin.delta0,
        }
    };
    if config.t_end <= 0.0 {
        return Err(CliError::Invalid("a twin run needs run.t_end > 0".into()));
    }
    let times: Vec<f64> = (1..)
        .map(|k| k as f64 * config.twin.interval)
        .take_while(|&t| t < config.t_end * (1.0 - 1e-12))
        .collect();
    let spec = TwinSpec {
        base: config.run_config(),
        regime,
        perturbation,
        times,
    };
    let report = twin_run(&spec, &initial_state(config)?, forcing(config)?.as_ref())?;
    output::write_twin_table(&setup.path("twin.csv"), &report)?;
    let mut manifest = setup.manifest("ok", None);
    manifest.files.push("twin.csv".into());
    manifest.results = json!({
        "regime": regime.name(),
        "delta0": report.delta0,
        "kappa": output::num(report.kappa),
        "kappa_fit": output::num(report.kappa_fit),
        "identical": report.identical(),
        "within_envelope": report.within_envelope(),
        "super_exponential": report.super_exponential,
        "breakdown": report.breakdown.map(|b| json!({ "time": b.time, "crossed": b.crossed })),
    });
    setup.save(&manifest)?;
    println!(
        "delta0 = {:e}, kappa = {}, fitted = {}, breakdown = {}",
        report.delta0,
        report.kappa,
        report.kappa_fit,
        report.breakdown.map_or("none".to_string(), |b| format!("t = {}", b.time))
    );
    Ok(())
}

fn mms(setup: &Setup) -> CliResult<()> {
    let config = &setup.config;
    let spec = MmsSpec {
        family: config.mms.family,
        consts: config.consts,
        variant: config.variant,
        scheme: config.mms.scheme,
        resolutions: config.mms.resolutions.clone(),
        dts: config.mms.dts.clone(),
        t_end: config.mms.t_end,
    };
    let report = mms_verify(&spec)?;
    output::write_mms_table(&setup.path("mms.csv"), &report)?;
    let mut manifest = setup.manifest("ok", None);
    manifest.files.push("mms.csv".into());
    manifest.results = json!({
        "family": report.family.name(),
        "scheme": spec.scheme.name(),
        "orders": report.orders.iter().map(|&o| output::num(o)).collect::<Vec<_>>(),
        "fitted_order": output::num(report.fitted_order),
        "self_convergence": report.self_convergence,
    });
    setup.save(&manifest)?;
    for r in &report.spatial {
        println!("n = {:4}  dt = {:.3e}  error = {:.3e}", r.n, r.dt, r.error);
    }
    println!("fitted temporal order {:.3}", report.fitted_order);
    Ok(())
}

fn inspect(path: &Path) -> CliResult<()> {
    let (state, meta) = snapshot::read(path).map_err(|source| CliError::Snapshot {
        path: path.to_path_buf(),
        source,
    })?;
    println!("file     {}", path.display());
    println!("grid     n = {}, L = {}", meta.grid.n(), meta.grid.length());
    println!("time     {}", meta.time);
    let v = meta.variant;
    print!("variant  {}", v.name());
    if let Some(eps) = v.eps() {
        print!(", eps = {eps}");
    }
    if let SystemVariant::PEpsEta { eta, .. } = v {
        print!(", eta = {eta}");
    }
    if let Some(alpha) = v.alpha() {
        print!(", alpha = {alpha}");
    }
    println!();
    println!("{:<6}{:>15}{:>15}{:>15}{:>15}", "field", "min", "max", "mean", "l2");
    let area = meta.grid.length() * meta.grid.length();
    for (name, f) in output::FIELD_NAMES.iter().zip(state.components()) {
        println!(
            "{:<6}{:>15.6e}{:>15.6e}{:>15.6e}{:>15.6e}",
            name,
            f.min(),
            f.max(),
            f.integral() / area,
            f.l2_norm()
        );
    }
    Ok(())
}
