//! Argument definitions and the three subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cpt_core::analysis::{fit_dephasing, DephasingParam, FitOptions};
use cpt_core::evolution::phase_averaged_with;
use cpt_core::sweep::{SCHEMA_VERSION, TOOL_VERSION};
use cpt_core::DensityMatrix4;
use serde::Serialize;

use crate::config::{Override, RunConfig};
use crate::exit::CliError;
use crate::output::{ensure_dir, read_observed, write_bytes, write_json, write_with};
use crate::reproduce::{self, Figure, Options};

#[derive(Debug, Parser)]
#[command(name = "cptsim", version, about = "Four-level CPT simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `drive.fc_ghz=5.86`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<Override>,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Shot-noise seed, recorded in every output
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Integrator step, ns.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Number of relative-phase samples.
    #[arg(long, global = true)]
    pub phases: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate one pulse and write the phase-averaged trajectory.
    Simulate,
    /// Regenerate a figure dataset with its built-in parameters.
    Reproduce {
        /// fig2, fig3, fig4 or fig4-inset.
        figure: Figure,
    },
    /// Fit dephasing times to an observed P₂(t) trajectory CSV.
    Fit {
        observed: PathBuf,
        /// Free parameter (tphi_01, tphi_02, tphi_12). Repeatable.
        #[arg(long = "free")]
        free: Vec<DephasingParam>,
    },
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate => simulate(g),
        Command::Reproduce { figure } => reproduce(g, *figure),
        Command::Fit { observed, free } => fit(g, observed, free),
    }
}

fn load(g: &Global) -> Result<RunConfig, CliError> {
    let mut overrides = g.overrides.clone();
    let set = |path: &str, v: toml::Value| Override {
        path: path.split('.').map(str::to_string).collect(),
        value: v,
    };
    if let Some(dt) = g.dt {
        overrides.push(set("integrator.dt_ns", toml::Value::Float(dt)));
    }
    if let Some(n) = g.phases {
        overrides.push(set("integrator.n_phases", toml::Value::Integer(n as i64)));
    }
    RunConfig::load(g.config.as_deref(), &overrides)
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    schema_version: u32,
    tool_version: &'a str,
    rng_seed: u64,
    config: &'a RunConfig,
    #[serde(flatten)]
    extra: T,
}

#[derive(Serialize)]
struct TrajectoryMeta {
    n_rows: usize,
    final_time_ns: f64,
    final_populations: [f64; 4],
    renormalizations: usize,
    positivity_warnings: usize,
}

fn simulate(g: &Global) -> Result<(), CliError> {
    let cfg = load(g)?;
    let ctx = cfg.context()?;
    let seed = g.seed.unwrap_or(0);
    let traj = phase_averaged_with(
        &DensityMatrix4::ground(),
        &ctx.device,
        &ctx.drive,
        &ctx.decoherence,
        &ctx.integrator,
        &ctx.hamiltonian,
        ctx.n_phases,
    )?;
    let echo = RunConfig::echo(&ctx, cfg.measurement()?.as_ref());
    let rows = traj.samples_with_final();
    ensure_dir(&g.out)?;
    write_with(&g.out, "trajectory.csv", |w| {
        crate::output::write_trajectory_csv(w, &rows, seed, &echo)?;
        Ok(())
    })?;
    write_bytes(&g.out, "run_config.toml", echo.to_toml()?.as_bytes())?;
    write_json(
        &g.out,
        "trajectory.json",
        &Sidecar {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            rng_seed: seed,
            config: &echo,
            extra: TrajectoryMeta {
                n_rows: rows.len(),
                final_time_ns: traj.final_time,
                final_populations: traj.final_populations(),
                renormalizations: traj.renormalizations,
                positivity_warnings: traj.positivity_warnings,
            },
        },
    )?;
    Ok(())
}

fn reproduce(g: &Global, figure: Figure) -> Result<(), CliError> {
    let cfg = load(g)?;
    if cfg.preset.is_some() || cfg.device.is_some() || cfg.drive.is_some() || cfg.decoherence.is_some() || cfg.sweep.is_some() {
        return Err(CliError::input(
            "reproduce uses built-in parameters; only [integrator] and [measurement] may be configured",
        ));
    }
    let integ = cfg.integrator.clone().unwrap_or_default();
    if integ.record_stride.is_some() || integ.positivity_check.is_some() || integ.positivity_tolerance.is_some() {
        return Err(CliError::input("reproduce accepts only integrator.dt_ns and integrator.n_phases"));
    }
    let opts = Options {
        seed: g.seed.unwrap_or(0),
        dt_ns: integ.dt_ns,
        n_phases: integ.n_phases,
        measurement: cfg.measurement()?.unwrap_or_default(),
    };
    let dir = g.out.as_path();
    match figure {
        Figure::Fig2 => reproduce::fig2(dir, &opts).map(drop),
        Figure::Fig3 => reproduce::fig3(dir, &opts).map(drop),
        Figure::Fig4 => reproduce::fig4(dir, &opts).map(drop),
        Figure::Fig4Inset => reproduce::fig4_inset(dir, &opts).map(drop),
    }
}

fn fit(g: &Global, observed: &std::path::Path, free: &[DephasingParam]) -> Result<(), CliError> {
    if free.is_empty() {
        return Err(CliError::input("fit needs at least one --free parameter"));
    }
    let cfg = load(g)?;
    let ctx = cfg.context()?;
    let data = read_observed(observed)?;
    let report = fit_dephasing(&data, &ctx, free, &FitOptions::default())?;
    let echo = RunConfig::echo(&ctx, None);
    ensure_dir(&g.out)?;
    write_json(
        &g.out,
        "fit_report.json",
        &Sidecar {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            rng_seed: g.seed.unwrap_or(0),
            config: &echo,
            extra: &report,
        },
    )?;
    for p in &report.params {
        log::info!("{} = {:.4} ± {:.4} {}{}", p.name, p.value, p.uncertainty, p.unit, if p.flat { " (flat)" } else { "" });
    }
    if !report.converged {
        return Err(CliError::fit(format!(
            "simplex did not converge in {} iterations (rss {:.3e}); report written anyway",
            report.iterations, report.rss
        )));
    }
    Ok(())
}
