//! Batch driver: validate configurations, solve, simulate, cross-check and summarize.

mod artifacts;
mod oracle;
mod report;
mod sample;

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use axivortex::config::Config;
use axivortex::dual::{solve_dual, DualState};
use axivortex::dynamics::{simulate, Schedule, Step};
use axivortex::measure::ParticleMeasure;
use axivortex::model::{validate_assumptions, Model};
use axivortex::reconstruction::{meridional, reconstruct, stability_check, write_boundary_csv, write_meridional_csv, FieldGrid};
use axivortex::Error;
use clap::{Parser, Subcommand};
use serde::Serialize;

use artifacts::Artifacts;

#[derive(Parser)]
#[command(name = "axivortex", version, about = "Free-boundary axisymmetric vortex solver")]
struct Cli {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed of the particle sampler.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Initial particles as CSV `i,upsilon,zed,weight`; sampled when omitted.
    #[arg(long, global = true)]
    atoms: Option<PathBuf>,
    /// Number of sampled particles.
    #[arg(long, global = true, default_value_t = 8)]
    count: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and the model assumptions.
    Validate,
    /// Solve the dual problem once for the initial particles.
    Solve,
    /// Run the time-stepping scheme.
    Simulate,
    /// Cross-check the solvers against independent computations.
    Oracle,
    /// Summarize `diagnostics.json` from a previous simulation.
    Report,
}

const INVALID_CONFIG: u8 = 2;
const NOT_CONVERGED: u8 = 3;
const BOUND_VIOLATED: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_) | Error::Parse(_) | Error::InvalidMeasure(_)) => INVALID_CONFIG,
        Some(Error::NotConverged(_) | Error::EmptyCell(_)) => NOT_CONVERGED,
        Some(Error::SupportBound { .. } | Error::StepBound { .. } | Error::Precondition(_) | Error::LeftDomain { .. }) => {
            BOUND_VIOLATED
        }
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VORTEX_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

struct Setup {
    config: Config,
    model: Model,
    sigma: ParticleMeasure,
    atoms_source: String,
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    match &cli.config {
        Some(path) => match Config::load(path) {
            Err(Error::Io(e)) => Err(anyhow::Error::new(Error::InvalidConfig(format!("{}: {e}", path.display())))),
            other => Ok(other?),
        },
        None => Ok(Config::default()),
    }
}

fn setup(cli: &Cli) -> anyhow::Result<Setup> {
    let config = load_config(cli)?;
    let model = config.model();
    let (sigma, atoms_source) = match &cli.atoms {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::InvalidMeasure(format!("{}: {e}", path.display())))?;
            (ParticleMeasure::read_csv(file)?, path.display().to_string())
        }
        None => {
            let atoms = sample::default_atoms(cli.count, config.model.initial_radius, cli.seed);
            (ParticleMeasure::uniform(atoms)?, format!("sampled:{}", cli.count))
        }
    };
    Ok(Setup { config, model, sigma, atoms_source })
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Validate => validate(cli),
        Command::Solve => solve(cli),
        Command::Simulate => run_simulation(cli),
        Command::Oracle => run_oracle(cli),
        Command::Report => report::summarize(&cli.out).map(|_| 0),
    }
}

#[derive(Serialize)]
struct Validation<'a> {
    assumptions: &'a axivortex::model::AssumptionReport,
    precondition: Option<String>,
}

fn validate(cli: &Cli) -> anyhow::Result<u8> {
    let config = load_config(cli)?;
    let model = config.model();
    let r_max = model.r_of_s(model.s_cap(config.solver.pole_margin))?;
    let report = validate_assumptions(&model, r_max, config.time.horizon);
    let precondition = config.check_precondition().err().map(|e| e.to_string());
    for c in &report.checks {
        println!("{:<6} {} margin {:.6} {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.margin, c.detail);
    }
    if let Some(p) = &precondition {
        println!("precondition FAIL {p}");
    }
    let mut out = Artifacts::new(&cli.out)?;
    out.json("validation.json", &Validation { assumptions: &report, precondition: precondition.clone() })?;
    out.finish("validate", cli.seed, "", &config.to_toml_string())?;
    Ok(if !report.all_passed() {
        INVALID_CONFIG
    } else if precondition.is_some() {
        BOUND_VIOLATED
    } else {
        0
    })
}

#[derive(Serialize)]
struct CellRecord {
    i: usize,
    psi: f64,
    mass: f64,
    s_bar: Option<f64>,
    z_bar: Option<f64>,
}

/// Particles, boundary, potentials and (optionally) fields for one time level.
fn write_level(out: &mut Artifacts, config: &Config, model: &Model, k: usize, sigma: &ParticleMeasure, state: &DualState) -> anyhow::Result<()> {
    out.write(&format!("particles_t{k}.csv"), |w| Ok(sigma.write_csv(w)?))?;
    out.write(&format!("boundary_t{k}.csv"), |w| Ok(write_boundary_csv(model, &state.boundary, w)?))?;
    if config.output.fields {
        let grid = FieldGrid::new(model, &state.boundary, config.output.field_nr, config.output.field_nz)?;
        let fields = reconstruct(model, &state.potential(sigma), &state.boundary, grid);
        out.write(&format!("fields_t{k}.csv"), |w| Ok(fields.write_csv(w)?))?;
    }
    Ok(())
}

fn field_grid(config: &Config, model: &Model, state: &DualState) -> axivortex::Result<FieldGrid> {
    FieldGrid::new(model, &state.boundary, config.output.field_nr, config.output.field_nz)
}

fn solve(cli: &Cli) -> anyhow::Result<u8> {
    let Setup { config, model, sigma, atoms_source } = setup(cli)?;
    let mut out = Artifacts::new(&cli.out)?;
    let solved = out.time("solve", |_| solve_dual(&model, &sigma, &config.solver, None));
    let state = match solved {
        Ok(s) => s,
        Err(Error::NotConverged(report)) => {
            out.json("solve_report.json", &*report)?;
            out.finish("solve", cli.seed, &atoms_source, &config.to_toml_string())?;
            return Err(Error::NotConverged(report).into());
        }
        Err(e) => return Err(e.into()),
    };
    out.time("write", |out| -> anyhow::Result<()> {
        out.json("solve_report.json", &state.report)?;
        let bary = state.evaluation.barycenters(&model);
        let cells: Vec<CellRecord> = (0..sigma.len())
            .map(|i| CellRecord {
                i,
                psi: state.psi[i],
                mass: state.evaluation.cell_mass[i],
                s_bar: bary[i].map(|b| b[0]),
                z_bar: bary[i].map(|b| b[1]),
            })
            .collect();
        out.json("cells.json", &cells)?;
        write_level(out, &config, &model, 0, &sigma, &state)?;
        let fields = reconstruct(&model, &state.potential(&sigma), &state.boundary, field_grid(&config, &model, &state)?);
        out.json("stability.json", &stability_check(&fields, sigma.atoms()))?;
        Ok(())
    })?;
    let r = &state.report;
    println!("J = {:.10}  K = {:.10}  gap = {:.3e}  iterations = {}", r.dual, r.primal, r.gap, r.iterations);
    out.finish("solve", cli.seed, &atoms_source, &config.to_toml_string())?;
    Ok(0)
}

fn run_simulation(cli: &Cli) -> anyhow::Result<u8> {
    let Setup { config, model, sigma, atoms_source } = setup(cli)?;
    config.check_precondition()?;
    let schedule = Schedule::from_config(&config);
    let tau = schedule.step();
    let mut out = Artifacts::new(&cli.out)?;
    let mut diagnostics = Vec::new();
    let mut previous: Option<Step> = None;
    let result = out.time("simulate", |out| {
        simulate(&model, sigma, &config.solver, &schedule, |step| {
            diagnostics.push(step.diagnostics.clone());
            write_level(out, &config, &model, step.index, &step.sigma, &step.state).map_err(io_error)?;
            if let Some(prev) = previous.take() {
                if config.output.meridional {
                    let grid = field_grid(&config, &model, &prev.state)?;
                    let fields = reconstruct(&model, &prev.state.potential(&prev.sigma), &prev.state.boundary, grid);
                    let rows = meridional(&model, &fields, &prev.barycenters, &step.barycenters, tau)?;
                    out.write(&format!("meridional_t{}.csv", prev.index), |w| Ok(write_meridional_csv(&rows, w)?))
                        .map_err(io_error)?;
                }
            }
            previous = Some(step.clone());
            Ok(())
        })
    });
    out.json("diagnostics.json", &diagnostics)?;
    out.finish("simulate", cli.seed, &atoms_source, &config.to_toml_string())?;
    let traj = result?;
    println!("{} levels written to {}", traj.steps.len(), cli.out.display());
    Ok(0)
}

fn io_error(e: anyhow::Error) -> Error {
    match e.downcast::<Error>() {
        Ok(e) => e,
        Err(e) => Error::Io(std::io::Error::other(e.to_string())),
    }
}

fn run_oracle(cli: &Cli) -> anyhow::Result<u8> {
    let Setup { config, model, sigma, atoms_source } = setup(cli)?;
    let mut out = Artifacts::new(&cli.out)?;
    let state = out.time("solve", |_| solve_dual(&model, &sigma, &config.solver, None))?;
    let report = out.time("oracle", |_| oracle::run(&model, &sigma, &state, &config.solver, cli.seed));
    for c in &report.checks {
        println!("{:<32} {} {:.3e} (tol {:.1e})", c.name, if c.passed { "pass" } else { "FAIL" }, c.value, c.tolerance);
    }
    out.json("oracle.json", &report)?;
    out.finish("oracle", cli.seed, &atoms_source, &config.to_toml_string())?;
    Ok(if report.passed { 0 } else { 1 })
}

