mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use silag_core::harness::{
    convergence_study, exact_profile, performance_study, write_exact_csv, write_perf_csv, Field,
    HarnessError, Metadata, ReferenceConfig, SolutionDump,
};
use silag_core::problems::{instantiate, problem, ProblemError, ProblemSpec};
use silag_core::timestepping::{run_with_observer, Integrator, RunConfig, RunError, StepRecord};
use silag_core::{Boundary, DiffusionOrder};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

const BUILD: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("SILAG_BUILD_REV"));

/// Flags that take no value; in a config file they are written `flag = true`.
const SWITCHES: &[&str] = &[
    "ramp",
    "no-ramp",
    "extra-diffusion",
    "no-extra-diffusion",
    "no-pressure-filter",
];

#[derive(Parser)]
#[command(
    name = "silag",
    version,
    about = "Implicit Lagrangian multimaterial Euler solver"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem and write the final solution.
    Run(RunArgs),
    /// Grid convergence study against a fine explicit reference.
    Converge(ConvergeArgs),
    /// Time per degree of freedom per stage over grids and CFL numbers.
    Perf(PerfArgs),
    /// Dump the initial mesh of a problem.
    Mesh(MeshArgs),
    /// Sample the exact solution of a two-state problem.
    Exact(ExactArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Wall,
    Transmissive,
}

#[derive(Args)]
struct SolverArgs {
    /// Problem name from the registry.
    #[arg(long)]
    problem: String,
    #[arg(long)]
    cfl: Option<f64>,
    /// sdirk2 or sdirk3.
    #[arg(long)]
    integrator: Option<Integrator>,
    /// Final time; defaults to the problem's.
    #[arg(long)]
    t_end: Option<f64>,
    /// Start from a tenth of the CFL number and ramp over ten steps.
    #[arg(long, overrides_with = "no_ramp")]
    ramp: bool,
    #[arg(long, overrides_with = "ramp")]
    no_ramp: bool,
    #[arg(long, overrides_with = "no_extra_diffusion")]
    extra_diffusion: bool,
    #[arg(long, overrides_with = "extra_diffusion")]
    no_extra_diffusion: bool,
    /// Reconstruction order of the energy diffusion (1 or 2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    diffusion_order: Option<u8>,
    /// Disable the pressure-spike blend.
    #[arg(long)]
    no_pressure_filter: bool,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    outer_tol: Option<f64>,
    #[arg(long)]
    inner_max: Option<usize>,
    #[arg(long)]
    outer_max: Option<usize>,
    /// Stop after this many steps.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of cells; defaults to the problem's.
    #[arg(long)]
    n: Option<usize>,
    /// Solution file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step diagnostics file.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    grids: Vec<usize>,
    /// Reference resolution; four times the finest grid by default.
    #[arg(long)]
    reference_n: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    reference_cfl: f64,
    /// rho, u, p or E.
    #[arg(long, default_value = "E")]
    field: Field,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerfArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    grids: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    cfls: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    problem: String,
    /// Sampling time; defaults to the problem's final time.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

impl From<ProblemError> for AppError {
    fn from(e: ProblemError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<io::Error> for AppError {
    fn from(e: io::Error) -> Self {
        Self::Config(format!("output: {e}"))
    }
}

impl From<RunError> for AppError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(m) => Self::Config(m),
            other => Self::Solver(other.to_string()),
        }
    }
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Run {
                source: RunError::Config(m),
                ..
            }
            | HarnessError::Config(m) => Self::Config(m),
            HarnessError::Problem(p) => p.into(),
            HarnessError::Io(io) => io.into(),
            other @ (HarnessError::Run { .. } | HarnessError::Reference { .. }) => {
                Self::Solver(other.to_string())
            }
        }
    }
}

impl SolverArgs {
    fn spec(&self) -> Result<ProblemSpec, AppError> {
        let mut spec = problem(&self.problem)?;
        if let Some(t) = self.t_end {
            spec.t_end = t;
        }
        if let Some(b) = self.boundary {
            spec.boundary = match b {
                BoundaryArg::Wall => Boundary::Wall,
                BoundaryArg::Transmissive => Boundary::Transmissive,
            };
        }
        Ok(spec)
    }

    fn config(&self, spec: &ProblemSpec) -> Result<RunConfig, AppError> {
        let mut cfg = spec.run_config();
        let ramp = if self.ramp {
            true
        } else if self.no_ramp {
            false
        } else {
            cfg.ramp_steps > 0
        };
        let cfl = self.cfl.unwrap_or(cfg.cfl);
        cfg = RunConfig {
            cfl,
            cfl0: cfl,
            ramp_steps: 0,
            ..cfg
        };
        if ramp {
            cfg = cfg.with_ramp();
        }
        if let Some(i) = self.integrator {
            cfg.integrator = i;
        }
        let k = &mut cfg.knobs;
        if self.extra_diffusion {
            k.extra_diffusion = true;
        }
        if self.no_extra_diffusion {
            k.extra_diffusion = false;
        }
        if let Some(o) = self.diffusion_order {
            k.energy_diffusion_order = if o == 1 {
                DiffusionOrder::First
            } else {
                DiffusionOrder::Second
            };
        }
        k.pressure_filter = !self.no_pressure_filter;
        k.inner_tol = self.inner_tol.unwrap_or(k.inner_tol);
        k.outer_tol = self.outer_tol.unwrap_or(k.outer_tol);
        k.inner_max = self.inner_max.unwrap_or(k.inner_max);
        k.outer_max = self.outer_max.unwrap_or(k.outer_max);
        cfg.max_steps = self.max_steps;
        cfg.validate()?;
        Ok(cfg)
    }

    fn metadata(&self, cfg: &RunConfig) -> Metadata {
        Metadata::new()
            .with("problem", &self.problem)
            .with("cfl", cfg.cfl)
            .with("integrator", cfg.integrator)
            .with("build", BUILD)
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, AppError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            AppError::Config(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_cmd(args: &RunArgs) -> Result<(), AppError> {
    let spec = args.solver.spec()?;
    let cfg = args.solver.config(&spec)?;
    let n = args.n.unwrap_or(spec.recommended.n);
    let (mesh, initial) = instantiate(&spec, n)?;
    let mut diag = match &args.diagnostics {
        Some(p) => {
            let mut w = output(Some(p))?;
            writeln!(w, "{}", StepRecord::HEADER)?;
            Some(w)
        }
        None => None,
    };
    let mut write_error = None;
    let out = run_with_observer(&initial, &mesh, &cfg, |_, rec| {
        if let Some(w) = diag.as_mut() {
            if let Err(e) = writeln!(w, "{rec}") {
                write_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    if let Some(mut w) = diag {
        w.flush()?;
    }
    let unconverged = out.records.iter().filter(|r| !r.converged).count();
    let t = out.records.last().map_or(0.0, |r| r.t);
    eprintln!(
        "{}: N = {n}, {} steps to t = {t}, {unconverged} unconverged",
        spec.name,
        out.steps()
    );
    let meta = args
        .solver
        .metadata(&cfg)
        .with("n", n)
        .with("steps", out.steps());
    let mut w = output(args.out.as_ref())?;
    SolutionDump::from_state(&out.state, &mesh, t).write_csv(&mut w, &meta)?;
    w.flush()?;
    Ok(())
}

fn converge_cmd(args: &ConvergeArgs) -> Result<(), AppError> {
    let spec = args.solver.spec()?;
    let cfg = args.solver.config(&spec)?;
    let reference = ReferenceConfig {
        n: args.reference_n,
        cfl: args.reference_cfl,
        field: args.field,
        ..ReferenceConfig::default()
    };
    let table = match convergence_study(&spec, &args.grids, &cfg, &reference) {
        Ok(t) => t,
        Err(e) => {
            for r in &e.partial.rows {
                eprintln!("completed N = {}: L1 = {}", r.n, r.errors.l1);
            }
            return Err(e.source.into());
        }
    };
    let meta = args
        .solver
        .metadata(&cfg)
        .with("reference_cfl", reference.cfl);
    let mut w = output(args.out.as_ref())?;
    table.write_csv(&mut w, &meta)?;
    w.flush()?;
    Ok(())
}

fn perf_cmd(args: &PerfArgs) -> Result<(), AppError> {
    let spec = args.solver.spec()?;
    let cfg = args.solver.config(&spec)?;
    let rows = performance_study(&spec, &args.grids, &args.cfls, &cfg).map_err(|e| e.source)?;
    let mut w = output(args.out.as_ref())?;
    write_perf_csv(&rows, &mut w, &args.solver.metadata(&cfg))?;
    w.flush()?;
    Ok(())
}

fn mesh_cmd(args: &MeshArgs) -> Result<(), AppError> {
    let spec = problem(&args.problem)?;
    let n = args.n.unwrap_or(spec.recommended.n);
    let (mesh, state) = instantiate(&spec, n)?;
    let mut w = output(args.out.as_ref())?;
    Metadata::new()
        .with("problem", &spec.name)
        .with("n", n)
        .with("build", BUILD)
        .write(&mut w)?;
    mesh.write_dump(&mut w, &state.v)?;
    w.flush()?;
    Ok(())
}

fn exact_cmd(args: &ExactArgs) -> Result<(), AppError> {
    let spec = problem(&args.problem)?;
    let t = args.t.unwrap_or(spec.t_end);
    let rows = exact_profile(&spec, t, args.samples)?;
    let meta = Metadata::new()
        .with("problem", &spec.name)
        .with("t", t)
        .with("build", BUILD);
    let mut w = output(args.out.as_ref())?;
    write_exact_csv(&rows, &mut w, &meta)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args().collect(), SWITCHES) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    let result = match &cli.command {
        Command::Run(a) => run_cmd(a),
        Command::Converge(a) => converge_cmd(a),
        Command::Perf(a) => perf_cmd(a),
        Command::Mesh(a) => mesh_cmd(a),
        Command::Exact(a) => exact_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
