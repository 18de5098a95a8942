//! Solution dumps, error norms, and the convergence and performance studies.

use crate::explicit::{run_explicit, CollocatedState, SsprkTableau, DEFAULT_THETA};
use crate::implicit::{State, StepError};
use crate::mesh::Mesh;
use crate::problems::{instantiate, ProblemError, ProblemSpec};
use crate::riemann::{sample, solve_star};
use crate::timestepping::{run, RunConfig, RunError};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Environment variable capping the number of concurrent study runs.
pub const THREADS_ENV: &str = "SILAG_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("N = {n}: {source}")]
    Run {
        n: usize,
        #[source]
        source: RunError,
    },
    #[error("reference run (N = {n}): {source}")]
    Reference {
        n: usize,
        #[source]
        source: StepError,
    },
    #[error("invalid study: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Ordered `# key = value` lines written ahead of every CSV table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k} = {v}")?;
        }
        Ok(())
    }
}

/// Formats `x` with 17 significant digits.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Field {
    Density,
    Velocity,
    Pressure,
    #[default]
    Energy,
}

impl Field {
    pub fn of(self, row: &DumpRow) -> f64 {
        match self {
            Self::Density => row.rho,
            Self::Velocity => row.u,
            Self::Pressure => row.p,
            Self::Energy => row.e,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Density => "rho",
            Self::Velocity => "u",
            Self::Pressure => "p",
            Self::Energy => "E",
        })
    }
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rho" | "density" => Ok(Self::Density),
            "u" | "velocity" => Ok(Self::Velocity),
            "p" | "pressure" => Ok(Self::Pressure),
            "E" | "e" | "energy" => Ok(Self::Energy),
            other => Err(format!("unknown field '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpRow {
    pub i: usize,
    pub dm: f64,
    pub m_center: f64,
    pub x_center: f64,
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub e: f64,
    pub colour: u8,
}

/// Cell-centred snapshot of a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDump {
    pub t: f64,
    pub rows: Vec<DumpRow>,
}

impl SolutionDump {
    pub const HEADER: &'static str = "i,m_center,x_center,rho,u,p,E,colour";

    pub fn from_state(state: &State, mesh: &Mesh, t: f64) -> Self {
        let uc = state.cell_velocity(mesh);
        let x = state.eulerian_centers(mesh);
        Self::assemble(mesh, t, &state.v, &uc, &state.p, &state.e, &x, |i| {
            state.mats[i].colour()
        })
    }

    pub fn from_collocated(state: &CollocatedState, mesh: &Mesh, t: f64) -> Self {
        let p = state.pressure();
        let x = state.eulerian_centers(mesh);
        Self::assemble(mesh, t, &state.v, &state.u, &p, &state.e, &x, |i| {
            state.mats[i].colour()
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        mesh: &Mesh,
        t: f64,
        v: &[f64],
        u: &[f64],
        p: &[f64],
        e: &[f64],
        x: &[f64],
        colour: impl Fn(usize) -> u8,
    ) -> Self {
        let m = mesh.m_centers();
        let rows = (0..v.len())
            .map(|i| DumpRow {
                i,
                dm: mesh.dm()[i],
                m_center: m[i],
                x_center: x[i],
                rho: 1.0 / v[i],
                u: u[i],
                p: p[i],
                e: e[i],
                colour: colour(i),
            })
            .collect();
        Self { t, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn field(&self, field: Field) -> Vec<f64> {
        self.rows.iter().map(|r| field.of(r)).collect()
    }

    pub fn x_centers(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x_center).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, meta: &Metadata) -> io::Result<()> {
        meta.write(&mut out)?;
        writeln!(out, "# t = {}", full(self.t))?;
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.i,
                full(r.m_center),
                full(r.x_center),
                full(r.rho),
                full(r.u),
                full(r.p),
                full(r.e),
                r.colour
            )?;
        }
        Ok(())
    }
}

/// Mass-weighted discrete error norms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl ErrorReport {
    /// Norms of the pointwise errors `err` with cell masses `weights`.
    pub fn from_errors(err: &[f64], weights: &[f64]) -> Self {
        assert_eq!(err.len(), weights.len(), "error and weight lengths differ");
        let total: f64 = weights.iter().sum();
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let mut linf = 0.0f64;
        for (e, w) in err.iter().zip(weights) {
            l1 += w * e.abs();
            l2 += w * e * e;
            linf = linf.max(e.abs());
        }
        Self {
            l1: l1 / total,
            l2: (l2 / total).sqrt(),
            linf,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.l1, self.l2, self.linf]
    }
}

/// Errors of `field` against `reference` evaluated on each row.
pub fn error_norms(
    solution: &SolutionDump,
    field: Field,
    reference: impl Fn(&DumpRow) -> f64,
) -> ErrorReport {
    let err: Vec<f64> = solution
        .rows
        .iter()
        .map(|r| field.of(r) - reference(r))
        .collect();
    let w: Vec<f64> = solution.rows.iter().map(|r| r.dm).collect();
    ErrorReport::from_errors(&err, &w)
}

/// Observed order between a coarse and a fine grid.
pub fn observed_order(coarse_err: f64, fine_err: f64, n_coarse: usize, n_fine: usize) -> f64 {
    (coarse_err / fine_err).ln() / (n_fine as f64 / n_coarse as f64).ln()
}

/// Conservative remap of cell averages between two partitions of the same
/// mass interval, using a minmod-limited linear profile in each source cell.
pub fn remap_linear(src_edges: &[f64], src: &[f64], dst_edges: &[f64]) -> Vec<f64> {
    let n = src.len();
    assert_eq!(
        src_edges.len(),
        n + 1,
        "source edges must bracket the cells"
    );
    let centre = |j: usize| 0.5 * (src_edges[j] + src_edges[j + 1]);
    let slope: Vec<f64> = (0..n)
        .map(|j| {
            if j == 0 || j + 1 == n {
                return 0.0;
            }
            let l = (src[j] - src[j - 1]) / (centre(j) - centre(j - 1));
            let r = (src[j + 1] - src[j]) / (centre(j + 1) - centre(j));
            if l * r <= 0.0 {
                0.0
            } else if l.abs() < r.abs() {
                l
            } else {
                r
            }
        })
        .collect();
    let mut out = Vec::with_capacity(dst_edges.len().saturating_sub(1));
    let mut j = 0;
    for w in dst_edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        while j + 1 < n && src_edges[j + 1] <= a {
            j += 1;
        }
        let mut k = j;
        let mut integral = 0.0;
        while k < n && src_edges[k] < b {
            let lo = a.max(src_edges[k]);
            let hi = b.min(src_edges[k + 1]);
            if hi > lo {
                let c = centre(k);
                integral +=
                    src[k] * (hi - lo) + 0.5 * slope[k] * ((hi - c).powi(2) - (lo - c).powi(2));
            }
            k += 1;
        }
        out.push(integral / (b - a));
    }
    out
}

/// Worker count for studies: `SILAG_THREADS` if set, else the available
/// parallelism.
pub fn study_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Applies `f` to every item on at most `threads` workers, preserving order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let workers = threads.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new(items.iter().map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= items.len() {
                    break;
                }
                let r = f(&items[k]);
                slots.lock().expect("worker panicked")[k] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("unfilled slot"))
        .collect()
}

/// Settings of the explicit self-reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    /// Reference resolution; defaults to four times the finest grid.
    pub n: Option<usize>,
    pub cfl: f64,
    pub tableau: SsprkTableau,
    pub theta: f64,
    pub field: Field,
    pub threads: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            n: None,
            cfl: 0.8,
            tableau: SsprkTableau::ssprk3(),
            theta: DEFAULT_THETA,
            field: Field::Energy,
            threads: study_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub steps: usize,
    pub errors: ErrorReport,
    /// Orders against the previous grid, absent on the coarsest.
    pub orders: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub field: Field,
    pub reference_n: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub const HEADER: &'static str = "n,steps,L1,L2,Linf,order_L1,order_L2,order_Linf";

    fn from_reports(
        field: Field,
        reference_n: usize,
        reports: Vec<(usize, usize, ErrorReport)>,
    ) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(reports.len());
        for (n, steps, errors) in reports {
            let orders = rows.last().map(|prev| {
                let (c, f) = (prev.errors.as_array(), errors.as_array());
                [0, 1, 2].map(|k| observed_order(c[k], f[k], prev.n, n))
            });
            rows.push(ConvergenceRow {
                n,
                steps,
                errors,
                orders,
            });
        }
        Self {
            field,
            reference_n,
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, meta: &Metadata) -> io::Result<()> {
        meta.write(&mut out)?;
        writeln!(out, "# field = {}", self.field)?;
        writeln!(out, "# reference_n = {}", self.reference_n)?;
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            let [l1, l2, li] = r.errors.as_array().map(full);
            let orders = r
                .orders
                .map_or_else(|| ",,".to_string(), |o| o.map(full).join(","));
            writeln!(out, "{},{},{l1},{l2},{li},{orders}", r.n, r.steps)?;
        }
        Ok(())
    }
}

/// A study that stopped early, with the rows completed before the failure.
#[derive(Debug, Error)]
#[error("{source}")]
pub struct StudyError<T: fmt::Debug> {
    pub partial: T,
    #[source]
    pub source: HarnessError,
}

/// Fine explicit solution used as the convergence reference.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub n: usize,
    pub mesh: Mesh,
    pub state: CollocatedState,
}

impl ReferenceSolution {
    /// Cell averages of `field` remapped onto the mass partition of `mesh`.
    pub fn remapped(&self, field: Field, mesh: &Mesh) -> Vec<f64> {
        let fine = SolutionDump::from_collocated(&self.state, &self.mesh, 0.0).field(field);
        remap_linear(self.mesh.m_edges(), &fine, mesh.m_edges())
    }
}

/// Runs the explicit reference for `spec` on `n` cells.
pub fn reference_solution(
    spec: &ProblemSpec,
    n: usize,
    reference: &ReferenceConfig,
) -> Result<ReferenceSolution, HarnessError> {
    let (mesh, state) = instantiate(spec, n)?;
    let initial = CollocatedState::from_staggered(&state, &mesh);
    let (state, _) = run_explicit(
        &initial,
        &mesh,
        spec.t_end,
        reference.cfl,
        &reference.tableau,
        spec.boundary,
        reference.theta,
    )
    .map_err(|source| HarnessError::Reference { n, source })?;
    Ok(ReferenceSolution { n, mesh, state })
}

fn check_grids(grids: &[usize]) -> Result<(), HarnessError> {
    if grids.is_empty() || grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config(
            "grids must be non-empty and increasing".into(),
        ));
    }
    Ok(())
}

/// Runs `spec` on every grid in `grids` with `config` and measures errors
/// against a fine explicit run remapped onto each grid in mass.
pub fn convergence_study(
    spec: &ProblemSpec,
    grids: &[usize],
    config: &RunConfig,
    reference: &ReferenceConfig,
) -> Result<ConvergenceTable, StudyError<ConvergenceTable>> {
    let field = reference.field;
    let fail = |source| StudyError {
        partial: ConvergenceTable::from_reports(field, 0, vec![]),
        source,
    };
    check_grids(grids).map_err(fail)?;
    let ref_n = reference.n.unwrap_or(4 * grids[grids.len() - 1]);
    // The reference and the grids run side by side.
    let jobs: Vec<Option<usize>> = std::iter::once(None)
        .chain(grids.iter().map(|&n| Some(n)))
        .collect();
    enum Finished {
        Reference(Box<ReferenceSolution>),
        Grid(GridRun),
    }
    let mut results = parallel_map(&jobs, reference.threads, |job| match *job {
        None => {
            reference_solution(spec, ref_n, reference).map(|r| Finished::Reference(Box::new(r)))
        }
        Some(n) => grid_run(spec, n, config).map(Finished::Grid),
    })
    .into_iter();
    let fine = match results.next().expect("reference job") {
        Ok(Finished::Reference(fine)) => fine,
        Ok(Finished::Grid(_)) => unreachable!("first job is the reference"),
        Err(e) => return Err(fail(e)),
    };
    let mut reports = Vec::new();
    for r in results {
        match r {
            Ok(Finished::Grid((n, steps, mesh, dump))) => {
                let target = fine.remapped(field, &mesh);
                reports.push((n, steps, error_norms(&dump, field, |row| target[row.i])));
            }
            Ok(Finished::Reference(_)) => unreachable!("single reference job"),
            Err(source) => {
                return Err(StudyError {
                    partial: ConvergenceTable::from_reports(field, ref_n, reports),
                    source,
                })
            }
        }
    }
    Ok(ConvergenceTable::from_reports(field, ref_n, reports))
}

/// As [`convergence_study`] against a precomputed reference.
pub fn convergence_against(
    spec: &ProblemSpec,
    grids: &[usize],
    config: &RunConfig,
    fine: &ReferenceSolution,
    field: Field,
    threads: usize,
) -> Result<ConvergenceTable, StudyError<ConvergenceTable>> {
    check_grids(grids).map_err(|source| StudyError {
        partial: ConvergenceTable::from_reports(field, fine.n, vec![]),
        source,
    })?;
    let runs = parallel_map(grids, threads, |&n| grid_run(spec, n, config));
    let mut reports = Vec::new();
    for r in runs {
        match r {
            Ok((n, steps, mesh, dump)) => {
                let target = fine.remapped(field, &mesh);
                reports.push((n, steps, error_norms(&dump, field, |row| target[row.i])));
            }
            Err(source) => {
                return Err(StudyError {
                    partial: ConvergenceTable::from_reports(field, fine.n, reports),
                    source,
                })
            }
        }
    }
    Ok(ConvergenceTable::from_reports(field, fine.n, reports))
}

type GridRun = (usize, usize, Mesh, SolutionDump);

fn grid_run(spec: &ProblemSpec, n: usize, config: &RunConfig) -> Result<GridRun, HarnessError> {
    let (mesh, state) = instantiate(spec, n)?;
    let out = run(&state, &mesh, config).map_err(|source| HarnessError::Run { n, source })?;
    let dump = SolutionDump::from_state(&out.state, &mesh, spec.t_end);
    Ok((n, out.steps(), mesh, dump))
}

/// One point of a sampled exact Riemann solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSample {
    pub x: f64,
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    /// Specific total energy.
    pub e: f64,
}

/// Samples the exact solution of a two-state problem at `samples` equally
/// spaced points of the domain at time `t`.
pub fn exact_profile(
    spec: &ProblemSpec,
    t: f64,
    samples: usize,
) -> Result<Vec<ExactSample>, HarnessError> {
    let (left, right) = spec.riemann_states().ok_or_else(|| {
        HarnessError::Config(format!("'{}' is not a two-state problem", spec.name))
    })?;
    if samples < 2 || !(t > 0.0 && t.is_finite()) {
        return Err(HarnessError::Config(
            "need t > 0 and at least two samples".into(),
        ));
    }
    let star = solve_star(&left, &right).map_err(|e| HarnessError::Config(e.to_string()))?;
    let x0 = spec.discontinuity().expect("two-state problem");
    let (a, b) = (spec.x_left, spec.x_right());
    Ok((0..samples)
        .map(|k| {
            let x = a + (b - a) * k as f64 / (samples - 1) as f64;
            let (rho, u, p) = sample(&left, &right, &star, (x - x0) / t);
            let mat = if x < x0 + star.u_star * t {
                left.mat
            } else {
                right.mat
            };
            ExactSample {
                x,
                rho,
                u,
                p,
                e: mat.energy_raw(1.0 / rho, p) + 0.5 * u * u,
            }
        })
        .collect())
}

pub fn write_exact_csv<W: Write>(
    rows: &[ExactSample],
    mut out: W,
    meta: &Metadata,
) -> io::Result<()> {
    meta.write(&mut out)?;
    writeln!(out, "x,rho,u,p,E")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            full(r.x),
            full(r.rho),
            full(r.u),
            full(r.p),
            full(r.e)
        )?;
    }
    Ok(())
}

/// Timing of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfRow {
    pub n: usize,
    pub cfl: f64,
    pub steps: usize,
    pub stages: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub wall: Duration,
}

impl PerfRow {
    pub const HEADER: &'static str = "n,cfl,steps,stages,inner_iters,outer_iters,wall_s,tdu_s";

    /// Wall time per degree of freedom per stage.
    pub fn tdu(&self) -> f64 {
        self.wall.as_secs_f64() / (self.n * self.stages * self.steps).max(1) as f64
    }
}

pub fn write_perf_csv<W: Write>(rows: &[PerfRow], mut out: W, meta: &Metadata) -> io::Result<()> {
    meta.write(&mut out)?;
    writeln!(out, "{}", PerfRow::HEADER)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            full(r.cfl),
            r.steps,
            r.stages,
            r.inner_iterations,
            r.outer_iterations,
            full(r.wall.as_secs_f64()),
            full(r.tdu())
        )?;
    }
    Ok(())
}

/// Times `spec` over every `(N, cfl)` pair. Runs are sequential so that
/// timings do not compete for cores; `base.max_steps` bounds long runs.
pub fn performance_study(
    spec: &ProblemSpec,
    grids: &[usize],
    cfls: &[f64],
    base: &RunConfig,
) -> Result<Vec<PerfRow>, StudyError<Vec<PerfRow>>> {
    let mut rows = Vec::new();
    for &n in grids {
        for &cfl in cfls {
            let (mesh, state) = match instantiate(spec, n) {
                Ok(x) => x,
                Err(e) => {
                    return Err(StudyError {
                        partial: rows,
                        source: e.into(),
                    })
                }
            };
            let config = RunConfig {
                cfl,
                cfl0: base.cfl0 / base.cfl * cfl,
                ..base.clone()
            };
            let start = Instant::now();
            let out = match run(&state, &mesh, &config) {
                Ok(out) => out,
                Err(source) => {
                    return Err(StudyError {
                        partial: rows,
                        source: HarnessError::Run { n, source },
                    })
                }
            };
            let wall = start.elapsed();
            rows.push(PerfRow {
                n,
                cfl,
                steps: out.steps(),
                stages: config.integrator.tableau().stages(),
                inner_iterations: out.records.iter().map(|r| r.inner_iterations).sum(),
                outer_iterations: out.records.iter().map(|r| r.outer_iterations).sum(),
                wall,
            });
        }
    }
    Ok(rows)
}
