//! Singly diagonally implicit Runge-Kutta integrators written as sequences
//! of implicit Euler steps, CFL step control and the run loop.

use crate::eos;
use crate::implicit::{implicit_euler_step, SolverKnobs, State, StepDiagnostics, StepError};
use crate::mesh::Mesh;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

/// Diagonal coefficient of the three-stage scheme.
pub const SDIRK3_GAMMA: f64 = 0.435866521508459;

/// Stage-combination coefficients of an SDIRK scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdirkTableau {
    order: u8,
    gamma: f64,
    c20: f64,
    c21: f64,
    c30: f64,
    c31: f64,
    c32: f64,
    /// Butcher coefficients `a21, a31, a32` and node `c2`.
    butcher: [f64; 4],
}

impl SdirkTableau {
    pub fn sdirk2() -> Self {
        let gamma = 1.0 - 1.0 / 2f64.sqrt();
        let a21 = 1.0 - gamma;
        let c21 = a21 / gamma;
        Self {
            order: 2,
            gamma,
            c20: 1.0 - c21,
            c21,
            c30: 0.0,
            c31: 0.0,
            c32: 0.0,
            butcher: [a21, 0.0, 0.0, 1.0],
        }
    }

    pub fn sdirk3() -> Self {
        let g = SDIRK3_GAMMA;
        let ka = 1.0 - 4.0 * g + 2.0 * g * g;
        let kb = 3.0 * g * (2.0 - 3.0 * g + g * g) - 1.0;
        let kc = (2.0 / 3.0 - 3.0 * g + 2.0 * g * g) / ka;
        let kd = -3.0 * ka * ka / (4.0 * kb);
        let a21 = kc - g;
        let a31 = 1.0 - kd - g;
        let a32 = kd;
        let c21 = a21 / g;
        let c32 = a32 / g;
        let c31 = (a31 - c32 * a21) / g;
        Self {
            order: 3,
            gamma: g,
            c20: 1.0 - c21,
            c21,
            c30: 1.0 - c31 - c32,
            c31,
            c32,
            butcher: [a21, a31, a32, kc],
        }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn stages(&self) -> usize {
        self.order as usize
    }

    /// `(c20, c21)`.
    pub fn second_stage(&self) -> (f64, f64) {
        (self.c20, self.c21)
    }

    /// `(c30, c31, c32)`.
    pub fn third_stage(&self) -> (f64, f64, f64) {
        (self.c30, self.c31, self.c32)
    }

    /// Lower-triangular Butcher coefficients `(a21, a31, a32)` and the
    /// second node.
    pub fn butcher(&self) -> (f64, f64, f64, f64) {
        let [a21, a31, a32, c2] = self.butcher;
        (a21, a31, a32, c2)
    }
}

/// Runs the stage sequence of `tableau`. `euler(q, stage)` applies one
/// implicit Euler step of size `gamma dt`; `combine` forms linear
/// combinations of states.
pub fn sdirk_sequence<T, E>(
    q0: &T,
    tableau: &SdirkTableau,
    mut euler: impl FnMut(&T, usize) -> Result<T, E>,
    combine: impl Fn(&[(f64, &T)]) -> T,
) -> Result<T, E> {
    let q1 = euler(q0, 0)?;
    let q2_star = combine(&[(tableau.c20, q0), (tableau.c21, &q1)]);
    let q2 = euler(&q2_star, 1)?;
    if tableau.order == 2 {
        return Ok(q2);
    }
    let q3_star = combine(&[(tableau.c30, q0), (tableau.c31, &q1), (tableau.c32, &q2)]);
    euler(&q3_star, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Sdirk2,
    Sdirk3,
}

impl Integrator {
    pub fn tableau(self) -> SdirkTableau {
        match self {
            Self::Sdirk2 => SdirkTableau::sdirk2(),
            Self::Sdirk3 => SdirkTableau::sdirk3(),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sdirk2 => "sdirk2",
            Self::Sdirk3 => "sdirk3",
        })
    }
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sdirk2" => Ok(Self::Sdirk2),
            "sdirk3" => Ok(Self::Sdirk3),
            other => Err(format!("unknown integrator '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cfl: f64,
    /// CFL number of the first step when ramping.
    pub cfl0: f64,
    /// Number of steps over which the CFL number ramps; 0 disables the ramp.
    pub ramp_steps: usize,
    pub t_end: f64,
    pub integrator: Integrator,
    pub knobs: SolverKnobs,
    /// Stops after this many steps even if `t_end` is not reached.
    pub max_steps: Option<usize>,
}

impl RunConfig {
    pub fn new(cfl: f64, t_end: f64, integrator: Integrator) -> Self {
        Self {
            cfl,
            cfl0: cfl,
            ramp_steps: 0,
            t_end,
            integrator,
            knobs: SolverKnobs::default(),
            max_steps: None,
        }
    }

    /// Ramps from `cfl / 10` over ten steps.
    pub fn with_ramp(mut self) -> Self {
        self.cfl0 = self.cfl / 10.0;
        self.ramp_steps = 10;
        self
    }

    pub fn with_knobs(mut self, knobs: SolverKnobs) -> Self {
        self.knobs = knobs;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = Some(max_steps);
        self
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(RunError::Config(format!(
                "cfl must be positive, got {}",
                self.cfl
            )));
        }
        if !(self.cfl0 > 0.0 && self.cfl0 <= self.cfl) {
            return Err(RunError::Config(format!(
                "cfl0 must lie in (0, cfl], got {}",
                self.cfl0
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(RunError::Config(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        self.knobs
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))
    }

    /// Effective CFL number at `step` (zero-based).
    pub fn cfl_at(&self, step: usize) -> f64 {
        if self.ramp_steps == 0 {
            return self.cfl;
        }
        let frac = (step as f64 / self.ramp_steps as f64).min(1.0);
        self.cfl0 + (self.cfl - self.cfl0) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("step {step} (t = {time}, stage {stage}) failed: {source}")]
    Step {
        step: usize,
        time: f64,
        stage: usize,
        #[source]
        source: StepError,
    },
}

impl RunError {
    pub fn cell(&self) -> Option<usize> {
        match self {
            Self::Step { source, .. } => source.cell(),
            Self::Config(_) => None,
        }
    }
}

/// Stage failure inside one SDIRK step.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("stage {stage}: {source}")]
pub struct StageError {
    pub stage: usize,
    #[source]
    pub source: StepError,
}

/// Lagrangian step `k_eff min dm / a`, clipped so that `t + dt <= t_end`.
pub fn compute_dt(
    state: &State,
    mesh: &Mesh,
    config: &RunConfig,
    step: usize,
    t: f64,
) -> Result<(f64, f64), StepError> {
    let mut limit = f64::INFINITY;
    for i in 0..state.len() {
        let a2 = eos::wavespeed_sq(state.v[i], state.p[i], &state.mats[i]).map_err(|_| {
            if state.v[i] <= 0.0 {
                StepError::NonPositiveVolume {
                    cell: i,
                    value: state.v[i],
                }
            } else {
                StepError::NonPositivePressure {
                    cell: i,
                    value: state.p[i] + state.mats[i].pi(),
                }
            }
        })?;
        limit = limit.min(mesh.dm()[i] / a2.sqrt());
    }
    let k_eff = config.cfl_at(step);
    let dt = k_eff * limit;
    Ok((dt.min(config.t_end - t), k_eff))
}

/// Linear combination of staggered states on `(V, u, E)`; pressure is
/// recomputed without positivity checks.
pub fn combine_states(terms: &[(f64, &State)], mesh: &Mesh) -> State {
    let first = terms[0].1;
    let lin = |get: fn(&State) -> &Vec<f64>| {
        let mut out = vec![0.0; get(first).len()];
        for (c, s) in terms {
            for (o, x) in out.iter_mut().zip(get(s)) {
                *o += c * x;
            }
        }
        out
    };
    let mut state = State {
        v: lin(|s| &s.v),
        e: lin(|s| &s.e),
        u: lin(|s| &s.u),
        mats: Arc::clone(&first.mats),
        p: vec![0.0; first.len()],
        x_left: terms.iter().map(|(c, s)| c * s.x_left).sum(),
    };
    state.refresh_pressure_unchecked(mesh);
    state
}

/// Summary of the implicit solves inside one SDIRK step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageSummary {
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub max_blend_weight: f64,
    pub energy_drift: f64,
    pub drift_bound: f64,
    pub stages: Vec<StepDiagnostics>,
}

/// One SDIRK step of size `dt`.
pub fn sdirk_step(
    state: &State,
    mesh: &Mesh,
    dt: f64,
    tableau: &SdirkTableau,
    knobs: &SolverKnobs,
) -> Result<(State, StageSummary), StageError> {
    let mut summary = StageSummary {
        converged: true,
        ..StageSummary::default()
    };
    let h = tableau.gamma * dt;
    let next = sdirk_sequence(
        state,
        tableau,
        |q, stage| {
            let (out, diag) = implicit_euler_step(q, mesh, h, knobs)
                .map_err(|source| StageError { stage, source })?;
            summary.inner_iterations += diag.inner_iterations;
            summary.outer_iterations += diag.outer_iterations;
            summary.converged &= diag.converged;
            summary.max_blend_weight = summary.max_blend_weight.max(diag.max_blend_weight);
            summary.energy_drift += diag.energy_drift;
            summary.drift_bound += diag.drift_bound;
            summary.stages.push(diag);
            Ok(out)
        },
        |terms| combine_states(terms, mesh),
    )?;
    Ok((next, summary))
}

/// One line of the per-step diagnostics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub k_eff: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub min_volume: f64,
    pub min_pressure_margin: f64,
    pub energy_drift: f64,
    pub drift_bound: f64,
    pub converged: bool,
}

impl StepRecord {
    pub const HEADER: &'static str =
        "step,t,dt,k_eff,inner_iters,outer_iters,minV,minPpPi,energy_drift";
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
            self.step,
            self.t,
            self.dt,
            self.k_eff,
            self.inner_iterations,
            self.outer_iterations,
            self.min_volume,
            self.min_pressure_margin,
            self.energy_drift
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: State,
    pub records: Vec<StepRecord>,
}

impl RunOutput {
    pub fn steps(&self) -> usize {
        self.records.len()
    }
}

/// Advances `initial` to `config.t_end`.
pub fn run(initial: &State, mesh: &Mesh, config: &RunConfig) -> Result<RunOutput, RunError> {
    run_with_observer(initial, mesh, config, |_, _| {})
}

/// As [`run`], calling `observer` after every accepted step.
pub fn run_with_observer(
    initial: &State,
    mesh: &Mesh,
    config: &RunConfig,
    mut observer: impl FnMut(&State, &StepRecord),
) -> Result<RunOutput, RunError> {
    config.validate()?;
    let tableau = config.integrator.tableau();
    let mut state = initial.clone();
    let mut records = Vec::new();
    let mut t = 0.0;
    let mut step = 0;
    while t < config.t_end && config.max_steps.is_none_or(|cap| step < cap) {
        let fail = |stage, source| RunError::Step {
            step,
            time: t,
            stage,
            source,
        };
        let (dt, k_eff) = compute_dt(&state, mesh, config, step, t).map_err(|e| fail(0, e))?;
        let (next, summary) = sdirk_step(&state, mesh, dt, &tableau, &config.knobs)
            .map_err(|e| fail(e.stage, e.source))?;
        state = next;
        t = if config.t_end - t <= dt {
            config.t_end
        } else {
            t + dt
        };
        let record = StepRecord {
            step,
            t,
            dt,
            k_eff,
            inner_iterations: summary.inner_iterations,
            outer_iterations: summary.outer_iterations,
            min_volume: state.min_volume(),
            min_pressure_margin: state.min_pressure_margin(),
            energy_drift: summary.energy_drift,
            drift_bound: summary.drift_bound,
            converged: summary.converged,
        };
        observer(&state, &record);
        records.push(record);
        step += 1;
    }
    Ok(RunOutput { state, records })
}
