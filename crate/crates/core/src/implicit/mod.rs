//! The implicit Euler step operator on the staggered grid.
//!
//! One step runs an outer loop around a fixed-point wave-equation pressure
//! predictor, then filters the specific volume, updates the energy
//! conservatively and removes isolated pressure spikes.

mod energy;
mod tridiag;
mod volume_filter;
mod wave;

pub use energy::{blend_pressure_filter, conservative_energy_update, energy_fluxes, BlendResult};
pub use tridiag::{thomas_solve, thomas_solve_into};
pub use volume_filter::{
    extra_diffusion_pass, redistribute_volume_diffusion, target_filtered_volume,
};
pub use wave::{
    conservative_volume_update, interpolate_cell_velocity, rusanov_volume_guess,
    solve_wave_pressure, update_velocity, WaveSolution,
};

use crate::eos::{self, EosError, MaterialParams};
use crate::mesh::Mesh;
use std::sync::Arc;
use thiserror::Error;
use wave::{interpolate_cell_velocity_into, wave_fixed_point, WaveGuess};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    Wall,
    #[default]
    Transmissive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionOrder {
    First,
    #[default]
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverKnobs {
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub extra_diffusion: bool,
    pub energy_diffusion_order: DiffusionOrder,
    pub boundary: Boundary,
    /// Disables the pressure-spike blend when false (paired-run diagnostics).
    pub pressure_filter: bool,
}

impl Default for SolverKnobs {
    fn default() -> Self {
        Self {
            inner_tol: 1e-10,
            outer_tol: 1e-9,
            inner_max: 100,
            outer_max: 50,
            extra_diffusion: false,
            energy_diffusion_order: DiffusionOrder::Second,
            boundary: Boundary::Transmissive,
            pressure_filter: true,
        }
    }
}

impl SolverKnobs {
    pub fn validate(&self) -> Result<(), StepError> {
        let ok_tol = |t: f64| t > 0.0 && t <= 1e-2;
        if !ok_tol(self.inner_tol) || !ok_tol(self.outer_tol) {
            return Err(StepError::InvalidInput(
                "tolerances must lie in (0, 1e-2]".into(),
            ));
        }
        if self.inner_max == 0 || self.outer_max == 0 {
            return Err(StepError::InvalidInput(
                "iteration caps must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("non-positive specific volume {value} in cell {cell}")]
    NonPositiveVolume { cell: usize, value: f64 },
    #[error("non-positive p + pi = {value} in cell {cell}")]
    NonPositivePressure { cell: usize, value: f64 },
    #[error("non-finite value in cell {cell}")]
    NonFinite { cell: usize },
    #[error("invalid step input: {0}")]
    InvalidInput(String),
}

impl StepError {
    pub fn cell(&self) -> Option<usize> {
        match self {
            Self::NonPositiveVolume { cell, .. }
            | Self::NonPositivePressure { cell, .. }
            | Self::NonFinite { cell } => Some(*cell),
            Self::InvalidInput(_) => None,
        }
    }
}

/// Cell-centred `(V, E, p)`, edge velocities and per-cell materials.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub mats: Arc<[MaterialParams]>,
    /// Pressure consistent with `(V, E, interpolated cell velocity)`.
    pub p: Vec<f64>,
    /// Eulerian position of the left boundary edge.
    pub x_left: f64,
}

impl State {
    /// Builds a state from specific volume, edge velocity and pressure.
    pub fn from_primitives(
        mesh: &Mesh,
        v: Vec<f64>,
        u: Vec<f64>,
        p: Vec<f64>,
        mats: Arc<[MaterialParams]>,
    ) -> Result<Self, StepError> {
        let n = mesh.len();
        if v.len() != n || p.len() != n || mats.len() != n || u.len() != n + 1 {
            return Err(StepError::InvalidInput(
                "state arrays do not match the mesh".into(),
            ));
        }
        let mut state = Self {
            v,
            e: vec![0.0; n],
            u,
            mats,
            p,
            x_left: mesh.x_left(),
        };
        state.refresh_energy(mesh)?;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn cell_velocity(&self, mesh: &Mesh) -> Vec<f64> {
        interpolate_cell_velocity(&self.u, mesh)
    }

    pub fn eulerian_edges(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.eulerian_edges_from(self.x_left, &self.v)
    }

    pub fn eulerian_centers(&self, mesh: &Mesh) -> Vec<f64> {
        self.eulerian_edges(mesh)
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Recomputes `E` from `(V, p, u)`.
    pub fn refresh_energy(&mut self, mesh: &Mesh) -> Result<(), StepError> {
        let uc = self.cell_velocity(mesh);
        for i in 0..self.len() {
            let e = eos::internal_energy(self.v[i], self.p[i], &self.mats[i])
                .map_err(|err| eos_to_step(err, i))?;
            self.e[i] = e + 0.5 * uc[i] * uc[i];
        }
        Ok(())
    }

    /// Recomputes `p` from `(V, E, u)` without positivity checks.
    pub fn refresh_pressure_unchecked(&mut self, mesh: &Mesh) {
        let uc = self.cell_velocity(mesh);
        for i in 0..self.len() {
            self.p[i] = self.mats[i].pressure_raw(self.v[i], self.e[i] - 0.5 * uc[i] * uc[i]);
        }
    }

    /// First cell violating `V > 0`, `p + pi > 0` or finiteness.
    pub fn check_positivity(&self) -> Result<(), StepError> {
        for i in 0..self.len() {
            let (v, p, e) = (self.v[i], self.p[i], self.e[i]);
            if !(v.is_finite() && p.is_finite() && e.is_finite()) {
                return Err(StepError::NonFinite { cell: i });
            }
            if v <= 0.0 {
                return Err(StepError::NonPositiveVolume { cell: i, value: v });
            }
            let ppi = p + self.mats[i].pi();
            if ppi <= 0.0 {
                return Err(StepError::NonPositivePressure {
                    cell: i,
                    value: ppi,
                });
            }
        }
        Ok(())
    }

    pub fn min_volume(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_pressure_margin(&self) -> f64 {
        self.p
            .iter()
            .zip(self.mats.iter())
            .map(|(p, m)| p + m.pi())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn density(&self) -> Vec<f64> {
        self.v.iter().map(|v| 1.0 / v).collect()
    }

    /// Wavespeed squared per cell, with a magnitude-based value where the
    /// state is not admissible.
    pub(crate) fn wavespeed_sq_fallback(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let m = &self.mats[i];
                let v = self.v[i];
                let p = self.p[i];
                if v > 0.0 && p + m.pi() > 0.0 {
                    m.wavespeed_sq_raw(v, p)
                } else {
                    (m.gamma() * (p.abs() + m.pi()) / v.abs().max(f64::MIN_POSITIVE))
                        .max(f64::MIN_POSITIVE)
                }
            })
            .collect()
    }
}

fn eos_to_step(err: EosError, cell: usize) -> StepError {
    match err {
        EosError::NonPositiveVolume(value) => StepError::NonPositiveVolume { cell, value },
        EosError::NonPositiveStiffenedPressure { p, pi } => StepError::NonPositivePressure {
            cell,
            value: p + pi,
        },
        _ => StepError::NonFinite { cell },
    }
}

/// Per-step record of the implicit operator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub max_blend_weight: f64,
    /// Total-energy change introduced by the pressure blend.
    pub energy_drift: f64,
    pub drift_bound: f64,
    pub min_volume: f64,
    pub min_pressure_margin: f64,
    /// Energy fluxes through the left and right boundary edges.
    pub boundary_energy_flux: (f64, f64),
    /// Wave-equation pressures in the first and last cells.
    pub boundary_pressure: (f64, f64),
}

/// Advances `state` by one implicit Euler step of size `dt`.
pub fn implicit_euler_step(
    state: &State,
    mesh: &Mesh,
    dt: f64,
    knobs: &SolverKnobs,
) -> Result<(State, StepDiagnostics), StepError> {
    let n = mesh.len();
    if state.len() != n || state.u.len() != n + 1 || state.mats.len() != n || state.p.len() != n {
        return Err(StepError::InvalidInput(
            "state does not match the mesh".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let mats = &state.mats;

    let v_rusanov = rusanov_volume_guess(state, mesh, dt, knobs.boundary);
    let mut a2 = state.wavespeed_sq_fallback();
    let mut prev_v = v_rusanov.clone();
    let mut prev_p = state.p.clone();
    let mut u_cell = vec![0.0; n];
    let mut diag = StepDiagnostics::default();

    let mut result = None;
    for outer in 1..=knobs.outer_max {
        let guess = WaveGuess {
            v: &prev_v,
            p: &prev_p,
        };
        let wave = wave_fixed_point(state, mesh, dt, knobs, guess, &mut a2)?;
        diag.inner_iterations += wave.iterations;

        let mut v_star = target_filtered_volume(&wave.v_c, mesh);
        if knobs.extra_diffusion {
            v_star = extra_diffusion_pass(&v_star, mesh);
        }
        let v_new = redistribute_volume_diffusion(&wave.v_c, &v_star, mesh, dt);

        interpolate_cell_velocity_into(&wave.u, mesh, &mut u_cell);
        let flux = energy_fluxes(
            &wave.p,
            &wave.u,
            &v_new,
            &u_cell,
            mats,
            mesh,
            knobs.energy_diffusion_order,
            knobs.boundary,
        );
        let e_c = conservative_energy_update(&state.e, &flux, mesh, dt);
        let blend = if knobs.pressure_filter {
            blend_pressure_filter(&e_c, &wave.p, &v_new, &u_cell, mats, mesh)
        } else {
            BlendResult {
                e: e_c,
                weights: vec![0.0; n],
                drift: 0.0,
                drift_bound: 0.0,
            }
        };

        let p_new: Vec<f64> = (0..n)
            .map(|i| mats[i].pressure_raw(v_new[i], blend.e[i] - 0.5 * u_cell[i] * u_cell[i]))
            .collect();
        let x_left = state.x_left + dt * wave.u[0];
        let next = State {
            v: v_new,
            e: blend.e,
            u: wave.u,
            mats: Arc::clone(mats),
            p: p_new,
            x_left,
        };
        next.check_positivity()?;

        let mut change = 0.0f64;
        for i in 0..n {
            let dv_rel = (next.v[i] - prev_v[i]).abs() / next.v[i];
            let dp_rel = (next.p[i] - prev_p[i]).abs() / (next.p[i].abs() + mats[i].pi());
            change = change.max(dv_rel + dp_rel);
        }
        diag.outer_iterations = outer;
        diag.max_blend_weight = blend.weights.iter().copied().fold(0.0, f64::max);
        diag.energy_drift = blend.drift;
        diag.drift_bound = blend.drift_bound;
        diag.boundary_energy_flux = (flux[0], flux[n]);
        diag.boundary_pressure = (wave.p[0], wave.p[n - 1]);
        prev_v.clone_from(&next.v);
        prev_p.clone_from(&next.p);
        let done = change < knobs.outer_tol;
        result = Some(next);
        if done {
            diag.converged = true;
            break;
        }
    }
    let next = result.expect("outer_max >= 1");
    diag.min_volume = next.min_volume();
    diag.min_pressure_margin = next.min_pressure_margin();
    Ok((next, diag))
}


#[cfg(test)]
mod tests {
    use super::tests_support::*;
    use super::*;
    use crate::mesh::build_uniform_mass_mesh;

    #[test]
    fn uniform_state_is_fixed_point() {
        let mesh = build_uniform_mass_mesh(2.0, 30).unwrap();
        for &(u, boundary) in &[(0.0, Boundary::Wall), (0.7, Boundary::Transmissive)] {
            let state = uniform_state(&mesh, 0.8, u, 3.0, 1.4, 0.5);
            for dt in [1e-3, 1.0, 1e3] {
                let knobs = SolverKnobs {
                    boundary,
                    ..SolverKnobs::default()
                };
                let (next, diag) = implicit_euler_step(&state, &mesh, dt, &knobs).unwrap();
                assert!(diag.converged);
                assert_eq!(diag.outer_iterations, 1);
                for i in 0..30 {
                    assert!((next.v[i] - state.v[i]).abs() <= f64::EPSILON * state.v[i]);
                    assert!((next.e[i] - state.e[i]).abs() <= f64::EPSILON * state.e[i]);
                    assert!((next.p[i] - state.p[i]).abs() <= 2.0 * f64::EPSILON * state.p[i]);
                }
                assert_eq!(next.u, state.u);
            }
        }
    }

    #[test]
    fn linear_ramp_velocity_response() {
        let mesh = build_uniform_mass_mesh(1.0, 10).unwrap();
        let p: Vec<f64> = (0..10).map(|i| 1.0 + 0.01 * i as f64).collect();
        let state = with_pressure(&mesh, 1.0, &p, 1.4, 0.0);
        let dt = 1e-3;
        let knobs = SolverKnobs {
            boundary: Boundary::Wall,
            ..SolverKnobs::default()
        };
        let wave = solve_wave_pressure(&state, &mesh, dt, &knobs).unwrap();
        let u = update_velocity(&wave.p, &state.u, &mesh, dt, Boundary::Wall);
        for j in 1..10 {
            let expected = -dt * (wave.p[j] - wave.p[j - 1]) / 0.1;
            assert!((u[j] - expected).abs() <= 1e-15 * expected.abs());
        }
    }

    #[test]
    fn positivity_error_carries_cell() {
        let mesh = build_uniform_mass_mesh(1.0, 10).unwrap();
        let mut state = uniform_state(&mesh, 1.0, 0.0, 1.0, 1.4, 0.0);
        state.v[3] = -0.1;
        assert_eq!(state.check_positivity().unwrap_err().cell(), Some(3));
        state.v[3] = 1.0;
        state.p[7] = -1.0;
        assert!(matches!(
            state.check_positivity(),
            Err(StepError::NonPositivePressure { cell: 7, .. })
        ));
    }
}
