//! Wave-equation pressure predictor and the kinematic updates it drives.

use super::tridiag::thomas_solve_into;
use super::{Boundary, SolverKnobs, State, StepError};
use crate::eos::MaterialParams;
use crate::mesh::Mesh;

/// Cell velocities from edge velocities, weighted by the dual spacings.
///
/// Boundary cells take the cell width itself as the missing dual spacing.
pub fn interpolate_cell_velocity(u: &[f64], mesh: &Mesh) -> Vec<f64> {
    let mut out = vec![0.0; mesh.len()];
    interpolate_cell_velocity_into(u, mesh, &mut out);
    out
}

pub(crate) fn interpolate_cell_velocity_into(u: &[f64], mesh: &Mesh, out: &mut [f64]) {
    let n = mesh.len();
    let dm = mesh.dm();
    let dual = mesh.dm_dual();
    debug_assert_eq!(u.len(), n + 1);
    for i in 0..n {
        let left = if i == 0 { dm[0] } else { dual[i - 1] };
        let right = if i + 1 == n { dm[n - 1] } else { dual[i] };
        out[i] = (right * u[i] + left * u[i + 1]) / (left + right);
    }
}

/// Boundary edge velocity imposed at the new time level.
#[inline]
pub(crate) fn boundary_velocity(boundary: Boundary, u_old: f64) -> f64 {
    match boundary {
        Boundary::Wall => 0.0,
        Boundary::Transmissive => u_old,
    }
}

/// `u_{i+1/2} -= dt/dm_{i+1/2} (p_{i+1} - p_i)` on interior edges.
pub fn update_velocity(
    p_new: &[f64],
    u_old: &[f64],
    mesh: &Mesh,
    dt: f64,
    boundary: Boundary,
) -> Vec<f64> {
    let mut out = vec![0.0; u_old.len()];
    update_velocity_into(p_new, u_old, mesh, dt, boundary, &mut out);
    out
}

pub(crate) fn update_velocity_into(
    p_new: &[f64],
    u_old: &[f64],
    mesh: &Mesh,
    dt: f64,
    boundary: Boundary,
    out: &mut [f64],
) {
    let n = mesh.len();
    let dual = mesh.dm_dual();
    out[0] = boundary_velocity(boundary, u_old[0]);
    out[n] = boundary_velocity(boundary, u_old[n]);
    for j in 1..n {
        out[j] = u_old[j] - dt / dual[j - 1] * (p_new[j] - p_new[j - 1]);
    }
}

/// `V_c = V + dt/dm (u_{i+1/2} - u_{i-1/2})`.
pub fn conservative_volume_update(v_old: &[f64], u_new: &[f64], mesh: &Mesh, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; v_old.len()];
    conservative_volume_update_into(v_old, u_new, mesh, dt, &mut out);
    out
}

pub(crate) fn conservative_volume_update_into(
    v_old: &[f64],
    u_new: &[f64],
    mesh: &Mesh,
    dt: f64,
    out: &mut [f64],
) {
    for (i, (o, (&v, &dm))) in out.iter_mut().zip(v_old.iter().zip(mesh.dm())).enumerate() {
        *o = v + dt / dm * (u_new[i + 1] - u_new[i]);
    }
}

/// Rusanov-type volume predictor with flow-velocity signal speeds.
pub fn rusanov_volume_guess(state: &State, mesh: &Mesh, dt: f64, boundary: Boundary) -> Vec<f64> {
    let n = mesh.len();
    let u_cell = interpolate_cell_velocity(&state.u, mesh);
    let v = &state.v;
    let mut flux = vec![0.0; n + 1];
    flux[0] = -boundary_velocity(boundary, state.u[0]);
    flux[n] = -boundary_velocity(boundary, state.u[n]);
    for j in 1..n {
        let (l, r) = (j - 1, j);
        let speed = (u_cell[l].abs() / v[l]).max(u_cell[r].abs() / v[r]);
        flux[j] = -0.5 * (u_cell[l] + u_cell[r]) - 0.5 * speed * (v[r] - v[l]);
    }
    (0..n)
        .map(|i| v[i] - dt / mesh.dm()[i] * (flux[i + 1] - flux[i]))
        .collect()
}

/// Growth of the frozen `a^2` when an iterate leaves the admissible set.
const STIFFEN: f64 = 4.0;

#[inline]
fn admissible(v: f64, p: f64, mat: &MaterialParams) -> bool {
    v > 0.0 && p + mat.pi() > 0.0 && v.is_finite() && p.is_finite()
}

/// `a^2(V, p)`, or a stiffened `previous` when `(V, p)` is inadmissible;
/// a larger `a^2` damps the compression that produced the bad iterate.
#[inline]
pub(crate) fn frozen_wavespeed_sq(v: f64, p: f64, mat: &MaterialParams, previous: f64) -> f64 {
    if admissible(v, p, mat) {
        mat.wavespeed_sq_raw(v, p)
    } else {
        STIFFEN * previous
    }
}

/// Result of one converged (or capped) inner fixed-point loop.
#[derive(Debug, Clone)]
pub struct WaveSolution {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub v_c: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Starting point of the inner loop.
pub(crate) struct WaveGuess<'a> {
    /// Volume and pressure used for the first frozen `a^2`.
    pub v: &'a [f64],
    pub p: &'a [f64],
}

pub(crate) fn wave_fixed_point(
    state: &State,
    mesh: &Mesh,
    dt: f64,
    knobs: &SolverKnobs,
    guess: WaveGuess<'_>,
    a2: &mut [f64],
) -> Result<WaveSolution, StepError> {
    let n = mesh.len();
    let dm = mesh.dm();
    let dual = mesh.dm_dual();
    let mats = &state.mats;
    let p_old = &state.p;

    let mut u_tilde = state.u.clone();
    u_tilde[0] = boundary_velocity(knobs.boundary, state.u[0]);
    u_tilde[n] = boundary_velocity(knobs.boundary, state.u[n]);

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_prev = guess.p.to_vec();
    let mut u = vec![0.0; n + 1];
    let mut v_c = vec![0.0; n];

    for i in 0..n {
        a2[i] = frozen_wavespeed_sq(guess.v[i], guess.p[i], &mats[i], a2[i]);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < knobs.inner_max {
        iterations += 1;
        for i in 0..n {
            let c = a2[i] * dt / dm[i];
            let lo = if i > 0 { -c * dt / dual[i - 1] } else { 0.0 };
            let up = if i + 1 < n { -c * dt / dual[i] } else { 0.0 };
            lower[i] = lo;
            upper[i] = up;
            diag[i] = 1.0 + lo.abs() + up.abs();
            // Solve for the increment over p^n so a uniform state is reproduced exactly.
            let mut r = -c * (u_tilde[i + 1] - u_tilde[i]);
            if i > 0 {
                r -= lo * (p_old[i - 1] - p_old[i]);
            }
            if i + 1 < n {
                r -= up * (p_old[i + 1] - p_old[i]);
            }
            rhs[i] = r;
        }
        thomas_solve_into(&lower, &diag, &upper, &rhs, &mut scratch, &mut p);
        for (pi, p0) in p.iter_mut().zip(p_old) {
            *pi += p0;
        }

        let mut change = 0.0f64;
        for i in 0..n {
            if !p[i].is_finite() {
                return Err(StepError::NonFinite { cell: i });
            }
            let scale = (p[i].abs() + mats[i].pi()).max(f64::MIN_POSITIVE);
            change = change.max((p[i] - p_prev[i]).abs() / scale);
        }
        update_velocity_into(&p, &state.u, mesh, dt, knobs.boundary, &mut u);
        conservative_volume_update_into(&state.v, &u, mesh, dt, &mut v_c);
        std::mem::swap(&mut p_prev, &mut p);
        let valid = (0..n).all(|i| admissible(v_c[i], p_prev[i], &mats[i]));
        if change < knobs.inner_tol && valid {
            converged = true;
            break;
        }
        for i in 0..n {
            a2[i] = frozen_wavespeed_sq(v_c[i], p_prev[i], &mats[i], a2[i]);
        }
    }
    Ok(WaveSolution {
        p: p_prev,
        u,
        v_c,
        iterations,
        converged,
    })
}

/// Runs the predictor from the Rusanov volume guess and the old pressure.
pub fn solve_wave_pressure(
    state: &State,
    mesh: &Mesh,
    dt: f64,
    knobs: &SolverKnobs,
) -> Result<WaveSolution, StepError> {
    let v_guess = rusanov_volume_guess(state, mesh, dt, knobs.boundary);
    let mut a2 = state.wavespeed_sq_fallback();
    wave_fixed_point(
        state,
        mesh,
        dt,
        knobs,
        WaveGuess {
            v: &v_guess,
            p: &state.p,
        },
        &mut a2,
    )
}
