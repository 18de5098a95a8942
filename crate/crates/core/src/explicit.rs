//! Explicit Lagrangian reference scheme: piecewise-linear reconstruction,
//! exact Riemann fluxes and strong-stability-preserving Runge-Kutta shells.

use crate::eos::MaterialParams;
use crate::implicit::{interpolate_cell_velocity, Boundary, State, StepError};
use crate::mesh::Mesh;
use crate::riemann::{solve_star, RiemannState};
use std::sync::Arc;

/// Default parameter of the generalized minmod limiter.
pub const DEFAULT_THETA: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsprkTableau {
    order: u8,
    c1: f64,
    c2: f64,
}

impl SsprkTableau {
    pub fn ssprk2() -> Self {
        Self {
            order: 2,
            c1: 0.5,
            c2: 0.0,
        }
    }

    pub fn ssprk3() -> Self {
        Self {
            order: 3,
            c1: 0.25,
            c2: 2.0 / 3.0,
        }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn stages(&self) -> usize {
        self.order as usize
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }
}

/// Runs the convex-combination stage sequence of `tableau` with the Euler
/// operator `euler` and the affine combination `mix(a, x, b, y) = a x + b y`.
pub fn ssprk_sequence<T, E>(
    q0: &T,
    tableau: &SsprkTableau,
    mut euler: impl FnMut(&T, usize) -> Result<T, E>,
    mix: impl Fn(f64, &T, f64, &T) -> T,
) -> Result<T, E> {
    let q1 = euler(q0, 0)?;
    let h1 = euler(&q1, 1)?;
    let q2 = mix(1.0 - tableau.c1, q0, tableau.c1, &h1);
    if tableau.order == 2 {
        return Ok(q2);
    }
    let h2 = euler(&q2, 2)?;
    Ok(mix(1.0 - tableau.c2, q0, tableau.c2, &h2))
}

/// Cell-collocated conserved state `(V, u, E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocatedState {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub mats: Arc<[MaterialParams]>,
    /// Eulerian position of the left boundary face.
    pub x_left: f64,
}

impl CollocatedState {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn pressure(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.mats[i].pressure_raw(self.v[i], self.e[i] - 0.5 * self.u[i] * self.u[i]))
            .collect()
    }

    /// Converts a staggered state; cell velocities are edge interpolants and
    /// the pressure is kept.
    pub fn from_staggered(state: &State, mesh: &Mesh) -> Self {
        let u = interpolate_cell_velocity(&state.u, mesh);
        let e = (0..state.len())
            .map(|i| state.mats[i].energy_raw(state.v[i], state.p[i]) + 0.5 * u[i] * u[i])
            .collect();
        Self {
            v: state.v.clone(),
            u,
            e,
            mats: Arc::clone(&state.mats),
            x_left: state.x_left,
        }
    }

    /// Converts to the staggered layout; edge velocities are mass-weighted
    /// averages of the adjacent cells. The round trip is lossy.
    pub fn to_staggered(&self, mesh: &Mesh) -> Result<State, StepError> {
        let n = self.len();
        let dm = mesh.dm();
        let mut u = vec![0.0; n + 1];
        u[0] = self.u[0];
        u[n] = self.u[n - 1];
        for j in 1..n {
            u[j] = (dm[j - 1] * self.u[j - 1] + dm[j] * self.u[j]) / (dm[j - 1] + dm[j]);
        }
        let mut state = State::from_primitives(
            mesh,
            self.v.clone(),
            u,
            self.pressure(),
            Arc::clone(&self.mats),
        )?;
        state.x_left = self.x_left;
        Ok(state)
    }

    pub fn eulerian_centers(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.eulerian_edges_from(self.x_left, &self.v)
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn check_positivity(&self) -> Result<(), StepError> {
        let p = self.pressure();
        for i in 0..self.len() {
            if !(self.v[i].is_finite() && p[i].is_finite() && self.u[i].is_finite()) {
                return Err(StepError::NonFinite { cell: i });
            }
            if self.v[i] <= 0.0 {
                return Err(StepError::NonPositiveVolume {
                    cell: i,
                    value: self.v[i],
                });
            }
            let margin = p[i] + self.mats[i].pi();
            if margin <= 0.0 {
                return Err(StepError::NonPositivePressure {
                    cell: i,
                    value: margin,
                });
            }
        }
        Ok(())
    }

    /// `a x + b y` on `(V, u, E)`.
    pub fn mix(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        let comb = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(s, t)| a * s + b * t).collect();
        Self {
            v: comb(&x.v, &y.v),
            u: comb(&x.u, &y.u),
            e: comb(&x.e, &y.e),
            mats: Arc::clone(&x.mats),
            x_left: a * x.x_left + b * y.x_left,
        }
    }

    /// Lagrangian stable step `min dm / a`.
    pub fn stable_dt(&self, mesh: &Mesh) -> f64 {
        let p = self.pressure();
        (0..self.len())
            .map(|i| mesh.dm()[i] / self.mats[i].wavespeed_sq_raw(self.v[i], p[i]).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Generalized minmod of the one-sided and centred slopes.
#[inline]
fn generalized_minmod(left: f64, centre: f64, right: f64, theta: f64) -> f64 {
    let (a, b, c) = (theta * left, centre, theta * right);
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
struct Primitive {
    v: f64,
    u: f64,
    p: f64,
}

/// One forward Euler step of the explicit scheme.
pub fn explicit_step(
    state: &CollocatedState,
    mesh: &Mesh,
    dt: f64,
    boundary: Boundary,
    theta: f64,
) -> Result<CollocatedState, StepError> {
    let n = state.len();
    if mesh.len() != n || n < 2 {
        return Err(StepError::InvalidInput(
            "state does not match the mesh".into(),
        ));
    }
    let dm = mesh.dm();
    let dual = mesh.dm_dual();
    let p = state.pressure();
    let prim: Vec<Primitive> = (0..n)
        .map(|i| Primitive {
            v: state.v[i],
            u: state.u[i],
            p: p[i],
        })
        .collect();

    // Face values on the left (minus) and right (plus) side of each cell.
    let mut minus = prim.clone();
    let mut plus = prim.clone();
    for i in 1..n - 1 {
        let slope = |f: fn(&Primitive) -> f64| {
            let (a, b, c) = (f(&prim[i - 1]), f(&prim[i]), f(&prim[i + 1]));
            generalized_minmod(
                (b - a) / dual[i - 1],
                (c - a) / (dual[i - 1] + dual[i]),
                (c - b) / dual[i],
                theta,
            )
        };
        let half = 0.5 * dm[i];
        let sv = slope(|q| q.v) * half;
        let su = slope(|q| q.u) * half;
        let sp = slope(|q| q.p) * half;
        let pi = state.mats[i].pi();
        let lo = Primitive {
            v: prim[i].v - sv,
            u: prim[i].u - su,
            p: prim[i].p - sp,
        };
        let hi = Primitive {
            v: prim[i].v + sv,
            u: prim[i].u + su,
            p: prim[i].p + sp,
        };
        if lo.v > 0.0 && hi.v > 0.0 && lo.p + pi > 0.0 && hi.p + pi > 0.0 {
            minus[i] = lo;
            plus[i] = hi;
        }
    }

    let riemann =
        |l: Primitive, lm: MaterialParams, r: Primitive, rm: MaterialParams, face: usize| {
            let to_state = |q: Primitive, m| RiemannState {
                rho: 1.0 / q.v,
                u: q.u,
                p: q.p,
                mat: m,
            };
            solve_star(&to_state(l, lm), &to_state(r, rm))
                .map(|s| (s.u_star, s.p_star))
                .map_err(|_| StepError::NonFinite {
                    cell: face.min(n - 1),
                })
        };
    let ghost = |q: Primitive| match boundary {
        Boundary::Transmissive => q,
        Boundary::Wall => Primitive { u: -q.u, ..q },
    };

    let mut flux = vec![(0.0, 0.0); n + 1];
    flux[0] = riemann(ghost(minus[0]), state.mats[0], minus[0], state.mats[0], 0)?;
    flux[n] = riemann(
        plus[n - 1],
        state.mats[n - 1],
        ghost(plus[n - 1]),
        state.mats[n - 1],
        n,
    )?;
    for j in 1..n {
        flux[j] = riemann(plus[j - 1], state.mats[j - 1], minus[j], state.mats[j], j)?;
    }

    let mut next = state.clone();
    next.x_left += dt * flux[0].0;
    for i in 0..n {
        let (ul, pl) = flux[i];
        let (ur, pr) = flux[i + 1];
        let r = dt / dm[i];
        next.v[i] += r * (ur - ul);
        next.u[i] -= r * (pr - pl);
        next.e[i] -= r * (ur * pr - ul * pl);
    }
    next.check_positivity()?;
    Ok(next)
}

/// One SSPRK step built from [`explicit_step`].
pub fn ssprk_step(
    state: &CollocatedState,
    mesh: &Mesh,
    dt: f64,
    tableau: &SsprkTableau,
    boundary: Boundary,
    theta: f64,
) -> Result<CollocatedState, StepError> {
    ssprk_sequence(
        state,
        tableau,
        |q, _| explicit_step(q, mesh, dt, boundary, theta),
        CollocatedState::mix,
    )
}

/// Advances to `t_end` with `dt = cfl * min dm / a`, clipping the last step.
pub fn run_explicit(
    initial: &CollocatedState,
    mesh: &Mesh,
    t_end: f64,
    cfl: f64,
    tableau: &SsprkTableau,
    boundary: Boundary,
    theta: f64,
) -> Result<(CollocatedState, usize), StepError> {
    let mut state = initial.clone();
    let mut t = 0.0;
    let mut steps = 0;
    while t < t_end {
        let mut dt = cfl * state.stable_dt(mesh);
        if t + dt >= t_end {
            dt = t_end - t;
        }
        state = ssprk_step(&state, mesh, dt, tableau, boundary, theta)?;
        t = if t + dt >= t_end { t_end } else { t + dt };
        steps += 1;
    }
    Ok((state, steps))
}
