//! Benchmark registry and instantiation onto meshes.

use crate::eos::{EosError, MaterialParams};
use crate::implicit::{Boundary, SolverKnobs, State, StepError};
use crate::mesh::{
    auto_tune_mesh_params, build_layered_mesh, build_piecewise_uniform_mass_mesh,
    build_uniform_x_mesh, half_pair_spacings, DensityProfile, Mesh, MeshError,
};
use crate::riemann::RiemannState;
use crate::timestepping::{Integrator, RunConfig};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem '{0}'")]
    Unknown(String),
    #[error("invalid problem setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error(transparent)]
    State(#[from] StepError),
}

/// Constant state on `[previous break, x_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x_end: f64,
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub mat: MaterialParams,
}

/// Smooth modulation of the segment pressures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureProfile {
    Piecewise,
    /// `p (1 + amplitude exp(-(x - x0)^2 / ell^2))`.
    Gaussian {
        x0: f64,
        ell: f64,
        amplitude: f64,
    },
    /// Cosine bump of amplitude ten on the constant background pressure.
    CosineBump {
        x0: f64,
        ell: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshStrategy {
    /// Uniform mass within each segment, breaks on edges.
    UniformMass,
    /// Uniform `dx`; breaks must land on edges.
    UniformX,
    /// Smoothly graded spacing across every interface of equal-width segments.
    Graded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommended {
    pub n: usize,
    pub cfl: f64,
    pub integrator: Integrator,
    pub extra_diffusion: bool,
    pub ramp: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub x_left: f64,
    pub segments: Vec<Segment>,
    pub pressure: PressureProfile,
    pub t_end: f64,
    pub boundary: Boundary,
    pub mesh: MeshStrategy,
    pub recommended: Recommended,
}

impl ProblemSpec {
    pub fn x_right(&self) -> f64 {
        self.segments.last().map_or(self.x_left, |s| s.x_end)
    }

    pub fn breaks(&self) -> Vec<f64> {
        std::iter::once(self.x_left)
            .chain(self.segments.iter().map(|s| s.x_end))
            .collect()
    }

    /// `integral rho dx` of the initial data.
    pub fn total_mass(&self) -> f64 {
        let b = self.breaks();
        self.segments
            .iter()
            .enumerate()
            .map(|(k, s)| s.rho * (b[k + 1] - b[k]))
            .sum()
    }

    /// Left and right states of a two-segment Riemann problem.
    pub fn riemann_states(&self) -> Option<(RiemannState, RiemannState)> {
        match (self.segments.as_slice(), self.pressure) {
            ([l, r], PressureProfile::Piecewise) => Some((
                RiemannState {
                    rho: l.rho,
                    u: l.u,
                    p: l.p,
                    mat: l.mat,
                },
                RiemannState {
                    rho: r.rho,
                    u: r.u,
                    p: r.p,
                    mat: r.mat,
                },
            )),
            _ => None,
        }
    }

    /// Initial discontinuity position of a two-segment problem.
    pub fn discontinuity(&self) -> Option<f64> {
        (self.segments.len() == 2).then(|| self.segments[0].x_end)
    }

    pub fn run_config(&self) -> RunConfig {
        let knobs = SolverKnobs {
            boundary: self.boundary,
            extra_diffusion: self.recommended.extra_diffusion,
            ..SolverKnobs::default()
        };
        let cfg = RunConfig::new(
            self.recommended.cfl,
            self.t_end,
            self.recommended.integrator,
        )
        .with_knobs(knobs);
        if self.recommended.ramp {
            cfg.with_ramp()
        } else {
            cfg
        }
    }

    fn pressure_at(&self, base: f64, x: f64) -> f64 {
        match self.pressure {
            PressureProfile::Piecewise => base,
            PressureProfile::Gaussian { x0, ell, amplitude } => {
                base * (1.0 + amplitude * (-(x - x0) * (x - x0) / (ell * ell)).exp())
            }
            PressureProfile::CosineBump { x0, ell } => stratified_pressure_ic(x, x0, ell, base),
        }
    }
}

/// Cosine pressure bump; the support is clipped to where the bump exceeds
/// `0.01 p0`, outside of which the background `p0` is used.
pub fn stratified_pressure_ic(x: f64, x0: f64, ell: f64, p0: f64) -> f64 {
    if (x - x0).abs() >= 0.5 * ell {
        return p0;
    }
    let p = p0 * (1.0 + 10.0 * (2.0 * PI * (x - x0) / ell).cos());
    if p > 0.01 * p0 {
        p
    } else {
        p0
    }
}

fn mat(gamma: f64, pi: f64, colour: u8) -> MaterialParams {
    MaterialParams::new(gamma, pi, colour).expect("registry materials are valid")
}

fn seg(x_end: f64, rho: f64, u: f64, p: f64, m: MaterialParams) -> Segment {
    Segment {
        x_end,
        rho,
        u,
        p,
        mat: m,
    }
}

fn recommended(n: usize, cfl: f64) -> Recommended {
    Recommended {
        n,
        cfl,
        integrator: Integrator::Sdirk2,
        extra_diffusion: false,
        ramp: false,
    }
}

#[allow(clippy::too_many_arguments)]
fn riemann(
    name: &str,
    (x_left, xd, x_right): (f64, f64, f64),
    left: (f64, f64, f64),
    right: (f64, f64, f64),
    mats: (MaterialParams, MaterialParams),
    t_end: f64,
    mesh: MeshStrategy,
    rec: Recommended,
) -> ProblemSpec {
    ProblemSpec {
        name: name.into(),
        x_left,
        segments: vec![
            seg(xd, left.0, left.1, left.2, mats.0),
            seg(x_right, right.0, right.1, right.2, mats.1),
        ],
        pressure: PressureProfile::Piecewise,
        t_end,
        boundary: Boundary::Transmissive,
        mesh,
        // Discontinuous data: start from a tenth of the target CFL number.
        recommended: Recommended { ramp: true, ..rec },
    }
}

/// Alternating layers on `[0, 50]` with the pressure bump centred at 25.
fn stratified(
    name: &str,
    rho: (f64, f64),
    gamma: (f64, f64),
    pi: (f64, f64),
    n_layers: usize,
    t_end: f64,
) -> ProblemSpec {
    let (x_left, x_right) = (0.0, 50.0);
    let width = (x_right - x_left) / n_layers as f64;
    let heavy = mat(gamma.0, pi.0, 1);
    let light = mat(gamma.1, pi.1, 0);
    let segments = (0..n_layers)
        .map(|k| {
            let x_end = if k + 1 == n_layers {
                x_right
            } else {
                x_left + (k + 1) as f64 * width
            };
            // Colour mod2(1 + floor(x / L)) is one on even layers.
            if k % 2 == 0 {
                seg(x_end, rho.0, 0.0, 100.0, heavy)
            } else {
                seg(x_end, rho.1, 0.0, 100.0, light)
            }
        })
        .collect();
    ProblemSpec {
        name: name.into(),
        x_left,
        segments,
        pressure: PressureProfile::CosineBump { x0: 25.0, ell: 2.5 },
        t_end,
        boundary: Boundary::Transmissive,
        mesh: MeshStrategy::Graded,
        recommended: Recommended {
            ramp: true,
            ..recommended(100 * n_layers, 10.0)
        },
    }
}

/// Every registered benchmark.
pub fn registry() -> Vec<ProblemSpec> {
    let air = mat(1.4, 0.0, 0);
    let pair = (air, air);
    let unit = (0.0, 0.5, 1.0);
    let um = MeshStrategy::UniformMass;
    let ed = |r: Recommended| Recommended {
        extra_diffusion: true,
        ..r
    };
    let mut list = vec![
        riemann(
            "sod",
            unit,
            (1.0, 0.0, 1.0),
            (0.125, 0.0, 0.1),
            pair,
            0.25,
            um,
            recommended(1000, 10.0),
        ),
        riemann(
            "lax",
            unit,
            (0.445, 0.698, 3.528),
            (0.5, 0.0, 0.571),
            pair,
            0.1,
            um,
            recommended(1000, 4.0),
        ),
        riemann(
            "toro1",
            (0.0, 0.4, 1.0),
            (1.0, 0.75, 1.0),
            (0.125, 0.0, 0.1),
            pair,
            0.2,
            um,
            recommended(1000, 4.0),
        ),
        riemann(
            "toro2",
            unit,
            (1.0, -2.0, 0.4),
            (1.0, 2.0, 0.4),
            pair,
            0.15,
            um,
            recommended(1000, 1.0),
        ),
        riemann(
            "toro3",
            unit,
            (1.0, 0.0, 1000.0),
            (1.0, 0.0, 0.01),
            pair,
            0.012,
            um,
            recommended(1000, 2.0),
        ),
        riemann(
            "toro4",
            (-0.2, 0.5, 1.2),
            (5.99924, 19.5975, 460.894),
            (5.99242, -6.19633, 46.095),
            pair,
            0.035,
            um,
            ed(recommended(1000, 1.5)),
        ),
        riemann(
            "toro5",
            (0.0, 0.6, 1.0),
            (1.0, -19.59745, 1000.0),
            (1.0, -19.59745, 0.01),
            pair,
            0.012,
            um,
            recommended(1000, 2.5),
        ),
        riemann(
            "toro6",
            (-2.1, 0.0, 2.1),
            (1.0, 2.0, 0.1),
            (1.0, -2.0, 0.1),
            pair,
            0.8,
            um,
            ed(recommended(1000, 3.0)),
        ),
        riemann(
            "ak1",
            unit,
            (1.0, 0.0, 1.0),
            (0.125, 0.0, 0.1),
            (mat(1.6, 0.0, 0), mat(1.2, 0.0, 1)),
            0.25,
            um,
            recommended(1000, 10.0),
        ),
        riemann(
            "ak2",
            unit,
            (1.0, 0.0, 500.0),
            (1.0, 0.0, 0.2),
            (mat(1.4, 0.0, 0), mat(1.6, 0.0, 1)),
            0.015,
            um,
            recommended(1000, 2.0),
        ),
        riemann(
            "ak3",
            unit,
            (1000.0, 0.0, 1e9),
            (50.0, 0.0, 1e5),
            (mat(4.4, 6e8, 0), mat(1.4, 0.0, 1)),
            1.5e-4,
            MeshStrategy::Graded,
            recommended(1000, 4.0),
        ),
    ];
    let helium = mat(1.67, 0.0, 1);
    list.push(ProblemSpec {
        name: "bubble".into(),
        x_left: 0.0,
        segments: vec![
            seg(0.25, 1.3765, 0.2948, 1.57, air),
            seg(0.4, 1.0, 0.0, 1.0, air),
            seg(0.6, 0.138, 0.0, 1.0, helium),
            seg(1.0, 1.0, 0.0, 1.0, air),
        ],
        pressure: PressureProfile::Piecewise,
        t_end: 0.3,
        boundary: Boundary::Transmissive,
        mesh: MeshStrategy::UniformX,
        recommended: Recommended {
            integrator: Integrator::Sdirk3,
            ..recommended(2000, 5.0)
        },
    });
    list.push(ProblemSpec {
        name: "smooth".into(),
        x_left: 0.0,
        segments: vec![seg(1.0, 2.0, 0.0, 0.1, mat(1.4, 0.5, 0))],
        pressure: PressureProfile::Gaussian {
            x0: 0.5,
            ell: 0.075,
            amplitude: 10.0,
        },
        t_end: 0.2,
        boundary: Boundary::Transmissive,
        mesh: MeshStrategy::UniformMass,
        recommended: recommended(400, 1.0),
    });
    list.push(stratified(
        "sm1",
        (20.0, 10.0),
        (4.4, 1.4),
        (100.0, 0.0),
        20,
        2.0,
    ));
    list.push(stratified(
        "sm2",
        (1e4, 10.0),
        (4.4, 1.4),
        (100.0, 0.0),
        20,
        2.5,
    ));
    list.push(stratified(
        "sm3",
        (1e4, 10.0),
        (4.4, 1.4),
        (1e8, 0.0),
        20,
        1.0,
    ));
    list.push(stratified(
        "sm4",
        (20.0, 10.0),
        (4.4, 1.4),
        (1e4, 0.0),
        200,
        2.0,
    ));
    list
}

pub fn problem(name: &str) -> Result<ProblemSpec, ProblemError> {
    let key = name.to_ascii_lowercase();
    registry()
        .into_iter()
        .find(|p| p.name == key)
        .ok_or_else(|| ProblemError::Unknown(name.into()))
}

fn build_mesh(spec: &ProblemSpec, n: usize) -> Result<Mesh, ProblemError> {
    let profile =
        DensityProfile::new(spec.breaks(), spec.segments.iter().map(|s| s.rho).collect())?;
    match spec.mesh {
        MeshStrategy::UniformMass => Ok(build_piecewise_uniform_mass_mesh(&profile, n)?),
        MeshStrategy::UniformX => Ok(build_uniform_x_mesh(&profile, n)?),
        MeshStrategy::Graded => {
            let k = spec.segments.len();
            let breaks = spec.breaks();
            let width = breaks[1] - breaks[0];
            if breaks
                .windows(2)
                .any(|w| ((w[1] - w[0]) - width).abs() > 1e-12 * width)
            {
                return Err(ProblemError::Invalid(
                    "graded meshes need equal-width segments".into(),
                ));
            }
            if !n.is_multiple_of(k) {
                return Err(ProblemError::Invalid(format!(
                    "{n} cells do not divide into {k} segments"
                )));
            }
            let per = n / k;
            if k == 2 {
                // Single interface: one half-layer pair spanning the domain.
                let rho = [spec.segments[0].rho, spec.segments[1].rho];
                let tuned = auto_tune_mesh_params(rho[0], rho[1], -width, width)?;
                let dm = half_pair_spacings(&tuned.params, -width, width, n);
                if !n.is_multiple_of(2) {
                    return Err(ProblemError::Invalid(
                        "graded two-segment meshes need even N".into(),
                    ));
                }
                return Ok(Mesh::from_spacings(dm, spec.x_left)?);
            }
            let alternating = spec
                .segments
                .iter()
                .enumerate()
                .all(|(i, s)| s.rho == spec.segments[i % 2].rho);
            if !alternating {
                return Err(ProblemError::Invalid(
                    "graded layered meshes need two alternating densities".into(),
                ));
            }
            Ok(build_layered_mesh(
                [spec.segments[0].rho, spec.segments[1].rho],
                k,
                width,
                per,
                spec.x_left,
            )?)
        }
    }
}

/// Builds the mesh of `spec` with `n` cells and the matching initial state.
pub fn instantiate(spec: &ProblemSpec, n: usize) -> Result<(Mesh, State), ProblemError> {
    if spec.segments.is_empty() {
        return Err(ProblemError::Invalid("no segments".into()));
    }
    let mesh = build_mesh(spec, n)?;
    let m_edges = mesh.m_edges();

    // Segment of each cell from cumulative mass.
    let b = spec.breaks();
    let mut seg_mass_end = Vec::with_capacity(spec.segments.len());
    let mut acc = 0.0;
    for (k, s) in spec.segments.iter().enumerate() {
        acc += s.rho * (b[k + 1] - b[k]);
        seg_mass_end.push(acc);
    }
    let total = acc;
    if (mesh.total_mass() - total).abs() > 1e-11 * total {
        return Err(ProblemError::Invalid(format!(
            "mesh mass {} differs from the initial data mass {total}",
            mesh.total_mass()
        )));
    }
    let mut cell_seg = vec![0usize; n];
    let mut k = 0;
    for i in 0..n {
        let mid = 0.5 * (m_edges[i] + m_edges[i + 1]);
        while k + 1 < seg_mass_end.len() && mid > seg_mass_end[k] {
            k += 1;
        }
        // Cells must not straddle a break.
        let tol = 1e-9 * total;
        let lo = if k == 0 { 0.0 } else { seg_mass_end[k - 1] };
        if m_edges[i] < lo - tol || m_edges[i + 1] > seg_mass_end[k] + tol {
            return Err(MeshError::MisalignedRegion { x: b[k + 1] }.into());
        }
        cell_seg[i] = k;
    }

    let v: Vec<f64> = cell_seg
        .iter()
        .map(|&k| 1.0 / spec.segments[k].rho)
        .collect();
    let xc = mesh.eulerian_centers(&v);
    let p: Vec<f64> = (0..n)
        .map(|i| spec.pressure_at(spec.segments[cell_seg[i]].p, xc[i]))
        .collect();
    let mut u = vec![0.0; n + 1];
    u[0] = spec.segments[cell_seg[0]].u;
    u[n] = spec.segments[cell_seg[n - 1]].u;
    for j in 1..n {
        let (l, r) = (
            spec.segments[cell_seg[j - 1]].u,
            spec.segments[cell_seg[j]].u,
        );
        u[j] = if cell_seg[j - 1] == cell_seg[j] {
            l
        } else {
            0.5 * (l + r)
        };
    }
    let mats: Arc<[MaterialParams]> = cell_seg.iter().map(|&k| spec.segments[k].mat).collect();
    let mut state = State::from_primitives(&mesh, v, u, p, mats)?;
    // Total energy is the exact cell average of the initial data.
    let uc = state.cell_velocity(&mesh);
    for (i, &k) in cell_seg.iter().enumerate() {
        let s = &spec.segments[k];
        state.e[i] += 0.5 * (s.u * s.u - uc[i] * uc[i]);
    }
    state.refresh_pressure_unchecked(&mesh);
    state.check_positivity()?;
    Ok((mesh, state))
}
