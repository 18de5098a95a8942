//! Staggered Lagrangian grid in mass coordinates.
//!
//! Cell `i` spans `[m_edges[i], m_edges[i + 1]]`. Velocities live on the
//! `N + 1` edges; the `N - 1` interior edges carry the dual spacings.

mod graded;

pub use graded::{
    auto_tune_mesh_params, build_layered_mesh, half_pair_spacings, interval_mass,
    solve_edge_spacings, GradedMeshParams, TunedMesh, QUALITY_TARGET,
};

use std::io::{self, Write};
use thiserror::Error;

/// Smallest mesh accepted by the filter stencils (two neighbours per side).
pub const MIN_CELLS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh needs at least {MIN_CELLS} cells, got {0}")]
    TooFewCells(usize),
    #[error("cell {index} has non-positive or non-finite mass width {dm}")]
    BadSpacing { index: usize, dm: f64 },
    #[error("invalid mesh input: {0}")]
    InvalidInput(String),
    #[error("region boundary at x = {x} does not fall on a cell edge")]
    MisalignedRegion { x: f64 },
    #[error("degenerate geometry: mass constraint system is singular")]
    Degenerate,
    #[error("mesh tuning failed: best quality {best_q} after beta fell below {beta_min}")]
    TuningFailed { best_q: f64, beta_min: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dm: Vec<f64>,
    m_edges: Vec<f64>,
    dm_dual: Vec<f64>,
    x_left: f64,
}

impl Mesh {
    /// Builds a mesh from explicit cell mass widths.
    pub fn from_spacings(dm: Vec<f64>, x_left: f64) -> Result<Self, MeshError> {
        if dm.len() < MIN_CELLS {
            return Err(MeshError::TooFewCells(dm.len()));
        }
        if let Some((index, &d)) = dm
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(MeshError::BadSpacing { index, dm: d });
        }
        if !x_left.is_finite() {
            return Err(MeshError::InvalidInput("x_left must be finite".into()));
        }
        let mut m_edges = Vec::with_capacity(dm.len() + 1);
        let mut acc = 0.0;
        m_edges.push(acc);
        for &d in &dm {
            acc += d;
            m_edges.push(acc);
        }
        let dm_dual = dm.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            dm,
            m_edges,
            dm_dual,
            x_left,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dm.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.dm.is_empty()
    }

    #[inline]
    pub fn dm(&self) -> &[f64] {
        &self.dm
    }

    #[inline]
    pub fn m_edges(&self) -> &[f64] {
        &self.m_edges
    }

    /// Interior dual spacings; `dm_dual()[i]` belongs to edge `i + 1`.
    #[inline]
    pub fn dm_dual(&self) -> &[f64] {
        &self.dm_dual
    }

    #[inline]
    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn total_mass(&self) -> f64 {
        self.m_edges[self.dm.len()]
    }

    pub fn m_centers(&self) -> Vec<f64> {
        self.m_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Eulerian edge positions `x[i+1] = x[i] + dm_i V_i` from the initial left end.
    pub fn eulerian_edges(&self, v: &[f64]) -> Vec<f64> {
        self.eulerian_edges_from(self.x_left, v)
    }

    /// Eulerian edge positions anchored at a given left end.
    pub fn eulerian_edges_from(&self, x_left: f64, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dm.len());
        let mut x = Vec::with_capacity(self.dm.len() + 1);
        let mut acc = x_left;
        x.push(acc);
        for (d, vi) in self.dm.iter().zip(v) {
            acc += d * vi;
            x.push(acc);
        }
        x
    }

    /// Eulerian cell centres from the edge reconstruction.
    pub fn eulerian_centers(&self, v: &[f64]) -> Vec<f64> {
        self.eulerian_edges(v)
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Diagnostic dump: `i, dm, m_center, x_center_initial`.
    pub fn write_dump<W: Write>(&self, mut out: W, v_initial: &[f64]) -> io::Result<()> {
        writeln!(out, "i,dm,m_center,x_center_initial")?;
        let xc = self.eulerian_centers(v_initial);
        for (i, (m, x)) in self.m_centers().iter().zip(&xc).enumerate() {
            writeln!(out, "{i},{:.16e},{:.16e},{:.16e}", self.dm[i], m, x)?;
        }
        Ok(())
    }
}

pub fn build_uniform_mass_mesh(total_mass: f64, n: usize) -> Result<Mesh, MeshError> {
    if n < MIN_CELLS {
        return Err(MeshError::TooFewCells(n));
    }
    if !(total_mass.is_finite() && total_mass > 0.0) {
        return Err(MeshError::InvalidInput(format!(
            "total mass must be positive, got {total_mass}"
        )));
    }
    Mesh::from_spacings(vec![total_mass / n as f64; n], 0.0)
}

/// Piecewise-constant density on `breaks[k]..breaks[k+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    breaks: Vec<f64>,
    rho: Vec<f64>,
}

impl DensityProfile {
    pub fn new(breaks: Vec<f64>, rho: Vec<f64>) -> Result<Self, MeshError> {
        if rho.is_empty() || breaks.len() != rho.len() + 1 {
            return Err(MeshError::InvalidInput(
                "density profile needs one more break than segments".into(),
            ));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MeshError::InvalidInput(
                "density breaks must be strictly increasing".into(),
            ));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(MeshError::InvalidInput("densities must be positive".into()));
        }
        Ok(Self { breaks, rho })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn densities(&self) -> &[f64] {
        &self.rho
    }

    pub fn segment_masses(&self) -> Vec<f64> {
        self.breaks
            .windows(2)
            .zip(&self.rho)
            .map(|(w, r)| r * (w[1] - w[0]))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.segment_masses().iter().sum()
    }
}

/// Uniform `dx` mesh; every density break must land on a cell edge.
pub fn build_uniform_x_mesh(profile: &DensityProfile, n: usize) -> Result<Mesh, MeshError> {
    if n < MIN_CELLS {
        return Err(MeshError::TooFewCells(n));
    }
    let x_left = profile.breaks[0];
    let width = profile.breaks[profile.breaks.len() - 1] - x_left;
    let dx = width / n as f64;
    let mut dm = Vec::with_capacity(n);
    let mut cell = 0usize;
    for (k, w) in profile.breaks.windows(2).enumerate() {
        let cells_f = (w[1] - x_left) / dx;
        let end = cells_f.round();
        if (cells_f - end).abs() > 1e-8 || end as usize <= cell {
            return Err(MeshError::MisalignedRegion { x: w[1] });
        }
        let end = end as usize;
        let seg_dm = profile.rho[k] * (w[1] - w[0]) / (end - cell) as f64;
        dm.extend(std::iter::repeat_n(seg_dm, end - cell));
        cell = end;
    }
    Mesh::from_spacings(dm, x_left)
}

/// Uniform spacing within each density segment, with cell counts proportional
/// to segment mass so that every break lands on an edge.
pub fn build_piecewise_uniform_mass_mesh(
    profile: &DensityProfile,
    n: usize,
) -> Result<Mesh, MeshError> {
    let masses = profile.segment_masses();
    if n < MIN_CELLS.max(masses.len()) {
        return Err(MeshError::TooFewCells(n));
    }
    let counts = apportion(&masses, n);
    let mut dm = Vec::with_capacity(n);
    for (mass, count) in masses.iter().zip(&counts) {
        dm.extend(std::iter::repeat_n(mass / *count as f64, *count));
    }
    Mesh::from_spacings(dm, profile.breaks[0])
}

/// Largest-remainder apportionment with at least one cell per segment.
fn apportion(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|q| (q.floor() as usize).max(1)).collect();
    let excess = |c: &[usize], k: usize| c[k] as f64 - ideal[k];
    while counts.iter().sum::<usize>() > n {
        let k = (0..counts.len())
            .filter(|&k| counts[k] > 1)
            .max_by(|&a, &b| excess(&counts, a).total_cmp(&excess(&counts, b)))
            .expect("n >= number of segments");
        counts[k] -= 1;
    }
    while counts.iter().sum::<usize>() < n {
        let k = (0..counts.len())
            .min_by(|&a, &b| excess(&counts, a).total_cmp(&excess(&counts, b)))
            .expect("non-empty weights");
        counts[k] += 1;
    }
    counts
}
