//! Conservative energy update and the pressure-spike blend.

use super::{Boundary, DiffusionOrder};
use crate::eos::MaterialParams;
use crate::mesh::Mesh;

const BLEND_POWER: i32 = 8;
/// Relative floor on the neighbour pressure range.
const BLEND_EPS: f64 = 1e-14;

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Energy fluxes on all `N + 1` edges.
pub fn energy_fluxes(
    p: &[f64],
    u: &[f64],
    v_new: &[f64],
    u_cell: &[f64],
    mats: &[MaterialParams],
    mesh: &Mesh,
    order: DiffusionOrder,
    boundary: Boundary,
) -> Vec<f64> {
    let n = p.len();
    let dm = mesh.dm();
    let dual = mesh.dm_dual();

    // Per-cell pressure increments across the cell (zero at boundary cells).
    let mut delta = vec![0.0; n];
    if order == DiffusionOrder::Second {
        for i in 1..n - 1 {
            let left = (p[i] - p[i - 1]) / dual[i - 1];
            let right = (p[i + 1] - p[i]) / dual[i];
            delta[i] = dm[i] * minmod(left, right);
        }
    }

    let mut flux = vec![0.0; n + 1];
    match boundary {
        Boundary::Wall => {
            flux[0] = 0.0;
            flux[n] = 0.0;
        }
        Boundary::Transmissive => {
            flux[0] = u[0] * p[0];
            flux[n] = u[n] * p[n - 1];
        }
    }
    for j in 1..n {
        let (l, r) = (j - 1, j);
        let p_face = p[l] + dm[l] / (dm[l] + dm[r]) * (p[r] - p[l]);
        let p_minus = p[l] + 0.5 * delta[l];
        let p_plus = p[r] - 0.5 * delta[r];
        let capacity = (v_new[l] / (mats[l].gamma() - 1.0)).max(v_new[r] / (mats[r].gamma() - 1.0));
        let speed = (u_cell[l].abs() / v_new[l]).max(u_cell[r].abs() / v_new[r]);
        flux[j] = u[j] * p_face - 0.5 * capacity * speed * (p_plus - p_minus);
    }
    flux
}

/// `E_c = E^n - dt/dm (F_{i+1/2} - F_{i-1/2})`.
pub fn conservative_energy_update(e_old: &[f64], flux: &[f64], mesh: &Mesh, dt: f64) -> Vec<f64> {
    e_old
        .iter()
        .zip(mesh.dm())
        .enumerate()
        .map(|(i, (e, dm))| e - dt / dm * (flux[i + 1] - flux[i]))
        .collect()
}

/// Outcome of the pressure-spike blend.
#[derive(Debug, Clone)]
pub struct BlendResult {
    pub e: Vec<f64>,
    pub weights: Vec<f64>,
    /// `sum dm w (E_p - E_c)`: change in total energy caused by the blend.
    pub drift: f64,
    /// `sum dm w |E_p - E_c|`.
    pub drift_bound: f64,
}

/// Blends `E_c` toward the energy implied by the wave-equation pressure where
/// the conservative pressure shows an isolated spike.
pub fn blend_pressure_filter(
    e_c: &[f64],
    p_wave: &[f64],
    v_new: &[f64],
    u_cell: &[f64],
    mats: &[MaterialParams],
    mesh: &Mesh,
) -> BlendResult {
    let n = e_c.len();
    let dm = mesh.dm();
    let dual = mesh.dm_dual();
    let p_c: Vec<f64> = (0..n)
        .map(|i| mats[i].pressure_raw(v_new[i], e_c[i] - 0.5 * u_cell[i] * u_cell[i]))
        .collect();

    let mut e = e_c.to_vec();
    let mut weights = vec![0.0; n];
    let mut drift = 0.0;
    let mut drift_bound = 0.0;
    if n < 5 {
        return BlendResult {
            e,
            weights,
            drift,
            drift_bound,
        };
    }
    for i in 2..n - 2 {
        let (dl, dr) = (dual[i - 1], dual[i]);
        let interp = (dr * p_c[i - 1] + dl * p_c[i + 1]) / (dl + dr);
        let nb = [p_wave[i - 2], p_wave[i - 1], p_wave[i + 1], p_wave[i + 2]];
        let hi = nb.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lo = nb.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        let range = hi - lo + BLEND_EPS * (p_wave[i].abs() + mats[i].pi());
        let w = ((p_c[i] - interp).abs() / range).min(1.0).powi(BLEND_POWER);
        // An inadmissible wave pressure is not a usable candidate.
        if w == 0.0 || p_wave[i] + mats[i].pi() <= 0.0 {
            continue;
        }
        let e_p = mats[i].energy_raw(v_new[i], p_wave[i]) + 0.5 * u_cell[i] * u_cell[i];
        let diff = e_p - e_c[i];
        e[i] = (1.0 - w) * e_c[i] + w * e_p;
        weights[i] = w;
        drift += dm[i] * (e[i] - e_c[i]);
        drift_bound += dm[i] * w * diff.abs();
    }
    BlendResult {
        e,
        weights,
        drift,
        drift_bound,
    }
}
