//! Mass-constrained graded spacing across a density jump.
//!
//! Mesh density in the reference coordinate `z`:
//! `dm/dz = dm_left + (dm_right - dm_left) (1 + erf((z - z0)/L)) / 2`
//! with `L = beta * min(-z_left, z_right)`.

use super::{Mesh, MeshError};

/// Acceptance threshold on the spacing/density mismatch.
pub const QUALITY_TARGET: f64 = 0.25;
const BETA_START: f64 = 0.25;
const BETA_MIN: f64 = 1e-6;
const MAX_HALVINGS: usize = 40;
const SWEEP_POINTS: usize = 201;
const INVALID_PENALTY: f64 = 1e20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradedMeshParams {
    pub beta: f64,
    pub z0: f64,
    pub dm_left: f64,
    pub dm_right: f64,
}

impl GradedMeshParams {
    pub fn transition_length(&self, z_left: f64, z_right: f64) -> f64 {
        self.beta * (-z_left).min(z_right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedMesh {
    pub params: GradedMeshParams,
    pub quality: f64,
}

/// `integral of erf` shifted by `|s|`, which stays small for large `|s|`.
fn erf_integral_excess(s: f64) -> f64 {
    let a = s.abs();
    (-s * s).exp() / std::f64::consts::PI.sqrt() - a * libm::erfc(a)
}

/// Mass between `z1` and `z2` under the graded mesh density.
pub fn interval_mass(params: &GradedMeshParams, l_beta: f64, z1: f64, z2: f64) -> f64 {
    let s1 = (z1 - params.z0) / l_beta;
    let s2 = (z2 - params.z0) / l_beta;
    let g = (s2.abs() - s1.abs()) + (erf_integral_excess(s2) - erf_integral_excess(s1));
    0.5 * (params.dm_left + params.dm_right) * (z2 - z1)
        + 0.5 * (params.dm_right - params.dm_left) * l_beta * g
}

/// Asymptotic spacings that put mass `-rho_left z_left` left of `z = 0` and
/// `rho_right z_right` right of it.
pub fn solve_edge_spacings(
    rho_left: f64,
    rho_right: f64,
    z_left: f64,
    z_right: f64,
    beta: f64,
    z0: f64,
) -> Result<(f64, f64), MeshError> {
    if !(z_left < 0.0 && z_right > 0.0) {
        return Err(MeshError::InvalidInput(format!(
            "need z_left < 0 < z_right, got {z_left}, {z_right}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(MeshError::InvalidInput(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let l_beta = beta * (-z_left).min(z_right);
    // The mass is linear in (dm_left, dm_right); evaluate its two basis coefficients.
    let unit_l = GradedMeshParams {
        beta,
        z0,
        dm_left: 1.0,
        dm_right: 0.0,
    };
    let unit_r = GradedMeshParams {
        beta,
        z0,
        dm_left: 0.0,
        dm_right: 1.0,
    };
    let a11 = interval_mass(&unit_l, l_beta, z_left, 0.0);
    let a12 = interval_mass(&unit_r, l_beta, z_left, 0.0);
    let a21 = interval_mass(&unit_l, l_beta, 0.0, z_right);
    let a22 = interval_mass(&unit_r, l_beta, 0.0, z_right);
    let r1 = -rho_left * z_left;
    let r2 = rho_right * z_right;
    let det = a11 * a22 - a12 * a21;
    let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
    if !(det.abs() > 1e-14 * scale) {
        return Err(MeshError::Degenerate);
    }
    let dm_left = (r1 * a22 - a12 * r2) / det;
    let dm_right = (a11 * r2 - r1 * a21) / det;
    Ok((dm_left, dm_right))
}

fn tuning_cost(rho_lo: f64, rho_hi: f64, z_l: f64, z_r: f64, beta: f64, z0: f64) -> f64 {
    match solve_edge_spacings(rho_lo, rho_hi, z_l, z_r, beta, z0) {
        Ok((dl, dr)) if dl > 0.0 && dr > 0.0 => (dl * rho_hi / (dr * rho_lo) - 1.0).abs(),
        _ => INVALID_PENALTY,
    }
}

/// Best `(z0, q)` on `SWEEP_POINTS` uniform candidates; ties go to smaller `|z0|`.
fn sweep(lo: f64, hi: f64, cost: impl Fn(f64) -> f64) -> (usize, f64, f64) {
    let step = (hi - lo) / (SWEEP_POINTS - 1) as f64;
    let mut best = (0, lo, f64::INFINITY);
    for j in 0..SWEEP_POINTS {
        let z0 = if j == SWEEP_POINTS - 1 {
            hi
        } else {
            lo + j as f64 * step
        };
        let q = cost(z0);
        let tie = (q - best.2).abs() <= 1e-14 * (1.0 + q.abs());
        if (q < best.2 && !tie) || (tie && z0.abs() < best.1.abs()) {
            best = (j, z0, q);
        }
    }
    best
}

fn tune_sorted(rho_lo: f64, rho_hi: f64, z_l: f64, z_r: f64) -> Result<(f64, f64, f64), MeshError> {
    let (a, b) = (0.5 * z_l, 0.5 * z_r);
    let step = (b - a) / (SWEEP_POINTS - 1) as f64;
    let mut beta = BETA_START;
    let mut best_q = f64::INFINITY;
    for _ in 0..=MAX_HALVINGS {
        let cost = |z0: f64| tuning_cost(rho_lo, rho_hi, z_l, z_r, beta, z0);
        let (j, z0, q) = sweep(a, b, cost);
        let lo = if j == 0 { a } else { a + (j - 1) as f64 * step };
        let hi = if j + 1 >= SWEEP_POINTS {
            b
        } else {
            a + (j + 1) as f64 * step
        };
        let (_, z0_fine, q_fine) = sweep(lo, hi, cost);
        let (z0, q) = if q_fine <= q {
            (z0_fine, q_fine)
        } else {
            (z0, q)
        };
        best_q = best_q.min(q);
        if q <= QUALITY_TARGET {
            return Ok((beta, z0, q));
        }
        beta *= 0.5;
        if beta < BETA_MIN {
            break;
        }
    }
    Err(MeshError::TuningFailed {
        best_q,
        beta_min: BETA_MIN,
    })
}

/// Picks `(beta, z0)` so the asymptotic spacing ratio tracks the density ratio.
pub fn auto_tune_mesh_params(
    rho_left: f64,
    rho_right: f64,
    z_left: f64,
    z_right: f64,
) -> Result<TunedMesh, MeshError> {
    if !(rho_left > 0.0 && rho_right > 0.0 && rho_left.is_finite() && rho_right.is_finite()) {
        return Err(MeshError::InvalidInput("densities must be positive".into()));
    }
    if !(z_left < 0.0 && z_right > 0.0) {
        return Err(MeshError::InvalidInput("need z_left < 0 < z_right".into()));
    }
    let swapped = rho_left > rho_right;
    let (beta, z0, quality) = if swapped {
        let (beta, z0, q) = tune_sorted(rho_right, rho_left, -z_right, -z_left)?;
        (beta, -z0, q)
    } else {
        tune_sorted(rho_left, rho_right, z_left, z_right)?
    };
    let (dm_left, dm_right) = solve_edge_spacings(rho_left, rho_right, z_left, z_right, beta, z0)?;
    if !(dm_left > 0.0 && dm_right > 0.0) {
        return Err(MeshError::TuningFailed {
            best_q: quality,
            beta_min: BETA_MIN,
        });
    }
    Ok(TunedMesh {
        params: GradedMeshParams {
            beta,
            z0,
            dm_left,
            dm_right,
        },
        quality,
    })
}

/// Cell masses of `n` equal reference cells on `[z_left, z_right]`.
pub fn half_pair_spacings(
    params: &GradedMeshParams,
    z_left: f64,
    z_right: f64,
    n: usize,
) -> Vec<f64> {
    let l_beta = params.transition_length(z_left, z_right);
    let dz = (z_right - z_left) / n as f64;
    (0..n)
        .map(|i| {
            let z1 = z_left + i as f64 * dz;
            let z2 = if i + 1 == n {
                z_right
            } else {
                z_left + (i + 1) as f64 * dz
            };
            interval_mass(params, l_beta, z1, z2)
        })
        .collect()
}

/// Alternating two-density stack of `n_layers` layers of equal width.
pub fn build_layered_mesh(
    densities: [f64; 2],
    n_layers: usize,
    layer_width: f64,
    n_per_halfpair: usize,
    x_left: f64,
) -> Result<Mesh, MeshError> {
    if n_layers < 2 {
        return Err(MeshError::InvalidInput(format!(
            "need at least 2 layers, got {n_layers}"
        )));
    }
    if n_per_halfpair < 10 || !n_per_halfpair.is_multiple_of(2) {
        return Err(MeshError::InvalidInput(format!(
            "cells per half-layer pair must be even and at least 10, got {n_per_halfpair}"
        )));
    }
    if !(layer_width > 0.0 && layer_width.is_finite()) {
        return Err(MeshError::InvalidInput(
            "layer width must be positive".into(),
        ));
    }
    let half = 0.5 * layer_width;
    let tuned = auto_tune_mesh_params(densities[0], densities[1], -half, half)?;
    let forward = half_pair_spacings(&tuned.params, -half, half, n_per_halfpair);
    let backward: Vec<f64> = forward.iter().rev().copied().collect();
    let h = n_per_halfpair / 2;
    // Pair k joins layer k to layer k + 1.
    let pair = |k: usize| {
        if k.is_multiple_of(2) {
            &forward
        } else {
            &backward
        }
    };

    let mut dm = Vec::with_capacity(n_layers * n_per_halfpair);
    for k in 0..n_layers {
        let mut layer = Vec::with_capacity(n_per_halfpair);
        if k == 0 {
            layer.extend(std::iter::repeat_n(pair(0)[0], h));
        } else {
            layer.extend_from_slice(&pair(k - 1)[h..]);
        }
        if k + 1 == n_layers {
            let last = pair(k - 1)[n_per_halfpair - 1];
            layer.extend(std::iter::repeat_n(last, h));
        } else {
            layer.extend_from_slice(&pair(k)[..h]);
        }
        // Only the replicated terminal half is rescaled; the interior half
        // keeps its tuned mass so the interface edge stays exact.
        let terminal = match (k == 0, k + 1 == n_layers) {
            (true, _) => Some(0..h),
            (false, true) => Some(h..n_per_halfpair),
            _ => None,
        };
        if let Some(range) = terminal {
            let interior: f64 =
                layer.iter().sum::<f64>() - layer[range.clone()].iter().sum::<f64>();
            let target = densities[k % 2] * layer_width - interior;
            let factor = target / layer[range.clone()].iter().sum::<f64>();
            layer[range].iter_mut().for_each(|d| *d *= factor);
        }
        dm.extend(layer);
    }
    Mesh::from_spacings(dm, x_left)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn matches_quadrature_of_density() {
        let p = GradedMeshParams {
            beta: 0.2,
            z0: 0.13,
            dm_left: 0.7,
            dm_right: 3.1,
        };
        let l = 0.2;
        let density =
            |z: f64| p.dm_left + 0.5 * (p.dm_right - p.dm_left) * (1.0 + libm::erf((z - p.z0) / l));
        for &(z1, z2) in &[(-1.0, 0.0), (0.0, 1.0), (-0.3, 0.45), (0.1, 0.15)] {
            let exact = simpson(&density, z1, z2, 20000);
            let got = interval_mass(&p, l, z1, z2);
            assert!(
                (got - exact).abs() <= 1e-10 * exact.abs(),
                "{got} vs {exact}"
            );
        }
    }

    #[test]
    fn trivial_cases() {
        let p = GradedMeshParams {
            beta: 0.25,
            z0: 0.0,
            dm_left: 2.0,
            dm_right: 2.0,
        };
        assert!((interval_mass(&p, 0.25, -0.3, 0.7) - 2.0).abs() < 1e-14);
        let q = GradedMeshParams { dm_right: 5.0, ..p };
        assert_eq!(interval_mass(&q, 0.25, 0.4, 0.4), 0.0);
    }

    #[test]
    fn additivity() {
        let p = GradedMeshParams {
            beta: 0.01,
            z0: -0.07,
            dm_left: 1.0,
            dm_right: 1e4,
        };
        let l = 0.01;
        for &(a, b, c) in &[(-1.0, -0.05, 1.0), (-0.5, -0.07, -0.06), (-1.0, 0.0, 1.0)] {
            let whole = interval_mass(&p, l, a, c);
            let split = interval_mass(&p, l, a, b) + interval_mass(&p, l, b, c);
            assert!((whole - split).abs() <= 1e-13 * whole.abs());
        }
    }

    #[test]
    fn edge_spacings_satisfy_constraints() {
        let (rl, rr) = (1.0, 1000.0);
        let tuned = auto_tune_mesh_params(rl, rr, -1.0, 1.0).unwrap();
        let p = tuned.params;
        assert!(p.dm_left > 0.0 && p.dm_right > 0.0);
        let l = p.transition_length(-1.0, 1.0);
        assert!((interval_mass(&p, l, -1.0, 0.0) - rl).abs() <= 1e-11 * rl);
        assert!((interval_mass(&p, l, 0.0, 1.0) - rr).abs() <= 1e-11 * rr);

        let (a, b) = solve_edge_spacings(3.0, 3.0, -0.5, 0.5, 0.25, 0.0).unwrap();
        assert!((a - 3.0).abs() < 1e-14 && (b - 3.0).abs() < 1e-14);
    }

    #[test]
    fn tuning_equal_densities() {
        let t = auto_tune_mesh_params(5.0, 5.0, -1.0, 1.0).unwrap();
        assert_eq!(t.params.beta, 0.25);
        assert_eq!(t.params.z0, 0.0);
        assert!(t.quality < 1e-14);
    }

    #[test]
    fn tuning_sm1_pair() {
        let t = auto_tune_mesh_params(10.0, 20.0, -1.25, 1.25).unwrap();
        assert!(t.quality <= QUALITY_TARGET);
        let ratio = t.params.dm_left / t.params.dm_right;
        assert!((0.375..=0.625).contains(&ratio), "{ratio}");
    }

    #[test]
    fn tuning_mirrors() {
        let a = auto_tune_mesh_params(1.0, 100.0, -1.0, 1.0).unwrap();
        let b = auto_tune_mesh_params(100.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(a.params.beta, b.params.beta);
        assert_eq!(a.params.z0, -b.params.z0);
        assert!((a.params.dm_left - b.params.dm_right).abs() <= 1e-12 * a.params.dm_left);
    }

    #[test]
    fn layered_equal_densities_uniform() {
        let mesh = build_layered_mesh([2.0, 2.0], 2, 1.0, 10, 0.0).unwrap();
        assert!(mesh.dm().iter().all(|d| (d - 0.2).abs() < 1e-14));
    }

    #[test]
    fn layered_sm1_masses() {
        let mesh = build_layered_mesh([20.0, 10.0], 20, 2.5, 100, 0.0).unwrap();
        assert_eq!(mesh.len(), 2000);
        let mut expected = 0.0;
        for k in 0..20 {
            expected += if k % 2 == 0 { 20.0 } else { 10.0 } * 2.5;
            let got = mesh.m_edges()[(k + 1) * 100];
            assert!(
                (got - expected).abs() <= 1e-11 * expected,
                "layer {k}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn layered_half_layer_masses() {
        let mesh = build_layered_mesh([1.0, 1e3], 5, 1.0, 20, 0.0).unwrap();
        for (k, half) in mesh.dm().chunks(10).enumerate() {
            let expected = if (k / 2) % 2 == 0 { 0.5 } else { 500.0 };
            let got: f64 = half.iter().sum();
            assert!(
                (got - expected).abs() <= 1e-11 * expected,
                "half-layer {k}: {got}"
            );
        }
    }

    #[test]
    fn smooth_grading_for_moderate_ratio() {
        let t = auto_tune_mesh_params(10.0, 20.0, -1.25, 1.25).unwrap();
        let s = half_pair_spacings(&t.params, -1.25, 1.25, 100);
        for w in s.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() <= 0.2);
        }
    }
}
