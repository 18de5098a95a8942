//! Specific-volume filtering: extremum detection, a target value from a
//! weighted candidate set, and a conservative diffusive redistribution.

use crate::mesh::Mesh;

/// Relative extremum threshold on `(V_{i+1} - V_i)(V_{i-1} - V_i) / V_i^2`.
const EXTREMUM_EPS: f64 = 1e-14;
/// Relative floor added to the candidate distances.
const WEIGHT_EPS: f64 = 1e-14;
const WEIGHT_POWER: i32 = 8;
/// Penalty on the least-squares candidate distance.
const QUADRATIC_PENALTY: f64 = 4.0;
/// Threshold on the normalised jumps `|V_{i+-1} - V_i| / V_i`.
const JUMP_EPS: f64 = 1e-8;
const REGRESSION_EPS: f64 = 1e-14;

/// Cell averages of `(1, xi, xi^2)` over `[a, b]`.
#[inline]
fn moments(a: f64, b: f64) -> [f64; 3] {
    [1.0, 0.5 * (a + b), (a * a + a * b + b * b) / 3.0]
}

/// Solves the symmetric 3x3 system by Gaussian elimination with pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for k in 0..3 {
        let piv = (k..3).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        a.swap(k, piv);
        b.swap(k, piv);
        if !(a[k][k].abs() > 1e-12 * scale) {
            return None;
        }
        for i in k + 1..3 {
            let f = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Least-squares quadratic fitted to the cell averages of `i-2, i-1, i+1, i+2`,
/// returned as its average over cell `i`.
fn quadratic_candidate(v: &[f64], edges: &[f64], i: usize) -> Option<f64> {
    let origin = 0.5 * (edges[i] + edges[i + 1]);
    let h = edges[i + 1] - edges[i];
    let xi = |m: f64| (m - origin) / h;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for j in [i - 2, i - 1, i + 1, i + 2] {
        let row = moments(xi(edges[j]), xi(edges[j + 1]));
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * v[j];
        }
    }
    let coef = solve3(ata, atb)?;
    let avg = moments(-0.5, 0.5);
    Some(avg[0] * coef[0] + avg[1] * coef[1] + avg[2] * coef[2])
}

#[inline]
pub(crate) fn is_extremum(v: &[f64], i: usize) -> bool {
    (v[i + 1] - v[i]) * (v[i - 1] - v[i]) > EXTREMUM_EPS * v[i] * v[i]
}

/// Target volumes: local extrema are pulled toward a weighted blend of the two
/// neighbours and a least-squares quadratic; all other cells are unchanged.
pub fn target_filtered_volume(v_c: &[f64], mesh: &Mesh) -> Vec<f64> {
    let n = v_c.len();
    let mut out = v_c.to_vec();
    if n < 5 {
        return out;
    }
    let edges = mesh.m_edges();
    for i in 2..n - 2 {
        if !is_extremum(v_c, i) {
            continue;
        }
        let vi = v_c[i];
        let eps = WEIGHT_EPS * vi.abs();
        let mut cands = [
            (v_c[i - 1], (v_c[i - 1] - vi).abs()),
            (v_c[i + 1], (v_c[i + 1] - vi).abs()),
            (0.0, f64::INFINITY),
        ];
        let used = match quadratic_candidate(v_c, edges, i) {
            Some(q) => {
                cands[2] = (q, QUADRATIC_PENALTY * (q - vi).abs());
                3
            }
            None => 2,
        };
        let d_min = cands[..used]
            .iter()
            .map(|c| c.1 + eps)
            .fold(f64::INFINITY, f64::min);
        let mut num = 0.0;
        let mut den = 0.0;
        for &(value, d) in &cands[..used] {
            let w = (d_min / (d + eps)).powi(WEIGHT_POWER);
            num += w * value;
            den += w;
        }
        out[i] = num / den;
    }
    out
}

/// Minimum-norm `(s_L, s_R)` with `a_l s_L + a_r s_R = b`, eliminating
/// through the larger coefficient.
#[inline]
fn min_norm_b_branch(a_l: f64, a_r: f64, b: f64) -> (f64, f64) {
    let b0 = b / a_l;
    let b1 = a_r / a_l;
    let s_r = b0 * b1 / (1.0 + b1 * b1);
    (b0 - b1 * s_r, s_r)
}

#[inline]
fn min_norm_c_branch(a_l: f64, a_r: f64, b: f64) -> (f64, f64) {
    let (s_r, s_l) = min_norm_b_branch(a_r, a_l, b);
    (s_l, s_r)
}

/// Conservative diffusive correction driving `V_c` toward `V_star`.
pub fn redistribute_volume_diffusion(
    v_c: &[f64],
    v_star: &[f64],
    mesh: &Mesh,
    dt: f64,
) -> Vec<f64> {
    let n = v_c.len();
    let dm = mesh.dm();
    let mut s_left = vec![0.0; n];
    let mut s_right = vec![0.0; n];
    for i in 0..n {
        let b = v_star[i] - v_c[i];
        if b == 0.0 {
            continue;
        }
        let c = dt / dm[i];
        let a_l = if i > 0 {
            c * (v_c[i - 1] - v_c[i])
        } else {
            0.0
        };
        let a_r = if i + 1 < n {
            c * (v_c[i + 1] - v_c[i])
        } else {
            0.0
        };
        // Thresholds act on the dimensionless jumps.
        let unit = c * v_c[i].abs();
        let (jl, jr) = (a_l.abs() / unit, a_r.abs() / unit);
        let (sl, sr) = match (jl > JUMP_EPS, jr > JUMP_EPS) {
            (false, false) => (0.0, 0.0),
            (true, true) if (jl - jr).abs() < JUMP_EPS => {
                let (bl, br) = min_norm_b_branch(a_l, a_r, b);
                let (cl, cr) = min_norm_c_branch(a_l, a_r, b);
                (0.5 * (bl + cl), 0.5 * (br + cr))
            }
            _ if a_l.abs() >= a_r.abs() => min_norm_b_branch(a_l, a_r, b),
            _ => min_norm_c_branch(a_l, a_r, b),
        };
        s_left[i] = sl;
        s_right[i] = sr;
    }
    // Face fluxes S_{j} (V_j - V_{j-1}) on interior faces; zero on the boundary.
    let mut flux = vec![0.0; n + 1];
    for j in 1..n {
        let s = 0.5 * (s_right[j - 1] + s_left[j]);
        flux[j] = s * (v_c[j] - v_c[j - 1]);
    }
    (0..n)
        .map(|i| v_c[i] + dt / dm[i] * (flux[i + 1] - flux[i]))
        .collect()
}

/// Slope and centroid of the least-squares line through three cells.
#[inline]
fn regression(m: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let mm = (m[0] + m[1] + m[2]) / 3.0;
    let vm = (v[0] + v[1] + v[2]) / 3.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for k in 0..3 {
        sxy += (m[k] - mm) * (v[k] - vm);
        sxx += (m[k] - mm) * (m[k] - mm);
    }
    (sxy / sxx, mm, vm)
}

#[inline]
fn normalised_residual(m: &[f64], v: &[f64], slope: f64, mm: f64, vm: f64) -> f64 {
    let res: f64 = (0..3)
        .map(|k| (vm + slope * (m[k] - mm) - v[k]).abs())
        .sum();
    res / ((v[2] - v[0]).abs() + REGRESSION_EPS)
}

/// Second, stronger smoothing pass over four-cell windows.
pub fn extra_diffusion_pass(v_star: &[f64], mesh: &Mesh) -> Vec<f64> {
    let n = v_star.len();
    if n < 4 {
        return v_star.to_vec();
    }
    let m = mesh.m_centers();
    let mut sum = vec![0.0; n];
    let mut count = vec![0u8; n];
    // Window covers cells i-1 ..= i+2 with centre pair (i, i+1).
    for i in 1..n - 2 {
        let (a_i, mm_i, vm_i) = regression(&m[i - 1..=i + 1], &v_star[i - 1..=i + 1]);
        let (a_j, mm_j, vm_j) = regression(&m[i..=i + 2], &v_star[i..=i + 2]);
        let r_i = normalised_residual(&m[i - 1..=i + 1], &v_star[i - 1..=i + 1], a_i, mm_i, vm_i);
        let r_j = normalised_residual(&m[i..=i + 2], &v_star[i..=i + 2], a_j, mm_j, vm_j);
        let w = (r_i * r_j + 2.0 * (a_i - a_j).abs() / (a_i.abs() + a_j.abs() + REGRESSION_EPS))
            .min(1.0);
        let span = m[i + 2] - m[i - 1];
        let jump = v_star[i + 2] - v_star[i - 1];
        for c in [i, i + 1] {
            let secant = v_star[i - 1] + (m[c] - m[i - 1]) / span * jump;
            sum[c] += (1.0 - w) * v_star[c] + w * secant;
            count[c] += 1;
        }
    }
    (0..n)
        .map(|i| {
            if count[i] == 0 {
                v_star[i]
            } else {
                sum[i] / f64::from(count[i])
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mass_mesh;
    use proptest::prelude::*;

    #[test]
    fn monotone_is_identity() {
        let mesh = build_uniform_mass_mesh(1.0, 10).unwrap();
        let v: Vec<f64> = (0..10).map(|i| 1.0 + 0.1 * (i as f64).powi(2)).collect();
        assert_eq!(target_filtered_volume(&v, &mesh), v);
    }

    #[test]
    fn isolated_spike_removed() {
        let mesh = build_uniform_mass_mesh(1.0, 9).unwrap();
        let v = [1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0];
        let t = target_filtered_volume(&v, &mesh);
        assert!((t[4] - 1.0).abs() < 1e-12);
        assert_eq!(t[3], 1.0);
    }

    #[test]
    fn quadratic_candidate_exact_on_parabola() {
        // Non-uniform mesh; exact cell averages of V(m) = 1 + (m - 2.1)^2.
        let mesh = Mesh::from_spacings(vec![0.5, 0.7, 0.6, 0.9, 0.8, 0.4, 0.6], 0.0).unwrap();
        let e = mesh.m_edges();
        let prim = |m: f64| m + (m - 2.1).powi(3) / 3.0;
        let v: Vec<f64> = (0..7)
            .map(|i| (prim(e[i + 1]) - prim(e[i])) / (e[i + 1] - e[i]))
            .collect();
        let q = quadratic_candidate(&v, e, 3).unwrap();
        assert!((q - v[3]).abs() < 1e-12);
        let t = target_filtered_volume(&v, &mesh);
        assert!(is_extremum(&v, 3));
        assert!((t[3] - v[3]).abs() < 1e-9);
    }

    #[test]
    fn boundary_cells_untouched() {
        let mesh = build_uniform_mass_mesh(1.0, 6).unwrap();
        let v = [1.0, 3.0, 1.0, 1.2, 3.0, 1.0];
        let t = target_filtered_volume(&v, &mesh);
        assert_eq!(t[0], v[0]);
        assert_eq!(t[1], v[1]);
        assert_eq!(t[4], v[4]);
        assert_eq!(t[5], v[5]);
    }

    #[test]
    fn min_norm_degenerate() {
        let (sl, sr) = min_norm_b_branch(2.0, 0.0, 3.0);
        assert_eq!((sl, sr), (1.5, 0.0));
        let (sl, sr) = min_norm_c_branch(0.0, 2.0, 3.0);
        assert_eq!((sl, sr), (0.0, 1.5));
        // Both branches give b * A / |A|^2.
        let (bl, br) = min_norm_b_branch(1.0, -2.0, 5.0);
        let (cl, cr) = min_norm_c_branch(1.0, -2.0, 5.0);
        assert!((bl - 1.0).abs() < 1e-15 && (br + 2.0).abs() < 1e-15);
        assert!((bl - cl).abs() < 1e-15 && (br - cr).abs() < 1e-15);
    }

    #[test]
    fn redistribution_identity_when_on_target() {
        let mesh = build_uniform_mass_mesh(1.0, 8).unwrap();
        let v = [1.0, 2.0, 1.5, 3.0, 0.5, 1.0, 1.1, 0.9];
        assert_eq!(
            redistribute_volume_diffusion(&v, &v, &mesh, 0.1),
            v.to_vec()
        );
    }

    #[test]
    fn redistribution_moves_toward_target_on_spike() {
        let mesh = build_uniform_mass_mesh(1.0, 9).unwrap();
        let v = [1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0];
        let t = target_filtered_volume(&v, &mesh);
        let out = redistribute_volume_diffusion(&v, &t, &mesh, 0.05);
        let dist = |a: &[f64]| -> f64 { a.iter().zip(&t).map(|(x, y)| (x - y).powi(2)).sum() };
        assert!(dist(&out) <= dist(&v));
        let before: f64 = v.iter().sum();
        let after: f64 = out.iter().sum();
        assert!((after - before).abs() <= 1e-15 * before);
        // Symmetric spike stays symmetric.
        for k in 0..4 {
            assert!((out[4 - k] - out[4 + k]).abs() < 1e-15);
        }
    }

    #[test]
    fn extra_diffusion_linear_and_constant() {
        let mesh = build_uniform_mass_mesh(1.0, 10).unwrap();
        let lin: Vec<f64> = (0..10).map(|i| 1.0 + 0.2 * i as f64).collect();
        let out = extra_diffusion_pass(&lin, &mesh);
        for (a, b) in out.iter().zip(&lin) {
            assert!((a - b).abs() < 1e-13);
        }
        let flat = vec![2.0; 10];
        assert_eq!(extra_diffusion_pass(&flat, &mesh), flat);
    }

    #[test]
    fn extra_diffusion_step_moves_toward_secant() {
        let mesh = build_uniform_mass_mesh(1.0, 8).unwrap();
        let step = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0];
        let out = extra_diffusion_pass(&step, &mesh);
        // Cells at the jump move toward the middle value.
        assert!(out[3] > 1.0 && out[3] < 2.0);
        assert!(out[4] < 2.0 && out[4] > 1.0);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[7], 2.0);
    }

    proptest! {
        #[test]
        fn redistribution_conserves(
            v in proptest::collection::vec(0.5f64..2.0, 12),
            dms in proptest::collection::vec(0.1f64..1.0, 12),
            dt in 1e-4f64..1.0,
        ) {
            let mesh = Mesh::from_spacings(dms, 0.0).unwrap();
            let t = target_filtered_volume(&v, &mesh);
            let out = redistribute_volume_diffusion(&v, &t, &mesh, dt);
            let before: f64 = mesh.dm().iter().zip(&v).map(|(d, x)| d * x).sum();
            let after: f64 = mesh.dm().iter().zip(&out).map(|(d, x)| d * x).sum();
            prop_assert!((after - before).abs() <= 1e-13 * before);
        }
    }
}
