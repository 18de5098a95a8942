//! Thomas algorithm for strictly diagonally dominant tridiagonal systems.

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored. Panics if a row is not
/// diagonally dominant, which would indicate an assembly bug upstream.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; rhs.len()];
    let mut scratch = vec![0.0; rhs.len()];
    thomas_solve_into(lower, diag, upper, rhs, &mut scratch, &mut x);
    x
}

/// Allocation-free variant; `scratch` and `x` must have the system length.
pub fn thomas_solve_into(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
    scratch: &mut [f64],
    x: &mut [f64],
) {
    let n = rhs.len();
    assert!(
        lower.len() == n && diag.len() == n && upper.len() == n,
        "band lengths must match rhs"
    );
    assert!(
        scratch.len() == n && x.len() == n,
        "work buffers must match rhs"
    );
    if n == 0 {
        return;
    }
    for i in 0..n {
        let lo = if i > 0 { lower[i].abs() } else { 0.0 };
        let up = if i + 1 < n { upper[i].abs() } else { 0.0 };
        assert!(
            diag[i] != 0.0 && diag[i].abs() >= lo + up,
            "row {i} is not diagonally dominant"
        );
    }
    // Forward sweep: scratch holds the modified upper band, x the modified rhs.
    let mut denom = diag[0];
    scratch[0] = if n > 1 { upper[0] / denom } else { 0.0 };
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= scratch[i] * x[i + 1];
    }
}
