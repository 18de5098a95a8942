//! Fixtures shared by the benchmarks.

use silag_core::mesh::Mesh;
use silag_core::problems::{instantiate, problem};
use silag_core::State;

/// Instantiated registry problem on `n` cells.
pub fn fixture(name: &str, n: usize) -> (Mesh, State) {
    let spec = problem(name).expect("registry problem");
    instantiate(&spec, n).expect("valid resolution")
}

/// Diagonally dominant tridiagonal system of size `n`.
pub fn dominant_system(n: usize) -> [Vec<f64>; 4] {
    let lower: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                -0.4 - 0.1 * (i % 3) as f64
            }
        })
        .collect();
    let upper: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                0.0
            } else {
                -0.3 - 0.1 * (i % 5) as f64
            }
        })
        .collect();
    let diag: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| 1.0 + l.abs() + u.abs())
        .collect();
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    [lower, diag, upper, rhs]
}

/// Volume field with a spike every `period` cells.
pub fn spiky_volume(n: usize, period: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.1 * (i as f64 * 0.05).sin() + if i % period == 0 { 0.5 } else { 0.0 })
        .collect()
}
