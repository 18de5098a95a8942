use silag_core::explicit::{run_explicit, CollocatedState, SsprkTableau, DEFAULT_THETA};
use silag_core::harness::ErrorReport;
use silag_core::problems::{instantiate, registry};
use silag_core::riemann::{sample, solve_star};
use silag_core::timestepping::{run, RunConfig};

#[test]
fn every_problem_instantiates_with_its_mass() {
    for spec in registry() {
        let (mesh, state) = instantiate(&spec, spec.recommended.n).unwrap();
        let mass = spec.total_mass();
        assert!(
            (mesh.total_mass() - mass).abs() <= 1e-11 * mass,
            "{}: {} vs {mass}",
            spec.name,
            mesh.total_mass()
        );
        let width: f64 = mesh.dm().iter().zip(&state.v).map(|(dm, v)| dm * v).sum();
        let expected = spec.x_right() - spec.x_left;
        assert!(
            (width - expected).abs() <= 1e-10 * expected,
            "{}: width {width}",
            spec.name
        );
    }
}

#[test]
fn every_problem_takes_its_first_steps() {
    for spec in registry() {
        let n = spec.recommended.n.min(4000);
        let (mesh, state) = instantiate(&spec, n).unwrap();
        let cfg = spec.run_config().with_max_steps(3);
        let out = run(&state, &mesh, &cfg).unwrap_or_else(|e| panic!("{}: {e}", spec.name));
        assert_eq!(out.steps(), 3, "{}", spec.name);
    }
}

#[test]
fn sod_density_approaches_the_exact_solution() {
    let spec = silag_core::problems::problem("sod").unwrap();
    let mut errors = Vec::new();
    for n in [200, 800] {
        let (mesh, state) = instantiate(&spec, n).unwrap();
        let cfg = RunConfig {
            cfl: 1.0,
            cfl0: 1.0,
            ..spec.run_config()
        };
        let out = run(&state, &mesh, &cfg).unwrap();
        let (l, r) = spec.riemann_states().unwrap();
        let star = solve_star(&l, &r).unwrap();
        let x0 = spec.discontinuity().unwrap();
        let x = out.state.eulerian_centers(&mesh);
        let err: Vec<f64> = x
            .iter()
            .zip(out.state.density())
            .map(|(x, rho)| rho - sample(&l, &r, &star, (x - x0) / spec.t_end).0)
            .collect();
        let dx: Vec<f64> = out
            .state
            .v
            .iter()
            .zip(mesh.dm())
            .map(|(v, dm)| v * dm)
            .collect();
        errors.push(ErrorReport::from_errors(&err, &dx).l1);
    }
    assert!(errors[0] < 0.02, "{errors:?}");
    assert!(errors[1] < 0.6 * errors[0], "{errors:?}");
}

#[test]
fn implicit_and_explicit_agree_on_the_smooth_pulse() {
    let spec = silag_core::problems::problem("smooth").unwrap();
    let (mesh, state) = instantiate(&spec, 800).unwrap();
    let implicit = run(
        &state,
        &mesh,
        &RunConfig {
            cfl: 0.5,
            cfl0: 0.5,
            ..spec.run_config()
        },
    )
    .unwrap();
    let initial = CollocatedState::from_staggered(&state, &mesh);
    let (explicit, _) = run_explicit(
        &initial,
        &mesh,
        spec.t_end,
        0.5,
        &SsprkTableau::ssprk3(),
        spec.boundary,
        DEFAULT_THETA,
    )
    .unwrap();
    let diff: Vec<f64> = implicit
        .state
        .e
        .iter()
        .zip(&explicit.e)
        .map(|(a, b)| a - b)
        .collect();
    let scale = ErrorReport::from_errors(&initial.e, mesh.dm()).l1;
    let l1 = ErrorReport::from_errors(&diff, mesh.dm()).l1;
    assert!(l1 < 1e-3 * scale, "relative L1 difference {}", l1 / scale);
}
