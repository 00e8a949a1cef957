//! Self-consistent particle system against the solved density and the
//! frozen-coefficient ensemble.

use mvfpke_core::coefficients::CoefficientModel;
use mvfpke_core::fpke::{solve_fpke, SolveOptions};
use mvfpke_core::grid::Grid1D;
use mvfpke_core::particles::{estimate_density, simulate_mv, EstimatorConfig};
use mvfpke_core::sde::{ensemble_marginals, freeze_coefficients};
use mvfpke_core::stats::{reference_profile, w1_distance, Profile};

#[test]
fn heat_case_matches_the_solved_density() {
    let model = CoefficientModel::constant(1.0, 0.0).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 1024).unwrap();
    let u0 = reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 0.5, 1e-3, &SolveOptions::semi_implicit()).unwrap();

    let cfg = EstimatorConfig::histogram(grid.clone());
    let snaps = simulate_mv(&u0, &model, 0.5, 0.5f64.powi(7), 50_000, &cfg, 777, 64).unwrap();
    let emp = estimate_density(snaps.last().unwrap(), &cfg).unwrap();
    let w1 = w1_distance(&emp, sol.final_density()).unwrap();
    assert!(w1 <= 0.03, "heat-case particle W1 is {w1}");
}

#[test]
fn porous_benchmark_matches_at_two_times() {
    let model = CoefficientModel::porous_regularized(0.5, 1.0, 0.5, true).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 1024).unwrap();
    let u0 = reference_profile(Profile::Bump { center: 0.0, width: 2.0 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 0.5, 5e-4, &SolveOptions::semi_implicit()).unwrap();

    let cfg = EstimatorConfig::histogram(grid.clone());
    // 64 steps, snapshots every 32: t = 0, 0.25, 0.5
    let snaps = simulate_mv(&u0, &model, 0.5, 0.5f64.powi(7), 50_000, &cfg, 777, 32).unwrap();
    assert_eq!(snaps.len(), 3);
    for (ens, t) in [(&snaps[1], 0.25), (&snaps[2], 0.5)] {
        let emp = estimate_density(ens, &cfg).unwrap();
        let w1 = w1_distance(&emp, sol.snapshot_at(t).unwrap()).unwrap();
        assert!(w1 <= 0.05, "particle W1 at t={t} is {w1}");
    }
}

#[test]
fn constant_family_particles_and_frozen_ensemble_agree() {
    // with coefficients blind to the density both simulators run the same
    // process; their empirical marginals agree within Monte-Carlo noise
    let model = CoefficientModel::constant(0.5, 0.3).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 1024).unwrap();
    let u0 = reference_profile(Profile::Bump { center: 0.0, width: 2.0 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 0.5, 1e-3, &SolveOptions::semi_implicit()).unwrap();
    let frozen = freeze_coefficients(&model, &sol).unwrap();

    let dt = 0.5f64.powi(7);
    let n = 20_000;
    let sde_marg = ensemble_marginals(&frozen, n, dt, &[0.5], 31).unwrap();
    let cfg = EstimatorConfig::histogram(grid.clone());
    let snaps = simulate_mv(&u0, &model, 0.5, dt, n, &cfg, 32, 64).unwrap();
    let part_marg = estimate_density(snaps.last().unwrap(), &cfg).unwrap();
    let w1 = w1_distance(&sde_marg[0], &part_marg).unwrap();
    assert!(w1 <= 0.03, "mean-field consistency W1 is {w1}");
}

#[test]
fn doubling_particles_does_not_hurt_the_benchmark() {
    let model = CoefficientModel::porous_regularized(0.5, 1.0, 0.5, true).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 1024).unwrap();
    let u0 = reference_profile(Profile::Bump { center: 0.0, width: 2.0 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 0.5, 5e-4, &SolveOptions::semi_implicit()).unwrap();
    let cfg = EstimatorConfig::histogram(grid.clone());

    let dt = 0.5f64.powi(7);
    let w1_at = |n: usize, seed: u64| {
        let snaps = simulate_mv(&u0, &model, 0.5, dt, n, &cfg, seed, 64).unwrap();
        let emp = estimate_density(snaps.last().unwrap(), &cfg).unwrap();
        w1_distance(&emp, sol.final_density()).unwrap()
    };
    let small = w1_at(20_000, 1);
    let large = w1_at(40_000, 1);
    // one-sigma band measured across seed replicates at N = 20k
    let band = 0.002;
    assert!(
        large <= small + band,
        "doubling N worsened W1 beyond the band: {small} -> {large}"
    );
}
