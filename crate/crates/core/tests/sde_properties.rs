//! Frozen-coefficient dynamics: marginal laws against closed forms and
//! the solved density, the two-integrator uniqueness proxy, determinism
//! and the weak-gradient identities.

use mvfpke_core::coefficients::CoefficientModel;
use mvfpke_core::fpke::{solve_fpke, SolveOptions};
use mvfpke_core::grid::{Grid1D, GridDensity};
use mvfpke_core::rng::{derive_seed, tag};
use mvfpke_core::sde::{
    ensemble_marginal, ensemble_marginals, freeze_coefficients, integrate_from, pathwise_gap,
    weak_gradient_check, BrownianPath, FrozenCoefficients, Integrator,
};
use mvfpke_core::stats::{reference_profile, w1_distance, Profile};

fn porous_benchmark() -> (CoefficientModel, FrozenCoefficients) {
    let model = CoefficientModel::porous_regularized(0.5, 1.0, 0.5, true).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 1024).unwrap();
    let u0 = reference_profile(Profile::Bump { center: 0.0, width: 2.0 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 0.5, 5e-4, &SolveOptions::semi_implicit()).unwrap();
    let frozen = freeze_coefficients(&model, &sol).unwrap();
    (model, frozen)
}

fn histogram(grid: &Grid1D, samples: &[f64], t: f64) -> GridDensity {
    let mut counts = vec![0u64; grid.n_cells()];
    for &x in samples {
        counts[grid.cell_of(x)] += 1;
    }
    let dx = grid.dx();
    let values = counts
        .iter()
        .map(|&c| c as f64 / (samples.len() as f64 * dx))
        .collect();
    GridDensity::new(grid.clone(), values, t).unwrap()
}

#[test]
fn marginal_of_pure_noise_is_standard_normal() {
    // b = 0, a = 1/2: X(1) = W(1) ~ N(0,1) when started at 0
    let model = CoefficientModel::constant(0.5, 0.0).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 1024).unwrap();
    let u0 = reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 1.0, 2e-3, &SolveOptions::semi_implicit()).unwrap();
    let frozen = freeze_coefficients(&model, &sol).unwrap();

    let n_paths = 50_000;
    let dt = 1.0 / 128.0;
    let finals: Vec<f64> = (0..n_paths)
        .map(|i| {
            let noise = BrownianPath::sample(128, dt, derive_seed(&[901, i as u64, tag::NOISE]));
            *integrate_from(&frozen, 0.0, &noise, Integrator::Euler)
                .unwrap()
                .last()
                .unwrap()
        })
        .collect();
    let emp = histogram(&grid, &finals, 1.0);
    let truth = reference_profile(Profile::Gaussian { mean: 0.0, sd: 1.0 }, &grid).unwrap();
    let w1 = w1_distance(&emp, &truth).unwrap();
    assert!(w1 <= 0.02, "W1 to N(0,1) is {w1}");
}

#[test]
fn marginal_at_time_zero_is_sampling_noise_only() {
    let (_, frozen) = porous_benchmark();
    let marg = ensemble_marginal(&frozen, 50_000, 0.5f64.powi(7), 0.0, 11).unwrap();
    let w1 = w1_distance(&marg, frozen.initial_density()).unwrap();
    assert!(w1 <= 0.02, "t = 0 sampling W1 is {w1}");
}

#[test]
fn superposition_marginals_match_the_solved_density() {
    let (_, frozen) = porous_benchmark();
    let sol = frozen.solution();
    let times = [0.25, 0.5];

    let coarse = ensemble_marginals(&frozen, 10_000, 0.5f64.powi(6), &times, 4242).unwrap();
    let base = ensemble_marginals(&frozen, 50_000, 0.5f64.powi(7), &times, 4242).unwrap();
    for (j, &t) in times.iter().enumerate() {
        let truth = sol.snapshot_at(t).unwrap();
        let w_base = w1_distance(&base[j], truth).unwrap();
        assert!(w_base <= 0.02, "W1 at t={t} is {w_base}");
        // refinement in (paths, step) does not lose accuracy
        let w_coarse = w1_distance(&coarse[j], truth).unwrap();
        assert!(
            w_base <= w_coarse,
            "refining (n_paths, dt) worsened W1 at t={t}: {w_coarse} -> {w_base}"
        );
    }
}

#[test]
fn ensemble_moments_sit_in_monte_carlo_bands() {
    let (_, frozen) = porous_benchmark();
    let n_paths = 50_000;
    let marg = ensemble_marginal(&frozen, n_paths, 0.5f64.powi(7), 0.5, 4242).unwrap();
    let truth = frozen.solution().final_density();
    let sd = truth.variance().sqrt();
    let mean_band = 4.0 * sd / (n_paths as f64).sqrt() + 2.0 * frozen.grid().dx();
    assert!(
        (marg.mean() - truth.mean()).abs() <= mean_band,
        "mean {} vs {} (band {mean_band})",
        marg.mean(),
        truth.mean()
    );
    let var_band = 4.0 * truth.variance() * (2.0 / n_paths as f64).sqrt() + 4.0 * frozen.grid().dx();
    assert!(
        (marg.variance() - truth.variance()).abs() <= var_band,
        "variance {} vs {} (band {var_band})",
        marg.variance(),
        truth.variance()
    );
}

#[test]
fn pathwise_gap_decays_with_the_step() {
    // drift present: the integrators genuinely differ, and the same-noise
    // gap must shrink as the bridge refines the step
    let model = CoefficientModel::burgers_gauss(0.5, 1.0, 1.0, 0.5, true).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 1024).unwrap();
    let u0 = reference_profile(Profile::Bump { center: 0.0, width: 2.0 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 0.5, 5e-4, &SolveOptions::semi_implicit()).unwrap();
    let frozen = freeze_coefficients(&model, &sol).unwrap();

    let noise = BrownianPath::sample(64, 0.5 / 64.0, 7); // dt = 2^-7
    let table = pathwise_gap(&frozen, 17, &noise, 4).unwrap();
    assert_eq!(table.rows.len(), 4);
    let gaps: Vec<f64> = table.rows.iter().map(|r| r.sup_gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "gaps not decreasing: {gaps:?}");
    let slope = table.fitted_slope.unwrap();
    assert!(slope >= 0.4, "gap decay slope {slope}");
}

#[test]
fn pathwise_gap_is_zero_without_drift() {
    // frozen heat flow: b = 0 makes the integrators identical
    let model = CoefficientModel::constant(1.0, 0.0).unwrap();
    let grid = Grid1D::new(-8.0, 8.0, 256).unwrap();
    let u0 = reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap();
    let sol = solve_fpke(&model, &u0, 0.5, 1e-3, &SolveOptions::semi_implicit()).unwrap();
    let frozen = freeze_coefficients(&model, &sol).unwrap();
    let noise = BrownianPath::sample(32, 0.5 / 32.0, 3);
    let table = pathwise_gap(&frozen, 5, &noise, 3).unwrap();
    for row in table.rows {
        assert_eq!(row.sup_gap, 0.0);
    }
}

#[test]
fn ensembles_are_deterministic_and_thread_independent() {
    let (_, frozen) = porous_benchmark();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| ensemble_marginal(&frozen, 4000, 0.5f64.powi(6), 0.5, 99).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.values(), b.values());
    let c = run(2);
    assert_eq!(a.values(), c.values());
}

#[test]
fn diffusion_respects_the_floor() {
    let (model, frozen) = porous_benchmark();
    let floor = (2.0 * model.gamma0()).sqrt();
    let mut min_seen = f64::INFINITY;
    for it in 0..=20 {
        let t = 0.5 * it as f64 / 20.0;
        for ix in 0..=100 {
            let x = -10.0 + 20.0 * ix as f64 / 100.0; // includes points outside the box
            min_seen = min_seen.min(frozen.sqrt2a_u(t, x));
        }
    }
    assert!(min_seen >= floor - 1e-12, "diffusion fell to {min_seen} < {floor}");
}

#[test]
fn weak_gradient_chain_rule_identities() {
    let model = CoefficientModel::burgers_gauss(0.5, 1.0, 1.0, 0.5, true).unwrap();
    let mut gaps = Vec::new();
    for n in [256usize, 512] {
        let grid = Grid1D::new(-8.0, 8.0, n).unwrap();
        let u0 = reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap();
        let sol = solve_fpke(&model, &u0, 0.25, 1e-3, &SolveOptions::semi_implicit()).unwrap();
        let frozen = freeze_coefficients(&model, &sol).unwrap();
        let rep = weak_gradient_check(&frozen, 0.125).unwrap();
        let dx = grid.dx();
        assert!(rep.max_drift_gap <= dx, "drift gap {} vs dx {dx}", rep.max_drift_gap);
        assert!(rep.max_sqrt_gap <= dx, "sqrt gap {} vs dx {dx}", rep.max_sqrt_gap);
        gaps.push((rep.max_drift_gap, rep.max_sqrt_gap));
    }
    assert!(gaps[0].0 / gaps[1].0 >= 1.5, "drift gap did not shrink: {gaps:?}");
    assert!(gaps[0].1 / gaps[1].1 >= 1.5, "sqrt gap did not shrink: {gaps:?}");
}
