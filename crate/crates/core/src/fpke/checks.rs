//! Quantitative consequences of the solved equation: the weak-form
//! residual, the L1 contraction of the flow, the sup-norm growth bound
//! and an empirical order-of-accuracy study.

use crate::coefficients::{check_lipschitz_bstar, CoefficientModel, HypothesisGrid};
use crate::error::{Error, Result};
use crate::fpke::{solve_fpke, FpkeSolution, SolveOptions};
use crate::grid::GridDensity;
use crate::stats::{l1_distance, MatchReport, Metric};

/// Smooth test function with two derivatives and compact support.
pub trait TestFunction {
    fn value(&self, x: f64) -> f64;
    fn dx(&self, x: f64) -> f64;
    fn dxx(&self, x: f64) -> f64;
    /// Open interval outside of which the function vanishes identically.
    fn support(&self) -> (f64, f64);
}

/// The classical mollifier profile `exp(-1/(1-y^2))` on `|y| < 1`,
/// `y = (x - center)/radius`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothBump {
    pub center: f64,
    pub radius: f64,
}

impl TestFunction for SmoothBump {
    fn value(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.radius;
        if y.abs() >= 1.0 {
            return 0.0;
        }
        (-1.0 / (1.0 - y * y)).exp()
    }

    fn dx(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.radius;
        if y.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - y * y;
        let g = -2.0 * y / (q * q);
        self.value(x) * g / self.radius
    }

    fn dxx(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.radius;
        if y.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - y * y;
        let g = -2.0 * y / (q * q);
        let gp = -2.0 / (q * q) - 8.0 * y * y / (q * q * q);
        self.value(x) * (g * g + gp) / (self.radius * self.radius)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }
}

/// A plateau at 1 inside `|x - center| <= inner`, falling to 0 at `outer`
/// through the C2 smootherstep polynomial; approximates the constant test
/// function while keeping compact support.
#[derive(Debug, Clone, Copy)]
pub struct PlateauBump {
    pub center: f64,
    pub inner: f64,
    pub outer: f64,
}

impl PlateauBump {
    /// (smootherstep, first, second derivative) at `s` in [0, 1]
    fn ramp(s: f64) -> (f64, f64, f64) {
        let v = s * s * s * (s * (6.0 * s - 15.0) + 10.0);
        let d1 = 30.0 * s * s * (s - 1.0) * (s - 1.0);
        let d2 = 60.0 * s * (s - 1.0) * (2.0 * s - 1.0);
        (v, d1, d2)
    }
}

impl TestFunction for PlateauBump {
    fn value(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        if d <= self.inner {
            1.0
        } else if d >= self.outer {
            0.0
        } else {
            let s = (d - self.inner) / (self.outer - self.inner);
            1.0 - Self::ramp(s).0
        }
    }

    fn dx(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        if d <= self.inner || d >= self.outer {
            return 0.0;
        }
        let w = self.outer - self.inner;
        let s = (d - self.inner) / w;
        let sign = (x - self.center).signum();
        -Self::ramp(s).1 / w * sign
    }

    fn dxx(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        if d <= self.inner || d >= self.outer {
            return 0.0;
        }
        let w = self.outer - self.inner;
        let s = (d - self.inner) / w;
        -Self::ramp(s).2 / (w * w)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.outer, self.center + self.outer)
    }
}

/// Residual of the weak formulation at snapshot time `t`:
///
/// ```text
/// | I(phi u_t) - I(phi u_0)
///   - int_0^t I( b(s,x,u) phi' u ) ds - int_0^t I( a(s,x,u) phi'' u ) ds |
/// ```
///
/// with midpoint quadrature in `x` and the trapezoid rule in `s`. Exactly
/// zero at `t = 0`; otherwise bounded by the discretization error.
pub fn weak_residual(sol: &FpkeSolution, phi: &dyn TestFunction, t: f64) -> Result<f64> {
    let (lo, hi) = phi.support();
    let g = sol.grid();
    if lo <= g.x_min() || hi >= g.x_max() {
        return Err(Error::Precondition(format!(
            "test-function support [{lo}, {hi}] must sit strictly inside the box [{}, {}]",
            g.x_min(),
            g.x_max()
        )));
    }
    let k_t = sol.index_of_time(t)?;
    let dx = g.dx();
    let model = sol.model();

    let moment = |u: &GridDensity| -> f64 {
        u.values()
            .iter()
            .enumerate()
            .map(|(i, &v)| phi.value(g.center(i)) * v)
            .sum::<f64>()
            * dx
    };
    let boundary_terms = moment(&sol.snapshots()[k_t]) - moment(sol.initial());

    let space_integral = |u: &GridDensity| -> f64 {
        let s = u.time_stamp();
        u.values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let x = g.center(i);
                (model.b(s, x, v) * phi.dx(x) + model.a(s, x, v) * phi.dxx(x)) * v
            })
            .sum::<f64>()
            * dx
    };
    let mut time_integral = 0.0;
    if k_t > 0 {
        let dt = sol.dt();
        for (j, snap) in sol.snapshots()[..=k_t].iter().enumerate() {
            let w = if j == 0 || j == k_t { 0.5 } else { 1.0 };
            time_integral += w * space_integral(snap) * dt;
        }
    }
    Ok((boundary_terms - time_integral).abs())
}

/// Largest change of the moment `t -> I(phi u_t)` between consecutive
/// snapshots; the discrete shadow of narrow continuity.
pub fn max_moment_increment(sol: &FpkeSolution, phi: &dyn TestFunction) -> f64 {
    let g = sol.grid();
    let dx = g.dx();
    let moments: Vec<f64> = sol
        .snapshots()
        .iter()
        .map(|u| {
            u.values()
                .iter()
                .enumerate()
                .map(|(i, &v)| phi.value(g.center(i)) * v)
                .sum::<f64>()
                * dx
        })
        .collect();
    moments
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ContractionOutcome {
    pub report: MatchReport,
    pub initial_distance: f64,
    /// `(t, |u(t) - ubar(t)|_1)` per snapshot.
    pub distances: Vec<(f64, f64)>,
}

/// Solve from both initial data and report the worst excess of
/// `|u(t) - ubar(t)|_1` over the initial distance. Requires the model to
/// pass the envelope-Lipschitz audit for `b_star` first.
pub fn l1_contraction_check(
    model: &CoefficientModel,
    u0: &GridDensity,
    u0_bar: &GridDensity,
    t_end: f64,
    dt: f64,
    opts: &SolveOptions,
    tol_contract: f64,
) -> Result<ContractionOutcome> {
    let linf = u0.linf_norm().max(u0_bar.linf_norm());
    let lattice = HypothesisGrid::default_for_run(
        model,
        t_end,
        u0.grid().x_min(),
        u0.grid().x_max(),
        linf,
    )?;
    let lip = check_lipschitz_bstar(model, &lattice)?;
    if !lip.passed {
        return Err(Error::Precondition(
            "the envelope-Lipschitz audit for b_star failed; the L1 contraction \
             hypothesis does not hold for this model"
                .into(),
        ));
    }

    let sol = solve_fpke(model, u0, t_end, dt, opts)?;
    let sol_bar = solve_fpke(model, u0_bar, t_end, dt, opts)?;
    let initial_distance = l1_distance(u0, u0_bar)?;
    let mut distances = Vec::with_capacity(sol.snapshots().len());
    let mut excess = f64::NEG_INFINITY;
    for (a, b) in sol.snapshots().iter().zip(sol_bar.snapshots()) {
        let d = l1_distance(a, b)?;
        distances.push((a.time_stamp(), d));
        excess = excess.max(d - initial_distance);
    }
    Ok(ContractionOutcome {
        report: MatchReport::new(
            Metric::L1,
            excess,
            tol_contract,
            format!("L1 contraction excess over [0, {t_end}]"),
        ),
        initial_distance,
        distances,
    })
}

/// Default sup-norm tolerance: dominated by the discretization error.
pub fn default_linf_tol(dx: f64) -> f64 {
    1e-6 + 2.0 * dx
}

/// Check `|u(t)|_inf <= lambda_hat * T + |u0|_inf + tol` over all snapshots.
pub fn linf_bound_check(sol: &FpkeSolution, lambda_hat: f64) -> MatchReport {
    let bound = lambda_hat * sol.t_end() + sol.initial().linf_norm()
        + default_linf_tol(sol.grid().dx());
    MatchReport::new(
        Metric::Linf,
        sol.max_linf(),
        bound,
        format!("sup-norm bound with Lambda = {lambda_hat:.6e}"),
    )
}

#[derive(Debug, Clone)]
pub struct RefineRow {
    pub level: usize,
    pub n_cells: usize,
    pub dt: f64,
    /// L1 distance to the previous level at the final time, restricted to
    /// the previous level's grid. `None` on the first row.
    pub self_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RefineTable {
    pub rows: Vec<RefineRow>,
    /// Least-squares slope of `log2(self_distance)` against the level,
    /// negated so "2" means second order. Needs at least two distances.
    pub fitted_order: Option<f64>,
}

/// Solve at `levels` resolutions, halving `dx` and `dt` each time, and
/// measure consecutive self-distances on the coarser grid.
pub fn refine_study(
    model: &CoefficientModel,
    u0: &GridDensity,
    t_end: f64,
    dt0: f64,
    levels: usize,
    opts: &SolveOptions,
) -> Result<RefineTable> {
    if levels < 2 {
        return Err(Error::Config(format!(
            "refinement study needs at least 2 levels, got {levels}"
        )));
    }
    let mut rows = Vec::with_capacity(levels);
    let mut previous_final: Option<GridDensity> = None;
    for level in 0..levels {
        let (grid, initial) = if level == 0 {
            (u0.grid().clone(), u0.clone())
        } else {
            let mut fine = u0.grid().clone();
            for _ in 0..level {
                fine = fine.refined();
            }
            let mut initial = u0.resample(&fine)?;
            initial.normalize()?;
            (fine, initial)
        };
        let dt = dt0 / (1u64 << level) as f64;
        let sol = solve_fpke(model, &initial, t_end, dt, opts)?;
        let self_distance = match &previous_final {
            None => None,
            Some(prev) => {
                let restricted = sol.final_density().restrict_to_coarse()?;
                Some(l1_distance(&restricted, prev)?)
            }
        };
        rows.push(RefineRow {
            level,
            n_cells: grid.n_cells(),
            dt,
            self_distance,
        });
        previous_final = Some(sol.final_density().clone());
    }

    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.self_distance.map(|d| (r.level as f64, d)))
        .filter(|(_, d)| *d > 0.0)
        .map(|(l, d)| (l, d.log2()))
        .collect();
    let fitted_order = if points.len() >= 2 {
        Some(-crate::stats::least_squares_slope(&points))
    } else {
        None
    };
    Ok(RefineTable { rows, fitted_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::stats::{reference_profile, Profile};

    #[test]
    fn smooth_bump_derivatives_match_differences() {
        let phi = SmoothBump { center: 0.3, radius: 2.0 };
        for &x in &[-1.0, 0.0, 0.7, 1.9] {
            let h = 1e-6;
            let d1 = (phi.value(x + h) - phi.value(x - h)) / (2.0 * h);
            assert!((phi.dx(x) - d1).abs() < 1e-8, "x={x}");
            let d2 = (phi.value(x + h) - 2.0 * phi.value(x) + phi.value(x - h)) / (h * h);
            assert!((phi.dxx(x) - d2).abs() < 1e-4, "x={x}");
        }
        assert_eq!(phi.value(2.5), 0.0);
        assert_eq!(phi.dx(2.5), 0.0);
    }

    #[test]
    fn plateau_bump_is_flat_inside_and_c2() {
        let phi = PlateauBump { center: 0.0, inner: 3.0, outer: 5.0 };
        assert_eq!(phi.value(1.0), 1.0);
        assert_eq!(phi.dx(2.9), 0.0);
        assert_eq!(phi.value(6.0), 0.0);
        for &x in &[3.5, 4.0, 4.5, -3.7] {
            let h = 1e-6;
            let d1 = (phi.value(x + h) - phi.value(x - h)) / (2.0 * h);
            assert!((phi.dx(x) - d1).abs() < 1e-7, "x={x}");
            let d2 = (phi.value(x + h) - 2.0 * phi.value(x) + phi.value(x - h)) / (h * h);
            assert!((phi.dxx(x) - d2).abs() < 1e-3, "x={x}");
        }
    }

    #[test]
    fn weak_residual_is_zero_at_time_zero() {
        let model = CoefficientModel::constant(1.0, 0.0).unwrap();
        let grid = Grid1D::new(-8.0, 8.0, 128).unwrap();
        let u0 = reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap();
        let sol = solve_fpke(&model, &u0, 0.05, 1e-3, &SolveOptions::semi_implicit()).unwrap();
        let phi = SmoothBump { center: 0.0, radius: 3.0 };
        assert_eq!(weak_residual(&sol, &phi, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn weak_residual_rejects_support_touching_the_wall() {
        let model = CoefficientModel::constant(1.0, 0.0).unwrap();
        let grid = Grid1D::new(-8.0, 8.0, 128).unwrap();
        let u0 = reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap();
        let sol = solve_fpke(&model, &u0, 0.0, 0.0, &SolveOptions::default()).unwrap();
        let phi = SmoothBump { center: 0.0, radius: 9.0 };
        assert!(matches!(
            weak_residual(&sol, &phi, 0.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn refine_study_rejects_single_level() {
        let model = CoefficientModel::constant(1.0, 0.0).unwrap();
        let grid = Grid1D::new(-8.0, 8.0, 64).unwrap();
        let u0 = reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap();
        assert!(refine_study(&model, &u0, 0.1, 1e-3, 1, &SolveOptions::semi_implicit()).is_err());
    }

    #[test]
    fn stationary_uniform_profile_has_zero_self_distance() {
        // uniform over the whole box with constant coefficients never moves
        let model = CoefficientModel::constant(1.0, 0.0).unwrap();
        let grid = Grid1D::new(-8.0, 8.0, 64).unwrap();
        let u0 = reference_profile(Profile::Uniform { a: -8.0, b: 8.0 }, &grid).unwrap();
        let table =
            refine_study(&model, &u0, 0.1, 2e-3, 2, &SolveOptions::semi_implicit()).unwrap();
        assert_eq!(table.rows[1].self_distance.unwrap(), 0.0);
        assert!(table.fitted_order.is_none());
    }
}
