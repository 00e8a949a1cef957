//! Conservative finite-volume solver for the nonlinear divergence-form
//! equation
//!
//! ```text
//! du/dt + d/dx( b(t,x,u) u ) - d2/dx2( a(t,x,u) u ) = 0
//! ```
//!
//! on a truncated box with zero-flux walls. The scheme works in the
//! transformed variables: the diffusion term is the second difference of
//! `beta = a u` and the advection term an upwind flux on `b_star = b u`,
//! so every interior update is in divergence form
//!
//! ```text
//! u_i <- u_i - (dt/dx) (F_{i+1/2} - F_{i-1/2}),
//! F = upwind(b_star) - (beta_{i+1} - beta_i)/dx,
//! ```
//!
//! and mass telescopes exactly up to rounding. Explicit stepping obeys a
//! CFL rule; the semi-implicit mode treats the diffusion backward in time
//! and solves the monotone system `(I - (dt/dx^2) L beta)(u) = rhs` by a
//! damped Newton iteration, which removes the parabolic step restriction.

mod checks;
mod scheme;

pub use checks::{
    l1_contraction_check, linf_bound_check, max_moment_increment, refine_study, weak_residual,
    ContractionOutcome, PlateauBump, RefineRow, RefineTable, SmoothBump, TestFunction,
};

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridDensity};

/// Slack under which the initial mass must sit at 1.
const MASS_TOL: f64 = 1e-8;
/// Cell values in `(-NEG_GUARD, 0)` are rounding debris and get clamped;
/// anything at or below `-NEG_GUARD` aborts the run.
const NEG_GUARD: f64 = 1e-12;
/// Safety factor of the stability rule.
const CFL_FACTOR: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeStepping {
    /// Forward Euler; positivity-preserving under the CFL rule
    /// `dt <= 0.4 min(dx^2 / (2 sup a), dx / sup |b|)`.
    Explicit,
    /// Explicit upwind advection, backward-Euler diffusion; only the
    /// advective rule `dt <= 0.4 dx / sup |b|` remains.
    SemiImplicit,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub stepping: TimeStepping,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stepping: TimeStepping::Explicit,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

impl SolveOptions {
    pub fn semi_implicit() -> Self {
        Self {
            stepping: TimeStepping::SemiImplicit,
            ..Self::default()
        }
    }
}

/// Time-ordered snapshots of one solve, one per step, plus the model that
/// produced them.
#[derive(Debug, Clone)]
pub struct FpkeSolution {
    grid: Grid1D,
    dt: f64,
    snapshots: Vec<GridDensity>,
    model: CoefficientModel,
}

impl FpkeSolution {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Effective step; `t_end / round(t_end / dt_requested)`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().map(|s| s.time_stamp()).unwrap_or(0.0)
    }

    pub fn snapshots(&self) -> &[GridDensity] {
        &self.snapshots
    }

    pub fn initial(&self) -> &GridDensity {
        &self.snapshots[0]
    }

    pub fn final_density(&self) -> &GridDensity {
        self.snapshots.last().unwrap()
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn model_id(&self) -> String {
        self.model.id()
    }

    /// Snapshot index for time `t`, which must sit on the step lattice.
    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        if self.dt == 0.0 {
            if t.abs() < 1e-12 {
                return Ok(0);
            }
            return Err(Error::Precondition(format!(
                "time {t} not available in a zero-horizon solution"
            )));
        }
        let k = (t / self.dt).round();
        if (t - k * self.dt).abs() > 1e-9 * self.dt.max(1.0) || k < 0.0 {
            return Err(Error::Precondition(format!(
                "time {t} is not a snapshot time (dt = {})",
                self.dt
            )));
        }
        let k = k as usize;
        if k >= self.snapshots.len() {
            return Err(Error::Precondition(format!(
                "time {t} is beyond the solved horizon {}",
                self.t_end()
            )));
        }
        Ok(k)
    }

    pub fn snapshot_at(&self, t: f64) -> Result<&GridDensity> {
        Ok(&self.snapshots[self.index_of_time(t)?])
    }

    /// Worst absolute mass drift against the initial mass.
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.snapshots[0].mass();
        self.snapshots
            .iter()
            .map(|s| (s.mass() - m0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest cell value over all snapshots.
    pub fn min_cell_value(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.min_value())
            .fold(f64::INFINITY, f64::min)
    }

    /// Worst excess of `|u(t)|_1` over `|u_0|_1` (should be <= rounding).
    pub fn max_l1_growth(&self) -> f64 {
        let n0 = self.snapshots[0].mass();
        self.snapshots
            .iter()
            .map(|s| s.mass() - n0)
            .fold(0.0, f64::max)
    }

    pub fn max_linf(&self) -> f64 {
        self.snapshots.iter().map(|s| s.linf_norm()).fold(0.0, f64::max)
    }

    /// Largest mass seen in the two wall cells; flags domain truncation.
    pub fn max_boundary_mass(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.boundary_mass())
            .fold(0.0, f64::max)
    }
}

/// March the density from `u0` to `t_end`. Snapshots are stored at every
/// step. The requested `dt` is rounded to divide `t_end` evenly.
pub fn solve_fpke(
    model: &CoefficientModel,
    u0: &GridDensity,
    t_end: f64,
    dt: f64,
    opts: &SolveOptions,
) -> Result<FpkeSolution> {
    if !(t_end >= 0.0 && t_end.is_finite()) || !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!(
            "horizon and step must be finite and nonnegative, got T={t_end}, dt={dt}"
        )));
    }
    if (u0.mass() - 1.0).abs() > MASS_TOL {
        return Err(Error::Precondition(format!(
            "initial mass {} is not 1 within {MASS_TOL:e}",
            u0.mass()
        )));
    }

    let grid = u0.grid().clone();
    if t_end == 0.0 || dt == 0.0 {
        return Ok(FpkeSolution {
            grid,
            dt: 0.0,
            snapshots: vec![u0.clone().with_time(0.0)],
            model: model.clone(),
        });
    }

    let (sup_a, sup_b, min_a) = scheme::coefficient_envelope(model, &grid, t_end, u0.linf_norm());
    if min_a < model.gamma0() - 1e-9 {
        return Err(Error::Precondition(format!(
            "diffusion is degenerate on the run box: min a = {min_a} < gamma0 = {}; \
             the H1-nondegenerate audit would fail",
            model.gamma0()
        )));
    }
    let dx = grid.dx();
    let adv_limit = if sup_b > 0.0 { CFL_FACTOR * dx / sup_b } else { f64::INFINITY };
    let dt_limit = match opts.stepping {
        TimeStepping::Explicit => (CFL_FACTOR * dx * dx / (2.0 * sup_a)).min(adv_limit),
        TimeStepping::SemiImplicit => adv_limit,
    };
    if dt > dt_limit {
        let rule = match opts.stepping {
            TimeStepping::Explicit => "dt <= 0.4 min(dx^2/(2 sup a), dx/sup |b|)",
            TimeStepping::SemiImplicit => "dt <= 0.4 dx/sup |b|",
        };
        return Err(Error::Precondition(format!(
            "dt = {dt} violates the stability rule {rule} (limit {dt_limit:e} with sup a = {sup_a}, sup |b| = {sup_b})"
        )));
    }

    let n_steps = (t_end / dt).round().max(1.0) as usize;
    let dt_eff = t_end / n_steps as f64;

    let mut snapshots = Vec::with_capacity(n_steps + 1);
    snapshots.push(u0.clone().with_time(0.0));
    let mut current = u0.values().to_vec();

    for step in 0..n_steps {
        let t_n = step as f64 * dt_eff;
        let next = match opts.stepping {
            TimeStepping::Explicit => scheme::step_explicit(model, &grid, &current, t_n, dt_eff),
            TimeStepping::SemiImplicit => {
                scheme::step_semi_implicit(model, &grid, &current, t_n, dt_eff, opts, step)?
            }
        };
        current = guard_step(next, step, t_n + dt_eff)?;
        snapshots.push(GridDensity::new(
            grid.clone(),
            current.clone(),
            (step + 1) as f64 * dt_eff,
        )?);
    }

    Ok(FpkeSolution {
        grid,
        dt: dt_eff,
        snapshots,
        model: model.clone(),
    })
}

/// Abort on non-finite or genuinely negative values; clamp rounding debris.
fn guard_step(mut values: Vec<f64>, step: usize, t: f64) -> Result<Vec<f64>> {
    for (i, v) in values.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::SchemeFailure {
                step,
                t,
                detail: format!("cell {i} became non-finite"),
            });
        }
        if *v < 0.0 {
            if *v <= -NEG_GUARD {
                return Err(Error::SchemeFailure {
                    step,
                    t,
                    detail: format!("cell {i} fell to {v:e}, below the positivity guard"),
                });
            }
            *v = 0.0;
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{reference_profile, Profile};

    fn heat_model() -> CoefficientModel {
        CoefficientModel::constant(1.0, 0.0).unwrap()
    }

    fn gaussian_u0(n: usize) -> GridDensity {
        let grid = Grid1D::new(-8.0, 8.0, n).unwrap();
        reference_profile(Profile::Gaussian { mean: 0.0, sd: 0.5 }, &grid).unwrap()
    }

    #[test]
    fn zero_horizon_returns_initial_snapshot() {
        let u0 = gaussian_u0(64);
        let sol = solve_fpke(&heat_model(), &u0, 0.5, 0.0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.snapshots().len(), 1);
        assert_eq!(sol.initial().values(), u0.values());
        let sol2 = solve_fpke(&heat_model(), &u0, 0.0, 0.1, &SolveOptions::default()).unwrap();
        assert_eq!(sol2.snapshots().len(), 1);
    }

    #[test]
    fn explicit_cfl_violation_is_named() {
        let u0 = gaussian_u0(256);
        let err = solve_fpke(&heat_model(), &u0, 0.5, 0.01, &SolveOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("stability rule"), "got: {msg}");
        assert!(msg.contains("dx^2"), "got: {msg}");
    }

    #[test]
    fn snapshot_lookup() {
        let u0 = gaussian_u0(64);
        let sol = solve_fpke(&heat_model(), &u0, 0.1, 1e-3, &SolveOptions::default()).unwrap();
        assert_eq!(sol.index_of_time(0.0).unwrap(), 0);
        assert_eq!(sol.index_of_time(0.05).unwrap(), 50);
        assert!(sol.index_of_time(0.0503).is_err());
        assert!(sol.index_of_time(0.2).is_err());
    }

    #[test]
    fn rejects_unnormalized_initial_data() {
        let grid = Grid1D::new(-8.0, 8.0, 64).unwrap();
        let u0 = GridDensity::new(grid, vec![1.0; 64], 0.0).unwrap();
        assert!(matches!(
            solve_fpke(&heat_model(), &u0, 0.1, 1e-3, &SolveOptions::default()),
            Err(Error::Precondition(_))
        ));
    }
}
