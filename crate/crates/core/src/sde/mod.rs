//! Linearized dynamics with the solved density frozen into the
//! coefficients.
//!
//! Freezing turns the nonlinear equation into the ordinary SDE
//!
//! ```text
//! dX = b(t, X, u_t(X)) dt + sqrt(2 a(t, X, u_t(X))) dW,
//! ```
//!
//! whose solution map `(xi, W) -> path` is deterministic once the seeds
//! are fixed; the simulator realizes that map literally. Pathwise
//! uniqueness has no direct test (two exact solutions are never
//! available), so its operational proxy couples two different drift
//! integrators to the same bridge-refined noise and checks that their
//! sup-distance vanishes as the step is refined.

mod brownian;

pub use brownian::BrownianPath;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::fpke::FpkeSolution;
use crate::grid::{Grid1D, GridDensity};
use crate::rng::{stream, tag};
use rand::Rng;
use rayon::prelude::*;

/// `sqrt` extended below `floor` to a C1 function (linear continuation),
/// mirroring the restricted square-root used for the gradient identities.
pub fn extended_sqrt(z: f64, floor: f64) -> f64 {
    if z >= floor {
        z.sqrt()
    } else {
        floor.sqrt() + (z - floor) / (2.0 * floor.sqrt())
    }
}

/// The solved density frozen into the coefficient pair.
///
/// Space-time evaluation of the density uses piecewise-linear
/// interpolation in `x` (zero outside the box) and the left snapshot in
/// `t`, collocating with the Euler evaluation points.
#[derive(Debug, Clone)]
pub struct FrozenCoefficients {
    solution: FpkeSolution,
}

/// Freeze `sol` into the coefficients of `model`. The model must be the
/// one that produced the solution.
pub fn freeze_coefficients(
    model: &CoefficientModel,
    sol: &FpkeSolution,
) -> Result<FrozenCoefficients> {
    if model.id() != sol.model_id() {
        return Err(Error::Config(format!(
            "model/solution mismatch: {} vs {}",
            model.id(),
            sol.model_id()
        )));
    }
    Ok(FrozenCoefficients {
        solution: sol.clone(),
    })
}

impl FrozenCoefficients {
    pub fn solution(&self) -> &FpkeSolution {
        &self.solution
    }

    pub fn grid(&self) -> &Grid1D {
        self.solution.grid()
    }

    pub fn t_end(&self) -> f64 {
        self.solution.t_end()
    }

    pub fn initial_density(&self) -> &GridDensity {
        self.solution.initial()
    }

    fn snapshot_index(&self, t: f64) -> usize {
        if self.solution.dt() == 0.0 {
            return 0;
        }
        let k = ((t / self.solution.dt()) + 1e-9).floor() as isize;
        k.clamp(0, self.solution.snapshots().len() as isize - 1) as usize
    }

    /// Frozen density `u_t(x)`.
    pub fn density_at(&self, t: f64, x: f64) -> f64 {
        self.solution.snapshots()[self.snapshot_index(t)].interp(x)
    }

    /// Frozen drift `b(t, x, u_t(x))`.
    pub fn b_u(&self, t: f64, x: f64) -> f64 {
        self.solution.model().b(t, x, self.density_at(t, x))
    }

    /// Frozen diffusion `a(t, x, u_t(x))`.
    pub fn a_u(&self, t: f64, x: f64) -> f64 {
        self.solution.model().a(t, x, self.density_at(t, x))
    }

    /// `sqrt(2 a(t, x, u_t(x)))`, floored through the extended root at
    /// `2 gamma0`; never below `sqrt(2 gamma0)` for audited models.
    pub fn sqrt2a_u(&self, t: f64, x: f64) -> f64 {
        extended_sqrt(2.0 * self.a_u(t, x), 2.0 * self.solution.model().gamma0())
    }

    /// `sqrt(a(t, x, u_t(x)))` through the extended root at `gamma0`.
    pub fn sqrt_a_u(&self, t: f64, x: f64) -> f64 {
        extended_sqrt(self.a_u(t, x), self.solution.model().gamma0())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    /// Predictor-corrector average for the drift; the diffusion increment
    /// stays the Euler one.
    HeunDrift,
}

impl Integrator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Integrator::Euler => "euler",
            Integrator::HeunDrift => "heun-drift",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "heun-drift" => Ok(Integrator::HeunDrift),
            other => Err(Error::Config(format!(
                "unknown integrator '{other}' (expected euler | heun-drift)"
            ))),
        }
    }
}

/// One simulated trajectory with the seeds that produced it.
#[derive(Debug, Clone)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub initial_seed: u64,
    pub noise_seed: u64,
    pub integrator: Integrator,
}

/// Exact inverse-CDF sample from a cell-averaged density: the CDF is
/// piecewise linear, so the draw lands inside cell `i` with probability
/// equal to the cell mass, uniformly within the cell.
pub fn sample_initial(u0: &GridDensity, seed: u64) -> f64 {
    let mut rng = stream(&[seed, 0, tag::INITIAL]);
    let v: f64 = rng.gen::<f64>() * u0.mass();
    let g = u0.grid();
    let dx = g.dx();
    let mut cum = 0.0;
    for (i, &val) in u0.values().iter().enumerate() {
        let cell_mass = val * dx;
        if cum + cell_mass >= v && cell_mass > 0.0 {
            let frac = ((v - cum) / cell_mass).clamp(0.0, 1.0);
            return g.x_min() + (i as f64 + frac) * dx;
        }
        cum += cell_mass;
    }
    // rounding pushed v past the accumulated mass: last occupied cell
    let last = u0
        .values()
        .iter()
        .rposition(|&v| v > 0.0)
        .unwrap_or(g.n_cells() - 1);
    g.x_min() + (last as f64 + 1.0) * dx
}

/// The deterministic solution map: drive the frozen dynamics from `x0`
/// with the given noise. Returns the state at every node of `noise`.
pub fn integrate_from(
    frozen: &FrozenCoefficients,
    x0: f64,
    noise: &BrownianPath,
    integrator: Integrator,
) -> Result<Vec<f64>> {
    let n = noise.n_steps();
    let dt = noise.dt();
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x0;
    states.push(x);
    for k in 0..n {
        let t = k as f64 * dt;
        let dw = noise.increment(k);
        let drift0 = frozen.b_u(t, x);
        let diff = frozen.sqrt2a_u(t, x);
        x = match integrator {
            Integrator::Euler => x + drift0 * dt + diff * dw,
            Integrator::HeunDrift => {
                let predictor = x + drift0 * dt + diff * dw;
                let drift1 = frozen.b_u(t + dt, predictor);
                x + 0.5 * (drift0 + drift1) * dt + diff * dw
            }
        };
        if !x.is_finite() {
            return Err(Error::IntegrationFailure {
                step: k,
                particle: None,
            });
        }
        states.push(x);
    }
    Ok(states)
}

/// Simulate one path: the initial state is drawn from the solution's
/// initial density by inverse CDF, then propagated deterministically.
/// The noise horizon must match the frozen solution's.
pub fn solve_sde(
    frozen: &FrozenCoefficients,
    noise: &BrownianPath,
    initial_seed: u64,
    integrator: Integrator,
) -> Result<SdePath> {
    if (noise.horizon() - frozen.t_end()).abs() > 1e-9 * frozen.t_end().max(1.0) {
        return Err(Error::Config(format!(
            "noise horizon {} does not match the solved horizon {}",
            noise.horizon(),
            frozen.t_end()
        )));
    }
    let x0 = sample_initial(frozen.initial_density(), initial_seed);
    let states = integrate_from(frozen, x0, noise, integrator)?;
    let dt = noise.dt();
    Ok(SdePath {
        times: (0..states.len()).map(|k| k as f64 * dt).collect(),
        states,
        initial_seed,
        noise_seed: noise.seed(),
        integrator,
    })
}

#[derive(Debug, Clone)]
pub struct GapRow {
    pub level: u32,
    pub dt: f64,
    pub sup_gap: f64,
}

#[derive(Debug, Clone)]
pub struct GapTable {
    pub rows: Vec<GapRow>,
    /// Decay slope of `log2(sup_gap)` per level (positive = shrinking);
    /// absent when fewer than two levels have a positive gap.
    pub fitted_slope: Option<f64>,
}

/// Pathwise-uniqueness proxy: integrate the same bridge-refined noise with
/// both drift integrators and record the sup-distance per refinement level.
pub fn pathwise_gap(
    frozen: &FrozenCoefficients,
    initial_seed: u64,
    noise: &BrownianPath,
    levels: usize,
) -> Result<GapTable> {
    if levels < 2 {
        return Err(Error::Config(format!(
            "gap study needs at least 2 levels, got {levels}"
        )));
    }
    let x0 = sample_initial(frozen.initial_density(), initial_seed);
    let mut rows = Vec::with_capacity(levels);
    let mut current = noise.clone();
    for _ in 0..levels {
        let euler = integrate_from(frozen, x0, &current, Integrator::Euler)?;
        let heun = integrate_from(frozen, x0, &current, Integrator::HeunDrift)?;
        let sup_gap = euler
            .iter()
            .zip(&heun)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push(GapRow {
            level: current.level(),
            dt: current.dt(),
            sup_gap,
        });
        current = current.refine();
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.sup_gap > 0.0)
        .map(|(i, r)| (i as f64, r.sup_gap.log2()))
        .collect();
    let fitted_slope = if points.len() >= 2 {
        Some(-crate::stats::least_squares_slope(&points))
    } else {
        None
    };
    Ok(GapTable { rows, fitted_slope })
}

fn path_seed(base_seed: u64, index: usize, purpose: u64) -> u64 {
    crate::rng::derive_seed(&[base_seed, index as u64, purpose])
}

/// Empirical marginals of an independent path ensemble at the requested
/// snapshot times. Path `i` derives its seeds from `(base_seed, i)`, so
/// the result is independent of scheduling order and worker count.
pub fn ensemble_marginals(
    frozen: &FrozenCoefficients,
    n_paths: usize,
    dt: f64,
    times: &[f64],
    base_seed: u64,
) -> Result<Vec<GridDensity>> {
    if n_paths == 0 {
        return Err(Error::Precondition("ensemble needs at least one path".into()));
    }
    let indices: Vec<usize> = times
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if (t - k * dt).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "requested time {t} is not a multiple of dt = {dt}"
                )));
            }
            Ok(k as usize)
        })
        .collect::<Result<_>>()?;
    let n_steps = indices.iter().copied().max().unwrap_or(0);
    if n_steps as f64 * dt > frozen.t_end() + 1e-9 {
        return Err(Error::Config(format!(
            "requested horizon {} exceeds the solved horizon {}",
            n_steps as f64 * dt,
            frozen.t_end()
        )));
    }

    // states[i] = positions of path i at the requested indices
    let states: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let noise = BrownianPath::sample(n_steps, dt, path_seed(base_seed, i, tag::NOISE));
            let x0 = sample_initial(
                frozen.initial_density(),
                path_seed(base_seed, i, tag::INITIAL),
            );
            let path = integrate_from(frozen, x0, &noise, Integrator::Euler)?;
            Ok(indices.iter().map(|&k| path[k]).collect())
        })
        .collect::<Result<_>>()?;

    let g = frozen.grid();
    let dx = g.dx();
    let mut out = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let mut counts = vec![0u64; g.n_cells()];
        for s in &states {
            counts[g.cell_of(s[j])] += 1;
        }
        let values: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / (n_paths as f64 * dx))
            .collect();
        out.push(GridDensity::new(g.clone(), values, t)?);
    }
    Ok(out)
}

/// Single-time convenience wrapper around [`ensemble_marginals`].
pub fn ensemble_marginal(
    frozen: &FrozenCoefficients,
    n_paths: usize,
    dt: f64,
    t: f64,
    base_seed: u64,
) -> Result<GridDensity> {
    Ok(ensemble_marginals(frozen, n_paths, dt, &[t], base_seed)?.remove(0))
}

/// Agreement between difference quotients of the frozen fields and the
/// chain-rule representations of their weak gradients.
#[derive(Debug, Clone)]
pub struct WeakGradientReport {
    /// `max_i | D(b_u)(x_i) - [db/dx + db/dr du/dx](x_i) |`
    pub max_drift_gap: f64,
    /// same for `sqrt(a_u)` via the extended root
    pub max_sqrt_gap: f64,
}

/// Compare centered differences of `b_u` and `sqrt(a_u)` against the
/// chain-rule formulas at the interior cell centers of the snapshot at `t`.
pub fn weak_gradient_check(frozen: &FrozenCoefficients, t: f64) -> Result<WeakGradientReport> {
    let sol = frozen.solution();
    let snap = &sol.snapshots()[frozen.snapshot_index(t)];
    let g = sol.grid();
    let dx = g.dx();
    let model = sol.model();
    let mut max_drift_gap = 0.0f64;
    let mut max_sqrt_gap = 0.0f64;
    for i in 1..g.n_cells() - 1 {
        let x = g.center(i);
        let u = snap.values()[i];
        let du = (snap.values()[i + 1] - snap.values()[i - 1]) / (2.0 * dx);

        let fd_b = (frozen.b_u(t, x + dx) - frozen.b_u(t, x - dx)) / (2.0 * dx);
        let chain_b = model.db_dx(t, x, u) + model.db_dr(t, x, u) * du;
        max_drift_gap = max_drift_gap.max((fd_b - chain_b).abs());

        let fd_s = (frozen.sqrt_a_u(t, x + dx) - frozen.sqrt_a_u(t, x - dx)) / (2.0 * dx);
        let chain_s =
            (model.da_dx(t, x, u) + model.da_dr(t, x, u) * du) / (2.0 * extended_sqrt(model.a(t, x, u), model.gamma0()));
        max_sqrt_gap = max_sqrt_gap.max((fd_s - chain_s).abs());
    }
    Ok(WeakGradientReport {
        max_drift_gap,
        max_sqrt_gap,
    })
}
