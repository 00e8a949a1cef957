//! Stepping kernels: upwind advective flux, second-difference diffusion of
//! `beta`, and the backward-Euler Newton solve.

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::fpke::SolveOptions;

/// Sampled bounds `(sup a, sup |b|, min a)` over the run box
/// `[0, t_end] x grid x [0, r_cap]`, used by the stability rule and the
/// nondegeneracy precondition. A sanity scan, not a proof.
pub(super) fn coefficient_envelope(
    model: &CoefficientModel,
    grid: &Grid1D,
    t_end: f64,
    u0_linf: f64,
) -> (f64, f64, f64) {
    let r_cap = (2.0 * u0_linf).max(1.0);
    let mut sup_a = 0.0f64;
    let mut sup_b = 0.0f64;
    let mut min_a = f64::INFINITY;
    let nx = grid.n_cells().min(129);
    for it in 0..=8 {
        let t = t_end * it as f64 / 8.0;
        for ix in 0..nx {
            let x = grid.x_min() + (grid.x_max() - grid.x_min()) * ix as f64 / (nx - 1) as f64;
            for ir in 0..=16 {
                let r = r_cap * ir as f64 / 16.0;
                let a = model.a(t, x, r);
                sup_a = sup_a.max(a);
                min_a = min_a.min(a);
                sup_b = sup_b.max(model.b(t, x, r).abs());
            }
        }
    }
    (sup_a, sup_b, min_a)
}

/// Upwind advective face fluxes on `b_star`, zero at the walls.
/// `faces[i]` is the flux through the face between cells `i-1` and `i`;
/// the array has `n + 1` entries with `faces[0] = faces[n] = 0`.
fn advective_fluxes(model: &CoefficientModel, grid: &Grid1D, u: &[f64], t: f64) -> Vec<f64> {
    let n = u.len();
    let b: Vec<f64> = (0..n).map(|i| model.b(t, grid.center(i), u[i])).collect();
    let mut faces = vec![0.0; n + 1];
    for i in 1..n {
        // donor cell by the sign of the face velocity
        let v_face = 0.5 * (b[i - 1] + b[i]);
        faces[i] = if v_face >= 0.0 {
            b[i - 1] * u[i - 1]
        } else {
            b[i] * u[i]
        };
    }
    faces
}

/// Diffusive face fluxes `-(beta_{i} - beta_{i-1})/dx`, zero at the walls.
fn diffusive_fluxes(beta: &[f64], dx: f64) -> Vec<f64> {
    let n = beta.len();
    let mut faces = vec![0.0; n + 1];
    for i in 1..n {
        faces[i] = -(beta[i] - beta[i - 1]) / dx;
    }
    faces
}

fn apply_fluxes(u: &[f64], fluxes: &[Vec<f64>], dt: f64, dx: f64) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let mut du = 0.0;
            for f in fluxes {
                du += f[i + 1] - f[i];
            }
            u[i] - dt / dx * du
        })
        .collect()
}

pub(super) fn step_explicit(
    model: &CoefficientModel,
    grid: &Grid1D,
    u: &[f64],
    t: f64,
    dt: f64,
) -> Vec<f64> {
    let n = u.len();
    let dx = grid.dx();
    let adv = advective_fluxes(model, grid, u, t);
    let beta: Vec<f64> = (0..n).map(|i| model.beta(t, grid.center(i), u[i])).collect();
    let diff = diffusive_fluxes(&beta, dx);
    apply_fluxes(u, &[adv, diff], dt, dx)
}

/// IMEX step: upwind advection at `t`, backward-Euler diffusion at `t + dt`.
/// The final state is reassembled in divergence form from the converged
/// diffusion profile, so mass telescopes exactly like the explicit step.
pub(super) fn step_semi_implicit(
    model: &CoefficientModel,
    grid: &Grid1D,
    u: &[f64],
    t: f64,
    dt: f64,
    opts: &SolveOptions,
    step: usize,
) -> Result<Vec<f64>> {
    let dx = grid.dx();
    let adv = advective_fluxes(model, grid, u, t);
    let star = apply_fluxes(u, &[adv.clone()], dt, dx);
    let t_next = t + dt;
    let v = newton_diffusion(model, grid, &star, t_next, dt, opts, step)?;
    let beta: Vec<f64> = (0..u.len())
        .map(|i| model.beta(t_next, grid.center(i), v[i]))
        .collect();
    let diff = diffusive_fluxes(&beta, dx);
    Ok(apply_fluxes(u, &[adv, diff], dt, dx))
}

/// Solve `v - (dt/dx^2) L beta(t, ., v) = rhs` by damped Newton. `L` is the
/// zero-flux discrete Laplacian; monotone `beta` makes the Jacobian an
/// M-matrix, so the tridiagonal solves are stable. One extra polishing
/// iteration runs after the residual crosses the exit tolerance, which
/// puts the tail cells well below the positivity guard.
fn newton_diffusion(
    model: &CoefficientModel,
    grid: &Grid1D,
    rhs: &[f64],
    t: f64,
    dt: f64,
    opts: &SolveOptions,
    step: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let dx = grid.dx();
    let lam = dt / (dx * dx);

    let residual = |v: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..n).map(|i| model.beta(t, grid.center(i), v[i])).collect();
        (0..n)
            .map(|i| {
                let lap = match i {
                    0 => beta[1] - beta[0],
                    i if i == n - 1 => beta[n - 2] - beta[n - 1],
                    i => beta[i + 1] - 2.0 * beta[i] + beta[i - 1],
                };
                v[i] - lam * lap - rhs[i]
            })
            .collect()
    };
    let norm = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut v: Vec<f64> = rhs.iter().map(|&x| x.max(0.0)).collect();
    let mut g = residual(&v);
    let mut res = norm(&g);
    let mut polishing = false;

    for iteration in 0..opts.newton_max_iter {
        if !res.is_finite() {
            return Err(Error::IterationFailure {
                step,
                residual: res,
                iterations: iteration,
            });
        }
        if res <= opts.newton_tol {
            if polishing {
                return Ok(v);
            }
            polishing = true;
        }

        // beta'(v) = a + r da/dr
        let bp: Vec<f64> = (0..n)
            .map(|i| {
                let x = grid.center(i);
                model.a(t, x, v[i]) + v[i] * model.da_dr(t, x, v[i])
            })
            .collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let couplings = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            diag[i] = 1.0 + lam * couplings * bp[i];
            if i > 0 {
                lower[i] = -lam * bp[i - 1];
            }
            if i < n - 1 {
                upper[i] = -lam * bp[i + 1];
            }
        }
        let delta = thomas(&lower, &diag, &upper, &g)?;

        // damping: halve the update until the residual stops growing
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = v
                .iter()
                .zip(&delta)
                .map(|(vi, di)| vi - scale * di)
                .collect();
            let gt = residual(&trial);
            let rt = norm(&gt);
            if rt.is_finite() && (rt < res || rt <= opts.newton_tol) {
                v = trial;
                g = gt;
                res = rt;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::IterationFailure {
                step,
                residual: res,
                iterations: iteration + 1,
            });
        }
    }

    if res <= opts.newton_tol {
        Ok(v)
    } else {
        Err(Error::IterationFailure {
            step,
            residual: res,
            iterations: opts.newton_max_iter,
        })
    }
}

/// Tridiagonal solve (Thomas algorithm).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Config("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Config("singular tridiagonal system".into()));
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_a_known_system() {
        // [2 -1; -1 2 -1; -1 2] x = [1 0 1] -> x = [1 1 1]
        let lower = vec![0.0, -1.0, -1.0];
        let diag = vec![2.0, 2.0, 2.0];
        let upper = vec![-1.0, -1.0, 0.0];
        let x = thomas(&lower, &diag, &upper, &[1.0, 0.0, 1.0]).unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fluxes_vanish_at_walls() {
        let model = CoefficientModel::constant(1.0, 2.0).unwrap();
        let grid = Grid1D::new(-1.0, 1.0, 8).unwrap();
        let u = vec![0.5; 8];
        let adv = advective_fluxes(&model, &grid, &u, 0.0);
        assert_eq!(adv[0], 0.0);
        assert_eq!(adv[8], 0.0);
        // interior faces carry the upwind value c * u
        assert!((adv[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn upwind_picks_the_donor_cell() {
        let grid = Grid1D::new(-1.0, 1.0, 8).unwrap();
        let u: Vec<f64> = (0..8).map(|i| i as f64 + 1.0).collect();
        let right = CoefficientModel::constant(1.0, 1.0).unwrap();
        let adv_r = advective_fluxes(&right, &grid, &u, 0.0);
        assert_eq!(adv_r[3], u[2]); // flow to the right takes the left cell
        let left = CoefficientModel::constant(1.0, -1.0).unwrap();
        let adv_l = advective_fluxes(&left, &grid, &u, 0.0);
        assert_eq!(adv_l[3], -u[3]);
    }
}
