//! Self-consistent mean-field particle system.
//!
//! Each step estimates the empirical density once, freezes it, and moves
//! every particle with coefficients evaluated at that estimate — the
//! law-density feedback made concrete with an estimator in place of the
//! exact density. Per-particle noise comes from streams keyed by
//! `(base_seed, particle, step)`, so updates are order-independent and a
//! parallel run reproduces a serial one exactly.

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridDensity};
use crate::rng::{derive_seed, stream, tag};
use crate::sde::sample_initial;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Particle positions at one time.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    time_stamp: f64,
    base_seed: u64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, time_stamp: f64, base_seed: u64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Precondition("ensemble needs at least one particle".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("particle positions must be finite".into()));
        }
        Ok(Self {
            positions,
            time_stamp,
            base_seed,
        })
    }

    /// Draw `n` particles from `u0` by inverse CDF, one derived stream each.
    pub fn from_density(u0: &GridDensity, n: usize, base_seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("ensemble needs at least one particle".into()));
        }
        let positions = (0..n)
            .map(|i| sample_initial(u0, derive_seed(&[base_seed, i as u64, tag::INITIAL])))
            .collect();
        Self::new(positions, u0.time_stamp(), base_seed)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time_stamp(&self) -> f64 {
        self.time_stamp
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    Fixed(f64),
    /// `sample sd * n^(-1/5)`.
    Scott,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorKind {
    Histogram,
    GaussianKernel(BandwidthRule),
}

/// Density estimator configuration; estimates land on `grid` either way.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub grid: Grid1D,
    pub kind: EstimatorKind,
}

impl EstimatorConfig {
    pub fn histogram(grid: Grid1D) -> Self {
        Self {
            grid,
            kind: EstimatorKind::Histogram,
        }
    }

    pub fn gaussian_kernel(grid: Grid1D, rule: BandwidthRule) -> Result<Self> {
        if let BandwidthRule::Fixed(h) = rule {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        Ok(Self {
            grid,
            kind: EstimatorKind::GaussianKernel(rule),
        })
    }
}

/// Estimate the ensemble's density on the configured grid; nonnegative
/// with unit mass. Histogram counts are exact integers, kernel sums are
/// accumulated over fixed-size chunks so the result does not depend on
/// the worker count.
pub fn estimate_density(ens: &ParticleEnsemble, cfg: &EstimatorConfig) -> Result<GridDensity> {
    let g = &cfg.grid;
    let n = ens.len();
    let dx = g.dx();
    match &cfg.kind {
        EstimatorKind::Histogram => {
            let mut counts = vec![0u64; g.n_cells()];
            for &x in ens.positions() {
                counts[g.cell_of(x)] += 1;
            }
            let values = counts
                .iter()
                .map(|&c| c as f64 / (n as f64 * dx))
                .collect();
            GridDensity::new(g.clone(), values, ens.time_stamp())
        }
        EstimatorKind::GaussianKernel(rule) => {
            let h = match rule {
                BandwidthRule::Fixed(h) => *h,
                BandwidthRule::Scott => {
                    let mean = ens.positions().iter().sum::<f64>() / n as f64;
                    let var = ens
                        .positions()
                        .iter()
                        .map(|x| (x - mean) * (x - mean))
                        .sum::<f64>()
                        / n as f64;
                    let sd = var.sqrt();
                    if sd == 0.0 {
                        // degenerate cloud: fall back to one cell width
                        dx
                    } else {
                        sd * (n as f64).powf(-0.2)
                    }
                }
            };
            // per-chunk partial sums, combined in chunk order
            const CHUNK: usize = 4096;
            let chunks: Vec<Vec<f64>> = ens
                .positions()
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut acc = vec![0.0f64; g.n_cells()];
                    for &x in chunk {
                        // Gaussian kernel support truncated at 8 bandwidths
                        let lo = g.cell_of(x - 8.0 * h);
                        let hi = g.cell_of(x + 8.0 * h);
                        for i in lo..=hi {
                            let z = (g.center(i) - x) / h;
                            acc[i] += (-0.5 * z * z).exp();
                        }
                    }
                    acc
                })
                .collect();
            let mut values = vec![0.0f64; g.n_cells()];
            for chunk in &chunks {
                for (v, c) in values.iter_mut().zip(chunk) {
                    *v += c;
                }
            }
            let mut d = GridDensity::new(g.clone(), values, ens.time_stamp())?;
            d.normalize()?;
            Ok(d)
        }
    }
}

/// One mean-field step: estimate the density once, then advance every
/// particle with coefficients evaluated at the frozen estimate.
/// Deterministic in `(base_seed, step_index)` whatever the worker count.
pub fn step_mv(
    ens: &ParticleEnsemble,
    model: &CoefficientModel,
    dt: f64,
    cfg: &EstimatorConfig,
    step_index: usize,
) -> Result<ParticleEnsemble> {
    let u_hat = estimate_density(ens, cfg)?;
    let t = ens.time_stamp();

    // advective sanity rule against the frozen estimate, as in the
    // finite-volume stage
    let sup_b = ens
        .positions()
        .iter()
        .map(|&x| model.b(t, x, u_hat.interp(x)).abs())
        .fold(0.0f64, f64::max);
    if sup_b > 0.0 && dt > 0.4 * cfg.grid.dx() / sup_b {
        return Err(Error::Precondition(format!(
            "dt = {dt} violates the particle sanity rule dt <= 0.4 dx/sup |b| (sup |b| = {sup_b})"
        )));
    }

    let base = ens.base_seed();
    let sqrt_dt = dt.sqrt();
    let gamma0 = model.gamma0();
    let positions: Vec<f64> = ens
        .positions()
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let r = u_hat.interp(x);
            let drift = model.b(t, x, r);
            let diff = crate::sde::extended_sqrt(2.0 * model.a(t, x, r), 2.0 * gamma0);
            let z: f64 = stream(&[base, i as u64, step_index as u64, tag::PARTICLE_STEP])
                .sample(StandardNormal);
            let next = x + drift * dt + diff * sqrt_dt * z;
            if next.is_finite() {
                Ok(next)
            } else {
                Err(Error::IntegrationFailure {
                    step: step_index,
                    particle: Some(i),
                })
            }
        })
        .collect::<Result<_>>()?;

    ParticleEnsemble::new(positions, t + dt, base)
}

/// Run the self-consistent system from `u0` to `t_end`, keeping every
/// `snapshot_stride`-th ensemble (plus the initial and final ones).
pub fn simulate_mv(
    u0: &GridDensity,
    model: &CoefficientModel,
    t_end: f64,
    dt: f64,
    n_particles: usize,
    cfg: &EstimatorConfig,
    base_seed: u64,
    snapshot_stride: usize,
) -> Result<Vec<ParticleEnsemble>> {
    let stride = snapshot_stride.max(1);
    let mut current = ParticleEnsemble::from_density(u0, n_particles, base_seed)?;
    let mut snapshots = vec![current.clone()];
    if t_end == 0.0 || dt == 0.0 {
        return Ok(snapshots);
    }
    let n_steps = (t_end / dt).round().max(1.0) as usize;
    let dt_eff = t_end / n_steps as f64;
    for step in 0..n_steps {
        current = step_mv(&current, model, dt_eff, cfg, step)?;
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            snapshots.push(current.clone());
        }
    }
    Ok(snapshots)
}
