//! Seeded Brownian paths with midpoint bridge refinement.
//!
//! A path stores its node values `W(t_k)` rather than the increments, so
//! refinement can copy the coarse nodes verbatim: every coarse partial
//! sum survives refinement bit for bit, which is what couples the
//! strong-convergence levels. Midpoints are drawn from the bridge law
//! `Normal((W_k + W_{k+1})/2, dt/4)` with a stream derived from
//! `(seed, level + 1)`.

use crate::rng::{stream, tag};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct BrownianPath {
    dt: f64,
    seed: u64,
    level: u32,
    /// `W(t_k)` for `k = 0..=n_steps`, `values[0] = 0`.
    values: Vec<f64>,
}

impl BrownianPath {
    /// Level-0 path with `n_steps` increments of variance `dt`.
    /// `n_steps = 0` yields the trivial path `W = 0`.
    pub fn sample(n_steps: usize, dt: f64, seed: u64) -> Self {
        let mut rng = stream(&[seed, 0, tag::NOISE]);
        let mut values = Vec::with_capacity(n_steps + 1);
        values.push(0.0);
        let scale = dt.sqrt();
        let mut w = 0.0;
        for _ in 0..n_steps {
            let z: f64 = rng.sample(StandardNormal);
            w += scale * z;
            values.push(w);
        }
        Self {
            dt,
            seed,
            level: 0,
            values,
        }
    }

    /// Bridge-refined path: twice the steps at half the step size. The
    /// even-index nodes are the input's nodes, copied exactly.
    pub fn refine(&self) -> Self {
        let n = self.n_steps();
        let next_level = self.level + 1;
        let mut rng = stream(&[self.seed, next_level as u64, tag::BRIDGE]);
        let half_dt = 0.5 * self.dt;
        let mid_sd = (0.25 * self.dt).sqrt();
        let mut values = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            let (w0, w1) = (self.values[k], self.values[k + 1]);
            values.push(w0);
            let z: f64 = rng.sample(StandardNormal);
            values.push(0.5 * (w0 + w1) + mid_sd * z);
        }
        values.push(self.values[n]);
        Self {
            dt: half_dt,
            seed: self.seed,
            level: next_level,
            values,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    /// `W(t_k)`.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `W(t_{k+1}) - W(t_k)`.
    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}
