//! Density comparison metrics and reference profiles.
//!
//! Metrics operate on densities sharing one grid; regridding is the
//! caller's job ([`GridDensity::resample`]). The 1-D Wasserstein distance
//! is the cumulative-distribution formula, exact for this discretization.

use crate::error::{Error, Result};
use crate::grid::{require_same_grid, Grid1D, GridDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L1,
    Linf,
    W1,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::L1 => "L1",
            Metric::Linf => "Linf",
            Metric::W1 => "W1",
        }
    }
}

/// Outcome of one quantitative comparison; `passed` iff `value <= threshold`.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub metric: Metric,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub context: String,
}

impl MatchReport {
    pub fn new(metric: Metric, value: f64, threshold: f64, context: impl Into<String>) -> Self {
        Self {
            metric,
            value,
            threshold,
            passed: value <= threshold,
            context: context.into(),
        }
    }
}

/// `dx * sum |p_i - q_i|`.
pub fn l1_distance(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    require_same_grid(p, q)?;
    let dx = p.grid().dx();
    Ok(dx
        * p.values()
            .iter()
            .zip(q.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// `max_i |p_i - q_i|`.
pub fn linf_distance(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    require_same_grid(p, q)?;
    Ok(p.values()
        .iter()
        .zip(q.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// 1-D Wasserstein-1 distance via cumulative distributions:
/// `dx * sum_i |CDF_p(x_i) - CDF_q(x_i)|`. Masses must agree within 1e-8.
pub fn w1_distance(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    require_same_grid(p, q)?;
    let mp = p.mass();
    let mq = q.mass();
    if (mp - mq).abs() > 1e-8 {
        return Err(Error::MassMismatch(mp, mq));
    }
    let dx = p.grid().dx();
    let mut cp = 0.0;
    let mut cq = 0.0;
    let mut acc = 0.0;
    for (a, b) in p.values().iter().zip(q.values()) {
        cp += a * dx;
        cq += b * dx;
        acc += (cp - cq).abs();
    }
    Ok(dx * acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Gaussian { mean: f64, sd: f64 },
    /// `(1 - y^2)^3` on `|y| < 1` with `y = (x - center)/width`; compactly
    /// supported and twice continuously differentiable.
    Bump { center: f64, width: f64 },
    Uniform { a: f64, b: f64 },
}

/// Cell-center sampled profile, normalized to unit mass on the grid.
pub fn reference_profile(profile: Profile, grid: &Grid1D) -> Result<GridDensity> {
    let values: Vec<f64> = match profile {
        Profile::Gaussian { mean, sd } => {
            if !(sd > 0.0) {
                return Err(Error::Config(format!("gaussian sd must be positive, got {sd}")));
            }
            (0..grid.n_cells())
                .map(|i| {
                    let z = (grid.center(i) - mean) / sd;
                    (-0.5 * z * z).exp()
                })
                .collect()
        }
        Profile::Bump { center, width } => {
            if !(width > 0.0) {
                return Err(Error::Config(format!("bump width must be positive, got {width}")));
            }
            (0..grid.n_cells())
                .map(|i| {
                    let y = (grid.center(i) - center) / width;
                    if y.abs() < 1.0 {
                        (1.0 - y * y).powi(3)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        Profile::Uniform { a, b } => {
            if !(a < b) {
                return Err(Error::Config(format!("uniform needs a < b, got [{a}, {b}]")));
            }
            (0..grid.n_cells())
                .map(|i| {
                    let x = grid.center(i);
                    if x >= a && x <= b {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    let mut d = GridDensity::new(grid.clone(), values, 0.0)?;
    d.normalize()?;
    Ok(d)
}

/// Least-squares slope of `y` against `x`, shared by the convergence fits.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Parse a profile by name with its parameters, the shared configuration
/// surface (`gaussian | bump | uniform`).
pub fn profile_from_name(kind: &str, p1: f64, p2: f64) -> Result<Profile> {
    match kind {
        "gaussian" => Ok(Profile::Gaussian { mean: p1, sd: p2 }),
        "bump" => Ok(Profile::Bump { center: p1, width: p2 }),
        "uniform" => Ok(Profile::Uniform { a: p1, b: p2 }),
        other => Err(Error::Config(format!(
            "unsupported profile kind '{other}' (expected gaussian | bump | uniform)"
        ))),
    }
}
