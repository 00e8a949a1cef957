//! Finite-lattice audit of the structural hypotheses.
//!
//! Every check here samples a [`HypothesisGrid`] and reports the worst
//! margin it saw; passing is a numerical audit of the declared constants,
//! not a proof. The five gating conditions are:
//!
//! * `H1-monotone` — `(beta(r) - beta(rb)) (r - rb) >= gamma0 (r - rb)^2`,
//! * `H1-nondegenerate` — `a >= gamma0`,
//! * `H2-bound` — `b` and `r db/dr` stay finite/bounded on the lattice box,
//! * `H3-lipschitz` — `|b*(r) - b*(rb)| <= h(x) |r - rb|`,
//! * `lambda-finite` — `sup |db/dx * r| + |d2 beta/dx2|` is finite.
//!
//! The time-regularity inequalities (the `|t - s|` factors) are scanned
//! over adjacent time samples by [`time_regularity_scan`] as a non-gating
//! diagnostic; they constrain the analysis, not the scheme.

use super::CoefficientModel;
use crate::error::{Error, Result};

/// Absolute slack distinguishing rounding from a genuine monotonicity violation.
pub const TOL_MONOTONE: f64 = 1e-9;
/// Absolute slack for the envelope-Lipschitz audit.
pub const TOL_LIPSCHITZ: f64 = 1e-9;

/// Sampling lattice for the `forall`-style hypotheses.
#[derive(Debug, Clone)]
pub struct HypothesisGrid {
    t_samples: Vec<f64>,
    x_samples: Vec<f64>,
    r_samples: Vec<f64>,
    pair_stride: usize,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl HypothesisGrid {
    pub fn new(
        t_samples: Vec<f64>,
        x_samples: Vec<f64>,
        r_samples: Vec<f64>,
        pair_stride: usize,
    ) -> Result<Self> {
        if t_samples.is_empty() || x_samples.is_empty() || r_samples.is_empty() {
            return Err(Error::Config("hypothesis grid has an empty sample axis".into()));
        }
        if !strictly_increasing(&t_samples)
            || !strictly_increasing(&x_samples)
            || !strictly_increasing(&r_samples)
        {
            return Err(Error::Config(
                "hypothesis grid samples must be strictly increasing".into(),
            ));
        }
        if !r_samples.contains(&0.0)
            || r_samples.first().copied().unwrap() >= 0.0
            || r_samples.last().copied().unwrap() <= 0.0
        {
            return Err(Error::Config(
                "r samples must contain 0 and straddle it".into(),
            ));
        }
        if pair_stride == 0 {
            return Err(Error::Config("pair_stride must be positive".into()));
        }
        Ok(Self {
            t_samples,
            x_samples,
            r_samples,
            pair_stride,
        })
    }

    /// Uniform lattice with the given sample counts. `r_points` must be
    /// odd so the samples contain 0 exactly.
    pub fn lattice(
        t_end: f64,
        x_min: f64,
        x_max: f64,
        r_max: f64,
        t_points: usize,
        x_points: usize,
        r_points: usize,
        pair_stride: usize,
    ) -> Result<Self> {
        if t_points < 2 || x_points < 2 || r_points < 3 {
            return Err(Error::Config(
                "lattice needs at least 2 t, 2 x and 3 r samples".into(),
            ));
        }
        if r_points % 2 == 0 {
            return Err(Error::Config(format!(
                "r_points must be odd so the samples contain 0, got {r_points}"
            )));
        }
        let t = uniform(0.0, t_end.max(1e-12), t_points);
        let x = uniform(x_min, x_max, x_points);
        let r = uniform(-r_max, r_max, r_points);
        Self::new(t, x, r, pair_stride)
    }

    /// Default lattice: five time samples, 65 points in `x` over the domain
    /// and 65 points in `r` over `[-r_max, r_max]`.
    pub fn default_lattice(t_end: f64, x_min: f64, x_max: f64, r_max: f64) -> Result<Self> {
        Self::lattice(t_end, x_min, x_max, r_max, 5, 65, 65, 1)
    }

    /// `r`-range covering the proved sup-norm range of the solution,
    /// `r_max = 2 (Lambda T + |u0|_inf)`, with `Lambda` bootstrapped from a
    /// provisional lattice over `r_max = 2 |u0|_inf`.
    pub fn bootstrap_r_max(
        model: &CoefficientModel,
        t_end: f64,
        x_min: f64,
        x_max: f64,
        u0_linf: f64,
    ) -> Result<f64> {
        let provisional = Self::default_lattice(t_end, x_min, x_max, (2.0 * u0_linf).max(1.0))?;
        let lambda = estimate_lambda(model, &provisional)?.estimated_constant;
        Ok((2.0 * (lambda * t_end + u0_linf)).max(1.0))
    }

    /// Default lattice whose `r`-range is [`Self::bootstrap_r_max`].
    pub fn default_for_run(
        model: &CoefficientModel,
        t_end: f64,
        x_min: f64,
        x_max: f64,
        u0_linf: f64,
    ) -> Result<Self> {
        let r_max = Self::bootstrap_r_max(model, t_end, x_min, x_max, u0_linf)?;
        Self::default_lattice(t_end, x_min, x_max, r_max)
    }

    pub fn t_samples(&self) -> &[f64] {
        &self.t_samples
    }

    pub fn x_samples(&self) -> &[f64] {
        &self.x_samples
    }

    pub fn r_samples(&self) -> &[f64] {
        &self.r_samples
    }

    pub fn pair_stride(&self) -> usize {
        self.pair_stride
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.r_samples.len();
        let stride = self.pair_stride;
        (0..n).flat_map(move |i| ((i + 1)..n).step_by(stride).map(move |j| (i, j)))
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    H1Monotone,
    H1Nondegenerate,
    H2Bound,
    H3Lipschitz,
    LambdaFinite,
}

impl ConditionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::H1Monotone => "H1-monotone",
            ConditionId::H1Nondegenerate => "H1-nondegenerate",
            ConditionId::H2Bound => "H2-bound",
            ConditionId::H3Lipschitz => "H3-lipschitz",
            ConditionId::LambdaFinite => "lambda-finite",
        }
    }
}

/// Lattice tuple achieving the worst margin of a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub x: f64,
    pub r: f64,
    pub r_bar: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub passed: bool,
    pub estimated_constant: f64,
    pub witness: Option<Witness>,
}

/// `H1-monotone`: the difference quotients of `beta` in `r` stay above the
/// declared `gamma0`. The estimated constant is the infimum of the quotients.
pub fn check_monotonicity(model: &CoefficientModel, grid: &HypothesisGrid) -> Result<ConditionReport> {
    if grid.pairs().next().is_none() {
        return Err(Error::Config(
            "monotonicity audit has an empty (r, r_bar) pair set".into(),
        ));
    }
    let gamma0 = model.gamma0();
    let mut inf_quotient = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    let mut witness = None;
    for &t in grid.t_samples() {
        for &x in grid.x_samples() {
            let betas: Vec<f64> = grid
                .r_samples()
                .iter()
                .map(|&r| model.eval_beta(t, x, r))
                .collect::<Result<_>>()?;
            for (i, j) in grid.pairs() {
                let (r, rb) = (grid.r_samples()[i], grid.r_samples()[j]);
                let dr = r - rb;
                let lhs = (betas[i] - betas[j]) * dr;
                let margin = lhs - gamma0 * dr * dr;
                if margin < worst_margin {
                    worst_margin = margin;
                    witness = Some(Witness {
                        t,
                        x,
                        r,
                        r_bar: Some(rb),
                    });
                }
                inf_quotient = inf_quotient.min(lhs / (dr * dr));
            }
        }
    }
    Ok(ConditionReport {
        condition: ConditionId::H1Monotone,
        passed: worst_margin >= -TOL_MONOTONE,
        estimated_constant: inf_quotient,
        witness,
    })
}

/// `H1-nondegenerate`: `a >= gamma0` on the lattice. The estimated constant
/// is the sampled infimum of `a`.
pub fn check_nondegeneracy(model: &CoefficientModel, grid: &HypothesisGrid) -> Result<ConditionReport> {
    let mut min_a = f64::INFINITY;
    let mut witness = None;
    for &t in grid.t_samples() {
        for &x in grid.x_samples() {
            for &r in grid.r_samples() {
                let a = model.a(t, x, r);
                if !a.is_finite() {
                    return Err(Error::ModelEvaluation { t, x, r });
                }
                if a < min_a {
                    min_a = a;
                    witness = Some(Witness { t, x, r, r_bar: None });
                }
            }
        }
    }
    Ok(ConditionReport {
        condition: ConditionId::H1Nondegenerate,
        passed: min_a >= model.gamma0() - TOL_MONOTONE,
        estimated_constant: min_a,
        witness,
    })
}

/// `H2-bound`: `|b|` and `|r db/dr|` stay finite over the lattice box.
pub fn check_h2_bounds(model: &CoefficientModel, grid: &HypothesisGrid) -> Result<ConditionReport> {
    let mut sup = 0.0f64;
    let mut witness = None;
    for &t in grid.t_samples() {
        for &x in grid.x_samples() {
            for &r in grid.r_samples() {
                let b = model.b(t, x, r);
                let rdb = r * model.db_dr(t, x, r);
                let m = b.abs().max(rdb.abs());
                if !m.is_finite() {
                    return Err(Error::ModelEvaluation { t, x, r });
                }
                if m > sup {
                    sup = m;
                    witness = Some(Witness { t, x, r, r_bar: None });
                }
            }
        }
    }
    Ok(ConditionReport {
        condition: ConditionId::H2Bound,
        passed: sup.is_finite(),
        estimated_constant: sup,
        witness,
    })
}

/// `H3-lipschitz`: `|b*(r) - b*(rb)| <= h(x) |r - rb|` on all tested tuples.
/// The estimated constant is the largest ratio `|db*| / (h(x) |dr|)`; a zero
/// envelope against a non-zero drift fails with a witness instead of erroring.
pub fn check_lipschitz_bstar(
    model: &CoefficientModel,
    grid: &HypothesisGrid,
) -> Result<ConditionReport> {
    if grid.pairs().next().is_none() {
        return Err(Error::Config(
            "Lipschitz audit has an empty (r, r_bar) pair set".into(),
        ));
    }
    let mut max_ratio = 0.0f64;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut witness = None;
    for &t in grid.t_samples() {
        for &x in grid.x_samples() {
            let h = model.h_envelope(x);
            let bstars: Vec<f64> = grid
                .r_samples()
                .iter()
                .map(|&r| model.eval_bstar(t, x, r))
                .collect::<Result<_>>()?;
            for (i, j) in grid.pairs() {
                let (r, rb) = (grid.r_samples()[i], grid.r_samples()[j]);
                let lhs = (bstars[i] - bstars[j]).abs();
                let rhs = h * (r - rb).abs();
                let margin = lhs - rhs;
                if margin > worst_margin {
                    worst_margin = margin;
                    witness = Some(Witness {
                        t,
                        x,
                        r,
                        r_bar: Some(rb),
                    });
                }
                if rhs > 0.0 {
                    max_ratio = max_ratio.max(lhs / rhs);
                }
            }
        }
    }
    Ok(ConditionReport {
        condition: ConditionId::H3Lipschitz,
        passed: worst_margin <= TOL_LIPSCHITZ,
        estimated_constant: max_ratio,
        witness,
    })
}

/// `lambda-finite`: lattice maximum of `|db/dx * r| + |d2 beta/dx2|`, the
/// constant controlling the sup-norm growth bound.
pub fn estimate_lambda(model: &CoefficientModel, grid: &HypothesisGrid) -> Result<ConditionReport> {
    let mut sup = 0.0f64;
    let mut witness = None;
    for &t in grid.t_samples() {
        for &x in grid.x_samples() {
            for &r in grid.r_samples() {
                let v = (model.db_dx(t, x, r) * r).abs() + model.d2beta_dx2(t, x, r).abs();
                if !v.is_finite() {
                    return Err(Error::ModelEvaluation { t, x, r });
                }
                if v > sup {
                    sup = v;
                    witness = Some(Witness { t, x, r, r_bar: None });
                }
            }
        }
    }
    Ok(ConditionReport {
        condition: ConditionId::LambdaFinite,
        passed: sup.is_finite(),
        estimated_constant: sup,
        witness,
    })
}

/// Run every check in a fixed order. Pure: identical inputs give identical
/// reports.
pub fn audit_all(model: &CoefficientModel, grid: &HypothesisGrid) -> Result<Vec<ConditionReport>> {
    Ok(vec![
        check_monotonicity(model, grid)?,
        check_nondegeneracy(model, grid)?,
        check_h2_bounds(model, grid)?,
        check_lipschitz_bstar(model, grid)?,
        estimate_lambda(model, grid)?,
    ])
}

/// Worst ratios of the time-regularity inequalities over adjacent time
/// samples. Diagnostic only; these conditions never gate the solver.
#[derive(Debug, Clone)]
pub struct TimeRegularityReport {
    /// `|dbeta/dr(t) - dbeta/dr(s)| / (h |t-s| dbeta/dr(t))`
    pub ratio_dbeta_dr: f64,
    /// `(|beta(t)-beta(s)| + |dbeta/dx(t)-dbeta/dx(s)|) / (h |t-s| (1+|r|))`
    pub ratio_beta_shift: f64,
    /// `|b*(t)-b*(s)| / (h |t-s| (1+|b*(t)|))`
    pub ratio_bstar_shift: f64,
    /// `(|dbeta/dt| + |dbeta/dx|) / (h |r|)`
    pub ratio_beta_pointwise: f64,
}

impl TimeRegularityReport {
    pub fn within(&self, slack: f64) -> bool {
        self.ratio_dbeta_dr <= 1.0 + slack
            && self.ratio_beta_shift <= 1.0 + slack
            && self.ratio_bstar_shift <= 1.0 + slack
            && self.ratio_beta_pointwise <= 1.0 + slack
    }
}

pub fn time_regularity_scan(
    model: &CoefficientModel,
    grid: &HypothesisGrid,
) -> Result<TimeRegularityReport> {
    let mut report = TimeRegularityReport {
        ratio_dbeta_dr: 0.0,
        ratio_beta_shift: 0.0,
        ratio_bstar_shift: 0.0,
        ratio_beta_pointwise: 0.0,
    };
    let dbeta_dr = |t: f64, x: f64, r: f64| model.a(t, x, r) + r * model.da_dr(t, x, r);
    let dbeta_dx = |t: f64, x: f64, r: f64| model.da_dx(t, x, r) * r;
    let dbeta_dt = |t: f64, x: f64, r: f64| {
        super::central_diff(|s| model.beta(s, x, r), t, super::fd_step(t))
    };
    let ratio = |lhs: f64, rhs: f64| if rhs > 1e-300 { lhs / rhs } else if lhs <= 1e-12 { 0.0 } else { f64::INFINITY };
    for w in grid.t_samples().windows(2) {
        let (s, t) = (w[0], w[1]);
        for &x in grid.x_samples() {
            let h = model.h_envelope(x);
            for &r in grid.r_samples() {
                let dt = t - s;
                report.ratio_dbeta_dr = report.ratio_dbeta_dr.max(ratio(
                    (dbeta_dr(t, x, r) - dbeta_dr(s, x, r)).abs(),
                    h * dt * dbeta_dr(t, x, r),
                ));
                report.ratio_beta_shift = report.ratio_beta_shift.max(ratio(
                    (model.beta(t, x, r) - model.beta(s, x, r)).abs()
                        + (dbeta_dx(t, x, r) - dbeta_dx(s, x, r)).abs(),
                    h * dt * (1.0 + r.abs()),
                ));
                report.ratio_bstar_shift = report.ratio_bstar_shift.max(ratio(
                    (model.bstar(t, x, r) - model.bstar(s, x, r)).abs(),
                    h * dt * (1.0 + model.bstar(t, x, r).abs()),
                ));
                report.ratio_beta_pointwise = report.ratio_beta_pointwise.max(ratio(
                    dbeta_dt(t, x, r).abs() + dbeta_dx(t, x, r).abs(),
                    h * r.abs(),
                ));
            }
        }
    }
    Ok(report)
}

/// Sup norm and trapezoid `L^2` norm of the envelope over the lattice box —
/// the checkable proxy for `h` bounded and square-integrable.
pub fn h_envelope_box_norms(model: &CoefficientModel, grid: &HypothesisGrid) -> (f64, f64) {
    let xs = grid.x_samples();
    let mut sup = 0.0f64;
    let mut l2sq = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let h = model.h_envelope(x);
        sup = sup.max(h.abs());
        let w = if i == 0 {
            0.5 * (xs[1] - xs[0])
        } else if i == xs.len() - 1 {
            0.5 * (xs[i] - xs[i - 1])
        } else {
            0.5 * (xs[i + 1] - xs[i - 1])
        };
        l2sq += h * h * w;
    }
    (sup, l2sq.sqrt())
}

/// Discrete `H^1` indicator for membership of `u0` in
/// `D0 = { v : beta(0, ., v) in H^1 }`: the norm is computed on a grid and
/// once more on its refinement, and growth beyond 1.25 is flagged.
/// A report, not a decision procedure.
#[derive(Debug, Clone)]
pub struct D0Report {
    pub h1_coarse: f64,
    pub h1_fine: f64,
    pub growth_ratio: f64,
    pub flagged: bool,
}

pub fn d0_h1_indicator(
    model: &CoefficientModel,
    u0_coarse: &crate::grid::GridDensity,
    u0_fine: &crate::grid::GridDensity,
) -> Result<D0Report> {
    if u0_fine.grid().n_cells() != 2 * u0_coarse.grid().n_cells() {
        return Err(Error::Config(
            "D0 indicator expects the fine grid to have twice the cells".into(),
        ));
    }
    let h1 = |u: &crate::grid::GridDensity| -> f64 {
        let dx = u.grid().dx();
        let beta: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| model.beta(0.0, u.grid().center(i), v))
            .collect();
        let l2: f64 = beta.iter().map(|b| b * b).sum::<f64>() * dx;
        let grad: f64 = beta
            .windows(2)
            .map(|w| {
                let g = (w[1] - w[0]) / dx;
                g * g
            })
            .sum::<f64>()
            * dx;
        (l2 + grad).sqrt()
    };
    let h1_coarse = h1(u0_coarse);
    let h1_fine = h1(u0_fine);
    let growth_ratio = if h1_coarse > 0.0 { h1_fine / h1_coarse } else { 1.0 };
    Ok(D0Report {
        h1_coarse,
        h1_fine,
        growth_ratio,
        flagged: growth_ratio > 1.25,
    })
}
