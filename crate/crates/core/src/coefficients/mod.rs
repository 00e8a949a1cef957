//! Nemytskii coefficient pairs `(b, a)` and their derived quantities.
//!
//! A model evaluates the drift `b(t, x, r)` and scalar diffusion
//! `a(t, x, r)`, where `r` is the value of the density at `(t, x)`. The
//! transformed coefficients
//!
//! ```text
//! beta(t, x, r) = a(t, x, r) * r        b_star(t, x, r) = b(t, x, r) * r
//! ```
//!
//! are the natural variables of the divergence-form equation: `beta`
//! carries the diffusion monotonicity and `b_star` the advective flux.
//! Each model declares an ellipticity constant `gamma0` and a Lipschitz
//! envelope `h(x)`; the [`audit`] submodule checks the structural
//! hypotheses against these declared constants on a finite lattice.
//!
//! Built-in families:
//! * `constant`: `a = alpha`, `b = c`,
//! * `porous-regularized`: `a = base + alpha (1 + kappa sin t) G(x) r^2/(1+r^2)`,
//!   `b = 0`, with `G(x) = exp(-x^2)` or `G = 1`,
//! * `burgers-gauss`: the porous diffusion paired with the saturating
//!   drift `b = c exp(-x^2) / (1+r^2)`.

mod audit;

pub use audit::{
    audit_all, check_lipschitz_bstar, check_monotonicity, check_nondegeneracy, check_h2_bounds,
    d0_h1_indicator, estimate_lambda, h_envelope_box_norms, time_regularity_scan, ConditionId,
    ConditionReport, D0Report, HypothesisGrid, TimeRegularityReport, Witness, TOL_LIPSCHITZ,
    TOL_MONOTONE,
};

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Relative step used by the finite-difference fallback derivatives.
pub const FD_REL_STEP: f64 = 1e-5;

/// Step proportional to the coordinate scale, never below the relative step.
pub fn fd_step(coord: f64) -> f64 {
    FD_REL_STEP * coord.abs().max(1.0)
}

/// Central first difference.
pub fn central_diff(f: impl Fn(f64) -> f64, z: f64, step: f64) -> f64 {
    (f(z + step) - f(z - step)) / (2.0 * step)
}

/// Central second difference.
pub fn central_second_diff(f: impl Fn(f64) -> f64, z: f64, step: f64) -> f64 {
    (f(z + step) - 2.0 * f(z) + f(z - step)) / (step * step)
}

pub type CoefFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied coefficient pair with optional analytic partials.
/// Missing partials fall back to central differences.
#[derive(Clone)]
pub struct UserModel {
    pub label: String,
    pub b: CoefFn,
    pub a: CoefFn,
    pub db_dr: Option<CoefFn>,
    pub da_dr: Option<CoefFn>,
    pub db_dx: Option<CoefFn>,
    pub da_dx: Option<CoefFn>,
    pub d2beta_dx2: Option<CoefFn>,
    pub h: EnvelopeFn,
}

impl UserModel {
    pub fn new(
        label: impl Into<String>,
        b: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        a: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            b: Arc::new(b),
            a: Arc::new(a),
            db_dr: None,
            da_dr: None,
            db_dx: None,
            da_dx: None,
            d2beta_dx2: None,
            h: Arc::new(h),
        }
    }
}

#[derive(Clone)]
enum Family {
    Constant {
        a: f64,
        b: f64,
    },
    PorousRegularized {
        base: f64,
        alpha: f64,
        kappa: f64,
        x_dependent: bool,
    },
    BurgersGauss {
        c: f64,
        base: f64,
        alpha: f64,
        kappa: f64,
        x_dependent: bool,
    },
    User(UserModel),
}

impl Family {
    fn name(&self) -> &str {
        match self {
            Family::Constant { .. } => "constant",
            Family::PorousRegularized { .. } => "porous-regularized",
            Family::BurgersGauss { .. } => "burgers-gauss",
            Family::User(_) => "user",
        }
    }
}

/// An evaluable Nemytskii pair with declared constants.
#[derive(Clone)]
pub struct CoefficientModel {
    family: Family,
    gamma0: f64,
    /// Scale of the declared envelope `h`; `None` uses the family default.
    h_scale: Option<f64>,
}

impl fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoefficientModel({})", self.id())
    }
}

fn gauss(x: f64) -> f64 {
    (-x * x).exp()
}

/// `r^2 / (1 + r^2)`, the saturation profile shared by the built-ins.
fn sat(r: f64) -> f64 {
    r * r / (1.0 + r * r)
}

fn sat_prime(r: f64) -> f64 {
    let d = 1.0 + r * r;
    2.0 * r / (d * d)
}

impl CoefficientModel {
    /// `a = alpha`, `b = c`; `gamma0` defaults to `alpha`.
    pub fn constant(alpha: f64, c: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!(
                "constant family needs a > 0, got {alpha}"
            )));
        }
        Ok(Self {
            family: Family::Constant { a: alpha, b: c },
            gamma0: alpha,
            h_scale: None,
        })
    }

    /// `a = gamma0 + alpha (1 + kappa sin t) G(x) r^2/(1+r^2)`, `b = 0`.
    pub fn porous_regularized(gamma0: f64, alpha: f64, kappa: f64, x_dependent: bool) -> Result<Self> {
        Self::check_gamma0(gamma0)?;
        Ok(Self {
            family: Family::PorousRegularized {
                base: gamma0,
                alpha,
                kappa,
                x_dependent,
            },
            gamma0,
            h_scale: None,
        })
    }

    /// Porous diffusion plus the drift `b = c exp(-x^2)/(1+r^2)`.
    pub fn burgers_gauss(
        gamma0: f64,
        c: f64,
        alpha: f64,
        kappa: f64,
        x_dependent: bool,
    ) -> Result<Self> {
        Self::check_gamma0(gamma0)?;
        Ok(Self {
            family: Family::BurgersGauss {
                c,
                base: gamma0,
                alpha,
                kappa,
                x_dependent,
            },
            gamma0,
            h_scale: None,
        })
    }

    pub fn user(gamma0: f64, model: UserModel) -> Result<Self> {
        Self::check_gamma0(gamma0)?;
        Ok(Self {
            family: Family::User(model),
            gamma0,
            h_scale: None,
        })
    }

    fn check_gamma0(gamma0: f64) -> Result<()> {
        if !(gamma0.is_finite() && gamma0 > 0.0) {
            return Err(Error::Config(format!("gamma0 must be positive, got {gamma0}")));
        }
        Ok(())
    }

    /// Override the base level of the porous diffusion term (the declared
    /// `gamma0` keeps gating the audits). Lets one express diffusions like
    /// `a(r) = 1/(1+r^2) = 1 - r^2/(1+r^2)` that violate monotonicity.
    pub fn with_base_level(mut self, base: f64) -> Self {
        match &mut self.family {
            Family::PorousRegularized { base: b, .. } | Family::BurgersGauss { base: b, .. } => {
                *b = base
            }
            _ => {}
        }
        self
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Result<Self> {
        Self::check_gamma0(gamma0)?;
        self.gamma0 = gamma0;
        Ok(self)
    }

    pub fn with_h_scale(mut self, c_h: f64) -> Self {
        self.h_scale = Some(c_h);
        self
    }

    /// Build a model from the flat configuration surface: a family name,
    /// a map of named parameters and the declared `gamma0`.
    pub fn from_config(family: &str, params: &BTreeMap<String, f64>, gamma0: f64) -> Result<Self> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let known: &[&str] = match family {
            "constant" => &["a", "c"],
            "porous-regularized" => &["alpha", "kappa", "xdep", "a0", "c_h"],
            "burgers-gauss" => &["c", "alpha", "kappa", "xdep", "a0", "c_h"],
            other => {
                return Err(Error::Config(format!(
                    "unknown coefficient family '{other}' (expected constant | porous-regularized | burgers-gauss)"
                )))
            }
        };
        for key in params.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown parameter '{key}' for family '{family}'"
                )));
            }
        }
        let model = match family {
            "constant" => CoefficientModel::constant(get("a", 1.0), get("c", 0.0))?
                .with_gamma0(gamma0)?,
            "porous-regularized" => {
                let m = CoefficientModel::porous_regularized(
                    gamma0,
                    get("alpha", 1.0),
                    get("kappa", 0.0),
                    get("xdep", 1.0) != 0.0,
                )?;
                match params.get("a0") {
                    Some(&a0) => m.with_base_level(a0),
                    None => m,
                }
            }
            "burgers-gauss" => {
                let m = CoefficientModel::burgers_gauss(
                    gamma0,
                    get("c", 1.0),
                    get("alpha", 1.0),
                    get("kappa", 0.0),
                    get("xdep", 1.0) != 0.0,
                )?;
                match params.get("a0") {
                    Some(&a0) => m.with_base_level(a0),
                    None => m,
                }
            }
            _ => unreachable!(),
        };
        Ok(match params.get("c_h") {
            Some(&c_h) => model.with_h_scale(c_h),
            None => model,
        })
    }

    pub fn family_name(&self) -> &str {
        self.family.name()
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Canonical identifier; solutions carry it so downstream stages can
    /// detect a model/solution mismatch.
    pub fn id(&self) -> String {
        let params = self.params();
        let body: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
        match &self.family {
            Family::User(u) => format!("user:{};gamma0={:e}", u.label, self.gamma0),
            _ => format!(
                "{}{{{}}};gamma0={:e}",
                self.family.name(),
                body.join(","),
                self.gamma0
            ),
        }
    }

    /// Named parameters of the built-in families (empty for `user`).
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        match &self.family {
            Family::Constant { a, b } => {
                map.insert("a".into(), *a);
                map.insert("c".into(), *b);
            }
            Family::PorousRegularized {
                base,
                alpha,
                kappa,
                x_dependent,
            } => {
                map.insert("a0".into(), *base);
                map.insert("alpha".into(), *alpha);
                map.insert("kappa".into(), *kappa);
                map.insert("xdep".into(), if *x_dependent { 1.0 } else { 0.0 });
            }
            Family::BurgersGauss {
                c,
                base,
                alpha,
                kappa,
                x_dependent,
            } => {
                map.insert("c".into(), *c);
                map.insert("a0".into(), *base);
                map.insert("alpha".into(), *alpha);
                map.insert("kappa".into(), *kappa);
                map.insert("xdep".into(), if *x_dependent { 1.0 } else { 0.0 });
            }
            Family::User(_) => {}
        }
        if let Some(c_h) = self.h_scale {
            map.insert("c_h".into(), c_h);
        }
        map
    }

    /// Drift `b(t, x, r)`.
    pub fn b(&self, t: f64, x: f64, r: f64) -> f64 {
        match &self.family {
            Family::Constant { b, .. } => *b,
            Family::PorousRegularized { .. } => 0.0,
            Family::BurgersGauss { c, .. } => c * gauss(x) / (1.0 + r * r),
            Family::User(u) => (u.b)(t, x, r),
        }
    }

    /// Diffusion `a(t, x, r)`.
    pub fn a(&self, t: f64, x: f64, r: f64) -> f64 {
        match &self.family {
            Family::Constant { a, .. } => *a,
            Family::PorousRegularized {
                base,
                alpha,
                kappa,
                x_dependent,
            }
            | Family::BurgersGauss {
                base,
                alpha,
                kappa,
                x_dependent,
                ..
            } => {
                let g = if *x_dependent { gauss(x) } else { 1.0 };
                base + alpha * (1.0 + kappa * t.sin()) * g * sat(r)
            }
            Family::User(u) => (u.a)(t, x, r),
        }
    }

    /// `beta = a * r`, computed as one multiplication.
    pub fn beta(&self, t: f64, x: f64, r: f64) -> f64 {
        self.a(t, x, r) * r
    }

    /// `b_star = b * r`, computed as one multiplication.
    pub fn bstar(&self, t: f64, x: f64, r: f64) -> f64 {
        self.b(t, x, r) * r
    }

    /// Checked `beta`; a non-finite diffusion evaluation is an error.
    pub fn eval_beta(&self, t: f64, x: f64, r: f64) -> Result<f64> {
        let v = self.beta(t, x, r);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ModelEvaluation { t, x, r })
        }
    }

    /// Checked `b_star`; a non-finite drift evaluation is an error.
    pub fn eval_bstar(&self, t: f64, x: f64, r: f64) -> Result<f64> {
        let v = self.bstar(t, x, r);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ModelEvaluation { t, x, r })
        }
    }

    pub fn db_dr(&self, t: f64, x: f64, r: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } | Family::PorousRegularized { .. } => 0.0,
            Family::BurgersGauss { c, .. } => {
                let d = 1.0 + r * r;
                -2.0 * c * gauss(x) * r / (d * d)
            }
            Family::User(u) => match &u.db_dr {
                Some(f) => f(t, x, r),
                None => central_diff(|z| self.b(t, x, z), r, fd_step(r)),
            },
        }
    }

    pub fn da_dr(&self, t: f64, x: f64, r: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } => 0.0,
            Family::PorousRegularized {
                alpha,
                kappa,
                x_dependent,
                ..
            }
            | Family::BurgersGauss {
                alpha,
                kappa,
                x_dependent,
                ..
            } => {
                let g = if *x_dependent { gauss(x) } else { 1.0 };
                alpha * (1.0 + kappa * t.sin()) * g * sat_prime(r)
            }
            Family::User(u) => match &u.da_dr {
                Some(f) => f(t, x, r),
                None => central_diff(|z| self.a(t, x, z), r, fd_step(r)),
            },
        }
    }

    pub fn db_dx(&self, t: f64, x: f64, r: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } | Family::PorousRegularized { .. } => 0.0,
            Family::BurgersGauss { c, .. } => -2.0 * x * c * gauss(x) / (1.0 + r * r),
            Family::User(u) => match &u.db_dx {
                Some(f) => f(t, x, r),
                None => central_diff(|z| self.b(t, z, r), x, fd_step(x)),
            },
        }
    }

    pub fn da_dx(&self, t: f64, x: f64, r: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } => 0.0,
            Family::PorousRegularized {
                alpha,
                kappa,
                x_dependent,
                ..
            }
            | Family::BurgersGauss {
                alpha,
                kappa,
                x_dependent,
                ..
            } => {
                if *x_dependent {
                    alpha * (1.0 + kappa * t.sin()) * (-2.0 * x * gauss(x)) * sat(r)
                } else {
                    0.0
                }
            }
            Family::User(u) => match &u.da_dx {
                Some(f) => f(t, x, r),
                None => central_diff(|z| self.a(t, z, r), x, fd_step(x)),
            },
        }
    }

    /// Second spatial derivative of `beta`, analytic for the built-ins.
    pub fn d2beta_dx2(&self, t: f64, x: f64, r: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } => 0.0,
            Family::PorousRegularized {
                alpha,
                kappa,
                x_dependent,
                ..
            }
            | Family::BurgersGauss {
                alpha,
                kappa,
                x_dependent,
                ..
            } => {
                if *x_dependent {
                    let g2 = (4.0 * x * x - 2.0) * gauss(x);
                    alpha * (1.0 + kappa * t.sin()) * g2 * sat(r) * r
                } else {
                    0.0
                }
            }
            Family::User(u) => match &u.d2beta_dx2 {
                Some(f) => f(t, x, r),
                None => central_second_diff(|z| self.beta(t, z, r), x, fd_step(x)),
            },
        }
    }

    /// Declared Lipschitz/growth envelope `h(x)`.
    pub fn h_envelope(&self, x: f64) -> f64 {
        match &self.family {
            Family::Constant { b, .. } => self.h_scale.unwrap_or_else(|| b.abs()),
            Family::PorousRegularized {
                alpha,
                kappa,
                x_dependent,
                ..
            } => {
                let c_h = self
                    .h_scale
                    .unwrap_or_else(|| 2.0 * alpha.abs() * (1.0 + kappa.abs()));
                if *x_dependent {
                    c_h * (1.0 + x.abs()) * gauss(x)
                } else {
                    c_h
                }
            }
            Family::BurgersGauss { c, .. } => {
                let c_h = self.h_scale.unwrap_or_else(|| 2.0 * c.abs());
                c_h * gauss(x)
            }
            Family::User(u) => (u.h)(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn beta_identity_case() {
        // a == 1 makes beta(r) = r
        let m = CoefficientModel::constant(1.0, 0.0).unwrap();
        assert_eq!(m.eval_beta(0.0, 0.0, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn beta_vanishes_at_zero_density() {
        let m = CoefficientModel::porous_regularized(1.0, 1.0, 0.0, false).unwrap();
        assert_eq!(m.eval_beta(0.3, 0.7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn beta_hand_value_porous() {
        // a(r) = 1 + r^2/(1+r^2): a(1) = 1.5, beta(1) = 1.5
        let m = CoefficientModel::porous_regularized(1.0, 1.0, 0.0, false).unwrap();
        assert!((m.eval_beta(0.0, 0.0, 1.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn bstar_cases() {
        let zero = CoefficientModel::constant(1.0, 0.0).unwrap();
        assert_eq!(zero.eval_bstar(0.0, 1.0, 3.0).unwrap(), 0.0);

        let c = CoefficientModel::constant(1.0, 0.5).unwrap();
        assert_eq!(c.eval_bstar(0.0, 1.0, 2.0).unwrap(), 1.0);

        // b(x,r) = e^{-x^2}/(1+r^2) at x=0, r=1 gives b* = 0.5
        let bg = CoefficientModel::burgers_gauss(1.0, 1.0, 0.0, 0.0, true).unwrap();
        assert!((bg.eval_bstar(0.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eval_propagates_non_finite() {
        let m = CoefficientModel::user(
            1.0,
            UserModel::new("bad", |_, _, _| 0.0, |_, _, r| 1.0 / r, |_| 0.0),
        )
        .unwrap();
        assert!(m.eval_beta(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn base_level_override_expresses_reciprocal_diffusion() {
        // a0=1, alpha=-1: a(r) = 1 - r^2/(1+r^2) = 1/(1+r^2)
        let m = CoefficientModel::porous_regularized(0.15, -1.0, 0.0, false)
            .unwrap()
            .with_base_level(1.0);
        for r in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            let want = 1.0 / (1.0 + r * r);
            assert!((m.a(0.0, 0.0, r) - want).abs() < 1e-15, "r={r}");
        }
        assert_eq!(m.gamma0(), 0.15);
    }

    #[test]
    fn fd_fallback_converges_quadratically() {
        // user family mirroring porous-regularized, no analytic partials
        let analytic = CoefficientModel::porous_regularized(0.5, 1.0, 0.5, true).unwrap();
        let plain = CoefficientModel::user(
            0.5,
            UserModel::new(
                "porous-mirror",
                |_, _, _| 0.0,
                |t, x, r| 0.5 + (1.0 + 0.5 * t.sin()) * (-x * x).exp() * r * r / (1.0 + r * r),
                |_| 0.0,
            ),
        )
        .unwrap();
        let (t, x, r) = (0.4, 0.3, 0.8);
        let exact = analytic.da_dr(t, x, r);
        let coarse = (central_diff(|z| plain.a(t, x, z), r, 1e-3) - exact).abs();
        let fine = (central_diff(|z| plain.a(t, x, z), r, 5e-4) - exact).abs();
        assert!(
            coarse / fine >= 3.5,
            "halving the step should cut the error ~4x: {coarse:e} -> {fine:e}"
        );
        // the default-step fallback agrees closely
        assert!((plain.da_dr(t, x, r) - exact).abs() < 1e-8);
    }

    #[test]
    fn analytic_partials_match_differences() {
        let models = [
            CoefficientModel::porous_regularized(0.5, 1.0, 0.5, true).unwrap(),
            CoefficientModel::burgers_gauss(0.5, 1.0, 0.8, 0.3, true).unwrap(),
        ];
        for m in &models {
            for &(t, x, r) in &[(0.0, 0.0, 0.5), (0.7, -1.2, 2.0), (1.5, 0.4, -1.1)] {
                let num_dr = central_diff(|z| m.a(t, x, z), r, 1e-6 * r.abs().max(1.0));
                assert!((m.da_dr(t, x, r) - num_dr).abs() < 1e-7);
                let num_dx = central_diff(|z| m.a(t, z, r), x, 1e-6 * x.abs().max(1.0));
                assert!((m.da_dx(t, x, r) - num_dx).abs() < 1e-7);
                let num_bx = central_diff(|z| m.b(t, z, r), x, 1e-6 * x.abs().max(1.0));
                assert!((m.db_dx(t, x, r) - num_bx).abs() < 1e-7);
                let num_br = central_diff(|z| m.b(t, x, z), r, 1e-6 * r.abs().max(1.0));
                assert!((m.db_dr(t, x, r) - num_br).abs() < 1e-7);
                let num_b2 = central_second_diff(|z| m.beta(t, z, r), x, 1e-4);
                assert!((m.d2beta_dx2(t, x, r) - num_b2).abs() < 1e-5);
            }
        }
    }

    proptest! {
        #[test]
        fn beta_and_bstar_are_exact_products(
            t in 0.0..2.0f64,
            x in -6.0..6.0f64,
            r in -4.0..4.0f64,
        ) {
            for m in [
                CoefficientModel::constant(1.3, 0.7).unwrap(),
                CoefficientModel::porous_regularized(0.5, 1.0, 0.5, true).unwrap(),
                CoefficientModel::burgers_gauss(0.5, 1.0, 1.0, 0.2, true).unwrap(),
            ] {
                prop_assert_eq!(m.beta(t, x, r), m.a(t, x, r) * r);
                prop_assert_eq!(m.bstar(t, x, r), m.b(t, x, r) * r);
            }
        }
    }
}
