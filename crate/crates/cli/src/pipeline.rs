//! Stage orchestration shared by the subcommands: audit, solve, simulate
//! and the full verify pipeline.

use crate::config::{InitialSpec, RunConfig};
use crate::report::RunReport;
use mvfpke_core::coefficients::{
    audit_all, d0_h1_indicator, estimate_lambda, h_envelope_box_norms, CoefficientModel,
    HypothesisGrid,
};
use mvfpke_core::fpke::{
    l1_contraction_check, linf_bound_check, refine_study, solve_fpke, FpkeSolution,
};
use mvfpke_core::grid::GridDensity;
use mvfpke_core::io;
use mvfpke_core::particles::{
    estimate_density, simulate_mv, BandwidthRule, EstimatorConfig, EstimatorKind,
};
use mvfpke_core::rng::{derive_seed, tag};
use mvfpke_core::sde::{
    ensemble_marginals, freeze_coefficients, pathwise_gap, solve_sde, BrownianPath,
};
use mvfpke_core::stats::w1_distance;
use std::path::{Path, PathBuf};

/// Failure category deciding the exit status: configuration problems exit
/// with 2, check or integration failures with 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<mvfpke_core::Error> for CliError {
    fn from(e: mvfpke_core::Error) -> Self {
        match e {
            mvfpke_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    pub report: RunReport,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, out_override: Option<PathBuf>) -> Result<Self, CliError> {
        let out = out_override.unwrap_or_else(|| cfg.output_dir.clone());
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Config(format!("cannot create output dir '{}': {e}", out.display())))?;
        let model = cfg.model()?;
        let mut report = RunReport::default();
        report.model_id = model.id();
        Ok(Self { cfg, out, report })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn cfg(&self) -> &RunConfig {
        &self.cfg
    }

    fn model(&self) -> Result<CoefficientModel, CliError> {
        Ok(self.cfg.model()?)
    }

    fn initial(&self) -> Result<GridDensity, CliError> {
        Ok(self.cfg.initial.build(&self.cfg.grid()?)?)
    }

    fn lattice(&self, u0_linf: f64) -> Result<HypothesisGrid, CliError> {
        let model = self.model()?;
        let a = &self.cfg.audit;
        let r_max = match a.r_max {
            Some(r) => r,
            None => HypothesisGrid::bootstrap_r_max(
                &model,
                self.cfg.t_end,
                self.cfg.x_min,
                self.cfg.x_max,
                u0_linf,
            )?,
        };
        Ok(HypothesisGrid::lattice(
            self.cfg.t_end,
            self.cfg.x_min,
            self.cfg.x_max,
            r_max,
            a.t_points,
            a.x_points,
            a.r_points,
            a.pair_stride,
        )?)
    }

    /// Hypothesis audit: `conditions.csv` plus one check line per
    /// condition, with envelope and initial-datum diagnostics as notes.
    pub fn run_conditions(&mut self) -> Result<(), CliError> {
        let model = self.model()?;
        let grid = self.cfg.grid()?;
        let u0 = self.initial()?;
        let lattice = self.lattice(u0.linf_norm())?;

        let reports = audit_all(&model, &lattice)?;
        io::write_conditions_csv(&self.out.join("conditions.csv"), &reports)?;
        self.report.add_file("conditions.csv");
        for r in &reports {
            let witness = match &r.witness {
                Some(w) => match w.r_bar {
                    Some(rb) => format!(
                        " worst at (t={:.3}, x={:.3}, r={:.3}, rbar={:.3})",
                        w.t, w.x, w.r, rb
                    ),
                    None => format!(" worst at (t={:.3}, x={:.3}, r={:.3})", w.t, w.x, w.r),
                },
                None => String::new(),
            };
            self.report.add_check(
                r.condition.as_str(),
                r.passed,
                format!("estimated constant {:.6e}{witness}", r.estimated_constant),
            );
        }

        let (h_sup, h_l2) = h_envelope_box_norms(&model, &lattice);
        self.report.add_note(format!(
            "envelope on the box: sup |h| = {h_sup:.6e}, L2 quadrature = {h_l2:.6e} (finite-box proxy)"
        ));

        // discrete H1 indicator of beta(0, ., u0) under one refinement
        let fine_u0 = match &self.cfg.initial {
            InitialSpec::Profile(_) => self.cfg.initial.build(&grid.refined())?,
            InitialSpec::Csv(_) => {
                let mut f = u0.resample(&grid.refined())?;
                f.normalize()?;
                f
            }
        };
        let d0 = d0_h1_indicator(&model, &u0, &fine_u0)?;
        self.report.add_note(format!(
            "initial-datum H1 indicator: |beta(0,.,u0)|_H1 = {:.6e} -> {:.6e} under refinement (ratio {:.3}){}",
            d0.h1_coarse,
            d0.h1_fine,
            d0.growth_ratio,
            if d0.flagged { " FLAGGED: norm grows, membership doubtful" } else { "" }
        ));
        Ok(())
    }

    /// Solve the equation; emit `densities.csv` + `fpke_summary.csv` and
    /// the conservation/positivity/bound check lines.
    pub fn run_solve(&mut self, emit_densities: bool) -> Result<FpkeSolution, CliError> {
        let model = self.model()?;
        let u0 = self.initial()?;
        let opts = self.cfg.solve_options();
        let sol = solve_fpke(&model, &u0, self.cfg.t_end, self.cfg.dt, &opts)?;

        if emit_densities {
            let stride = self.cfg.output_stride;
            let kept: Vec<GridDensity> = sol
                .snapshots()
                .iter()
                .enumerate()
                .filter(|(k, _)| k % stride == 0 || *k == sol.snapshots().len() - 1)
                .map(|(_, s)| s.clone())
                .collect();
            io::write_densities_csv(&self.out.join("densities.csv"), &kept)?;
            self.report.add_file("densities.csv");
        }

        self.report.add_check(
            "mass-conservation",
            sol.max_mass_drift() <= 1e-10,
            format!("max |mass - 1| = {:.3e} (tol 1e-10)", sol.max_mass_drift()),
        );
        self.report.add_check(
            "positivity",
            sol.min_cell_value() >= 0.0,
            format!("min cell value = {:.3e}", sol.min_cell_value()),
        );
        self.report.add_check(
            "l1-nonexpansive",
            sol.max_l1_growth() <= 1e-10,
            format!("max L1 growth = {:.3e} (tol 1e-10)", sol.max_l1_growth()),
        );
        let boundary = sol.max_boundary_mass();
        self.report.add_note(if boundary > 1e-6 {
            format!("WARNING: boundary-cell mass reached {boundary:.3e} > 1e-6; the box truncates the solution")
        } else {
            format!("boundary-cell mass stayed at {boundary:.3e} (monitor threshold 1e-6)")
        });

        if self.cfg.checks.linf {
            let lattice = self.lattice(u0.linf_norm())?;
            let lambda = estimate_lambda(&model, &lattice)?.estimated_constant;
            let rep = linf_bound_check(&sol, lambda);
            self.report.add_check(
                "linf-bound",
                rep.passed,
                format!(
                    "max |u|_inf = {:.6} vs Lambda T + |u0|_inf + tol = {:.6}",
                    rep.value, rep.threshold
                ),
            );
        }

        let mut contraction_distances = None;
        if self.cfg.checks.contraction {
            let spec2 = self.cfg.initial2.as_ref().expect("validated in config");
            let u0_bar = spec2.build(sol.grid())?;
            let tol = match self.cfg.checks.contraction_tol {
                Some(t) => t,
                None => {
                    // two-resolution self-distance oracle
                    let table = refine_study(&model, &u0, self.cfg.t_end, self.cfg.dt, 2, &opts)?;
                    (5.0 * table.rows[1].self_distance.unwrap_or(0.0)).max(1e-3)
                }
            };
            let out = l1_contraction_check(
                &model,
                &u0,
                &u0_bar,
                self.cfg.t_end,
                self.cfg.dt,
                &opts,
                tol,
            )?;
            self.report.add_check(
                "l1-contraction",
                out.report.passed,
                format!(
                    "excess = {:.3e} (tol {:.3e}, initial distance {:.4})",
                    out.report.value, out.report.threshold, out.initial_distance
                ),
            );
            contraction_distances = Some(out.distances);
        }

        io::write_fpke_summary_csv(
            &self.out.join("fpke_summary.csv"),
            &sol,
            contraction_distances.as_deref(),
        )?;
        self.report.add_file("fpke_summary.csv");
        Ok(sol)
    }

    /// Frozen-coefficient ensemble, pathwise-gap study and the
    /// self-consistent particle system, with marginal comparisons.
    pub fn run_simulate(&mut self, sol: &FpkeSolution) -> Result<(), CliError> {
        let model = self.model()?;
        if !self.cfg.sde.enabled && !self.cfg.particles.enabled {
            self.report
                .add_note("no stochastic stage enabled; nothing to simulate");
            return Ok(());
        }

        if self.cfg.sde.enabled {
            let sde = &self.cfg.sde;
            let frozen = freeze_coefficients(&model, sol)?;

            let marginals =
                ensemble_marginals(&frozen, sde.n_paths, sde.dt, &sde.times, sde.base_seed)?;
            let mut pairs = Vec::new();
            for (j, &t) in sde.times.iter().enumerate() {
                let truth = sol.snapshot_at(t)?;
                let w1 = w1_distance(&marginals[j], truth)?;
                self.report.add_check(
                    format!("sde-marginal-w1(t={t})"),
                    w1 <= sde.w1_tol,
                    format!("W1 = {:.5} (tol {})", w1, sde.w1_tol),
                );
                pairs.push((truth.clone(), marginals[j].clone()));
            }
            io::write_marginals_csv(&self.out.join("marginals_sde.csv"), &pairs)?;
            self.report.add_file("marginals_sde.csv");

            // two-integrator same-noise coupling over bridge refinements
            let n_steps = (sol.t_end() / sde.dt).round().max(1.0) as usize;
            let gap_dt = sol.t_end() / n_steps as f64;
            let noise = BrownianPath::sample(n_steps, gap_dt, sde.gap_noise_seed);
            let table = pathwise_gap(&frozen, sde.gap_initial_seed, &noise, sde.gap_levels)?;
            io::write_gap_csv(&self.out.join("gap_table.csv"), &table)?;
            self.report.add_file("gap_table.csv");
            match table.fitted_slope {
                Some(slope) => self.report.add_check(
                    "pathwise-gap-decay",
                    slope >= sde.gap_slope_min,
                    format!(
                        "fitted log2 slope = {:.3} over {} levels (min {})",
                        slope,
                        table.rows.len(),
                        sde.gap_slope_min
                    ),
                ),
                None => {
                    let max_gap = table.rows.iter().map(|r| r.sup_gap).fold(0.0, f64::max);
                    self.report.add_check(
                        "pathwise-gap-decay",
                        max_gap == 0.0,
                        format!("integrators coincide exactly at every level (max gap {max_gap:e})"),
                    );
                }
            }

            if sde.save_paths > 0 {
                let paths: Vec<_> = (0..sde.save_paths)
                    .map(|i| {
                        let noise = BrownianPath::sample(
                            n_steps,
                            gap_dt,
                            derive_seed(&[sde.base_seed, i as u64, tag::NOISE]),
                        );
                        solve_sde(
                            &frozen,
                            &noise,
                            derive_seed(&[sde.base_seed, i as u64, tag::INITIAL]),
                            sde.integrator,
                        )
                    })
                    .collect::<Result<_, _>>()?;
                io::write_trajectories_csv(&self.out.join("trajectories.csv"), &paths)?;
                self.report.add_file("trajectories.csv");
            }
        }

        if self.cfg.particles.enabled {
            let pc = &self.cfg.particles;
            let grid = sol.grid().clone();
            let est = match pc.estimator.as_str() {
                "histogram" => EstimatorConfig::histogram(grid.clone()),
                _ => {
                    let rule = match pc.bandwidth_rule.as_str() {
                        "fixed" => BandwidthRule::Fixed(pc.bandwidth.expect("validated")),
                        _ => BandwidthRule::Scott,
                    };
                    EstimatorConfig {
                        grid: grid.clone(),
                        kind: EstimatorKind::GaussianKernel(rule),
                    }
                }
            };
            let u0 = self.initial()?;
            let snaps = simulate_mv(
                &u0,
                &model,
                sol.t_end(),
                pc.dt,
                pc.n,
                &est,
                pc.base_seed,
                1,
            )?;
            let n_steps = snaps.len() - 1;
            let dt_eff = sol.t_end() / n_steps as f64;

            let mut pairs = Vec::new();
            let mut kept = Vec::new();
            for &t in &pc.times {
                let k = (t / dt_eff).round() as usize;
                if k > n_steps || (t - k as f64 * dt_eff).abs() > 1e-9 {
                    return Err(CliError::Config(format!(
                        "particles.times entry {t} is not a multiple of the particle step {dt_eff}"
                    )));
                }
                let ens = &snaps[k];
                let emp = estimate_density(ens, &est)?;
                let truth = sol.snapshot_at(t)?;
                let w1 = w1_distance(&emp, truth)?;
                self.report.add_check(
                    format!("particles-w1(t={t})"),
                    w1 <= pc.w1_tol,
                    format!("W1 = {:.5} (tol {})", w1, pc.w1_tol),
                );
                pairs.push((truth.clone(), emp));
                kept.push(ens.clone());
            }
            io::write_marginals_csv(&self.out.join("marginals_particles.csv"), &pairs)?;
            self.report.add_file("marginals_particles.csv");
            io::write_particles_csv(&self.out.join("particles.csv"), &kept)?;
            self.report.add_file("particles.csv");
        }
        Ok(())
    }

    /// Write `report.txt`; returns whether every check passed.
    pub fn finalize(&mut self, quiet: bool) -> Result<bool, CliError> {
        self.report
            .write(&self.out)
            .map_err(|e| CliError::Run(format!("cannot write report: {e}")))?;
        if !quiet {
            self.report.print();
        }
        Ok(self.report.all_passed())
    }
}
