//! CSV interchange formats.
//!
//! Time stamps are printed with 17 significant digits (exact `f64`
//! round-trip); positions and values use the shortest exact decimal.
//! Writers are deterministic: same data, same bytes.

use crate::coefficients::ConditionReport;
use crate::error::{Error, Result};
use crate::fpke::FpkeSolution;
use crate::grid::{Grid1D, GridDensity};
use crate::particles::ParticleEnsemble;
use crate::sde::{GapTable, SdePath};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// 17-significant-digit decimal, enough to reproduce the `f64` exactly.
pub fn format_time(t: f64) -> String {
    format!("{t:.16e}")
}

/// `t,x,u` rows, one per (snapshot, cell).
pub fn write_densities_csv(path: &Path, snapshots: &[GridDensity]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,u")?;
    for snap in snapshots {
        let t = format_time(snap.time_stamp());
        for (i, v) in snap.values().iter().enumerate() {
            writeln!(w, "{t},{},{v}", snap.grid().center(i))?;
        }
    }
    Ok(())
}

/// Initial data from a CSV of cell values (`x,u` header, one row per
/// cell). The row count must match the grid; values are renormalized to
/// unit mass.
pub fn read_initial_csv(path: &Path, grid: &Grid1D) -> Result<GridDensity> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::with_capacity(grid.n_cells());
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        // accept `u`, `x,u` or full `t,x,u` rows; the value is last
        let fields: Vec<&str> = line.split(',').collect();
        let value_field = match fields.as_slice() {
            [.., u] if fields.len() <= 3 => u,
            _ => {
                return Err(Error::Config(format!(
                    "initial CSV line {} has {} fields, expected at most 't,x,u'",
                    lineno + 1,
                    fields.len()
                )))
            }
        };
        let v: f64 = value_field.trim().parse().map_err(|_| {
            Error::Config(format!("initial CSV line {}: bad value '{value_field}'", lineno + 1))
        })?;
        values.push(v);
    }
    if values.len() != grid.n_cells() {
        return Err(Error::Config(format!(
            "initial CSV has {} values for a {}-cell grid",
            values.len(),
            grid.n_cells()
        )));
    }
    let mut d = GridDensity::new(grid.clone(), values, 0.0)?;
    d.normalize()?;
    Ok(d)
}

/// Per-snapshot solver summary. The contraction column appears only when
/// a second initial datum was configured.
pub fn write_fpke_summary_csv(
    path: &Path,
    sol: &FpkeSolution,
    contraction: Option<&[(f64, f64)]>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match contraction {
        None => writeln!(w, "t,mass,mass_drift,min_value,linf")?,
        Some(_) => writeln!(w, "t,mass,mass_drift,min_value,linf,l1_distance")?,
    }
    let m0 = sol.initial().mass();
    for (k, snap) in sol.snapshots().iter().enumerate() {
        let t = format_time(snap.time_stamp());
        let mass = snap.mass();
        let drift = mass - m0;
        let min = snap.min_value();
        let linf = snap.linf_norm();
        match contraction {
            None => writeln!(w, "{t},{mass},{drift},{min},{linf}")?,
            Some(d) => writeln!(w, "{t},{mass},{drift},{min},{linf},{}", d[k].1)?,
        }
    }
    Ok(())
}

/// Audit reports: `condition,passed,estimated_constant,wt,wx,wr,wrbar`.
pub fn write_conditions_csv(path: &Path, reports: &[ConditionReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "condition,passed,estimated_constant,wt,wx,wr,wrbar")?;
    for r in reports {
        let (wt, wx, wr, wrb) = match &r.witness {
            Some(wit) => (
                wit.t.to_string(),
                wit.x.to_string(),
                wit.r.to_string(),
                wit.r_bar.map(|v| v.to_string()).unwrap_or_default(),
            ),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{wt},{wx},{wr},{wrb}",
            r.condition.as_str(),
            r.passed,
            r.estimated_constant
        )?;
    }
    Ok(())
}

/// Side-by-side marginal comparison: `t,x,u_pde,u_empirical`.
pub fn write_marginals_csv(path: &Path, pairs: &[(GridDensity, GridDensity)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,u_pde,u_empirical")?;
    for (pde, emp) in pairs {
        let t = format_time(emp.time_stamp());
        for i in 0..pde.grid().n_cells() {
            writeln!(
                w,
                "{t},{},{},{}",
                pde.grid().center(i),
                pde.values()[i],
                emp.values()[i]
            )?;
        }
    }
    Ok(())
}

/// `level,dt,sup_gap` rows.
pub fn write_gap_csv(path: &Path, table: &GapTable) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "level,dt,sup_gap")?;
    for row in &table.rows {
        writeln!(w, "{},{},{}", row.level, row.dt, row.sup_gap)?;
    }
    Ok(())
}

/// Long-format trajectories: `path_id,t,x`.
pub fn write_trajectories_csv(path: &Path, paths: &[SdePath]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "path_id,t,x")?;
    for (id, p) in paths.iter().enumerate() {
        for (t, x) in p.times.iter().zip(&p.states) {
            writeln!(w, "{id},{},{x}", format_time(*t))?;
        }
    }
    Ok(())
}

/// Long-format particle snapshots: `t,particle_id,x`.
pub fn write_particles_csv(path: &Path, snapshots: &[ParticleEnsemble]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,particle_id,x")?;
    for ens in snapshots {
        let t = format_time(ens.time_stamp());
        for (id, x) in ens.positions().iter().enumerate() {
            writeln!(w, "{t},{id},{x}")?;
        }
    }
    Ok(())
}
