//! Uniform 1-D finite-volume grid and cell-averaged densities.
//!
//! Densities live on a truncated box `[x_min, x_max]` split into `n_cells`
//! equal cells; a `GridDensity` stores the cell averages. Off-grid
//! evaluation treats the density as piecewise linear through the cell
//! centers, pinned to zero at the box edges and identically zero outside.

use crate::error::{Error, Result};

/// Uniform cell partition of a truncated 1-D domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::Config(format!(
                "grid bounds must be finite with x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_cells < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 cells, got {n_cells}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    /// Center of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `x`, clamped to the box.
    pub fn cell_of(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).floor() as isize;
        i.clamp(0, self.n_cells as isize - 1) as usize
    }

    /// Grid with twice the cells on the same box.
    pub fn refined(&self) -> Self {
        Self {
            x_min: self.x_min,
            x_max: self.x_max,
            n_cells: self.n_cells * 2,
        }
    }
}

/// Cell-averaged density on a [`Grid1D`] at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Grid1D,
    values: Vec<f64>,
    time_stamp: f64,
}

impl GridDensity {
    pub fn new(grid: Grid1D, values: Vec<f64>, time_stamp: f64) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::Config(format!(
                "density has {} values for a {}-cell grid",
                values.len(),
                grid.n_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            grid,
            values,
            time_stamp,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time_stamp(&self) -> f64 {
        self.time_stamp
    }

    pub(crate) fn with_time(mut self, t: f64) -> Self {
        self.time_stamp = t;
        self
    }

    /// Total mass `dx * sum(values)`.
    pub fn mass(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(*v))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    /// Mass held in the two outermost cells; a truncation-quality monitor.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.values.len();
        self.grid.dx() * (self.values[0] + self.values[n - 1])
    }

    /// Mean of the density interpreted as a probability distribution.
    pub fn mean(&self) -> f64 {
        let dx = self.grid.dx();
        let m: f64 = (0..self.values.len())
            .map(|i| self.grid.center(i) * self.values[i])
            .sum::<f64>()
            * dx;
        m / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let dx = self.grid.dx();
        let v: f64 = (0..self.values.len())
            .map(|i| {
                let d = self.grid.center(i) - mu;
                d * d * self.values[i]
            })
            .sum::<f64>()
            * dx;
        v / self.mass()
    }

    /// Piecewise-linear point evaluation: linear through cell centers,
    /// constant over the half-cells at the walls, zero outside the box.
    /// Collocates with the cell averages at the centers and preserves
    /// constants inside the box.
    pub fn interp(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g.x_min() || x > g.x_max() {
            return 0.0;
        }
        let dx = g.dx();
        let first = g.center(0);
        let last = g.center(g.n_cells() - 1);
        if x <= first {
            return self.values[0];
        }
        if x >= last {
            return self.values[g.n_cells() - 1];
        }
        let s = (x - first) / dx;
        let i = (s.floor() as usize).min(g.n_cells() - 2);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Normalize to unit mass in place. Errors when the mass is zero.
    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Config(format!("cannot normalize density of mass {m}")));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(())
    }

    /// Cell-average restriction onto a grid with half the cells.
    pub fn restrict_to_coarse(&self) -> Result<GridDensity> {
        let n = self.grid.n_cells();
        if n % 2 != 0 || n / 2 < 8 {
            return Err(Error::Config(format!(
                "cannot restrict a {n}-cell grid to a coarse grid"
            )));
        }
        let coarse = Grid1D::new(self.grid.x_min(), self.grid.x_max(), n / 2)?;
        let values = (0..n / 2)
            .map(|i| 0.5 * (self.values[2 * i] + self.values[2 * i + 1]))
            .collect();
        GridDensity::new(coarse, values, self.time_stamp)
    }

    /// Piecewise-linear resampling onto another grid (caller-side regridding
    /// helper for the comparison metrics). Not renormalized.
    pub fn resample(&self, target: &Grid1D) -> Result<GridDensity> {
        let values = (0..target.n_cells())
            .map(|i| self.interp(target.center(i)))
            .collect();
        GridDensity::new(target.clone(), values, self.time_stamp)
    }
}

/// Require two densities to share a grid before comparing them.
pub fn require_same_grid(p: &GridDensity, q: &GridDensity) -> Result<()> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch(format!(
            "[{}, {}] x {} vs [{}, {}] x {}",
            p.grid().x_min(),
            p.grid().x_max(),
            p.grid().n_cells(),
            q.grid().x_min(),
            q.grid().x_max(),
            q.grid().n_cells()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid1D::new(-1.0, 1.0, 4).is_err());
        assert!(Grid1D::new(1.0, -1.0, 64).is_err());
    }

    #[test]
    fn cell_centers_and_lookup() {
        let g = Grid1D::new(-8.0, 8.0, 16).unwrap();
        assert!((g.dx() - 1.0).abs() < 1e-15);
        assert!((g.center(0) + 7.5).abs() < 1e-15);
        assert_eq!(g.cell_of(-7.6), 0);
        assert_eq!(g.cell_of(0.0), 8);
        assert_eq!(g.cell_of(100.0), 15);
    }

    #[test]
    fn interp_collocates_at_centers_and_vanishes_outside() {
        let g = Grid1D::new(-2.0, 2.0, 8).unwrap();
        let vals: Vec<f64> = (0..8).map(|i| 0.1 + i as f64).collect();
        let d = GridDensity::new(g.clone(), vals.clone(), 0.0).unwrap();
        for i in 0..8 {
            assert!((d.interp(g.center(i)) - vals[i]).abs() < 1e-14);
        }
        assert_eq!(d.interp(-2.001), 0.0);
        assert_eq!(d.interp(5.0), 0.0);
        // midpoint between centers is the average
        let mid = 0.5 * (g.center(3) + g.center(4));
        assert!((d.interp(mid) - 0.5 * (vals[3] + vals[4])).abs() < 1e-14);
    }

    #[test]
    fn restriction_preserves_mass() {
        let g = Grid1D::new(-4.0, 4.0, 32).unwrap();
        let vals: Vec<f64> = (0..32).map(|i| ((i as f64) * 0.3).sin().abs()).collect();
        let d = GridDensity::new(g, vals, 1.0).unwrap();
        let c = d.restrict_to_coarse().unwrap();
        assert!((c.mass() - d.mass()).abs() < 1e-13);
        assert_eq!(c.grid().n_cells(), 16);
        assert_eq!(c.time_stamp(), 1.0);
    }
}
