use crate::error::{Error, Result};

/// Uniform partition of the mass interval (0,1) into `n` cells of width `1/n`.
///
/// Cell `i` covers `(i/n, (i+1)/n)` with midpoint `(2i+1)/(2n)`. All fields
/// and velocity arrays in this crate carry one value per cell, understood as
/// the map evaluated at the cell midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Grid> {
        if n_cells == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Grid { n: n_cells })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cell_width(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Midpoint of cell `i`, i.e. `(2i+1)/(2n)`.
    #[inline]
    pub fn midpoint(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        (2 * i + 1) as f64 / (2 * self.n) as f64
    }

    /// Cell edge `k/n` for `k = 0..=n`.
    #[inline]
    pub fn edge(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n);
        k as f64 / self.n as f64
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.midpoint(i)).collect()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoints_partition_unit_interval() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.midpoints(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.edge(0), 0.0);
        assert_eq!(g.edge(4), 1.0);
        assert_eq!(g.cell_width(), 0.25);
    }

    #[test]
    fn rejects_empty_grid() {
        assert!(Grid::new(0).is_err());
    }
}
