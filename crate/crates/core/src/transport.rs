//! Lagrangian state model: monotone transport maps on a uniform mass grid,
//! velocity fields, particle systems, plateau structure, and the bridge to
//! atomic measures on the line.

use crate::error::{ensure_finite, Error, Result};
use crate::grid::Grid;

/// Nondecreasing piecewise-constant map from (0,1) to the line, one value per
/// grid cell. Element of the cone of monotone maps; the Lagrangian coordinate
/// of a probability measure.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportMap {
    grid: Grid,
    values: Vec<f64>,
}

impl TransportMap {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<TransportMap> {
        if values.len() != grid.n_cells() {
            return Err(Error::invalid(
                "transport map",
                format!("{} values on a {}-cell grid", values.len(), grid.n_cells()),
            ));
        }
        ensure_finite(&values, "transport map")?;
        for i in 1..values.len() {
            if values[i - 1] > values[i] {
                return Err(Error::NotMonotone {
                    index: i,
                    prev: values[i - 1],
                    next: values[i],
                });
            }
        }
        Ok(TransportMap { grid, values })
    }

    /// Identity map sampled at cell midpoints.
    pub fn identity(grid: Grid) -> TransportMap {
        TransportMap {
            values: grid.midpoints(),
            grid,
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Velocity values on the same grid as a paired transport map.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    grid: Grid,
    values: Vec<f64>,
}

impl VelocityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<VelocityField> {
        if values.len() != grid.n_cells() {
            return Err(Error::invalid(
                "velocity field",
                format!("{} values on a {}-cell grid", values.len(), grid.n_cells()),
            ));
        }
        ensure_finite(&values, "velocity field")?;
        Ok(VelocityField { grid, values })
    }

    pub fn zero(grid: Grid) -> VelocityField {
        VelocityField {
            values: vec![0.0; grid.n_cells()],
            grid,
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Finite system of ordered particles with masses summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystem {
    masses: Vec<f64>,
    positions: Vec<f64>,
    velocities: Vec<f64>,
}

const MASS_TOL: f64 = 1e-12;

impl ParticleSystem {
    pub fn new(masses: Vec<f64>, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        let k = masses.len();
        if k == 0 || positions.len() != k || velocities.len() != k {
            return Err(Error::invalid(
                "particle system",
                format!(
                    "lengths masses={} positions={} velocities={}",
                    k,
                    positions.len(),
                    velocities.len()
                ),
            ));
        }
        ensure_finite(&masses, "particle masses")?;
        ensure_finite(&positions, "particle positions")?;
        ensure_finite(&velocities, "particle velocities")?;
        if masses.iter().any(|&m| m <= 0.0) {
            return Err(Error::invalid("particle system", "nonpositive mass"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(
                "particle system",
                format!("masses sum to {total}, expected 1"),
            ));
        }
        for i in 1..k {
            if positions[i - 1] > positions[i] {
                return Err(Error::NotMonotone {
                    index: i,
                    prev: positions[i - 1],
                    next: positions[i],
                });
            }
        }
        Ok(ParticleSystem {
            masses,
            positions,
            velocities,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    #[inline]
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    #[inline]
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    #[inline]
    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    /// Cumulative masses `M_i = m_1 + ... + m_i`; returns `[M_0=0, ..., M_K=1]`.
    pub fn cumulative_masses(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &m in &self.masses {
            acc += m;
            out.push(acc);
        }
        let last = out.len() - 1;
        out[last] = 1.0;
        out
    }

    pub fn total_momentum(&self) -> f64 {
        self.masses
            .iter()
            .zip(&self.velocities)
            .map(|(m, v)| m * v)
            .sum()
    }
}

/// Atomic probability measure on the line with optional co-located momentum.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerianMeasure {
    positions: Vec<f64>,
    masses: Vec<f64>,
    momenta: Option<Vec<f64>>,
}

impl EulerianMeasure {
    pub fn new(positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        Self::with_momenta(positions, masses, None)
    }

    pub fn with_momenta(
        positions: Vec<f64>,
        masses: Vec<f64>,
        momenta: Option<Vec<f64>>,
    ) -> Result<Self> {
        let k = positions.len();
        if k == 0 || masses.len() != k {
            return Err(Error::invalid("measure", "empty or mismatched atom lists"));
        }
        if let Some(p) = &momenta {
            if p.len() != k {
                return Err(Error::invalid("measure", "momentum list length mismatch"));
            }
            ensure_finite(p, "atom momenta")?;
        }
        ensure_finite(&positions, "atom positions")?;
        ensure_finite(&masses, "atom masses")?;
        if masses.iter().any(|&m| m <= 0.0) {
            return Err(Error::invalid("measure", "nonpositive atom mass"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(
                "measure",
                format!("atom masses sum to {total}, expected 1"),
            ));
        }
        for i in 1..k {
            if positions[i - 1] >= positions[i] {
                return Err(Error::invalid(
                    "measure",
                    format!("atom positions not strictly increasing at {i}"),
                ));
            }
        }
        Ok(EulerianMeasure {
            positions,
            masses,
            momenta,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    #[inline]
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    #[inline]
    pub fn momenta(&self) -> Option<&[f64]> {
        self.momenta.as_deref()
    }
}

/// Disjoint maximal index ranges `[a, b)` (length >= 2) on which a transport
/// map is constant. The discrete realization of the set where the map fails
/// to be strictly increasing; each range is a Dirac atom of the pushforward.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlateauSet {
    intervals: Vec<(usize, usize)>,
}

impl PlateauSet {
    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// True if every interval of `self` is contained in an interval of `other`.
    pub fn is_subset_of(&self, other: &PlateauSet) -> bool {
        self.intervals.iter().all(|&(a, b)| {
            other
                .intervals
                .iter()
                .any(|&(c, d)| c <= a && b <= d)
        })
    }
}

/// Monotone rearrangement of an atomic measure: the right-continuous
/// pseudo-inverse of its distribution function sampled at cell midpoints.
pub fn monotone_rearrangement(mu: &EulerianMeasure, grid: Grid) -> TransportMap {
    let n = grid.n_cells();
    let mut values = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0; // current atom
    let mut upper = mu.masses()[0]; // cumulative mass through atom j
    for i in 0..n {
        let m = grid.midpoint(i);
        while m >= upper && j + 1 < mu.len() {
            cum += mu.masses()[j];
            j += 1;
            upper = cum + mu.masses()[j];
        }
        values.push(mu.positions()[j]);
    }
    TransportMap { grid, values }
}

/// Pushforward of the uniform mass measure under a transport map: groups of
/// cells sharing a value (exact bit equality) become atoms of mass `count/N`.
pub fn push_forward(x: &TransportMap) -> EulerianMeasure {
    let n = x.grid().n_cells() as f64;
    let mut positions = Vec::new();
    let mut masses = Vec::new();
    let vals = x.values();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] != vals[start] {
            positions.push(vals[start]);
            masses.push((i - start) as f64 / n);
            start = i;
        }
    }
    let total: f64 = masses.iter().sum();
    if let Some(last) = masses.last_mut() {
        *last += 1.0 - total;
    }
    EulerianMeasure {
        positions,
        masses,
        momenta: None,
    }
}

/// Quadratic Wasserstein distance between the pushforwards of two maps on the
/// same grid: the L2 distance of the maps themselves.
pub fn wasserstein2(x1: &TransportMap, x2: &TransportMap) -> Result<f64> {
    x1.grid().check_same(&x2.grid())?;
    let n = x1.grid().n_cells() as f64;
    let sum: f64 = x1
        .values()
        .iter()
        .zip(x2.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / n).sqrt())
}

/// Velocity semi-distance along the common monotone parametrization: the L2
/// distance of the velocity fields.
pub fn u2_semidistance(
    x1: &TransportMap,
    v1: &VelocityField,
    x2: &TransportMap,
    v2: &VelocityField,
) -> Result<f64> {
    x1.grid().check_same(&x2.grid())?;
    x1.grid().check_same(&v1.grid())?;
    x2.grid().check_same(&v2.grid())?;
    let n = v1.grid().n_cells() as f64;
    let sum: f64 = v1
        .values()
        .iter()
        .zip(v2.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / n).sqrt())
}

/// Exact quadratic Wasserstein distance between two atomic measures, computed
/// from the north-west-corner coupling of their distribution functions.
pub fn wasserstein2_measures(mu1: &EulerianMeasure, mu2: &EulerianMeasure) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut r1 = mu1.masses()[0];
    let mut r2 = mu2.masses()[0];
    let mut cost = 0.0;
    loop {
        let d = mu1.positions()[i] - mu2.positions()[j];
        let w = r1.min(r2);
        cost += w * d * d;
        r1 -= w;
        r2 -= w;
        if r1 <= 0.0 {
            i += 1;
            if i == mu1.len() {
                break;
            }
            r1 = mu1.masses()[i];
        }
        if r2 <= 0.0 {
            j += 1;
            if j == mu2.len() {
                break;
            }
            r2 = mu2.masses()[j];
        }
    }
    cost.max(0.0).sqrt()
}

/// Maximal runs of cells whose values agree within `tol` (0 means exact bit
/// equality); runs of length one are omitted.
pub fn plateaus(x: &TransportMap, tol: f64) -> PlateauSet {
    let vals = x.values();
    let mut intervals = Vec::new();
    let mut start = 0;
    while start < vals.len() {
        let mut end = start + 1;
        // extend while the whole run stays within tol (values nondecreasing,
        // so the run range is vals[end-1] - vals[start])
        while end < vals.len() && vals[end] - vals[start] <= tol {
            end += 1;
        }
        if end - start >= 2 {
            intervals.push((start, end));
        }
        start = end;
    }
    PlateauSet { intervals }
}

/// Replace a velocity field by its arithmetic mean on each plateau interval;
/// unchanged elsewhere. Orthogonal projection onto the fields compatible with
/// the plateau structure.
pub fn project_plateau_average(v: &VelocityField, p: &PlateauSet) -> VelocityField {
    let mut values = v.values().to_vec();
    for &(a, b) in p.intervals() {
        // already constant: averaging would only add roundoff
        if values[a..b].windows(2).all(|w| w[0] == w[1]) {
            continue;
        }
        let mean = values[a..b].iter().sum::<f64>() / (b - a) as f64;
        for val in &mut values[a..b] {
            *val = mean;
        }
    }
    VelocityField {
        grid: v.grid(),
        values,
    }
}

/// Sample a particle system onto a grid: each cell takes the position and
/// velocity of the particle whose mass interval contains the cell midpoint.
pub fn particles_to_map(sys: &ParticleSystem, grid: Grid) -> (TransportMap, VelocityField) {
    let cum = sys.cumulative_masses();
    let n = grid.n_cells();
    let mut xs = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let m = grid.midpoint(i);
        while j + 1 < sys.len() && m >= cum[j + 1] {
            j += 1;
        }
        xs.push(sys.positions()[j]);
        vs.push(sys.velocities()[j]);
    }
    (
        TransportMap { grid, values: xs },
        VelocityField { grid, values: vs },
    )
}

/// Inverse of [`particles_to_map`] on grid-aligned piecewise-constant data:
/// runs of equal map values become particles with mass `count/N`, position
/// the shared value, and velocity the run average of `v`.
pub fn map_to_particles(x: &TransportMap, v: &VelocityField) -> Result<ParticleSystem> {
    x.grid().check_same(&v.grid())?;
    let n = x.grid().n_cells() as f64;
    let vals = x.values();
    let mut masses = Vec::new();
    let mut positions = Vec::new();
    let mut velocities = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] != vals[start] {
            masses.push((i - start) as f64 / n);
            positions.push(vals[start]);
            velocities.push(v.values()[start..i].iter().sum::<f64>() / (i - start) as f64);
            start = i;
        }
    }
    let total: f64 = masses.iter().sum();
    if let Some(last) = masses.last_mut() {
        *last += 1.0 - total;
    }
    ParticleSystem::new(masses, positions, velocities)
}
