//! Closed-form solvers and analytic references for the Euler-Poisson system
//! in Lagrangian form: the attractive solution by cone projection of the free
//! flow, the repulsive two-rarefaction and point-expansion references, and
//! the plateau-wise certificate separating admissible trajectories from
//! convexified free flow.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::projection::{cumulative_primitive, project_cone};
use crate::transport::{plateaus, project_plateau_average, TransportMap, VelocityField};

/// Initial data for the Euler-Poisson flow in mass coordinates.
#[derive(Clone, Debug)]
pub struct EPInitialData {
    x0: TransportMap,
    v0: VelocityField,
    lambda: f64,
}

impl EPInitialData {
    pub fn new(x0: TransportMap, v0: VelocityField, lambda: f64) -> Result<Self> {
        x0.grid().check_same(&v0.grid())?;
        if !lambda.is_finite() {
            return Err(Error::invalid("coupling", "lambda must be finite"));
        }
        Ok(EPInitialData { x0, v0, lambda })
    }

    pub fn x0(&self) -> &TransportMap {
        &self.x0
    }

    pub fn v0(&self) -> &VelocityField {
        &self.v0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> Grid {
        self.x0.grid()
    }
}

/// Unprojected free-flow profile at time `t`: the initial map advanced by the
/// momentum variable, `x0 + t v0 - lambda t^2/4 (2m - 1)` per cell.
pub fn ep_free_flow(data: &EPInitialData, t: f64) -> Vec<f64> {
    let grid = data.grid();
    data.x0
        .values()
        .iter()
        .zip(data.v0.values())
        .enumerate()
        .map(|(i, (x, v))| {
            let m = grid.midpoint(i);
            x + t * v - data.lambda * t * t * 0.25 * (2.0 * m - 1.0)
        })
        .collect()
}

/// Momentum variable at time `t`: `v0 - lambda t (m - 1/2)` per cell.
pub fn ep_momentum(data: &EPInitialData, t: f64) -> Vec<f64> {
    let grid = data.grid();
    data.v0
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v - data.lambda * t * (grid.midpoint(i) - 0.5))
        .collect()
}

/// Sticky Lagrangian solution of the attractive system: cone projection of
/// the free flow. At `lambda = 0` this is the plain sticky particle solution.
pub fn attractive_ep_solution(data: &EPInitialData, t: f64) -> Result<TransportMap> {
    if data.lambda < 0.0 {
        return Err(Error::invalid(
            "attractive solver",
            "lambda must be nonnegative; use the repulsive references instead",
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("attractive solver", "t must be nonnegative"));
    }
    if t == 0.0 {
        return Ok(data.x0.clone());
    }
    project_cone(&ep_free_flow(data, t))
}

/// Solution map together with its velocity: the momentum variable averaged
/// over the plateaus of the solution.
pub fn attractive_ep_state(data: &EPInitialData, t: f64) -> Result<(TransportMap, VelocityField)> {
    let x = attractive_ep_solution(data, t)?;
    let y = VelocityField::new(data.grid(), ep_momentum(data, t))?;
    let v = project_plateau_average(&y, &plateaus(&x, 0.0));
    Ok((x, v))
}

/// Analytic repulsive solution (coupling -2) from the symmetric
/// two-rarefaction data: linear branches outside the central plateau of
/// half-width `t / (1 + t^2)`, zero inside.
pub fn repulsive_two_rarefaction_oracle(t: f64, grid: Grid) -> TransportMap {
    let delta = t / (1.0 + t * t);
    let values: Vec<f64> = (0..grid.n_cells())
        .map(|i| {
            let u = grid.midpoint(i) - 0.5;
            if u.abs() >= delta {
                (1.0 + t * t) * u - t * sign0(u)
            } else {
                0.0
            }
        })
        .collect();
    TransportMap::new(grid, values).expect("analytic branches are monotone")
}

/// Half-width of the central plateau of the two-rarefaction solution.
pub fn two_rarefaction_plateau_half_width(t: f64) -> f64 {
    t / (1.0 + t * t)
}

/// Momentum variable of the two-rarefaction free flow (coupling -2):
/// `2t (m - 1/2) - sign(m - 1/2)` per cell.
pub fn repulsive_two_rarefaction_momentum(t: f64, grid: Grid) -> Vec<f64> {
    (0..grid.n_cells())
        .map(|i| {
            let u = grid.midpoint(i) - 0.5;
            2.0 * t * u - sign0(u)
        })
        .collect()
}

#[inline]
fn sign0(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Repulsive expansion of a point mass at rest or in free fall: the affine
/// map `x + v t - (lambda t^2 / 2)(m - 1/2)`, whose pushforward is uniform
/// on an interval of width `|lambda| t^2 / 2`.
pub fn dirac_diffusion_solution(
    x_bar: f64,
    v_bar: f64,
    lambda: f64,
    t: f64,
    grid: Grid,
) -> Result<TransportMap> {
    if lambda >= 0.0 {
        return Err(Error::invalid(
            "point expansion",
            "lambda must be negative (repulsive)",
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("point expansion", "t must be nonnegative"));
    }
    let values: Vec<f64> = (0..grid.n_cells())
        .map(|i| x_bar + v_bar * t - lambda * t * t * 0.5 * (grid.midpoint(i) - 0.5))
        .collect();
    TransportMap::new(grid, values)
}

/// Outcome of the plateau-wise admissibility certificate.
#[derive(Clone, Debug)]
pub struct CertificateReport {
    /// Minimal gap-growth increment per consecutive time pair, `+inf` when
    /// the pair had no persisting plateau nodes to test.
    pub pair_minima: Vec<f64>,
    pub min_increment: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Check the differential-inclusion certificate on a sampled trajectory: the
/// gap between the free-flow primitive and the solution primitive must not
/// shrink in time at nodes interior to persisting plateaus. `xs` are the
/// solution maps and `ys` the momentum fields at the same times. Fails (with
/// a negative increment) precisely on trajectories that convexify a free
/// flow the inclusion forbids, such as the repulsive two-rarefaction data.
pub fn check_inclusion_certificate(
    times: &[f64],
    xs: &[TransportMap],
    ys: &[Vec<f64>],
    tolerance: f64,
) -> Result<CertificateReport> {
    if times.len() < 2 || xs.len() != times.len() || ys.len() != times.len() {
        return Err(Error::invalid(
            "certificate input",
            "need matching times, maps, and momentum fields (at least two samples)",
        ));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid(
                "certificate input",
                "sample times must be strictly increasing",
            ));
        }
    }
    let grid = xs[0].grid();
    for x in xs {
        grid.check_same(&x.grid())?;
    }
    for y in ys {
        if y.len() != grid.n_cells() {
            return Err(Error::invalid("certificate input", "momentum length mismatch"));
        }
    }

    let prim = |vals: &[f64]| -> Vec<f64> {
        cumulative_primitive(vals).into_iter().map(|p| p.value).collect()
    };
    let prim_x: Vec<Vec<f64>> = xs.iter().map(|x| prim(x.values())).collect();
    let prim_y: Vec<Vec<f64>> = ys.iter().map(|y| prim(y)).collect();

    let mut pair_minima = Vec::with_capacity(times.len() - 1);
    let mut min_increment = f64::INFINITY;
    for k in 0..times.len() - 1 {
        let dt = times[k + 1] - times[k];
        // nodes interior to a plateau of both maps: persisting contact set
        let p0 = plateaus(&xs[k], 0.0);
        let p1 = plateaus(&xs[k + 1], 0.0);
        let mut node_active = vec![false; grid.n_cells() + 1];
        for &(a, b) in p0.intervals() {
            for j in a + 1..b {
                node_active[j] = true;
            }
        }
        let mut pair_min = f64::INFINITY;
        for &(a, b) in p1.intervals() {
            for j in a + 1..b {
                if node_active[j] {
                    let xi = 0.5 * (prim_y[k][j] + prim_y[k + 1][j])
                        - (prim_x[k + 1][j] - prim_x[k][j]) / dt;
                    pair_min = pair_min.min(xi);
                }
            }
        }
        min_increment = min_increment.min(pair_min);
        pair_minima.push(pair_min);
    }
    Ok(CertificateReport {
        pair_minima,
        min_increment,
        tolerance,
        passed: min_increment >= -tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{push_forward, wasserstein2};

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn ep_data(g: Grid, xv: Vec<f64>, vv: Vec<f64>, lambda: f64) -> EPInitialData {
        EPInitialData::new(
            TransportMap::new(g, xv).unwrap(),
            VelocityField::new(g, vv).unwrap(),
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn attractive_at_time_zero_returns_initial_map() {
        let g = grid(32);
        let data = ep_data(g, g.midpoints(), vec![1.0; 32], 1.0);
        let x = attractive_ep_solution(&data, 0.0).unwrap();
        assert_eq!(x.values(), data.x0().values());
    }

    #[test]
    fn attractive_rejects_negative_lambda() {
        let g = grid(8);
        let data = ep_data(g, g.midpoints(), vec![0.0; 8], -1.0);
        assert!(attractive_ep_solution(&data, 1.0).is_err());
    }

    #[test]
    fn point_mass_free_falls_under_attraction() {
        // a single point mass exerts no net self-force: the envelope of the
        // concave-corrected primitive collapses to the chord
        let g = grid(256);
        let (x_bar, v_bar) = (0.7, -0.3);
        let data = ep_data(g, vec![x_bar; 256], vec![v_bar; 256], 2.5);
        for t in [0.3, 1.0, 2.7] {
            let x = attractive_ep_solution(&data, t).unwrap();
            let expect = x_bar + v_bar * t;
            for v in x.values() {
                assert!((v - expect).abs() < 1e-12, "t={t}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn pressureless_solution_matches_event_driven_particles() {
        // two rarefactions colliding into a shock at the origin
        let n = 4096;
        let g = grid(n);
        let xv = g.midpoints();
        let vv: Vec<f64> = g.midpoints().iter().map(|m| -sign0(m - 0.5)).collect();
        let data = ep_data(g, xv, vv, 0.0);
        let x_formula = attractive_ep_solution(&data, 1.0).unwrap();

        let k = 256;
        let pg = grid(k);
        let masses = vec![1.0 / k as f64; k];
        let positions = pg.midpoints();
        let velocities: Vec<f64> = pg.midpoints().iter().map(|m| -sign0(m - 0.5)).collect();
        let sys = crate::transport::ParticleSystem::new(masses, positions, velocities).unwrap();
        let f = crate::forces::ForceField::euler_poisson(0.0, crate::forces::Background::None)
            .unwrap();
        let traj = crate::dynamics::evolve_sticky(&sys, &f, 1.0, 1.0).unwrap();
        let end = traj.states.last().unwrap().as_particles().unwrap();
        let (x_particles, _) = crate::transport::particles_to_map(end, g);
        let err = wasserstein2(&x_formula, &x_particles).unwrap();
        assert!(err <= 5e-3, "cross-oracle W2 = {err}");
    }

    #[test]
    fn two_rarefaction_oracle_values() {
        let g = grid(10000);
        let x = repulsive_two_rarefaction_oracle(0.0, g);
        for (i, v) in x.values().iter().enumerate() {
            assert!((v - (g.midpoint(i) - 0.5)).abs() < 1e-15);
        }

        // outer branch at t = 2, m = 0.95: 5 * 0.45 - 2 = 0.25
        let x = repulsive_two_rarefaction_oracle(2.0, g);
        let i = (0.95 * 10000.0) as usize; // midpoint 0.95005
        let expect = 5.0 * (g.midpoint(i) - 0.5) - 2.0;
        assert!((x.values()[i] - expect).abs() < 1e-12);
        assert!((expect - 0.25).abs() < 3e-4);

        // at t = 1 the plateau covers everything
        let x = repulsive_two_rarefaction_oracle(1.0, g);
        assert!(x.values().iter().all(|&v| v == 0.0));
        assert!((two_rarefaction_plateau_half_width(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_expansion_is_uniform() {
        let g = grid(512);
        let x = dirac_diffusion_solution(0.0, 0.0, -1.0, 2.0, g).unwrap();
        // X(2, m) = 2(m - 1/2), support (-1, 1)
        for (i, v) in x.values().iter().enumerate() {
            assert!((v - 2.0 * (g.midpoint(i) - 0.5)).abs() < 1e-14);
        }
        let mu = push_forward(&x);
        assert_eq!(mu.len(), 512);
        assert!(mu.positions()[0] > -1.0 && mu.positions()[0] < -1.0 + 2.0 / 512.0);
        assert!(*mu.positions().last().unwrap() < 1.0);

        let x0 = dirac_diffusion_solution(0.3, 2.0, -1.0, 0.0, g).unwrap();
        assert!(x0.values().iter().all(|&v| v == 0.3));

        assert!(dirac_diffusion_solution(0.0, 0.0, 1.0, 1.0, g).is_err());
    }

    #[test]
    fn point_expansion_matches_inclusion_stepper() {
        let g = grid(64);
        let x0 = TransportMap::new(g, vec![0.0; 64]).unwrap();
        let v0 = VelocityField::zero(g);
        let f = crate::forces::ForceField::euler_poisson(-1.0, crate::forces::Background::None)
            .unwrap();
        let tau = 2e-3;
        let traj = crate::dynamics::evolve_inclusion(&x0, &v0, &f, 1.0, tau).unwrap();
        let (x_num, _) = traj.states.last().unwrap().as_fields().unwrap();
        let x_exact = dirac_diffusion_solution(0.0, 0.0, -1.0, 1.0, g).unwrap();
        let err = wasserstein2(x_num, &x_exact).unwrap();
        assert!(err <= 5.0 * tau, "W2 = {err}");
    }

    #[test]
    fn certificate_trivially_passes_on_constant_map() {
        let g = grid(16);
        let x = TransportMap::new(g, vec![0.0; 16]).unwrap();
        let xs = vec![x.clone(), x.clone(), x];
        let ys = vec![vec![0.0; 16]; 3];
        let report = check_inclusion_certificate(&[0.0, 0.5, 1.0], &xs, &ys, 1e-8).unwrap();
        assert!(report.passed);
        // whole map is one plateau with zero momentum: increments vanish
        assert!(report.min_increment.abs() < 1e-15);
    }

    #[test]
    fn certificate_passes_on_attractive_solutions() {
        let g = grid(512);
        let xv = g.midpoints();
        let vv: Vec<f64> = g.midpoints().iter().map(|m| -2.0 * (m - 0.5)).collect();
        let data = ep_data(g, xv, vv, 1.0);
        let times: Vec<f64> = (1..=8).map(|k| 0.1 * 1.5f64.powi(k)).collect();
        let xs: Vec<TransportMap> = times
            .iter()
            .map(|&t| attractive_ep_solution(&data, t).unwrap())
            .collect();
        let ys: Vec<Vec<f64>> = times.iter().map(|&t| ep_momentum(&data, t)).collect();
        let report = check_inclusion_certificate(&times, &xs, &ys, 1e-8).unwrap();
        assert!(
            report.passed,
            "min increment {} below tolerance",
            report.min_increment
        );
    }

    #[test]
    fn certificate_rejects_convexified_repulsive_flow() {
        let g = grid(2000);
        // window strictly inside (t-, t+) for plateau half-width 0.25
        let times: Vec<f64> = (0..10).map(|k| 1.0 + 0.25 * k as f64).collect();
        let xs: Vec<TransportMap> = times
            .iter()
            .map(|&t| repulsive_two_rarefaction_oracle(t, g))
            .collect();
        let ys: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| repulsive_two_rarefaction_momentum(t, g))
            .collect();
        let report = check_inclusion_certificate(&times, &xs, &ys, 1e-8).unwrap();
        assert!(!report.passed);
        assert!(report.min_increment < -1e-3);
    }

    #[test]
    fn semigroup_restart_matches_direct_solve() {
        let g = grid(2048);
        let xv: Vec<f64> = g.midpoints().iter().map(|m| 2.0 * (m - 0.5)).collect();
        let vv: Vec<f64> = g
            .midpoints()
            .iter()
            .map(|m| -(2.0 * std::f64::consts::PI * m).sin())
            .collect();
        let data = ep_data(g, xv, vv, 1.0);
        let (t1, t2) = (0.8, 0.7);
        let direct = attractive_ep_solution(&data, t1 + t2).unwrap();

        let (x_mid, v_mid) = attractive_ep_state(&data, t1).unwrap();
        let restarted = EPInitialData::new(x_mid, v_mid, 1.0).unwrap();
        let resumed = attractive_ep_solution(&restarted, t2).unwrap();

        let err = wasserstein2(&direct, &resumed).unwrap();
        let range = direct.values().last().unwrap() - direct.values().first().unwrap();
        let tol = 2.0 * range.abs() * g.cell_width().sqrt();
        assert!(err <= tol, "restart error {err} > {tol}");
    }

    #[test]
    fn plateaus_of_attractive_solutions_only_grow() {
        let g = grid(512);
        let xv = g.midpoints();
        let vv: Vec<f64> = g
            .midpoints()
            .iter()
            .map(|m| -(2.0 * std::f64::consts::PI * m).sin() - 0.5 * (m - 0.5))
            .collect();
        let data = ep_data(g, xv, vv, 1.0);
        let times: Vec<f64> = (1..=10).map(|k| 0.05 * 1.4f64.powi(k)).collect();
        let mut prev = plateaus(&attractive_ep_solution(&data, times[0]).unwrap(), 0.0);
        for &t in &times[1..] {
            let p = plateaus(&attractive_ep_solution(&data, t).unwrap(), 0.0);
            assert!(prev.is_subset_of(&p), "plateau shrank at t = {t}");
            prev = p;
        }
        assert!(!prev.is_empty());
    }

    #[test]
    fn velocity_norm_nonincreasing_without_coupling() {
        let g = grid(256);
        let xv = g.midpoints();
        let vv: Vec<f64> = g
            .midpoints()
            .iter()
            .map(|m| (6.0 * m).cos() - 2.0 * (m - 0.5))
            .collect();
        let data = ep_data(g, xv, vv, 0.0);
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let t = 0.2 * (k + 1) as f64;
            let (_, v) = attractive_ep_state(&data, t).unwrap();
            let norm = (v.values().iter().map(|x| x * x).sum::<f64>() / 256.0).sqrt();
            assert!(norm <= prev + 1e-12);
            prev = norm;
        }
    }
}
