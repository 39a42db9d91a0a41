//! Event-driven sticky particle evolution and the projection time-stepper
//! for the first-order differential inclusion on the monotone cone.
//!
//! Between collisions the particle system follows the finite-dimensional ODE
//! with cell-averaged forces. When forces are constant between events (the
//! Euler-Poisson force without background) the flight is advanced in closed
//! form with exact quadratic collision times; general smooth forces use RK4
//! with bisection event localization.

use crate::error::{Error, Result};
use crate::forces::{discrete_projected_force, eval_force, ForceField, ForceKind};
use crate::projection::project_cone;
use crate::transport::{
    plateaus, project_plateau_average, ParticleSystem, TransportMap, VelocityField,
};

/// Absolute tolerance grouping simultaneous collision roots.
const EVENT_TIME_TOL: f64 = 1e-12;

/// One inelastic collision: contiguous groups of coinciding particles merge,
/// each group taking the mass-weighted mean velocity.
#[derive(Clone, Debug)]
pub struct CollisionEvent {
    pub time: f64,
    /// Index sets (pre-merge indexing) of the groups that merged; each has
    /// at least two members.
    pub merged_groups: Vec<Vec<usize>>,
    pub pre_velocities: Vec<f64>,
    pub post_velocities: Vec<f64>,
}

/// State sample of a trajectory: either a particle system or a pair of
/// grid fields, depending on which integrator produced it.
#[derive(Clone, Debug)]
pub enum TrajState {
    Particles(ParticleSystem),
    Fields { x: TransportMap, v: VelocityField },
}

impl TrajState {
    pub fn as_particles(&self) -> Option<&ParticleSystem> {
        match self {
            TrajState::Particles(p) => Some(p),
            TrajState::Fields { .. } => None,
        }
    }

    pub fn as_fields(&self) -> Option<(&TransportMap, &VelocityField)> {
        match self {
            TrajState::Particles(_) => None,
            TrajState::Fields { x, v } => Some((x, v)),
        }
    }
}

/// Time-indexed states plus the collision log.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<TrajState>,
    pub events: Vec<CollisionEvent>,
}

impl Trajectory {
    fn push(&mut self, t: f64, state: TrajState) {
        if let Some(&last) = self.sample_times.last() {
            if t <= last {
                return;
            }
        }
        self.sample_times.push(t);
        self.states.push(state);
    }
}

/// Smallest nonnegative root of `gap(s) = dx + dv s + da s^2 / 2`, if the
/// gap closes at all. `dx` is assumed nonnegative.
fn gap_root(dx: f64, dv: f64, da: f64) -> Option<f64> {
    if dx == 0.0 {
        // coinciding particles: an event only if they are actually closing
        if dv < 0.0 || (dv == 0.0 && da < 0.0) {
            return Some(0.0);
        }
        return None;
    }
    if da == 0.0 {
        if dv < 0.0 {
            return Some(-dx / dv);
        }
        return None;
    }
    let disc = dv * dv - 2.0 * da * dx;
    if disc < 0.0 {
        return None;
    }
    let sd = disc.sqrt();
    let r1 = (-dv - sd) / da;
    let r2 = (-dv + sd) / da;
    let mut best: Option<f64> = None;
    for r in [r1, r2] {
        if r.is_finite() && r >= 0.0 && best.map_or(true, |b| r < b) {
            best = Some(r);
        }
    }
    best
}

/// First future collision of adjacent particles under constant accelerations:
/// the smallest positive root over the adjacent gap polynomials, together
/// with every pair index attaining it within an absolute tolerance.
pub fn next_collision_time(sys: &ParticleSystem, accelerations: &[f64]) -> Option<(f64, Vec<usize>)> {
    let x = sys.positions();
    let v = sys.velocities();
    let mut best: Option<f64> = None;
    let mut roots: Vec<Option<f64>> = Vec::with_capacity(sys.len().saturating_sub(1));
    for i in 0..sys.len().saturating_sub(1) {
        let r = gap_root(
            x[i + 1] - x[i],
            v[i + 1] - v[i],
            accelerations[i + 1] - accelerations[i],
        );
        if let Some(t) = r {
            if best.map_or(true, |b| t < b) {
                best = Some(t);
            }
        }
        roots.push(r);
    }
    let t_star = best?;
    let pairs = roots
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Some(t) if (t - t_star).abs() <= EVENT_TIME_TOL => Some(i),
            _ => None,
        })
        .collect();
    Some((t_star, pairs))
}

/// Merge the transitive closure of the given colliding adjacent pairs.
/// Returns the reduced system and the event record.
fn merge_pairs(sys: &ParticleSystem, pairs: &[usize], time: f64) -> Result<(ParticleSystem, CollisionEvent)> {
    let k = sys.len();
    let mut in_group = vec![false; k.saturating_sub(1)];
    for &i in pairs {
        in_group[i] = true;
    }
    let mut masses = Vec::new();
    let mut positions = Vec::new();
    let mut velocities = Vec::new();
    let mut merged_groups = Vec::new();
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j < k - 1 && in_group[j] {
            j += 1;
        }
        // group i..=j
        let group: Vec<usize> = (i..=j).collect();
        let m: f64 = group.iter().map(|&g| sys.masses()[g]).sum();
        let x: f64 = group
            .iter()
            .map(|&g| sys.masses()[g] * sys.positions()[g])
            .sum::<f64>()
            / m;
        let v: f64 = group
            .iter()
            .map(|&g| sys.masses()[g] * sys.velocities()[g])
            .sum::<f64>()
            / m;
        masses.push(m);
        positions.push(x);
        velocities.push(v);
        if group.len() >= 2 {
            merged_groups.push(group);
        }
        i = j + 1;
    }
    let event = CollisionEvent {
        time,
        merged_groups,
        pre_velocities: sys.velocities().to_vec(),
        post_velocities: velocities.clone(),
    };
    let merged = ParticleSystem::new(masses, positions, velocities)?;
    Ok((merged, event))
}

fn advance_quadratic(sys: &ParticleSystem, accel: &[f64], s: f64) -> Result<ParticleSystem> {
    let positions: Vec<f64> = sys
        .positions()
        .iter()
        .zip(sys.velocities())
        .zip(accel)
        .map(|((x, v), a)| x + v * s + 0.5 * a * s * s)
        .collect();
    // collision detection guarantees order up to roundoff; repair exact ties
    let mut positions = positions;
    for i in 1..positions.len() {
        if positions[i] < positions[i - 1] {
            positions[i] = positions[i - 1];
        }
    }
    let velocities: Vec<f64> = sys
        .velocities()
        .iter()
        .zip(accel)
        .map(|(v, a)| v + a * s)
        .collect();
    ParticleSystem::new(sys.masses().to_vec(), positions, velocities)
}

/// Event-driven sticky evolution: between events the system follows the ODE
/// with cell-averaged forces recomputed on the current merged system; at each
/// event, coinciding contiguous groups merge with momentum-conserving
/// velocities and never split again.
pub fn evolve_sticky(
    sys: &ParticleSystem,
    f: &ForceField,
    t_end: f64,
    sample_dt: f64,
) -> Result<Trajectory> {
    if !(t_end > 0.0) || !(sample_dt > 0.0) {
        return Err(Error::invalid("evolution window", "t_end and sample_dt must be positive"));
    }
    let mut traj = Trajectory {
        sample_times: vec![0.0],
        states: vec![TrajState::Particles(sys.clone())],
        events: Vec::new(),
    };
    let max_events = sys.len() - 1;
    let mut state = sys.clone();
    let mut t = 0.0;
    let mut next_sample = sample_dt;

    if f.accelerations_constant_between_events() {
        loop {
            let accel = discrete_projected_force(f, &state)?;
            let collision = next_collision_time(&state, &accel);
            let t_next_event = collision.as_ref().map(|(dt, _)| t + dt);
            let horizon = t_next_event.map_or(t_end, |te| te.min(t_end));

            while next_sample < horizon - EVENT_TIME_TOL {
                let probe = advance_quadratic(&state, &accel, next_sample - t)?;
                traj.push(next_sample, TrajState::Particles(probe));
                next_sample += sample_dt;
            }

            match collision {
                Some((dt, pairs)) if t + dt <= t_end => {
                    state = advance_quadratic(&state, &accel, dt)?;
                    t += dt;
                    if traj.events.len() >= max_events {
                        return Err(Error::NumericalFailure {
                            step: traj.events.len(),
                            reason: "event cascade exceeded particle count".into(),
                        });
                    }
                    let (merged, event) = merge_pairs(&state, &pairs, t)?;
                    state = merged;
                    traj.events.push(event);
                    traj.push(t, TrajState::Particles(state.clone()));
                    if (t - next_sample).abs() <= EVENT_TIME_TOL {
                        next_sample += sample_dt;
                    }
                }
                _ => {
                    let final_state = advance_quadratic(&state, &accel, t_end - t)?;
                    traj.push(t_end, TrajState::Particles(final_state));
                    return Ok(traj);
                }
            }
        }
    } else {
        evolve_sticky_rk4(&mut traj, state, f, t_end, sample_dt)?;
        Ok(traj)
    }
}

/// Classical RK4 on `(x, v)` with accelerations from the cell-averaged force.
fn rk4_step(
    masses: &ParticleSystem,
    f: &ForceField,
    x: &[f64],
    v: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = x.len();
    let accel = |pos: &[f64]| -> Result<Vec<f64>> { raw_accel(f, masses, pos) };

    let a1 = accel(x)?;
    let x2: Vec<f64> = (0..k).map(|i| x[i] + 0.5 * h * v[i]).collect();
    let v2: Vec<f64> = (0..k).map(|i| v[i] + 0.5 * h * a1[i]).collect();
    let a2 = accel(&x2)?;
    let x3: Vec<f64> = (0..k).map(|i| x[i] + 0.5 * h * v2[i]).collect();
    let v3: Vec<f64> = (0..k).map(|i| v[i] + 0.5 * h * a2[i]).collect();
    let a3 = accel(&x3)?;
    let x4: Vec<f64> = (0..k).map(|i| x[i] + h * v3[i]).collect();
    let v4: Vec<f64> = (0..k).map(|i| v[i] + h * a3[i]).collect();
    let a4 = accel(&x4)?;

    let xn: Vec<f64> = (0..k)
        .map(|i| x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]))
        .collect();
    let vn: Vec<f64> = (0..k)
        .map(|i| v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]))
        .collect();
    Ok((xn, vn))
}

/// Cell-averaged force on raw positions (ordering not assumed, so RK4 stages
/// may probe slightly disordered configurations).
fn raw_accel(f: &ForceField, sys: &ParticleSystem, positions: &[f64]) -> Result<Vec<f64>> {
    let masses = sys.masses();
    let k = positions.len();
    let out: Vec<f64> = match &f.kind {
        ForceKind::Potential(vp) => positions.iter().map(|&x| -vp(x)).collect(),
        ForceKind::Interaction(wp) => (0..k)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..k {
                    let d = positions[i] - positions[j];
                    if d != 0.0 {
                        acc += masses[j] * wp(d);
                    }
                }
                -acc
            })
            .collect(),
        ForceKind::EulerPoisson { lambda, background } => {
            let cum = sys.cumulative_masses();
            let mean_x: f64 = masses.iter().zip(positions).map(|(m, x)| m * x).sum();
            (0..k)
                .map(|i| {
                    let base = -lambda * 0.5 * (cum[i] + cum[i + 1] - 1.0);
                    match background {
                        crate::forces::Background::None => base,
                        crate::forces::Background::Uniform { sigma } => {
                            base + lambda * sigma * (positions[i] - mean_x)
                        }
                    }
                })
                .collect()
        }
    };
    if let Some(idx) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "force evaluation",
            index: idx,
        });
    }
    Ok(out)
}

fn min_adjacent_gap(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

fn evolve_sticky_rk4(
    traj: &mut Trajectory,
    mut state: ParticleSystem,
    f: &ForceField,
    t_end: f64,
    sample_dt: f64,
) -> Result<()> {
    let max_events = state.len() - 1 + traj.events.len();
    let mut t = 0.0;
    let mut next_sample = sample_dt;
    let h_base = (sample_dt / 16.0).min(t_end / 16.0);

    while t < t_end - EVENT_TIME_TOL {
        let target = next_sample.min(t_end);
        let h = (target - t).min(h_base);
        let (xn, vn) = rk4_step(&state, f, state.positions(), state.velocities(), h)?;
        if min_adjacent_gap(&xn) < 0.0 {
            // first contact inside (t, t+h]: bisect the substep
            let mut lo = 0.0;
            let mut hi = h;
            for _ in 0..80 {
                if hi - lo <= 1e-12 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let (xm, _) = rk4_step(&state, f, state.positions(), state.velocities(), mid)?;
                if min_adjacent_gap(&xm) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let (xc, vc) = rk4_step(&state, f, state.positions(), state.velocities(), lo)?;
            let mut xc = xc;
            for i in 1..xc.len() {
                if xc[i] < xc[i - 1] {
                    xc[i] = xc[i - 1];
                }
            }
            t += lo;
            let contact = ParticleSystem::new(state.masses().to_vec(), xc, vc)?;
            let scale = contact
                .positions()
                .iter()
                .fold(1.0f64, |acc, &v| acc.max(v.abs()));
            let pairs: Vec<usize> = contact
                .positions()
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    if w[1] - w[0] <= 1e-9 * scale {
                        Some(i)
                    } else {
                        None
                    }
                })
                .collect();
            if pairs.is_empty() {
                // grazing pass resolved by the ordering repair; keep going
                state = contact;
                continue;
            }
            if traj.events.len() >= max_events {
                return Err(Error::NumericalFailure {
                    step: traj.events.len(),
                    reason: "event cascade exceeded particle count".into(),
                });
            }
            let (merged, event) = merge_pairs(&contact, &pairs, t)?;
            state = merged;
            traj.events.push(event);
            traj.push(t, TrajState::Particles(state.clone()));
            if (t - next_sample).abs() <= EVENT_TIME_TOL {
                next_sample += sample_dt;
            }
            continue;
        }
        state = ParticleSystem::new(state.masses().to_vec(), xn, vn)?;
        t += h;
        if (t - next_sample).abs() <= 1e-12 || t > next_sample {
            traj.push(t, TrajState::Particles(state.clone()));
            next_sample += sample_dt;
        }
    }
    if *traj.sample_times.last().unwrap() < t_end - EVENT_TIME_TOL {
        traj.push(t, TrajState::Particles(state));
    }
    Ok(())
}

/// Splitting scheme for the first-order differential inclusion: update the
/// momentum variable with the current force, advance the map, and project
/// back onto the monotone cone. Every iterate is admissible by construction.
/// Recorded velocities are the momentum variable averaged over the plateaus
/// of the current map.
pub fn evolve_inclusion(
    x0: &TransportMap,
    v0: &VelocityField,
    f: &ForceField,
    t_end: f64,
    tau: f64,
) -> Result<Trajectory> {
    x0.grid().check_same(&v0.grid())?;
    if !(t_end > 0.0) || !(tau > 0.0) {
        return Err(Error::invalid("evolution window", "t_end and tau must be positive"));
    }
    let grid = x0.grid();
    let n_steps = ((t_end / tau).round() as usize).max(1);
    let mut x = x0.clone();
    let mut y: Vec<f64> = v0.values().to_vec();

    let readout = |x: &TransportMap, y: &[f64]| -> Result<VelocityField> {
        let field = VelocityField::new(grid, y.to_vec())?;
        Ok(project_plateau_average(&field, &plateaus(x, 0.0)))
    };

    let mut traj = Trajectory {
        sample_times: vec![0.0],
        states: vec![TrajState::Fields {
            x: x.clone(),
            v: readout(&x, &y)?,
        }],
        events: Vec::new(),
    };

    for n in 1..=n_steps {
        let force = eval_force(f, &x)?;
        for (yi, fi) in y.iter_mut().zip(&force) {
            *yi += tau * fi;
        }
        let z: Vec<f64> = x
            .values()
            .iter()
            .zip(&y)
            .map(|(xi, yi)| xi + tau * yi)
            .collect();
        x = project_cone(&z).map_err(|e| Error::NumericalFailure {
            step: n,
            reason: e.to_string(),
        })?;
        traj.push(
            n as f64 * tau,
            TrajState::Fields {
                x: x.clone(),
                v: readout(&x, &y)?,
            },
        );
    }
    Ok(traj)
}
