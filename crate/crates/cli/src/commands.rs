//! One function per CLI command. Each writes its artifact files through the
//! shared writer and returns a summary-metrics JSON value for the manifest.

use serde_json::{json, Value};
use stickyflow_core::periodic::{cluster_fraction, PeriodicState};
use stickyflow_core::*;
// the glob pulls in the library's one-argument Result alias; restore std's
use std::result::Result;

use crate::config::{Command, RunConfig};
use crate::output::{fmt, trajectories_svg, Csv, OutputWriter};
use crate::CliError;

pub fn dispatch(cfg: &RunConfig, out: &mut OutputWriter, threads: usize) -> Result<Value, CliError> {
    match cfg.command {
        Command::Project => project(cfg, out),
        Command::SimulateParticles => simulate_particles(cfg, out),
        Command::EvolveInclusion => evolve_inclusion_cmd(cfg, out),
        Command::SolveAttractive => solve_attractive(cfg, out),
        Command::PeriodicScheme => periodic_scheme(cfg, out),
        Command::WeakCheck => weak_check(cfg, out),
        Command::Compare => compare(cfg, out, threads),
    }
}

fn numerical(e: stickyflow_core::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

fn project(cfg: &RunConfig, out: &mut OutputWriter) -> Result<Value, CliError> {
    let values = cfg.values.as_ref().unwrap();
    let projected = project_cone(values).map_err(numerical)?;
    let mut csv = Csv::new(&["index", "m", "value"]);
    let g = projected.grid();
    for (i, v) in projected.values().iter().enumerate() {
        csv.row([i.to_string(), fmt(g.midpoint(i)), fmt(*v)]);
    }
    out.write("projection.csv", &csv.finish())?;
    let l2: f64 = values
        .iter()
        .zip(projected.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / values.len() as f64;
    Ok(json!({"n": values.len(), "projection_distance_l2": l2.sqrt()}))
}

/// Positions and velocities of the group currently containing each original
/// particle, located by the midpoint of its original mass interval.
fn expand_to_original_slots(original_cum: &[f64], sys: &ParticleSystem) -> (Vec<f64>, Vec<f64>) {
    let cum = sys.cumulative_masses();
    let k0 = original_cum.len() - 1;
    let mut xs = Vec::with_capacity(k0);
    let mut vs = Vec::with_capacity(k0);
    let mut g = 0usize;
    for j in 0..k0 {
        let mid = 0.5 * (original_cum[j] + original_cum[j + 1]);
        while g + 1 < sys.len() && mid >= cum[g + 1] {
            g += 1;
        }
        xs.push(sys.positions()[g]);
        vs.push(sys.velocities()[g]);
    }
    (xs, vs)
}

fn simulate_particles(cfg: &RunConfig, out: &mut OutputWriter) -> Result<Value, CliError> {
    let sys = cfg.build_particles()?;
    let force = cfg.force.as_ref().unwrap().build()?;
    let traj = evolve_sticky(
        &sys,
        &force,
        cfg.t_end.unwrap(),
        cfg.sample_dt.unwrap(),
    )
    .map_err(numerical)?;

    let k = sys.len();
    let cum0 = sys.cumulative_masses();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..k).map(|i| format!("x_{i}")));
    header.extend((0..k).map(|i| format!("v_{i}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(&header_refs);
    for (t, state) in traj.sample_times.iter().zip(&traj.states) {
        let s = state.as_particles().expect("particle trajectory");
        let (xs, vs) = expand_to_original_slots(&cum0, s);
        let mut row = vec![fmt(*t)];
        row.extend(xs.into_iter().map(fmt));
        row.extend(vs.into_iter().map(fmt));
        csv.row(row);
    }
    out.write("trajectory.csv", &csv.finish())?;

    let mut ev = Csv::new(&["t", "members", "post_velocity"]);
    for event in &traj.events {
        for (gi, group) in event.merged_groups.iter().enumerate() {
            let members = group
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join("+");
            // post velocity of this group: find its slot in the post vector
            let post = event.post_velocities.get(gi).copied();
            ev.row([
                fmt(event.time),
                members,
                post.map(fmt).unwrap_or_default(),
            ]);
        }
    }
    out.write("events.csv", &ev.finish())?;

    let final_state = traj.states.last().unwrap().as_particles().unwrap();
    Ok(json!({
        "initial_particles": k,
        "final_particles": final_state.len(),
        "events": traj.events.len(),
        "final_momentum": final_state.total_momentum(),
    }))
}

fn fields_csv(
    name: &str,
    rows: &[(f64, &[f64], &[f64])],
    out: &mut OutputWriter,
) -> Result<(), CliError> {
    let n = rows.first().map_or(0, |r| r.1.len());
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    header.extend((0..n).map(|i| format!("v_{i}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(&header_refs);
    for (t, xs, vs) in rows {
        let mut row = vec![fmt(*t)];
        row.extend(xs.iter().copied().map(fmt));
        row.extend(vs.iter().copied().map(fmt));
        csv.row(row);
    }
    out.write(name, &csv.finish())?;
    Ok(())
}

fn evolve_inclusion_cmd(cfg: &RunConfig, out: &mut OutputWriter) -> Result<Value, CliError> {
    let (x0, v0) = cfg.build_fields()?;
    let force = cfg.force.as_ref().unwrap().build()?;
    let traj = evolve_inclusion(&x0, &v0, &force, cfg.t_end.unwrap(), cfg.tau.unwrap())
        .map_err(numerical)?;
    let rows: Vec<(f64, &[f64], &[f64])> = traj
        .sample_times
        .iter()
        .zip(&traj.states)
        .enumerate()
        .filter(|(i, _)| i % cfg.sample_every == 0 || *i == traj.sample_times.len() - 1)
        .map(|(_, (t, state))| {
            let (x, v) = state.as_fields().expect("field trajectory");
            (*t, x.values(), v.values())
        })
        .collect();
    fields_csv("fields.csv", &rows, out)?;
    Ok(json!({"grid_n": x0.grid().n_cells(), "steps": traj.sample_times.len() - 1}))
}

fn solve_attractive(cfg: &RunConfig, out: &mut OutputWriter) -> Result<Value, CliError> {
    let (x0, v0) = cfg.build_fields()?;
    let lambda = cfg.force.as_ref().unwrap().lambda().unwrap();
    let data = EPInitialData::new(x0, v0, lambda).map_err(numerical)?;
    let mut states = Vec::new();
    for &t in &cfg.times {
        let (x, v) = attractive_ep_state(&data, t).map_err(numerical)?;
        states.push((t, x, v));
    }
    let rows: Vec<(f64, &[f64], &[f64])> = states
        .iter()
        .map(|(t, x, v)| (*t, x.values(), v.values()))
        .collect();
    fields_csv("solutions.csv", &rows, out)?;
    let plateau_cells: usize = states
        .last()
        .map(|(_, x, _)| {
            plateaus(x, 0.0)
                .intervals()
                .iter()
                .map(|(a, b)| b - a)
                .sum()
        })
        .unwrap_or(0);
    Ok(json!({
        "grid_n": data.grid().n_cells(),
        "times": cfg.times.len(),
        "final_plateau_cells": plateau_cells,
    }))
}

fn periodic_scheme(cfg: &RunConfig, out: &mut OutputWriter) -> Result<Value, CliError> {
    let (x0, v0) = cfg.build_fields()?;
    let state = PeriodicState::new(x0.grid(), x0.values().to_vec(), v0.values().to_vec())
        .map_err(numerical)?;
    let tau = cfg.periodic_tau();
    let n_steps = cfg.periodic_steps();
    let run = stickyflow_core::periodic::run(&state, tau, n_steps, cfg.sample_every)
        .map_err(numerical)?;

    let mut energy_csv = Csv::new(&["step", "t", "energy"]);
    for r in &run.records {
        energy_csv.row([r.step.to_string(), fmt(r.t), fmt(r.energy)]);
    }
    out.write("energy.csv", &energy_csv.finish())?;

    let rows: Vec<(f64, &[f64], &[f64])> = run
        .sample_steps
        .iter()
        .zip(&run.samples)
        .map(|(step, s)| (*step as f64 * tau, s.x_values(), s.v_values()))
        .collect();
    fields_csv("states.csv", &rows, out)?;

    if cfg.svg {
        let times: Vec<f64> = run.sample_steps.iter().map(|s| *s as f64 * tau).collect();
        let positions: Vec<Vec<f64>> = run.samples.iter().map(|s| s.x_values().to_vec()).collect();
        out.write("trajectories.svg", &trajectories_svg(&times, &positions, 64))?;
    }

    let final_state = run.samples.last().unwrap();
    Ok(json!({
        "grid_n": state.grid().n_cells(),
        "tau": tau,
        "n_steps": n_steps,
        "initial_energy": run.records.first().unwrap().energy,
        "final_energy": run.records.last().unwrap().energy,
        "final_cluster_fraction": cluster_fraction(final_state, 1e-4),
    }))
}

fn weak_check(cfg: &RunConfig, out: &mut OutputWriter) -> Result<Value, CliError> {
    let sys = cfg.build_particles()?;
    let force = cfg.force.as_ref().unwrap().build()?;
    let t_end = cfg.t_end.unwrap();

    let x_lo = sys.positions().iter().cloned().fold(f64::INFINITY, f64::min);
    let x_hi = sys
        .positions()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = (x_hi - x_lo).max(1.0);
    let vmax = sys.velocities().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let x_center = 0.5 * (x_lo + x_hi);
    let x_radius = 0.5 * spread + vmax * t_end + 1.0;
    let family = [
        ("bump", SpaceProfile::Bump),
        ("x-bump", SpaceProfile::XTimesBump),
        ("sin-bump", SpaceProfile::SinTimesBump { freq: 2.0 }),
    ];

    let mut report = Vec::new();
    for (name, profile) in family {
        let phi = TestFunction {
            t_center: 0.5 * t_end,
            t_radius: 0.4 * t_end,
            x_center,
            x_radius,
            profile,
        };
        let mut rows = Vec::new();
        let mut mass_abs = Vec::new();
        let mut mom_abs = Vec::new();
        for &dt in &cfg.dt_levels {
            let traj = evolve_sticky(&sys, &force, t_end, dt).map_err(numerical)?;
            let (rm, rp) = weak_residual(&traj, &force, &phi).map_err(numerical)?;
            rows.push(json!({"dt": dt, "mass_residual": rm, "momentum_residual": rp}));
            mass_abs.push(rm.abs());
            mom_abs.push(rp.abs());
        }
        let ratios = |r: &[f64]| -> Vec<f64> {
            r.windows(2)
                .map(|w| if w[1] != 0.0 { w[0] / w[1] } else { f64::INFINITY })
                .collect()
        };
        report.push(json!({
            "test_function": name,
            "levels": rows,
            "mass_richardson_ratios": ratios(&mass_abs),
            "momentum_richardson_ratios": ratios(&mom_abs),
        }));
    }
    let text = serde_json::to_string_pretty(&json!({"residuals": report})).unwrap();
    out.write("report.json", &text)?;
    Ok(json!({"test_functions": 3, "dt_levels": cfg.dt_levels.len()}))
}

fn compare(cfg: &RunConfig, out: &mut OutputWriter, threads: usize) -> Result<Value, CliError> {
    let (x0, v0) = cfg.build_fields()?;
    let lambda = cfg.force.as_ref().unwrap().lambda().unwrap();
    if lambda < 0.0 {
        return Err(CliError::Config(crate::config::ConfigError::OutOfRange {
            key: "force.lambda".into(),
            reason: "compare needs the attractive closed form: lambda >= 0".into(),
        }));
    }
    let force = cfg.force.as_ref().unwrap().build()?;
    let data = EPInitialData::new(x0.clone(), v0.clone(), lambda).map_err(numerical)?;
    let n = x0.grid().n_cells();

    // particle systems sampled from the same datum
    let sample_system = |k: usize| -> ParticleSystem {
        let positions: Vec<f64> = (0..k)
            .map(|j| {
                let m = (2 * j + 1) as f64 / (2 * k) as f64;
                x0.values()[((m * n as f64) as usize).min(n - 1)]
            })
            .collect();
        let velocities: Vec<f64> = (0..k)
            .map(|j| {
                let m = (2 * j + 1) as f64 / (2 * k) as f64;
                v0.values()[((m * n as f64) as usize).min(n - 1)]
            })
            .collect();
        ParticleSystem::new(vec![1.0 / k as f64; k], positions, velocities)
            .expect("sampled monotone datum stays admissible")
    };

    // (t, k) jobs evaluated on a bounded pool, results kept in job order
    let jobs: Vec<(f64, usize)> = cfg
        .times
        .iter()
        .flat_map(|&t| cfg.particle_counts.iter().map(move |&k| (t, k)))
        .collect();
    let mut w2 = vec![0.0f64; jobs.len()];
    let chunk = threads.max(1);
    let mut start = 0;
    while start < jobs.len() {
        let end = (start + chunk).min(jobs.len());
        let slice = &jobs[start..end];
        let results: Vec<Result<f64, CliError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = slice
                .iter()
                .map(|&(t, k)| {
                    let sys = sample_system(k);
                    let force = force.clone();
                    let data = &data;
                    scope.spawn(move || -> Result<f64, CliError> {
                        let mu_formula =
                            push_forward(&attractive_ep_solution(data, t).map_err(numerical)?);
                        let traj = evolve_sticky(&sys, &force, t, t).map_err(numerical)?;
                        let end = traj.states.last().unwrap().as_particles().unwrap();
                        let mu = particles_as_measure(end);
                        Ok(wasserstein2_measures(&mu, &mu_formula))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        for (offset, r) in results.into_iter().enumerate() {
            w2[start + offset] = r?;
        }
        start = end;
    }

    let mut csv = Csv::new(&["t", "particles", "w2"]);
    let mut table = Vec::new();
    for ((t, k), err) in jobs.iter().zip(&w2) {
        csv.row([fmt(*t), k.to_string(), fmt(*err)]);
        table.push(json!({"t": t, "particles": k, "w2": err}));
    }
    out.write("compare.csv", &csv.finish())?;
    let text = serde_json::to_string_pretty(&json!({"w2_vs_t": table})).unwrap();
    out.write("compare.json", &text)?;
    Ok(json!({"jobs": jobs.len(), "threads": threads}))
}

fn particles_as_measure(sys: &ParticleSystem) -> EulerianMeasure {
    let mut pos: Vec<f64> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for i in 0..sys.len() {
        if !pos.is_empty() && sys.positions()[i] == *pos.last().unwrap() {
            *mass.last_mut().unwrap() += sys.masses()[i];
        } else {
            pos.push(sys.positions()[i]);
            mass.push(sys.masses()[i]);
        }
    }
    EulerianMeasure::new(pos, mass).expect("merged atoms form a measure")
}
