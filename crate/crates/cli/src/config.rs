//! Run configuration: JSON ingestion with field-precise validation errors,
//! and construction of the core objects a command needs.

use serde_json::Value;
use std::fmt;
use stickyflow_core::{Background, ForceField, Grid, ParticleSystem, TransportMap, VelocityField};

#[derive(Debug)]
pub enum ConfigError {
    Json(String),
    UnknownCommand(String),
    MissingField(String),
    BadType { key: String, expected: &'static str },
    OutOfRange { key: String, reason: String },
    BadValue { key: String, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Json(e) => write!(f, "malformed JSON: {e}"),
            ConfigError::UnknownCommand(c) => write!(f, "unknown command {c:?}"),
            ConfigError::MissingField(k) => write!(f, "missing field {k:?}"),
            ConfigError::BadType { key, expected } => {
                write!(f, "field {key:?} must be {expected}")
            }
            ConfigError::OutOfRange { key, reason } => {
                write!(f, "field {key:?} out of range: {reason}")
            }
            ConfigError::BadValue { key, reason } => write!(f, "field {key:?}: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SimulateParticles,
    EvolveInclusion,
    SolveAttractive,
    PeriodicScheme,
    Project,
    WeakCheck,
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateParticles => "simulate-particles",
            Command::EvolveInclusion => "evolve-inclusion",
            Command::SolveAttractive => "solve-attractive",
            Command::PeriodicScheme => "periodic-scheme",
            Command::Project => "project",
            Command::WeakCheck => "weak-check",
            Command::Compare => "compare",
        }
    }
}

#[derive(Clone, Debug)]
pub enum ForceSpec {
    EulerPoisson { lambda: f64, sigma: Option<f64> },
    Potential { family: String, strength: f64 },
    Interaction { family: String, strength: f64 },
}

impl ForceSpec {
    pub fn build(&self) -> Result<ForceField, ConfigError> {
        match self {
            ForceSpec::EulerPoisson { lambda, sigma } => {
                let background = match sigma {
                    None => Background::None,
                    Some(s) => Background::Uniform { sigma: *s },
                };
                ForceField::euler_poisson(*lambda, background).map_err(|e| ConfigError::BadValue {
                    key: "force".into(),
                    reason: e.to_string(),
                })
            }
            ForceSpec::Potential { family, strength } => {
                let k = *strength;
                match family.as_str() {
                    "harmonic" => Ok(ForceField::potential(
                        move |x| k * x,
                        Some(k.abs()),
                        Some(k.abs().max(1.0)),
                    )),
                    "constant" => Ok(ForceField::potential(move |_| k, Some(0.0), Some(k.abs()))),
                    other => Err(ConfigError::BadValue {
                        key: "force.family".into(),
                        reason: format!("unknown potential family {other:?}"),
                    }),
                }
            }
            ForceSpec::Interaction { family, strength } => {
                let k = *strength;
                match family.as_str() {
                    "sign" => Ok(ForceField::interaction(
                        move |r: f64| k * r.signum(),
                        None,
                        Some(k.abs()),
                    )),
                    "linear" => Ok(ForceField::interaction(
                        move |r| k * r,
                        Some(2.0 * k.abs()),
                        None,
                    )),
                    other => Err(ConfigError::BadValue {
                        key: "force.family".into(),
                        reason: format!("unknown interaction family {other:?}"),
                    }),
                }
            }
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            ForceSpec::EulerPoisson { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum InitialSpec {
    Preset(String),
    Particles {
        masses: Vec<f64>,
        positions: Vec<f64>,
        velocities: Vec<f64>,
    },
    Fields {
        x_values: Vec<f64>,
        v_values: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub force: Option<ForceSpec>,
    pub initial: Option<InitialSpec>,
    pub grid_n: usize,
    pub tau: Option<f64>,
    pub sample_dt: Option<f64>,
    pub t_end: Option<f64>,
    pub n_steps: Option<usize>,
    pub sample_every: usize,
    pub values: Option<Vec<f64>>,
    pub times: Vec<f64>,
    pub dt_levels: Vec<f64>,
    pub particle_counts: Vec<usize>,
    pub svg: bool,
    pub seed: u64,
    pub echo: Value,
}

fn get_f64(v: &Value, key: &str) -> Result<Option<f64>, ConfigError> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(x) => x
            .as_f64()
            .map(Some)
            .ok_or(ConfigError::BadType {
                key: key.into(),
                expected: "a number",
            }),
    }
}

fn get_usize(v: &Value, key: &str) -> Result<Option<usize>, ConfigError> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(x) => x
            .as_u64()
            .map(|u| Some(u as usize))
            .ok_or(ConfigError::BadType {
                key: key.into(),
                expected: "a nonnegative integer",
            }),
    }
}

fn get_bool(v: &Value, key: &str, default: bool) -> Result<bool, ConfigError> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(x) => x.as_bool().ok_or(ConfigError::BadType {
            key: key.into(),
            expected: "a boolean",
        }),
    }
}

fn get_array_f64(v: &Value, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                out.push(item.as_f64().ok_or(ConfigError::BadType {
                    key: key.into(),
                    expected: "an array of numbers",
                })?);
            }
            Ok(Some(out))
        }
        Some(_) => Err(ConfigError::BadType {
            key: key.into(),
            expected: "an array of numbers",
        }),
    }
}

fn require_positive(key: &str, value: Option<f64>) -> Result<f64, ConfigError> {
    let v = value.ok_or_else(|| ConfigError::MissingField(key.into()))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(ConfigError::OutOfRange {
            key: key.into(),
            reason: format!("{v} must be positive"),
        });
    }
    Ok(v)
}

fn parse_force(v: &Value) -> Result<Option<ForceSpec>, ConfigError> {
    let force = match v.get("force") {
        None | Some(Value::Null) => return Ok(None),
        Some(f) => f,
    };
    let kind = force
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or(ConfigError::BadType {
            key: "force.kind".into(),
            expected: "a string",
        })?;
    match kind {
        "euler-poisson" => {
            let lambda = get_f64(force, "lambda")?
                .ok_or_else(|| ConfigError::MissingField("force.lambda".into()))?;
            let sigma = match force.get("background") {
                None | Some(Value::Null) => None,
                Some(bg) => {
                    let ty = bg
                        .get("type")
                        .and_then(|t| t.as_str())
                        .ok_or(ConfigError::BadType {
                            key: "force.background.type".into(),
                            expected: "a string (none | uniform)",
                        })?;
                    match ty {
                        "none" => None,
                        "uniform" => Some(
                            get_f64(bg, "sigma")?.ok_or_else(|| {
                                ConfigError::MissingField("force.background.sigma".into())
                            })?,
                        ),
                        other => {
                            return Err(ConfigError::BadValue {
                                key: "force.background.type".into(),
                                reason: format!("unknown background {other:?}"),
                            })
                        }
                    }
                }
            };
            if let Some(s) = sigma {
                if s < 0.0 {
                    return Err(ConfigError::OutOfRange {
                        key: "force.background.sigma".into(),
                        reason: "must be nonnegative".into(),
                    });
                }
            }
            Ok(Some(ForceSpec::EulerPoisson { lambda, sigma }))
        }
        "potential" | "interaction" => {
            let family = force
                .get("family")
                .and_then(|f| f.as_str())
                .ok_or(ConfigError::MissingField("force.family".into()))?
                .to_string();
            let strength = get_f64(force, "strength")?.unwrap_or(1.0);
            if kind == "potential" {
                Ok(Some(ForceSpec::Potential { family, strength }))
            } else {
                Ok(Some(ForceSpec::Interaction { family, strength }))
            }
        }
        other => Err(ConfigError::BadValue {
            key: "force.kind".into(),
            reason: format!("unknown force kind {other:?}"),
        }),
    }
}

fn parse_initial(v: &Value) -> Result<Option<InitialSpec>, ConfigError> {
    let initial = match v.get("initial") {
        None | Some(Value::Null) => return Ok(None),
        Some(i) => i,
    };
    if let Some(preset) = initial.get("preset") {
        let name = preset.as_str().ok_or(ConfigError::BadType {
            key: "initial.preset".into(),
            expected: "a string",
        })?;
        match name {
            "fig123" | "two-rarefaction" | "dirac" => {
                return Ok(Some(InitialSpec::Preset(name.to_string())))
            }
            other => {
                return Err(ConfigError::BadValue {
                    key: "initial.preset".into(),
                    reason: format!("unknown preset {other:?}"),
                })
            }
        }
    }
    if initial.get("masses").is_some() {
        let masses = get_array_f64(initial, "masses")?
            .ok_or_else(|| ConfigError::MissingField("initial.masses".into()))?;
        let positions = get_array_f64(initial, "positions")?
            .ok_or_else(|| ConfigError::MissingField("initial.positions".into()))?;
        let velocities = get_array_f64(initial, "velocities")?
            .ok_or_else(|| ConfigError::MissingField("initial.velocities".into()))?;
        return Ok(Some(InitialSpec::Particles {
            masses,
            positions,
            velocities,
        }));
    }
    if initial.get("x_values").is_some() {
        let x_values = get_array_f64(initial, "x_values")?
            .ok_or_else(|| ConfigError::MissingField("initial.x_values".into()))?;
        let v_values = get_array_f64(initial, "v_values")?
            .unwrap_or_else(|| vec![0.0; x_values.len()]);
        return Ok(Some(InitialSpec::Fields { x_values, v_values }));
    }
    Err(ConfigError::BadValue {
        key: "initial".into(),
        reason: "expected a preset, particle arrays, or field arrays".into(),
    })
}

/// Parse and validate a JSON run configuration. Errors name the offending
/// key; per-command required fields are enforced here so a validated config
/// can always run.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    let command = match root.get("command") {
        None | Some(Value::Null) => return Err(ConfigError::MissingField("command".into())),
        Some(c) => {
            let name = c.as_str().ok_or(ConfigError::BadType {
                key: "command".into(),
                expected: "a string",
            })?;
            match name {
                "simulate-particles" => Command::SimulateParticles,
                "evolve-inclusion" => Command::EvolveInclusion,
                "solve-attractive" => Command::SolveAttractive,
                "periodic-scheme" => Command::PeriodicScheme,
                "project" => Command::Project,
                "weak-check" => Command::WeakCheck,
                "compare" => Command::Compare,
                other => return Err(ConfigError::UnknownCommand(other.to_string())),
            }
        }
    };

    let force = parse_force(&root)?;
    let initial = parse_initial(&root)?;
    let is_fig123 = matches!(&initial, Some(InitialSpec::Preset(p)) if p == "fig123");

    let grid_n = match get_usize(&root, "grid_n")? {
        Some(0) => {
            return Err(ConfigError::OutOfRange {
                key: "grid_n".into(),
                reason: "must be at least 1".into(),
            })
        }
        Some(n) => n,
        None if is_fig123 => 400,
        None => 256,
    };

    let tau = get_f64(&root, "tau")?;
    if let Some(t) = tau {
        if !(t > 0.0) {
            return Err(ConfigError::OutOfRange {
                key: "tau".into(),
                reason: format!("{t} must be positive"),
            });
        }
    }
    let sample_dt = get_f64(&root, "sample_dt")?;
    if let Some(t) = sample_dt {
        if !(t > 0.0) {
            return Err(ConfigError::OutOfRange {
                key: "sample_dt".into(),
                reason: format!("{t} must be positive"),
            });
        }
    }
    let t_end = get_f64(&root, "t_end")?;
    if let Some(t) = t_end {
        if !(t > 0.0) {
            return Err(ConfigError::OutOfRange {
                key: "t_end".into(),
                reason: format!("{t} must be positive"),
            });
        }
    }
    let n_steps = get_usize(&root, "n_steps")?;
    let sample_every = get_usize(&root, "sample_every")?.unwrap_or(10).max(1);
    let values = get_array_f64(&root, "values")?;
    let times = get_array_f64(&root, "times")?.unwrap_or_default();
    let dt_levels = get_array_f64(&root, "dt_levels")?.unwrap_or_default();
    let particle_counts = match root.get("particle_counts") {
        None | Some(Value::Null) => vec![64, 128, 256],
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for item in items {
                let k = item.as_u64().ok_or(ConfigError::BadType {
                    key: "particle_counts".into(),
                    expected: "an array of positive integers",
                })? as usize;
                if k == 0 {
                    return Err(ConfigError::OutOfRange {
                        key: "particle_counts".into(),
                        reason: "counts must be positive".into(),
                    });
                }
                out.push(k);
            }
            out
        }
        Some(_) => {
            return Err(ConfigError::BadType {
                key: "particle_counts".into(),
                expected: "an array of positive integers",
            })
        }
    };
    let svg = get_bool(&root, "svg", false)?;
    let seed = match root.get("seed") {
        None | Some(Value::Null) => 0,
        Some(s) => s.as_u64().ok_or(ConfigError::BadType {
            key: "seed".into(),
            expected: "a 64-bit unsigned integer",
        })?,
    };

    // per-command required fields
    match command {
        Command::SimulateParticles => {
            if force.is_none() {
                return Err(ConfigError::MissingField("force".into()));
            }
            if initial.is_none() {
                return Err(ConfigError::MissingField("initial".into()));
            }
            require_positive("t_end", t_end)?;
            require_positive("sample_dt", sample_dt)?;
        }
        Command::EvolveInclusion => {
            if force.is_none() {
                return Err(ConfigError::MissingField("force".into()));
            }
            if initial.is_none() {
                return Err(ConfigError::MissingField("initial".into()));
            }
            require_positive("t_end", t_end)?;
            require_positive("tau", tau)?;
        }
        Command::SolveAttractive => {
            if initial.is_none() {
                return Err(ConfigError::MissingField("initial".into()));
            }
            let lambda = force
                .as_ref()
                .and_then(|f| f.lambda())
                .ok_or_else(|| ConfigError::MissingField("force.lambda".into()))?;
            if lambda < 0.0 {
                return Err(ConfigError::OutOfRange {
                    key: "force.lambda".into(),
                    reason: "must be nonnegative for the attractive solver".into(),
                });
            }
            if times.is_empty() {
                return Err(ConfigError::MissingField("times".into()));
            }
        }
        Command::PeriodicScheme => {
            if initial.is_none() {
                return Err(ConfigError::MissingField("initial".into()));
            }
        }
        Command::Project => {
            if values.is_none() {
                return Err(ConfigError::MissingField("values".into()));
            }
        }
        Command::WeakCheck => {
            if force.is_none() {
                return Err(ConfigError::MissingField("force".into()));
            }
            if initial.is_none() {
                return Err(ConfigError::MissingField("initial".into()));
            }
            require_positive("t_end", t_end)?;
            if dt_levels.is_empty() {
                return Err(ConfigError::MissingField("dt_levels".into()));
            }
            for &d in &dt_levels {
                if !(d > 0.0) {
                    return Err(ConfigError::OutOfRange {
                        key: "dt_levels".into(),
                        reason: "levels must be positive".into(),
                    });
                }
            }
        }
        Command::Compare => {
            if initial.is_none() {
                return Err(ConfigError::MissingField("initial".into()));
            }
            if force.as_ref().and_then(|f| f.lambda()).is_none() {
                return Err(ConfigError::MissingField("force.lambda".into()));
            }
            if times.is_empty() {
                return Err(ConfigError::MissingField("times".into()));
            }
        }
    }

    Ok(RunConfig {
        command,
        force,
        initial,
        grid_n,
        tau,
        sample_dt,
        t_end,
        n_steps,
        sample_every,
        values,
        times,
        dt_levels,
        particle_counts,
        svg,
        seed,
        echo: root,
    })
}

impl RunConfig {
    /// Scheme defaults for the reference configuration.
    pub fn periodic_tau(&self) -> f64 {
        self.tau.unwrap_or(0.001)
    }

    pub fn periodic_steps(&self) -> usize {
        self.n_steps.unwrap_or(5000)
    }

    /// Field initial data for map-based commands.
    pub fn build_fields(&self) -> Result<(TransportMap, VelocityField), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            key: "initial".into(),
            reason,
        };
        match self.initial.as_ref().unwrap() {
            InitialSpec::Preset(name) => {
                let g = Grid::new(self.grid_n).map_err(|e| bad(e.to_string()))?;
                match name.as_str() {
                    "two-rarefaction" => {
                        let x: Vec<f64> = g.midpoints().iter().map(|m| m - 0.5).collect();
                        let v: Vec<f64> = g
                            .midpoints()
                            .iter()
                            .map(|m| if *m > 0.5 { -1.0 } else if *m < 0.5 { 1.0 } else { 0.0 })
                            .collect();
                        Ok((
                            TransportMap::new(g, x).map_err(|e| bad(e.to_string()))?,
                            VelocityField::new(g, v).map_err(|e| bad(e.to_string()))?,
                        ))
                    }
                    "dirac" => Ok((
                        TransportMap::new(g, vec![0.0; self.grid_n])
                            .map_err(|e| bad(e.to_string()))?,
                        VelocityField::zero(g),
                    )),
                    "fig123" => {
                        let s = stickyflow_core::reference_initial_state(self.grid_n)
                            .map_err(|e| bad(e.to_string()))?;
                        Ok((
                            TransportMap::new(g, s.x_values().to_vec())
                                .map_err(|e| bad(e.to_string()))?,
                            VelocityField::new(g, s.v_values().to_vec())
                                .map_err(|e| bad(e.to_string()))?,
                        ))
                    }
                    other => Err(bad(format!("preset {other:?} has no field form"))),
                }
            }
            InitialSpec::Fields { x_values, v_values } => {
                let g = Grid::new(x_values.len()).map_err(|e| bad(e.to_string()))?;
                Ok((
                    TransportMap::new(g, x_values.clone()).map_err(|e| bad(e.to_string()))?,
                    VelocityField::new(g, v_values.clone()).map_err(|e| bad(e.to_string()))?,
                ))
            }
            InitialSpec::Particles {
                masses,
                positions,
                velocities,
            } => {
                let sys = ParticleSystem::new(
                    masses.clone(),
                    positions.clone(),
                    velocities.clone(),
                )
                .map_err(|e| bad(e.to_string()))?;
                let g = Grid::new(self.grid_n).map_err(|e| bad(e.to_string()))?;
                Ok(stickyflow_core::particles_to_map(&sys, g))
            }
        }
    }

    /// Particle initial data for the event-driven commands.
    pub fn build_particles(&self) -> Result<ParticleSystem, ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            key: "initial".into(),
            reason,
        };
        match self.initial.as_ref().unwrap() {
            InitialSpec::Particles {
                masses,
                positions,
                velocities,
            } => ParticleSystem::new(masses.clone(), positions.clone(), velocities.clone())
                .map_err(|e| bad(e.to_string())),
            InitialSpec::Preset(name) if name == "dirac" => {
                ParticleSystem::new(vec![1.0], vec![0.0], vec![0.0])
                    .map_err(|e| bad(e.to_string()))
            }
            InitialSpec::Fields { x_values, v_values } => {
                let g = Grid::new(x_values.len()).map_err(|e| bad(e.to_string()))?;
                let x = TransportMap::new(g, x_values.clone()).map_err(|e| bad(e.to_string()))?;
                let v = VelocityField::new(g, v_values.clone()).map_err(|e| bad(e.to_string()))?;
                stickyflow_core::map_to_particles(&x, &v).map_err(|e| bad(e.to_string()))
            }
            InitialSpec::Preset(name) => Err(bad(format!(
                "preset {name:?} has no particle form; supply masses/positions/velocities"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_periodic_config_gets_reference_defaults() {
        let cfg = parse_config(
            r#"{"command": "periodic-scheme", "initial": {"preset": "fig123"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Command::PeriodicScheme);
        assert_eq!(cfg.grid_n, 400);
        assert_eq!(cfg.periodic_tau(), 0.001);
        assert_eq!(cfg.periodic_steps(), 5000);
    }

    #[test]
    fn missing_force_is_named() {
        let err = parse_config(
            r#"{"command": "simulate-particles",
                "initial": {"masses": [1.0], "positions": [0.0], "velocities": [0.0]},
                "t_end": 1.0, "sample_dt": 0.1}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::MissingField(ref k) if k == "force"));
    }

    #[test]
    fn negative_tau_is_a_range_error() {
        let err = parse_config(
            r#"{"command": "evolve-inclusion",
                "force": {"kind": "euler-poisson", "lambda": -1.0},
                "initial": {"preset": "dirac"},
                "t_end": 1.0, "tau": -1.0}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::OutOfRange { ref key, .. } if key == "tau"));
    }

    #[test]
    fn unknown_command_is_rejected() {
        let err = parse_config(r#"{"command": "frobnicate"}"#).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownCommand(ref c) if c == "frobnicate"));
    }

    #[test]
    fn bad_type_names_the_key() {
        let err = parse_config(
            r#"{"command": "project", "values": "not-an-array"}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::BadType { ref key, .. } if key == "values"));
    }
}
