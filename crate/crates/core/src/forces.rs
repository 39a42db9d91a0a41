//! Lagrangian force operators acting on transport maps: pointwise potential
//! forces, pairwise interaction forces, and the Euler-Poisson force in closed
//! form, together with their cell-averaged projections onto particle systems
//! and the sticking-condition test.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::transport::{ParticleSystem, TransportMap};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Background charge for the Euler-Poisson force.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Background {
    None,
    Uniform { sigma: f64 },
}

#[derive(Clone)]
pub enum ForceKind {
    /// `F[X](m) = -v'(X(m))` for a potential derivative `v'`.
    Potential(ScalarFn),
    /// `F[X](m) = -(1/N) sum_j w'(X(m) - X(m_j))`, with `w'(0)` taken as 0.
    Interaction(ScalarFn),
    /// Closed-form self-consistent force: `-lambda (m - 1/2)` without
    /// background, plus a mean-free `lambda sigma (X - mean X)` term with a
    /// uniform background.
    EulerPoisson { lambda: f64, background: Background },
}

/// A force operator together with declared regularity metadata used by
/// sampling-based checks.
#[derive(Clone)]
pub struct ForceField {
    pub kind: ForceKind,
    pub declared_lipschitz: Option<f64>,
    pub pointwise_bound_const: Option<f64>,
}

impl ForceField {
    pub fn potential<F>(v_prime: F, lipschitz: Option<f64>, bound: Option<f64>) -> ForceField
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ForceField {
            kind: ForceKind::Potential(Arc::new(v_prime)),
            declared_lipschitz: lipschitz,
            pointwise_bound_const: bound,
        }
    }

    pub fn interaction<F>(w_prime: F, lipschitz: Option<f64>, bound: Option<f64>) -> ForceField
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ForceField {
            kind: ForceKind::Interaction(Arc::new(w_prime)),
            declared_lipschitz: lipschitz,
            pointwise_bound_const: bound,
        }
    }

    pub fn euler_poisson(lambda: f64, background: Background) -> Result<ForceField> {
        if let Background::Uniform { sigma } = background {
            if !(sigma >= 0.0) {
                return Err(Error::invalid("force", "background sigma must be >= 0"));
            }
        }
        let (lipschitz, bound) = match background {
            Background::None => (Some(0.0), Some(0.5 * lambda.abs().max(1.0))),
            Background::Uniform { sigma } => (
                Some(2.0 * lambda.abs() * sigma),
                Some(lambda.abs().max(1.0) * sigma.max(0.5) * 2.0),
            ),
        };
        Ok(ForceField {
            kind: ForceKind::EulerPoisson { lambda, background },
            declared_lipschitz: lipschitz,
            pointwise_bound_const: bound,
        })
    }

    /// True if the cell-averaged force on a merged group can never split it
    /// (constant accelerations between collisions for the event-driven path).
    pub(crate) fn accelerations_constant_between_events(&self) -> bool {
        matches!(
            self.kind,
            ForceKind::EulerPoisson {
                background: Background::None,
                ..
            }
        )
    }
}

impl std::fmt::Debug for ForceField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            ForceKind::Potential(_) => "Potential".to_string(),
            ForceKind::Interaction(_) => "Interaction".to_string(),
            ForceKind::EulerPoisson { lambda, background } => {
                format!("EulerPoisson(lambda={lambda}, background={background:?})")
            }
        };
        f.debug_struct("ForceField").field("kind", &kind).finish()
    }
}

/// Evaluate the Lagrangian force on a transport map, one acceleration value
/// per grid cell. The summation order in the interaction case is fixed so
/// results are reproducible bit for bit.
pub fn eval_force(f: &ForceField, x: &TransportMap) -> Result<Vec<f64>> {
    let n = x.grid().n_cells();
    let vals = x.values();
    let out = match &f.kind {
        ForceKind::Potential(vp) => vals.iter().map(|&xi| -vp(xi)).collect::<Vec<f64>>(),
        ForceKind::Interaction(wp) => {
            let inv_n = 1.0 / n as f64;
            (0..n)
                .map(|i| {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let d = vals[i] - vals[j];
                        if d != 0.0 {
                            acc += wp(d);
                        }
                    }
                    -acc * inv_n
                })
                .collect()
        }
        ForceKind::EulerPoisson { lambda, background } => match background {
            Background::None => (0..n)
                .map(|i| -lambda * (x.grid().midpoint(i) - 0.5))
                .collect(),
            Background::Uniform { sigma } => {
                let mean_x = vals.iter().sum::<f64>() / n as f64;
                (0..n)
                    .map(|i| {
                        -lambda * (x.grid().midpoint(i) - 0.5) + lambda * sigma * (vals[i] - mean_x)
                    })
                    .collect()
            }
        },
    };
    if let Some(idx) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "force evaluation",
            index: idx,
        });
    }
    Ok(out)
}

/// Cell-averaged force on a particle system: acceleration of particle `i` is
/// the mean of the Lagrangian force over its mass interval. For the
/// Euler-Poisson force without background this is the exact closed form
/// `-lambda (M_{i-1} + M_i - 1) / 2` in the cumulative masses.
pub fn discrete_projected_force(f: &ForceField, sys: &ParticleSystem) -> Result<Vec<f64>> {
    let k = sys.len();
    let masses = sys.masses();
    let xs = sys.positions();
    let out = match &f.kind {
        ForceKind::Potential(vp) => xs.iter().map(|&x| -vp(x)).collect::<Vec<f64>>(),
        ForceKind::Interaction(wp) => (0..k)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..k {
                    let d = xs[i] - xs[j];
                    if d != 0.0 {
                        acc += masses[j] * wp(d);
                    }
                }
                -acc
            })
            .collect(),
        ForceKind::EulerPoisson { lambda, background } => {
            let cum = sys.cumulative_masses();
            match background {
                Background::None => (0..k)
                    .map(|i| -lambda * 0.5 * (cum[i] + cum[i + 1] - 1.0))
                    .collect(),
                Background::Uniform { sigma } => {
                    let mean_x: f64 = masses.iter().zip(xs).map(|(m, x)| m * x).sum();
                    (0..k)
                        .map(|i| {
                            -lambda * 0.5 * (cum[i] + cum[i + 1] - 1.0)
                                + lambda * sigma * (xs[i] - mean_x)
                        })
                        .collect()
                }
            }
        }
    };
    if let Some(idx) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "projected force",
            index: idx,
        });
    }
    Ok(out)
}

/// Result of the sticking test on one plateau: the cumulative profile of the
/// force fluctuation and whether it stays nonnegative.
#[derive(Clone, Debug)]
pub struct StickingReport {
    pub sticking: bool,
    /// Cumulative integral of `F - plateau mean of F` across the plateau,
    /// one node per interior cell boundary plus both endpoints (which vanish
    /// by construction).
    pub xi: Vec<f64>,
}

/// Test whether the force holds a plateau of `x` together: the running
/// integral of the force fluctuation over the plateau must stay nonnegative.
pub fn check_sticking(f: &ForceField, x: &TransportMap, plateau: Range<usize>) -> Result<StickingReport> {
    let vals = x.values();
    if plateau.start >= plateau.end || plateau.end > vals.len() {
        return Err(Error::NotAPlateau {
            start: plateau.start,
            end: plateau.end,
        });
    }
    if vals[plateau.clone()]
        .windows(2)
        .any(|w| w[0] != w[1])
    {
        return Err(Error::NotAPlateau {
            start: plateau.start,
            end: plateau.end,
        });
    }
    let force = eval_force(f, x)?;
    let cell = x.grid().cell_width();
    let len = plateau.end - plateau.start;
    let mean = force[plateau.clone()].iter().sum::<f64>() / len as f64;
    let mut xi = Vec::with_capacity(len + 1);
    let mut acc = 0.0;
    xi.push(0.0);
    for i in plateau.clone() {
        acc += (force[i] - mean) * cell;
        xi.push(acc);
    }
    let sticking = xi.iter().all(|&v| v >= -1e-12);
    Ok(StickingReport { sticking, xi })
}
