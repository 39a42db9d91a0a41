//! Simulation library for one-dimensional pressureless fluids with
//! self-interaction forces, written in Lagrangian coordinates as evolutions
//! on the cone of monotone transport maps.
//!
//! The pieces fit together like this: [`transport`] holds the state model
//! (grids, monotone maps, particle systems, atomic measures) and the
//! isometry between them; [`projection`] projects arbitrary profiles back
//! onto the monotone cone and rearranges periodic data; [`forces`] evaluates
//! the self-interaction forces in mass coordinates; [`dynamics`] runs the
//! event-driven sticky particle evolution and the projected time stepper;
//! [`euler_poisson`] provides closed-form solutions and admissibility
//! certificates for the attractive and repulsive regimes; [`periodic`]
//! implements the predictor-corrector scheme on the torus; [`eulerian`]
//! translates trajectories back to measure-valued solutions and checks the
//! conservation laws in weak form.

pub mod dynamics;
pub mod error;
pub mod euler_poisson;
pub mod eulerian;
pub mod forces;
pub mod grid;
pub mod periodic;
pub mod projection;
pub mod transport;

pub use dynamics::{
    evolve_inclusion, evolve_sticky, next_collision_time, CollisionEvent, TrajState, Trajectory,
};
pub use error::{Error, Result};
pub use euler_poisson::{
    attractive_ep_solution, attractive_ep_state, check_inclusion_certificate,
    dirac_diffusion_solution, repulsive_two_rarefaction_oracle, CertificateReport, EPInitialData,
};
pub use eulerian::{d2_distance, to_eulerian, weak_residual, SpaceProfile, TestFunction};
pub use forces::{
    check_sticking, discrete_projected_force, eval_force, Background, ForceField, ForceKind,
    StickingReport,
};
pub use grid::Grid;
pub use periodic::{
    cluster_fraction, corrector, energy, joint_distance, predictor, reference_initial_state,
    PeriodicRun, PeriodicState, PeriodicStepper,
};
pub use projection::{
    cumulative_primitive, default_psi_family, dominates, lower_convex_envelope,
    periodic_rearrange, periodic_rearrange_nearest, project_cone, project_cone_pava,
    EnvelopePoint, PsiTest,
};
pub use transport::{
    map_to_particles, monotone_rearrangement, particles_to_map, plateaus,
    project_plateau_average, push_forward, u2_semidistance, wasserstein2, wasserstein2_measures,
    EulerianMeasure, ParticleSystem, PlateauSet, TransportMap, VelocityField,
};
