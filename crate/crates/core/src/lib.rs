//! Escape probabilities and mean residence times for fluid particles in a
//! randomly perturbed meandering jet.

pub mod error;
pub mod exitproblem;
pub mod fem;
pub mod flowfield;
pub mod geometry;
pub mod mc;
pub mod mesh;
pub mod plot;

pub use error::{Error, Result};
pub use exitproblem::{Resolution, SweepTable};
pub use fem::ScalarField;
pub use flowfield::{
    make_params, JetParameters, PhasePoint, StreamFunction, VelocityField, VelocityVector, ZeroFlow,
};
pub use geometry::{DomainSpec, Marker, Phase};
pub use mc::ExitStatistics;
pub use mesh::TriangleMesh;
