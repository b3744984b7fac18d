use thiserror::Error;

use crate::flowfield::PhasePoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{field}` out of range: {value} (expected {expected})")]
    ParameterDomain {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("degenerate stagnation point at ({}, {}): singular velocity Jacobian", .location.x, .location.y)]
    DegeneratePoint { location: PhasePoint },

    #[error("level-set tracing exhausted its budget of {max_points} points without closing or leaving the box")]
    TracingBudget { max_points: usize },

    #[error("geometry construction failed at beta = {beta}: {reason}")]
    Geometry { beta: f64, reason: String },

    #[error("degenerate spline input: {0}")]
    DegenerateInput(String),

    #[error("mesh quality failure: triangle {triangle} has signed area {signed_area:e}")]
    MeshQuality { triangle: usize, signed_area: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("marker {0} not present in the mesh")]
    UnknownMarker(String),

    #[error("periodic pairing is not a bijection: {0}")]
    Pairing(String),

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("crossing structure error: expected exactly one sign change, pattern `{pattern}`")]
    CrossingStructure { pattern: String },

    #[error("extremum structure error: {0}")]
    ExtremumStructure(String),

    #[error("{censored} of {n_paths} paths did not exit before t = {max_time}")]
    Censored {
        censored: usize,
        n_paths: usize,
        max_time: f64,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable name of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::ParameterDomain { .. } => "parameter_domain",
            Error::DegeneratePoint { .. } => "degenerate_point",
            Error::TracingBudget { .. } => "tracing_budget",
            Error::Geometry { .. } => "geometry",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::MeshQuality { .. } => "mesh_quality",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::UnknownMarker(_) => "unknown_marker",
            Error::Pairing(_) => "pairing",
            Error::SolverFailure { .. } => "solver_failure",
            Error::CrossingStructure { .. } => "crossing_structure",
            Error::ExtremumStructure(_) => "extremum_structure",
            Error::Censored { .. } => "censored",
            Error::Context { .. } => unreachable!("root never returns a context"),
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
