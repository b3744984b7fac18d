//! Separatrix geometry of the deterministic jet and the two study domains.

pub mod domain;
pub mod levelset;
pub mod spline;
pub mod stagnation;

pub use domain::{
    build_eddy_domain, build_eddy_domain_with, build_jet_core_domain, build_jet_core_domain_with,
    BoundarySegment, DomainKind, DomainSpec, GeometryOptions, Marker, Phase,
};
pub use levelset::{project_to_level, trace_level_set, SeparatrixCurve, Trace, TraceEnd, TraceOptions};
pub use spline::{fit_cubic_spline, CubicSpline};
pub use stagnation::{find_stagnation_points, StagnationKind, StagnationPoint, Window};
