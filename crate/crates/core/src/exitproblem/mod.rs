//! Escape probabilities and mean residence times on eddy and jet-core domains.

mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet, apply_periodic, assemble, field_extremum, integrate, solve_with, Factorization, FieldKind,
    LinearSystem, ScalarField, SolveOptions, Stabilization,
};
use crate::flowfield::{JetParameters, PhasePoint, VelocityField};
use crate::geometry::{DomainKind, DomainSpec, Marker};
use crate::mesh::{mesh_eddy, mesh_jet_core, refine_uniform, TriangleMesh};

pub use sweep::{
    default_grid, find_crossing, find_crossing_in, find_extremum, grid_uncertainty, monotonicity_check,
    refine_grid, refinement_centers, sweep_beta, sweep_refined, sweep_row, Monotonicity, MonotonicityVerdict, SweepColumn, SweepMetadata, SweepRow, SweepTable,
};

/// Mesh and solver settings for one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Eddy cells from the mid-line to either branch.
    pub eddy_radial: usize,
    /// Eddy boundary nodes along each branch, roughly.
    pub eddy_angular: usize,
    pub core_nx: usize,
    pub core_ny: usize,
    /// Uniform refinements applied after meshing.
    pub refinements: usize,
    pub stabilization: Stabilization,
    pub solver: SolveOptions,
    /// Diffusion coefficient as a multiple of ε.
    pub diffusion_factor: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            eddy_radial: 12,
            eddy_angular: 240,
            core_nx: 160,
            core_ny: 64,
            refinements: 0,
            stabilization: Stabilization::StreamlineDiffusion,
            solver: SolveOptions::default(),
            diffusion_factor: 1.0,
        }
    }
}

impl Resolution {
    /// Cheap settings for tests and smoke runs.
    pub fn coarse() -> Self {
        Resolution {
            eddy_radial: 6,
            eddy_angular: 80,
            core_nx: 48,
            core_ny: 16,
            ..Resolution::default()
        }
    }

    /// Same settings with every mesh count doubled.
    pub fn doubled(&self) -> Self {
        Resolution {
            eddy_radial: 2 * self.eddy_radial,
            eddy_angular: 2 * self.eddy_angular,
            core_nx: 2 * self.core_nx,
            core_ny: 2 * self.core_ny,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExitSolution {
    pub domain: DomainSpec,
    pub gamma: Marker,
    pub field: ScalarField,
    /// Field integral over the domain area.
    pub average: f64,
}

/// Both escape problems and the residence-time problem on one mesh.
#[derive(Clone, Debug)]
pub struct DomainSolution {
    pub upper: ExitSolution,
    pub lower: ExitSolution,
    pub mrt: ScalarField,
    pub max_mrt: f64,
    pub max_mrt_at: PhasePoint,
}

fn describe(d: &DomainSpec) -> String {
    let kind = match d.kind {
        DomainKind::Eddy => "eddy",
        DomainKind::JetCoreUnit => "jet core",
    };
    match d.beta {
        Some(b) => format!("{kind} at beta = {b}"),
        None => kind.to_string(),
    }
}

fn check_beta(p: &JetParameters, d: &DomainSpec) -> Result<()> {
    match d.beta {
        Some(b) if (b - p.beta).abs() > 1e-12 => Err(Error::ParameterDomain {
            field: "beta",
            value: p.beta,
            expected: "the beta the domain was built for",
        }),
        _ => Ok(()),
    }
}

/// Meshes a domain at the given resolution.
pub fn mesh_domain(d: &DomainSpec, res: &Resolution) -> Result<Arc<TriangleMesh>> {
    let mut m = match d.kind {
        DomainKind::Eddy => mesh_eddy(d, res.eddy_radial, res.eddy_angular)?,
        DomainKind::JetCoreUnit => mesh_jet_core(d, res.core_nx, res.core_ny)?,
    };
    for _ in 0..res.refinements {
        m = refine_uniform(&m, d)?;
    }
    Ok(Arc::new(m))
}

fn constrained(
    mesh: &Arc<TriangleMesh>,
    velocity: &(impl VelocityField + ?Sized),
    diffusion: f64,
    rhs_constant: f64,
    res: &Resolution,
) -> Result<LinearSystem> {
    let sys = assemble(Arc::clone(mesh), velocity, diffusion, rhs_constant, res.stabilization)?;
    if mesh.periodic_pairs.is_empty() {
        Ok(sys)
    } else {
        apply_periodic(&sys, &mesh.periodic_pairs)
    }
}

fn with_boundary(sys: &LinearSystem, gamma: Marker, value: f64, other: f64) -> Result<LinearSystem> {
    apply_dirichlet(&apply_dirichlet(sys, gamma, value)?, gamma.complement(), other)
}

fn exit_solution(d: &DomainSpec, gamma: Marker, field: ScalarField) -> ExitSolution {
    let average = integrate(&field) / d.area;
    ExitSolution {
        domain: d.clone(),
        gamma,
        field,
        average,
    }
}

/// Escape probability through `gamma` for an arbitrary drift and diffusion.
pub fn solve_escape_with(
    velocity: &(impl VelocityField + ?Sized),
    diffusion: f64,
    d: &DomainSpec,
    gamma: Marker,
    res: &Resolution,
) -> Result<ExitSolution> {
    let run = || -> Result<ExitSolution> {
        let mesh = mesh_domain(d, res)?;
        let sys = with_boundary(&constrained(&mesh, velocity, diffusion, 0.0, res)?, gamma, 1.0, 0.0)?;
        let f = Factorization::new(&sys.matrix, &res.solver)?;
        let field = solve_with(&sys, &f, &sys.rhs, FieldKind::EscapeProbability)?;
        Ok(exit_solution(d, gamma, field))
    };
    run().map_err(|e| e.context(format!("escape problem on the {}", describe(d))))
}

/// Escape probability through `gamma` for the jet drift with diffusion ε.
pub fn solve_escape(p: &JetParameters, d: &DomainSpec, gamma: Marker, res: &Resolution) -> Result<ExitSolution> {
    check_beta(p, d)?;
    solve_escape_with(p, res.diffusion_factor * p.epsilon, d, gamma, res)
}

/// Mean residence time for an arbitrary drift and diffusion.
pub fn solve_mrt_with(
    velocity: &(impl VelocityField + ?Sized),
    diffusion: f64,
    d: &DomainSpec,
    res: &Resolution,
) -> Result<ScalarField> {
    let run = || -> Result<ScalarField> {
        let mesh = mesh_domain(d, res)?;
        let sys = with_boundary(&constrained(&mesh, velocity, diffusion, -1.0, res)?, Marker::Upper, 0.0, 0.0)?;
        let f = Factorization::new(&sys.matrix, &res.solver)?;
        solve_with(&sys, &f, &sys.rhs, FieldKind::ResidenceTime)
    };
    run().map_err(|e| e.context(format!("residence-time problem on the {}", describe(d))))
}

/// Mean residence time for the jet drift with diffusion ε.
pub fn solve_mrt(p: &JetParameters, d: &DomainSpec, res: &Resolution) -> Result<ScalarField> {
    check_beta(p, d)?;
    solve_mrt_with(p, res.diffusion_factor * p.epsilon, d, res)
}

/// All three problems on one mesh. Every boundary vertex is constrained in
/// each of them, so they share a matrix and a single factorization.
pub fn solve_all_with(
    velocity: &(impl VelocityField + ?Sized),
    diffusion: f64,
    d: &DomainSpec,
    res: &Resolution,
) -> Result<DomainSolution> {
    let run = || -> Result<DomainSolution> {
        let mesh = mesh_domain(d, res)?;
        let escape = constrained(&mesh, velocity, diffusion, 0.0, res)?;
        let up = with_boundary(&escape, Marker::Upper, 1.0, 0.0)?;
        let lo = with_boundary(&escape, Marker::Lower, 1.0, 0.0)?;
        let mrt = with_boundary(&constrained(&mesh, velocity, diffusion, -1.0, res)?, Marker::Upper, 0.0, 0.0)?;
        let f = Factorization::new(&up.matrix, &res.solver)?;
        let upper = exit_solution(d, Marker::Upper, solve_with(&up, &f, &up.rhs, FieldKind::EscapeProbability)?);
        let lower = exit_solution(d, Marker::Lower, solve_with(&lo, &f, &lo.rhs, FieldKind::EscapeProbability)?);
        let mrt = solve_with(&mrt, &f, &mrt.rhs, FieldKind::ResidenceTime)?;
        let (max_mrt, max_mrt_at) = field_extremum(&mrt);
        Ok(DomainSolution {
            upper,
            lower,
            mrt,
            max_mrt,
            max_mrt_at,
        })
    };
    run().map_err(|e| e.context(format!("exit problems on the {}", describe(d))))
}

pub fn solve_all(p: &JetParameters, d: &DomainSpec, res: &Resolution) -> Result<DomainSolution> {
    check_beta(p, d)?;
    solve_all_with(p, res.diffusion_factor * p.epsilon, d, res)
}
