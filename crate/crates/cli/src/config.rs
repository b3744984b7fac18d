use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use jetexit::exitproblem::Resolution;
use jetexit::fem::{SolveOptions, Stabilization};
use jetexit::geometry::{Marker, Phase};

#[derive(Parser, Debug)]
#[command(name = "jetexit", version, about = "Escape probabilities and residence times in a random meandering jet")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Escape probability through one boundary of an eddy or unit jet core.
    SolveEscape {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum)]
        gamma: GammaArg,
        #[command(flatten)]
        common: Common,
    },
    /// Mean residence time on an eddy or unit jet core.
    SolveMrt {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep beta and locate crossings and extrema.
    Sweep {
        /// Comma-separated beta values; overrides the grid.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.01)]
        beta_min: f64,
        #[arg(long, default_value_t = 0.65)]
        beta_max: f64,
        #[arg(long, default_value_t = 28)]
        points: usize,
        /// Skip the local refinement around detected features.
        #[arg(long)]
        no_refine: bool,
        #[arg(long, value_enum, default_value_t = PhaseArg::Trough)]
        phase: PhaseArg,
        #[command(flatten)]
        common: Common,
    },
    /// Compare finite-element fields with Monte Carlo at probe points.
    McValidate {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Time steps for the convergence study, decreasing.
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
        /// Fixed time step; skips the convergence study.
        #[arg(long)]
        dt: Option<f64>,
        /// Number of probe points used (at most 10).
        #[arg(long, default_value_t = 10)]
        probes: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Write the mesh, its quality report and the domain description.
    MeshExport {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        common: Common,
    },
    /// Pure-diffusion disk residence time against its closed form.
    DiskSelftest {
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::SolveEscape { common, .. }
            | Command::SolveMrt { common, .. }
            | Command::Sweep { common, .. }
            | Command::McValidate { common, .. }
            | Command::MeshExport { common, .. }
            | Command::DiskSelftest { common, .. } => common,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Target {
    #[arg(long)]
    pub beta: f64,
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    #[arg(long, value_enum, default_value_t = PhaseArg::Trough)]
    pub phase: PhaseArg,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value = "jetexit-out")]
    pub output: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Print the resolved configuration and stop.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub eddy_radial: Option<usize>,
    #[arg(long)]
    pub eddy_angular: Option<usize>,
    #[arg(long)]
    pub core_nx: Option<usize>,
    #[arg(long)]
    pub core_ny: Option<usize>,
    #[arg(long)]
    pub refinements: Option<usize>,
    #[arg(long, value_enum)]
    pub stabilization: Option<StabilizationArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Diffusion coefficient as a multiple of epsilon.
    #[arg(long)]
    pub diffusion_factor: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainArg {
    Eddy,
    JetCore,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseArg {
    Trough,
    Crest,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Trough => Phase::Trough,
            PhaseArg::Crest => Phase::Crest,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaArg {
    Upper,
    Lower,
}

impl From<GammaArg> for Marker {
    fn from(g: GammaArg) -> Self {
        match g {
            GammaArg::Upper => Marker::Upper,
            GammaArg::Lower => Marker::Lower,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilizationArg {
    StreamlineDiffusion,
    None,
}

/// Everything needed to rerun a command exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub code_version: String,
    pub beta: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub refine: Option<bool>,
    pub domain: Option<DomainArg>,
    pub phase: Option<Phase>,
    pub gamma: Option<Marker>,
    pub resolution: Resolution,
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dts: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub probes: Option<usize>,
    pub radius: Option<f64>,
    pub epsilon: Option<f64>,
}

impl RunConfig {
    pub fn new(command: &str, common: &Common) -> Self {
        RunConfig {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            beta: None,
            betas: None,
            refine: None,
            domain: None,
            phase: None,
            gamma: None,
            resolution: resolution(common),
            output: common.output.clone(),
            seed: None,
            paths: None,
            dts: None,
            dt: None,
            probes: None,
            radius: None,
            epsilon: None,
        }
    }

    pub fn with_target(mut self, t: &Target) -> Self {
        self.beta = Some(t.beta);
        self.domain = Some(t.domain);
        self.phase = Some(t.phase.into());
        self
    }
}

pub fn resolution(c: &Common) -> Resolution {
    resolution_over(c, Resolution::default())
}

/// Command-line overrides applied on top of `d`.
pub fn resolution_over(c: &Common, d: Resolution) -> Resolution {
    Resolution {
        eddy_radial: c.eddy_radial.unwrap_or(d.eddy_radial),
        eddy_angular: c.eddy_angular.unwrap_or(d.eddy_angular),
        core_nx: c.core_nx.unwrap_or(d.core_nx),
        core_ny: c.core_ny.unwrap_or(d.core_ny),
        refinements: c.refinements.unwrap_or(d.refinements),
        stabilization: match c.stabilization {
            Some(StabilizationArg::None) => Stabilization::None,
            Some(StabilizationArg::StreamlineDiffusion) => Stabilization::StreamlineDiffusion,
            None => d.stabilization,
        },
        solver: SolveOptions {
            tol: c.tol.unwrap_or(d.solver.tol),
            max_iter: c.max_iter.unwrap_or(d.solver.max_iter),
            ..d.solver
        },
        diffusion_factor: c.diffusion_factor.unwrap_or(d.diffusion_factor),
    }
}
