use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use jetexit::exitproblem::{
    default_grid, find_crossing, find_extremum, grid_uncertainty, mesh_domain, monotonicity_check, solve_all,
    solve_escape, solve_mrt, solve_mrt_with, sweep_beta, sweep_refined, Resolution, SweepColumn, SweepTable,
};
use jetexit::fem::field_extremum;
use jetexit::geometry::{build_eddy_domain, build_jet_core_domain, DomainSpec, Marker};
use jetexit::mc::{dt_convergence_study_with, probe_points, simulate_first_exit_with, ExitStatistics, McConfig};
use jetexit::mesh::write_text;
use jetexit::plot::{contour_svg, line_svg, Series};
use jetexit::{JetParameters, PhasePoint, ZeroFlow};

use crate::config::{resolution_over, Command, Common, DomainArg, RunConfig, Target};
use crate::Failure;

const MC_SIGMAS: f64 = 3.0;
const EDDY_DTS: [f64; 3] = [2e-3, 1e-3, 5e-4];
const CORE_DTS: [f64; 3] = [8e-3, 4e-3, 2e-3];

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::SolveEscape { target, gamma, common } => run_solve_escape(&target, gamma.into(), &common),
        Command::SolveMrt { target, common } => run_solve_mrt(&target, &common),
        Command::Sweep {
            betas,
            beta_min,
            beta_max,
            points,
            no_refine,
            phase,
            common,
        } => {
            let refine = !no_refine && betas.is_none();
            let grid = match betas {
                Some(b) => b,
                None => {
                    if !(beta_min < beta_max) || points < 2 {
                        return Err(Failure::Usage(format!(
                            "need beta-min < beta-max and at least 2 points, got [{beta_min}, {beta_max}] with {points}"
                        )));
                    }
                    default_grid(beta_min, beta_max, points)
                }
            };
            let mut cfg = RunConfig::new("sweep", &common);
            cfg.betas = Some(grid);
            cfg.refine = Some(refine);
            cfg.phase = Some(phase.into());
            run_sweep(cfg, &common)
        }
        Command::McValidate {
            target,
            paths,
            seed,
            dts,
            dt,
            probes,
            common,
        } => {
            if !(1..=10).contains(&probes) {
                return Err(Failure::Usage(format!("--probes must be between 1 and 10, got {probes}")));
            }
            if paths < 2 {
                return Err(Failure::Usage("--paths must be at least 2".into()));
            }
            let mut cfg = RunConfig::new("mc-validate", &common).with_target(&target);
            cfg.paths = Some(paths);
            cfg.seed = Some(seed);
            cfg.probes = Some(probes);
            cfg.dt = dt;
            cfg.dts = match (dt, dts) {
                (Some(_), _) => None,
                (None, Some(d)) => Some(d),
                (None, None) => Some(match target.domain {
                    DomainArg::Eddy => EDDY_DTS.to_vec(),
                    DomainArg::JetCore => CORE_DTS.to_vec(),
                }),
            };
            run_mc_validate(&target, cfg, &common)
        }
        Command::MeshExport { target, common } => run_mesh_export(&target, &common),
        Command::DiskSelftest { radius, epsilon, common } => run_disk_selftest(radius, epsilon, &common),
    }
}

/// Prints the configuration on a dry run, otherwise prepares the output
/// directory and records the configuration in it.
fn begin(cfg: &RunConfig, common: &Common) -> Result<Option<PathBuf>, Failure> {
    let text = serde_json::to_string_pretty(cfg).map_err(jetexit::Error::from)?;
    if common.dry_run {
        let _ = writeln!(std::io::stdout().lock(), "{text}");
        return Ok(None);
    }
    let dir = &common.output;
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Failure::Collision(dir.clone()));
        }
        if fs::read_dir(dir)?.next().is_some() && !common.force {
            return Err(Failure::Collision(dir.clone()));
        }
    }
    fs::create_dir_all(dir)?;
    write(dir, "run_config.json", &(text + "\n"))?;
    Ok(Some(dir.clone()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(jetexit::Error::from)?;
    write(dir, name, &(text + "\n"))
}

fn target_domain(t: &Target) -> Result<(JetParameters, DomainSpec), Failure> {
    let p = JetParameters::with_beta(t.beta)?;
    let d = match t.domain {
        DomainArg::Eddy => build_eddy_domain(&p)?,
        DomainArg::JetCore => build_jet_core_domain(&p, t.phase.into())?,
    };
    Ok((p, d))
}

fn domain_label(t: &Target) -> String {
    match t.domain {
        DomainArg::Eddy => format!("eddy, beta = {}", t.beta),
        DomainArg::JetCore => format!("jet core ({:?}), beta = {}", jetexit::geometry::Phase::from(t.phase), t.beta),
    }
}

fn run_solve_escape(t: &Target, gamma: Marker, common: &Common) -> Result<(), Failure> {
    let mut cfg = RunConfig::new("solve-escape", common).with_target(t);
    cfg.gamma = Some(gamma);
    let Some(dir) = begin(&cfg, common)? else {
        return Ok(());
    };
    let (p, d) = target_domain(t)?;
    let sol = solve_escape(&p, &d, gamma, &cfg.resolution)?;
    let f = &sol.field;
    write(&dir, "field.csv", &f.to_csv())?;
    write(&dir, "field.json", &f.to_json()?)?;
    write(&dir, "mesh.json", &f.mesh.to_json()?)?;
    write(&dir, "domain.json", &d.to_json()?)?;
    let title = format!("escape probability through {gamma}, {}", domain_label(t));
    write(&dir, "field.svg", &contour_svg(f, &d, &title))?;
    write_json(
        &dir,
        "summary.json",
        &json!({
            "beta": t.beta,
            "domain": t.domain,
            "gamma": gamma,
            "average": sol.average,
            "min": f.min(),
            "max": f.max(),
            "area": d.area,
            "n_vertices": f.mesh.n_vertices(),
            "n_triangles": f.mesh.n_triangles(),
            "solver": f.report,
        }),
    )?;
    println!("P = {:.6}", sol.average);
    println!(
        "field range [{:.6}, {:.6}] on {} vertices; results in {}",
        f.min(),
        f.max(),
        f.mesh.n_vertices(),
        dir.display()
    );
    Ok(())
}

fn run_solve_mrt(t: &Target, common: &Common) -> Result<(), Failure> {
    let cfg = RunConfig::new("solve-mrt", common).with_target(t);
    let Some(dir) = begin(&cfg, common)? else {
        return Ok(());
    };
    let (p, d) = target_domain(t)?;
    let u = solve_mrt(&p, &d, &cfg.resolution)?;
    let (max, at) = field_extremum(&u);
    write(&dir, "field.csv", &u.to_csv())?;
    write(&dir, "field.json", &u.to_json()?)?;
    write(&dir, "mesh.json", &u.mesh.to_json()?)?;
    write(&dir, "domain.json", &d.to_json()?)?;
    let title = format!("mean residence time, {}", domain_label(t));
    write(&dir, "field.svg", &contour_svg(&u, &d, &title))?;
    write_json(
        &dir,
        "summary.json",
        &json!({
            "beta": t.beta,
            "domain": t.domain,
            "max_mrt": max,
            "max_mrt_at": at,
            "n_vertices": u.mesh.n_vertices(),
            "n_triangles": u.mesh.n_triangles(),
            "solver": u.report,
        }),
    )?;
    println!("max u = {max:.6} at ({:.6}, {:.6})", at.x, at.y);
    println!("results in {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct Feature {
    name: &'static str,
    beta: Option<f64>,
    /// Half the local grid spacing.
    uncertainty: Option<f64>,
    error: Option<String>,
}

fn feature(t: &SweepTable, name: &'static str, r: jetexit::Result<f64>) -> Feature {
    match r {
        Ok(b) => Feature {
            name,
            beta: Some(b),
            uncertainty: Some(grid_uncertainty(t, b)),
            error: None,
        },
        Err(e) => Feature {
            name,
            beta: None,
            uncertainty: None,
            error: Some(e.to_string()),
        },
    }
}

fn sweep_plot(t: &SweepTable, cols: &[(SweepColumn, &str, bool)], title: &str, y_label: &str) -> String {
    let data: Vec<Vec<(f64, f64)>> = cols.iter().map(|(c, _, _)| t.column(*c)).collect();
    let series: Vec<Series> = cols
        .iter()
        .zip(&data)
        .map(|((_, label, dashed), points)| Series {
            label,
            points,
            dashed: *dashed,
        })
        .collect();
    line_svg(&series, title, "beta", y_label)
}

fn run_sweep(cfg: RunConfig, common: &Common) -> Result<(), Failure> {
    let Some(dir) = begin(&cfg, common)? else {
        return Ok(());
    };
    let grid = cfg.betas.as_deref().unwrap_or_default();
    let phase = cfg.phase.unwrap_or_default();
    let table = if cfg.refine == Some(true) {
        sweep_refined(grid, &cfg.resolution, phase)?
    } else {
        sweep_beta(grid, &cfg.resolution, phase)?
    };
    write(&dir, "sweep.csv", &table.to_csv())?;

    use SweepColumn::*;
    let features = vec![
        feature(&table, "eddy_escape_crossing", find_crossing(&table, PEddyLower, PEddyUpper)),
        feature(&table, "core_escape_crossing", find_crossing(&table, PCoreUpper, PCoreLower)),
        feature(&table, "eddy_lower_escape_peak", find_extremum(&table, PEddyLower)),
        feature(&table, "eddy_max_mrt_peak", find_extremum(&table, MaxMrtEddy)),
        feature(&table, "core_max_mrt_peak", find_extremum(&table, MaxMrtCore)),
    ];
    let monotonicity: Vec<_> = SweepColumn::ALL
        .iter()
        .map(|&c| json!({ "column": c.name(), "verdict": monotonicity_check(&table, c).verdict }))
        .collect();
    write_json(
        &dir,
        "sweep.json",
        &json!({
            "metadata": table.metadata(),
            "features": features,
            "monotonicity": monotonicity,
            "failed_rows": table.failed_rows(),
        }),
    )?;
    write(
        &dir,
        "escape_eddy.svg",
        &sweep_plot(
            &table,
            &[(PEddyUpper, "into jet core", false), (PEddyLower, "into exterior", true)],
            "average escape probability, eddy",
            "P",
        ),
    )?;
    write(
        &dir,
        "escape_core.svg",
        &sweep_plot(
            &table,
            &[(PCoreUpper, "upper", false), (PCoreLower, "lower", true)],
            "average escape probability, unit jet core",
            "P",
        ),
    )?;
    write(
        &dir,
        "max_mrt_eddy.svg",
        &sweep_plot(&table, &[(MaxMrtEddy, "eddy", false)], "maximal mean residence time, eddy", "max u"),
    )?;
    write(
        &dir,
        "max_mrt_core.svg",
        &sweep_plot(&table, &[(MaxMrtCore, "jet core", false)], "maximal mean residence time, unit jet core", "max u"),
    )?;

    println!("{} beta values swept; table in {}", table.rows.len(), dir.join("sweep.csv").display());
    for f in &features {
        match (f.beta, f.uncertainty, &f.error) {
            (Some(b), Some(u), _) => println!("{}: beta = {b:.4} ± {u:.4}", f.name),
            (_, _, Some(e)) => println!("{}: not found ({e})", f.name),
            _ => {}
        }
    }
    let failed = table.failed_rows();
    if failed.is_empty() {
        Ok(())
    } else {
        let betas: Vec<String> = failed.iter().map(|r| r.beta.to_string()).collect();
        Err(Failure::Incomplete(format!(
            "{} of {} sweep rows failed (beta = {})",
            failed.len(),
            table.rows.len(),
            betas.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct ProbeResult {
    point: PhasePoint,
    fem_p_upper: f64,
    fem_mrt: f64,
    mc: ExitStatistics,
    z_p_upper: f64,
    z_mrt: f64,
    pass: bool,
}

fn run_mc_validate(t: &Target, cfg: RunConfig, common: &Common) -> Result<(), Failure> {
    let Some(dir) = begin(&cfg, common)? else {
        return Ok(());
    };
    let res = &cfg.resolution;
    let (p, d) = target_domain(t)?;
    let fem = solve_all(&p, &d, res)?;
    let diffusion = res.diffusion_factor * p.epsilon;
    let n = cfg.probes.unwrap_or(10);
    let probes: Vec<PhasePoint> = probe_points(&d).into_iter().take(n).collect();
    if probes.is_empty() {
        return Err(Failure::Core(jetexit::Error::DegenerateInput("no probe point lies inside the domain".into())));
    }
    let seed = cfg.seed.unwrap_or(0);
    let base = McConfig {
        n_paths: cfg.paths.unwrap_or(10_000),
        seed,
        ..McConfig::default()
    }
    .with_predicted_mrt(fem.max_mrt);

    let (dt, study) = match (cfg.dt, &cfg.dts) {
        (Some(dt), _) => (dt, None),
        (None, Some(dts)) => {
            let at = probes[probes.len().min(5) - 1];
            let s = dt_convergence_study_with(&p, diffusion, &d, at, dts, &base)?;
            let dt = s.converged_dt.or(dts.last().copied()).unwrap_or(base.dt);
            (dt, Some(s))
        }
        (None, None) => (base.dt, None),
    };
    if let Some(s) = &study {
        match s.converged_dt {
            Some(c) => println!("dt study: converged at dt = {c}"),
            None => println!("dt study: not converged; using the smallest dt = {dt}"),
        }
    }

    let mut results = Vec::new();
    for (i, &q) in probes.iter().enumerate() {
        let c = McConfig {
            dt,
            seed: seed + i as u64,
            ..base.clone()
        };
        let mc = simulate_first_exit_with(&p, diffusion, &d, q, &c)?;
        let fem_p = fem.upper.field.interpolate(q).unwrap_or(f64::NAN);
        let fem_u = fem.mrt.interpolate(q).unwrap_or(f64::NAN);
        let z_p = (mc.p_upper - fem_p) / mc.std_err_upper.max(1e-300);
        let z_u = (mc.mean_exit_time - fem_u) / mc.std_err_time.max(1e-300);
        let pass = z_p.abs() <= MC_SIGMAS && z_u.abs() <= MC_SIGMAS;
        println!(
            "probe {i} ({:.4}, {:.4}): P_upper FEM {fem_p:.4} MC {:.4} (z = {z_p:+.2}); MRT FEM {fem_u:.3} MC {:.3} (z = {z_u:+.2}) {}",
            q.x,
            q.y,
            mc.p_upper,
            mc.mean_exit_time,
            if pass { "ok" } else { "MISMATCH" }
        );
        results.push(ProbeResult {
            point: q,
            fem_p_upper: fem_p,
            fem_mrt: fem_u,
            mc,
            z_p_upper: z_p,
            z_mrt: z_u,
            pass,
        });
    }
    let failures = results.iter().filter(|r| !r.pass).count();
    write_json(
        &dir,
        "validation.json",
        &json!({
            "beta": t.beta,
            "domain": t.domain,
            "dt": dt,
            "sigmas": MC_SIGMAS,
            "dt_study": study,
            "probes": results,
            "failures": failures,
        }),
    )?;
    if failures == 0 {
        println!("all {} probes agree within {MC_SIGMAS} standard errors", results.len());
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "{failures} of {} probes differ from the finite-element fields by more than {MC_SIGMAS} standard errors",
            results.len()
        )))
    }
}

fn run_mesh_export(t: &Target, common: &Common) -> Result<(), Failure> {
    let cfg = RunConfig::new("mesh-export", common).with_target(t);
    let Some(dir) = begin(&cfg, common)? else {
        return Ok(());
    };
    let (_, d) = target_domain(t)?;
    let m = mesh_domain(&d, &cfg.resolution)?;
    let q = m.quality();
    write(&dir, "mesh.txt", &write_text(&m))?;
    write(&dir, "mesh.json", &m.to_json()?)?;
    write(&dir, "domain.json", &d.to_json()?)?;
    write_json(&dir, "quality.json", &q)?;
    println!(
        "{} vertices, {} triangles, min angle {:.2} deg, area {:.6} (domain {:.6})",
        q.n_vertices, q.n_triangles, q.min_angle_deg, q.total_area, d.area
    );
    if !q.meets_angle_threshold() {
        println!("warning: minimum angle below the quality threshold");
    }
    Ok(())
}

fn run_disk_selftest(radius: f64, epsilon: f64, common: &Common) -> Result<(), Failure> {
    let base = Resolution {
        eddy_radial: 8,
        eddy_angular: 32,
        refinements: 2,
        ..Resolution::default()
    };
    let mut cfg = RunConfig::new("disk-selftest", common);
    cfg.resolution = resolution_over(common, base);
    cfg.radius = Some(radius);
    cfg.epsilon = Some(epsilon);
    if !(radius > 0.0 && epsilon > 0.0) {
        return Err(Failure::Usage("radius and epsilon must be positive".into()));
    }
    let Some(dir) = begin(&cfg, common)? else {
        return Ok(());
    };
    let center = PhasePoint::new(0.0, 0.0);
    let d = DomainSpec::disk(center, radius, 256)?;
    let u = solve_mrt_with(&ZeroFlow, epsilon, &d, &cfg.resolution)?;
    let fem = u.interpolate(center).unwrap_or(f64::NAN);
    let exact = radius * radius / (4.0 * epsilon);
    let rel = (fem / exact - 1.0).abs();
    write_json(
        &dir,
        "summary.json",
        &json!({ "radius": radius, "epsilon": epsilon, "exact": exact, "fem": fem, "relative_error": rel }),
    )?;
    println!("u(center): FEM {fem:.6}, exact {exact:.6}, relative error {rel:.3e}");
    if rel < 0.01 {
        Ok(())
    } else {
        Err(Failure::Validation(format!("relative error {rel:.3e} is not below 1%")))
    }
}
