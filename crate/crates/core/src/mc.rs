//! Euler–Maruyama first-exit simulation, independent of the finite elements.
//!
//! Exits are detected on the boundary splines themselves: the domain is the
//! region between the lower and upper boundary graphs. A step that leaves
//! the region exits at the linearly interpolated crossing time. A step that
//! stays inside still exits with the Brownian-bridge probability
//! exp(-2·d0·d1 / (2·D·dt)), where d0 and d1 are the normal distances of its
//! ends from a boundary graph. Without that test, excursions between steps
//! go unseen and exit times carry an O(√dt) bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{JetParameters, PhasePoint, VelocityField};
use crate::geometry::{DomainSpec, Marker};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Paths still inside at this time are censored.
    pub max_time: f64,
    pub allow_censored: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            dt: 1e-3,
            n_paths: 10_000,
            seed: 0,
            max_time: 1e4,
            allow_censored: false,
        }
    }
}

impl McConfig {
    /// Sets the time cap to twenty times a predicted mean residence time.
    /// Pass the field maximum: paths started near the boundary can wander
    /// inward. The exit-time tail is roughly exponential with that mean, so
    /// ten times would still censor about one path in 20 000.
    pub fn with_predicted_mrt(mut self, mrt: f64) -> Self {
        self.max_time = 20.0 * mrt.max(self.dt);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitStatistics {
    pub start: PhasePoint,
    pub n_paths: usize,
    pub exits_upper: usize,
    pub exits_lower: usize,
    pub censored: usize,
    /// Over exited paths.
    pub mean_exit_time: f64,
    pub std_err_time: f64,
    pub p_upper: f64,
    pub p_lower: f64,
    pub std_err_upper: f64,
    pub std_err_lower: f64,
    pub rng_seed: u64,
    pub dt: f64,
    pub diffusion: f64,
    pub max_time: f64,
}

impl ExitStatistics {
    pub fn exit_count(&self, m: Marker) -> usize {
        match m {
            Marker::Upper => self.exits_upper,
            Marker::Lower => self.exits_lower,
        }
    }

    pub fn probability(&self, m: Marker) -> (f64, f64) {
        match m {
            Marker::Upper => (self.p_upper, self.std_err_upper),
            Marker::Lower => (self.p_lower, self.std_err_lower),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PathEnd {
    Exit(Marker, f64),
    Censored,
}

const BINS: usize = 2048;
const SAMPLES: usize = 16;
/// Steps ending farther than this many noise amplitudes from the boundary
/// skip the bridge test; with both ends that far out the crossing
/// probability is below e^-50.
const BRIDGE_MARGIN: f64 = 5.0;

/// Graph description of the domain with a conservative per-bin interior box.
struct Region<'a> {
    d: &'a DomainSpec,
    x0: f64,
    width: f64,
    /// (max of the lower graph, min of the upper graph) over each bin, padded.
    boxes: Vec<Option<(f64, f64)>>,
}

impl<'a> Region<'a> {
    fn new(d: &'a DomainSpec) -> Self {
        let (x0, x1) = d.x_range;
        let width = x1 - x0;
        let boxes = (0..BINS)
            .map(|b| {
                let mut lo_max = f64::NEG_INFINITY;
                let mut up_min = f64::INFINITY;
                let mut jump: f64 = 0.0;
                let mut prev: Option<(f64, f64)> = None;
                for j in 0..=SAMPLES {
                    let x = x0 + width * (b as f64 + j as f64 / SAMPLES as f64) / BINS as f64;
                    let (lo, up) = d.y_bounds(x.clamp(x0, x1))?;
                    lo_max = lo_max.max(lo);
                    up_min = up_min.min(up);
                    if let Some((pl, pu)) = prev {
                        jump = jump.max((lo - pl).abs()).max((up - pu).abs());
                    }
                    prev = Some((lo, up));
                }
                let pad = jump + 1e-9;
                (lo_max + pad < up_min - pad).then_some((lo_max + pad, up_min - pad))
            })
            .collect();
        Region { d, x0, width, boxes }
    }

    fn wrap(&self, x: f64) -> f64 {
        self.d.wrap_x(x)
    }

    /// True when the point is certainly at least `margin` inside without
    /// touching the splines.
    #[inline]
    fn surely_inside(&self, x: f64, y: f64, margin: f64) -> bool {
        let s = (x - self.x0) / self.width;
        if !(0.0..1.0).contains(&s) {
            return false;
        }
        match self.boxes[(s * BINS as f64) as usize] {
            Some((lo, up)) => y > lo + margin && y < up - margin,
            None => false,
        }
    }

    /// Distances to the lower and upper graphs along their local normals.
    /// `None` beyond an eddy tip.
    fn normal_gaps(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (lo, up) = self.d.y_bounds(x)?;
        let h = 1e-6 * self.width;
        let stretch = |m: Marker| match (self.d.boundary_y(m, x - h), self.d.boundary_y(m, x + h)) {
            (Some(a), Some(b)) => ((b - a) / (2.0 * h)).hypot(1.0),
            _ => 1.0,
        };
        Some(((y - lo) / stretch(Marker::Lower), (up - y) / stretch(Marker::Upper)))
    }

    /// Signed clearance from the boundary graphs: positive inside. Returns
    /// the marker of the nearer graph.
    fn clearance(&self, x: f64, y: f64) -> (f64, Marker) {
        match self.d.y_bounds(x) {
            Some((lo, up)) => {
                let (a, b) = (y - lo, up - y);
                if a < b {
                    (a, Marker::Lower)
                } else {
                    (b, Marker::Upper)
                }
            }
            None => {
                // beyond an eddy tip
                let (seg, _, dist) = self.d.nearest_segment(PhasePoint::new(x, y));
                (-dist, self.d.segments[seg].marker)
            }
        }
    }
}

fn run_path<V: VelocityField + ?Sized>(
    velocity: &V,
    noise: f64,
    region: &Region,
    start: PhasePoint,
    cfg: &McConfig,
    path: u64,
) -> PathEnd {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path);
    let (mut x, mut y) = (start.x, start.y);
    let mut t = 0.0;
    let steps = (cfg.max_time / cfg.dt).ceil() as u64;
    for _ in 0..steps {
        let v = velocity.velocity(PhasePoint::new(x, y));
        let xi1: f64 = StandardNormal.sample(&mut rng);
        let xi2: f64 = StandardNormal.sample(&mut rng);
        let x1 = region.wrap(x + v.u * cfg.dt + noise * xi1);
        let y1 = y + v.v * cfg.dt + noise * xi2;
        if !region.surely_inside(x1, y1, BRIDGE_MARGIN * noise) {
            let (g1, marker) = region.clearance(x1, y1);
            if g1 <= 0.0 {
                let (g0, _) = region.clearance(x, y);
                let frac = if g0 > 0.0 { g0 / (g0 - g1) } else { 0.0 };
                return PathEnd::Exit(marker, t + frac * cfg.dt);
            }
            // Both ends are inside; the continuous path may still have
            // touched a boundary in between.
            if let (Some((a0, b0)), Some((a1, b1))) = (region.normal_gaps(x, y), region.normal_gaps(x1, y1)) {
                let var = noise * noise;
                let hit = |g0: f64, g1: f64, rng: &mut ChaCha8Rng| {
                    let u: f64 = rng.gen();
                    u < (-2.0 * g0 * g1 / var).exp()
                };
                if hit(b0, b1, &mut rng) {
                    return PathEnd::Exit(Marker::Upper, t + 0.5 * cfg.dt);
                }
                if hit(a0, a1, &mut rng) {
                    return PathEnd::Exit(Marker::Lower, t + 0.5 * cfg.dt);
                }
            }
        }
        x = x1;
        y = y1;
        t += cfg.dt;
    }
    PathEnd::Censored
}

/// First-exit statistics for an arbitrary drift. The noise amplitude
/// sqrt(2·diffusion·dt) makes the generator diffusion·Δ + a·∇.
pub fn simulate_first_exit_with<V: VelocityField + ?Sized>(
    velocity: &V,
    diffusion: f64,
    d: &DomainSpec,
    start: PhasePoint,
    cfg: &McConfig,
) -> Result<ExitStatistics> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::ParameterDomain {
            field: "dt",
            value: cfg.dt,
            expected: "dt > 0",
        });
    }
    if cfg.n_paths == 0 {
        return Err(Error::ParameterDomain {
            field: "n_paths",
            value: 0.0,
            expected: "n_paths >= 1",
        });
    }
    if !(diffusion > 0.0) {
        return Err(Error::ParameterDomain {
            field: "diffusion",
            value: diffusion,
            expected: "diffusion > 0",
        });
    }
    let region = Region::new(d);
    let start = PhasePoint::new(region.wrap(start.x), start.y);
    if region.clearance(start.x, start.y).0 <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "start ({}, {}) is not inside the domain",
            start.x, start.y
        )));
    }
    let noise = (2.0 * diffusion * cfg.dt).sqrt();
    let ends: Vec<PathEnd> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(velocity, noise, &region, start, cfg, i))
        .collect();
    let (mut up, mut lo, mut censored) = (0usize, 0usize, 0usize);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for e in &ends {
        match *e {
            PathEnd::Exit(m, t) => {
                match m {
                    Marker::Upper => up += 1,
                    Marker::Lower => lo += 1,
                }
                sum += t;
                sum_sq += t * t;
            }
            PathEnd::Censored => censored += 1,
        }
    }
    if censored > 0 && !cfg.allow_censored {
        return Err(Error::Censored {
            censored,
            n_paths: cfg.n_paths,
            max_time: cfg.max_time,
        });
    }
    let exited = (up + lo) as f64;
    let n = cfg.n_paths as f64;
    let mean = if exited > 0.0 { sum / exited } else { f64::NAN };
    let var = if exited > 1.0 {
        ((sum_sq - exited * mean * mean) / (exited - 1.0)).max(0.0)
    } else {
        f64::NAN
    };
    let (pu, pl) = (up as f64 / n, lo as f64 / n);
    Ok(ExitStatistics {
        start,
        n_paths: cfg.n_paths,
        exits_upper: up,
        exits_lower: lo,
        censored,
        mean_exit_time: mean,
        std_err_time: (var / exited).sqrt(),
        p_upper: pu,
        p_lower: pl,
        std_err_upper: (pu * (1.0 - pu) / n).sqrt(),
        std_err_lower: (pl * (1.0 - pl) / n).sqrt(),
        rng_seed: cfg.seed,
        dt: cfg.dt,
        diffusion,
        max_time: cfg.max_time,
    })
}

/// First-exit statistics for the jet drift with diffusion ε.
pub fn simulate_first_exit(
    p: &JetParameters,
    d: &DomainSpec,
    start: PhasePoint,
    cfg: &McConfig,
) -> Result<ExitStatistics> {
    simulate_first_exit_with(p, p.epsilon, d, start, cfg)
}

/// Ten interior probe points: a 3×3 lattice at 25/50/75% of the x-range
/// and 20/50/80% of the local height, plus one point near the left end.
pub fn probe_points(d: &DomainSpec) -> Vec<PhasePoint> {
    let (x0, x1) = d.x_range;
    let mut fractions: Vec<(f64, f64)> = Vec::with_capacity(10);
    for fx in [0.25, 0.5, 0.75] {
        for fy in [0.2, 0.5, 0.8] {
            fractions.push((fx, fy));
        }
    }
    fractions.push((0.1, 0.5));
    fractions
        .into_iter()
        .filter_map(|(fx, fy)| {
            let x = x0 + fx * (x1 - x0);
            let (lo, up) = d.y_bounds(x)?;
            Some(PhasePoint::new(x, lo + fy * (up - lo)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtRow {
    pub dt: f64,
    pub stats: ExitStatistics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtStudy {
    pub rows: Vec<DtRow>,
    /// Largest dt whose estimates agree with the next smaller dt within the
    /// combined 2σ statistical error.
    pub converged_dt: Option<f64>,
}

fn agree(a: &ExitStatistics, b: &ExitStatistics) -> bool {
    let z = |x: f64, sx: f64, y: f64, sy: f64| (x - y).abs() <= 2.0 * sx.hypot(sy) + 1e-15;
    z(a.p_upper, a.std_err_upper, b.p_upper, b.std_err_upper)
        && z(a.mean_exit_time, a.std_err_time, b.mean_exit_time, b.std_err_time)
}

/// Runs the simulation for each dt (decreasing) with the same seed.
pub fn dt_convergence_study_with<V: VelocityField + ?Sized>(
    velocity: &V,
    diffusion: f64,
    d: &DomainSpec,
    start: PhasePoint,
    dts: &[f64],
    cfg: &McConfig,
) -> Result<DtStudy> {
    if dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::DegenerateInput("dts must be strictly decreasing".into()));
    }
    let rows = dts
        .iter()
        .map(|&dt| {
            let c = McConfig { dt, ..cfg.clone() };
            simulate_first_exit_with(velocity, diffusion, d, start, &c).map(|stats| DtRow { dt, stats })
        })
        .collect::<Result<Vec<_>>>()?;
    let converged_dt = rows
        .windows(2)
        .find(|w| agree(&w[0].stats, &w[1].stats))
        .map(|w| w[0].dt);
    Ok(DtStudy { rows, converged_dt })
}

pub fn dt_convergence_study(
    p: &JetParameters,
    d: &DomainSpec,
    start: PhasePoint,
    dts: &[f64],
    cfg: &McConfig,
) -> Result<DtStudy> {
    dt_convergence_study_with(p, p.epsilon, d, start, dts, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowfield::ZeroFlow;
    use crate::geometry::{build_jet_core_domain, Phase};

    #[test]
    fn symmetric_strip_splits_evenly() {
        let d = DomainSpec::strip(0.0, 1.0, -0.05, 0.05).unwrap();
        let cfg = McConfig {
            n_paths: 4000,
            dt: 1e-3,
            seed: 7,
            ..McConfig::default()
        };
        let s = simulate_first_exit_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(0.5, 0.0), &cfg).unwrap();
        assert_eq!(s.exits_upper + s.exits_lower, 4000);
        assert!((s.p_upper - 0.5).abs() < 3.0 * s.std_err_upper, "{}", s.p_upper);
    }

    #[test]
    fn disk_mean_exit_time_matches_analytic_value() {
        // R²/(4D) with R = 0.1, D = 1e-3
        let d = DomainSpec::disk(PhasePoint::new(0.0, 0.0), 0.1, 128).unwrap();
        let cfg = McConfig {
            n_paths: 8000,
            dt: 1e-3,
            seed: 3,
            ..McConfig::default()
        };
        let s = simulate_first_exit_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(0.0, 0.0), &cfg).unwrap();
        assert!(
            (s.mean_exit_time - 2.5).abs() < 3.0 * s.std_err_time,
            "{} ± {}",
            s.mean_exit_time,
            s.std_err_time
        );
    }

    #[test]
    fn identical_inputs_give_identical_statistics() {
        let d = DomainSpec::disk(PhasePoint::new(0.0, 0.0), 0.05, 64).unwrap();
        let cfg = McConfig {
            n_paths: 300,
            seed: 11,
            ..McConfig::default()
        };
        let a = simulate_first_exit_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(0.01, 0.0), &cfg).unwrap();
        let b = simulate_first_exit_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(0.01, 0.0), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ExitStatistics::from_json(&a.to_json().unwrap()).unwrap(), a);
        let c = simulate_first_exit_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(0.01, 0.0), &McConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.mean_exit_time, c.mean_exit_time);
    }

    #[test]
    fn censoring_is_an_error_unless_allowed() {
        let d = DomainSpec::disk(PhasePoint::new(0.0, 0.0), 0.5, 64).unwrap();
        let cfg = McConfig {
            n_paths: 20,
            max_time: 0.01,
            ..McConfig::default()
        };
        let start = PhasePoint::new(0.0, 0.0);
        assert!(matches!(
            simulate_first_exit_with(&ZeroFlow, 1e-3, &d, start, &cfg),
            Err(Error::Censored { censored: 20, .. })
        ));
        let ok = simulate_first_exit_with(&ZeroFlow, 1e-3, &d, start, &McConfig { allow_censored: true, ..cfg }).unwrap();
        assert_eq!(ok.censored, 20);
    }

    #[test]
    fn jet_core_paths_wrap_and_exit_through_markers_only() {
        let p = JetParameters::with_beta(1.0 / 3.0).unwrap();
        let d = build_jet_core_domain(&p, Phase::Trough).unwrap();
        // start near the lower boundary so paths exit quickly
        let x = d.center.x;
        let (lo, _) = d.y_bounds(x).unwrap();
        let cfg = McConfig {
            n_paths: 200,
            dt: 2e-3,
            seed: 5,
            allow_censored: false,
            max_time: 1e4,
        };
        let s = simulate_first_exit(&p, &d, PhasePoint::new(x, lo + 0.02), &cfg).unwrap();
        assert_eq!(s.exits_upper + s.exits_lower, 200);
        assert!(s.exits_lower > s.exits_upper);
    }

    #[test]
    fn outside_start_and_bad_dts_are_rejected() {
        let d = DomainSpec::disk(PhasePoint::new(0.0, 0.0), 0.1, 64).unwrap();
        assert!(simulate_first_exit_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(1.0, 0.0), &McConfig::default()).is_err());
        assert!(dt_convergence_study_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(0.0, 0.0), &[1e-3, 2e-3], &McConfig::default()).is_err());
    }

    #[test]
    fn probes_lie_inside() {
        let p = JetParameters::with_beta(1.0 / 3.0).unwrap();
        let d = crate::geometry::build_eddy_domain(&p).unwrap();
        let probes = probe_points(&d);
        assert_eq!(probes.len(), 10);
        assert!(probes.iter().all(|&q| d.contains(q)));
    }

    #[test]
    fn dt_study_has_one_row_per_dt() {
        let d = DomainSpec::disk(PhasePoint::new(0.0, 0.0), 0.05, 64).unwrap();
        let cfg = McConfig {
            n_paths: 400,
            ..McConfig::default()
        };
        let s = dt_convergence_study_with(&ZeroFlow, 1e-3, &d, PhasePoint::new(0.0, 0.0), &[4e-3, 2e-3, 1e-3], &cfg).unwrap();
        assert_eq!(s.rows.len(), 3);
    }
}
