//! Eddy and unit-jet-core domains bounded by separatrix splines.
//!
//! Every boundary segment is stored with x increasing along the curve, so
//! each marker's boundary is a graph y(x) over the domain's x-range.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{JetParameters, PhasePoint, StreamFunction};
use crate::geometry::levelset::{trace_level_set, SeparatrixCurve, TraceEnd, TraceOptions};
use crate::geometry::stagnation::{find_stagnation_points, StagnationKind, StagnationPoint, Window};

/// Saddle levels differing by more than this get averaged with a warning.
const LEVEL_MISMATCH: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    /// Γ_upper
    Upper,
    /// Γ_lower
    Lower,
}

impl Marker {
    pub fn complement(self) -> Marker {
        match self {
            Marker::Upper => Marker::Lower,
            Marker::Lower => Marker::Upper,
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::Upper => "upper",
            Marker::Lower => "lower",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Eddy,
    JetCoreUnit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Trough,
    Crest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub marker: Marker,
    pub curve: SeparatrixCurve,
}

impl BoundarySegment {
    pub fn x_range(&self) -> (f64, f64) {
        (self.curve.spline.start().x, self.curve.spline.end().x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// `None` for synthetic test domains.
    pub beta: Option<f64>,
    pub segments: Vec<BoundarySegment>,
    pub area: f64,
    /// Interior reference point; the eddy's center stagnation point.
    pub center: PhasePoint,
    /// x-extent: tip to tip for an eddy, the window for a jet core.
    pub x_range: (f64, f64),
    /// Periodic length of a jet-core window.
    pub period: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct GeometryOptions {
    pub step: f64,
    pub tolerance: f64,
    pub max_points: usize,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            step: 1e-3,
            tolerance: 1e-10,
            max_points: 1_000_000,
        }
    }
}

impl DomainSpec {
    fn from_segments(
        kind: DomainKind,
        beta: Option<f64>,
        segments: Vec<BoundarySegment>,
        center: PhasePoint,
        period: Option<f64>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let x_min = segments
            .iter()
            .map(|s| s.x_range().0)
            .fold(f64::INFINITY, f64::min);
        let x_max = segments
            .iter()
            .map(|s| s.x_range().1)
            .fold(f64::NEG_INFINITY, f64::max);
        for s in &segments {
            let pts = &s.curve.points;
            if pts.windows(2).any(|w| w[1].x <= w[0].x) {
                return Err(Error::Geometry {
                    beta: beta.unwrap_or(f64::NAN),
                    reason: format!("{} boundary is not a graph over x", s.marker),
                });
            }
        }
        let mut spec = DomainSpec {
            kind,
            beta,
            segments,
            area: 0.0,
            center,
            x_range: (x_min, x_max),
            period,
            warnings,
        };
        spec.area = spec.boundary_area();
        if !(spec.area > 0.0) {
            return Err(Error::Geometry {
                beta: beta.unwrap_or(f64::NAN),
                reason: format!("nonpositive area {}", spec.area),
            });
        }
        Ok(spec)
    }

    /// Green's theorem over the boundary splines: ∫ y_upper dx − ∫ y_lower dx.
    fn boundary_area(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let integral = -s.curve.spline.x_dy_integral() + x_times_y_end(&s.curve);
                match s.marker {
                    Marker::Upper => integral,
                    Marker::Lower => -integral,
                }
            })
            .sum()
    }

    pub fn segments_of(&self, marker: Marker) -> impl Iterator<Item = &BoundarySegment> {
        self.segments.iter().filter(move |s| s.marker == marker)
    }

    /// Wraps x into the window for jet-core domains.
    pub fn wrap_x(&self, x: f64) -> f64 {
        match self.period {
            Some(period) => self.x_range.0 + (x - self.x_range.0).rem_euclid(period),
            None => x,
        }
    }

    /// Boundary ordinate of `marker` at abscissa `x`.
    pub fn boundary_y(&self, marker: Marker, x: f64) -> Option<f64> {
        let x = self.wrap_x(x);
        self.segments_of(marker)
            .find(|s| {
                let (a, b) = s.x_range();
                x >= a && x <= b
            })
            .and_then(|s| s.curve.spline.y_at_x(x))
    }

    /// (y_lower(x), y_upper(x)) or `None` outside the x-range.
    pub fn y_bounds(&self, x: f64) -> Option<(f64, f64)> {
        Some((
            self.boundary_y(Marker::Lower, x)?,
            self.boundary_y(Marker::Upper, x)?,
        ))
    }

    pub fn contains(&self, pt: PhasePoint) -> bool {
        match self.y_bounds(pt.x) {
            Some((lo, hi)) => pt.y > lo && pt.y < hi,
            None => false,
        }
    }

    /// Distance from `pt` to the nearest boundary segment, with that segment's index.
    pub fn nearest_segment(&self, pt: PhasePoint) -> (usize, f64, f64) {
        self.segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (t, d) = s.curve.spline.project(pt);
                (i, t, d)
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .unwrap()
    }

    pub fn translated(&self, dx: f64) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .map(|s| {
                Ok(BoundarySegment {
                    marker: s.marker,
                    curve: s.curve.translated(dx, 0.0)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DomainSpec::from_segments(
            self.kind,
            self.beta,
            segments,
            self.center.translate(dx, 0.0),
            self.period,
            self.warnings.clone(),
        )
    }

    /// Pure-geometry disk with Γ_upper the upper semicircle.
    pub fn disk(center: PhasePoint, radius: f64, points_per_half: usize) -> Result<Self> {
        DomainSpec::ellipse(center, radius, radius, points_per_half)
    }

    pub fn ellipse(center: PhasePoint, semi_x: f64, semi_y: f64, points_per_half: usize) -> Result<Self> {
        let n = points_per_half.max(4);
        let half = |sign: f64| -> Vec<PhasePoint> {
            (0..=n)
                .map(|i| {
                    let th = PI * (1.0 - i as f64 / n as f64);
                    PhasePoint::new(center.x + semi_x * th.cos(), center.y + sign * semi_y * th.sin())
                })
                .collect()
        };
        let mut lower = half(-1.0);
        let upper = half(1.0);
        // share the tip points bitwise
        lower[0] = upper[0];
        lower[n] = upper[n];
        let segments = vec![
            BoundarySegment {
                marker: Marker::Upper,
                curve: SeparatrixCurve::new(upper, f64::NAN, false)?,
            },
            BoundarySegment {
                marker: Marker::Lower,
                curve: SeparatrixCurve::new(lower, f64::NAN, false)?,
            },
        ];
        DomainSpec::from_segments(DomainKind::Eddy, None, segments, center, None, Vec::new())
    }

    /// Pure-geometry periodic strip [x0, x0 + width] × [y_lo, y_hi].
    pub fn strip(x0: f64, width: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let line = |y: f64| -> Result<SeparatrixCurve> {
            let n = 16;
            let pts = (0..=n)
                .map(|i| PhasePoint::new(x0 + width * i as f64 / n as f64, y))
                .collect();
            SeparatrixCurve::new(pts, f64::NAN, false)
        };
        let segments = vec![
            BoundarySegment {
                marker: Marker::Upper,
                curve: line(y_hi)?,
            },
            BoundarySegment {
                marker: Marker::Lower,
                curve: line(y_lo)?,
            },
        ];
        DomainSpec::from_segments(
            DomainKind::JetCoreUnit,
            None,
            segments,
            PhasePoint::new(x0 + 0.5 * width, 0.5 * (y_lo + y_hi)),
            Some(width),
            Vec::new(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Boundary term x·y evaluated between the curve ends, so that
/// ∫ y dx = [x y] − ∫ x dy.
fn x_times_y_end(curve: &SeparatrixCurve) -> f64 {
    let (a, b) = (curve.spline.start(), curve.spline.end());
    b.x * b.y - a.x * a.y
}

fn geometry_error(beta: f64, reason: impl Into<String>) -> Error {
    Error::Geometry {
        beta,
        reason: reason.into(),
    }
}

/// Ordinate on the vertical line x where Ψ crosses `level`, searched from
/// `y_start` in the direction `dir` (±1).
fn level_crossing_on_vertical(p: &JetParameters, level: f64, x: f64, y_start: f64, dir: f64) -> Option<f64> {
    let f = |y: f64| p.stream_function(PhasePoint::new(x, y)) - level;
    let f0 = f(y_start);
    let mut a = y_start;
    let step = 1e-3;
    let mut b = a;
    loop {
        b += dir * step;
        if (b - y_start).abs() > 3.0 {
            return None;
        }
        if f(b) * f0 <= 0.0 {
            break;
        }
        a = b;
    }
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-15 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Traces the level set through `seed` in both directions until it meets
/// `left` and `right`; returns the points with x increasing.
fn trace_between_saddles(
    p: &JetParameters,
    level: f64,
    seed: PhasePoint,
    left: PhasePoint,
    right: PhasePoint,
    opts: &GeometryOptions,
) -> Result<Vec<PhasePoint>> {
    let bounds = Window::new(left.x - 0.5, right.x + 0.5, -3.5, 3.5);
    let mut halves = Vec::with_capacity(2);
    for direction in [1.0, -1.0] {
        let trace_opts = TraceOptions {
            step: opts.step,
            tolerance: opts.tolerance,
            bounds: Some(bounds),
            max_points: opts.max_points,
            targets: vec![left, right],
            direction,
        };
        let tr = trace_level_set(p, level, seed, &trace_opts)?;
        match tr.end {
            TraceEnd::ReachedTarget(_) => halves.push(tr.points),
            other => {
                return Err(geometry_error(
                    p.beta,
                    format!("separatrix trace ended with {other:?} instead of a saddle"),
                ))
            }
        }
    }
    let forward = halves.pop().unwrap();
    let backward = halves.pop().unwrap();
    let mut pts: Vec<PhasePoint> = backward.into_iter().rev().collect();
    pts.extend(forward.into_iter().skip(1));
    if pts[0].x > pts[pts.len() - 1].x {
        pts.reverse();
    }
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if first != left || last != right {
        return Err(geometry_error(
            p.beta,
            "separatrix branch does not connect the two bounding saddles",
        ));
    }
    Ok(pts)
}

struct Skeleton {
    /// southern eddy centered on x = 0
    south_center: StagnationPoint,
    south_saddles: (StagnationPoint, StagnationPoint),
    /// northern eddy centered on x = π/k
    north_center: StagnationPoint,
    north_saddles: (StagnationPoint, StagnationPoint),
}

fn skeleton(p: &JetParameters) -> Result<Skeleton> {
    let period = p.period();
    let half = 0.5 * period;
    let window = Window::new(-half - 0.05, period + 0.05, -2.0, 2.0);
    let pts = find_stagnation_points(p, window).map_err(|e| e.context(format!("beta = {}", p.beta)))?;
    let pick = |kind: StagnationKind, x: f64, north: bool| -> Result<StagnationPoint> {
        pts.iter()
            .filter(|s| s.classification == kind && (s.location.y > 0.0) == north)
            .min_by(|a, b| (a.location.x - x).abs().total_cmp(&(b.location.x - x).abs()))
            .filter(|s| (s.location.x - x).abs() < 1e-6)
            .copied()
            .ok_or_else(|| {
                geometry_error(
                    p.beta,
                    format!(
                        "no {kind:?} found near x = {x} in the {} row",
                        if north { "northern" } else { "southern" }
                    ),
                )
            })
    };
    Ok(Skeleton {
        south_center: pick(StagnationKind::Center, 0.0, false)?,
        south_saddles: (
            pick(StagnationKind::Saddle, -half, false)?,
            pick(StagnationKind::Saddle, half, false)?,
        ),
        north_center: pick(StagnationKind::Center, half, true)?,
        north_saddles: (
            pick(StagnationKind::Saddle, 0.0, true)?,
            pick(StagnationKind::Saddle, period, true)?,
        ),
    })
}

fn separatrix_level(a: &StagnationPoint, b: &StagnationPoint, warnings: &mut Vec<String>) -> f64 {
    let (la, lb) = (a.stream_value, b.stream_value);
    if (la - lb).abs() > LEVEL_MISMATCH {
        warnings.push(format!(
            "saddle levels {la} and {lb} differ by {:e}; using their mean",
            (la - lb).abs()
        ));
    }
    0.5 * (la + lb)
}

/// One branch of an eddy boundary between its two saddles.
fn eddy_branch(
    p: &JetParameters,
    center: &StagnationPoint,
    saddles: &(StagnationPoint, StagnationPoint),
    level: f64,
    upward: bool,
    opts: &GeometryOptions,
) -> Result<Vec<PhasePoint>> {
    let dir = if upward { 1.0 } else { -1.0 };
    let x = center.location.x;
    let y = level_crossing_on_vertical(p, level, x, center.location.y, dir)
        .ok_or_else(|| geometry_error(p.beta, "no separatrix crossing above/below the eddy center"))?;
    trace_between_saddles(
        p,
        level,
        PhasePoint::new(x, y),
        saddles.0.location,
        saddles.1.location,
        opts,
    )
}

pub fn build_eddy_domain(p: &JetParameters) -> Result<DomainSpec> {
    build_eddy_domain_with(p, &GeometryOptions::default())
}

/// The southern-row eddy centered on x = 0. Γ_upper borders the jet core and
/// Γ_lower the exterior retrograde region.
pub fn build_eddy_domain_with(p: &JetParameters, opts: &GeometryOptions) -> Result<DomainSpec> {
    let sk = skeleton(p)?;
    let mut warnings = Vec::new();
    let level = separatrix_level(&sk.south_saddles.0, &sk.south_saddles.1, &mut warnings);
    let upper = eddy_branch(p, &sk.south_center, &sk.south_saddles, level, true, opts)?;
    let lower = eddy_branch(p, &sk.south_center, &sk.south_saddles, level, false, opts)?;
    let segments = vec![
        BoundarySegment {
            marker: Marker::Upper,
            curve: SeparatrixCurve::new(upper, level, false)?,
        },
        BoundarySegment {
            marker: Marker::Lower,
            curve: SeparatrixCurve::new(lower, level, false)?,
        },
    ];
    DomainSpec::from_segments(
        DomainKind::Eddy,
        Some(p.beta),
        segments,
        sk.south_center.location,
        None,
        warnings,
    )
}

pub fn build_jet_core_domain(p: &JetParameters, phase: Phase) -> Result<DomainSpec> {
    build_jet_core_domain_with(p, phase, &GeometryOptions::default())
}

/// One x-period of the jet core between the two separatrix chains. The trough
/// window is [0, 2π/k] (trough at π/k), the crest window [−π/k, π/k].
pub fn build_jet_core_domain_with(p: &JetParameters, phase: Phase, opts: &GeometryOptions) -> Result<DomainSpec> {
    let sk = skeleton(p)?;
    let period = p.period();
    let mut warnings = Vec::new();
    let south_level = separatrix_level(&sk.south_saddles.0, &sk.south_saddles.1, &mut warnings);
    let north_level = separatrix_level(&sk.north_saddles.0, &sk.north_saddles.1, &mut warnings);
    // lower chain: top of the southern eddies; upper chain: bottom of the northern ones
    let south = eddy_branch(p, &sk.south_center, &sk.south_saddles, south_level, true, opts)?;
    let north = eddy_branch(p, &sk.north_center, &sk.north_saddles, north_level, false, opts)?;

    let w0 = match phase {
        Phase::Trough => 0.0,
        Phase::Crest => -0.5 * period,
    };
    let w1 = w0 + period;
    let mut segments = Vec::new();
    for (marker, branch, level) in [
        (Marker::Upper, &north, north_level),
        (Marker::Lower, &south, south_level),
    ] {
        for piece in clip_periodic_chain(p, branch, level, w0, w1, opts.step)? {
            segments.push(BoundarySegment {
                marker,
                curve: SeparatrixCurve::new(piece, level, false)?,
            });
        }
    }
    let center_x = 0.5 * (w0 + w1);
    let mid = |m: Marker| -> Result<f64> {
        segments
            .iter()
            .filter(|s| s.marker == m)
            .find_map(|s| s.curve.spline.y_at_x(center_x))
            .ok_or_else(|| geometry_error(p.beta, "jet core boundary does not span its window"))
    };
    let center = PhasePoint::new(center_x, 0.5 * (mid(Marker::Lower)? + mid(Marker::Upper)?));
    DomainSpec::from_segments(
        DomainKind::JetCoreUnit,
        Some(p.beta),
        segments,
        center,
        Some(period),
        warnings,
    )
}

/// Periodically extends a saddle-to-saddle branch and cuts it to [w0, w1],
/// splitting at the saddles that fall inside the window.
fn clip_periodic_chain(
    p: &JetParameters,
    branch: &[PhasePoint],
    level: f64,
    w0: f64,
    w1: f64,
    step: f64,
) -> Result<Vec<Vec<PhasePoint>>> {
    let period = w1 - w0;
    let saddle_x = branch[0].x;
    let edge_tol = 1e-9;
    let gap = 1e-3 * step;

    let endpoint = |x: f64| -> Result<PhasePoint> {
        let offset = (x - saddle_x) / period;
        if (offset - offset.round()).abs() * period < edge_tol {
            return Ok(PhasePoint::new(x, branch[0].y));
        }
        // nearest traced point of the periodic extension, then a vertical solve
        let shift = ((x - saddle_x) / period).floor() * period;
        let local = x - shift;
        let i = branch.partition_point(|q| q.x < local).clamp(1, branch.len() - 1);
        let guess = branch[i - 1].lerp(branch[i], (local - branch[i - 1].x) / (branch[i].x - branch[i - 1].x));
        let mut y = guess.y;
        for _ in 0..50 {
            let pt = PhasePoint::new(x, y);
            let r = p.stream_function(pt) - level;
            let dy = p.gradient(pt)[1];
            if r.abs() < 1e-14 || dy == 0.0 {
                break;
            }
            y -= r / dy;
        }
        Ok(PhasePoint::new(x, y))
    };
    let start = endpoint(w0)?;
    let mut end = endpoint(w1)?;
    end.y = start.y;

    let mut chain = vec![start];
    let mut splits = Vec::new();
    let first_copy = ((w0 - saddle_x) / period).floor() as i64 - 1;
    let last_copy = ((w1 - saddle_x) / period).ceil() as i64 + 1;
    for m in first_copy..=last_copy {
        let shift = m as f64 * period;
        for (j, q) in branch.iter().enumerate() {
            let q = q.translate(shift, 0.0);
            if q.x <= w0 + gap || q.x >= w1 - gap {
                continue;
            }
            let is_saddle = j == 0 || j == branch.len() - 1;
            if is_saddle {
                if chain.last().is_some_and(|last| (last.x - q.x).abs() < gap) {
                    continue;
                }
                splits.push(chain.len());
            }
            chain.push(q);
        }
    }
    chain.push(end);
    if chain.windows(2).any(|w| w[1].x <= w[0].x) {
        return Err(geometry_error(p.beta, "periodic chain is not monotone in x"));
    }
    let mut pieces = Vec::new();
    let mut from = 0;
    for s in splits {
        pieces.push(chain[from..=s].to_vec());
        from = s;
    }
    pieces.push(chain[from..].to_vec());
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn third() -> JetParameters {
        JetParameters::with_beta(1.0 / 3.0).unwrap()
    }

    #[test]
    fn eddy_boundary_is_a_closed_level_set() {
        let p = third();
        let d = build_eddy_domain(&p).unwrap();
        assert_eq!(d.kind, DomainKind::Eddy);
        assert!(d.warnings.is_empty(), "{:?}", d.warnings);
        let up = d.segments_of(Marker::Upper).next().unwrap();
        let lo = d.segments_of(Marker::Lower).next().unwrap();
        assert!(up.curve.spline.start().distance(lo.curve.spline.start()) < 1e-8);
        assert!(up.curve.spline.end().distance(lo.curve.spline.end()) < 1e-8);
        for s in &d.segments {
            for q in &s.curve.points {
                assert!((p.stream_function(*q) - s.curve.level).abs() < 1e-8);
            }
            for w in s.curve.points.windows(2) {
                assert!(w[0].distance(w[1]) <= 1e-3 * (1.0 + 1e-9));
            }
        }
        assert!(d.area > 0.0);
        assert!(d.contains(d.center));
        // the eddy spans one period between its saddles
        assert!((d.x_range.1 - d.x_range.0 - p.period()).abs() < 1e-9);
    }

    #[test]
    fn eddy_is_mirror_symmetric_about_its_center() {
        let p = third();
        let d = build_eddy_domain(&p).unwrap();
        let xc = d.center.x;
        for m in [Marker::Upper, Marker::Lower] {
            for x in [0.1, 0.5, 1.0, 1.4] {
                let a = d.boundary_y(m, xc + x).unwrap();
                let b = d.boundary_y(m, xc - x).unwrap();
                assert!((a - b).abs() < 1e-8, "{m} {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn eddy_area_matches_monte_carlo_estimate() {
        use rand::{Rng, SeedableRng};
        let d = build_eddy_domain(&third()).unwrap();
        let (x0, x1) = d.x_range;
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &d.segments {
            for q in &s.curve.points {
                y0 = y0.min(q.y);
                y1 = y1.max(q.y);
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| {
                let pt = PhasePoint::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
                d.contains(pt)
            })
            .count();
        let estimate = hits as f64 / n as f64 * (x1 - x0) * (y1 - y0);
        assert!(((estimate - d.area) / d.area).abs() < 5e-3, "{estimate} vs {}", d.area);
    }

    #[test]
    fn arc_length_is_stable_under_step_halving() {
        let p = third();
        let coarse = build_eddy_domain(&p).unwrap();
        let fine = build_eddy_domain_with(&p, &GeometryOptions {
            step: 5e-4,
            ..GeometryOptions::default()
        })
        .unwrap();
        for m in [Marker::Upper, Marker::Lower] {
            let a = coarse.segments_of(m).next().unwrap().curve.spline.arc_length();
            let b = fine.segments_of(m).next().unwrap().curve.spline.arc_length();
            assert!(((a - b) / b).abs() < 1e-3);
        }
    }

    #[test]
    fn jet_core_spans_one_period() {
        let p = third();
        let d = build_jet_core_domain(&p, Phase::Trough).unwrap();
        assert_eq!(d.kind, DomainKind::JetCoreUnit);
        assert_eq!(d.x_range, (0.0, p.period()));
        assert_eq!(d.segments_of(Marker::Upper).count(), 1);
        assert_eq!(d.segments_of(Marker::Lower).count(), 2);
        for m in [Marker::Upper, Marker::Lower] {
            let a = d.boundary_y(m, 0.0).unwrap();
            let b = d.boundary_y(m, p.period() - 1e-12).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
        let mut min_gap = f64::INFINITY;
        for i in 0..=2000 {
            let x = p.period() * i as f64 / 2000.0;
            let (lo, hi) = d.y_bounds(x).unwrap();
            min_gap = min_gap.min(hi - lo);
        }
        assert!(min_gap > 0.5, "{min_gap}");
        for s in &d.segments {
            for q in &s.curve.points {
                assert!((p.stream_function(*q) - s.curve.level).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn crest_window_is_the_mirror_of_the_trough_window() {
        let p = third();
        let trough = build_jet_core_domain(&p, Phase::Trough).unwrap();
        let crest = build_jet_core_domain(&p, Phase::Crest).unwrap();
        assert!(((trough.area - crest.area) / trough.area).abs() < 1e-10);
        // (x, y) -> (x + π/k, -y) carries the trough window onto the crest
        // window (one period later) and swaps the two boundaries
        for i in 0..50 {
            let x = trough.x_range.0 + p.period() * (i as f64 + 0.3) / 50.0;
            let m = p.mirror(PhasePoint::new(x, 0.0));
            let (lo, hi) = trough.y_bounds(x).unwrap();
            let (clo, chi) = crest.y_bounds(m.x).unwrap();
            assert!((clo + hi).abs() < 1e-8 && (chi + lo).abs() < 1e-8);
        }
    }

    #[test]
    fn area_is_translation_invariant() {
        let d = build_jet_core_domain(&third(), Phase::Trough).unwrap();
        let shifted = d.translated(d.period.unwrap()).unwrap();
        assert!(((shifted.area - d.area) / d.area).abs() < 1e-10);
    }

    #[test]
    fn synthetic_domains() {
        let disk = DomainSpec::disk(PhasePoint::new(0.0, 0.0), 0.5, 64).unwrap();
        assert!((disk.area - PI * 0.25).abs() < 1e-4, "{}", disk.area);
        assert!(disk.contains(PhasePoint::new(0.1, 0.2)));
        assert!(!disk.contains(PhasePoint::new(0.4, 0.4)));
        let strip = DomainSpec::strip(0.0, 2.0, -0.5, 0.5).unwrap();
        assert!((strip.area - 2.0).abs() < 1e-14);
        assert!(strip.contains(PhasePoint::new(7.3, 0.0)));
    }

    #[test]
    fn json_round_trip() {
        let d = build_eddy_domain(&JetParameters::with_beta(0.5).unwrap()).unwrap();
        let back = DomainSpec::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
