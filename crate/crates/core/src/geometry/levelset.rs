//! Predictor-corrector marching along level sets of a stream function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{PhasePoint, StreamFunction};
use crate::geometry::spline::CubicSpline;
use crate::geometry::stagnation::Window;

const MIN_GRADIENT: f64 = 1e-10;
const CORRECTOR_MAX_ITER: usize = 30;
const MAX_TURN: f64 = 0.3;

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub step: f64,
    pub tolerance: f64,
    pub bounds: Option<Window>,
    pub max_points: usize,
    /// Points (usually saddles) that end the trace when the march reaches them.
    pub targets: Vec<PhasePoint>,
    /// +1 marches along (−Ψ_y, Ψ_x), −1 against it.
    pub direction: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            step: 1e-3,
            tolerance: 1e-10,
            bounds: None,
            max_points: 1_000_000,
            targets: Vec::new(),
            direction: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEnd {
    /// Returned to the start; the start point is not repeated.
    Closed,
    LeftBounds,
    /// Index into `TraceOptions::targets`; the target is the last point.
    ReachedTarget(usize),
    /// The gradient vanished: a stagnation point was hit.
    SaddleHit(PhasePoint),
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub points: Vec<PhasePoint>,
    pub level: f64,
    pub end: TraceEnd,
}

/// A traced level set with its interpolating spline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixCurve {
    pub points: Vec<PhasePoint>,
    pub spline: CubicSpline,
    pub level: f64,
}

impl SeparatrixCurve {
    pub fn new(points: Vec<PhasePoint>, level: f64, closed: bool) -> Result<Self> {
        let spline = CubicSpline::fit(&points, closed)?;
        Ok(SeparatrixCurve {
            points,
            spline,
            level,
        })
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        let pts = self.points.iter().map(|p| p.translate(dx, dy)).collect();
        SeparatrixCurve::new(pts, self.level, self.spline.is_closed())
    }

    pub fn polyline_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Newton projection of `pt` onto Ψ = `level` along ∇Ψ.
pub fn project_to_level<S: StreamFunction + ?Sized>(
    psi: &S,
    level: f64,
    pt: PhasePoint,
    tolerance: f64,
) -> Option<PhasePoint> {
    let mut q = pt;
    for _ in 0..CORRECTOR_MAX_ITER {
        let r = psi.value(q) - level;
        if r.abs() <= tolerance {
            return Some(q);
        }
        let [gx, gy] = psi.gradient(q);
        let g2 = gx * gx + gy * gy;
        if g2 < MIN_GRADIENT * MIN_GRADIENT {
            return None;
        }
        q = PhasePoint::new(q.x - r * gx / g2, q.y - r * gy / g2);
    }
    let r = psi.value(q) - level;
    (r.abs() <= 10.0 * tolerance).then_some(q)
}

fn unit_tangent(g: [f64; 2], direction: f64) -> [f64; 2] {
    let n = g[0].hypot(g[1]);
    [-direction * g[1] / n, direction * g[0] / n]
}

fn segment_distance(p: PhasePoint, a: PhasePoint, b: PhasePoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(PhasePoint::new(a.x + s * dx, a.y + s * dy))
}

/// Marches along the level set through `seed` until it closes, leaves the
/// bounds, reaches a target, or runs into a stagnation point.
pub fn trace_level_set<S: StreamFunction + ?Sized>(
    psi: &S,
    level: f64,
    seed: PhasePoint,
    opts: &TraceOptions,
) -> Result<Trace> {
    let start = project_to_level(psi, level, seed, opts.tolerance).ok_or_else(|| {
        Error::DegenerateInput(format!(
            "seed ({}, {}) cannot be projected onto level {level}",
            seed.x, seed.y
        ))
    })?;
    if (psi.value(start) - level).abs() > 1e-6 {
        return Err(Error::DegenerateInput("seed projection failed".into()));
    }
    let step = opts.step;
    let mut points = vec![start];
    let mut travelled = 0.0;
    loop {
        let p = *points.last().unwrap();
        let g = psi.gradient(p);
        if g[0].hypot(g[1]) < MIN_GRADIENT {
            return Ok(Trace {
                points,
                level,
                end: TraceEnd::SaddleHit(p),
            });
        }
        let tangent = unit_tangent(g, opts.direction);
        let mut h = step;
        let q = loop {
            let predicted = PhasePoint::new(p.x + h * tangent[0], p.y + h * tangent[1]);
            let accepted = project_to_level(psi, level, predicted, opts.tolerance).filter(|q| {
                let gq = psi.gradient(*q);
                if gq[0].hypot(gq[1]) < MIN_GRADIENT {
                    return true;
                }
                let tq = unit_tangent(gq, opts.direction);
                let turn = (tangent[0] * tq[0] + tangent[1] * tq[1]).clamp(-1.0, 1.0).acos();
                let d = q.distance(p);
                turn < MAX_TURN && d <= step * (1.0 + 1e-9) && d > 0.25 * h
            });
            match accepted {
                Some(q) => break q,
                None if h > step * 1e-6 => h *= 0.5,
                None => {
                    return Ok(Trace {
                        points,
                        level,
                        end: TraceEnd::SaddleHit(p),
                    })
                }
            }
        };

        for (i, target) in opts.targets.iter().enumerate() {
            let near = segment_distance(*target, p, q) < 0.5 * step || target.distance(q) < step;
            if near && target.distance(start) > step {
                if target.distance(p) > step {
                    points.push(q);
                }
                if target.distance(*points.last().unwrap()) > 1e-12 {
                    points.push(*target);
                }
                return Ok(Trace {
                    points,
                    level,
                    end: TraceEnd::ReachedTarget(i),
                });
            }
        }
        travelled += q.distance(p);
        if points.len() > 3 && travelled > 4.0 * step && segment_distance(start, p, q) < 0.5 * step {
            return Ok(Trace {
                points,
                level,
                end: TraceEnd::Closed,
            });
        }
        if let Some(bounds) = &opts.bounds {
            if !bounds.contains(q, 0.0) {
                points.push(q);
                return Ok(Trace {
                    points,
                    level,
                    end: TraceEnd::LeftBounds,
                });
            }
        }
        points.push(q);
        if points.len() >= opts.max_points {
            return Err(Error::TracingBudget {
                max_points: opts.max_points,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Bowl;

    impl StreamFunction for Bowl {
        fn value(&self, pt: PhasePoint) -> f64 {
            pt.x * pt.x + pt.y * pt.y
        }
        fn gradient(&self, pt: PhasePoint) -> [f64; 2] {
            [2.0 * pt.x, 2.0 * pt.y]
        }
    }

    #[test]
    fn unit_circle_closes() {
        let opts = TraceOptions {
            step: 1e-2,
            ..TraceOptions::default()
        };
        let tr = trace_level_set(&Bowl, 1.0, PhasePoint::new(1.05, 0.01), &opts).unwrap();
        assert_eq!(tr.end, TraceEnd::Closed);
        for p in &tr.points {
            assert!((p.x.hypot(p.y) - 1.0).abs() < 1e-8);
        }
        for w in tr.points.windows(2) {
            assert!(w[0].distance(w[1]) <= 1e-2 * (1.0 + 1e-9));
        }
        let n = tr.points.len();
        assert!((n as f64 - 2.0 * std::f64::consts::PI / 1e-2).abs() < 3.0, "{n}");
        let curve = SeparatrixCurve::new(tr.points, 1.0, true).unwrap();
        assert!((curve.spline.arc_length() - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn stops_at_target_and_bounds() {
        let opts = TraceOptions {
            step: 1e-2,
            targets: vec![PhasePoint::new(0.0, 1.0)],
            ..TraceOptions::default()
        };
        let tr = trace_level_set(&Bowl, 1.0, PhasePoint::new(1.0, 0.0), &opts).unwrap();
        assert_eq!(tr.end, TraceEnd::ReachedTarget(0));
        assert_eq!(*tr.points.last().unwrap(), PhasePoint::new(0.0, 1.0));

        let opts = TraceOptions {
            step: 1e-2,
            bounds: Some(Window::new(0.0, 2.0, -2.0, 2.0)),
            direction: -1.0,
            ..TraceOptions::default()
        };
        let tr = trace_level_set(&Bowl, 1.0, PhasePoint::new(1.0, 0.0), &opts).unwrap();
        assert_eq!(tr.end, TraceEnd::LeftBounds);
        assert!(tr.points.last().unwrap().y < 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let opts = TraceOptions {
            step: 1e-2,
            max_points: 50,
            ..TraceOptions::default()
        };
        assert!(matches!(
            trace_level_set(&Bowl, 1.0, PhasePoint::new(1.0, 0.0), &opts),
            Err(Error::TracingBudget { max_points: 50 })
        ));
    }

    #[test]
    fn saddle_is_reported() {
        struct Saddle;
        impl StreamFunction for Saddle {
            fn value(&self, pt: PhasePoint) -> f64 {
                pt.x * pt.y
            }
            fn gradient(&self, pt: PhasePoint) -> [f64; 2] {
                [pt.y, pt.x]
            }
        }
        // level 0 runs straight into the origin along the x axis
        let tr = trace_level_set(&Saddle, 0.0, PhasePoint::new(1.0, 0.0), &TraceOptions {
            step: 0.1,
            direction: 1.0,
            ..TraceOptions::default()
        })
        .unwrap();
        let tr2 = trace_level_set(&Saddle, 0.0, PhasePoint::new(1.0, 0.0), &TraceOptions {
            step: 0.1,
            direction: -1.0,
            bounds: Some(Window::new(-3.0, 3.0, -3.0, 3.0)),
            ..TraceOptions::default()
        })
        .unwrap();
        let ends = [tr.end, tr2.end];
        assert!(ends.iter().any(|e| matches!(e, TraceEnd::SaddleHit(p) if p.x.abs() < 1e-6)));
    }
}
