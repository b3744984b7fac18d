//! Zeros of the drift field and their classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{JetParameters, PhasePoint};

const NEWTON_MAX_ITER: usize = 50;
const DEDUP_DISTANCE: f64 = 1e-6;
const ROOT_TOLERANCE: f64 = 1e-13;
const SINGULAR_DET: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StagnationKind {
    Saddle,
    Center,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagnationPoint {
    pub location: PhasePoint,
    pub stream_value: f64,
    pub classification: StagnationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Window {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// [0, 2π/k] × [−2, 2]
    pub fn one_period(p: &JetParameters) -> Self {
        Window::new(0.0, p.period(), -2.0, 2.0)
    }

    pub fn contains(&self, pt: PhasePoint, slack: f64) -> bool {
        pt.x >= self.x_min - slack
            && pt.x <= self.x_max + slack
            && pt.y >= self.y_min - slack
            && pt.y <= self.y_max + slack
    }
}

/// Newton iteration on (u, v) = 0 from `seed`. `Ok(None)` when it does not converge.
fn polish(p: &JetParameters, seed: PhasePoint) -> Result<Option<PhasePoint>> {
    let mut pt = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let vel = p.velocity(pt);
        let j = p.velocity_jacobian(pt);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if vel.norm() < ROOT_TOLERANCE {
            if det.abs() < SINGULAR_DET {
                return Err(Error::DegeneratePoint { location: pt });
            }
            return Ok(Some(pt));
        }
        if det.abs() < SINGULAR_DET || !det.is_finite() {
            return Ok(None);
        }
        let dx = (j[1][1] * vel.u - j[0][1] * vel.v) / det;
        let dy = (-j[1][0] * vel.u + j[0][0] * vel.v) / det;
        pt = PhasePoint::new(pt.x - dx, pt.y - dy);
        if !pt.x.is_finite() || !pt.y.is_finite() || pt.y.abs() > 50.0 {
            return Ok(None);
        }
        if dx.hypot(dy) < 1e-15 * (1.0 + pt.x.abs() + pt.y.abs()) {
            let vel = p.velocity(pt);
            if vel.norm() < 1e-11 {
                return Ok(Some(pt));
            }
        }
    }
    Ok(None)
}

pub fn classify(p: &JetParameters, location: PhasePoint) -> StagnationPoint {
    let j = p.velocity_jacobian(location);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    StagnationPoint {
        location,
        stream_value: p.stream_function(location),
        classification: if det < 0.0 {
            StagnationKind::Saddle
        } else {
            StagnationKind::Center
        },
    }
}

/// Seeds a grid of Newton iterations over `window` and returns the distinct
/// zeros of the velocity field found inside it, sorted by (x, y).
pub fn find_stagnation_points(p: &JetParameters, window: Window) -> Result<Vec<StagnationPoint>> {
    if !(window.x_max > window.x_min && window.y_max > window.y_min) {
        return Err(Error::ParameterDomain {
            field: "window",
            value: (window.x_max - window.x_min) * (window.y_max - window.y_min),
            expected: "positive area",
        });
    }
    const NX: usize = 24;
    const NY: usize = 24;
    let mut found: Vec<PhasePoint> = Vec::new();
    for i in 0..NX {
        for j in 0..NY {
            let seed = PhasePoint::new(
                window.x_min + (i as f64 + 0.5) * (window.x_max - window.x_min) / NX as f64,
                window.y_min + (j as f64 + 0.5) * (window.y_max - window.y_min) / NY as f64,
            );
            let Some(root) = polish(p, seed)? else {
                continue;
            };
            if !window.contains(root, 1e-9) {
                continue;
            }
            if found.iter().all(|q| q.distance(root) > DEDUP_DISTANCE) {
                found.push(root);
            }
        }
    }
    // candidates on the symmetry axes sin(kx) = 0 are solved in one unknown,
    // which catches roots whose Newton basins fall between grid seeds
    let half = 0.5 * p.period();
    let first = (window.x_min / half).ceil() as i64;
    let last = (window.x_max / half).floor() as i64;
    for m in first..=last {
        let x = m as f64 * half;
        for y0 in [-1.5, -0.9, -0.5, 0.5, 0.9, 1.5] {
            if let Some(root) = polish(p, PhasePoint::new(x, y0))? {
                if window.contains(root, 1e-9) && found.iter().all(|q| q.distance(root) > DEDUP_DISTANCE) {
                    found.push(root);
                }
            }
        }
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    Ok(found.into_iter().map(|pt| classify(p, pt)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let mut fa = f(a);
        assert!(fa * f(b) < 0.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn topology_at_one_third() {
        let p = JetParameters::with_beta(1.0 / 3.0).unwrap();
        let pts = find_stagnation_points(&p, Window::one_period(&p)).unwrap();
        // x = 0 and x = 2π/k are the same column, both in the window
        let saddles: Vec<_> = pts
            .iter()
            .filter(|s| s.classification == StagnationKind::Saddle)
            .collect();
        let centers: Vec<_> = pts
            .iter()
            .filter(|s| s.classification == StagnationKind::Center)
            .collect();
        assert_eq!(saddles.len(), 3, "{pts:?}");
        assert_eq!(centers.len(), 3, "{pts:?}");
        let half = 0.5 * p.period();
        for s in &pts {
            assert!(p.velocity(s.location).norm() < 1e-10);
            let on_axis = [0.0, half, 2.0 * half]
                .iter()
                .any(|x| (s.location.x - x).abs() < 1e-9);
            assert!(on_axis);
        }
        // northern saddles sit at x = 0 mod period, southern saddle at π/k
        for s in &saddles {
            if s.location.y > 0.0 {
                assert!(s.location.x.abs() < 1e-9 || (s.location.x - p.period()).abs() < 1e-9);
            } else {
                assert!((s.location.x - half).abs() < 1e-9);
            }
        }
        for c in &centers {
            if c.location.y > 0.0 {
                assert!((c.location.x - half).abs() < 1e-9);
            } else {
                assert!(c.location.x.abs() < 1e-9 || (c.location.x - p.period()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn southern_center_matches_bisection() {
        let p = JetParameters::with_beta(1.0 / 3.0).unwrap();
        let u_on_axis = |y: f64| {
            let s = 1.0 / y.cosh().powi(2);
            s + 2.0 * p.a * s * y.tanh() - p.c
        };
        let y_star = bisect(u_on_axis, -2.0, 0.0);
        let pts = find_stagnation_points(&p, Window::one_period(&p)).unwrap();
        let center = pts
            .iter()
            .find(|s| s.location.x.abs() < 1e-9 && s.location.y < 0.0)
            .unwrap();
        assert_eq!(center.classification, StagnationKind::Center);
        assert!((center.location.y - y_star).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_rejected() {
        let p = JetParameters::with_beta(0.2).unwrap();
        assert!(find_stagnation_points(&p, Window::new(1.0, 1.0, -1.0, 1.0)).is_err());
    }
}
