//! Parametric C² cubic interpolating splines in chord-length parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::PhasePoint;

const MIN_SPACING: f64 = 1e-12;

// 3-point Gauss-Legendre on [0, 1]
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Interpolating cubic spline through an ordered list of points.
///
/// Open splines use natural end conditions; closed splines are periodic and
/// carry one extra knot that returns to the first point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    knots: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    mx: Vec<f64>,
    my: Vec<f64>,
    closed: bool,
}

pub fn fit_cubic_spline(points: &[PhasePoint], closed: bool) -> Result<CubicSpline> {
    CubicSpline::fit(points, closed)
}

impl CubicSpline {
    pub fn fit(points: &[PhasePoint], closed: bool) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::DegenerateInput(format!(
                "need at least 4 points, got {}",
                points.len()
            )));
        }
        let mut pts = points.to_vec();
        if closed {
            pts.push(points[0]);
        }
        let mut knots = Vec::with_capacity(pts.len());
        knots.push(0.0);
        for (i, w) in pts.windows(2).enumerate() {
            let d = w[0].distance(w[1]);
            if !(d >= MIN_SPACING) {
                return Err(Error::DegenerateInput(format!(
                    "points {i} and {} are {d:e} apart",
                    (i + 1) % points.len()
                )));
            }
            knots.push(knots[i] + d);
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let (mx, my) = if closed {
            (periodic_moments(&knots, &xs), periodic_moments(&knots, &ys))
        } else {
            (natural_moments(&knots, &xs), natural_moments(&knots, &ys))
        };
        Ok(CubicSpline {
            knots,
            xs,
            ys,
            mx,
            my,
            closed,
        })
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Interpolated points, including the repeated closing point for closed splines.
    pub fn points(&self) -> Vec<PhasePoint> {
        self.xs
            .iter()
            .zip(&self.ys)
            .map(|(&x, &y)| PhasePoint::new(x, y))
            .collect()
    }

    pub fn point(&self, i: usize) -> PhasePoint {
        PhasePoint::new(self.xs[i], self.ys[i])
    }

    pub fn n_knots(&self) -> usize {
        self.knots.len()
    }

    pub fn t_max(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn start(&self) -> PhasePoint {
        self.point(0)
    }

    pub fn end(&self) -> PhasePoint {
        self.point(self.knots.len() - 1)
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn wrap(&self, t: f64) -> f64 {
        if self.closed {
            t.rem_euclid(self.t_max())
        } else {
            t
        }
    }

    pub fn eval(&self, t: f64) -> PhasePoint {
        let t = self.wrap(t);
        let i = self.interval(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = 1.0 - a;
        let c = (a * a * a - a) * h * h / 6.0;
        let d = (b * b * b - b) * h * h / 6.0;
        PhasePoint::new(
            a * self.xs[i] + b * self.xs[i + 1] + c * self.mx[i] + d * self.mx[i + 1],
            a * self.ys[i] + b * self.ys[i + 1] + c * self.my[i] + d * self.my[i + 1],
        )
    }

    /// First derivative with respect to the chord-length parameter.
    pub fn derivative(&self, t: f64) -> [f64; 2] {
        let t = self.wrap(t);
        let i = self.interval(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = 1.0 - a;
        let ca = -(3.0 * a * a - 1.0) * h / 6.0;
        let cb = (3.0 * b * b - 1.0) * h / 6.0;
        [
            (self.xs[i + 1] - self.xs[i]) / h + ca * self.mx[i] + cb * self.mx[i + 1],
            (self.ys[i + 1] - self.ys[i]) / h + ca * self.my[i] + cb * self.my[i + 1],
        ]
    }

    pub fn second_derivative(&self, t: f64) -> [f64; 2] {
        let t = self.wrap(t);
        let i = self.interval(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = 1.0 - a;
        [
            a * self.mx[i] + b * self.mx[i + 1],
            a * self.my[i] + b * self.my[i + 1],
        ]
    }

    pub fn curvature(&self, t: f64) -> f64 {
        let [dx, dy] = self.derivative(t);
        let [ddx, ddy] = self.second_derivative(t);
        (dx * ddy - dy * ddx) / (dx * dx + dy * dy).powf(1.5)
    }

    /// ∫ x dy along the whole spline; exact for the cubic pieces.
    pub fn x_dy_integral(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.knots.len() - 1 {
            let (t0, h) = (self.knots[i], self.knots[i + 1] - self.knots[i]);
            for (s, w) in GAUSS3 {
                let t = t0 + s * h;
                total += w * h * self.eval(t).x * self.derivative(t)[1];
            }
        }
        total
    }

    pub fn arc_length(&self) -> f64 {
        const GAUSS5: [(f64, f64); 5] = [
            (0.046_910_077_030_668, 0.118_463_442_528_095),
            (0.230_765_344_947_158, 0.239_314_335_249_683),
            (0.5, 0.284_444_444_444_444),
            (0.769_234_655_052_842, 0.239_314_335_249_683),
            (0.953_089_922_969_332, 0.118_463_442_528_095),
        ];
        let mut total = 0.0;
        for i in 0..self.knots.len() - 1 {
            let (t0, h) = (self.knots[i], self.knots[i + 1] - self.knots[i]);
            for (s, w) in GAUSS5 {
                let [dx, dy] = self.derivative(t0 + s * h);
                total += w * h * dx.hypot(dy);
            }
        }
        total
    }

    /// Nearest point on the spline: returns (parameter, distance).
    pub fn project(&self, pt: PhasePoint) -> (f64, f64) {
        let nearest = (0..self.knots.len())
            .min_by(|&a, &b| {
                self.point(a)
                    .distance(pt)
                    .total_cmp(&self.point(b).distance(pt))
            })
            .unwrap();
        let last = self.knots.len() - 1;
        let lo = if nearest == 0 {
            if self.closed {
                self.knots[last - 1] - self.t_max()
            } else {
                0.0
            }
        } else {
            self.knots[nearest - 1]
        };
        let hi = if nearest == last {
            if self.closed {
                self.t_max() + self.knots[1]
            } else {
                self.t_max()
            }
        } else {
            self.knots[nearest + 1]
        };
        let dist2 = |t: f64| {
            let q = self.eval(t);
            (q.x - pt.x).powi(2) + (q.y - pt.y).powi(2)
        };
        // golden-section on the bracketing pair of intervals, then Newton polish
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (dist2(c), dist2(d));
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = dist2(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = dist2(d);
            }
            if b - a < 1e-15 * self.t_max().max(1.0) {
                break;
            }
        }
        let mut t = 0.5 * (a + b);
        for _ in 0..4 {
            let q = self.eval(t);
            let d1 = self.derivative(t);
            let d2 = self.second_derivative(t);
            let (ex, ey) = (q.x - pt.x, q.y - pt.y);
            let f = ex * d1[0] + ey * d1[1];
            let df = d1[0] * d1[0] + d1[1] * d1[1] + ex * d2[0] + ey * d2[1];
            if df <= 0.0 {
                break;
            }
            let next = (t - f / df).clamp(lo, hi);
            if dist2(next) > dist2(t) {
                break;
            }
            t = next;
        }
        let t = self.wrap(t);
        (t, self.eval(t).distance(pt))
    }

    /// For a spline whose x coordinate is strictly monotone in the parameter,
    /// the parameter at which x(t) = `x`. `None` outside the x-range.
    pub fn parameter_at_x(&self, x: f64) -> Option<f64> {
        let n = self.xs.len();
        let increasing = self.xs[n - 1] > self.xs[0];
        let (lo_x, hi_x) = if increasing {
            (self.xs[0], self.xs[n - 1])
        } else {
            (self.xs[n - 1], self.xs[0])
        };
        if !(x >= lo_x && x <= hi_x) {
            return None;
        }
        let upper = if increasing {
            self.xs.partition_point(|&v| v <= x)
        } else {
            self.xs.partition_point(|&v| v >= x)
        };
        let i = upper.clamp(1, n - 1) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        if x == x0 {
            return Some(self.knots[i]);
        }
        if x == x1 {
            return Some(self.knots[i + 1]);
        }
        let (mut a, mut b) = (self.knots[i], self.knots[i + 1]);
        let f = |t: f64| self.eval(t).x - x;
        let (mut fa, fb) = (f(a), f(b));
        if fa * fb > 0.0 {
            // non-monotone wiggle inside the interval; nearest end wins
            return Some(if fa.abs() < fb.abs() { a } else { b });
        }
        let mut t = a + (b - a) * (x - x0) / (x1 - x0);
        for _ in 0..60 {
            let ft = f(t);
            if ft.abs() <= 1e-15 * (1.0 + x.abs()) {
                return Some(t);
            }
            if (ft < 0.0) == (fa < 0.0) {
                a = t;
                fa = ft;
            } else {
                b = t;
            }
            let dx = self.derivative(t)[0];
            let newton = t - ft / dx;
            t = if dx != 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (b - a).abs() < 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        Some(t)
    }

    /// y on an x-monotone spline.
    pub fn y_at_x(&self, x: f64) -> Option<f64> {
        self.parameter_at_x(x).map(|t| self.eval(t).y)
    }
}

/// Second-derivative moments of a natural spline.
fn natural_moments(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len() - 1;
    let mut m = vec![0.0; n + 1];
    if n < 2 {
        return m;
    }
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let size = n - 1;
    let mut sub = vec![0.0; size];
    let mut diag = vec![0.0; size];
    let mut sup = vec![0.0; size];
    let mut rhs = vec![0.0; size];
    for r in 0..size {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * ((v[i + 1] - v[i]) / h[i] - (v[i] - v[i - 1]) / h[i - 1]);
    }
    let sol = thomas(&sub, &diag, &sup, &rhs);
    m[1..n].copy_from_slice(&sol);
    m
}

/// Moments of a periodic spline; `v[n]` must equal `v[0]`.
fn periodic_moments(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len() - 1;
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let hm = |i: usize| h[(i + n - 1) % n];
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let ip = (i + 1) % n;
        let im = (i + n - 1) % n;
        sub[i] = hm(i);
        diag[i] = 2.0 * (hm(i) + h[i]);
        sup[i] = h[i];
        rhs[i] = 6.0 * ((v[ip] - v[i]) / h[i] - (v[i] - v[im]) / hm(i));
    }
    // Sherman-Morrison on the cyclic system
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut d = diag.clone();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let mut s = sub.clone();
    s[0] = 0.0;
    let mut p = sup.clone();
    p[n - 1] = 0.0;
    let x = thomas(&s, &d, &p, &rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(&s, &d, &p, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    let mut m: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect();
    m.push(m[0]);
    m
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> Vec<PhasePoint> {
        (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                PhasePoint::new(r * th.cos(), r * th.sin())
            })
            .collect()
    }

    #[test]
    fn straight_line_has_zero_curvature() {
        let pts: Vec<_> = [0.0, 0.3, 1.1, 2.0]
            .iter()
            .map(|&s| PhasePoint::new(1.0 + 2.0 * s, -0.5 + s))
            .collect();
        let sp = fit_cubic_spline(&pts, false).unwrap();
        for i in 0..=100 {
            let t = sp.t_max() * i as f64 / 100.0;
            let p = sp.eval(t);
            let s = (p.x - 1.0) / 2.0;
            assert!((p.y - (-0.5 + s)).abs() < 1e-14);
            assert!(sp.curvature(t).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_circle_radial_deviation() {
        let sp = fit_cubic_spline(&circle(16, 1.0), true).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..2000 {
            let t = sp.t_max() * i as f64 / 2000.0;
            let p = sp.eval(t);
            worst = worst.max((p.x.hypot(p.y) - 1.0).abs());
        }
        assert!(worst < 1e-4, "max radial deviation {worst}");
        // periodic closure is C²
        let a = sp.second_derivative(1e-12);
        let b = sp.second_derivative(sp.t_max() - 1e-12);
        assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
    }

    #[test]
    fn knots_are_reproduced() {
        let pts = circle(16, 0.7);
        for closed in [false, true] {
            let sp = fit_cubic_spline(&pts, closed).unwrap();
            for (i, p) in pts.iter().enumerate() {
                let q = sp.eval(sp.knots()[i]);
                assert!((q.x - p.x).abs() < 1e-14 && (q.y - p.y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_duplicates_and_short_input() {
        let mut pts = circle(8, 1.0);
        pts[3] = pts[2];
        assert!(matches!(
            fit_cubic_spline(&pts, false),
            Err(Error::DegenerateInput(_))
        ));
        assert!(fit_cubic_spline(&pts[..3], false).is_err());
        // closing duplicate
        let mut pts = circle(8, 1.0);
        pts.push(pts[0]);
        assert!(fit_cubic_spline(&pts, true).is_err());
    }

    #[test]
    fn circle_area_and_length() {
        let sp = fit_cubic_spline(&circle(64, 1.0), true).unwrap();
        assert!((sp.x_dy_integral() - PI).abs() < 1e-6);
        assert!((sp.arc_length() - 2.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn projection_and_graph_lookup() {
        let pts: Vec<_> = (0..40)
            .map(|i| {
                let x = i as f64 * 0.1;
                PhasePoint::new(x, x.sin())
            })
            .collect();
        let sp = fit_cubic_spline(&pts, false).unwrap();
        let (t, d) = sp.project(PhasePoint::new(1.0, 1.0f64.sin() + 0.01));
        assert!(d < 0.0101 && d > 0.005, "{d}");
        assert!((sp.eval(t).x - 1.0).abs() < 0.01);
        for x in [0.05, 1.234, 3.8] {
            let y = sp.y_at_x(x).unwrap();
            assert!((y - x.sin()).abs() < 1e-5);
        }
        assert!(sp.y_at_x(-0.1).is_none());
        assert!(sp.y_at_x(4.0).is_none());
    }
}
