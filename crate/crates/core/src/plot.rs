//! Deterministic SVG output: filled contours of P1 fields and line plots.

use std::fmt::Write as _;

use crate::fem::ScalarField;
use crate::geometry::DomainSpec;

/// Number of filled contour bands.
pub const LEVELS: usize = 10;

const PALETTE: [&str; LEVELS] = [
    "#440154", "#482878", "#3e4a89", "#31688e", "#26828e", "#1f9e89", "#35b779", "#6ece58", "#b5de2b", "#fde725",
];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        let wx = (x_max - x_min).max(1e-12);
        let wy = (y_max - y_min).max(1e-12);
        Frame {
            x0: x_min,
            y0: y_max,
            sx: (WIDTH - 2.0 * MARGIN) / wx,
            sy: (HEIGHT - 2.0 * MARGIN) / wy,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.x0) * self.sx, MARGIN + (self.y0 - y) * self.sy)
    }
}

/// Equally spaced band edges from the field minimum to its maximum.
pub fn contour_levels(field: &ScalarField) -> Vec<f64> {
    let (lo, hi) = (field.min(), field.max());
    let hi = if hi > lo { hi } else { lo + 1.0 };
    (0..=LEVELS).map(|i| lo + (hi - lo) * i as f64 / LEVELS as f64).collect()
}

/// Clips the linear triangle (p, v) to lo ≤ v ≤ hi.
fn clip_band(p: &[(f64, f64)], v: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let clip = |p: Vec<(f64, f64)>, v: Vec<f64>, keep: &dyn Fn(f64) -> bool, level: f64| {
        let mut out_p = Vec::new();
        let mut out_v = Vec::new();
        for i in 0..p.len() {
            let j = (i + 1) % p.len();
            if keep(v[i]) {
                out_p.push(p[i]);
                out_v.push(v[i]);
            }
            if keep(v[i]) != keep(v[j]) {
                let t = (level - v[i]) / (v[j] - v[i]);
                out_p.push((p[i].0 + t * (p[j].0 - p[i].0), p[i].1 + t * (p[j].1 - p[i].1)));
                out_v.push(level);
            }
        }
        (out_p, out_v)
    };
    let (p1, v1) = clip(p.to_vec(), v.to_vec(), &|x| x >= lo, lo);
    if p1.len() < 3 {
        return Vec::new();
    }
    let (p2, _) = clip(p1, v1, &|x| x <= hi, hi);
    if p2.len() < 3 {
        Vec::new()
    } else {
        p2
    }
}

fn outline(d: &DomainSpec, frame: &Frame) -> String {
    let mut s = String::new();
    for seg in &d.segments {
        let sp = &seg.curve.spline;
        let n = 400;
        let _ = write!(s, "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"");
        for i in 0..=n {
            let q = sp.eval(sp.t_max() * i as f64 / n as f64);
            let (x, y) = frame.map(q.x, q.y);
            let _ = write!(s, "{x:.2},{y:.2} ");
        }
        s.push_str("\"/>\n");
    }
    s
}

/// Ten-band filled contour plot of a field with the domain outline. The
/// axes are scaled independently to fill the frame.
pub fn contour_svg(field: &ScalarField, d: &DomainSpec, title: &str) -> String {
    let m = &field.mesh;
    let xs = m.vertices.iter().map(|v| v.x);
    let ys = m.vertices.iter().map(|v| v.y);
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y_min, y_max) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let frame = Frame::new(x_min, x_max, y_min, y_max);
    let levels = contour_levels(field);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        WIDTH + 120.0,
        HEIGHT,
        WIDTH + 120.0,
        HEIGHT
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for band in 0..LEVELS {
        let (lo, hi) = (levels[band], levels[band + 1]);
        let mut path = String::new();
        for t in 0..m.triangles.len() {
            let tri = m.triangles[t];
            let v: Vec<f64> = tri.iter().map(|&i| field.values[i]).collect();
            let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
            let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let last = band == LEVELS - 1;
            if vmax < lo || vmin > hi || (!last && vmin >= hi) {
                continue;
            }
            let p: Vec<(f64, f64)> = tri.iter().map(|&i| frame.map(m.vertices[i].x, m.vertices[i].y)).collect();
            let poly = clip_band(&p, &v, lo, hi);
            for (k, (x, y)) in poly.iter().enumerate() {
                let _ = write!(path, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
            }
            if !poly.is_empty() {
                path.push_str("Z ");
            }
        }
        if !path.is_empty() {
            let _ = writeln!(
                s,
                "<path fill=\"{c}\" stroke=\"{c}\" stroke-width=\"0.3\" d=\"{path}\"/>",
                c = PALETTE[band]
            );
        }
    }
    s.push_str(&outline(d, &frame));
    // color bar
    let bar_x = WIDTH + 10.0;
    let step = (HEIGHT - 2.0 * MARGIN) / LEVELS as f64;
    for band in 0..LEVELS {
        let y = HEIGHT - MARGIN - (band + 1) as f64 * step;
        let _ = writeln!(
            s,
            "<rect x=\"{bar_x:.2}\" y=\"{y:.2}\" width=\"20\" height=\"{step:.2}\" fill=\"{}\"/>",
            PALETTE[band]
        );
    }
    for (i, l) in levels.iter().enumerate() {
        let y = HEIGHT - MARGIN - i as f64 * step;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            bar_x + 24.0,
            y + 4.0,
            format_number(*l)
        );
    }
    axes(&mut s, x_min, x_max, y_min, y_max, "x", "y");
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"30\" font-size=\"14\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    s.push_str("</svg>\n");
    s
}

/// One curve of a line plot.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
    pub dashed: bool,
}

pub fn line_svg(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max, mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = 0.05 * (y_max - y_min).max(1e-9);
    let (y_min, y_max) = (y_min - pad, y_max + pad);
    let frame = Frame::new(x_min, x_max, y_min, y_max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        WIDTH + 120.0,
        HEIGHT,
        WIDTH + 120.0,
        HEIGHT
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for (k, ser) in series.iter().enumerate() {
        let _ = write!(
            s,
            "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"{} points=\"",
            if ser.dashed { " stroke-dasharray=\"6,4\"" } else { "" }
        );
        for &(x, y) in ser.points {
            let (px, py) = frame.map(x, y);
            let _ = write!(s, "{px:.2},{py:.2} ");
        }
        s.push_str("\"/>\n");
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"black\"{}/>",
            WIDTH + 5.0,
            WIDTH + 30.0,
            if ser.dashed { " stroke-dasharray=\"6,4\"" } else { "" }
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            WIDTH + 34.0,
            ly + 4.0,
            escape(ser.label)
        );
    }
    axes(&mut s, x_min, x_max, y_min, y_max, x_label, y_label);
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"30\" font-size=\"14\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, x_min: f64, x_max: f64, y_min: f64, y_max: f64, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        "<rect x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"gray\"/>",
        r - l,
        b - t
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x_min + f * (x_max - x_min), y_min + f * (y_max - y_min));
        let (px, py) = (l + f * (r - l), b - f * (b - t));
        let _ = writeln!(
            s,
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
            b + 14.0,
            format_number(xv)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">{}</text>",
            l - 4.0,
            py + 3.0,
            format_number(yv)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
        (l + r) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{:.2}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 12 {:.2})\">{}</text>",
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn format_number(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
