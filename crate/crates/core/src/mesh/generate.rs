//! Reference-grid deformation onto eddy and jet-core domains.

use crate::error::{Error, Result};
use crate::flowfield::PhasePoint;
use crate::geometry::{DomainKind, DomainSpec, Marker};
use crate::mesh::{angles, signed_area, BoundaryLocation, TriangleMesh, VertexMarker};

fn min_angle(a: PhasePoint, b: PhasePoint, c: PhasePoint) -> f64 {
    angles(a, b, c).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Splits the counterclockwise quad (p0, p1, p2, p3) along the diagonal that
/// gives the larger minimum angle.
fn split_quad(v: &[PhasePoint], q: [usize; 4]) -> [[usize; 3]; 2] {
    let [a, b, c, d] = q;
    let diag_ac = [[a, b, c], [a, c, d]];
    let diag_bd = [[a, b, d], [b, c, d]];
    let score = |tris: &[[usize; 3]; 2]| {
        tris.iter()
            .map(|t| {
                if signed_area(v[t[0]], v[t[1]], v[t[2]]) <= 0.0 {
                    -1.0
                } else {
                    min_angle(v[t[0]], v[t[1]], v[t[2]])
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    if score(&diag_ac) >= score(&diag_bd) {
        diag_ac
    } else {
        diag_bd
    }
}

fn check_orientation(m: &TriangleMesh) -> Result<()> {
    let mut worst: Option<(usize, f64)> = None;
    for t in 0..m.triangles.len() {
        let area = m.triangle_area(t);
        if !(area > 0.0) && worst.map_or(true, |(_, w)| area < w) {
            worst = Some((t, area));
        }
    }
    match worst {
        Some((triangle, signed_area)) => Err(Error::MeshQuality {
            triangle,
            signed_area,
        }),
        None => Ok(()),
    }
}

fn single_segment(d: &DomainSpec, marker: Marker) -> Result<usize> {
    let ids: Vec<usize> = (0..d.segments.len())
        .filter(|&i| d.segments[i].marker == marker)
        .collect();
    match ids.as_slice() {
        [i] => Ok(*i),
        _ => Err(Error::InvalidMesh(format!(
            "eddy needs exactly one {marker} boundary segment, found {}",
            ids.len()
        ))),
    }
}

/// Boundary point of the branch `seg` at abscissa `x`, snapping to the tips.
fn branch_point(d: &DomainSpec, seg: usize, x: f64) -> Result<(PhasePoint, BoundaryLocation)> {
    let spline = &d.segments[seg].curve.spline;
    let (a, b) = d.segments[seg].x_range();
    let t = if x <= a {
        0.0
    } else if x >= b {
        spline.t_max()
    } else {
        spline
            .parameter_at_x(x)
            .ok_or_else(|| Error::InvalidMesh(format!("eddy boundary has no point at x = {x}")))?
    };
    Ok((spline.eval(t), BoundaryLocation { segment: seg, t }))
}

/// Regular grid on a reference ellipse deformed onto an eddy.
///
/// The reference grid on the ellipse x = a cos ν, y = s·b sin ν has
/// `n_angular / 2` uniform steps in ν ∈ [0, π] and `n_radial` uniform steps in
/// s from the major axis to each side, so there are `n_angular` boundary
/// nodes and every column carries `2·n_radial + 1` nodes. The deformation keeps
/// each column's abscissa and blends s between the mid-line of the eddy and
/// its two branches; on an ellipse it is the identity. The tips are single
/// vertices shared by their column fans; the right tip is marked lower and
/// the left tip upper.
pub fn mesh_eddy(d: &DomainSpec, n_radial: usize, n_angular: usize) -> Result<TriangleMesh> {
    if d.kind != DomainKind::Eddy {
        return Err(Error::InvalidMesh("mesh_eddy needs an eddy domain".into()));
    }
    if n_radial < 2 || n_angular < 8 {
        return Err(Error::InvalidMesh(format!(
            "need n_radial >= 2 and n_angular >= 8, got {n_radial} and {n_angular}"
        )));
    }
    let up = single_segment(d, Marker::Upper)?;
    let lo = single_segment(d, Marker::Lower)?;
    let n_cols = (n_angular + 1) / 2;
    let (x_l, x_r) = d.x_range;
    let (x_c, a) = (0.5 * (x_l + x_r), 0.5 * (x_r - x_l));
    let rows = 2 * n_radial + 1;

    let mut vertices = Vec::with_capacity(2 + (n_cols - 1) * rows);
    let mut markers = Vec::with_capacity(vertices.capacity());
    let mut boundary = Vec::with_capacity(vertices.capacity());
    let tip = |seg: usize, right: bool| -> (PhasePoint, BoundaryLocation) {
        let spline = &d.segments[seg].curve.spline;
        let t = if right { spline.t_max() } else { 0.0 };
        (spline.eval(t), BoundaryLocation { segment: seg, t })
    };
    let (right_tip, right_loc) = tip(lo, true);
    vertices.push(right_tip);
    markers.push(VertexMarker::from(d.segments[lo].marker));
    boundary.push(Some(right_loc));
    // columns run from the right tip to the left tip, as ν goes from 0 to π
    for i in 1..n_cols {
        let nu = std::f64::consts::PI * i as f64 / n_cols as f64;
        let x = x_c + a * nu.cos();
        let (p_lo, loc_lo) = branch_point(d, lo, x)?;
        let (p_up, loc_up) = branch_point(d, up, x)?;
        let (mid, half) = (0.5 * (p_lo.y + p_up.y), 0.5 * (p_up.y - p_lo.y));
        for k in 0..rows {
            if k == 0 {
                vertices.push(PhasePoint::new(x, p_lo.y));
                markers.push(VertexMarker::from(d.segments[lo].marker));
                boundary.push(Some(loc_lo));
            } else if k == rows - 1 {
                vertices.push(PhasePoint::new(x, p_up.y));
                markers.push(VertexMarker::from(d.segments[up].marker));
                boundary.push(Some(loc_up));
            } else {
                let s = (k as f64 - n_radial as f64) / n_radial as f64;
                vertices.push(PhasePoint::new(x, mid + s * half));
                markers.push(VertexMarker::Interior);
                boundary.push(None);
            }
        }
    }
    let (left_tip, left_loc) = tip(up, false);
    let left = vertices.len();
    vertices.push(left_tip);
    markers.push(VertexMarker::from(d.segments[up].marker));
    boundary.push(Some(left_loc));

    let idx = |i: usize, k: usize| 1 + (i - 1) * rows + k;
    let mut triangles = Vec::with_capacity(2 * rows * n_cols);
    for k in 0..rows - 1 {
        triangles.push([0, idx(1, k + 1), idx(1, k)]);
    }
    for i in 1..n_cols - 1 {
        for k in 0..rows - 1 {
            // column i lies right of column i + 1
            let q = [idx(i + 1, k), idx(i, k), idx(i, k + 1), idx(i + 1, k + 1)];
            triangles.extend(split_quad(&vertices, q));
        }
    }
    for k in 0..rows - 1 {
        triangles.push([left, idx(n_cols - 1, k), idx(n_cols - 1, k + 1)]);
    }
    let mut mesh = TriangleMesh {
        vertices,
        triangles,
        markers,
        boundary,
        periodic_pairs: Vec::new(),
        period: None,
        h_max: 0.0,
    };
    check_orientation(&mesh)?;
    mesh.h_max = mesh.longest_edge();
    Ok(mesh)
}

/// Boundary point of `marker` at abscissa `x`, with its spline location.
fn boundary_point(d: &DomainSpec, marker: Marker, x: f64) -> Result<(f64, BoundaryLocation)> {
    for (seg, s) in d.segments.iter().enumerate() {
        if s.marker != marker {
            continue;
        }
        let (a, b) = s.x_range();
        if x >= a - 1e-12 && x <= b + 1e-12 {
            let t = s
                .curve
                .spline
                .parameter_at_x(x.clamp(a, b))
                .ok_or_else(|| Error::InvalidMesh(format!("{marker} boundary has no point at x = {x}")))?;
            return Ok((s.curve.spline.eval(t).y, BoundaryLocation { segment: seg, t }));
        }
    }
    Err(Error::InvalidMesh(format!("{marker} boundary does not cover x = {x}")))
}

/// Structured grid on a unit jet core by vertical transfinite interpolation
/// between the lower and upper boundary graphs. The left and right columns
/// are identified by periodicity.
pub fn mesh_jet_core(d: &DomainSpec, n_x: usize, n_y: usize) -> Result<TriangleMesh> {
    if d.kind != DomainKind::JetCoreUnit {
        return Err(Error::InvalidMesh("mesh_jet_core needs a jet-core domain".into()));
    }
    if n_x < 8 || n_y < 4 {
        return Err(Error::InvalidMesh(format!(
            "need n_x >= 8 and n_y >= 4, got {n_x} and {n_y}"
        )));
    }
    let period = d
        .period
        .ok_or_else(|| Error::InvalidMesh("jet-core domain without a period".into()))?;
    let x0 = d.x_range.0;
    let rows = n_y + 1;
    let n_vert = (n_x + 1) * rows;
    let mut vertices = Vec::with_capacity(n_vert);
    let mut markers = Vec::with_capacity(n_vert);
    let mut boundary = Vec::with_capacity(n_vert);
    for i in 0..=n_x {
        let x = if i == n_x {
            x0 + period
        } else {
            x0 + i as f64 * period / n_x as f64
        };
        let (y_lo, loc_lo) = boundary_point(d, Marker::Lower, x)?;
        let (y_up, loc_up) = boundary_point(d, Marker::Upper, x)?;
        for j in 0..rows {
            if i == n_x {
                // exact copy of the left column so paired vertices coincide modulo the period
                let left = vertices[j];
                let PhasePoint { y, .. } = left;
                vertices.push(PhasePoint::new(x, y));
            } else {
                let s = j as f64 / n_y as f64;
                let y = if j == n_y { y_up } else { y_lo + s * (y_up - y_lo) };
                vertices.push(PhasePoint::new(x, y));
            }
            if j == 0 {
                markers.push(VertexMarker::Lower);
                boundary.push(Some(loc_lo));
            } else if j == n_y {
                markers.push(VertexMarker::Upper);
                boundary.push(Some(loc_up));
            } else {
                markers.push(VertexMarker::Interior);
                boundary.push(None);
            }
        }
    }
    let idx = |i: usize, j: usize| i * rows + j;
    let mut triangles = Vec::with_capacity(2 * n_x * n_y);
    for i in 0..n_x {
        for j in 0..n_y {
            let q = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            triangles.extend(split_quad(&vertices, q));
        }
    }
    let periodic_pairs = (0..rows).map(|j| (idx(0, j), idx(n_x, j))).collect();
    let mut mesh = TriangleMesh {
        vertices,
        triangles,
        markers,
        boundary,
        periodic_pairs,
        period: Some(period),
        h_max: 0.0,
    };
    check_orientation(&mesh)?;
    mesh.h_max = mesh.longest_edge();
    Ok(mesh)
}

/// Jacobi Laplacian smoothing of interior vertices. Boundary vertices and
/// periodic-cut vertices stay fixed; a sweep that would invert a triangle is
/// undone and smoothing stops there.
pub fn smooth_laplacian(m: &TriangleMesh, sweeps: usize) -> TriangleMesh {
    let n = m.vertices.len();
    let mut fixed: Vec<bool> = m.markers.iter().map(|mk| mk.is_boundary()).collect();
    for &(l, r) in &m.periodic_pairs {
        fixed[l] = true;
        fixed[r] = true;
    }
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for tri in &m.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if !neighbours[a].contains(&b) {
                neighbours[a].push(b);
            }
            if !neighbours[b].contains(&a) {
                neighbours[b].push(a);
            }
        }
    }
    let mut out = m.clone();
    for _ in 0..sweeps {
        let prev = out.vertices.clone();
        for v in 0..n {
            if fixed[v] || neighbours[v].is_empty() {
                continue;
            }
            let k = neighbours[v].len() as f64;
            let (sx, sy) = neighbours[v]
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &w| (sx + prev[w].x, sy + prev[w].y));
            out.vertices[v] = PhasePoint::new(sx / k, sy / k);
        }
        if (0..out.triangles.len()).any(|t| !(out.triangle_area(t) > 0.0)) {
            out.vertices = prev;
            break;
        }
    }
    out.h_max = out.longest_edge();
    out
}
