//! Uniform red refinement with boundary projection.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::flowfield::PhasePoint;
use crate::geometry::DomainSpec;
use crate::mesh::{BoundaryLocation, TriangleMesh, VertexMarker};

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Splits every triangle into four through its edge midpoints. Midpoints of
/// boundary edges are placed on the boundary splines of `d`; markers and
/// periodic pairs carry over to the new vertices.
pub fn refine_uniform(m: &TriangleMesh, d: &DomainSpec) -> Result<TriangleMesh> {
    let edges = m.edge_map();
    let mut on_cut = vec![false; m.vertices.len()];
    for &(l, r) in &m.periodic_pairs {
        on_cut[l] = true;
        on_cut[r] = true;
    }
    let mut vertices = m.vertices.clone();
    let mut markers = m.markers.clone();
    let mut boundary = m.boundary.clone();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
    // first-seen order keeps the numbering deterministic
    for tri in &m.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let e = key(a, b);
            if mid.contains_key(&e) {
                continue;
            }
            let (pa, pb) = (m.vertices[a], m.vertices[b]);
            let chord = pa.lerp(pb, 0.5);
            let on_boundary = edges[&e].len() == 1 && !(on_cut[a] && on_cut[b]);
            let placed = match (on_boundary, m.boundary[a], m.boundary[b]) {
                (true, Some(la), Some(lb)) => Some(boundary_midpoint(d, la, lb, chord)?),
                _ => None,
            };
            mid.insert(e, vertices.len());
            match placed {
                Some((p, loc)) => {
                    vertices.push(p);
                    markers.push(d.segments[loc.segment].marker.into());
                    boundary.push(Some(loc));
                }
                None => {
                    vertices.push(chord);
                    markers.push(VertexMarker::Interior);
                    boundary.push(None);
                }
            }
        }
    }
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for &[a, b, c] in &m.triangles {
        let (ab, bc, ca) = (mid[&key(a, b)], mid[&key(b, c)], mid[&key(c, a)]);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut periodic_pairs = m.periodic_pairs.clone();
    let partner: HashMap<usize, usize> = m.periodic_pairs.iter().copied().collect();
    for &(l1, r1) in &m.periodic_pairs {
        for &(l2, r2) in &m.periodic_pairs {
            if l1 < l2 {
                if let (Some(&ml), Some(&mr)) = (mid.get(&key(l1, l2)), mid.get(&key(r1, r2))) {
                    if partner.get(&l1) == Some(&r1) {
                        periodic_pairs.push((ml, mr));
                    }
                }
            }
        }
    }
    let mut out = TriangleMesh {
        vertices,
        triangles,
        markers,
        boundary,
        periodic_pairs,
        period: m.period,
        h_max: 0.0,
    };
    if let Some(t) = (0..out.triangles.len()).find(|&t| !(out.triangle_area(t) > 0.0)) {
        return Err(Error::MeshQuality {
            triangle: t,
            signed_area: out.triangle_area(t),
        });
    }
    out.h_max = out.longest_edge();
    Ok(out)
}

fn boundary_midpoint(
    d: &DomainSpec,
    la: BoundaryLocation,
    lb: BoundaryLocation,
    chord: PhasePoint,
) -> Result<(PhasePoint, BoundaryLocation)> {
    if la.segment >= d.segments.len() || lb.segment >= d.segments.len() {
        return Err(Error::InvalidMesh("boundary location names a missing segment".into()));
    }
    if la.segment == lb.segment {
        let t = 0.5 * (la.t + lb.t);
        let loc = BoundaryLocation { segment: la.segment, t };
        return Ok((d.segments[la.segment].curve.spline.eval(t), loc));
    }
    // walk along the boundary through the junction the two segments share
    let sa = &d.segments[la.segment].curve.spline;
    let sb = &d.segments[lb.segment].curve.spline;
    let ends = |s: &crate::geometry::CubicSpline| [(0.0, s.start()), (s.t_max(), s.end())];
    let (ta_end, tb_end) = ends(sa)
        .iter()
        .flat_map(|&(ta, pa)| ends(sb).map(move |(tb, pb)| (ta, tb, pa.distance(pb) + pa.distance(chord))))
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .map(|(ta, tb, _)| (ta, tb))
        .unwrap();
    let (da, db) = ((ta_end - la.t).abs(), (tb_end - lb.t).abs());
    let half = 0.5 * (da + db);
    let loc = if half <= da {
        BoundaryLocation {
            segment: la.segment,
            t: la.t + (ta_end - la.t).signum() * half,
        }
    } else {
        BoundaryLocation {
            segment: lb.segment,
            t: lb.t + (tb_end - lb.t).signum() * (da + db - half),
        }
    };
    Ok((d.segments[loc.segment].curve.spline.eval(loc.t), loc))
}
