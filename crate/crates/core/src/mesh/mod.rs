//! Triangular meshes on eddy and jet-core domains.
//!
//! Meshes are built by deforming regular reference grids onto the spline
//! boundaries and are immutable afterwards.

mod generate;
mod io;
mod refine;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::PhasePoint;
use crate::geometry::Marker;

pub use generate::{mesh_eddy, mesh_jet_core, smooth_laplacian};
pub use io::{read_text, write_text};
pub use refine::refine_uniform;

/// Minimum-angle threshold (degrees) used by quality reports.
pub const MIN_ANGLE_THRESHOLD: f64 = 15.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexMarker {
    Interior,
    Upper,
    Lower,
}

impl VertexMarker {
    pub fn matches(self, m: Marker) -> bool {
        matches!(
            (self, m),
            (VertexMarker::Upper, Marker::Upper) | (VertexMarker::Lower, Marker::Lower)
        )
    }

    pub fn is_boundary(self) -> bool {
        self != VertexMarker::Interior
    }
}

impl From<Marker> for VertexMarker {
    fn from(m: Marker) -> Self {
        match m {
            Marker::Upper => VertexMarker::Upper,
            Marker::Lower => VertexMarker::Lower,
        }
    }
}

/// Position of a boundary vertex on its domain: segment index and spline parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLocation {
    pub segment: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<PhasePoint>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub markers: Vec<VertexMarker>,
    /// Spline location of every vertex lying on a marked boundary.
    pub boundary: Vec<Option<BoundaryLocation>>,
    /// (left, right) vertex pairs identified by periodicity.
    pub periodic_pairs: Vec<(usize, usize)>,
    /// Period along x, for jet-core meshes.
    pub period: Option<f64>,
    pub h_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    /// Circumradius over twice the inradius; 1 for an equilateral triangle.
    pub max_aspect_ratio: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub total_area: f64,
    pub worst_triangle: usize,
    pub n_vertices: usize,
    pub n_triangles: usize,
}

impl QualityReport {
    pub fn meets_angle_threshold(&self) -> bool {
        self.min_angle_deg > MIN_ANGLE_THRESHOLD
    }
}

pub fn signed_area(a: PhasePoint, b: PhasePoint, c: PhasePoint) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

pub(crate) fn angles(a: PhasePoint, b: PhasePoint, c: PhasePoint) -> [f64; 3] {
    let ang = |p: PhasePoint, q: PhasePoint, r: PhasePoint| {
        let (ux, uy) = (q.x - p.x, q.y - p.y);
        let (vx, vy) = (r.x - p.x, r.y - p.y);
        (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy)
    };
    [ang(a, b, c), ang(b, c, a), ang(c, a, b)]
}

impl TriangleMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [PhasePoint; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Undirected edges with the triangles using them, keyed (min, max).
    pub fn edge_map(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(3 * self.triangles.len() / 2 + 8);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        map
    }

    /// Edges used by exactly one triangle, oriented as in that triangle.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let map = self.edge_map();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if map[&(a.min(b), a.max(b))].len() == 1 {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Shoelace area of the boundary polygon traversed along the oriented boundary edges.
    pub fn boundary_polygon_area(&self) -> f64 {
        self.boundary_edges()
            .iter()
            .map(|&(a, b)| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                0.5 * (p.x * q.y - q.x * p.y)
            })
            .sum()
    }

    pub fn longest_edge(&self) -> f64 {
        self.edge_map()
            .keys()
            .map(|&(a, b)| self.vertices[a].distance(self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Checks positivity of every triangle, edge conformity, marker bookkeeping
    /// and periodic pairing.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.markers.len() != n || self.boundary.len() != n {
            return Err(Error::InvalidMesh(format!(
                "{} vertices but {} markers and {} boundary locations",
                n,
                self.markers.len(),
                self.boundary.len()
            )));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} has bad indices {tri:?}")));
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::MeshQuality {
                    triangle: t,
                    signed_area: area,
                });
            }
        }
        for (edge, tris) in self.edge_map() {
            if tris.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge {edge:?} shared by {} triangles",
                    tris.len()
                )));
            }
            if tris.len() == 2 {
                // a conforming interior edge is traversed in opposite directions
                let dir = |t: usize| {
                    let tri = self.triangles[t];
                    (0..3).any(|k| tri[k] == edge.0 && tri[(k + 1) % 3] == edge.1)
                };
                if dir(tris[0]) == dir(tris[1]) {
                    return Err(Error::InvalidMesh(format!("edge {edge:?} has inconsistent orientation")));
                }
            }
        }
        let mut used = vec![false; n];
        for tri in &self.triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }
        for (v, (m, loc)) in self.markers.iter().zip(&self.boundary).enumerate() {
            if m.is_boundary() != loc.is_some() {
                return Err(Error::InvalidMesh(format!("vertex {v} marker and boundary location disagree")));
            }
        }
        self.check_pairs()
    }

    fn check_pairs(&self) -> Result<()> {
        if self.periodic_pairs.is_empty() {
            return Ok(());
        }
        let period = self
            .period
            .ok_or_else(|| Error::Pairing("periodic pairs without a period".into()))?;
        let mut left = vec![false; self.vertices.len()];
        let mut right = vec![false; self.vertices.len()];
        for &(l, r) in &self.periodic_pairs {
            if l >= self.vertices.len() || r >= self.vertices.len() || l == r {
                return Err(Error::Pairing(format!("bad pair ({l}, {r})")));
            }
            if left[l] || right[r] || right[l] || left[r] {
                return Err(Error::Pairing(format!("vertex reused in pair ({l}, {r})")));
            }
            left[l] = true;
            right[r] = true;
            let (a, b) = (self.vertices[l], self.vertices[r]);
            if ((b.x - a.x) - period).abs() > 1e-10 || (b.y - a.y).abs() > 1e-10 {
                return Err(Error::Pairing(format!(
                    "pair ({l}, {r}) is not separated by one period"
                )));
            }
        }
        Ok(())
    }

    pub fn quality(&self) -> QualityReport {
        mesh_quality(self)
    }
}

pub fn mesh_quality(m: &TriangleMesh) -> QualityReport {
    let mut report = QualityReport {
        min_angle_deg: f64::INFINITY,
        max_angle_deg: 0.0,
        max_aspect_ratio: 0.0,
        h_max: 0.0,
        h_min: f64::INFINITY,
        total_area: 0.0,
        worst_triangle: 0,
        n_vertices: m.vertices.len(),
        n_triangles: m.triangles.len(),
    };
    for t in 0..m.triangles.len() {
        let [a, b, c] = m.corners(t);
        let area = signed_area(a, b, c);
        report.total_area += area;
        let angs = angles(a, b, c);
        let lo = angs.iter().copied().fold(f64::INFINITY, f64::min).to_degrees();
        let hi = angs.iter().copied().fold(0.0, f64::max).to_degrees();
        if lo < report.min_angle_deg {
            report.min_angle_deg = lo;
            report.worst_triangle = t;
        }
        report.max_angle_deg = report.max_angle_deg.max(hi);
        let (la, lb, lc) = (b.distance(c), c.distance(a), a.distance(b));
        report.h_max = report.h_max.max(la.max(lb).max(lc));
        report.h_min = report.h_min.min(la.min(lb).min(lc));
        let s = 0.5 * (la + lb + lc);
        let inradius = area.abs() / s;
        let circumradius = la * lb * lc / (4.0 * area.abs());
        report.max_aspect_ratio = report.max_aspect_ratio.max(circumradius / (2.0 * inradius));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(a: PhasePoint, b: PhasePoint, c: PhasePoint) -> TriangleMesh {
        TriangleMesh {
            vertices: vec![a, b, c],
            triangles: vec![[0, 1, 2]],
            markers: vec![VertexMarker::Interior; 3],
            boundary: vec![None; 3],
            periodic_pairs: Vec::new(),
            period: None,
            h_max: 1.0,
        }
    }

    #[test]
    fn equilateral_quality() {
        let m = single(
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 0.0),
            PhasePoint::new(0.5, 0.75f64.sqrt()),
        );
        let q = mesh_quality(&m);
        assert!((q.min_angle_deg - 60.0).abs() < 1e-10);
        assert!((q.max_angle_deg - 60.0).abs() < 1e-10);
        assert!((q.max_aspect_ratio - 1.0).abs() < 1e-12);
        assert!((q.total_area - 0.75f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let m = single(
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(0.0, 1.0),
            PhasePoint::new(1.0, 0.0),
        );
        assert!(matches!(m.validate(), Err(Error::MeshQuality { triangle: 0, .. })));
    }

    #[test]
    fn boundary_polygon_of_single_triangle() {
        let m = single(
            PhasePoint::new(0.2, 0.1),
            PhasePoint::new(1.3, 0.4),
            PhasePoint::new(0.5, 2.0),
        );
        assert!((m.boundary_polygon_area() - m.total_area()).abs() < 1e-15);
        assert_eq!(m.boundary_edges().len(), 3);
    }
}
