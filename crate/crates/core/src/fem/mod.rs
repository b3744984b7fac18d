//! P1 finite elements for the stationary advection-diffusion operator.

mod assemble;
mod solve;
mod sparse;

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flowfield::PhasePoint;
use crate::mesh::{write_text, TriangleMesh};

pub use assemble::{
    apply_dirichlet, apply_dirichlet_with, apply_periodic, assemble, assemble_with_source, upwind_function,
    LinearSystem, Stabilization,
};
pub use solve::{gmres, Factorization, Ilu0, SolveOptions, SolveReport, SolverMethod};
pub use sparse::CsrMatrix;

/// Lower/upper slack allowed on escape-probability fields.
pub const PROBABILITY_SLACK: f64 = 0.02;
/// Lowest value accepted in a residence-time field.
pub const RESIDENCE_FLOOR: f64 = -1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    EscapeProbability,
    ResidenceTime,
    Other,
}

/// Nodal values on a mesh.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub mesh: Arc<TriangleMesh>,
    pub values: Vec<f64>,
    pub kind: FieldKind,
    pub report: Option<SolveReport>,
}

#[derive(Serialize, Deserialize)]
struct FieldDocument {
    kind: FieldKind,
    mesh_sha256: String,
    n_vertices: usize,
    values: Vec<f64>,
    report: Option<SolveReport>,
}

/// SHA-256 of the mesh text serialization, hex encoded.
pub fn mesh_hash(m: &TriangleMesh) -> String {
    let digest = Sha256::digest(write_text(m).as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl ScalarField {
    pub fn new(mesh: Arc<TriangleMesh>, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        if values.len() != mesh.vertices.len() {
            return Err(Error::DegenerateInput(format!(
                "{} values for {} vertices",
                values.len(),
                mesh.vertices.len()
            )));
        }
        Ok(ScalarField {
            mesh,
            values,
            kind,
            report: None,
        })
    }

    pub fn constant(mesh: Arc<TriangleMesh>, value: f64, kind: FieldKind) -> Self {
        let n = mesh.vertices.len();
        ScalarField {
            mesh,
            values: vec![value; n],
            kind,
            report: None,
        }
    }

    pub fn from_fn(mesh: Arc<TriangleMesh>, f: impl Fn(PhasePoint) -> f64, kind: FieldKind) -> Self {
        let values = mesh.vertices.iter().map(|&p| f(p)).collect();
        ScalarField {
            mesh,
            values,
            kind,
            report: None,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn negated(&self) -> Self {
        ScalarField {
            values: self.values.iter().map(|v| -v).collect(),
            kind: FieldKind::Other,
            ..self.clone()
        }
    }

    /// Checks the range invariant belonging to the field kind.
    pub fn check_bounds(&self) -> Result<()> {
        let (lo, hi) = match self.kind {
            FieldKind::EscapeProbability => (-PROBABILITY_SLACK, 1.0 + PROBABILITY_SLACK),
            FieldKind::ResidenceTime => (RESIDENCE_FLOOR, f64::INFINITY),
            FieldKind::Other => (f64::NEG_INFINITY, f64::INFINITY),
        };
        match self.values.iter().position(|v| !(*v >= lo && *v <= hi)) {
            None => Ok(()),
            Some(i) => Err(Error::DegenerateInput(format!(
                "{:?} field value {} at vertex {i} outside [{lo}, {hi}]",
                self.kind, self.values[i]
            ))),
        }
    }

    /// P1 interpolation at `pt`; x is wrapped into the mesh period when there
    /// is one. None if the point lies outside every triangle.
    pub fn interpolate(&self, pt: PhasePoint) -> Option<f64> {
        let m = &self.mesh;
        let mut q = pt;
        if let Some(period) = m.period {
            let x0 = m.vertices.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
            q.x = x0 + (pt.x - x0).rem_euclid(period);
        }
        let mut best: Option<(f64, f64)> = None;
        for t in 0..m.triangles.len() {
            let [a, b, c] = m.corners(t);
            let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
            let l1 = ((q.x - a.x) * (c.y - a.y) - (c.x - a.x) * (q.y - a.y)) / det;
            let l2 = ((b.x - a.x) * (q.y - a.y) - (q.x - a.x) * (b.y - a.y)) / det;
            let l0 = 1.0 - l1 - l2;
            let worst = l0.min(l1).min(l2);
            let [i, j, k] = m.triangles[t];
            let v = l0 * self.values[i] + l1 * self.values[j] + l2 * self.values[k];
            if worst >= 0.0 {
                return Some(v);
            }
            if best.map_or(true, |(w, _)| worst > w) {
                best = Some((worst, v));
            }
        }
        // accept round-off misses on shared edges
        best.filter(|(w, _)| *w > -1e-9).map(|(_, v)| v)
    }

    /// Nodal values as "x,y,value" lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,value\n");
        for (p, v) in self.mesh.vertices.iter().zip(&self.values) {
            let _ = writeln!(s, "{:?},{:?},{:?}", p.x, p.y, v);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FieldDocument {
            kind: self.kind,
            mesh_sha256: mesh_hash(&self.mesh),
            n_vertices: self.values.len(),
            values: self.values.clone(),
            report: self.report.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Reads a field document, checking it belongs to `mesh`.
    pub fn from_json(text: &str, mesh: Arc<TriangleMesh>) -> Result<Self> {
        let doc: FieldDocument = serde_json::from_str(text)?;
        if doc.mesh_sha256 != mesh_hash(&mesh) {
            return Err(Error::DegenerateInput("field document refers to a different mesh".into()));
        }
        let mut f = ScalarField::new(mesh, doc.values, doc.kind)?;
        f.report = doc.report;
        Ok(f)
    }
}

/// Exact P1 quadrature of the field over the mesh.
pub fn integrate(field: &ScalarField) -> f64 {
    let m = &field.mesh;
    (0..m.triangles.len())
        .map(|t| {
            let [a, b, c] = m.triangles[t];
            m.triangle_area(t) * (field.values[a] + field.values[b] + field.values[c]) / 3.0
        })
        .sum()
}

/// Largest nodal value and its vertex; the lowest index wins ties.
pub fn field_extremum(field: &ScalarField) -> (f64, PhasePoint) {
    let mut best = 0;
    for (i, v) in field.values.iter().enumerate() {
        if *v > field.values[best] {
            best = i;
        }
    }
    (field.values[best], field.mesh.vertices[best])
}

/// Solves a constrained system and scatters the result back to the vertices.
pub fn solve(sys: &LinearSystem, kind: FieldKind, opts: &SolveOptions) -> Result<ScalarField> {
    let f = Factorization::new(&sys.matrix, opts)?;
    solve_with(sys, &f, &sys.rhs, kind)
}

/// Solves with a prepared factorization of `sys.matrix` and a given rhs.
pub fn solve_with(sys: &LinearSystem, f: &Factorization, rhs: &[f64], kind: FieldKind) -> Result<ScalarField> {
    let (x, report) = f.solve(rhs)?;
    let mut field = ScalarField::new(Arc::clone(&sys.mesh), sys.scatter(&x), kind)?;
    field.report = Some(report);
    Ok(field)
}
