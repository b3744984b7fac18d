//! P1 Galerkin assembly of D·Δφ + a·∇φ = f with optional streamline diffusion.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::flowfield::{PhasePoint, VelocityField};
use crate::geometry::Marker;
use crate::mesh::TriangleMesh;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    None,
    #[default]
    StreamlineDiffusion,
}

/// Sparse system over the mesh degrees of freedom. Before periodic merging
/// every vertex is its own dof.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub mesh: Arc<TriangleMesh>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub vertex_to_dof: Vec<usize>,
    /// Constrained dof → prescribed value.
    pub constrained: BTreeMap<usize, f64>,
}

impl LinearSystem {
    pub fn n_dofs(&self) -> usize {
        self.matrix.n
    }

    /// Nodal values per vertex from a dof vector.
    pub fn scatter(&self, dofs: &[f64]) -> Vec<f64> {
        self.vertex_to_dof.iter().map(|&d| dofs[d]).collect()
    }
}

/// coth(Pe) − 1/Pe, with its series near zero.
pub fn upwind_function(pe: f64) -> f64 {
    if pe < 1e-3 {
        pe / 3.0 - pe.powi(3) / 45.0
    } else if pe > 20.0 {
        1.0 - 1.0 / pe
    } else {
        1.0 / pe.tanh() - 1.0 / pe
    }
}

struct ElementContribution {
    vertices: [usize; 3],
    matrix: [[f64; 3]; 3],
    rhs: [f64; 3],
}

fn element<V: VelocityField + ?Sized, S: Fn(PhasePoint) -> f64 + Sync + ?Sized>(
    mesh: &TriangleMesh,
    t: usize,
    velocity: &V,
    diffusion: f64,
    source: &S,
    stabilization: Stabilization,
) -> ElementContribution {
    let tri = mesh.triangles[t];
    let [p0, p1, p2] = mesh.corners(t);
    let two_area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    let area = 0.5 * two_area;
    let grad = [
        [(p1.y - p2.y) / two_area, (p2.x - p1.x) / two_area],
        [(p2.y - p0.y) / two_area, (p0.x - p2.x) / two_area],
        [(p0.y - p1.y) / two_area, (p1.x - p0.x) / two_area],
    ];
    let mut matrix = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            matrix[i][j] = diffusion * area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
        }
    }
    // mid-edge points (01, 12, 20) and the barycentric values there
    let quad = [p0.lerp(p1, 0.5), p1.lerp(p2, 0.5), p2.lerp(p0, 0.5)];
    let bary = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let w = area / 3.0;

    // transport velocity of the operator −DΔφ + b·∇φ is b = −a
    let centroid = PhasePoint::new((p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0);
    let tau = match stabilization {
        Stabilization::None => 0.0,
        Stabilization::StreamlineDiffusion => {
            let a = velocity.velocity(centroid);
            let b = [-a.u, -a.v];
            let speed = b[0].hypot(b[1]);
            let proj: f64 = grad.iter().map(|g| (b[0] * g[0] + b[1] * g[1]).abs()).sum();
            if speed < 1e-14 || proj < 1e-300 {
                0.0
            } else {
                let h = 2.0 * speed / proj;
                let pe = speed * h / (2.0 * diffusion);
                h / (2.0 * speed) * upwind_function(pe)
            }
        }
    };

    for (q, lam) in quad.iter().zip(bary.iter()) {
        let a = velocity.velocity(*q);
        let b = [-a.u, -a.v];
        let g = source(*q);
        let b_grad: [f64; 3] = std::array::from_fn(|j| b[0] * grad[j][0] + b[1] * grad[j][1]);
        for i in 0..3 {
            for j in 0..3 {
                matrix[i][j] += w * lam[i] * b_grad[j];
                if tau > 0.0 {
                    matrix[i][j] += tau * w * b_grad[i] * b_grad[j];
                }
            }
            rhs[i] += w * lam[i] * g;
            if tau > 0.0 {
                rhs[i] += tau * w * b_grad[i] * g;
            }
        }
    }
    ElementContribution {
        vertices: tri,
        matrix,
        rhs,
    }
}

/// Assembles D·Δφ + a·∇φ = `rhs_constant`, i.e. the weak form of
/// −D·Δφ − a·∇φ = −`rhs_constant`, with a evaluated at the mid-edge points.
pub fn assemble<V: VelocityField + ?Sized>(
    mesh: Arc<TriangleMesh>,
    velocity: &V,
    diffusion: f64,
    rhs_constant: f64,
    stabilization: Stabilization,
) -> Result<LinearSystem> {
    assemble_with_source(mesh, velocity, diffusion, &|_| rhs_constant, stabilization)
}

/// As [`assemble`] with a variable right-hand side f(x, y).
pub fn assemble_with_source<V: VelocityField + ?Sized, S: Fn(PhasePoint) -> f64 + Sync + ?Sized>(
    mesh: Arc<TriangleMesh>,
    velocity: &V,
    diffusion: f64,
    source: &S,
    stabilization: Stabilization,
) -> Result<LinearSystem> {
    if !(diffusion > 0.0 && diffusion.is_finite()) {
        return Err(Error::ParameterDomain {
            field: "diffusion",
            value: diffusion,
            expected: "diffusion > 0",
        });
    }
    let n = mesh.vertices.len();
    let neg_source = |p: PhasePoint| -source(p);
    let elements: Vec<ElementContribution> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| element(&mesh, t, velocity, diffusion, &neg_source, stabilization))
        .collect();
    let mut triplets = Vec::with_capacity(9 * elements.len());
    let mut rhs = vec![0.0; n];
    for e in &elements {
        for i in 0..3 {
            rhs[e.vertices[i]] += e.rhs[i];
            for j in 0..3 {
                triplets.push((e.vertices[i], e.vertices[j], e.matrix[i][j]));
            }
        }
    }
    Ok(LinearSystem {
        matrix: CsrMatrix::from_triplets(n, &triplets),
        rhs,
        vertex_to_dof: (0..n).collect(),
        constrained: BTreeMap::new(),
        mesh,
    })
}

/// Prescribes `value` on every vertex carrying `marker`.
pub fn apply_dirichlet(sys: &LinearSystem, marker: Marker, value: f64) -> Result<LinearSystem> {
    apply_dirichlet_with(sys, marker, |_| value)
}

/// Prescribes g(vertex position) on every vertex carrying `marker`. Constrained
/// rows become identity rows and their columns are eliminated into the rhs.
pub fn apply_dirichlet_with(
    sys: &LinearSystem,
    marker: Marker,
    g: impl Fn(PhasePoint) -> f64,
) -> Result<LinearSystem> {
    let mut new_values: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, m) in sys.mesh.markers.iter().enumerate() {
        if m.matches(marker) {
            new_values.insert(sys.vertex_to_dof[v], g(sys.mesh.vertices[v]));
        }
    }
    if new_values.is_empty() {
        return Err(Error::UnknownMarker(format!("no vertex carries the {marker} marker")));
    }
    let mut out = sys.clone();
    let mut fixed: Vec<Option<f64>> = vec![None; out.n_dofs()];
    for (&d, &val) in &new_values {
        if let Some(&old) = sys.constrained.get(&d) {
            if old != val {
                return Err(Error::DegenerateInput(format!(
                    "dof {d} is already constrained to {old}, cannot set {val}"
                )));
            }
            continue;
        }
        fixed[d] = Some(val);
    }
    let a = &mut out.matrix;
    for i in 0..a.n {
        let range = a.row_ptr[i]..a.row_ptr[i + 1];
        if let Some(val) = fixed[i] {
            for k in range {
                a.values[k] = if a.col_idx[k] == i { 1.0 } else { 0.0 };
            }
            out.rhs[i] = val;
            continue;
        }
        if sys.constrained.contains_key(&i) {
            continue;
        }
        for k in range {
            if let Some(val) = fixed[a.col_idx[k]] {
                out.rhs[i] -= a.values[k] * val;
                a.values[k] = 0.0;
            }
        }
    }
    for (d, val) in fixed.iter().enumerate() {
        if let Some(val) = val {
            out.constrained.insert(d, *val);
        }
    }
    Ok(out)
}

/// Merges each periodic pair into one dof. Must precede Dirichlet constraints.
pub fn apply_periodic(sys: &LinearSystem, pairs: &[(usize, usize)]) -> Result<LinearSystem> {
    if !sys.constrained.is_empty() {
        return Err(Error::Pairing("periodic merging must precede Dirichlet constraints".into()));
    }
    let n_vert = sys.mesh.vertices.len();
    let mut rep: Vec<usize> = (0..n_vert).collect();
    let mut role = vec![0u8; n_vert];
    for &(l, r) in pairs {
        if l >= n_vert || r >= n_vert || l == r {
            return Err(Error::Pairing(format!("bad pair ({l}, {r})")));
        }
        if role[l] != 0 || role[r] != 0 {
            return Err(Error::Pairing(format!("pairs are not bijective at ({l}, {r})")));
        }
        role[l] = 1;
        role[r] = 2;
        rep[r] = l;
    }
    // compact numbering of representatives, in vertex order
    let mut new_of_rep = vec![usize::MAX; n_vert];
    let mut next = 0;
    for v in 0..n_vert {
        if rep[v] == v {
            new_of_rep[v] = next;
            next += 1;
        }
    }
    let vertex_to_dof: Vec<usize> = (0..n_vert).map(|v| new_of_rep[rep[v]]).collect();
    let mut old_to_new = vec![usize::MAX; sys.n_dofs()];
    for v in 0..n_vert {
        let old = sys.vertex_to_dof[v];
        let new = vertex_to_dof[v];
        if old_to_new[old] != usize::MAX && old_to_new[old] != new {
            return Err(Error::Pairing("pairing conflicts with an earlier merge".into()));
        }
        old_to_new[old] = new;
    }
    let triplets: Vec<(usize, usize, f64)> = sys
        .matrix
        .triplets()
        .into_iter()
        .map(|(i, j, v)| (old_to_new[i], old_to_new[j], v))
        .collect();
    let mut rhs = vec![0.0; next];
    for (old, &val) in sys.rhs.iter().enumerate() {
        rhs[old_to_new[old]] += val;
    }
    Ok(LinearSystem {
        mesh: Arc::clone(&sys.mesh),
        matrix: CsrMatrix::from_triplets(next, &triplets),
        rhs,
        vertex_to_dof,
        constrained: BTreeMap::new(),
    })
}
