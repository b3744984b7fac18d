//! Sparse direct LU for small systems, ILU(0)-preconditioned GMRES otherwise.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::SparseColMat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::{norm2, CsrMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative residual ‖b − Ax‖/‖b‖ required on return.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Systems with at most this many dofs are factorized directly.
    pub direct_threshold: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 5000,
            restart: 200,
            direct_threshold: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    DirectLu,
    GmresIlu0,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolverMethod,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Incomplete LU with the sparsity of the matrix; unit lower factor implied.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::SolverFailure {
                    iterations: 0,
                    residual: f64::NAN,
                    history: vec![],
                });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col_idx[k]] = k;
            }
            for k in start..end {
                let col = lu.col_idx[k];
                if col >= i {
                    break;
                }
                let pivot = lu.values[diag[col]];
                let factor = lu.values[k] / pivot;
                lu.values[k] = factor;
                for m in diag[col] + 1..lu.row_ptr[col + 1] {
                    let p = pos[lu.col_idx[m]];
                    if p != usize::MAX {
                        lu.values[p] -= factor * lu.values[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 || !lu.values[diag[i]].is_finite() {
                return Err(Error::SolverFailure {
                    iterations: 0,
                    residual: f64::NAN,
                    history: vec![],
                });
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// z = (LU)⁻¹ r
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let a = &self.lu;
        for i in 0..a.n {
            let mut s = r[i];
            for k in a.row_ptr[i]..self.diag[i] {
                s -= a.values[k] * z[a.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..a.n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..a.row_ptr[i + 1] {
                s -= a.values[k] * z[a.col_idx[k]];
            }
            z[i] = s / a.values[self.diag[i]];
        }
    }
}

/// Right-preconditioned restarted GMRES. Returns the residual history
/// (relative, one entry per inner iteration) inside the error on failure.
pub fn gmres(a: &CsrMatrix, b: &[f64], x: &mut [f64], m: &Ilu0, opts: &SolveOptions) -> Result<SolveReport> {
    let n = a.n;
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport {
            method: SolverMethod::GmresIlu0,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let restart = opts.restart.max(2);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    loop {
        a.matvec(x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let beta = norm2(&r);
        let rel = beta / b_norm;
        if rel <= opts.tol {
            return Ok(SolveReport {
                method: SolverMethod::GmresIlu0,
                iterations,
                relative_residual: rel,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::SolverFailure {
                iterations,
                residual: rel,
                history,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            m.apply(&v[k], &mut z);
            a.matvec(&z, &mut w);
            for (j, vj) in v.iter().enumerate() {
                let hij: f64 = w.iter().zip(vj).map(|(a, b)| a * b).sum();
                h[j][k] = hij;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hij * vi);
            }
            let h_next = norm2(&w);
            h[k + 1][k] = h_next;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                return Err(Error::SolverFailure {
                    iterations,
                    residual: rel,
                    history,
                });
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            let est = g[k + 1].abs() / b_norm;
            history.push(est);
            if est <= 0.5 * opts.tol || h_next == 0.0 || iterations >= opts.max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / h_next).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            update.iter_mut().zip(&v[j]).for_each(|(u, vj)| *u += yj * vj);
        }
        m.apply(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
}

enum Kind {
    Direct(Lu<usize, f64>),
    Iterative(Ilu0),
}

/// A matrix prepared for repeated solves with different right-hand sides.
pub struct Factorization {
    matrix: CsrMatrix,
    kind: Kind,
    opts: SolveOptions,
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| q - p).collect();
    let bn = norm2(b);
    if bn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bn
    }
}

impl Factorization {
    pub fn new(matrix: &CsrMatrix, opts: &SolveOptions) -> Result<Self> {
        let kind = if matrix.n <= opts.direct_threshold {
            let triplets = matrix.triplets();
            let a = SparseColMat::<usize, f64>::try_new_from_triplets(matrix.n, matrix.n, &triplets)
                .map_err(|e| Error::DegenerateInput(format!("sparse matrix construction failed: {e:?}")))?;
            let lu = a.sp_lu().map_err(|_| Error::SolverFailure {
                iterations: 0,
                residual: f64::NAN,
                history: vec![],
            })?;
            Kind::Direct(lu)
        } else {
            Kind::Iterative(Ilu0::new(matrix)?)
        };
        Ok(Factorization {
            matrix: matrix.clone(),
            kind,
            opts: opts.clone(),
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.matrix.n;
        match &self.kind {
            Kind::Direct(lu) => {
                let lu_solve = |rhs: &[f64]| -> Vec<f64> {
                    let mut col = Col::<f64>::from_fn(n, |i| rhs[i]);
                    lu.solve_in_place(col.as_mut());
                    (0..n).map(|i| col[i]).collect()
                };
                let mut x = lu_solve(b);
                let mut rel = relative_residual(&self.matrix, &x, b);
                let mut history = vec![rel];
                let mut steps = 0;
                // iterative refinement for the occasional badly scaled pivot
                while !(rel <= self.opts.tol) && steps < 3 {
                    let ax = self.matrix.mul(&x);
                    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| q - p).collect();
                    let dx = lu_solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                    rel = relative_residual(&self.matrix, &x, b);
                    history.push(rel);
                    steps += 1;
                }
                if !(rel <= self.opts.tol) {
                    return Err(Error::SolverFailure {
                        iterations: steps,
                        residual: rel,
                        history,
                    });
                }
                Ok((
                    x,
                    SolveReport {
                        method: SolverMethod::DirectLu,
                        iterations: steps,
                        relative_residual: rel,
                    },
                ))
            }
            Kind::Iterative(ilu) => {
                let mut x = vec![0.0; n];
                let report = gmres(&self.matrix, b, &mut x, ilu, &self.opts)?;
                let rel = relative_residual(&self.matrix, &x, b);
                if !(rel <= self.opts.tol) {
                    return Err(Error::SolverFailure {
                        iterations: report.iterations,
                        residual: rel,
                        history: vec![report.relative_residual, rel],
                    });
                }
                Ok((
                    x,
                    SolveReport {
                        relative_residual: rel,
                        ..report
                    },
                ))
            }
        }
    }
}
