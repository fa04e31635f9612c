//! Self-adjoint eigenproblem for `K*` in the `P` inner product, multiplicity
//! clusters, and the boundary fields of single layer potentials.

mod exterior;
mod fields;

use faer::{Mat, Side};
use serde::Serialize;

pub use exterior::{check_exterior, eval_exterior, winding_number, ExteriorValue};
pub use fields::{
    boundary_fields, centroid_gradient, p1_tangential_gradient, tangential_gradient, vertex_trace, BoundaryFields,
};

use crate::assembly::{assemble_operators, discretize, Discretization, OperatorSet};
use crate::error::{Error, Result};
use crate::geometry::Shape;

/// Default degeneracy tolerance for 2D Nyström spectra.
pub const DEGENERACY_TOL_2D: f64 = 1e-6;
/// Default degeneracy tolerance for 3D P0 Galerkin spectra.
pub const DEGENERACY_TOL_3D: f64 = 0.01;

pub fn default_degeneracy_tol(dim: usize) -> f64 {
    if dim == 2 {
        DEGENERACY_TOL_2D
    } else {
        DEGENERACY_TOL_3D
    }
}

/// Consecutive run of (numerically) equal eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub start: usize,
    pub multiplicity: usize,
    /// Mean of the member eigenvalues.
    pub value: f64,
}

impl Cluster {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.multiplicity
    }
}

/// Eigenvalues in descending order with `P`-orthonormal eigenvectors
/// (columns of `eigenvectors`).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<f64>,
    pub clusters: Vec<Cluster>,
    pub tol: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn recluster(&mut self, tol: f64) {
        self.clusters = cluster(&self.eigenvalues, tol);
        self.tol = tol;
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.col(j).iter().copied().collect()
    }

    /// Eigenvectors of cluster `c` as columns.
    pub fn cluster_basis(&self, c: usize) -> Mat<f64> {
        let r = self.clusters[c].range();
        self.eigenvectors.subcols(r.start, r.len()).to_owned()
    }

    /// Index of the cluster whose value is closest to `target`.
    pub fn nearest_cluster(&self, target: f64) -> Option<usize> {
        self.clusters
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.value - target).abs().total_cmp(&(b.1.value - target).abs()))
            .map(|(i, _)| i)
    }

    /// `‖ΦᵀPΦ − I‖_max`.
    pub fn orthonormality_residual(&self, p: &Mat<f64>) -> f64 {
        let g = self.eigenvectors.transpose() * (p * &self.eigenvectors);
        let mut worst: f64 = 0.0;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `max_j ‖sym(PK*)φ_j − λ_j Pφ_j‖ / ‖Pφ_j‖`.
    pub fn eigen_residual(&self, ops: &OperatorSet) -> f64 {
        let a = ops.symmetric_pk();
        let av = &a * &self.eigenvectors;
        let pv = &ops.p * &self.eigenvectors;
        (0..self.len())
            .map(|j| {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..self.len() {
                    let r = av[(i, j)] - self.eigenvalues[j] * pv[(i, j)];
                    num += r * r;
                    den += pv[(i, j)] * pv[(i, j)];
                }
                (num / den).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Greedy gap clustering of values sorted in descending order: consecutive
/// values within `tol` share a cluster.
pub fn cluster(sorted_desc: &[f64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut start = 0;
    for i in 1..=sorted_desc.len() {
        let split = i == sorted_desc.len() || (sorted_desc[i - 1] - sorted_desc[i]).abs() > tol;
        if split {
            let members = &sorted_desc[start..i];
            out.push(Cluster {
                start,
                multiplicity: members.len(),
                value: members.iter().sum::<f64>() / members.len() as f64,
            });
            start = i;
        }
    }
    out
}

/// `C = L⁻¹·A·L⁻ᵀ` for symmetric `A` and lower-triangular `L`.
fn whiten(l: &Mat<f64>, a: &Mat<f64>) -> Mat<f64> {
    let mut x = a.clone();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut c = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    crate::assembly::symmetrize(&c)
}

fn check_finite(m: &Mat<f64>, what: &'static str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite(what));
            }
        }
    }
    Ok(())
}

/// Solve `sym(PK*)·φ = λ·P·φ` by Cholesky whitening.
///
/// Eigenvalues come out descending; each eigenvector has its first
/// largest-magnitude entry positive. Clusters use the dimension's default
/// degeneracy tolerance.
pub fn np_eigensolve(ops: &OperatorSet) -> Result<Spectrum> {
    let a = ops.symmetric_pk();
    check_finite(&a, "P·K*")?;
    let c = whiten(&ops.chol, &a);
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let n = c.nrows();
    let values_asc: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let mut vectors = evd.U().to_owned();
    // φ = L⁻ᵀ y
    ops.chol.transpose().solve_upper_triangular_in_place(vectors.as_mut());

    let eigenvalues: Vec<f64> = values_asc.iter().rev().copied().collect();
    let eigenvectors = Mat::from_fn(n, n, |i, j| vectors[(i, n - 1 - j)]);
    let mut eigenvectors = eigenvectors;
    for j in 0..n {
        let mut pivot = 0;
        for i in 1..n {
            if eigenvectors[(i, j)].abs() > eigenvectors[(pivot, j)].abs() {
                pivot = i;
            }
        }
        if eigenvectors[(pivot, j)] < 0.0 {
            for i in 0..n {
                eigenvectors[(i, j)] = -eigenvectors[(i, j)];
            }
        }
    }
    let tol = default_degeneracy_tol(ops.dim);
    let clusters = cluster(&eigenvalues, tol);
    Ok(Spectrum { eigenvalues, eigenvectors, clusters, tol })
}

/// Eigenvalues only (descending), skipping eigenvectors.
pub fn np_eigenvalues(ops: &OperatorSet) -> Result<Vec<f64>> {
    let a = ops.symmetric_pk();
    check_finite(&a, "P·K*")?;
    let c = whiten(&ops.chol, &a);
    let mut values = c
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    values.reverse();
    Ok(values)
}

/// Discretization, operators and spectrum of one shape.
#[derive(Debug, Clone)]
pub struct Solved {
    pub disc: Discretization,
    pub ops: OperatorSet,
    pub spectrum: Spectrum,
}

impl Solved {
    pub fn dimension(&self) -> usize {
        self.disc.dimension()
    }
}

/// Discretize, assemble and eigensolve in one go. `resolution` is the node
/// count for curves and ignored for meshes.
pub fn solve(shape: &Shape, resolution: usize) -> Result<Solved> {
    let disc = discretize(shape, resolution)?;
    let ops = assemble_operators(&disc)?;
    let spectrum = np_eigensolve(&ops)?;
    Ok(Solved { disc, ops, spectrum })
}
