//! Probe densities generated by exterior points, the pairing matrices
//! `A_λ` between probes and eigenspaces, and the rank / `G_λ` criterion for
//! a family of vectors to be jointly cyclic.

mod oracle;
mod sampler;

use std::f64::consts::PI;

use faer::Mat;
use nalgebra::{DMatrix, Vector3};
use serde::Serialize;

pub use oracle::{
    equivalence_trials, krylov_oracle, planted_symmetric, EquivalenceSummary, OracleCluster, OracleReport, OracleTrial, PlantedMatrix, TrialKind,
};
pub use sampler::{
    coverage_sampler, cyclicity_sampler, eigenmode_coverage, probe_map, shell_point, CoverageReport, CoverageSample,
    ClusterCoverage, ClusterVerdict, CyclicReport, ProbeMapOptions, ProbeMapRow, SampleRecord, SamplerOptions,
};

use crate::assembly::{Discretization, OperatorSet};
use crate::error::{Error, Result};
use crate::spectral::{check_exterior, eval_exterior, Solved};

/// Default relative rank tolerance for curves.
pub const RANK_TOL_2D: f64 = 1e-8;
/// Default relative rank tolerance for surfaces.
pub const RANK_TOL_3D: f64 = 1e-6;

pub fn default_rank_tol(dim: usize) -> f64 {
    if dim == 2 {
        RANK_TOL_2D
    } else {
        RANK_TOL_3D
    }
}

/// Exterior source point `z` with a unit direction `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub z: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Probe {
    /// `v` is normalized; the zero vector is rejected.
    pub fn new(z: Vector3<f64>, v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() || !z.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("probe direction must be a finite non-zero vector".into()));
        }
        Ok(Probe { z, v: v / norm })
    }
}

/// `q_z(x) = v·∇_zΓ(z − x)` at every node.
pub fn q_density(disc: &Discretization, probe: &Probe) -> Result<Vec<f64>> {
    check_exterior(disc, &probe.z)?;
    Ok(q_values(disc, probe))
}

fn q_values(disc: &Discretization, probe: &Probe) -> Vec<f64> {
    let two_d = disc.dimension() == 2;
    disc.nodes
        .iter()
        .map(|x| {
            let d = probe.z - x;
            let r2 = d.norm_squared();
            if two_d {
                probe.v.dot(&d) / (2.0 * PI * r2)
            } else {
                probe.v.dot(&d) / (4.0 * PI * r2 * r2.sqrt())
            }
        })
        .collect()
}

/// Pairings of one probe density with a set of modes.
#[derive(Debug, Clone, Serialize)]
pub struct ModePairing {
    /// `⟨q, φ_j⟩ = qᵀ·P·φ_j`.
    pub pairings: Vec<f64>,
    /// `v·∇S[ψ_j](z)` with `ψ_j = S[φ_j]` on the boundary, computed by
    /// exterior quadrature.
    pub potential_path: Vec<f64>,
    /// Observed sign relating the two: `pairing = sign · potential_path`.
    pub sign: f64,
}

/// Pair `q` (values at the nodes) with the columns of `modes` in the `P`
/// inner product, and cross-check through the exterior potential of the
/// traces `S[φ_j]`.
pub fn pair_with_modes(
    ops: &OperatorSet,
    disc: &Discretization,
    probe: &Probe,
    q: &[f64],
    modes: &Mat<f64>,
) -> Result<ModePairing> {
    let n = ops.len();
    if q.len() != n || modes.nrows() != n || disc.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.len().min(modes.nrows()) });
    }
    let pq: Vec<f64> = (0..n).map(|i| (0..n).map(|j| ops.p[(i, j)] * q[j]).sum()).collect();
    let mut pairings = Vec::with_capacity(modes.ncols());
    let mut potential_path = Vec::with_capacity(modes.ncols());
    for k in 0..modes.ncols() {
        pairings.push((0..n).map(|i| modes[(i, k)] * pq[i]).sum::<f64>());
        let psi: Vec<f64> = (0..n).map(|i| (0..n).map(|j| ops.s[(i, j)] * modes[(j, k)]).sum()).collect();
        potential_path.push(eval_exterior(disc, &psi, &probe.z, &probe.v)?.directional_derivative);
    }
    let dot: f64 = pairings.iter().zip(&potential_path).map(|(a, b)| a * b).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    Ok(ModePairing { pairings, potential_path, sign })
}

/// `A_λ`: rows are the P-orthonormal basis of one cluster, columns probes.
#[derive(Debug, Clone, Serialize)]
pub struct PairingMatrix {
    pub cluster: usize,
    pub lambda: f64,
    pub n_lambda: usize,
    pub probes: Vec<Probe>,
    /// Row-major `N_λ × N`.
    pub a: Vec<Vec<f64>>,
}

impl PairingMatrix {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_lambda, self.probes.len(), |i, j| self.a[i][j])
    }

    /// Euclidean norm of each row. Individual rows depend on the choice of
    /// cluster basis; their sum of squares does not.
    pub fn row_norms(&self) -> Vec<f64> {
        self.a.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }
}

/// `Φ_cᵀ·P` for the listed clusters, stacked: one row per mode.
pub(crate) fn projector(solved: &Solved, clusters: &[usize]) -> (Mat<f64>, Vec<std::ops::Range<usize>>) {
    let mut ranges = Vec::new();
    let mut cols = Vec::new();
    for &c in clusters {
        let r = solved.spectrum.clusters[c].range();
        let start = cols.len();
        cols.extend(r.clone());
        ranges.push(start..cols.len());
    }
    let n = solved.spectrum.len();
    let phi = Mat::from_fn(n, cols.len(), |i, k| solved.spectrum.eigenvectors[(i, cols[k])]);
    (phi.transpose() * &solved.ops.p, ranges)
}

fn apply(m: &Mat<f64>, rows: std::ops::Range<usize>, q: &[f64]) -> Vec<f64> {
    rows.map(|r| (0..q.len()).map(|i| m[(r, i)] * q[i]).sum()).collect()
}

/// Build `A_λ` for one cluster and a list of probes.
pub fn build_a(solved: &Solved, cluster: usize, probes: &[Probe]) -> Result<PairingMatrix> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter("at least one probe is required".into()));
    }
    let cl = solved
        .spectrum
        .clusters
        .get(cluster)
        .ok_or_else(|| Error::InvalidParameter(format!("cluster index {cluster} out of range")))?;
    let (m, ranges) = projector(solved, &[cluster]);
    let columns = probes
        .iter()
        .map(|p| Ok(apply(&m, ranges[0].clone(), &q_density(&solved.disc, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let a = (0..cl.multiplicity).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    Ok(PairingMatrix { cluster, lambda: cl.value, n_lambda: cl.multiplicity, probes: probes.to_vec(), a })
}

/// Number of singular values above `tol · σ_max`.
pub fn rank_tol(a: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("rank tolerance must be positive".into()));
    }
    if a.is_empty() {
        return Ok(0);
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * max).count())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// `G_λ = Σ (det A_m)²` over all maximal square column selections.
pub fn g_lambda(a: &DMatrix<f64>) -> Result<f64> {
    let (rows, cols) = a.shape();
    if rows > cols {
        return Err(Error::InvalidParameter(format!(
            "G is undefined with fewer probes ({cols}) than the multiplicity ({rows})"
        )));
    }
    if rows == 0 {
        return Ok(1.0);
    }
    Ok(combinations(cols, rows)
        .iter()
        .map(|sel| a.select_columns(sel.iter()).determinant().powi(2))
        .sum())
}

/// Whether `G` is numerically zero at relative tolerance `tol`.
///
/// `G` is compared with `E`, the sum of squared `(N_λ−1)`-minors of `A`:
/// by Cauchy–Binet `G/E = 1/Σ_i σ_i⁻²`, which lies within a factor `N_λ` of
/// `σ_min²`. The test `G ≤ tol²·‖A‖_F²·E` therefore agrees with
/// `rank_tol(A, tol) < N_λ` except when `σ_min/σ_max` is within a factor
/// `N_λ` of `tol`. A bare threshold on `G` cannot do this: `G` is a product
/// of `N_λ` squared singular values and is tiny for well-separated but
/// ill-conditioned full-rank matrices.
pub fn g_vanishes(g: f64, a: &DMatrix<f64>, tol: f64) -> bool {
    let (rows, cols) = a.shape();
    if rows == 0 {
        return false;
    }
    let row_sets = combinations(rows, rows - 1);
    let col_sets = combinations(cols, rows - 1);
    let e: f64 = row_sets
        .iter()
        .map(|r| {
            let sub = a.select_rows(r.iter());
            col_sets.iter().map(|c| sub.select_columns(c.iter()).determinant().powi(2)).sum::<f64>()
        })
        .sum();
    g <= tol * tol * a.norm_squared() * e
}
