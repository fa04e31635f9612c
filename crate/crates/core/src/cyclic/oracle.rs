//! Brute-force check of the rank criterion on small symmetric matrices:
//! the probes are jointly cyclic exactly when every eigenspace pairing
//! matrix has full row rank.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::rank_tol;
use crate::error::{Error, Result};
use crate::spectral::cluster;

/// Largest matrix the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 64;

/// Random symmetric matrix with prescribed eigenvalue multiplicities.
#[derive(Debug, Clone)]
pub struct PlantedMatrix {
    pub matrix: DMatrix<f64>,
    /// Distinct eigenvalues, descending.
    pub values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Orthonormal eigenbasis of each eigenspace, in `values` order.
    pub bases: Vec<DMatrix<f64>>,
}

impl PlantedMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_multiplicity(&self) -> usize {
        self.multiplicities.iter().copied().max().unwrap_or(0)
    }
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `Q·diag(values)·Qᵀ` with a random orthogonal `Q` (QR of a random
/// matrix). Multiplicities are drawn from `1..=max_mult`; distinct
/// eigenvalues are spaced by at least 0.1.
pub fn planted_symmetric<R: Rng>(rng: &mut R, dim: usize, max_mult: usize) -> Result<PlantedMatrix> {
    if dim == 0 || dim > MAX_ORACLE_DIM || max_mult == 0 {
        return Err(Error::InvalidParameter(format!("planted matrix needs 1 <= dim <= {MAX_ORACLE_DIM}, max_mult >= 1")));
    }
    let mut multiplicities = Vec::new();
    let mut left = dim;
    while left > 0 {
        let m = rng.random_range(1..=max_mult.min(left));
        multiplicities.push(m);
        left -= m;
    }
    let mut values: Vec<f64> = (0..multiplicities.len())
        .map(|i| 0.15 * i as f64 + rng.random_range(0.0..0.05))
        .collect();
    let shift = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= shift);
    values.reverse();

    let q = random_matrix(rng, dim, dim).qr().q();
    let mut bases = Vec::new();
    let mut diag = Vec::with_capacity(dim);
    let mut col = 0;
    for (&v, &m) in values.iter().zip(&multiplicities) {
        bases.push(q.columns(col, m).into_owned());
        diag.extend(std::iter::repeat_n(v, m));
        col += m;
    }
    let matrix = &q * DMatrix::from_diagonal(&DVector::from_vec(diag)) * q.transpose();
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(PlantedMatrix { matrix, values, multiplicities, bases })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCluster {
    pub value: f64,
    pub multiplicity: usize,
    /// Rank of the pairing matrix between the eigenspace and the vectors.
    pub rank: usize,
    /// Dimension of the part of the eigenspace orthogonal to the Krylov span.
    pub eigenspace_complement: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub dimension: usize,
    pub vectors: usize,
    pub krylov_dim: usize,
    pub full_span: bool,
    /// Every eigenspace pairing matrix has full row rank.
    pub criterion_verdict: bool,
    pub agreement: bool,
    pub clusters: Vec<OracleCluster>,
}

/// Orthonormal basis of `Σ_k span{ξ_k, Kξ_k, K²ξ_k, …}`.
///
/// Each chain is extended by Arnoldi steps with two Gram–Schmidt passes and
/// stops once the next vector lies in the span at relative tolerance `tol`;
/// this spans the same space as the stacked Krylov block but avoids its
/// Vandermonde-type conditioning.
fn krylov_basis(k: &DMatrix<f64>, xis: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let n = k.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for xi in xis {
        let mut v = xi.clone();
        while basis.len() < n {
            let scale = v.norm();
            if scale == 0.0 {
                break;
            }
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&v);
                    v.axpy(-c, b, 1.0);
                }
            }
            let r = v.norm();
            if r <= tol * scale {
                break;
            }
            let q = v / r;
            v = k * &q;
            basis.push(q);
        }
    }
    basis
}

/// Compare the Krylov span of `xis` under `k` with the eigenspace rank
/// criterion.
///
/// Eigenvalues of `k` are grouped at `√tol·‖k‖₂`, which separates exact
/// degeneracy (round-off level) from genuinely distinct values.
pub fn krylov_oracle(k: &DMatrix<f64>, xis: &[DVector<f64>], tol: f64) -> Result<OracleReport> {
    let n = k.nrows();
    if k.ncols() != n || n == 0 {
        return Err(Error::InvalidParameter("matrix must be square and non-empty".into()));
    }
    if n > MAX_ORACLE_DIM {
        return Err(Error::InvalidParameter(format!("oracle dimension {n} exceeds {MAX_ORACLE_DIM}")));
    }
    if !(tol > 0.0) || xis.is_empty() {
        return Err(Error::InvalidParameter("tolerance must be positive and at least one vector given".into()));
    }
    if let Some(bad) = xis.iter().find(|x| x.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    let norm = k.norm();
    let residual = (k - k.transpose()).norm() / norm.max(f64::MIN_POSITIVE);
    if residual > tol {
        return Err(Error::NotSymmetric { residual });
    }

    let eig = SymmetricEigen::new(k.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let spectral_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let groups = cluster(&values, tol.sqrt() * spectral_norm.max(f64::MIN_POSITIVE));

    let basis = krylov_basis(k, xis, tol);
    let krylov_dim = basis.len();
    let q = DMatrix::from_columns(&basis);
    let xi_mat = DMatrix::from_columns(xis);

    let clusters = groups
        .iter()
        .map(|g| {
            let phi = DMatrix::from_fn(n, g.multiplicity, |i, j| eig.eigenvectors[(i, order[g.start + j])]);
            let a = phi.transpose() * &xi_mat;
            let rank = rank_tol(&a, tol)?;
            let captured = if krylov_dim == 0 { 0 } else { rank_tol(&(q.transpose() * &phi), tol)? };
            Ok(OracleCluster {
                value: g.value,
                multiplicity: g.multiplicity,
                rank,
                eigenspace_complement: g.multiplicity - captured,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let full_span = krylov_dim == n;
    let criterion_verdict = clusters.iter().all(|c| c.rank == c.multiplicity);
    Ok(OracleReport {
        dimension: n,
        vectors: xis.len(),
        krylov_dim,
        full_span,
        criterion_verdict,
        agreement: full_span == criterion_verdict,
        clusters,
    })
}

/// How the vectors of a trial were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    /// As many random vectors as the spectral multiplicity.
    Generic,
    /// One vector fewer than the spectral multiplicity.
    TooFew,
    /// Random vectors with a common direction of one eigenspace removed.
    Deficient,
    /// `ξ_k = Σ_j c_jk·φ_jk` over eigenspaces, all coefficients non-zero.
    Canonical,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleTrial {
    pub trial: usize,
    pub kind: TrialKind,
    pub multiplicities: Vec<usize>,
    pub report: OracleReport,
    /// Clusters with more members than vectors passed the structural check
    /// (no full span, complement at least `N_λ − M`); `None` when no
    /// cluster exceeds the vector count.
    pub few_vectors_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceSummary {
    pub seed: u64,
    pub tol: f64,
    pub trials: Vec<OracleTrial>,
    pub agreements: usize,
    pub few_vector_cases: usize,
    pub few_vector_exceptions: usize,
}

impl EquivalenceSummary {
    pub fn all_agree(&self) -> bool {
        self.agreements == self.trials.len()
    }
}

fn trial_vectors(rng: &mut ChaCha8Rng, planted: &PlantedMatrix, kind: TrialKind) -> Vec<DVector<f64>> {
    let n = planted.dim();
    let big = planted.max_multiplicity();
    let random = |rng: &mut ChaCha8Rng, m: usize| -> Vec<DVector<f64>> {
        (0..m).map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect()
    };
    match kind {
        TrialKind::Generic => random(rng, big),
        TrialKind::TooFew => random(rng, big - 1),
        TrialKind::Deficient => {
            let mut xs = random(rng, big);
            let c = planted.multiplicities.iter().position(|&m| m == big).unwrap_or(0);
            let basis = &planted.bases[c];
            let u = basis * DVector::from_fn(basis.ncols(), |_, _| rng.random_range(-1.0..1.0));
            let u = u.normalize();
            for x in &mut xs {
                let d = u.dot(x);
                x.axpy(-d, &u, 1.0);
            }
            xs
        }
        TrialKind::Canonical => (0..big)
            .map(|k| {
                let mut x = DVector::zeros(n);
                for basis in planted.bases.iter().filter(|b| b.ncols() > k) {
                    let c = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                    x.axpy(c, &basis.column(k), 1.0);
                }
                x
            })
            .collect(),
    }
}

/// Seeded batch of random planted matrices (dimension `2..=max_dim`,
/// multiplicities up to `max_mult`) with vectors of every [`TrialKind`].
pub fn equivalence_trials(trials: usize, seed: u64, max_dim: usize, max_mult: usize, tol: f64) -> Result<EquivalenceSummary> {
    if trials == 0 || !(2..=MAX_ORACLE_DIM).contains(&max_dim) || max_mult == 0 {
        return Err(Error::InvalidParameter("need trials >= 1, 2 <= max_dim <= 64, max_mult >= 1".into()));
    }
    const KINDS: [TrialKind; 4] = [TrialKind::Generic, TrialKind::TooFew, TrialKind::Deficient, TrialKind::Canonical];
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let dim = rng.random_range(2..=max_dim);
        let mut planted = planted_symmetric(&mut rng, dim, max_mult)?;
        let mut kind = KINDS[t % KINDS.len()];
        if kind == TrialKind::TooFew || kind == TrialKind::Deficient {
            // Needs a repeated eigenvalue to be meaningful.
            let mut tries = 0;
            while planted.max_multiplicity() < 2 && tries < 100 {
                planted = planted_symmetric(&mut rng, dim, max_mult)?;
                tries += 1;
            }
            if planted.max_multiplicity() < 2 {
                kind = TrialKind::Generic;
            }
        }
        let xis = trial_vectors(&mut rng, &planted, kind);
        let report = krylov_oracle(&planted.matrix, &xis, tol)?;
        let m = xis.len();
        let few: Vec<&OracleCluster> = report.clusters.iter().filter(|c| c.multiplicity > m).collect();
        let few_vectors_ok = (!few.is_empty()).then(|| {
            !report.full_span && few.iter().all(|c| c.rank <= m && c.eigenspace_complement >= c.multiplicity - m)
        });
        out.push(OracleTrial { trial: t, kind, multiplicities: planted.multiplicities, report, few_vectors_ok });
    }
    let agreements = out.iter().filter(|t| t.report.agreement).count();
    let few_vector_cases = out.iter().filter(|t| t.few_vectors_ok.is_some()).count();
    let few_vector_exceptions = out.iter().filter(|t| t.few_vectors_ok == Some(false)).count();
    Ok(EquivalenceSummary { seed, tol, trials: out, agreements, few_vector_cases, few_vector_exceptions })
}
