use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use super::hadamard::coefficients;
use crate::error::{Error, Result};
use crate::geometry::{perturb_normal, PerturbationField, Shape};
use crate::spectral::{solve, Solved};

/// Minimum projection of a tracked eigenvector onto the reference cluster
/// space (and minimum ± pairing overlap).
pub const MIN_OVERLAP: f64 = 0.5;

/// One branch followed through `±h`.
#[derive(Debug, Clone, Serialize)]
pub struct TrackedBranch {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Norm of the projection onto the reference cluster space at `+h` / `−h`.
    pub projection_plus: f64,
    pub projection_minus: f64,
    /// `|⟨e(+h), e(−h)⟩|` within the reference cluster space.
    pub pairing_overlap: f64,
    pub slope: f64,
}

/// Central differences at one step size.
#[derive(Debug, Clone, Serialize)]
pub struct FdLevel {
    pub h: f64,
    pub branches: Vec<TrackedBranch>,
    /// Branch slopes, ascending.
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdSlopes {
    pub cluster: usize,
    pub lambda: f64,
    pub levels: Vec<FdLevel>,
    /// Extrapolated slopes from the two smallest steps (ascending), assuming
    /// an `O(h²)` central-difference error.
    pub richardson: Vec<f64>,
    /// Successive error ratios `(D(h₃) − D(h₂)) / (D(h₂) − D(h₁))` per
    /// branch; only present with three or more step sizes. Central
    /// differences with doubled steps give ≈ 4.
    pub error_ratios: Option<Vec<f64>>,
}

impl FdSlopes {
    /// Best available estimate: Richardson if there are two levels.
    pub fn best(&self) -> &[f64] {
        if self.levels.len() >= 2 {
            &self.richardson
        } else {
            &self.levels[0].slopes
        }
    }
}

/// Eigenvectors of the perturbed problem that continue the reference
/// cluster: the `N` candidates with largest projection, as (index, unit
/// coefficient vector, projection norm).
fn track(reference: &Solved, basis: &Mat<f64>, perturbed: &Solved, cluster: usize, h: f64) -> Result<Vec<(usize, Vec<f64>, f64)>> {
    let cl = &reference.spectrum.clusters[cluster];
    let n = perturbed.spectrum.len();
    let lo = cl.start.saturating_sub(cl.multiplicity);
    let hi = (cl.start + 2 * cl.multiplicity).min(n);
    let mut candidates: Vec<(usize, Vec<f64>, f64)> = (lo..hi)
        .map(|j| {
            let c = coefficients(basis, &reference.ops.p, &perturbed.spectrum.vector(j));
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            (j, c.iter().map(|x| x / norm).collect(), norm)
        })
        .collect();
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    candidates.truncate(cl.multiplicity);
    let worst = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    if worst < MIN_OVERLAP {
        return Err(Error::BranchTracking { h, overlap: worst });
    }
    candidates.sort_by_key(|c| c.0);
    Ok(candidates)
}

/// Greedy maximal-overlap bijection between two sets of unit vectors.
pub(crate) fn greedy_pairing(left: &[Vec<f64>], right: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            let o = l.iter().zip(r).map(|(a, b)| a * b).sum::<f64>().abs();
            pairs.push((i, j, o));
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let (mut used_l, mut used_r) = (vec![false; left.len()], vec![false; right.len()]);
    let mut out = Vec::new();
    for (i, j, o) in pairs {
        if !used_l[i] && !used_r[j] {
            used_l[i] = true;
            used_r[j] = true;
            out.push((i, j, o));
        }
    }
    out.sort_by_key(|p| p.0);
    out
}

/// Central-difference slopes of the branches of `cluster` for each step in
/// `h_list`, recomputing the spectrum on `perturb_normal(shape, a, ±h)`.
pub fn fd_slopes(
    shape: &Shape,
    reference: &Solved,
    cluster: usize,
    field: &PerturbationField,
    h_list: &[f64],
    resolution: usize,
) -> Result<FdSlopes> {
    let cl = reference
        .spectrum
        .clusters
        .get(cluster)
        .ok_or_else(|| Error::InvalidParameter(format!("cluster index {cluster} out of range")))?
        .clone();
    if h_list.is_empty() || h_list.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidParameter("step sizes must be positive and finite".into()));
    }
    let mut hs = h_list.to_vec();
    hs.sort_by(f64::total_cmp);
    hs.dedup();

    let signed: Vec<f64> = hs.iter().flat_map(|&h| [h, -h]).collect();
    // Check every embedding before paying for any solve.
    let shapes = signed.iter().map(|&h| perturb_normal(shape, field, h)).collect::<Result<Vec<_>>>()?;
    let solved = shapes.par_iter().map(|s| solve(s, resolution)).collect::<Result<Vec<_>>>()?;

    let basis = reference.spectrum.cluster_basis(cluster);
    let mut levels = Vec::with_capacity(hs.len());
    for (k, &h) in hs.iter().enumerate() {
        let (plus, minus) = (&solved[2 * k], &solved[2 * k + 1]);
        let tp = track(reference, &basis, plus, cluster, h)?;
        let tm = track(reference, &basis, minus, cluster, -h)?;
        let left: Vec<_> = tp.iter().map(|t| t.1.clone()).collect();
        let right: Vec<_> = tm.iter().map(|t| t.1.clone()).collect();
        let mut branches = Vec::with_capacity(cl.multiplicity);
        for (i, j, overlap) in greedy_pairing(&left, &right) {
            if overlap < MIN_OVERLAP {
                return Err(Error::BranchTracking { h, overlap });
            }
            let lp = plus.spectrum.eigenvalues[tp[i].0];
            let lm = minus.spectrum.eigenvalues[tm[j].0];
            branches.push(TrackedBranch {
                lambda_plus: lp,
                lambda_minus: lm,
                projection_plus: tp[i].2,
                projection_minus: tm[j].2,
                pairing_overlap: overlap,
                slope: (lp - lm) / (2.0 * h),
            });
        }
        let mut slopes: Vec<f64> = branches.iter().map(|b| b.slope).collect();
        slopes.sort_by(f64::total_cmp);
        levels.push(FdLevel { h, branches, slopes });
    }

    let richardson = if levels.len() >= 2 {
        let (h1, h2) = (levels[0].h, levels[1].h);
        levels[0]
            .slopes
            .iter()
            .zip(&levels[1].slopes)
            .map(|(d1, d2)| (h2 * h2 * d1 - h1 * h1 * d2) / (h2 * h2 - h1 * h1))
            .collect()
    } else {
        levels[0].slopes.clone()
    };
    let error_ratios = (levels.len() >= 3).then(|| {
        (0..cl.multiplicity)
            .map(|b| (levels[2].slopes[b] - levels[1].slopes[b]) / (levels[1].slopes[b] - levels[0].slopes[b]))
            .collect()
    });
    Ok(FdSlopes { cluster, lambda: cl.value, levels, richardson, error_ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_is_a_bijection() {
        let s = 0.5f64.sqrt();
        let left = vec![vec![1.0, 0.0, 0.0], vec![0.0, s, s], vec![0.0, s, -s]];
        let right = vec![vec![0.0, -s, s], vec![0.0, 0.0, -1.0], vec![0.0, 0.8, 0.6]];
        let p = greedy_pairing(&left, &right);
        let mut seen: Vec<usize> = p.iter().map(|x| x.1).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
        assert_eq!(p[2].1, 0);
        assert!((p[2].2 - 1.0).abs() < 1e-12);
    }
}
