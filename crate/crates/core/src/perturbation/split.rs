use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perturb_normal, PerturbationField, Shape};
use crate::spectral::{cluster, solve, Solved};

/// Number of eigenvalues strictly inside `(lo, hi)`, counting multiplicity.
///
/// Intervals must sit inside `[−1/2, 1/2]`. When `hi = 1/2` the eigenvalue
/// `1/2` itself (the equilibrium density) lies on the boundary of the open
/// interval and is not counted, even if round-off puts it a hair below.
/// Any other eigenvalue within `tol` of an endpoint makes the count
/// ill-posed.
pub fn interval_count(eigenvalues: &[f64], lo: f64, hi: f64, tol: f64) -> Result<usize> {
    if !(lo < hi) || lo < -0.5 || hi > 0.5 || !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "interval ({lo}, {hi}) must satisfy -1/2 <= lo < hi <= 1/2 with tol >= 0"
        )));
    }
    let mut count = 0;
    let mut skipped_half = false;
    for &l in eigenvalues {
        if hi == 0.5 && !skipped_half && (l - 0.5).abs() <= tol {
            skipped_half = true;
            continue;
        }
        for endpoint in [lo, hi] {
            if (l - endpoint).abs() <= tol {
                return Err(Error::IllPosedInterval { endpoint, eigenvalue: l });
            }
        }
        if l > lo && l < hi {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Serialize)]
pub struct CountStability {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    /// `(h, count)` in sweep order.
    pub counts: Vec<(f64, usize)>,
    pub stable: bool,
}

/// Interval counts on `perturb_normal(shape, a, h)` for every `h` in the sweep.
pub fn count_stability(
    shape: &Shape,
    field: &PerturbationField,
    sweep: &[f64],
    interval: (f64, f64),
    tol: f64,
    resolution: usize,
) -> Result<CountStability> {
    let mut counts = Vec::with_capacity(sweep.len());
    for &h in sweep {
        let s = perturb_normal(shape, field, h)?;
        let solved = solve(&s, resolution)?;
        counts.push((h, interval_count(&solved.spectrum.eigenvalues, interval.0, interval.1, tol)?));
    }
    let stable = counts.windows(2).all(|w| w[0].1 == w[1].1);
    Ok(CountStability { lo: interval.0, hi: interval.1, tol, counts, stable })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitOptions {
    pub h: f64,
    /// Degeneracy tolerance for cluster detection and split verdicts.
    pub tol: f64,
    /// Only clusters with `|λ|` at least this large are analysed.
    pub min_abs: f64,
    /// Open intervals whose counts are reported before and after.
    #[serde(default)]
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSplit {
    pub value: f64,
    pub multiplicity: usize,
    pub width_before: f64,
    /// Perturbed eigenvalues at the same indices, descending.
    pub values_after: Vec<f64>,
    /// Consecutive gaps of `values_after`.
    pub gaps_after: Vec<f64>,
    pub width_after: f64,
    pub min_gap: f64,
    /// Every gap exceeds the tolerance.
    pub simple: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalCounts {
    pub lo: f64,
    pub hi: f64,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub h: f64,
    pub field: String,
    pub seed: Option<u64>,
    pub tol: f64,
    pub clusters: Vec<ClusterSplit>,
    pub counts: Vec<IntervalCounts>,
}

/// Compare cluster structure before and after the perturbation `h·a·n`.
///
/// The perturbed eigenvalues are read off at the baseline cluster indices,
/// which is valid while `h` is small against the gaps between clusters.
pub fn splitting_experiment(
    shape: &Shape,
    reference: &Solved,
    field: &PerturbationField,
    opts: &SplitOptions,
    resolution: usize,
) -> Result<SplitReport> {
    if !(opts.tol >= 0.0) {
        return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
    }
    let perturbed = if opts.h == 0.0 {
        reference.clone()
    } else {
        solve(&perturb_normal(shape, field, opts.h)?, resolution)?
    };
    let before = &reference.spectrum.eigenvalues;
    let after = &perturbed.spectrum.eigenvalues;
    let clusters = cluster(before, opts.tol)
        .into_iter()
        .filter(|c| c.value.abs() >= opts.min_abs)
        .map(|c| {
            let members = &before[c.range()];
            let values_after = after[c.range()].to_vec();
            let gaps_after: Vec<f64> = values_after.windows(2).map(|w| w[0] - w[1]).collect();
            let min_gap = gaps_after.iter().copied().fold(f64::INFINITY, f64::min);
            ClusterSplit {
                value: c.value,
                multiplicity: c.multiplicity,
                width_before: members[0] - members[members.len() - 1],
                width_after: values_after[0] - values_after[values_after.len() - 1],
                simple: gaps_after.iter().all(|&g| g > opts.tol),
                values_after,
                gaps_after,
                min_gap,
            }
        })
        .collect();
    let counts = opts
        .intervals
        .iter()
        .map(|&(lo, hi)| {
            Ok(IntervalCounts {
                lo,
                hi,
                before: interval_count(before, lo, hi, opts.tol)?,
                after: interval_count(after, lo, hi, opts.tol)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let seed = match field {
        PerturbationField::RandomBandlimited { seed, .. } => Some(*seed),
        _ => None,
    };
    Ok(SplitReport { h: opts.h, field: field.describe(), seed, tol: opts.tol, clusters, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ball_interval_counts() {
        let mut ev = vec![0.5];
        ev.extend([1.0 / 6.0; 3]);
        ev.extend([0.1; 5]);
        ev.extend([1.0 / 14.0; 7]);
        ev.extend([1.0 / 18.0; 9]);
        assert_eq!(interval_count(&ev, 0.08, 0.5, 0.005).unwrap(), 8);
        assert_eq!(interval_count(&ev, 0.45, 0.5, 0.005).unwrap(), 0);
        let mut rounded = ev.clone();
        rounded[0] = 0.5 - 1e-15;
        assert_eq!(interval_count(&rounded, 0.08, 0.5, 0.005).unwrap(), 8);
        assert!(matches!(
            interval_count(&ev, 0.1, 0.5, 0.005),
            Err(Error::IllPosedInterval { .. })
        ));
        assert!(interval_count(&ev, 0.3, 0.2, 0.0).is_err());
        assert!(interval_count(&ev, -0.6, 0.2, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn counts_are_additive(mut ev in proptest::collection::vec(-0.49f64..0.49, 1..30), cut in -0.4f64..0.4) {
            ev.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(ev.iter().all(|l| (l - cut).abs() > 1e-9));
            let whole = interval_count(&ev, -0.5, 0.5, 0.0).unwrap();
            let left = interval_count(&ev, -0.5, cut, 0.0).unwrap();
            let right = interval_count(&ev, cut, 0.5, 0.0).unwrap();
            prop_assert_eq!(whole, ev.len());
            prop_assert_eq!(left + right, whole);
        }
    }
}
