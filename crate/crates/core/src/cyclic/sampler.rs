use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply, g_lambda, g_vanishes, projector, q_values, rank_tol, Probe};
use crate::error::{Error, Result};
use crate::spectral::{check_exterior, Solved};

/// Settings shared by the random probe experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Clusters with `|λ|` below this are truncated away.
    pub min_abs_lambda: f64,
    pub samples: usize,
    pub seed: u64,
    /// Radii of the sampling shell around the boundary's centroid.
    pub shell: (f64, f64),
    /// Probe direction (normalized).
    pub direction: [f64; 3],
    /// Probes per sample; defaults to the largest retained multiplicity.
    #[serde(default)]
    pub probes: Option<usize>,
    pub rank_tol: f64,
}

/// Clusters kept after truncation, in spectrum order.
fn retained(solved: &Solved, min_abs: f64) -> Vec<usize> {
    (0..solved.spectrum.clusters.len())
        .filter(|&c| solved.spectrum.clusters[c].value.abs() >= min_abs)
        .collect()
}

fn centroid(solved: &Solved) -> Vector3<f64> {
    let d = &solved.disc;
    d.nodes.iter().zip(&d.weights).map(|(x, w)| x * *w).sum::<Vector3<f64>>() / d.measure()
}

/// Uniform point in the shell `r ∈ [r0, r1]` around `center` (a disc
/// annulus in the plane for curves).
pub fn shell_point<R: Rng>(rng: &mut R, dim: usize, center: &Vector3<f64>, shell: (f64, f64)) -> Vector3<f64> {
    let (r0, r1) = shell;
    let u: f64 = rng.random();
    if dim == 2 {
        let r = (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt();
        let t = 2.0 * PI * rng.random::<f64>();
        center + Vector3::new(r * t.cos(), r * t.sin(), 0.0)
    } else {
        let r = (r0.powi(3) + u * (r1.powi(3) - r0.powi(3))).cbrt();
        let z = 2.0 * rng.random::<f64>() - 1.0;
        let t = 2.0 * PI * rng.random::<f64>();
        let s = (1.0 - z * z).max(0.0).sqrt();
        center + Vector3::new(s * t.cos(), s * t.sin(), z) * r
    }
}

fn check_shell(solved: &Solved, center: &Vector3<f64>, shell: (f64, f64)) -> Result<()> {
    let (r0, r1) = shell;
    if !(r0 > 0.0 && r1 >= r0 && r1.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid probe shell [{r0}, {r1}]")));
    }
    let reach = solved.disc.nodes.iter().map(|x| (x - center).norm()).fold(0.0, f64::max);
    if r0 <= reach {
        return Err(Error::InvalidParameter(format!(
            "probe shell inner radius {r0} does not clear the boundary (max radius {reach:.4})"
        )));
    }
    Ok(())
}

/// Draw one admissible probe; rejection-samples past the distance guard.
fn draw_probe(rng: &mut ChaCha8Rng, solved: &Solved, center: &Vector3<f64>, shell: (f64, f64), v: &Vector3<f64>) -> Result<Probe> {
    for _ in 0..1000 {
        let z = shell_point(rng, solved.dimension(), center, shell);
        if check_exterior(&solved.disc, &z).is_ok() {
            return Probe::new(z, *v);
        }
    }
    Err(Error::InvalidParameter("no admissible probe found in the shell".into()))
}

fn direction(opts: &SamplerOptions, dim: usize) -> Result<Vector3<f64>> {
    let v = Vector3::from(opts.direction);
    if dim == 2 && v.z != 0.0 {
        return Err(Error::InvalidParameter("probe direction must lie in the plane for curves".into()));
    }
    Ok(Probe::new(Vector3::zeros(), v)?.v)
}

fn validate(opts: &SamplerOptions) -> Result<()> {
    if opts.samples == 0 || !(opts.rank_tol > 0.0) || !(opts.min_abs_lambda >= 0.0) {
        return Err(Error::InvalidParameter("samples must be positive and tolerances valid".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterVerdict {
    pub cluster: usize,
    pub lambda: f64,
    pub n_lambda: usize,
    pub rank: usize,
    /// `None` when there are fewer probes than the multiplicity.
    pub g_lambda: Option<f64>,
    pub g_vanishes: bool,
    pub full_rank: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub sample: usize,
    pub probes: Vec<Probe>,
    pub clusters: Vec<ClusterVerdict>,
    pub fully_cyclic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CyclicReport {
    pub retained_clusters: Vec<usize>,
    /// Largest retained multiplicity.
    pub spectral_multiplicity: usize,
    pub probes_per_sample: usize,
    pub samples: Vec<SampleRecord>,
    pub fully_cyclic_fraction: f64,
    /// In every sample and cluster, `G_λ` vanishes exactly when the rank is deficient.
    pub g_rank_consistent: bool,
}

impl CyclicReport {
    /// CSV with columns `sample,cluster,N_lambda,rank,G_lambda,full_rank`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,cluster,N_lambda,rank,G_lambda,full_rank\n");
        for s in &self.samples {
            for c in &s.clusters {
                let g = c.g_lambda.map_or_else(|| "NaN".to_string(), |g| format!("{g:.12e}"));
                out.push_str(&format!("{},{},{},{},{},{}\n", s.sample, c.cluster, c.n_lambda, c.rank, g, c.full_rank));
            }
        }
        out
    }
}

/// Draw `samples` probe tuples in the shell and test the rank criterion on
/// every retained cluster.
pub fn cyclicity_sampler(solved: &Solved, opts: &SamplerOptions) -> Result<CyclicReport> {
    validate(opts)?;
    let clusters = retained(solved, opts.min_abs_lambda);
    if clusters.is_empty() {
        return Err(Error::InvalidParameter("no cluster survives the truncation".into()));
    }
    let spectral_multiplicity = clusters.iter().map(|&c| solved.spectrum.clusters[c].multiplicity).max().unwrap_or(0);
    let m = opts.probes.unwrap_or(spectral_multiplicity);
    if m == 0 {
        return Err(Error::InvalidParameter("at least one probe per sample is required".into()));
    }
    let center = centroid(solved);
    check_shell(solved, &center, opts.shell)?;
    let v = direction(opts, solved.dimension())?;
    let (proj, ranges) = projector(solved, &clusters);

    let samples = (0..opts.samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(s as u64);
            let probes = (0..m).map(|_| draw_probe(&mut rng, solved, &center, opts.shell, &v)).collect::<Result<Vec<_>>>()?;
            let columns: Vec<Vec<f64>> = probes.iter().map(|p| apply(&proj, 0..proj.nrows(), &q_values(&solved.disc, p))).collect();
            let verdicts = clusters
                .iter()
                .zip(&ranges)
                .map(|(&c, r)| {
                    let a = DMatrix::from_fn(r.len(), m, |i, k| columns[k][r.start + i]);
                    let rank = rank_tol(&a, opts.rank_tol)?;
                    let g = if r.len() <= m { Some(g_lambda(&a)?) } else { None };
                    Ok(ClusterVerdict {
                        cluster: c,
                        lambda: solved.spectrum.clusters[c].value,
                        n_lambda: r.len(),
                        rank,
                        g_vanishes: g.is_none_or(|g| g_vanishes(g, &a, opts.rank_tol)),
                        g_lambda: g,
                        full_rank: rank == r.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let fully_cyclic = verdicts.iter().all(|c| c.full_rank);
            Ok(SampleRecord { sample: s, probes, clusters: verdicts, fully_cyclic })
        })
        .collect::<Result<Vec<_>>>()?;
    let fully = samples.iter().filter(|s| s.fully_cyclic).count();
    let g_rank_consistent = samples.iter().flat_map(|s| &s.clusters).all(|c| c.full_rank != c.g_vanishes);
    Ok(CyclicReport {
        retained_clusters: clusters,
        spectral_multiplicity,
        probes_per_sample: m,
        fully_cyclic_fraction: fully as f64 / samples.len() as f64,
        samples,
        g_rank_consistent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterCoverage {
    pub cluster: usize,
    pub lambda: f64,
    /// Pairing with each basis vector of the cluster (basis dependent).
    pub pairings: Vec<f64>,
    /// Norm of the pairing row (basis independent).
    pub row_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub probe: Probe,
    pub clusters: Vec<ClusterCoverage>,
    pub min_row_norm: f64,
    pub min_abs_pairing: f64,
}

fn coverage_from(solved: &Solved, clusters: &[usize], proj: &faer::Mat<f64>, ranges: &[std::ops::Range<usize>], probe: Probe) -> CoverageReport {
    let values = apply(proj, 0..proj.nrows(), &q_values(&solved.disc, &probe));
    let clusters: Vec<ClusterCoverage> = clusters
        .iter()
        .zip(ranges)
        .map(|(&c, r)| {
            let pairings = values[r.clone()].to_vec();
            let row_norm = pairings.iter().map(|x| x * x).sum::<f64>().sqrt();
            ClusterCoverage { cluster: c, lambda: solved.spectrum.clusters[c].value, pairings, row_norm }
        })
        .collect();
    let min_row_norm = clusters.iter().map(|c| c.row_norm).fold(f64::INFINITY, f64::min);
    let min_abs_pairing = values.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    CoverageReport { probe, clusters, min_row_norm, min_abs_pairing }
}

/// Pairings of one probe with every retained mode.
pub fn eigenmode_coverage(solved: &Solved, probe: &Probe, min_abs_lambda: f64) -> Result<CoverageReport> {
    check_exterior(&solved.disc, &probe.z)?;
    let clusters = retained(solved, min_abs_lambda);
    let (proj, ranges) = projector(solved, &clusters);
    Ok(coverage_from(solved, &clusters, &proj, &ranges, *probe))
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageSample {
    pub sample: usize,
    pub report: CoverageReport,
    pub covered: bool,
}

/// Single random probes; a draw covers the spectrum when every retained
/// cluster row norm exceeds `threshold`.
pub fn coverage_sampler(solved: &Solved, opts: &SamplerOptions, threshold: f64) -> Result<(Vec<CoverageSample>, f64)> {
    validate(opts)?;
    let clusters = retained(solved, opts.min_abs_lambda);
    let center = centroid(solved);
    check_shell(solved, &center, opts.shell)?;
    let v = direction(opts, solved.dimension())?;
    let (proj, ranges) = projector(solved, &clusters);
    let samples = (0..opts.samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(s as u64);
            let probe = draw_probe(&mut rng, solved, &center, opts.shell, &v)?;
            let report = coverage_from(solved, &clusters, &proj, &ranges, probe);
            let covered = report.min_row_norm > threshold;
            Ok(CoverageSample { sample: s, report, covered })
        })
        .collect::<Result<Vec<_>>>()?;
    let fraction = samples.iter().filter(|s| s.covered).count() as f64 / samples.len() as f64;
    Ok((samples, fraction))
}

/// Grid over a coordinate-plane slice for the probe map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeMapOptions {
    /// Coordinate axes spanning the slice, e.g. `[0, 2]` for the xz-plane.
    pub axes: [usize; 2],
    /// Value of the remaining coordinate (ignored for curves).
    #[serde(default)]
    pub offset: f64,
    /// Half-width of the square slice, centered at the origin.
    pub extent: f64,
    /// Grid points per side.
    pub resolution: usize,
    pub min_abs_lambda: f64,
    pub direction: [f64; 3],
    /// Fixed probes completing each tuple for `G_λ`; the grid point is
    /// appended as the last probe.
    #[serde(default)]
    pub fixed_probes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeMapRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub cluster: usize,
    pub lambda: f64,
    pub row_norm: f64,
    pub g_lambda: f64,
    /// `ok`, `interior` or `near_field`.
    pub status: &'static str,
}

/// `G_λ` and pairing row norms for a probe sweeping a plane slice.
pub fn probe_map(solved: &Solved, opts: &ProbeMapOptions) -> Result<Vec<ProbeMapRow>> {
    let dim = solved.dimension();
    if opts.resolution < 2 || !(opts.extent > 0.0) || opts.axes[0] == opts.axes[1] || opts.axes.iter().any(|&a| a >= dim) {
        return Err(Error::InvalidParameter("probe map needs two distinct in-range axes, extent > 0, resolution >= 2".into()));
    }
    let v = Probe::new(Vector3::zeros(), Vector3::from(opts.direction))?.v;
    let clusters = retained(solved, opts.min_abs_lambda);
    let (proj, ranges) = projector(solved, &clusters);
    let fixed = opts
        .fixed_probes
        .iter()
        .map(|z| {
            let p = Probe::new(Vector3::from(*z), v)?;
            check_exterior(&solved.disc, &p.z)?;
            Ok(apply(&proj, 0..proj.nrows(), &q_values(&solved.disc, &p)))
        })
        .collect::<Result<Vec<_>>>()?;
    let third = (0..3).find(|a| !opts.axes.contains(a)).unwrap_or(2);
    let step = 2.0 * opts.extent / (opts.resolution - 1) as f64;
    let points: Vec<Vector3<f64>> = (0..opts.resolution)
        .flat_map(|j| (0..opts.resolution).map(move |i| (i, j)))
        .map(|(i, j)| {
            let mut z = Vector3::zeros();
            z[opts.axes[0]] = -opts.extent + i as f64 * step;
            z[opts.axes[1]] = -opts.extent + j as f64 * step;
            if dim == 3 {
                z[third] = opts.offset;
            }
            z
        })
        .collect();
    let rows: Vec<Vec<ProbeMapRow>> = points
        .par_iter()
        .map(|z| {
            let status = match check_exterior(&solved.disc, z) {
                Ok(()) => "ok",
                Err(Error::InteriorPoint { .. }) => "interior",
                Err(_) => "near_field",
            };
            let column = (status == "ok").then(|| apply(&proj, 0..proj.nrows(), &q_values(&solved.disc, &Probe { z: *z, v })));
            clusters
                .iter()
                .zip(&ranges)
                .map(|(&c, r)| {
                    let (row_norm, g) = match &column {
                        Some(col) => {
                            let row_norm = col[r.clone()].iter().map(|x| x * x).sum::<f64>().sqrt();
                            let m = fixed.len() + 1;
                            let a = DMatrix::from_fn(r.len(), m, |i, k| {
                                if k < fixed.len() {
                                    fixed[k][r.start + i]
                                } else {
                                    col[r.start + i]
                                }
                            });
                            (row_norm, g_lambda(&a).unwrap_or(f64::NAN))
                        }
                        None => (f64::NAN, f64::NAN),
                    };
                    ProbeMapRow {
                        x: z.x,
                        y: z.y,
                        z: z.z,
                        cluster: c,
                        lambda: solved.spectrum.clusters[c].value,
                        row_norm,
                        g_lambda: g,
                        status,
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
