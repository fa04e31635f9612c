use std::f64::consts::PI;

use faer::{Mat, Side};
use rayon::prelude::*;

use super::{panel, DiscGeometry, Discretization};
use crate::error::{Error, Result};

/// Discrete `S`, `K*` and the Gram matrix `P` on one discretization.
///
/// `s` and `kstar` map density values at the nodes to values at the nodes.
/// `p` is symmetric positive definite and defines `⟨φ, ψ⟩ = φᵀ P ψ`.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub dim: usize,
    pub s: Mat<f64>,
    pub kstar: Mat<f64>,
    pub p: Mat<f64>,
    /// Lower Cholesky factor of `p`.
    pub chol: Mat<f64>,
    /// `‖PK* − (PK*)ᵀ‖_F / ‖PK*‖_F`.
    pub symmetry_residual: f64,
    /// Relative asymmetry of `−W·S` removed by symmetrization.
    pub gram_asymmetry: f64,
}

impl OperatorSet {
    pub fn len(&self) -> usize {
        self.kstar.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(−½I + K*)`: interior limit of `∂_n S[φ]`.
    pub fn interior_normal_derivative(&self) -> Mat<f64> {
        let mut m = self.kstar.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= 0.5;
        }
        m
    }

    /// `sym(P·K*)`.
    pub fn symmetric_pk(&self) -> Mat<f64> {
        let pk = &self.p * &self.kstar;
        symmetrize(&pk)
    }
}

pub(crate) fn symmetrize(m: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub(crate) fn frobenius(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

pub(crate) fn asymmetry(m: &Mat<f64>) -> f64 {
    let mut num = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let d = m[(i, j)] - m[(j, i)];
            num += d * d;
        }
    }
    let den = frobenius(m);
    if den == 0.0 {
        0.0
    } else {
        num.sqrt() / den
    }
}

/// Weights `R_j` with `Σ_j R_j f(t_j) = ∫_0^{2π} log(4 sin²(t_j'/2)) f(t) dt`
/// exactly for the trigonometric interpolant of `f`; `R` is indexed by the
/// node offset `(i − j) mod n`.
pub fn kress_log_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let kmax = n.div_ceil(2) - 1;
    (0..n)
        .map(|j| {
            let tau = 2.0 * PI * j as f64 / nf;
            let mut r: f64 = (1..=kmax).map(|k| (k as f64 * tau).cos() / k as f64).sum();
            r *= -4.0 * PI / nf;
            if n % 2 == 0 {
                r -= 4.0 * PI / (nf * nf) * (nf / 2.0 * tau).cos();
            }
            r
        })
        .collect()
}

fn rows_to_mat(rows: Vec<Vec<f64>>) -> Mat<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

fn assemble_2d(disc: &Discretization, curve: &crate::geometry::Curve) -> (Mat<f64>, Mat<f64>) {
    let n = disc.len();
    let speeds = curve.speeds();
    let kappa = curve.curvature();
    let log_w = kress_log_weights(n);
    let h = 2.0 * PI / n as f64;
    let s_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = disc.nodes[i];
            (0..n)
                .map(|j| {
                    let smooth = if i == j {
                        (speeds[i] * speeds[i]).ln()
                    } else {
                        let half = PI * (i as f64 - j as f64) / n as f64;
                        let dist_sq = (xi - disc.nodes[j]).norm_squared();
                        (dist_sq / (4.0 * half.sin().powi(2))).ln()
                    };
                    (log_w[(i + n - j) % n] + h * smooth) * speeds[j] / (4.0 * PI)
                })
                .collect()
        })
        .collect();
    let k_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, ni) = (disc.nodes[i], disc.normals[i]);
            (0..n)
                .map(|j| {
                    if i == j {
                        kappa[i] / (4.0 * PI) * disc.weights[i]
                    } else {
                        let d = xi - disc.nodes[j];
                        ni.dot(&d) / (2.0 * PI * d.norm_squared()) * disc.weights[j]
                    }
                })
                .collect()
        })
        .collect();
    (rows_to_mat(s_rows), rows_to_mat(k_rows))
}

fn assemble_3d(disc: &Discretization, mesh: &crate::geometry::TriMesh) -> (Mat<f64>, Mat<f64>) {
    let n = disc.len();
    let corners: Vec<_> = (0..n).map(|f| mesh.corners(f)).collect();
    // Row i: S against every panel, and the double layer D at centroid i.
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ci = disc.nodes[i];
            let mut s_row = Vec::with_capacity(n);
            let mut d_row = Vec::with_capacity(n);
            for (j, tri) in corners.iter().enumerate() {
                s_row.push(-panel::potential(&ci, tri) / (4.0 * PI));
                // Coplanar self term vanishes identically.
                d_row.push(if i == j { 0.0 } else { -panel::solid_angle(&ci, tri) / (4.0 * PI) });
            }
            (s_row, d_row)
        })
        .collect();
    let (s_rows, d_rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let d = rows_to_mat(d_rows);
    let w = &disc.weights;
    // K* is the adjoint of D in the area-weighted inner product.
    let kstar = Mat::from_fn(n, n, |i, j| d[(j, i)] * w[j] / w[i]);
    (rows_to_mat(s_rows), kstar)
}

/// Assemble `S`, `K*` and the factorized Gram matrix `P = −sym(W·S)`.
///
/// Fails with [`Error::Cholesky`] when `−S` is not positive definite, which
/// for curves means the capacity condition is violated.
pub fn assemble_operators(disc: &Discretization) -> Result<OperatorSet> {
    let (s, kstar) = match &disc.geometry {
        DiscGeometry::Curve(c) => assemble_2d(disc, c),
        DiscGeometry::Panels(m) => assemble_3d(disc, m),
    };
    let n = disc.len();
    let ws = Mat::from_fn(n, n, |i, j| -disc.weights[i] * s[(i, j)]);
    if (0..n).any(|i| (0..n).any(|j| !ws[(i, j)].is_finite() || !kstar[(i, j)].is_finite())) {
        return Err(Error::NonFinite("assembled operators"));
    }
    let gram_asymmetry = asymmetry(&ws);
    log::debug!("Gram matrix asymmetry before symmetrization: {gram_asymmetry:.3e}");
    let p = symmetrize(&ws);
    let chol = match p.llt(Side::Lower) {
        Ok(llt) => llt.L().to_owned(),
        Err(e) => {
            let hint = if disc.dimension() == 2 {
                "the curve must fit in a disk of radius 1/2 (apply capacity rescaling)"
            } else {
                "check the mesh for defects"
            };
            return Err(Error::Cholesky(format!("{e:?}; {hint}")));
        }
    };
    let symmetry_residual = asymmetry(&(&p * &kstar));
    Ok(OperatorSet { dim: disc.dimension(), s, kstar, p, chol, symmetry_residual, gram_asymmetry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::discretize;
    use crate::geometry::{make_shape, rescale_for_capacity, ShapeSpec};
    use approx::assert_abs_diff_eq;

    fn circle_ops(r: f64, n: usize) -> (Discretization, OperatorSet) {
        let s = make_shape(&ShapeSpec::Circle { radius: r, nodes: n }).unwrap();
        let d = discretize(&s, n).unwrap();
        let ops = assemble_operators(&d).unwrap();
        (d, ops)
    }

    #[test]
    fn log_weights_integrate_cosines() {
        // ∫ log(4 sin²(t/2)) cos(kt) dt = −2π/k for k ≥ 1 and 0 for k = 0.
        for n in [16, 17, 32] {
            let w = kress_log_weights(n);
            for k in 0..(n / 2 - 1) {
                let sum: f64 = (0..n).map(|j| w[j] * (k as f64 * 2.0 * PI * j as f64 / n as f64).cos()).sum();
                let expect = if k == 0 { 0.0 } else { -2.0 * PI / k as f64 };
                assert_abs_diff_eq!(sum, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn circle_kernel_is_constant_with_half_row_sums() {
        let (_, ops) = circle_ops(0.5, 64);
        for i in 0..64 {
            let row: f64 = (0..64).map(|j| ops.kstar[(i, j)]).sum();
            assert_abs_diff_eq!(row, 0.5, epsilon = 1e-13);
            for j in 0..64 {
                assert_abs_diff_eq!(ops.kstar[(i, j)] / (PI / 64.0), 1.0 / (2.0 * PI), epsilon = 1e-12);
            }
        }
    }

    /// Independent oracle: direct product-trapezoid quadrature of the log
    /// kernel at a target pushed slightly off the curve, extrapolated back.
    fn single_layer_of_ones_oracle(r: f64, m: usize) -> f64 {
        (0..m)
            .map(|j| {
                let t = (j as f64 + 0.5) * 2.0 * PI / m as f64;
                let y = (r * t.cos(), r * t.sin());
                ((r - y.0).powi(2) + y.1.powi(2)).sqrt().ln() * r * 2.0 * PI / m as f64
            })
            .sum::<f64>()
            / (2.0 * PI)
    }

    #[test]
    fn circle_single_layer_of_ones() {
        let (_, ops) = circle_ops(0.5, 64);
        // Midpoint rule on a log singularity converges like O(log m / m).
        let oracle = single_layer_of_ones_oracle(0.5, 2_000_000);
        let expect = 0.5 * 0.5f64.ln();
        assert_abs_diff_eq!(oracle, expect, epsilon = 1e-5);
        for i in 0..64 {
            let v: f64 = (0..64).map(|j| ops.s[(i, j)]).sum();
            assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_operators_converge_spectrally() {
        let exact = |ops: &OperatorSet, n: usize| {
            let w = 2.0 * PI * 0.5 / n as f64;
            let mut e: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    e = e.max((ops.kstar[(i, j)] - w / (2.0 * PI)).abs());
                }
            }
            e
        };
        // A slightly off-circle curve so the error is not zero at both sizes.
        let coeffs = crate::geometry::FourierCurve {
            cos: vec![[0.0, 0.0], [0.4, 0.0], [0.0, 0.0], [0.03, 0.0]],
            sin: vec![[0.0, 0.0], [0.0, 0.35], [0.0, 0.0], [0.0, 0.02]],
        };
        let errs: Vec<f64> = [32, 64]
            .iter()
            .map(|&n| {
                let s = make_shape(&ShapeSpec::CurveFourier { coeffs: coeffs.clone(), nodes: n }).unwrap();
                let d = discretize(&s, n).unwrap();
                let ops = assemble_operators(&d).unwrap();
                // Eigenvalue error against a high resolution reference.
                let ev = crate::spectral::np_eigensolve(&ops).unwrap().eigenvalues;
                let sref = make_shape(&ShapeSpec::CurveFourier { coeffs: coeffs.clone(), nodes: 256 }).unwrap();
                let dref = discretize(&sref, 256).unwrap();
                let eref = crate::spectral::np_eigensolve(&assemble_operators(&dref).unwrap()).unwrap().eigenvalues;
                (1..6).map(|k| (ev[k] - eref[k]).abs()).fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[1] * 10.0 <= errs[0] || errs[1] < 1e-13, "{errs:?}");
        // On the circle both are already at round-off.
        for n in [32, 64] {
            let (_, ops) = circle_ops(0.5, n);
            assert!(exact(&ops, n) < 1e-14);
        }
    }

    #[test]
    fn two_dimensional_self_adjointness() {
        let e = make_shape(&ShapeSpec::Ellipse { a: 2.0, b: 1.0, nodes: 128 }).unwrap();
        let (e, _) = rescale_for_capacity(&e).unwrap();
        let ops = assemble_operators(&discretize(&e, 128).unwrap()).unwrap();
        assert!(ops.symmetry_residual < 1e-8, "{}", ops.symmetry_residual);
    }

    #[test]
    fn unit_circle_violates_capacity() {
        let s = make_shape(&ShapeSpec::Circle { radius: 1.0, nodes: 32 }).unwrap();
        let err = assemble_operators(&discretize(&s, 32).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Cholesky(_)));
        assert!(err.is_numerical());
    }

    #[test]
    fn sphere_operators() {
        let s = make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv: 2 }).unwrap();
        let d = discretize(&s, 0).unwrap();
        let ops = assemble_operators(&d).unwrap();
        let n = d.len();
        for j in 0..n {
            assert_eq!(ops.kstar[(j, j)], 0.0);
            // Gauss: the double layer of a constant is 1/2 on a closed polyhedron,
            // so K* preserves the area-weighted integral up to the factor 1/2.
            let col: f64 = (0..n).map(|i| d.weights[i] * ops.kstar[(i, j)]).sum();
            assert!((col - 0.5 * d.weights[j]).abs() < 1e-12 * d.weights[j].max(1.0));
            let row: f64 = (0..n).map(|k| ops.kstar[(j, k)]).sum();
            assert!((row - 0.5).abs() < 0.02, "row sum {row}");
        }
        assert!(ops.symmetry_residual < 5e-2);
    }
}
