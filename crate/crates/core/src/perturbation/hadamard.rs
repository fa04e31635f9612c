use faer::Mat;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{eval_field_at_quadrature, PerturbationField, Shape};
use crate::spectral::{tangential_gradient, Solved};

/// `c(λ) = (1 + 2λ)/(1 − 2λ)`.
///
/// `λ = 1/2` is a pole; `λ = 0` is rejected as well because the variational
/// formula does not hold there.
pub fn c_of_lambda(lambda: f64) -> Result<f64> {
    if lambda == 0.5 || lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::ExcludedEigenvalue { lambda });
    }
    Ok((1.0 + 2.0 * lambda) / (1.0 - 2.0 * lambda))
}

/// First-order branch slopes of a cluster predicted by the variational
/// formula.
#[derive(Debug, Clone, Serialize)]
pub struct FormulaSlopes {
    pub cluster: usize,
    pub lambda: f64,
    pub multiplicity: usize,
    pub c_lambda: f64,
    /// Cluster bilinear form on the P-orthonormal cluster basis (row-major).
    pub b: Vec<Vec<f64>>,
    pub trace_b: f64,
    /// Eigenvalues of `B`, ascending.
    pub slopes: Vec<f64>,
}

/// Per-panel data entering the integrand for one density.
struct ModeData {
    grad: Vec<nalgebra::Vector3<f64>>,
    dn: Vec<f64>,
}

fn mode_data(solved: &Solved, phi: &[f64]) -> Result<ModeData> {
    let grad = tangential_gradient(&solved.ops, &solved.disc, phi)?;
    let kphi: Vec<f64> = (0..phi.len())
        .map(|i| (0..phi.len()).map(|j| solved.ops.kstar[(i, j)] * phi[j]).sum::<f64>())
        .collect();
    let dn = kphi.iter().zip(phi).map(|(k, p)| k - 0.5 * p).collect();
    Ok(ModeData { grad, dn })
}

/// `∫ a·[∇_∂u_i·∇_∂u_j − c(λ)·∂_n u_i·∂_n u_j] dσ` with `u = S[φ]`.
fn bilinear(weights: &[f64], a: &[f64], c: f64, x: &ModeData, y: &ModeData) -> f64 {
    (0..weights.len())
        .map(|f| weights[f] * a[f] * (x.grad[f].dot(&y.grad[f]) - c * x.dn[f] * y.dn[f]))
        .sum()
}

/// Branch slopes of cluster `cluster` under the normal perturbation `a·n`.
///
/// The slopes are the eigenvalues of the cluster form `B`; for a simple
/// eigenvalue this is the single integral of `a·I_φ`. The sign is chosen so
/// that the slopes are `dλ/dh` for the outward displacement `x + h·a·n`
/// (see the crate README).
pub fn hadamard_slopes(
    shape: &Shape,
    solved: &Solved,
    cluster: usize,
    field: &PerturbationField,
) -> Result<FormulaSlopes> {
    if solved.dimension() != 3 {
        return Err(Error::Unsupported("the variational formula is implemented for surfaces only".into()));
    }
    let spectrum = &solved.spectrum;
    let cl = spectrum
        .clusters
        .get(cluster)
        .ok_or_else(|| Error::InvalidParameter(format!("cluster index {cluster} out of range")))?;
    let lambda = cl.value;
    if lambda.abs() <= spectrum.tol || (lambda - 0.5).abs() <= spectrum.tol {
        return Err(Error::ExcludedEigenvalue { lambda });
    }
    let c = c_of_lambda(lambda)?;
    let a = eval_field_at_quadrature(field, shape)?;
    if a.len() != solved.disc.len() {
        return Err(Error::DimensionMismatch { expected: solved.disc.len(), found: a.len() });
    }

    let modes = cl
        .range()
        .map(|j| mode_data(solved, &spectrum.vector(j)))
        .collect::<Result<Vec<_>>>()?;
    let n = modes.len();
    let w = &solved.disc.weights;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = -bilinear(w, &a, c, &modes[i], &modes[j]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let trace_b = b.trace();
    let mut slopes: Vec<f64> = SymmetricEigen::new(b.clone()).eigenvalues.iter().copied().collect();
    slopes.sort_by(f64::total_cmp);
    if slopes.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("variational slopes"));
    }
    Ok(FormulaSlopes {
        cluster,
        lambda,
        multiplicity: n,
        c_lambda: c,
        b: (0..n).map(|i| (0..n).map(|j| b[(i, j)]).collect()).collect(),
        trace_b,
        slopes,
    })
}

/// Coefficients `ΦᵀPx` of `x` in a P-orthonormal basis `Φ`.
pub(crate) fn coefficients(basis: &Mat<f64>, p: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let px: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[(i, j)] * x[j]).sum()).collect();
    (0..basis.ncols()).map(|k| (0..n).map(|i| basis[(i, k)] * px[i]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_shape, ShapeSpec};
    use crate::spectral::solve;
    use approx::assert_abs_diff_eq;

    #[test]
    fn c_values() {
        assert_abs_diff_eq!(c_of_lambda(1.0 / 6.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c_of_lambda(-1.0 / 6.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c_of_lambda(0.1).unwrap(), 1.5, epsilon = 1e-15);
        assert!(matches!(c_of_lambda(0.5), Err(Error::ExcludedEigenvalue { .. })));
        assert!(matches!(c_of_lambda(0.0), Err(Error::ExcludedEigenvalue { .. })));
    }

    fn sphere(subdiv: u32) -> (Shape, Solved) {
        let s = make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv }).unwrap();
        let solved = solve(&s, 0).unwrap();
        (s, solved)
    }

    #[test]
    fn top_cluster_and_two_dimensions_rejected() {
        let (s, solved) = sphere(1);
        let err = hadamard_slopes(&s, &solved, 0, &PerturbationField::Constant { value: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::ExcludedEigenvalue { .. }));

        let c = make_shape(&ShapeSpec::Circle { radius: 0.5, nodes: 32 }).unwrap();
        let solved = solve(&c, 32).unwrap();
        let err = hadamard_slopes(&c, &solved, 0, &PerturbationField::FourierMode2d { k: 1 }).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn dilation_gives_zero_slopes_and_trace_identity() {
        let (s, solved) = sphere(3);
        let r = hadamard_slopes(&s, &solved, 1, &PerturbationField::Constant { value: 1.0 }).unwrap();
        assert_eq!(r.multiplicity, 3);
        for sl in &r.slopes {
            assert!(sl.abs() < 1e-3, "slope {sl}");
        }
        assert_abs_diff_eq!(r.slopes.iter().sum::<f64>(), r.trace_b, epsilon = 1e-12);
    }

    #[test]
    fn zonal_field_matches_analytic_sphere_values() {
        // Degree-one modes under a = Y_2^0 on the unit sphere: B is diagonal
        // in (Y_1^{-1}, Y_1^0, Y_1^1); the zonal mode moves up by sqrt(5/π)/5
        // (the body becomes prolate) and the other two down by half that.
        let (s, solved) = sphere(3);
        let r = hadamard_slopes(&s, &solved, 1, &PerturbationField::SphericalHarmonic { l: 2, m: 0 }).unwrap();
        let q = (5.0 / std::f64::consts::PI).sqrt();
        let expect = [-q / 10.0, -q / 10.0, q / 5.0];
        for (got, want) in r.slopes.iter().zip(expect) {
            assert!((got - want).abs() < 0.05 * want.abs(), "{:?} vs {expect:?}", r.slopes);
        }
    }
}
