use std::f64::consts::PI;

use faer::Mat;
use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::assembly::{panel, Discretization, OperatorSet};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;

/// Boundary data of `u = S[φ]` for one density `φ`.
#[derive(Debug, Clone)]
pub struct BoundaryFields {
    /// `S[φ]` at the nodes.
    pub trace: Vec<f64>,
    /// Interior limit `∂_n S[φ]|_− = (−½I + K*)φ` at the nodes.
    pub normal_derivative: Vec<f64>,
    /// `∇_∂ S[φ]` per panel (3D only).
    pub tangential_gradient: Option<Vec<Vector3<f64>>>,
}

fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

/// Trace, interior normal derivative and (3D) tangential gradient of `S[φ]`.
pub fn boundary_fields(ops: &OperatorSet, disc: &Discretization, phi: &[f64]) -> Result<BoundaryFields> {
    if phi.len() != ops.len() {
        return Err(Error::DimensionMismatch { expected: ops.len(), found: phi.len() });
    }
    let trace = mat_vec(&ops.s, phi);
    let kphi = mat_vec(&ops.kstar, phi);
    let normal_derivative = kphi.iter().zip(phi).map(|(k, p)| k - 0.5 * p).collect();
    let tangential_gradient = match disc.dimension() {
        3 => Some(centroid_gradient(disc, &trace)?),
        _ => None,
    };
    Ok(BoundaryFields { trace, normal_derivative, tangential_gradient })
}

/// Surface gradient of panel values, one vector per panel.
///
/// Each panel fits `u(c_k) − u(c_i) ≈ g·(c_k − c_i)` by least squares over
/// its edge neighbours, with `g` restricted to the panel plane. Working on
/// the collocation points of `S` keeps the gradient on the same footing as
/// the Gram matrix, so the errors of the two terms of the variational
/// integrand cancel to high order. Falls back to the vertex one-ring when
/// the edge neighbours are degenerate.
pub fn centroid_gradient(disc: &Discretization, values: &[f64]) -> Result<Vec<Vector3<f64>>> {
    let mesh = disc.mesh().ok_or_else(|| {
        Error::Unsupported("the tangential gradient is only defined for surfaces in R^3".into())
    })?;
    if values.len() != disc.len() {
        return Err(Error::DimensionMismatch { expected: disc.len(), found: values.len() });
    }
    let n = disc.len();
    let mut edge_nb = vec![Vec::with_capacity(3); n];
    for (a, b) in mesh.adjacent_faces() {
        edge_nb[a].push(b);
        edge_nb[b].push(a);
    }
    let vertex_faces = mesh.vertex_faces();
    let fit = |i: usize, nbs: &[usize]| -> Option<Vector3<f64>> {
        let normal = disc.normals[i];
        let e1 = (mesh.vertices[mesh.faces[i][0]] - disc.nodes[i]).normalize();
        let e2 = normal.cross(&e1);
        let (mut ata, mut atb) = (Matrix2::zeros(), Vector2::zeros());
        for &k in nbs {
            let d = disc.nodes[k] - disc.nodes[i];
            let x = Vector2::new(d.dot(&e1), d.dot(&e2));
            ata += x * x.transpose();
            atb += x * (values[k] - values[i]);
        }
        let scale = ata.trace();
        if !(ata.determinant() > 1e-12 * scale * scale) {
            return None;
        }
        let g = ata.try_inverse()? * atb;
        Some(e1 * g.x + e2 * g.y)
    };
    (0..n)
        .into_par_iter()
        .map(|i| {
            fit(i, &edge_nb[i])
                .or_else(|| {
                    let mut ring: Vec<usize> =
                        mesh.faces[i].iter().flat_map(|&v| vertex_faces[v].iter().copied()).filter(|&f| f != i).collect();
                    ring.sort_unstable();
                    ring.dedup();
                    fit(i, &ring)
                })
                .ok_or_else(|| Error::Degenerate(format!("cannot fit a surface gradient on panel {i}")))
        })
        .collect()
}

/// `S[φ]` at the mesh vertices for a piecewise-constant density `φ`,
/// integrated exactly panel by panel.
pub fn vertex_trace(disc: &Discretization, phi: &[f64]) -> Result<Vec<f64>> {
    let mesh = disc
        .mesh()
        .ok_or_else(|| Error::Unsupported("vertex traces need a triangle mesh".into()))?;
    let corners: Vec<_> = (0..mesh.num_faces()).map(|f| mesh.corners(f)).collect();
    Ok(mesh
        .vertices
        .par_iter()
        .map(|v| {
            corners
                .iter()
                .zip(phi)
                .map(|(tri, p)| -panel::potential(v, tri) * p)
                .sum::<f64>()
                / (4.0 * PI)
        })
        .collect())
}

/// Gradient of the linear interpolant of vertex values, one per face.
///
/// The result lies in the face plane, so it is already tangential.
pub fn p1_tangential_gradient(mesh: &TriMesh, vertex_values: &[f64]) -> Vec<Vector3<f64>> {
    (0..mesh.num_faces())
        .map(|f| {
            let [a, b, c] = mesh.faces[f];
            let p = [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]];
            let u = [vertex_values[a], vertex_values[b], vertex_values[c]];
            let twice_area = mesh.face_vector_area(f) * 2.0;
            let n = twice_area.normalize();
            let inv = 1.0 / twice_area.norm();
            (0..3)
                .map(|k| n.cross(&(p[(k + 2) % 3] - p[(k + 1) % 3])) * (u[k] * inv))
                .sum()
        })
        .collect()
}

/// `∇_∂ S[φ]` per panel from the collocated trace (see [`centroid_gradient`]).
pub fn tangential_gradient(ops: &OperatorSet, disc: &Discretization, phi: &[f64]) -> Result<Vec<Vector3<f64>>> {
    if disc.dimension() != 3 {
        return Err(Error::Unsupported("the tangential gradient is only defined for surfaces in R^3".into()));
    }
    if phi.len() != ops.len() {
        return Err(Error::DimensionMismatch { expected: ops.len(), found: phi.len() });
    }
    centroid_gradient(disc, &mat_vec(&ops.s, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_operators, discretize};
    use crate::geometry::{make_shape, ShapeSpec};
    use crate::spectral::np_eigensolve;

    #[test]
    fn constant_vertex_values_have_zero_gradient() {
        let m = TriMesh::icosphere(2);
        for g in p1_tangential_gradient(&m, &vec![3.7; m.num_vertices()]) {
            assert!(g.norm() < 1e-10);
        }
    }

    #[test]
    fn linear_function_gradient_is_projected() {
        let m = TriMesh::icosphere(2);
        let vals: Vec<f64> = m.vertices.iter().map(|v| 2.0 * v.x - v.z).collect();
        let grad = Vector3::new(2.0, 0.0, -1.0);
        for (f, g) in p1_tangential_gradient(&m, &vals).iter().enumerate() {
            let n = m.face_normal(f);
            let expect = grad - n * grad.dot(&n);
            assert!((g - expect).norm() < 1e-12);
        }
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn centroid_gradient_of_linear_function() {
        // On a sphere the surface gradient of z is e_z − z·n; the fit is
        // first-order accurate on the faceted mesh.
        let s = make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv: 3 }).unwrap();
        let d = discretize(&s, 0).unwrap();
        let vals: Vec<f64> = d.nodes.iter().map(|c| c.z).collect();
        let g = centroid_gradient(&d, &vals).unwrap();
        for (i, gi) in g.iter().enumerate() {
            let n = d.normals[i];
            assert!(gi.dot(&n).abs() < 1e-12);
            let expect = Vector3::z() - n * n.z;
            assert!((gi - expect).norm() < 0.05, "panel {i}: {gi} vs {expect}");
        }
        let constant = centroid_gradient(&d, &vec![2.5; d.len()]).unwrap();
        assert!(constant.iter().all(|g| g.norm() < 1e-12));
    }

    #[test]
    fn dirichlet_energy_of_degree_one_mode() {
        // u = S[sqrt(3)·Y_1] = −Y_1/sqrt(3) on the unit sphere, so
        // ∫|∇_∂u|² = 2/3 and ∫(∂_n u)² = 1/3 for P-normalised densities.
        let s = make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv: 3 }).unwrap();
        let d = discretize(&s, 0).unwrap();
        let ops = assemble_operators(&d).unwrap();
        let spec = np_eigensolve(&ops).unwrap();
        let f = boundary_fields(&ops, &d, &spec.vector(1)).unwrap();
        let g = f.tangential_gradient.unwrap();
        let t1: f64 = (0..d.len()).map(|i| d.weights[i] * g[i].norm_squared()).sum();
        let t2: f64 = (0..d.len()).map(|i| d.weights[i] * f.normal_derivative[i].powi(2)).sum();
        assert!((t1 - 2.0 / 3.0).abs() < 0.02, "{t1}");
        assert!((t2 - 1.0 / 3.0).abs() < 0.01, "{t2}");
    }

    #[test]
    fn jump_relation_on_eigenvectors() {
        // (−½I + K*)φ = (λ − ½)φ holds to the symmetry residual of P·K*.
        let e = make_shape(&ShapeSpec::Ellipse { a: 0.4, b: 0.25, nodes: 96 }).unwrap();
        let d = discretize(&e, 96).unwrap();
        let ops = assemble_operators(&d).unwrap();
        let spec = np_eigensolve(&ops).unwrap();
        for j in [0, 1, 2, 5, 10] {
            let phi = spec.vector(j);
            let f = boundary_fields(&ops, &d, &phi).unwrap();
            let want: Vec<f64> = phi.iter().map(|p| (spec.eigenvalues[j] - 0.5) * p).collect();
            let diff: Vec<f64> = f.normal_derivative.iter().zip(&want).map(|(a, b)| a - b).collect();
            assert!(max_abs(&diff) < 1e-8 * max_abs(&phi), "mode {j}");
        }

        let s = make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv: 2 }).unwrap();
        let d = discretize(&s, 0).unwrap();
        let ops = assemble_operators(&d).unwrap();
        let spec = np_eigensolve(&ops).unwrap();
        for j in [0, 1, 4] {
            let phi = spec.vector(j);
            let f = boundary_fields(&ops, &d, &phi).unwrap();
            let want: Vec<f64> = phi.iter().map(|p| (spec.eigenvalues[j] - 0.5) * p).collect();
            let diff: Vec<f64> = f.normal_derivative.iter().zip(&want).map(|(a, b)| a - b).collect();
            assert!(max_abs(&diff) < 0.05 * max_abs(&phi), "mode {j}: {}", max_abs(&diff) / max_abs(&phi));
            assert_eq!(f.tangential_gradient.unwrap().len(), d.len());
        }
    }

    #[test]
    fn degree_one_trace_is_minus_a_third() {
        // S[Y_1] = −Y_1/3 on the unit sphere.
        let s = make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv: 3 }).unwrap();
        let d = discretize(&s, 0).unwrap();
        let ops = assemble_operators(&d).unwrap();
        let phi: Vec<f64> = d.nodes.iter().map(|c| c.z / c.norm()).collect();
        let f = boundary_fields(&ops, &d, &phi).unwrap();
        let err = f
            .trace
            .iter()
            .zip(&phi)
            .map(|(t, p)| (t + p / 3.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.01, "max error {err}");
        let vt = vertex_trace(&d, &phi).unwrap();
        let m = d.mesh().unwrap();
        let verr = vt.iter().zip(&m.vertices).map(|(t, v)| (t + v.z / 3.0).abs()).fold(0.0, f64::max);
        assert!(verr < 0.01, "vertex error {verr}");
    }

    #[test]
    fn gradient_rejected_in_two_dimensions() {
        let s = make_shape(&ShapeSpec::Circle { radius: 0.5, nodes: 32 }).unwrap();
        let d = discretize(&s, 32).unwrap();
        let ops = assemble_operators(&d).unwrap();
        assert!(matches!(tangential_gradient(&ops, &d, &vec![1.0; 32]), Err(Error::Unsupported(_))));
        let f = boundary_fields(&ops, &d, &vec![1.0; 32]).unwrap();
        assert!(f.tangential_gradient.is_none());
    }
}
