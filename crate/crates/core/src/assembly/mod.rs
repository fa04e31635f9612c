//! Discretization of the single layer potential `S`, the NP operator `K*`
//! and the Gram matrix `P` of `⟨φ, ψ⟩ = −⟨φ, S[ψ]⟩`.
//!
//! 2D: Nyström on equispaced parameter nodes. `K*` has a continuous kernel
//! (diagonal `κ/(4π)`) and uses the trapezoid rule; `S` splits off
//! `log(4 sin²((t−s)/2))` and integrates it with exact trigonometric
//! weights.
//!
//! 3D: piecewise constants on flat triangles, collocated at centroids with
//! exact panel integrals. `S` uses the closed-form potential; `K*` is the
//! area-weighted adjoint of the collocated double layer, whose kernel
//! integrates to a solid angle. That keeps `K*[·]` exactly mass-balanced
//! (constants map to 1/2 under the adjoint) and gives second-order
//! eigenvalues on smooth surfaces.

mod operators;
pub mod panel;

use nalgebra::Vector3;

pub use operators::{assemble_operators, kress_log_weights, OperatorSet};
pub(crate) use operators::symmetrize;

use crate::error::{Error, Result};
use crate::geometry::{Boundary, Curve, Shape, TriMesh};

#[derive(Debug, Clone)]
pub enum DiscGeometry {
    Curve(Curve),
    Panels(TriMesh),
}

/// Quadrature nodes carrying the unknown density values.
///
/// In 3D a node is a panel (its centroid), so `node i` ↔ `face i`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub nodes: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vector3<f64>>,
    pub geometry: DiscGeometry,
}

impl Discretization {
    pub fn dimension(&self) -> usize {
        match self.geometry {
            DiscGeometry::Curve(_) => 2,
            DiscGeometry::Panels(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Boundary length (2D) or area (3D).
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Characteristic size of the panel owning node `i`.
    pub fn panel_size(&self, i: usize) -> f64 {
        match self.geometry {
            DiscGeometry::Curve(_) => self.weights[i],
            DiscGeometry::Panels(_) => self.weights[i].sqrt(),
        }
    }

    pub fn curvature(&self) -> Option<Vec<f64>> {
        match &self.geometry {
            DiscGeometry::Curve(c) => Some(c.curvature()),
            DiscGeometry::Panels(_) => None,
        }
    }

    pub fn mesh(&self) -> Option<&TriMesh> {
        match &self.geometry {
            DiscGeometry::Panels(m) => Some(m),
            DiscGeometry::Curve(_) => None,
        }
    }
}

/// Quadrature for `shape`: `resolution` equispaced nodes on a curve
/// (at least 8); for meshes the panels are the nodes and `resolution` is
/// not used.
pub fn discretize(shape: &Shape, resolution: usize) -> Result<Discretization> {
    match &shape.boundary {
        Boundary::Curve(curve) => {
            if resolution < 8 {
                return Err(Error::Resolution { got: resolution, min: 8 });
            }
            let curve = curve.resample(resolution)?;
            let nodes = curve.nodes.iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect();
            let normals = curve.normals().iter().map(|n| Vector3::new(n.x, n.y, 0.0)).collect();
            let weights = curve.weights();
            Ok(Discretization { nodes, weights, normals, geometry: DiscGeometry::Curve(curve) })
        }
        Boundary::Surface(surface) => {
            let mesh = &surface.mesh;
            let nf = mesh.num_faces();
            let nodes = (0..nf).map(|f| mesh.face_centroid(f)).collect();
            let weights: Vec<f64> = (0..nf).map(|f| mesh.face_area(f)).collect();
            let normals = (0..nf).map(|f| mesh.face_normal(f)).collect();
            if weights.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
                return Err(Error::Degenerate("mesh has a panel with non-positive area".into()));
            }
            Ok(Discretization { nodes, weights, normals, geometry: DiscGeometry::Panels(mesh.clone()) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_shape, ShapeSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn circle_measure_is_exact() {
        let s = make_shape(&ShapeSpec::Circle { radius: 0.5, nodes: 64 }).unwrap();
        let d = discretize(&s, 64).unwrap();
        assert_abs_diff_eq!(d.measure(), PI, epsilon = 1e-12);
        assert!(d.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn ellipse_perimeter_converges() {
        // Ramanujan's second approximation is accurate to ~1e-10 for b/a = 1/2.
        let (a, b) = (2.0f64, 1.0f64);
        let h = ((a - b) / (a + b)).powi(2);
        let ramanujan = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        let s = make_shape(&ShapeSpec::Ellipse { a, b, nodes: 32 }).unwrap();
        let d = discretize(&s, 128).unwrap();
        assert!((d.measure() - ramanujan).abs() < 1e-8);
    }

    #[test]
    fn icosphere_area_from_below() {
        let s = make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv: 3 }).unwrap();
        let d = discretize(&s, 0).unwrap();
        let area = d.measure();
        assert!(area > 4.0 * PI * 0.97 && area < 4.0 * PI, "area {area}");
        assert!(d.weights.iter().all(|&w| w > 0.0));
        // Oracle: direct per-face cross-product summation.
        let m = d.mesh().unwrap();
        let direct: f64 = m
            .faces
            .iter()
            .map(|&[a, b, c]| (m.vertices[b] - m.vertices[a]).cross(&(m.vertices[c] - m.vertices[a])).norm() / 2.0)
            .sum();
        assert_abs_diff_eq!(area, direct, epsilon = 1e-12);
    }

    #[test]
    fn too_few_nodes() {
        let s = make_shape(&ShapeSpec::Circle { radius: 0.5, nodes: 64 }).unwrap();
        assert!(matches!(discretize(&s, 6), Err(Error::Resolution { got: 6, min: 8 })));
    }
}
