//! Closed boundaries in 2D and 3D, perturbation fields, and normal
//! perturbations `x ↦ x + h·a(x)·n(x)` that keep node indexing fixed.

pub mod curve;
pub mod field;
pub mod harmonics;
pub mod mesh;

use std::path::PathBuf;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use curve::{Curve, FourierCurve};
pub use field::{FieldFn, PerturbationField};
pub use mesh::TriMesh;

use crate::error::{Error, Result};

fn default_nodes() -> usize {
    64
}

/// Declarative description of a boundary, as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Circle {
        radius: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    CurveFourier {
        coeffs: FourierCurve,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// JSON file holding `{"cos": [...], "sin": [...]}`.
    CurveFile {
        path: PathBuf,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    Sphere {
        radius: f64,
        subdiv: u32,
    },
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
        subdiv: u32,
    },
    /// ASCII OFF triangle mesh.
    Mesh {
        path: PathBuf,
    },
}

impl ShapeSpec {
    pub fn dimension(&self) -> usize {
        match self {
            Self::Circle { .. } | Self::Ellipse { .. } | Self::CurveFourier { .. } | Self::CurveFile { .. } => 2,
            _ => 3,
        }
    }
}

/// 3D boundary: mesh plus per-vertex unit normals used for displacement.
#[derive(Debug, Clone)]
pub struct Surface {
    pub mesh: TriMesh,
    pub vertex_normals: Vec<Vector3<f64>>,
    /// Origin for direction-based field evaluation; fixed under perturbation.
    pub center: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub enum Boundary {
    Curve(Curve),
    Surface(Surface),
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub label: String,
    pub boundary: Boundary,
    /// Accumulated dilation factor applied for the 2D capacity condition.
    pub scale: f64,
}

impl Shape {
    pub fn dimension(&self) -> usize {
        match self.boundary {
            Boundary::Curve(_) => 2,
            Boundary::Surface(_) => 3,
        }
    }

    /// Number of displaceable nodes (curve samples or mesh vertices).
    pub fn num_nodes(&self) -> usize {
        match &self.boundary {
            Boundary::Curve(c) => c.len(),
            Boundary::Surface(s) => s.mesh.num_vertices(),
        }
    }

    pub fn curve(&self) -> Option<&Curve> {
        match &self.boundary {
            Boundary::Curve(c) => Some(c),
            Boundary::Surface(_) => None,
        }
    }

    pub fn surface(&self) -> Option<&Surface> {
        match &self.boundary {
            Boundary::Curve(_) => None,
            Boundary::Surface(s) => Some(s),
        }
    }

    /// Node positions embedded in 3D (z = 0 for curves).
    pub fn node_positions(&self) -> Vec<Vector3<f64>> {
        match &self.boundary {
            Boundary::Curve(c) => c.nodes.iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect(),
            Boundary::Surface(s) => s.mesh.vertices.clone(),
        }
    }

    /// Outward unit normals at the displaceable nodes.
    pub fn node_normals(&self) -> Vec<Vector3<f64>> {
        match &self.boundary {
            Boundary::Curve(c) => c.normals().iter().map(|n| Vector3::new(n.x, n.y, 0.0)).collect(),
            Boundary::Surface(s) => s.vertex_normals.clone(),
        }
    }

    /// Move node `i` by `h·values[i]·normals[i]`, keeping indexing.
    ///
    /// No embedding check; [`perturb_normal`] is the checked entry point.
    pub fn displaced(&self, values: &[f64], h: f64, normals: &[Vector3<f64>]) -> Result<Shape> {
        let n = self.num_nodes();
        if values.len() != n || normals.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: values.len().min(normals.len()) });
        }
        let boundary = match &self.boundary {
            Boundary::Curve(c) => {
                let nodes = c
                    .nodes
                    .iter()
                    .zip(values.iter().zip(normals))
                    .map(|(p, (a, nv))| p + Vector2::new(nv.x, nv.y) * (h * a))
                    .collect();
                Boundary::Curve(Curve::from_samples(nodes)?)
            }
            Boundary::Surface(s) => {
                let vertices = s
                    .mesh
                    .vertices
                    .iter()
                    .zip(values.iter().zip(normals))
                    .map(|(p, (a, nv))| p + nv * (h * a))
                    .collect();
                let mesh = TriMesh { vertices, faces: s.mesh.faces.clone() };
                let vertex_normals = mesh.area_weighted_vertex_normals();
                Boundary::Surface(Surface { mesh, vertex_normals, center: s.center })
            }
        };
        Ok(Shape { label: self.label.clone(), boundary, scale: self.scale })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Degenerate(format!("{name} must be positive and finite, got {v}")))
    }
}

fn curve_shape(label: String, coeffs: &FourierCurve, nodes: usize) -> Result<Shape> {
    if nodes < 8 {
        return Err(Error::Resolution { got: nodes, min: 8 });
    }
    let curve = Curve::from_samples(coeffs.sample(nodes))?;
    let area = curve.signed_area();
    if area <= 0.0 {
        return Err(Error::InvertedOrientation { volume: area });
    }
    if curve.self_intersects() {
        return Err(Error::Degenerate("curve self-intersects".into()));
    }
    Ok(Shape { label, boundary: Boundary::Curve(curve), scale: 1.0 })
}

fn ellipsoid_shape(label: String, a: f64, b: f64, c: f64, subdiv: u32) -> Result<Shape> {
    let unit = TriMesh::icosphere(subdiv);
    let vertices = unit.vertices.iter().map(|u| Vector3::new(a * u.x, b * u.y, c * u.z)).collect();
    let vertex_normals = unit
        .vertices
        .iter()
        .map(|u| Vector3::new(u.x / a, u.y / b, u.z / c).normalize())
        .collect();
    let mesh = TriMesh { vertices, faces: unit.faces };
    mesh.validate()?;
    Ok(Shape {
        label,
        boundary: Boundary::Surface(Surface { mesh, vertex_normals, center: Vector3::zeros() }),
        scale: 1.0,
    })
}

/// Build the boundary described by `spec`.
pub fn make_shape(spec: &ShapeSpec) -> Result<Shape> {
    match spec {
        ShapeSpec::Circle { radius, nodes } => {
            positive("radius", *radius)?;
            curve_shape(format!("circle(r={radius})"), &FourierCurve::circle(*radius), *nodes)
        }
        ShapeSpec::Ellipse { a, b, nodes } => {
            positive("a", *a)?;
            positive("b", *b)?;
            curve_shape(format!("ellipse(a={a},b={b})"), &FourierCurve::ellipse(*a, *b), *nodes)
        }
        ShapeSpec::CurveFourier { coeffs, nodes } => {
            curve_shape("curve_fourier".into(), coeffs, *nodes)
        }
        ShapeSpec::CurveFile { path, nodes } => {
            let coeffs: FourierCurve = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            curve_shape(format!("curve_file({})", path.display()), &coeffs, *nodes)
        }
        ShapeSpec::Sphere { radius, subdiv } => {
            positive("radius", *radius)?;
            ellipsoid_shape(format!("sphere(r={radius},subdiv={subdiv})"), *radius, *radius, *radius, *subdiv)
        }
        ShapeSpec::Ellipsoid { a, b, c, subdiv } => {
            positive("a", *a)?;
            positive("b", *b)?;
            positive("c", *c)?;
            ellipsoid_shape(format!("ellipsoid(a={a},b={b},c={c},subdiv={subdiv})"), *a, *b, *c, *subdiv)
        }
        ShapeSpec::Mesh { path } => {
            let mesh = TriMesh::read_off(path)?;
            mesh.validate()?;
            let vertex_normals = mesh.area_weighted_vertex_normals();
            let center = mesh.vertex_mean();
            Ok(Shape {
                label: format!("mesh({})", path.display()),
                boundary: Boundary::Surface(Surface { mesh, vertex_normals, center }),
                scale: 1.0,
            })
        }
    }
}

/// Values of `field` at the displaceable nodes of `shape`.
pub fn eval_field(field: &PerturbationField, shape: &Shape) -> Result<Vec<f64>> {
    let f = field.compile(shape.dimension())?;
    let values: Vec<f64> = match &shape.boundary {
        Boundary::Curve(c) => (0..c.len()).map(|i| f.at_param(curve::param(i, c.len()))).collect(),
        Boundary::Surface(s) => s.mesh.vertices.iter().map(|v| f.at_direction(&(v - s.center))).collect(),
    };
    field::check_amplitude(&values)?;
    Ok(values)
}

/// Values of `field` at the quadrature nodes: curve samples in 2D, panel
/// centroids in 3D.
pub fn eval_field_at_quadrature(field: &PerturbationField, shape: &Shape) -> Result<Vec<f64>> {
    match &shape.boundary {
        Boundary::Curve(_) => eval_field(field, shape),
        Boundary::Surface(s) => {
            let f = field.compile(3)?;
            let values: Vec<f64> = (0..s.mesh.num_faces())
                .map(|k| f.at_direction(&(s.mesh.face_centroid(k) - s.center)))
                .collect();
            field::check_amplitude(&values)?;
            Ok(values)
        }
    }
}

/// The boundary `{x + h·a(x)·n(x)}` with node indexing preserved.
pub fn perturb_normal(shape: &Shape, field: &PerturbationField, h: f64) -> Result<Shape> {
    if !h.is_finite() {
        return Err(Error::InvalidParameter(format!("h must be finite, got {h}")));
    }
    if h == 0.0 {
        return Ok(shape.clone());
    }
    let values = eval_field(field, shape)?;
    let moved = shape
        .displaced(&values, h, &shape.node_normals())
        .map_err(|e| Error::Embedding { h, reason: e.to_string() })?;
    check_embedding(shape, &moved, h)?;
    Ok(moved)
}

fn check_embedding(before: &Shape, after: &Shape, h: f64) -> Result<()> {
    let fail = |reason: String| Err(Error::Embedding { h, reason });
    match (&before.boundary, &after.boundary) {
        (Boundary::Curve(c0), Boundary::Curve(c1)) => {
            for (i, (n0, n1)) in c0.normals().iter().zip(c1.normals()).enumerate() {
                if n0.dot(&n1) <= 0.0 {
                    return fail(format!("tangent reverses at node {i}"));
                }
            }
            if c1.signed_area() <= 0.0 {
                return fail("orientation flips".into());
            }
            if c1.self_intersects() {
                return fail("curve self-intersects".into());
            }
        }
        (Boundary::Surface(s0), Boundary::Surface(s1)) => {
            for f in 0..s0.mesh.num_faces() {
                let n0 = s0.mesh.face_normal(f);
                let va = s1.mesh.face_vector_area(f);
                if va.dot(&n0) <= 1e-3 * s0.mesh.face_area(f) {
                    return fail(format!("panel {f} inverts or collapses"));
                }
            }
            for (f, g) in s1.mesh.adjacent_faces() {
                if s1.mesh.face_normal(f).dot(&s1.mesh.face_normal(g)) <= 0.0 {
                    return fail(format!("adjacent panels {f} and {g} fold over"));
                }
            }
            let volume = s1.mesh.signed_volume();
            if volume <= 0.0 {
                return fail(format!("signed volume {volume} is not positive"));
            }
        }
        _ => unreachable!("perturbation preserves dimension"),
    }
    Ok(())
}

/// Dilate a 2D shape so it fits in a disk of radius 1/2.
///
/// Returns the shape and the factor applied (1 when already small enough).
/// NP eigenvalues are dilation invariant; the single layer potential on the
/// result has a negative definite discretization.
pub fn rescale_for_capacity(shape: &Shape) -> Result<(Shape, f64)> {
    let curve = shape
        .curve()
        .ok_or_else(|| Error::Unsupported("capacity rescaling applies to 2D shapes only".into()))?;
    // Sample finer than the nodes so bulges between samples count.
    let fine = curve.resample(4 * curve.len())?;
    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for p in &fine.nodes {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let center = (lo + hi) / 2.0;
    let radius = fine.nodes.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let s = if radius > 0.5 { 0.5 / radius } else { 1.0 };
    if s == 1.0 {
        return Ok((shape.clone(), 1.0));
    }
    let scaled = Curve {
        nodes: curve.nodes.iter().map(|p| p * s).collect(),
        d1: curve.d1.iter().map(|p| p * s).collect(),
        d2: curve.d2.iter().map(|p| p * s).collect(),
    };
    Ok((
        Shape { label: shape.label.clone(), boundary: Boundary::Curve(scaled), scale: shape.scale * s },
        s,
    ))
}
