use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::Serialize;

use crate::assembly::{panel, DiscGeometry, Discretization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExteriorValue {
    /// `S[ρ](z)`.
    pub value: f64,
    /// `v·∇S[ρ](z)`.
    pub directional_derivative: f64,
}

/// Winding number of the boundary around `z`: 1 inside, 0 outside.
pub fn winding_number(disc: &Discretization, z: &Vector3<f64>) -> f64 {
    match &disc.geometry {
        DiscGeometry::Curve(c) => {
            let n = c.len();
            let mut total = 0.0;
            for i in 0..n {
                let a = c.nodes[i] - z.xy();
                let b = c.nodes[(i + 1) % n] - z.xy();
                total += (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
            }
            total / (2.0 * PI)
        }
        DiscGeometry::Panels(m) => {
            -(0..m.num_faces()).map(|f| panel::solid_angle(z, &m.corners(f))).sum::<f64>() / (4.0 * PI)
        }
    }
}

/// Contract for exterior evaluation: outside the domain and farther than
/// twice the size of the nearest panel.
pub fn check_exterior(disc: &Discretization, z: &Vector3<f64>) -> Result<()> {
    let (nearest, distance) = disc
        .nodes
        .iter()
        .enumerate()
        .map(|(i, x)| (i, (z - x).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidParameter("empty discretization".into()))?;
    let winding = winding_number(disc, z);
    if winding.abs() > 0.5 {
        return Err(Error::InteriorPoint { winding });
    }
    let panel_size = disc.panel_size(nearest);
    if distance <= 2.0 * panel_size {
        return Err(Error::NearField { distance, panel_size });
    }
    Ok(())
}

/// `S[ρ](z)` and `v·∇S[ρ](z)` at an exterior point by smooth quadrature.
pub fn eval_exterior(
    disc: &Discretization,
    density: &[f64],
    z: &Vector3<f64>,
    v: &Vector3<f64>,
) -> Result<ExteriorValue> {
    if density.len() != disc.len() {
        return Err(Error::DimensionMismatch { expected: disc.len(), found: density.len() });
    }
    check_exterior(disc, z)?;
    let two_d = disc.dimension() == 2;
    let (mut value, mut deriv) = (0.0, 0.0);
    for ((x, w), rho) in disc.nodes.iter().zip(&disc.weights).zip(density) {
        let d = z - x;
        let r2 = d.norm_squared();
        let q = rho * w;
        if two_d {
            value += q * r2.ln() / (4.0 * PI);
            deriv += q * v.dot(&d) / (2.0 * PI * r2);
        } else {
            let r = r2.sqrt();
            value -= q / (4.0 * PI * r);
            deriv += q * v.dot(&d) / (4.0 * PI * r2 * r);
        }
    }
    Ok(ExteriorValue { value, directional_derivative: deriv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::discretize;
    use crate::geometry::{make_shape, ShapeSpec};

    fn sphere_disc(subdiv: u32) -> Discretization {
        discretize(&make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv }).unwrap(), 0).unwrap()
    }

    #[test]
    fn shell_theorem() {
        let d = sphere_disc(3);
        let ones = vec![1.0; d.len()];
        let z = Vector3::new(0.0, 0.0, 2.0);
        let out = eval_exterior(&d, &ones, &z, &(z / 2.0)).unwrap();
        assert!((out.value + 0.5).abs() < 0.005, "{}", out.value);
        assert!((out.directional_derivative - 0.25).abs() < 0.0025, "{}", out.directional_derivative);
    }

    #[test]
    fn shell_theorem_error_shrinks_under_refinement() {
        let z = Vector3::new(1.2, -0.9, 1.1).normalize() * 2.0;
        let err = |s| {
            let d = sphere_disc(s);
            (eval_exterior(&d, &vec![1.0; d.len()], &z, &Vector3::x()).unwrap().value + 0.5).abs()
        };
        assert!(err(3) < err(2));
    }

    #[test]
    fn zero_density_gives_zero() {
        let d = sphere_disc(2);
        let out = eval_exterior(&d, &vec![0.0; d.len()], &Vector3::new(3.0, 0.0, 0.0), &Vector3::x()).unwrap();
        assert_eq!(out, ExteriorValue { value: 0.0, directional_derivative: 0.0 });
    }

    #[test]
    fn interior_and_near_points_rejected() {
        let d = sphere_disc(2);
        let ones = vec![1.0; d.len()];
        assert!(matches!(
            eval_exterior(&d, &ones, &Vector3::new(0.1, 0.2, 0.0), &Vector3::x()),
            Err(Error::InteriorPoint { .. })
        ));
        assert!(matches!(
            eval_exterior(&d, &ones, &Vector3::new(0.0, 0.0, 1.05), &Vector3::x()),
            Err(Error::NearField { .. })
        ));
    }

    #[test]
    fn winding_numbers_2d() {
        let s = make_shape(&ShapeSpec::Ellipse { a: 0.5, b: 0.25, nodes: 64 }).unwrap();
        let d = discretize(&s, 64).unwrap();
        assert!((winding_number(&d, &Vector3::zeros()) - 1.0).abs() < 1e-12);
        assert!(winding_number(&d, &Vector3::new(1.0, 0.0, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn circle_exterior_potential() {
        // Uniform density on a circle of radius r: S[1](z) = r·log|z| outside.
        let s = make_shape(&ShapeSpec::Circle { radius: 0.5, nodes: 64 }).unwrap();
        let d = discretize(&s, 64).unwrap();
        let z = Vector3::new(1.0, 0.7, 0.0);
        let out = eval_exterior(&d, &vec![1.0; 64], &z, &Vector3::x()).unwrap();
        assert!((out.value - 0.5 * z.norm().ln()).abs() < 1e-12);
        assert!((out.directional_derivative - 0.5 * z.x / z.norm_squared()).abs() < 1e-12);
    }
}
