//! Closed-form integrals over a flat triangle with unit density.
//!
//! For a target `x` and triangle `T`:
//! - `potential(x) = ∫_T 1/|x−y| dy`
//! - `field(x) = ∫_T (x−y)/|x−y|³ dy = −∇_x potential(x)`
//!
//! Both follow from splitting `x` into its height `d` above the plane and
//! its projection `ρ`: edge terms carry a logarithm, the height term carries
//! the solid angle.

use nalgebra::Vector3;

/// Per-edge geometry relative to the projected target point.
struct Edge {
    /// In-plane outward unit normal of the edge.
    outward: Vector3<f64>,
    /// Signed distance from the projection to the edge line (positive inside).
    p0: f64,
    /// `∫_edge 1/|x−y| dl`.
    line_integral: f64,
    /// Arctangent difference entering the height term.
    angle: f64,
}

fn edges(x: &Vector3<f64>, tri: &[Vector3<f64>; 3], normal: &Vector3<f64>, d: f64) -> [Edge; 3] {
    let rho = x - normal * d;
    let ad = d.abs();
    std::array::from_fn(|k| {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let len = (b - a).norm();
        let tangent = (b - a) / len;
        let outward = tangent.cross(normal);
        let l_plus = (b - rho).dot(&tangent);
        let l_minus = (a - rho).dot(&tangent);
        let p0 = (a - rho).dot(&outward);
        let r_plus = (x - b).norm();
        let r_minus = (x - a).norm();
        let r0_sq = p0 * p0 + d * d;
        let scale = len.max(r_plus).max(r_minus);
        // On the edge line the log term is singular but multiplied by p0 = 0.
        let on_line = r0_sq.sqrt() <= 1e-13 * scale;
        let line_integral = if on_line {
            0.0
        } else if l_minus >= 0.0 {
            ((r_plus + l_plus) / (r_minus + l_minus)).ln()
        } else if l_plus <= 0.0 {
            // Mirror image avoiding cancellation in R + l for l < 0.
            ((r_minus - l_minus) / (r_plus - l_plus)).ln()
        } else {
            // Projection between the endpoints: R− + l− = r0²/(R− − l−).
            ((r_plus + l_plus) * (r_minus - l_minus) / r0_sq).ln()
        };
        let angle = if p0.abs() <= 1e-14 * scale {
            0.0
        } else {
            (p0 * l_plus / (r0_sq + ad * r_plus)).atan() - (p0 * l_minus / (r0_sq + ad * r_minus)).atan()
        };
        Edge { outward, p0, line_integral, angle }
    })
}

fn plane(tri: &[Vector3<f64>; 3]) -> Vector3<f64> {
    (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize()
}

/// `∫_T 1/|x−y| dy`, exact for flat triangles including on-panel targets.
pub fn potential(x: &Vector3<f64>, tri: &[Vector3<f64>; 3]) -> f64 {
    let normal = plane(tri);
    let d = (x - tri[0]).dot(&normal);
    edges(x, tri, &normal, d)
        .iter()
        .map(|e| e.p0 * e.line_integral - d.abs() * e.angle)
        .sum()
}

/// Signed solid angle `∫_T (x−y)·n/|x−y|³ dy` (negative below the plane,
/// i.e. on the side opposite the normal). Zero for coplanar targets.
pub fn solid_angle(x: &Vector3<f64>, tri: &[Vector3<f64>; 3]) -> f64 {
    let r = [tri[0] - x, tri[1] - x, tri[2] - x];
    let l = [r[0].norm(), r[1].norm(), r[2].norm()];
    let num = r[0].dot(&r[1].cross(&r[2]));
    let den = l[0] * l[1] * l[2] + r[0].dot(&r[1]) * l[2] + r[0].dot(&r[2]) * l[1] + r[1].dot(&r[2]) * l[0];
    -2.0 * num.atan2(den)
}

/// `∫_T (x−y)/|x−y|³ dy` for targets off the closed triangle.
pub fn field(x: &Vector3<f64>, tri: &[Vector3<f64>; 3]) -> Vector3<f64> {
    let normal = plane(tri);
    let d = (x - tri[0]).dot(&normal);
    let in_plane: Vector3<f64> = edges(x, tri, &normal, d)
        .iter()
        .map(|e| e.outward * e.line_integral)
        .sum();
    in_plane + normal * solid_angle(x, tri)
}
