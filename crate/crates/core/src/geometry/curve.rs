//! Closed planar curves sampled at equispaced parameter values.
//!
//! A curve is stored by its samples `x(t_i)`, `t_i = 2πi/n`, and is understood
//! as the trigonometric interpolant of those samples. Derivatives come from
//! spectral differentiation, so trigonometric-polynomial curves are
//! represented exactly once `n` exceeds twice their degree.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fourier coefficients of a closed curve.
///
/// `x(t) = Σ_k cos[k]·cos(kt) + sin[k]·sin(kt)`, where the list index is the
/// frequency `k` for both lists (so `sin[0]` multiplies `sin(0) = 0` and has
/// no effect). Each entry is an `[x, y]` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCurve {
    #[serde(default)]
    pub cos: Vec<[f64; 2]>,
    #[serde(default)]
    pub sin: Vec<[f64; 2]>,
}

impl FourierCurve {
    pub fn circle(radius: f64) -> Self {
        Self::ellipse(radius, radius)
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        FourierCurve {
            cos: vec![[0.0, 0.0], [a, 0.0]],
            sin: vec![[0.0, 0.0], [0.0, b]],
        }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len()).saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> Vector2<f64> {
        let mut p = Vector2::zeros();
        for (k, c) in self.cos.iter().enumerate() {
            let ck = (k as f64 * t).cos();
            p += Vector2::new(c[0], c[1]) * ck;
        }
        for (k, s) in self.sin.iter().enumerate() {
            let sk = (k as f64 * t).sin();
            p += Vector2::new(s[0], s[1]) * sk;
        }
        p
    }

    pub fn sample(&self, n: usize) -> Vec<Vector2<f64>> {
        (0..n).map(|i| self.eval(param(i, n))).collect()
    }
}

/// Parameter value of node `i` out of `n`.
pub fn param(i: usize, n: usize) -> f64 {
    2.0 * PI * i as f64 / n as f64
}

/// Sampled closed curve with first and second parametric derivatives.
#[derive(Debug, Clone)]
pub struct Curve {
    pub nodes: Vec<Vector2<f64>>,
    pub d1: Vec<Vector2<f64>>,
    pub d2: Vec<Vector2<f64>>,
}

impl Curve {
    pub fn from_samples(nodes: Vec<Vector2<f64>>) -> Result<Self> {
        let n = nodes.len();
        if n < 8 {
            return Err(Error::Resolution { got: n, min: 8 });
        }
        let xs: Vec<f64> = nodes.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = nodes.iter().map(|p| p.y).collect();
        let (dx, ddx) = spectral_derivatives(&xs);
        let (dy, ddy) = spectral_derivatives(&ys);
        let d1 = dx.iter().zip(&dy).map(|(&a, &b)| Vector2::new(a, b)).collect();
        let d2 = ddx.iter().zip(&ddy).map(|(&a, &b)| Vector2::new(a, b)).collect();
        let curve = Curve { nodes, d1, d2 };
        if curve.speeds().iter().any(|&s| s <= 1e-14 || !s.is_finite()) {
            return Err(Error::Degenerate("curve has a vanishing tangent".into()));
        }
        Ok(curve)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// |x'(t_i)|
    pub fn speeds(&self) -> Vec<f64> {
        self.d1.iter().map(|d| d.norm()).collect()
    }

    /// Outward unit normals for a counter-clockwise parametrization.
    pub fn normals(&self) -> Vec<Vector2<f64>> {
        self.d1
            .iter()
            .map(|d| Vector2::new(d.y, -d.x) / d.norm())
            .collect()
    }

    /// Signed curvature, positive on convex counter-clockwise arcs.
    pub fn curvature(&self) -> Vec<f64> {
        self.d1
            .iter()
            .zip(&self.d2)
            .map(|(d, dd)| (d.x * dd.y - d.y * dd.x) / d.norm().powi(3))
            .collect()
    }

    /// Trapezoid weights `(2π/n)|x'(t_i)|`.
    pub fn weights(&self) -> Vec<f64> {
        let h = 2.0 * PI / self.len() as f64;
        self.speeds().into_iter().map(|s| s * h).collect()
    }

    /// Enclosed area, positive for counter-clockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let h = 2.0 * PI / self.len() as f64;
        0.5 * h
            * self
                .nodes
                .iter()
                .zip(&self.d1)
                .map(|(p, d)| p.x * d.y - p.y * d.x)
                .sum::<f64>()
    }

    /// Trigonometric resampling to `m` nodes.
    pub fn resample(&self, m: usize) -> Result<Curve> {
        if m == self.len() {
            return Ok(self.clone());
        }
        let xs: Vec<f64> = self.nodes.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = self.nodes.iter().map(|p| p.y).collect();
        let rx = resample(&xs, m);
        let ry = resample(&ys, m);
        Curve::from_samples(rx.into_iter().zip(ry).map(|(x, y)| Vector2::new(x, y)).collect())
    }

    /// True when two non-adjacent polygon edges cross.
    pub fn self_intersects(&self) -> bool {
        let n = self.len();
        for i in 0..n {
            let (a, b) = (self.nodes[i], self.nodes[(i + 1) % n]);
            for j in i + 2..n {
                if (j + 1) % n == i {
                    continue;
                }
                let (c, d) = (self.nodes[j], self.nodes[(j + 1) % n]);
                if segments_cross(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }
}

fn cross2(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_cross(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> bool {
    let d1 = cross2(b - a, c - a);
    let d2 = cross2(b - a, d - a);
    let d3 = cross2(d - c, a - c);
    let d4 = cross2(d - c, b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Signed integer frequency of FFT bin `j` out of `n`.
fn freq(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

fn fft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn ifft_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// First and second derivatives of a periodic sample vector on `[0, 2π)`.
pub fn spectral_derivatives(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let coeffs = fft(values);
    let mut c1 = coeffs.clone();
    let mut c2 = coeffs;
    for j in 0..n {
        let k = freq(j, n);
        // Nyquist mode has no well-defined odd derivative.
        if n % 2 == 0 && j == n / 2 {
            c1[j] = Complex64::new(0.0, 0.0);
        } else {
            c1[j] *= Complex64::new(0.0, k);
        }
        c2[j] *= -k * k;
    }
    (ifft_real(c1), ifft_real(c2))
}

/// Trigonometric interpolation of periodic samples onto `m` equispaced nodes.
pub fn resample(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    let coeffs = fft(values);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let kmax = (n.min(m) as i64 - 1) / 2;
    for k in -kmax..=kmax {
        let src = k.rem_euclid(n as i64) as usize;
        let dst = k.rem_euclid(m as i64) as usize;
        out[dst] = coeffs[src];
    }
    // Split or fold a lone Nyquist term so the interpolant stays real.
    if n.min(m) % 2 == 0 {
        let k = (n.min(m) / 2) as i64;
        if n <= m {
            let c = coeffs[(n / 2) % n] * 0.5;
            out[k.rem_euclid(m as i64) as usize] += c;
            out[(-k).rem_euclid(m as i64) as usize] += c;
        } else {
            let c = coeffs[k as usize] + coeffs[(-k).rem_euclid(n as i64) as usize];
            out[m / 2] += c;
        }
    }
    let scale = m as f64 / n as f64;
    ifft_real(out.into_iter().map(|c| c * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn circle_geometry_is_exact() {
        let c = Curve::from_samples(FourierCurve::circle(1.0).sample(64)).unwrap();
        for (k, (n, p)) in c.curvature().iter().zip(c.normals().iter().zip(&c.nodes)) {
            assert_abs_diff_eq!(*k, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!((n - p).norm(), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(c.weights().iter().sum::<f64>(), 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_area_and_unit_normals() {
        let c = Curve::from_samples(FourierCurve::ellipse(2.0, 1.0).sample(64)).unwrap();
        assert_abs_diff_eq!(c.signed_area(), 2.0 * PI, epsilon = 1e-12);
        for n in c.normals() {
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn resampling_reproduces_trig_polynomials() {
        let f = |t: f64| 1.0 + (3.0 * t).cos() - 0.5 * (2.0 * t).sin();
        let coarse: Vec<f64> = (0..16).map(|i| f(param(i, 16))).collect();
        let fine = resample(&coarse, 40);
        for (i, v) in fine.iter().enumerate() {
            assert_abs_diff_eq!(*v, f(param(i, 40)), epsilon = 1e-12);
        }
        let back = resample(&fine, 16);
        for (a, b) in back.iter().zip(&coarse) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn clockwise_curve_has_negative_area() {
        let mut pts = FourierCurve::circle(1.0).sample(32);
        pts.reverse();
        let c = Curve::from_samples(pts).unwrap();
        assert!(c.signed_area() < 0.0);
    }

    #[test]
    fn figure_eight_self_intersects() {
        let fig = FourierCurve { cos: vec![[0.0, 0.0]], sin: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.5]] };
        let c = Curve::from_samples(fig.sample(64)).unwrap();
        assert!(c.self_intersects());
        let circle = Curve::from_samples(FourierCurve::circle(1.0).sample(64)).unwrap();
        assert!(!circle.self_intersects());
    }
}
