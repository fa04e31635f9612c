use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::harmonics::real_sph_harm;
use crate::error::{Error, Result};

/// Scalar function `a` on the boundary driving `x ↦ x + h·a(x)·n(x)`.
///
/// 2D fields are functions of the curve parameter `t`; 3D fields are
/// functions of the direction from the shape center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationField {
    Constant { value: f64 },
    SphericalHarmonic { l: usize, m: i64 },
    FourierMode2d { k: usize },
    RandomBandlimited { max_degree: usize, seed: u64 },
}

impl PerturbationField {
    pub fn describe(&self) -> String {
        match self {
            Self::Constant { value } => format!("constant({value})"),
            Self::SphericalHarmonic { l, m } => format!("spherical_harmonic(l={l},m={m})"),
            Self::FourierMode2d { k } => format!("fourier_mode_2d(k={k})"),
            Self::RandomBandlimited { max_degree, seed } => {
                format!("random_bandlimited(max_degree={max_degree},seed={seed})")
            }
        }
    }

    /// Resolve the field for a given dimension (draws random coefficients).
    pub fn compile(&self, dim: usize) -> Result<FieldFn> {
        let incompatible = || Error::IncompatibleField { field: self.describe(), dim };
        let kind = match *self {
            Self::Constant { value } => {
                if !value.is_finite() || value.abs() > 1.0 {
                    return Err(Error::FieldAmplitude { max: value.abs() });
                }
                Compiled::Constant(value)
            }
            Self::SphericalHarmonic { l, m } => {
                if dim != 3 {
                    return Err(incompatible());
                }
                if m.unsigned_abs() as usize > l {
                    return Err(Error::InvalidParameter(format!("|m| = {} exceeds l = {l}", m.abs())));
                }
                Compiled::Harmonic { l, m }
            }
            Self::FourierMode2d { k } => {
                if dim != 2 {
                    return Err(incompatible());
                }
                Compiled::Fourier { k }
            }
            Self::RandomBandlimited { max_degree, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                match dim {
                    2 => random_trig(max_degree, &mut rng),
                    3 => random_spherical(max_degree, &mut rng),
                    _ => return Err(incompatible()),
                }
            }
        };
        Ok(FieldFn { dim, kind })
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Constant(f64),
    Harmonic { l: usize, m: i64 },
    Fourier { k: usize },
    Trig { coeffs: Vec<(f64, f64)>, scale: f64 },
    Spherical { coeffs: Vec<(usize, i64, f64)>, scale: f64 },
}

/// A field resolved for one dimension, cheap to evaluate.
#[derive(Debug, Clone)]
pub struct FieldFn {
    dim: usize,
    kind: Compiled,
}

impl FieldFn {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Value at curve parameter `t` (2D fields).
    pub fn at_param(&self, t: f64) -> f64 {
        match &self.kind {
            Compiled::Constant(c) => *c,
            Compiled::Fourier { k } => (*k as f64 * t).cos(),
            Compiled::Trig { coeffs, scale } => eval_trig(coeffs, t) / scale,
            _ => unreachable!("3D field evaluated at a curve parameter"),
        }
    }

    /// Value in the direction of `p` (3D fields).
    pub fn at_direction(&self, p: &Vector3<f64>) -> f64 {
        match &self.kind {
            Compiled::Constant(c) => *c,
            Compiled::Harmonic { l, m } => real_sph_harm(*l, *m, p),
            Compiled::Spherical { coeffs, scale } => eval_spherical(coeffs, p) / scale,
            _ => unreachable!("2D field evaluated at a 3D point"),
        }
    }
}

/// Rejects any value outside `[-1, 1]`.
pub fn check_amplitude(values: &[f64]) -> Result<()> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !max.is_finite() || max > 1.0 + 1e-12 {
        return Err(Error::FieldAmplitude { max });
    }
    Ok(())
}

fn eval_trig(coeffs: &[(f64, f64)], t: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, (c, s))| c * (k as f64 * t).cos() + s * (k as f64 * t).sin())
        .sum()
}

fn eval_spherical(coeffs: &[(usize, i64, f64)], p: &Vector3<f64>) -> f64 {
    coeffs.iter().map(|&(l, m, c)| c * real_sph_harm(l, m, p)).sum()
}

// Peak of a degree-L trigonometric polynomial exceeds its maximum over a grid
// of spacing δ by at most the factor 1/cos(Lδ/2); dividing by that bound
// keeps the field inside [-1, 1] everywhere.
fn random_trig(degree: usize, rng: &mut ChaCha8Rng) -> Compiled {
    let coeffs: Vec<(f64, f64)> = (0..=degree)
        .map(|k| {
            let c = rng.random_range(-1.0..1.0);
            let s = if k == 0 { 0.0 } else { rng.random_range(-1.0..1.0) };
            (c, s)
        })
        .collect();
    let n = 64 * (degree + 1);
    let delta = 2.0 * PI / n as f64;
    let grid_max = (0..n)
        .map(|i| eval_trig(&coeffs, i as f64 * delta).abs())
        .fold(0.0, f64::max);
    let scale = grid_max / (degree as f64 * delta / 2.0).cos();
    Compiled::Trig { coeffs, scale: scale.max(f64::MIN_POSITIVE) }
}

fn random_spherical(degree: usize, rng: &mut ChaCha8Rng) -> Compiled {
    let mut coeffs = Vec::new();
    for l in 0..=degree {
        for m in -(l as i64)..=(l as i64) {
            coeffs.push((l, m, rng.random_range(-1.0..1.0)));
        }
    }
    let nth = 16 * (degree + 1);
    let nph = 2 * nth;
    let delta = PI / nth as f64;
    let mut grid_max: f64 = 0.0;
    for i in 0..=nth {
        let th = i as f64 * delta;
        for j in 0..nph {
            let ph = j as f64 * delta;
            let p = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
            grid_max = grid_max.max(eval_spherical(&coeffs, &p).abs());
            if i == 0 || i == nth {
                break;
            }
        }
    }
    // Along any great circle the field is a degree-L trigonometric polynomial,
    // and every point is within δ of a grid node along some such circle.
    let scale = grid_max / (degree as f64 * delta).cos();
    Compiled::Spherical { coeffs, scale: scale.max(f64::MIN_POSITIVE) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_fields_are_reproducible_and_bounded() {
        let f = PerturbationField::RandomBandlimited { max_degree: 4, seed: 7 };
        let a = f.compile(3).unwrap();
        let b = f.compile(3).unwrap();
        let mut peak: f64 = 0.0;
        for i in 0..2000 {
            let p = Vector3::new((i as f64 * 0.37).sin(), (i as f64 * 1.13).cos(), (i as f64 * 0.71).sin());
            assert_eq!(a.at_direction(&p), b.at_direction(&p));
            peak = peak.max(a.at_direction(&p).abs());
        }
        assert!(peak <= 1.0 && peak > 0.8, "peak {peak}");

        let c = f.compile(2).unwrap();
        let vals: Vec<f64> = (0..5000).map(|i| c.at_param(i as f64 * 2.0 * PI / 5000.0)).collect();
        check_amplitude(&vals).unwrap();
    }

    #[test]
    fn different_seeds_differ() {
        let a = PerturbationField::RandomBandlimited { max_degree: 4, seed: 1 }.compile(3).unwrap();
        let b = PerturbationField::RandomBandlimited { max_degree: 4, seed: 2 }.compile(3).unwrap();
        let p = Vector3::new(0.2, 0.3, 0.9);
        assert_ne!(a.at_direction(&p), b.at_direction(&p));
    }

    #[test]
    fn incompatible_dimensions_are_rejected() {
        let y = PerturbationField::SphericalHarmonic { l: 2, m: 0 };
        assert!(matches!(y.compile(2), Err(Error::IncompatibleField { .. })));
        let f = PerturbationField::FourierMode2d { k: 2 };
        assert!(matches!(f.compile(3), Err(Error::IncompatibleField { .. })));
        let big = PerturbationField::Constant { value: 1.5 };
        assert!(matches!(big.compile(3), Err(Error::FieldAmplitude { .. })));
    }

    #[test]
    fn amplitude_check_flags_large_harmonics() {
        // Y_8^0 peaks at sqrt(17/(4π)) > 1 at the poles.
        let y = PerturbationField::SphericalHarmonic { l: 8, m: 0 }.compile(3).unwrap();
        let v = y.at_direction(&Vector3::new(0.0, 0.0, 1.0));
        assert!(check_amplitude(&[v]).is_err());
    }
}
