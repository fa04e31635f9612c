//! Real orthonormal spherical harmonics.
//!
//! `Y_l^m` for `m > 0` carries `cos(mφ)`, for `m < 0` carries `sin(|m|φ)`.
//! No Condon–Shortley phase; `∫ Y_l^m Y_l'^m' dσ = δ` over the unit sphere.

use std::f64::consts::PI;

use nalgebra::Vector3;

/// Associated Legendre function `P_l^m(x)` without the `(−1)^m` phase.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in m + 2..=l {
        pll = ((2 * ll - 1) as f64 * x * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

fn normalization(l: usize, m: usize) -> f64 {
    // (l−m)!/(l+m)! as a running product to stay finite for moderate l.
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

/// `Y_l^m` at the direction of `p` (which need not be unit length).
pub fn real_sph_harm(l: usize, m: i64, p: &Vector3<f64>) -> f64 {
    let am = m.unsigned_abs() as usize;
    assert!(am <= l, "|m| must not exceed l");
    let r = p.norm();
    let cos_theta = if r > 0.0 { (p.z / r).clamp(-1.0, 1.0) } else { 1.0 };
    let phi = p.y.atan2(p.x);
    let base = normalization(l, am) * assoc_legendre(l, am, cos_theta);
    match m {
        0 => base,
        m if m > 0 => std::f64::consts::SQRT_2 * base * (am as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * base * (am as f64 * phi).sin(),
    }
}
