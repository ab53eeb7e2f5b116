//! Reference computations that share no code path with the kernel formulas.
//!
//! Everything here is brute-force quadrature of a defining integral. The
//! validation suites compare the closed forms in [`crate::freeresolvent`]
//! against these.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::quad::{composite_gauss_legendre, gauss_legendre_on};

/// `∫_{S^{d−1}} e^{itω·e} dω` by quadrature in `μ = ω·e`
/// (`d = 3`: `2π∫e^{itμ}dμ`; `d = 5`: `2π²∫(1−μ²)e^{itμ}dμ`).
pub fn sphere_integral_of_plane_wave(d: usize, t: f64) -> Complex64 {
    let panels = 4 + (t.abs() * 2.0) as usize;
    let (x, w) = composite_gauss_legendre(20, -1.0, 1.0, panels);
    let (pref, weight): (f64, fn(f64) -> f64) = match d {
        3 => (2.0 * PI, |_| 1.0),
        5 => (2.0 * PI * PI, |mu| 1.0 - mu * mu),
        _ => panic!("sphere quadrature only for d = 3, 5"),
    };
    x.iter()
        .zip(&w)
        .map(|(mu, wi)| Complex64::from_polar(wi * weight(*mu), t * mu))
        .sum::<Complex64>()
        * pref
}

/// Three-dimensional resolvent kernel from its spectral representation,
/// `R₀(z)(r) = (2π²r)⁻¹ ∫₀^∞ ρ sin(ρr)/(ρ − z) dρ`, for `Im z > 0`.
///
/// The Abel-regularized split `ρ/(ρ−z) = 1 + z/(ρ−z)` leaves an absolutely
/// convergent-by-parts integral, which is summed on `[0, P]` with
/// Gauss–Legendre panels and closed by the asymptotic integration-by-parts
/// series on `[P, ∞)`.
pub fn resolvent_kernel_spectral(z: Complex64, r: f64) -> Complex64 {
    assert!(z.im > 0.0, "spectral oracle needs Im z > 0");
    let cut = (400.0 / r).max(60.0 * z.norm()).max(400.0);
    let width = (PI / r).min(z.im.max(0.05)).min(0.5);
    let panels = (cut / width).ceil() as usize;
    let (x, w) = composite_gauss_legendre(12, 0.0, cut, panels);
    let mut body = Complex64::new(0.0, 0.0);
    for (rho, wi) in x.iter().zip(&w) {
        body += wi * (rho * r).sin() / (rho - z);
    }
    // ∫_P^∞ sin(ρr) f(ρ) dρ with f = 1/(ρ − z), f^{(k)} = (−1)^k k!/(ρ−z)^{k+1}
    let (s, c) = (cut * r).sin_cos();
    let u = 1.0 / (cut - z);
    let mut tail = Complex64::new(0.0, 0.0);
    let mut fact = 1.0;
    let mut upow = u;
    for k in 0..16usize {
        if k > 0 {
            fact *= k as f64;
            upow *= u;
        }
        let fk = upow * fact * if k % 2 == 0 { 1.0 } else { -1.0 };
        let rk = r.powi(k as i32 + 1);
        // pattern: +cos f, −sin f', −cos f'', +sin f''', …
        let term = match k % 4 {
            0 => c * fk,
            1 => -s * fk,
            2 => -c * fk,
            _ => s * fk,
        } / rk;
        tail += term;
    }
    (1.0 / r + z * (body + tail)) / (2.0 * PI * PI * r)
}

/// `α₁(d)` from the symbol `|ξ|⁻¹`: `(2π)^{−d}∫₀^∞ ρ^{d−2} σ̂(ρ) dρ` at `|x| = 1`,
/// Abel-regularized with `e^{−ερ}` and Richardson-extrapolated in `ε²`.
pub fn riesz_constant_radial(d: usize) -> f64 {
    let at = |eps: f64| -> f64 {
        let cut = 45.0 / eps;
        let panels = (cut / 1.0).ceil() as usize;
        let (x, w) = composite_gauss_legendre(16, 0.0, cut, panels);
        x.iter()
            .zip(&w)
            .map(|(rho, wi)| {
                let damp = (-eps * rho).exp();
                let radial = match d {
                    3 => rho * 4.0 * PI * rho.sin() / rho,
                    5 => 8.0 * PI * PI * (rho.sin() - rho * rho.cos()),
                    _ => panic!("d = 3, 5 only"),
                };
                wi * radial * damp
            })
            .sum::<f64>()
            / (2.0 * PI).powi(d as i32)
    };
    let e = 0.08;
    let (a0, a1, a2) = (at(e), at(e / 2.0), at(e / 4.0));
    let b0 = (4.0 * a1 - a0) / 3.0;
    let b1 = (4.0 * a2 - a1) / 3.0;
    (16.0 * b1 - b0) / 15.0
}

/// `∫_{B(0,R)} |x − y|^{−p} dy` for `|x| = a`, `p ∈ {1, 2}`, by radial
/// quadrature of the shell averages.
pub fn ball_singular_integral_radial(radius: f64, a: f64, p: u32) -> f64 {
    // shell average of |x−y|^{−p} over |y| = ρ:
    //   p = 1: 1/max(a, ρ)
    //   p = 2: ln((a+ρ)/|a−ρ|)/(2aρ)
    let shell = |rho: f64| -> f64 {
        match p {
            1 => 1.0 / a.max(rho),
            2 => {
                if a == 0.0 {
                    1.0 / (rho * rho)
                } else {
                    ((a + rho) / (a - rho).abs()).ln() / (2.0 * a * rho)
                }
            }
            _ => panic!("p = 1, 2 only"),
        }
    };
    let mut total = 0.0;
    let mut pieces = vec![0.0, radius];
    if a > 0.0 && a < radius {
        pieces = vec![0.0, a, radius];
    }
    for seg in pieces.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        // geometric grading toward the log singularity at ρ = a
        let mut edges = vec![lo, hi];
        for k in 1..=40 {
            let f = 0.5f64.powi(k);
            if a == hi {
                edges.push(hi - (hi - lo) * f);
            }
            if a == lo && a > 0.0 {
                edges.push(lo + (hi - lo) * f);
            }
        }
        edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
        edges.dedup();
        for e in edges.windows(2) {
            let (x, w) = gauss_legendre_on(20, e[0], e[1]);
            for (rho, wi) in x.iter().zip(&w) {
                total += wi * 4.0 * PI * rho * rho * shell(*rho);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_integral_small_t() {
        let v = sphere_integral_of_plane_wave(3, 1e-3);
        assert!((v.re - 4.0 * PI).abs() < 1e-5);
        let v5 = sphere_integral_of_plane_wave(5, 1e-3);
        assert!((v5.re - 8.0 * PI * PI / 3.0).abs() < 1e-5);
    }

    #[test]
    fn ball_integral_at_centre() {
        let v = ball_singular_integral_radial(1.0, 0.0, 2);
        assert!((v - 4.0 * PI).abs() < 1e-9);
        let v1 = ball_singular_integral_radial(1.0, 0.0, 1);
        assert!((v1 - 2.0 * PI).abs() < 1e-9);
    }
}
