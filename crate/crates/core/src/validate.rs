//! Oracle comparisons shared by the test suites and the `validate` command.
//!
//! Each check returns measured quantities; pass/fail thresholds live with
//! the caller.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretize::{apply_resolvent_fourier, assemble_bs, build_quadrature_for, GridFunction, Potential, Quadrature};
use crate::error::Result;
use crate::freeresolvent::{riesz_limit, sheet_jump, sphere_transform, KernelAt, KernelConstants};
use crate::oracles::{riesz_constant_radial, sphere_integral_of_plane_wave};
use crate::linalg::CMatrix;
use crate::logcover::SheetPoint;
use crate::quad::composite_gauss_legendre;
use crate::resonances::{factorization_gap, loglog_slope, middle_decade, singular_value_profile, singular_value_profile_power};

/// `(R₀(z) * g)(x)` for the radial Gaussian `g = exp(−|y|²/(2s²))` at `|x| = a`,
/// reduced to one radial integral of the kernel:
/// `(2πs²/a) ∫₀^∞ R₀(t)·t·[e^{−(a−t)²/2s²} − e^{−(a+t)²/2s²}] dt`.
pub fn gaussian_convolution(kern: &KernelAt, s: f64, a: f64) -> Complex64 {
    convolve_gaussian(|t| kern.value(t), s, a)
}

fn convolve_gaussian(kern: impl Fn(f64) -> Complex64, s: f64, a: f64) -> Complex64 {
    let top = a + 12.0 * s;
    let mut edges = vec![0.0];
    // grade toward t = 0, where R₀(t)·t ~ α₁/t
    let mut e = 1e-6 * s;
    while e < (a - 8.0 * s).max(s) {
        edges.push(e);
        e *= 2.0;
    }
    let lo = (a - 8.0 * s).max(e);
    let steps = ((top - lo) / (0.25 * s)).ceil().max(1.0) as usize;
    for k in 0..=steps {
        edges.push(lo + (top - lo) * k as f64 / steps as f64);
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let two_s2 = 2.0 * s * s;
    let mut acc = Complex64::new(0.0, 0.0);
    for w in edges.windows(2) {
        let (x, wt) = composite_gauss_legendre(12, w[0], w[1], 1);
        for (t, wi) in x.iter().zip(&wt) {
            let bracket = if a == 0.0 {
                // limit a → 0 of the bracket divided by a
                2.0 * t / (s * s) * (-(t * t) / two_s2).exp()
            } else {
                ((-(a - t).powi(2) / two_s2).exp() - (-(a + t).powi(2) / two_s2).exp()) / a
            };
            acc += kern(*t) * (t * bracket * wi);
        }
    }
    acc * (2.0 * PI * s * s)
}

/// Result of the kernel-against-FFT comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOracleReport {
    pub relative_l2_error: f64,
    pub samples: usize,
}

/// Convolution of the closed-form kernel with a Gaussian bump of width `s`
/// against the periodic FFT resolvent on a `grid³` box of side `side`,
/// compared on every `stride`-th grid point.
pub fn kernel_fourier_check(z: Complex64, s: f64, grid: usize, side: f64, stride: usize) -> Result<KernelOracleReport> {
    kernel_fourier_check_scaled(z, s, grid, side, stride, 1.0)
}

/// [`kernel_fourier_check`] with the Riesz part `α₁/r²` of the closed-form
/// kernel multiplied by `alpha1_scale`; any value other than 1 is a
/// deliberately wrong kernel for negative controls.
pub fn kernel_fourier_check_scaled(
    z: Complex64,
    s: f64,
    grid: usize,
    side: f64,
    stride: usize,
    alpha1_scale: f64,
) -> Result<KernelOracleReport> {
    let zp = SheetPoint::from_complex(z)?;
    let kern = KernelAt::new(3, zp)?;
    let f = GridFunction::from_fn(grid, side, |x| {
        Complex64::new((-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s * s)).exp(), 0.0)
    });
    let u = apply_resolvent_fourier(z, &f)?;
    let mut pts = Vec::new();
    for i in (0..grid).step_by(stride) {
        for j in (0..grid).step_by(stride) {
            for k in (0..grid).step_by(stride) {
                pts.push((u.point(i, j, k), u.at(i, j, k)));
            }
        }
    }
    // the convolution is radial: evaluate once per distinct radius
    let mut radii: Vec<f64> = pts.iter().map(|(p, _)| crate::discretize::norm3(*p)).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let alpha = riesz_limit(3, 1.0)?;
    let kernel = |t: f64| kern.value(t) + (alpha1_scale - 1.0) * alpha / (t * t);
    let vals: Vec<Complex64> = radii.par_iter().map(|&a| convolve_gaussian(kernel, s, a)).collect();
    let lookup = |a: f64| {
        let i = radii.partition_point(|r| *r < a - 1e-12 * a.max(1.0));
        vals[i.min(vals.len() - 1)]
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (p, oracle) in &pts {
        let got = lookup(crate::discretize::norm3(*p));
        num += (got - oracle).norm_sqr();
        den += oracle.norm_sqr();
    }
    Ok(KernelOracleReport {
        relative_l2_error: (num / den).sqrt(),
        samples: pts.len(),
    })
}

/// Relative weighted-ℓ² residual of the Nyström product `K b` against
/// `V·(R₀ b)` from the FFT oracle, for the smooth bump `b = (1 − |x|²/R²)⁶`.
pub fn nystrom_residual(z: Complex64, v: &Potential, n: usize, grid: usize, side: f64) -> Result<f64> {
    let rad = v.support_radius;
    let bump = |x: [f64; 3]| {
        let t = 1.0 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (rad * rad);
        Complex64::new(if t > 0.0 { t.powi(6) } else { 0.0 }, 0.0)
    };
    let q = build_quadrature_for(v, rad, n)?;
    let k = assemble_bs(SheetPoint::from_complex(z)?, v, &q)?;
    let b = CMatrix::from_fn(q.len(), 1, |i, _| bump(q.nodes[i]));
    let kb = k.apply(&b);
    let ru = apply_resolvent_fourier(z, &GridFunction::from_fn(grid, side, bump))?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..q.len() {
        let want = v.value_at(q.nodes[i]) * ru.interpolate(q.nodes[i]);
        num += q.weights[i] * (kb[(i, 0)] - want).norm_sqr();
        den += q.weights[i] * want.norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Sheet-jump comparison on a pseudo-random sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpReport {
    /// `max |Δ_tracked − Δ_closed| / max(|Δ_closed|, |R₀(z₀)(r)|)`.
    pub max_error: f64,
    /// Same, relative to `|Δ_closed|` alone.
    pub max_relative_to_jump: f64,
    pub samples: usize,
}

/// Small deterministic generator for reproducible samples.
pub(crate) struct XorShift(u64);

impl XorShift {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Branch-tracked continuation `R₀(z₀e^{2πim}) − R₀(z₀)` against the closed
/// form in dimension `d`, at `count` points `(z₀, r)` for each
/// `m ∈ {−2, −1, 1, 2}`.
pub fn sheet_jump_sample(d: usize, count: usize, seed: u64) -> Result<JumpReport> {
    let mut rng = XorShift::new(seed);
    let (mut worst, mut worst_rel) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let z0 = SheetPoint::new(0.2 * 25f64.powf(rng.uniform()), 0.05 + (TAU - 0.1) * rng.uniform())?;
        let r = 0.05 + 2.95 * rng.uniform();
        let base = KernelAt::new(d, z0)?.value(r);
        for m in [-2i64, -1, 1, 2] {
            let zm = SheetPoint::new(z0.modulus, z0.arg_total + TAU * m as f64)?;
            let tracked = KernelAt::new(d, zm)?.value(r) - base;
            let closed = sheet_jump(d, z0, m, r)?;
            let err = (tracked - closed).norm();
            worst = worst.max(err / closed.norm().max(base.norm()));
            worst_rel = worst_rel.max(err / closed.norm());
        }
    }
    Ok(JumpReport {
        max_error: worst,
        max_relative_to_jump: worst_rel,
        samples: count,
    })
}

/// Worst relative error of the stationary-phase constants `c_k` and of
/// the closed-form sphere transform against direct sphere quadrature.
pub fn kernel_constants_check(d: usize) -> Result<f64> {
    let k = KernelConstants::new(d)?;
    let mut worst = 0.0f64;
    for &t in &[0.3, 1.0, 2.5, 7.0, 20.0] {
        let quad = sphere_integral_of_plane_wave(d, t);
        let scale = quad.norm().max(1e-3);
        worst = worst
            .max((k.sphere_transform_from_expansion(t) - quad).norm() / scale)
            .max((sphere_transform(d, Complex64::new(t, 0.0)) - quad).norm() / scale);
    }
    Ok(worst)
}

/// Relative gap between `α₁` and both the symbol-side oracle and
/// `r^{d−1}·R₀(z)(r)` at `|z| = 10⁻⁷`.
pub fn riesz_check(d: usize) -> Result<f64> {
    let alpha = riesz_limit(d, 1.0)?;
    let oracle = riesz_constant_radial(d);
    let kern = KernelAt::new(d, SheetPoint::new(1e-7, PI / 4.0)?)?;
    let mut worst = ((alpha - oracle) / oracle).abs();
    for &r in &[0.5, 1.0] {
        let v = kern.value(r) * r.powi(d as i32 - 1);
        worst = worst.max((v - alpha).norm() / alpha);
    }
    Ok(worst)
}

/// Worst relative gap between `∂_z R₀` and central differences in `z`.
pub fn dz_check(d: usize) -> Result<f64> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for &(m, a) in &[(1.0, PI / 4.0), (0.7, 2.0 + TAU), (1.5, -1.0)] {
        let z = SheetPoint::new(m, a)?;
        // neighbours on the same branch as z
        let near = |dz: f64| -> Result<SheetPoint> {
            let p = SheetPoint::from_complex(z.value() + dz)?;
            SheetPoint::new(p.modulus, z.arg_total + (p.arg_total - z.arg_total + PI).rem_euclid(TAU) - PI)
        };
        let (zp, zm) = (KernelAt::new(d, near(h)?)?, KernelAt::new(d, near(-h)?)?);
        let kern = KernelAt::new(d, z)?;
        for &r in &[0.3, 1.0] {
            let fd = (zp.value(r) - zm.value(r)) / (2.0 * h);
            let an = kern.value_and_dz(r).1;
            worst = worst.max((fd - an).norm() / an.norm());
        }
    }
    Ok(worst)
}

/// Smallest `C` with `|R₀(z)(r) − α₁/r²| ≤ C|z|r⁻¹(1 + |log(|z|r)|)` over the
/// given radii, for `z = ρe^{iθ}` and each modulus `ρ`.
pub fn small_z_constants(moduli: &[f64], radii: &[f64], theta: f64) -> Result<Vec<(f64, f64)>> {
    moduli
        .iter()
        .map(|&rho| {
            let kern = KernelAt::new(3, SheetPoint::new(rho, theta)?)?;
            let c = radii
                .iter()
                .map(|&r| {
                    let lhs = (kern.value(r) - riesz_limit(3, r)?).norm();
                    Ok(lhs / (rho / r * (1.0 + (rho * r).ln().abs())))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0f64, f64::max);
            Ok((rho, c))
        })
        .collect()
}

/// `Im⟨R₀(λ + i0)f, f⟩` for `f = exp(−|x|²/(2s²))`: kernel-side value and
/// closed form from the spectral measure on `|ξ| = λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionReport {
    pub lambda: f64,
    pub kernel_side: f64,
    pub spectral_side: f64,
    pub relative_error: f64,
}

/// The kernel side is `∫₀^∞ Im R₀(t)·A(t)·4πt² dt` with the autocorrelation
/// `A(t) = (πs²)^{3/2} e^{−t²/(4s²)}`; the spectral side is
/// `(2π)⁻³·π·4πλ²·|f̂(λ)|²`, `|f̂(k)|² = (2πs²)³e^{−s²k²}`.
pub fn limiting_absorption(lambda: f64, s: f64) -> Result<AbsorptionReport> {
    if !(lambda > 0.0 && s > 0.0) {
        return Err(crate::error::Error::domain("need λ > 0 and s > 0"));
    }
    let kern = KernelAt::new(3, SheetPoint::from_log(lambda.ln(), 0.0))?;
    let top = 14.0 * s;
    let panels = ((top * lambda.max(1.0 / s)) * 2.0).ceil().max(8.0) as usize;
    let (x, w) = composite_gauss_legendre(16, 0.0, top, panels);
    let auto = |t: f64| (PI * s * s).powf(1.5) * (-(t * t) / (4.0 * s * s)).exp();
    let kernel_side: f64 = x
        .iter()
        .zip(&w)
        .map(|(t, wt)| wt * kern.value(*t).im * auto(*t) * 4.0 * PI * t * t)
        .sum();
    let spectral_side = TAU.powi(-3) * PI * 4.0 * PI * lambda * lambda * (TAU * s * s).powi(3) * (-(s * lambda).powi(2)).exp();
    Ok(AbsorptionReport {
        lambda,
        kernel_side,
        spectral_side,
        relative_error: ((kernel_side - spectral_side) / spectral_side).abs(),
    })
}

/// Worst relative gap of `det(I − K⁴) = det(I + K)·det(Σ_{j≤3}(−K)^j)` over
/// pseudo-random sheet points with `|z| ∈ [0.3, 3]`, `arg ∈ [−2π, 4π]`.
pub fn factorization_sample(v: &Potential, q: &Quadrature, count: usize, seed: u64) -> Result<Vec<(SheetPoint, f64)>> {
    let mut rng = XorShift::new(seed);
    (0..count)
        .map(|_| {
            let z = SheetPoint::new(0.3 * 10f64.powf(rng.uniform()), -TAU + 3.0 * TAU * rng.uniform())?;
            Ok((z, factorization_gap(&assemble_bs(z, v, q)?)?))
        })
        .collect()
}

/// Middle-decade log-log slopes of the singular values of `K(z)` and `K⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylSlopes {
    pub k: f64,
    pub k_power: f64,
    pub decade: (usize, usize),
}

pub fn weyl_slopes(z: SheetPoint, v: &Potential, q: &Quadrature) -> Result<WeylSlopes> {
    let k = assemble_bs(z, v, q)?;
    let s1 = singular_value_profile(&k);
    let s4 = singular_value_profile_power(&k);
    let decade = middle_decade(s1.len());
    Ok(WeylSlopes {
        k: loglog_slope(&s1, decade.0, decade.1),
        k_power: loglog_slope(&s4, decade.0, decade.1),
        decade,
    })
}
