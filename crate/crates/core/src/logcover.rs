//! Points on the logarithmic cover of the punctured plane and the exponential
//! integral with explicit branch tracking.
//!
//! Internally everything is phrased through `E1(w) = -γ - log w + Ein(w)`,
//! with `Ein` entire, so the only multivalued piece is `log w`. The
//! continuation of `E1` along a path is therefore fixed by the unwrapped
//! argument of `w` alone, and the principal value is recovered on
//! `arg w ∈ (-π, π]`. `Ei(σ) = -E1(-σ)`.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this modulus the plain double-precision power series is accurate.
const SERIES_PLAIN_MAX: f64 = 4.0;
/// Hand-off between the power series and the continued fraction.
pub const SERIES_HANDOFF: f64 = 20.0;
/// Continued fraction whenever `Re w` exceeds this.
const CF_RIGHT_HALF_MIN: f64 = 2.0;
/// Beyond this modulus the asymptotic series is used everywhere.
const ASYMPTOTIC_MIN: f64 = 40.0;

/// A point of Λ: modulus and unwrapped argument.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SheetPoint {
    pub modulus: f64,
    pub arg_total: f64,
}

impl SheetPoint {
    pub fn new(modulus: f64, arg_total: f64) -> Result<Self> {
        if !(modulus > 0.0) || !modulus.is_finite() || !arg_total.is_finite() {
            return Err(Error::domain(format!(
                "sheet point needs finite modulus > 0 and finite argument, got ({modulus}, {arg_total})"
            )));
        }
        Ok(Self { modulus, arg_total })
    }

    /// Point on the base sheet lying over a nonzero complex number, with
    /// argument taken in `(0, 2π]`.
    pub fn from_complex(z: Complex64) -> Result<Self> {
        let mut arg = z.arg();
        if arg <= 0.0 {
            arg += TAU;
        }
        Self::new(z.norm(), arg)
    }

    /// From log-modulus and unwrapped argument (the coordinates used by the
    /// pole search).
    pub fn from_log(log_modulus: f64, arg_total: f64) -> Self {
        Self {
            modulus: log_modulus.exp(),
            arg_total,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.arg_total)
    }

    pub fn log_modulus(&self) -> f64 {
        self.modulus.ln()
    }

    /// Sheet index: `arg_total ∈ (2π·sheet, 2π·(sheet+1)]`.
    pub fn sheet(&self) -> i64 {
        ((self.arg_total / TAU).ceil() as i64) - 1
    }

    /// Argument reduced to `(0, 2π]`.
    pub fn base_arg(&self) -> f64 {
        self.arg_total - TAU * self.sheet() as f64
    }

    /// The point reached after `m` full turns.
    pub fn shifted(&self, m: i64) -> Self {
        Self {
            modulus: self.modulus,
            arg_total: self.arg_total + TAU * m as f64,
        }
    }

    /// Reflection `arg ↦ 2π − arg`, which lies over the complex conjugate.
    pub fn mirrored(&self) -> Self {
        Self {
            modulus: self.modulus,
            arg_total: TAU - self.arg_total,
        }
    }
}

/// Result of an exponential-integral evaluation.
///
/// `scaled_value` is `e^{-σ}·Ei(σ)`; it stays finite where `value` overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EiValue {
    pub value: Complex64,
    pub scaled_value: Complex64,
    pub value_finite: bool,
}

impl EiValue {
    fn from_scaled(sigma: Complex64, scaled_value: Complex64) -> Self {
        let value = sigma.exp() * scaled_value;
        let value_finite = value.re.is_finite() && value.im.is_finite();
        Self {
            value,
            scaled_value,
            value_finite,
        }
    }
}

/// `Ei(σ) = γ + ln(−σ) + 2πi·branch_log + Σ σᵏ/(k·k!)` with the principal
/// logarithm (cut of `ln(−σ)` along `σ ∈ [0, ∞)`).
pub fn ei_principal(sigma: Complex64, branch_log: i64) -> Result<EiValue> {
    if sigma == Complex64::new(0.0, 0.0) {
        return Err(Error::domain("logarithmic singularity at sigma = 0"));
    }
    if !sigma.re.is_finite() || !sigma.im.is_finite() {
        return Err(Error::domain("non-finite argument"));
    }
    let w = -sigma;
    let theta = w.arg() + TAU * branch_log as f64;
    let g = e1_scaled_continued(w, theta);
    // e^{-σ}·Ei(σ) = e^{w}·(−E1(w)) = −g
    Ok(EiValue::from_scaled(sigma, -g))
}

/// `Ẽi(sign·i·z·s)` continued along increasing `arg z` from the quadrant
/// `arg z ∈ (0, π/2)`, where it agrees with the principal value.
pub fn ei_on_lambda(zeta: SheetPoint, s: f64, sign: i32) -> Result<EiValue> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("s must be positive, got {s}")));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::domain(format!("sign must be ±1, got {sign}")));
    }
    let z = zeta.value();
    let sigma = Complex64::new(0.0, sign as f64) * z * s;
    let w = -sigma;
    // arg(−σ) = arg z − sign·π/2, unwrapped with z
    let theta = zeta.arg_total - sign as f64 * FRAC_PI_2;
    let g = e1_scaled_continued(w, theta);
    Ok(EiValue::from_scaled(sigma, -g))
}

/// `e^{w}·Ẽ1(w)` where the logarithm inside `E1` carries argument `theta`
/// (which must agree with `arg w` modulo 2π).
pub(crate) fn e1_scaled_continued(w: Complex64, theta: f64) -> Complex64 {
    let a = w.norm();
    // In the right half-plane E1 is exponentially small and the series would
    // cancel against the logarithm, so the continued fraction takes over.
    let series = w.re < CF_RIGHT_HALF_MIN
        && (a < SERIES_HANDOFF || (a < ASYMPTOTIC_MIN && near_negative_axis(w)));
    if series {
        let ein = ein_series(w);
        let e1 = Complex64::new(-EULER_GAMMA - a.ln(), -theta) + ein;
        return w.exp() * e1;
    }
    let principal = if a >= ASYMPTOTIC_MIN {
        e1_scaled_asymptotic(w)
    } else {
        e1_scaled_cf(w)
    };
    let turns = ((theta - w.arg()) / TAU).round();
    if turns == 0.0 {
        principal
    } else {
        principal - Complex64::new(0.0, TAU * turns) * w.exp()
    }
}

fn near_negative_axis(w: Complex64) -> bool {
    w.re < 0.0 && w.im.abs() < -w.re
}

/// `Ein(w) = Σ_{k≥1} (−1)^{k+1} wᵏ/(k·k!)`.
pub(crate) fn ein_series(w: Complex64) -> Complex64 {
    if w.norm() <= SERIES_PLAIN_MAX {
        ein_series_plain(w)
    } else {
        ein_series_dd(w)
    }
}

fn ein_series_plain(w: Complex64) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 1..200 {
        let kf = k as f64;
        term *= -w / kf;
        let add = -term / kf;
        sum += add;
        if add.norm() <= 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    sum
}

/// Same series summed in double-double arithmetic; the terms grow to
/// `~e^{|w|}` before decaying so double precision alone loses everything
/// beyond `|w| ≈ 10`.
fn ein_series_dd(w: Complex64) -> Complex64 {
    let mut term = Cdd::one();
    let mut sum = Cdd::zero();
    let scale = w.norm().exp();
    for k in 1..600 {
        let kf = k as f64;
        term = term.mul_c64(-w).div_f64(kf);
        let add = term.div_f64(-kf);
        sum = sum.add(add);
        if k as f64 > w.norm() && add.norm_hi() <= 1e-34 * scale {
            break;
        }
    }
    sum.to_c64()
}

/// Modified Lentz evaluation of `e^{w}E1(w) = 1/(w+1− 1/(w+3− 4/(w+5− …)))`.
pub(crate) fn e1_scaled_cf(w: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-300, 0.0);
    let mut b = w + 1.0;
    let mut c = Complex64::new(1.0 / 1e-300, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..20_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = an * d + b;
        if d.norm() < 1e-300 {
            d = tiny;
        }
        c = b + an / c;
        if c.norm() < 1e-300 {
            c = tiny;
        }
        d = 1.0 / d;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h
}

/// `e^{w}E1(w) ~ Σ (−1)^k k!/w^{k+1}`, truncated at the smallest term.
pub(crate) fn e1_scaled_asymptotic(w: Complex64) -> Complex64 {
    let inv = 1.0 / w;
    let mut term = inv;
    let mut sum = term;
    let mut last = term.norm();
    for k in 1..200 {
        let next = term * (-(k as f64)) * inv;
        let n = next.norm();
        if n > last {
            break;
        }
        sum += next;
        term = next;
        last = n;
        if n < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

// ---------------------------------------------------------------------------
// double-double arithmetic, only as much as the series needs

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let r = ((self.hi - p) - e + self.lo) / b;
        let (hi, lo) = two_sum(q1, r);
        Dd { hi, lo }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cdd {
    re: Dd,
    im: Dd,
}

impl Cdd {
    fn zero() -> Self {
        Cdd {
            re: Dd::ZERO,
            im: Dd::ZERO,
        }
    }

    fn one() -> Self {
        Cdd {
            re: Dd::from_f64(1.0),
            im: Dd::ZERO,
        }
    }

    fn add(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    fn mul_c64(self, w: Complex64) -> Cdd {
        let re = self.re.mul_f64(w.re).add(self.im.mul_f64(w.im).neg());
        let im = self.re.mul_f64(w.im).add(self.im.mul_f64(w.re));
        Cdd { re, im }
    }

    fn div_f64(self, b: f64) -> Cdd {
        Cdd {
            re: self.re.div_f64(b),
            im: self.im.div_f64(b),
        }
    }

    fn norm_hi(&self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }

    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.hi + self.re.lo, self.im.hi + self.im.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Trapezoid-free oracle: ∫ e^p/p dp along a polyline, Gauss–Legendre
    /// per segment. Used only to check branch bookkeeping.
    fn path_integral(points: &[Complex64]) -> Complex64 {
        let (x, w) = crate::quad::gauss_legendre(40);
        let mut acc = c(0.0, 0.0);
        for seg in points.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let sub = 64;
            for s in 0..sub {
                let p0 = a + (b - a) * (s as f64 / sub as f64);
                let p1 = a + (b - a) * ((s + 1) as f64 / sub as f64);
                let half = (p1 - p0) * 0.5;
                let mid = (p1 + p0) * 0.5;
                for (xi, wi) in x.iter().zip(&w) {
                    let p = mid + half * *xi;
                    acc += half * *wi * p.exp() / p;
                }
            }
        }
        acc
    }

    #[test]
    fn ei_minus_one_matches_extended_precision_value() {
        // 200-term series of −E1(1) in extended precision
        let v = ei_principal(c(-1.0, 0.0), 0).unwrap();
        assert_relative_eq!(v.value.re, -0.219_383_934_395_520_3, max_relative = 1e-14);
        assert!(v.value.im.abs() < 1e-15);
    }

    #[test]
    fn branch_offset_is_exactly_two_pi_i() {
        let a = ei_principal(c(-1.0, 0.0), 0).unwrap().value;
        let b = ei_principal(c(-1.0, 0.0), 1).unwrap().value;
        assert_relative_eq!((b - a).im, TAU, max_relative = 1e-14);
        assert!((b - a).re.abs() < 1e-15);
    }

    #[test]
    fn zero_argument_is_a_domain_error() {
        assert!(matches!(ei_principal(c(0.0, 0.0), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn large_negative_argument_scaled() {
        let v = ei_principal(c(-50.0, 0.0), 0).unwrap();
        let sigma = c(-50.0, 0.0);
        // value·σ·e^{−σ} → 1 with the asymptotic correction 1 + 1/σ + 2/σ² …
        let ratio = v.value * sigma * (-sigma).exp();
        assert!((ratio - 1.0).norm() < 0.03, "{ratio}");
        assert!(v.value_finite);
        // continued fraction oracle on the same point
        let cf = -e1_scaled_cf(-sigma);
        assert_relative_eq!(v.scaled_value.re, cf.re, max_relative = 1e-12);
    }

    #[test]
    fn overflow_keeps_scaled_value() {
        let v = ei_principal(c(800.0, 1.0), 0).unwrap();
        assert!(!v.value_finite);
        assert!(v.scaled_value.norm().is_finite());
        assert_relative_eq!((v.scaled_value * 800.0).re, 1.0, max_relative = 1e-2);
    }

    #[test]
    fn physical_sheet_matches_principal() {
        let zeta = SheetPoint::new(1.0, PI / 4.0).unwrap();
        let a = ei_on_lambda(zeta, 1.0, -1).unwrap().value;
        let sigma = -c(0.0, 1.0) * zeta.value();
        let b = ei_principal(sigma, 0).unwrap().value;
        assert_relative_eq!(a.re, b.re, max_relative = 1e-14);
        assert_relative_eq!(a.im, b.im, max_relative = 1e-14);
    }

    #[test]
    fn one_winding_against_path_integral() {
        // Ẽi(σ) for σ = −i z s along z = e^{iφ}, φ from π/4 to π/4 ± 2π.
        // Path: from −∞ to σ₀ along the real line (principal), then around
        // the circle |p| = 1 following σ(φ).
        let base = ei_principal(-c(0.0, 1.0) * Complex64::from_polar(1.0, PI / 4.0), 0)
            .unwrap()
            .value;
        for turns in [1.0f64, -1.0] {
            let steps = 256;
            let pts: Vec<Complex64> = (0..=steps)
                .map(|k| {
                    let phi = PI / 4.0 + turns * TAU * k as f64 / steps as f64;
                    -c(0.0, 1.0) * Complex64::from_polar(1.0, phi)
                })
                .collect();
            let oracle = base + path_integral(&pts);
            let zeta = SheetPoint::new(1.0, PI / 4.0 + turns * TAU).unwrap();
            let got = ei_on_lambda(zeta, 1.0, -1).unwrap().value;
            assert!((got - oracle).norm() < 1e-9, "turns {turns}: {got} vs {oracle}");
            assert_relative_eq!((got - base).im, turns * TAU, max_relative = 1e-12);
        }
    }

    #[test]
    fn series_and_continued_fraction_agree_in_handoff_annulus() {
        for &rad in &[10.0, 15.0, 20.0, 25.0, 30.0, 40.0] {
            // directions where the series is well conditioned (Re w ≤ 0 side)
        for k in 0..24 {
                let t = k as f64 / 23.0;
                let phi = if k % 2 == 0 { 0.5 * PI - 0.1 + 0.35 * PI * t } else { -0.5 * PI + 0.1 - 0.35 * PI * t };
                let w = Complex64::from_polar(rad, phi);
                let series = w.exp() * (c(-EULER_GAMMA - w.norm().ln(), -w.arg()) + ein_series(w));
                let cf = e1_scaled_cf(w);
                let rel = (series - cf).norm() / cf.norm();
                assert!(rel < 1e-10, "|w|={rad} arg={phi}: rel {rel}");
            }
        }
    }

    #[test]
    fn asymptotic_and_continued_fraction_agree() {
        for k in 0..12 {
            let phi = -0.7 * PI + 1.4 * PI * k as f64 / 11.0;
            let w = Complex64::from_polar(45.0, phi);
            let rel = (e1_scaled_asymptotic(w) - e1_scaled_cf(w)).norm() / e1_scaled_cf(w).norm();
            assert!(rel < 1e-13, "{phi}: {rel}");
        }
    }

    #[test]
    fn derivative_identity_by_central_differences() {
        let zeta = SheetPoint::new(1.3, 0.4 + TAU).unwrap();
        let z = zeta.value();
        for &s in &[0.2, 1.0, 3.0, 12.0] {
            let h = 1e-5 * s;
            let f = |s: f64| ei_on_lambda(zeta, s, -1).unwrap().value;
            let fd = (f(s + h) - f(s - h)) / (2.0 * h);
            let exact = (-c(0.0, 1.0) * z * s).exp() / s;
            assert!((fd - exact).norm() / exact.norm() < 1e-6);
        }
    }

    #[test]
    fn conjugation_symmetry_on_physical_sheet() {
        for &(re, im) in &[(0.3, 0.8), (-2.0, 0.1), (5.0, -3.0), (-17.0, 4.0)] {
            let s = c(re, im);
            let a = ei_principal(s, 0).unwrap().value;
            let b = ei_principal(s.conj(), 0).unwrap().value;
            assert!((a.conj() - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn sheet_bookkeeping() {
        let p = SheetPoint::new(2.0, 0.3 + 3.0 * TAU).unwrap();
        assert_eq!(p.sheet(), 3);
        assert_relative_eq!(p.base_arg(), 0.3, max_relative = 1e-12);
        let q = SheetPoint::new(2.0, TAU).unwrap();
        assert_eq!(q.sheet(), 0);
        assert_eq!(q.base_arg(), TAU);
        let r = SheetPoint::new(2.0, -0.1).unwrap();
        assert_eq!(r.sheet(), -1);
        assert!(SheetPoint::new(0.0, 1.0).is_err());
        assert!(ei_on_lambda(p, 0.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn branch_additivity(log_mod in -4.0f64..3.0, s in 0.05f64..5.0,
                             arg in -6.0f64..9.0, m in -3i64..4, sign in prop::sample::select(vec![-1, 1])) {
            let zeta = SheetPoint::from_log(log_mod, arg);
            let zs = zeta.modulus * s;
            prop_assume!((0.01..=50.0).contains(&zs));
            let a = ei_on_lambda(zeta, s, sign).unwrap().value;
            let b = ei_on_lambda(zeta.shifted(m), s, sign).unwrap().value;
            // ln(−σ) gains 2πi·m when arg z gains 2πm
            let d = b - a;
            prop_assert!((d - c(0.0, TAU * m as f64)).norm() < 1e-9 * (1.0 + a.norm()));
        }

        #[test]
        fn reconstruction(mod_ in 0.01f64..10.0, arg in -40.0f64..40.0) {
            let p = SheetPoint::new(mod_, arg).unwrap();
            let base = p.base_arg();
            prop_assert!(base > 0.0 && base <= TAU);
            prop_assert!((base + TAU * p.sheet() as f64 - arg).abs() <= 8.0 * f64::EPSILON * arg.abs().max(1.0));
        }
    }
}
