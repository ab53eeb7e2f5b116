//! Scattering matrix on the sphere of directions at real energy `λ > 0`.
//!
//! With the far-field operator `E(λ)f(ω) = ∫ e^{iλx·ω}f(x)dx` and the
//! outgoing Birman–Schwinger matrix `K(λ) = V R₀(λ + i0)`,
//!
//! ```text
//! S(λ) = I + κ·E(λ)(I + K(λ))⁻¹ V E*(λ)
//! ```
//!
//! acting on `L²(S²)`. The scalar `κ` is calibrated by unitarity for a real
//! potential; its expected value is `−iλ²/(4π²)` (density of states on the
//! energy shell `|ξ| = λ`), which the calibration recovers rather than
//! assumes. Matrices are weight-symmetrized, `Σ^{1/2} S Σ^{−1/2}`, so
//! unitarity on `L²(S²)` is matrix unitarity.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{assemble_bs, BSOperator, Potential, Quadrature};
use crate::error::{Error, Result};
use crate::freeresolvent::KernelAt;
use crate::linalg::{condition_number, hermitian_norm, identity_plus, singular_values, CMatrix};
use crate::logcover::SheetPoint;
use crate::quad::gauss_legendre_on;
use crate::resonances::{locate_poles, RegionSpec, SearchOptions};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `(I + K)` conditioning beyond which `λ` is treated as a pole.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Gauss–Legendre in `cos θ` (`L + 1` nodes) times `2L + 2` uniform azimuths
/// starting at `φ = 0`; exact for spherical harmonics of degree `≤ 2L + 1`.
/// The node set is closed under `ω ↦ −ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub degree: usize,
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    n_mu: usize,
    n_phi: usize,
}

impl SphereQuadrature {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::domain("sphere quadrature degree must be positive"));
        }
        let (n_mu, n_phi) = (degree + 1, 2 * degree + 2);
        let (mu, w_mu) = gauss_legendre_on(n_mu, -1.0, 1.0);
        let dphi = TAU / n_phi as f64;
        let mut directions = Vec::with_capacity(n_mu * n_phi);
        let mut weights = Vec::with_capacity(n_mu * n_phi);
        for c in 0..n_phi {
            let (s, co) = (c as f64 * dphi).sin_cos();
            for (m, w) in mu.iter().zip(&w_mu) {
                let st = (1.0 - m * m).sqrt();
                directions.push([st * co, st * s, *m]);
                weights.push(w * dphi);
            }
        }
        Ok(Self {
            degree,
            directions,
            weights,
            n_mu,
            n_phi,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Index of the node at `−ω_i`.
    pub fn antipode(&self, i: usize) -> usize {
        let (c, m) = (i / self.n_mu, i % self.n_mu);
        ((c + self.n_phi / 2) % self.n_phi) * self.n_mu + (self.n_mu - 1 - m)
    }

    /// Nearest node to a unit vector.
    pub fn nearest(&self, omega: [f64; 3]) -> usize {
        let dot = |d: &[f64; 3]| d[0] * omega[0] + d[1] * omega[1] + d[2] * omega[2];
        (0..self.len())
            .max_by(|&a, &b| dot(&self.directions[a]).total_cmp(&dot(&self.directions[b])))
            .unwrap_or(0)
    }
}

fn phase(lambda: f64, sign: f64, x: [f64; 3], w: [f64; 3]) -> Complex64 {
    Complex64::from_polar(1.0, sign * lambda * (x[0] * w[0] + x[1] * w[1] + x[2] * w[2]))
}

fn check_sign(sign: f64) -> Result<()> {
    if sign == 1.0 || sign == -1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("sign must be ±1, got {sign}")))
    }
}

/// `(E f)(ω) = Σ_j w_j e^{sign·iλx_j·ω} f_j`: sphere nodes × volume nodes.
pub fn farfield_operator(lambda: f64, sign: f64, sphere: &SphereQuadrature, q: &Quadrature) -> Result<CMatrix> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("λ must be non-negative, got {lambda}")));
    }
    check_sign(sign)?;
    Ok(CMatrix::from_fn(sphere.len(), q.len(), |a, j| {
        phase(lambda, sign, q.nodes[j], sphere.directions[a]) * q.weights[j]
    }))
}

/// Adjoint of [`farfield_operator`] between `L²(S², σ)` and `L²(B, w)`:
/// `(E* g)_j = Σ_ω σ_ω e^{−sign·iλx_j·ω} g_ω`.
pub fn farfield_adjoint(lambda: f64, sign: f64, sphere: &SphereQuadrature, q: &Quadrature) -> Result<CMatrix> {
    check_sign(sign)?;
    Ok(CMatrix::from_fn(q.len(), sphere.len(), |j, a| {
        phase(lambda, -sign, q.nodes[j], sphere.directions[a]) * sphere.weights[a]
    }))
}

/// Discretized scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    pub lambda: f64,
    pub kappa: Complex64,
    /// `Σ^{1/2} S Σ^{−1/2}` over the sphere nodes.
    pub entries: CMatrix,
    pub sphere: SphereQuadrature,
}

impl SMatrix {
    /// `‖S*S − I‖₂`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.entries.nrows();
        hermitian_norm(&(self.entries.adjoint() * &self.entries - CMatrix::identity(n, n)))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        singular_values(&self.entries)
    }
}

fn outgoing_operator(lambda: f64, v: &Potential, q: &Quadrature) -> Result<BSOperator> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("λ must be positive, got {lambda}")));
    }
    // arg = 0 is the boundary value from the physical sheet (outgoing)
    assemble_bs(SheetPoint::from_log(lambda.ln(), 0.0), v, q)
}

/// Condition number of `I + K(λ + i0)` over all blocks.
fn condition(k: &BSOperator) -> f64 {
    let (mut hi, mut lo) = (0.0f64, f64::INFINITY);
    for (b, _) in k.blocks() {
        let s = singular_values(&identity_plus(b));
        hi = hi.max(s[0]);
        lo = lo.min(*s.last().unwrap_or(&0.0));
    }
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Near-pole failure, with the closest pole found in a small window around
/// `λ` when the search succeeds.
fn near_pole(lambda: f64, cond: f64, v: &Potential, q: &Quadrature) -> Error {
    let region = RegionSpec {
        r_min: 0.8 * lambda,
        r_max: 1.25 * lambda,
        arg_min: -0.3,
        arg_max: 0.3,
        exclusion_radius: 0.8 * lambda,
    };
    let opts = SearchOptions {
        max_rectangles: 40,
        ..SearchOptions::default()
    };
    let nearest = locate_poles(&region, v, q, &opts).ok().and_then(|ps| {
        ps.poles
            .into_iter()
            .map(|p| p.location)
            .min_by(|a, b| (a.value() - lambda).norm().total_cmp(&(b.value() - lambda).norm()))
    });
    let msg = match nearest {
        Some(z) => format!(
            "λ = {lambda} is within conditioning of a pole (cond {cond:.3e}); nearest pole |z| = {:.6}, arg = {:.6}",
            z.modulus, z.arg_total
        ),
        None => format!("λ = {lambda} is within conditioning of a pole (cond {cond:.3e}); no pole isolated nearby"),
    };
    Error::Calibration(msg)
}

/// Symmetrized transition matrix `Σ^{1/2} E(λ)(I + K)⁻¹ V E*(λ) Σ^{1/2}`,
/// so that `S = I + κT`.
pub fn transition_matrix(lambda: f64, v: &Potential, q: &Quadrature, sphere: &SphereQuadrature) -> Result<CMatrix> {
    let m = sphere.len();
    if v.is_zero() {
        return Ok(CMatrix::zeros(m, m));
    }
    let k = outgoing_operator(lambda, v, q)?;
    let cond = condition(&k);
    if cond > CONDITION_LIMIT {
        return Err(near_pole(lambda, cond, v, q));
    }
    let vn: Vec<Complex64> = q.nodes.iter().map(|x| v.value_at(*x)).collect();
    let sq: Vec<f64> = sphere.weights.iter().map(|w| w.sqrt()).collect();
    let rhs = CMatrix::from_fn(q.len(), m, |j, a| {
        vn[j] * phase(lambda, -1.0, q.nodes[j], sphere.directions[a]) * sq[a]
    });
    let x = k.factor_i_plus().solve(&rhs)?;
    let mut e = farfield_operator(lambda, 1.0, sphere, q)?;
    for (a, s) in sq.iter().enumerate() {
        e.row_mut(a).scale_mut(*s);
    }
    Ok(e * x)
}

/// `S = I + κ·T` at `λ`.
pub fn scattering_matrix(
    lambda: f64,
    v: &Potential,
    q: &Quadrature,
    sphere: &SphereQuadrature,
    kappa: Complex64,
) -> Result<SMatrix> {
    let t = transition_matrix(lambda, v, q, sphere)?;
    Ok(from_transition(lambda, &t, kappa, sphere))
}

fn from_transition(lambda: f64, t: &CMatrix, kappa: Complex64, sphere: &SphereQuadrature) -> SMatrix {
    let m = t.nrows();
    SMatrix {
        lambda,
        kappa,
        entries: CMatrix::identity(m, m) + t * kappa,
        sphere: sphere.clone(),
    }
}

/// Outcome of the unitarity fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    pub kappa_re: f64,
    pub kappa_im: f64,
    /// `‖S*S − I‖₂` at the fitted `κ`.
    pub residual: f64,
}

impl Calibration {
    pub fn kappa(&self) -> Complex64 {
        Complex64::new(self.kappa_re, self.kappa_im)
    }

    /// `κ` rescaled to energy `λ` by `λ^{d−1}`, `d = 3`.
    pub fn kappa_at(&self, lambda: f64) -> Complex64 {
        self.kappa() * (lambda / self.lambda).powi(2)
    }
}

/// Failure threshold on the fit residual.
pub const CALIBRATION_LIMIT: f64 = 1e-2;

/// Fit `κ` to a transition matrix.
///
/// Writing `κ = s·e^{iφ}`, `S*S − I = s(A_φ + s·B)` with the Hermitian
/// `A_φ = e^{iφ}T + e^{−iφ}T*` and `B = T*T`. For each `φ` the best `s` is
/// the least-squares solution of `A_φ + sB = 0`; the Frobenius residual is a
/// trigonometric polynomial in `φ` built from three traces, scanned and then
/// refined, and the spectral residual is reported.
pub fn calibrate_transition(lambda: f64, t: &CMatrix) -> Result<Calibration> {
    let b = t.adjoint() * t;
    let bb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    if !(bb > 0.0) || bb.sqrt() < 1e-14 {
        return Err(Error::Calibration("transition matrix vanishes; κ is unconstrained".into()));
    }
    let t1 = (t * &b).trace();
    let t2 = (t * t).trace();
    let tt = b.trace().re;
    let objective = |phi: f64| -> (f64, f64) {
        let e = Complex64::from_polar(1.0, phi);
        let aa = 2.0 * (e * e * t2).re + 2.0 * tt;
        let ab = 2.0 * (e * t1).re;
        let s = -ab / bb;
        // relative ‖A + sB‖² / ‖A‖²
        ((aa + 2.0 * s * ab + s * s * bb).max(0.0) / aa.max(f64::MIN_POSITIVE), s)
    };
    let samples = 2048;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..samples {
        let phi = TAU * i as f64 / samples as f64;
        let (f, s) = objective(phi);
        if s > 0.0 && f < best.0 {
            best = (f, phi);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Calibration("no phase gives a positive scale".into()));
    }
    // golden-section refinement on the bracketing cell
    let (mut a, mut c) = (best.1 - TAU / samples as f64, best.1 + TAU / samples as f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = c - g * (c - a);
        let x2 = a + g * (c - a);
        if objective(x1).0 < objective(x2).0 {
            c = x2;
        } else {
            a = x1;
        }
    }
    let phi = 0.5 * (a + c);
    let s = objective(phi).1;
    let kappa = Complex64::from_polar(s, phi);
    let m = t.nrows();
    let sm = CMatrix::identity(m, m) + t * kappa;
    let residual = hermitian_norm(&(sm.adjoint() * &sm - CMatrix::identity(m, m)));
    let out = Calibration {
        lambda,
        kappa_re: kappa.re,
        kappa_im: kappa.im,
        residual,
    };
    if residual > CALIBRATION_LIMIT {
        return Err(Error::Calibration(format!(
            "unitarity residual {residual:.3e} at κ = {kappa:.6e} exceeds {CALIBRATION_LIMIT:e}"
        )));
    }
    Ok(out)
}

/// `κ` minimizing `‖S*S − I‖` at `λ₀` for a real potential.
pub fn calibrate_kappa(lambda0: f64, v: &Potential, q: &Quadrature, sphere: &SphereQuadrature) -> Result<Calibration> {
    if !v.is_real() {
        return Err(Error::domain("calibration needs a real potential"));
    }
    if v.is_zero() {
        return Err(Error::Calibration("V = 0: κ is unconstrained".into()));
    }
    calibrate_transition(lambda0, &transition_matrix(lambda0, v, q, sphere)?)
}

/// Relative drift of `κ·λ^{1−d}` between the calibration energy and `λ`.
pub fn kappa_drift(cal: &Calibration, at: &Calibration) -> f64 {
    let a = cal.kappa() / (cal.lambda * cal.lambda);
    let b = at.kappa() / (at.lambda * at.lambda);
    (a - b).norm() / a.norm()
}

/// Far-field amplitude of the scattered wave.
#[derive(Debug, Clone, PartialEq)]
pub struct FarField {
    pub lambda: f64,
    pub r_far: f64,
    /// `u(r_far·θ)·r_far·e^{−iλr_far}` at each sphere node `θ`.
    pub amplitude: Vec<Complex64>,
    /// Relative change of the amplitude between `r_far` and `2r_far`, an
    /// estimate of the `O(1/r)` remainder.
    pub remainder: f64,
    pub warning: Option<String>,
}

/// Remainder above which the extraction warns.
pub const FARFIELD_REMAINDER_WARN: f64 = 2e-2;

/// Scattered far field for the incident wave `e^{−iλx·ω_in}` (propagating
/// along `−ω_in`): `u = −R₀(λ + i0)ψ`, `ψ = (I + K)⁻¹ V e^{−iλ⟨·,ω_in⟩}`,
/// evaluated at `r_far·θ`. Shares no code with the far-field operator: the
/// profile over `θ` is proportional to the column of `S − I` at `ω_in`,
/// read at the antipodal node `−θ`.
pub fn farfield_extract(
    lambda: f64,
    v: &Potential,
    q: &Quadrature,
    omega_in: [f64; 3],
    r_far: f64,
    sphere: &SphereQuadrature,
) -> Result<FarField> {
    if !(r_far >= 20.0 * v.support_radius) {
        return Err(Error::domain(format!(
            "r_far = {r_far} is below 20× the support radius {}",
            v.support_radius
        )));
    }
    let nrm = (omega_in[0].powi(2) + omega_in[1].powi(2) + omega_in[2].powi(2)).sqrt();
    if !(nrm > 0.0) {
        return Err(Error::domain("incident direction must be nonzero"));
    }
    let omega = [omega_in[0] / nrm, omega_in[1] / nrm, omega_in[2] / nrm];
    if v.is_zero() {
        return Ok(FarField {
            lambda,
            r_far,
            amplitude: vec![ZERO; sphere.len()],
            remainder: 0.0,
            warning: None,
        });
    }
    let k = outgoing_operator(lambda, v, q)?;
    let cond = condition(&k);
    if cond > CONDITION_LIMIT {
        return Err(near_pole(lambda, cond, v, q));
    }
    let rhs = CMatrix::from_fn(q.len(), 1, |j, _| v.value_at(q.nodes[j]) * phase(lambda, -1.0, q.nodes[j], omega));
    let psi = k.factor_i_plus().solve(&rhs)?;
    let dens: Vec<Complex64> = (0..q.len()).map(|j| psi[(j, 0)] * q.weights[j]).collect();
    let kern = KernelAt::new(3, SheetPoint::from_log(lambda.ln(), 0.0))?;
    let at = |r: f64| -> Vec<Complex64> {
        sphere
            .directions
            .par_iter()
            .map(|th| {
                let x = [r * th[0], r * th[1], r * th[2]];
                let u: Complex64 = q
                    .nodes
                    .iter()
                    .zip(&dens)
                    .map(|(y, d)| kern.value(crate::discretize::dist3(x, *y)) * d)
                    .sum();
                -u * r * Complex64::from_polar(1.0, -lambda * r)
            })
            .collect()
    };
    let a1 = at(r_far);
    let a2 = at(2.0 * r_far);
    let peak = a1.iter().fold(0.0f64, |m, a| m.max(a.norm()));
    let remainder = a1.iter().zip(&a2).fold(0.0f64, |m, (x, y)| m.max((x - y).norm())) / peak.max(f64::MIN_POSITIVE);
    let warning = (remainder > FARFIELD_REMAINDER_WARN).then(|| {
        format!("far-field remainder {remainder:.2e} at r_far = {r_far}: increase r_far for cleaner asymptotics")
    });
    Ok(FarField {
        lambda,
        r_far,
        amplitude: a1,
        remainder,
        warning,
    })
}

/// Comparison of a far-field profile with a column of `S − I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMatch {
    /// Least-squares constant `c` with `amplitude(−θ) ≈ c·T(θ, ω_in)`.
    pub scale_re: f64,
    pub scale_im: f64,
    /// `max_θ |amplitude(−θ) − c·T(θ)| / |c·T(θ)|`.
    pub max_pointwise: f64,
    /// Same, normalized by the column maximum.
    pub max_relative_to_peak: f64,
}

/// Match `farfield_extract` for `ω_in = sphere.directions[col]` against
/// column `col` of `T` (and hence of `S − I` up to `κ`).
pub fn compare_with_column(ff: &FarField, t: &CMatrix, col: usize, sphere: &SphereQuadrature) -> ProfileMatch {
    let m = sphere.len();
    let sq: Vec<f64> = sphere.weights.iter().map(|w| w.sqrt()).collect();
    // undo the weight symmetrization on the column
    let tcol: Vec<Complex64> = (0..m).map(|a| t[(a, col)] / (sq[a] * sq[col])).collect();
    let amp: Vec<Complex64> = (0..m).map(|a| ff.amplitude[sphere.antipode(a)]).collect();
    let num: Complex64 = tcol.iter().zip(&amp).map(|(t, a)| t.conj() * a).sum();
    let den: f64 = tcol.iter().map(|t| t.norm_sqr()).sum();
    let c = num / den;
    let peak = tcol.iter().fold(0.0f64, |p, t| p.max((c * t).norm()));
    let (mut pw, mut pk) = (0.0f64, 0.0f64);
    for (t, a) in tcol.iter().zip(&amp) {
        let err = (a - c * t).norm();
        pw = pw.max(err / (c * t).norm());
        pk = pk.max(err / peak);
    }
    ProfileMatch {
        scale_re: c.re,
        scale_im: c.im,
        max_pointwise: pw,
        max_relative_to_peak: pk,
    }
}

/// Reciprocity `a(θ; ω) = a(ω; θ)` of the amplitude for the incident waves
/// `e^{−iλx·ω}`: maximum relative mismatch over the given node pairs.
pub fn reciprocity_defect(
    lambda: f64,
    v: &Potential,
    q: &Quadrature,
    sphere: &SphereQuadrature,
    pairs: &[(usize, usize)],
    r_far: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(i, j) in pairs {
        let a = farfield_extract(lambda, v, q, sphere.directions[j], r_far, sphere)?.amplitude[i];
        let b = farfield_extract(lambda, v, q, sphere.directions[i], r_far, sphere)?.amplitude[j];
        worst = worst.max((a - b).norm() / a.norm().max(b.norm()));
    }
    Ok(worst)
}

/// Free absolute scattering matrix `i^{1−d}·(antipodal map)` on the sphere
/// nodes.
pub fn free_absolute_scattering(sphere: &SphereQuadrature, d: usize) -> CMatrix {
    let f = Complex64::new(0.0, 1.0).powi(1 - d as i32);
    let m = sphere.len();
    let mut out = CMatrix::zeros(m, m);
    for a in 0..m {
        out[(sphere.antipode(a), a)] = f;
    }
    out
}

/// Expected prefactor from the density of states on `|ξ| = λ`.
pub fn reference_kappa(lambda: f64) -> Complex64 {
    Complex64::new(0.0, -lambda * lambda / (4.0 * PI * PI))
}

/// Unitarity defect of `S` for a fixed `κ` without re-solving.
pub fn unitarity_with(t: &CMatrix, kappa: Complex64) -> f64 {
    let m = t.nrows();
    let s = CMatrix::identity(m, m) + t * kappa;
    hermitian_norm(&(s.adjoint() * &s - CMatrix::identity(m, m)))
}

/// Spectral condition of `I + K(λ + i0)`.
pub fn outgoing_condition(lambda: f64, v: &Potential, q: &Quadrature) -> Result<f64> {
    let k = outgoing_operator(lambda, v, q)?;
    Ok(match &k.matrix {
        crate::discretize::BsMatrix::Dense(m) => condition_number(&identity_plus(m)),
        _ => condition(&k),
    })
}
