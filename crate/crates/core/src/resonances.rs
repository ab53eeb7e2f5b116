//! Determinants of `I + K(z)` on Λ, zero counting by the argument principle,
//! pole localization, the counting function `N(r, a)`, and zero-energy and
//! singular-value diagnostics.
//!
//! Contours live in the coordinates `w = log|z| + i·arg z`, where Λ is a
//! plane and `z = e^w` is conformal, so rectangles in `w` are honest closed
//! curves on Λ and `(1/2πi)∮ ∂_w log det dw` counts zeros on Λ.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretize::{assemble_bs, assemble_bs_with_dz, zero_energy_operator, BSOperator, Potential, Quadrature};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, identity_plus, log_det, singular_values, CMatrix, LogDet, Lu};
use crate::logcover::SheetPoint;
use crate::quad::gauss_legendre_on;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which determinant drives the zero search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DetVariant {
    /// `det(I + K)`.
    #[default]
    IplusK,
    /// `det(I − K^{d+1})`.
    H,
}

fn checked(ld: LogDet, z: SheetPoint) -> Result<LogDet> {
    if ld.is_zero() || !ld.log_abs.is_finite() {
        let v = z.value();
        Err(Error::DeterminantRange { z_re: v.re, z_im: v.im })
    } else {
        Ok(ld)
    }
}

fn pow4(b: &CMatrix) -> CMatrix {
    let b2 = b * b;
    &b2 * &b2
}

/// `det(I + K)` of an assembled operator.
pub fn det_of(k: &BSOperator) -> Result<LogDet> {
    let mut acc = LogDet::one();
    for (b, mult) in k.blocks() {
        let d = log_det(&identity_plus(b));
        for _ in 0..mult {
            acc = acc.mul(d);
        }
    }
    checked(acc, k.z)
}

/// `det(I − K⁴)` of an assembled operator.
pub fn det_h_of(k: &BSOperator) -> Result<LogDet> {
    let mut acc = LogDet::one();
    for (b, mult) in k.blocks() {
        let d = log_det(&identity_plus(&(-pow4(b))));
        for _ in 0..mult {
            acc = acc.mul(d);
        }
    }
    checked(acc, k.z)
}

/// `det(Σ_{j=0}^{3} (−K)^j)`, the cofactor with `I − K⁴ = (I + K)·Σ(−K)^j`.
pub fn det_cofactor_of(k: &BSOperator) -> Result<LogDet> {
    let mut acc = LogDet::one();
    for (b, mult) in k.blocks() {
        let n = b.nrows();
        let mut term = CMatrix::identity(n, n);
        let mut sum = term.clone();
        for _ in 0..3 {
            term = -(&term * b);
            sum += &term;
        }
        let d = log_det(&sum);
        for _ in 0..mult {
            acc = acc.mul(d);
        }
    }
    checked(acc, k.z)
}

pub fn det_i_plus_k(z: SheetPoint, v: &Potential, q: &Quadrature) -> Result<LogDet> {
    det_of(&assemble_bs(z, v, q)?)
}

pub fn det_h(z: SheetPoint, v: &Potential, q: &Quadrature) -> Result<LogDet> {
    det_h_of(&assemble_bs(z, v, q)?)
}

/// `|H − det(I+K)·det(Σ(−K)^j)| / |H|`.
pub fn factorization_gap(k: &BSOperator) -> Result<f64> {
    let h = det_h_of(k)?;
    let prod = det_of(k)?.mul(det_cofactor_of(k)?);
    // compare on the common scale of H
    let ratio = (prod.log_abs - h.log_abs).exp() * prod.phase - h.phase;
    Ok(ratio.norm())
}

/// Determinant and `∂_z log det` from one factorization per block.
fn det_and_logderiv(k: &BSOperator, dk: &BSOperator, variant: DetVariant) -> Result<(LogDet, Complex64)> {
    let mut det = LogDet::one();
    let mut trace = Complex64::new(0.0, 0.0);
    for ((b, mult), (db, _)) in k.blocks().into_iter().zip(dk.blocks()) {
        let n = b.nrows();
        let (a, da) = match variant {
            DetVariant::IplusK => (identity_plus(b), db.clone()),
            DetVariant::H => {
                let b2 = b * b;
                let b3 = &b2 * b;
                let a = CMatrix::identity(n, n) - &b3 * b;
                let da = -(db * &b3 + b * db * &b2 + &b2 * db * b + &b3 * db);
                (a, da)
            }
        };
        let lu = Lu::new(&a);
        let d = lu.log_det();
        let sol = lu.solve(&da)?;
        for _ in 0..mult {
            det = det.mul(d);
        }
        trace += sol.trace() * mult as f64;
    }
    Ok((checked(det, k.z)?, trace))
}

/// `∂_z log det(I + K(z)) = tr((I + K)⁻¹ ∂_z K)`.
pub fn logderiv_trace(z: SheetPoint, v: &Potential, q: &Quadrature) -> Result<Complex64> {
    let (k, dk) = assemble_bs_with_dz(z, v, q)?;
    Ok(det_and_logderiv(&k, &dk, DetVariant::IplusK)?.1)
}

/// Determinant and its logarithmic derivative for the chosen variant.
pub fn evaluate(z: SheetPoint, v: &Potential, q: &Quadrature, variant: DetVariant) -> Result<(LogDet, Complex64)> {
    let (k, dk) = assemble_bs_with_dz(z, v, q)?;
    det_and_logderiv(&k, &dk, variant)
}

/// Rectangle `[u₀, u₁] × [θ₀, θ₁]` in `(log|z|, arg z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub log_mod: [f64; 2],
    pub arg: [f64; 2],
}

impl Rect {
    pub fn new(r_min: f64, r_max: f64, arg_min: f64, arg_max: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && arg_max > arg_min) {
            return Err(Error::domain(format!(
                "degenerate rectangle |z| ∈ [{r_min}, {r_max}], arg ∈ [{arg_min}, {arg_max}]"
            )));
        }
        Ok(Self {
            log_mod: [r_min.ln(), r_max.ln()],
            arg: [arg_min, arg_max],
        })
    }

    /// Counter-clockwise corners in `w = log|z| + i·arg`.
    pub fn corners(&self) -> [SheetPoint; 4] {
        let [u0, u1] = self.log_mod;
        let [t0, t1] = self.arg;
        [
            SheetPoint::from_log(u0, t0),
            SheetPoint::from_log(u1, t0),
            SheetPoint::from_log(u1, t1),
            SheetPoint::from_log(u0, t1),
        ]
    }

    pub fn size(&self) -> f64 {
        (self.log_mod[1] - self.log_mod[0]).max(self.arg[1] - self.arg[0])
    }

    pub fn center(&self) -> SheetPoint {
        SheetPoint::from_log(
            0.5 * (self.log_mod[0] + self.log_mod[1]),
            0.5 * (self.arg[0] + self.arg[1]),
        )
    }

    pub fn contains(&self, z: SheetPoint) -> bool {
        let u = z.log_modulus();
        (self.log_mod[0]..=self.log_mod[1]).contains(&u) && (self.arg[0]..=self.arg[1]).contains(&z.arg_total)
    }

    /// Children for subdivision, ordered by (arg, log modulus): quadrants,
    /// or halves across the long side when the aspect ratio (in
    /// `w = log z`) exceeds two. Cuts sit slightly off centre so symmetric
    /// configurations (real axis, arg = π) never lie on them.
    pub fn split(&self) -> Vec<Rect> {
        let [u0, u1] = self.log_mod;
        let [t0, t1] = self.arg;
        let um = u0 + SPLIT_FRACTION * (u1 - u0);
        let tm = t0 + SPLIT_FRACTION * (t1 - t0);
        let r = |u: [f64; 2], t: [f64; 2]| Rect { log_mod: u, arg: t };
        let (du, dt) = (u1 - u0, t1 - t0);
        if dt > 2.0 * du {
            vec![r([u0, u1], [t0, tm]), r([u0, u1], [tm, t1])]
        } else if du > 2.0 * dt {
            vec![r([u0, um], [t0, t1]), r([um, u1], [t0, t1])]
        } else {
            vec![r([u0, um], [t0, tm]), r([um, u1], [t0, tm]), r([u0, um], [tm, t1]), r([um, u1], [tm, t1])]
        }
    }
}

const SPLIT_FRACTION: f64 = 0.4873;

/// Outcome of one argument-principle integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourCount {
    pub count: i64,
    /// `(1/2πi)∮ d log det` before rounding.
    pub raw_re: f64,
    pub raw_im: f64,
    pub points_per_edge: usize,
    /// Median of `|det|` over the contour nodes.
    pub median_abs_det: f64,
    pub min_abs_det: f64,
}

impl ContourCount {
    pub fn distance_to_integer(&self) -> f64 {
        Complex64::new(self.raw_re - self.count as f64, self.raw_im).norm()
    }
}

/// Settings for contour counting and the pole search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub variant: DetVariant,
    /// Gauss–Legendre nodes per edge; doubled on rejection.
    pub contour_points: usize,
    pub max_contour_points: usize,
    /// Rectangles smaller than this (in `log|z|` and `arg`) go to Newton.
    pub tol: f64,
    /// Rectangles below this size are abandoned as unresolved.
    pub subdivision_floor: f64,
    /// Budget on processed rectangles.
    pub max_rectangles: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            variant: DetVariant::IplusK,
            contour_points: 64,
            max_contour_points: 512,
            tol: 0.05,
            subdivision_floor: 1e-6,
            max_rectangles: 400,
        }
    }
}

fn integrate_polyline(
    vertices: &[SheetPoint],
    points: usize,
    v: &Potential,
    q: &Quadrature,
    variant: DetVariant,
) -> Result<(Complex64, Vec<f64>)> {
    let (t, wt) = gauss_legendre_on(points, 0.0, 1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mags = Vec::with_capacity(points * vertices.len());
    for e in 0..vertices.len() {
        let a = vertices[e];
        let b = vertices[(e + 1) % vertices.len()];
        let wa = Complex64::new(a.log_modulus(), a.arg_total);
        let wb = Complex64::new(b.log_modulus(), b.arg_total);
        let dw = wb - wa;
        for (ti, wi) in t.iter().zip(&wt) {
            let w = wa + dw * *ti;
            let z = SheetPoint::from_log(w.re, w.im);
            let (det, ld) = evaluate(z, v, q, variant)?;
            mags.push(det.log_abs);
            // ∂_w log det = z·∂_z log det
            acc += ld * z.value() * dw * *wi;
        }
    }
    Ok((acc / (TAU * I), mags))
}

/// Zeros of the determinant inside a closed polyline on Λ (counter-clockwise
/// in `(log|z|, arg)`), counted with multiplicity.
pub fn count_zeros(contour: &[SheetPoint], v: &Potential, q: &Quadrature, opts: &SearchOptions) -> Result<ContourCount> {
    if contour.len() < 3 {
        return Err(Error::domain("a contour needs at least three vertices"));
    }
    let mut points = opts.contour_points.max(2);
    loop {
        let (raw, mut mags) = integrate_polyline(contour, points, v, q, opts.variant)?;
        mags.sort_by(f64::total_cmp);
        let count = raw.re.round() as i64;
        let res = ContourCount {
            count,
            raw_re: raw.re,
            raw_im: raw.im,
            points_per_edge: points,
            median_abs_det: mags[mags.len() / 2].exp(),
            min_abs_det: mags[0].exp(),
        };
        if res.distance_to_integer() <= 0.1 {
            return Ok(res);
        }
        if points * 2 > opts.max_contour_points {
            return Err(Error::ContourRejected { value: raw.re });
        }
        points *= 2;
    }
}

pub fn count_in_rect(rect: &Rect, v: &Potential, q: &Quadrature, opts: &SearchOptions) -> Result<ContourCount> {
    count_zeros(&rect.corners(), v, q, opts)
}

/// Region of Λ searched for poles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub arg_min: f64,
    pub arg_max: f64,
    pub exclusion_radius: f64,
}

/// Widest argument span accepted, in sheets.
pub const MAX_SHEETS: f64 = 16.0;

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.exclusion_radius > 0.0 && self.r_min >= self.exclusion_radius && self.r_max > self.r_min) {
            return Err(Error::domain(format!(
                "need 0 < exclusion_radius ≤ r_min < r_max, got {} / {} / {}",
                self.exclusion_radius, self.r_min, self.r_max
            )));
        }
        if !(self.arg_max > self.arg_min && self.arg_max - self.arg_min <= TAU * MAX_SHEETS) {
            return Err(Error::domain(format!(
                "argument span [{}, {}] is empty or wider than {MAX_SHEETS} sheets",
                self.arg_min, self.arg_max
            )));
        }
        Ok(())
    }

    pub fn rect(&self) -> Result<Rect> {
        self.validate()?;
        Rect::new(self.r_min, self.r_max, self.arg_min, self.arg_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleMethod {
    ArgumentPrinciple,
    EigenvalueNewton,
}

/// A located zero of the determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleRecord {
    pub location: SheetPoint,
    pub multiplicity: usize,
    /// `|det|` at the refined location.
    pub residual: f64,
    /// Median `|det|` on the isolating contour.
    pub contour_median: f64,
    pub contour_count: i64,
    pub method: PoleMethod,
}

/// A rectangle the search could not settle, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unresolved {
    pub rect: Rect,
    pub reason: String,
}

/// Every subdivision step, for auditing winding-number additivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitAudit {
    pub parent: Rect,
    pub parent_count: i64,
    pub children_sum: i64,
    pub worst_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    pub region: RegionSpec,
    pub poles: Vec<PoleRecord>,
    pub unresolved: Vec<Unresolved>,
    pub audits: Vec<SplitAudit>,
    /// Largest distance of any accepted contour integral from its integer.
    pub worst_distance: f64,
    /// Rectangles whose own contour was rejected and which were split blind.
    pub rejected_splits: usize,
    /// Splits whose children could not all be counted, so no audit exists.
    pub unaudited_splits: usize,
}

fn newton(rect: &Rect, mult: i64, v: &Potential, q: &Quadrature, variant: DetVariant) -> Result<Option<(SheetPoint, f64)>> {
    let c = rect.center();
    let mut w = Complex64::new(c.log_modulus(), c.arg_total);
    for _ in 0..60 {
        let z = SheetPoint::from_log(w.re, w.im);
        let (det, ld) = match evaluate(z, v, q, variant) {
            Ok(x) => x,
            // an exact zero of the determinant is the best possible outcome
            Err(Error::DeterminantRange { .. }) | Err(Error::NearSingular { .. }) => return Ok(Some((z, 0.0))),
            Err(e) => return Err(e),
        };
        let step = mult as f64 / (ld * z.value());
        w -= step;
        if !w.is_finite() {
            return Ok(None);
        }
        if step.norm() < 1e-13 * w.norm().max(1.0) {
            let z = SheetPoint::from_log(w.re, w.im);
            let res = match evaluate(z, v, q, variant) {
                Ok((d, _)) => d.log_abs.exp(),
                Err(Error::DeterminantRange { .. }) | Err(Error::NearSingular { .. }) => 0.0,
                Err(e) => return Err(e),
            };
            let _ = det;
            return Ok(Some((z, res)));
        }
    }
    Ok(None)
}

/// Recursive subdivision of the region with argument-principle counts and
/// Newton refinement.
pub fn locate_poles(region: &RegionSpec, v: &Potential, q: &Quadrature, opts: &SearchOptions) -> Result<PoleSet> {
    let root = region.rect()?;
    let mut out = PoleSet {
        region: *region,
        poles: Vec::new(),
        unresolved: Vec::new(),
        audits: Vec::new(),
        worst_distance: 0.0,
        rejected_splits: 0,
        unaudited_splits: 0,
    };
    if v.is_zero() {
        return Ok(out);
    }
    let mut queue: VecDeque<(Rect, Option<ContourCount>)> = VecDeque::from([(root, None)]);
    let mut processed = 0usize;
    while let Some((rect, known)) = queue.pop_front() {
        if processed >= opts.max_rectangles {
            out.unresolved.push(Unresolved {
                rect,
                reason: "rectangle budget exhausted".into(),
            });
            continue;
        }
        processed += 1;
        let cc = match known {
            Some(c) => c,
            None => match count_in_rect(&rect, v, q, opts) {
                Ok(c) => c,
                Err(e @ (Error::ContourRejected { .. } | Error::DeterminantRange { .. } | Error::NearSingular { .. })) => {
                    // a rejected contour is retried as four smaller ones
                    if rect.size() * 0.5 < opts.subdivision_floor {
                        out.unresolved.push(Unresolved { rect, reason: e.to_string() });
                    } else {
                        out.rejected_splits += 1;
                        queue.extend(rect.split().into_iter().map(|k| (k, None)));
                    }
                    continue;
                }
                Err(e) => return Err(e),
            },
        };
        out.worst_distance = out.worst_distance.max(cc.distance_to_integer());
        if cc.count <= 0 {
            if cc.count < 0 {
                out.unresolved.push(Unresolved {
                    rect,
                    reason: format!("negative winding number {}", cc.count),
                });
            }
            continue;
        }
        let small = if cc.count == 1 {
            rect.size() <= opts.tol
        } else {
            rect.size() <= (opts.tol * 1e-3).max(opts.subdivision_floor)
        };
        if small {
            if let Some((z, residual)) = newton(&rect, cc.count, v, q, opts.variant)? {
                if rect.contains(z) && residual <= 1e-6 * cc.median_abs_det {
                    out.poles.push(PoleRecord {
                        location: z,
                        multiplicity: cc.count as usize,
                        residual,
                        contour_median: cc.median_abs_det,
                        contour_count: cc.count,
                        method: PoleMethod::ArgumentPrinciple,
                    });
                    continue;
                }
            }
        }
        if rect.size() * 0.5 < opts.subdivision_floor {
            out.unresolved.push(Unresolved {
                rect,
                reason: format!("subdivision floor reached with count {}", cc.count),
            });
            continue;
        }
        let kids = rect.split();
        let mut counts = Vec::with_capacity(4);
        let mut failed = false;
        for k in &kids {
            match count_in_rect(k, v, q, opts) {
                Ok(c) => counts.push(Some(c)),
                Err(Error::ContourRejected { .. } | Error::DeterminantRange { .. } | Error::NearSingular { .. }) => {
                    // counted again (and split if need be) when dequeued
                    counts.push(None);
                    failed = true;
                }
                Err(e) => return Err(e),
            }
        }
        if !failed {
            let sum: i64 = counts.iter().map(|c| c.unwrap().count).sum();
            let worst = counts.iter().map(|c| c.unwrap().distance_to_integer()).fold(0.0, f64::max);
            out.audits.push(SplitAudit {
                parent: rect,
                parent_count: cc.count,
                children_sum: sum,
                worst_distance: worst,
            });
        }
        if failed {
            out.unaudited_splits += 1;
        }
        queue.extend(kids.into_iter().zip(counts));
    }
    out.poles.sort_by(|a, b| {
        a.location
            .arg_total
            .total_cmp(&b.location.arg_total)
            .then(a.location.modulus.total_cmp(&b.location.modulus))
    });
    Ok(out)
}

/// `N(r, a)`: poles with `|z| ≤ r` and `|arg z| ≤ a`, with multiplicity.
///
/// Refuses when the searched region does not cover the query set (down to
/// the excluded disc around zero) or when an unresolved rectangle meets it.
pub fn counting_function(r: f64, a: f64, set: &PoleSet) -> Result<usize> {
    if !(r > 0.0 && a > 0.0) {
        return Err(Error::domain("N(r, a) needs r > 0 and a > 0"));
    }
    let reg = &set.region;
    let mut gaps = Vec::new();
    if r > reg.r_max {
        gaps.push(format!("{} < |z| ≤ {r}", reg.r_max));
    }
    if reg.r_min > reg.exclusion_radius {
        gaps.push(format!("{} < |z| < {}", reg.exclusion_radius, reg.r_min));
    }
    if reg.arg_min > -a {
        gaps.push(format!("{} ≤ arg z < {}", -a, reg.arg_min));
    }
    if reg.arg_max < a {
        gaps.push(format!("{} < arg z ≤ {a}", reg.arg_max));
    }
    let query = Rect {
        log_mod: [reg.r_min.ln(), r.ln()],
        arg: [-a, a],
    };
    for u in &set.unresolved {
        let overlap = u.rect.log_mod[0] < query.log_mod[1]
            && u.rect.log_mod[1] > query.log_mod[0]
            && u.rect.arg[0] < query.arg[1]
            && u.rect.arg[1] > query.arg[0];
        if overlap {
            gaps.push(format!(
                "unresolved log|z| ∈ [{:.4}, {:.4}], arg ∈ [{:.4}, {:.4}] ({})",
                u.rect.log_mod[0], u.rect.log_mod[1], u.rect.arg[0], u.rect.arg[1], u.reason
            ));
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Coverage(gaps.join("; ")));
    }
    Ok(set
        .poles
        .iter()
        .filter(|p| p.location.modulus <= r && p.location.arg_total.abs() <= a)
        .map(|p| p.multiplicity)
        .sum())
}

/// `⟨a⟩·(⟨r⟩³ + log³⟨a⟩)` with `⟨t⟩ = √(1 + t²)`.
pub fn counting_envelope(r: f64, a: f64) -> f64 {
    let br = |t: f64| (1.0 + t * t).sqrt();
    br(a) * (br(r).powi(3) + br(a).ln().powi(3))
}

/// Outward offset (in `log|z|` and `arg`) of every query boundary in
/// [`counting_table`]. Zeros exactly on `|arg z| = a` (bound states at
/// `arg = π`) then count as inside without sitting on a contour.
pub const TABLE_MARGIN: f64 = 1e-3;

/// `N(r, a)` on a grid of queries, counted directly by the argument principle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub radii: Vec<f64>,
    pub args: Vec<f64>,
    pub exclusion_radius: f64,
    /// `counts[i][j] = N(radii[i], args[j])`.
    pub counts: Vec<Vec<usize>>,
    pub contours: usize,
    pub rejected_splits: usize,
    pub worst_distance: f64,
}

struct CellTally {
    contours: usize,
    rejected_splits: usize,
    worst_distance: f64,
}

fn count_cell(rect: &Rect, v: &Potential, q: &Quadrature, opts: &SearchOptions, tally: &mut CellTally) -> Result<i64> {
    let mut stack = vec![*rect];
    let mut total = 0;
    while let Some(r) = stack.pop() {
        if tally.contours >= opts.max_rectangles {
            return Err(Error::Coverage(format!("contour budget exhausted near {r:?}")));
        }
        tally.contours += 1;
        match count_in_rect(&r, v, q, opts) {
            Ok(c) if c.count >= 0 => {
                tally.worst_distance = tally.worst_distance.max(c.distance_to_integer());
                total += c.count;
            }
            Ok(c) => return Err(Error::Coverage(format!("negative winding number {} on {r:?}", c.count))),
            Err(e @ (Error::ContourRejected { .. } | Error::DeterminantRange { .. } | Error::NearSingular { .. })) => {
                if r.size() * 0.5 < opts.subdivision_floor {
                    return Err(Error::Coverage(format!("unresolved {r:?}: {e}")));
                }
                tally.rejected_splits += 1;
                stack.extend(r.split());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

/// `N(r, a)` for every pair in `radii × args` without locating the poles.
///
/// The query sets are unions of annular sectors bounded by the given radii
/// and `±a`; each sector is counted once, and a rejected contour is split
/// until every piece is certified. Boundaries sit [`TABLE_MARGIN`] outside
/// the nominal values. Refuses (coverage error) rather than guess.
pub fn counting_table(
    radii: &[f64],
    args: &[f64],
    exclusion_radius: f64,
    v: &Potential,
    q: &Quadrature,
    opts: &SearchOptions,
) -> Result<CountTable> {
    let mut rs = radii.to_vec();
    let mut as_ = args.to_vec();
    rs.sort_by(f64::total_cmp);
    as_.sort_by(f64::total_cmp);
    rs.dedup();
    as_.dedup();
    if !(exclusion_radius > 0.0 && rs.first().is_some_and(|r| *r > exclusion_radius) && as_.first().is_some_and(|a| *a > 0.0)) {
        return Err(Error::domain("counting table needs radii above the exclusion radius and positive arguments"));
    }
    if 2.0 * (as_[as_.len() - 1] + TABLE_MARGIN) > TAU * MAX_SHEETS {
        return Err(Error::domain(format!("argument span wider than {MAX_SHEETS} sheets")));
    }
    let mut u_edges = vec![exclusion_radius.ln()];
    u_edges.extend(rs.iter().map(|r| r.ln() + TABLE_MARGIN));
    let mut t_edges: Vec<f64> = as_.iter().rev().map(|a| -(a + TABLE_MARGIN)).collect();
    t_edges.extend(as_.iter().map(|a| a + TABLE_MARGIN));
    // cells[i][k]: radial band i, argument band k
    let na = as_.len();
    let mut tally = CellTally {
        contours: 0,
        rejected_splits: 0,
        worst_distance: 0.0,
    };
    let mut cells = vec![vec![0i64; 2 * na - 1]; rs.len()];
    if !v.is_zero() {
        for (i, row) in cells.iter_mut().enumerate() {
            for (k, c) in row.iter_mut().enumerate() {
                let rect = Rect {
                    log_mod: [u_edges[i], u_edges[i + 1]],
                    arg: [t_edges[k], t_edges[k + 1]],
                };
                *c = count_cell(&rect, v, q, opts, &mut tally)?;
            }
        }
    }
    let counts = (0..rs.len())
        .map(|i| {
            (0..na)
                .map(|j| {
                    // |arg| ≤ a_j covers argument bands na−1−j ..= na−1+j
                    let s: i64 = cells[..=i].iter().map(|row| row[na - 1 - j..=na - 1 + j].iter().sum::<i64>()).sum();
                    s as usize
                })
                .collect()
        })
        .collect();
    Ok(CountTable {
        radii: rs,
        args: as_,
        exclusion_radius,
        counts,
        contours: tally.contours,
        rejected_splits: tally.rejected_splits,
        worst_distance: tally.worst_distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ZeroEnergy {
    Regular,
    Obstructed { dim: usize },
}

/// Zero-energy report: status plus the quantities behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroEnergyReport {
    pub status: ZeroEnergy,
    pub smallest_singular_value: f64,
    pub norm: f64,
    /// Smallest eigenvalue of the weight-symmetrized `I + G₀V` (real `V` only).
    pub smallest_eigenvalue: Option<f64>,
}

/// Relative threshold on singular values of `I + G₀V` for a null vector.
pub const OBSTRUCTION_THRESHOLD: f64 = 1e-8;

pub fn zero_energy_obstruction(v: &Potential, q: &Quadrature) -> Result<ZeroEnergyReport> {
    let g = zero_energy_operator(v, q)?;
    let mut sv = Vec::new();
    let mut eig_min: Option<f64> = None;
    for (b, mult) in g.symmetrized_blocks() {
        let a = identity_plus(&b);
        let s = singular_values(&a);
        for _ in 0..mult {
            sv.extend_from_slice(&s);
        }
        if v.is_real() {
            let vs = sym_eigen_min(&a);
            eig_min = Some(eig_min.map_or(vs, |m: f64| m.min(vs)));
        }
    }
    sv.sort_by(|a, b| b.total_cmp(a));
    let norm = sv[0];
    let smallest = *sv.last().unwrap();
    let dim = sv.iter().filter(|s| **s < OBSTRUCTION_THRESHOLD * norm).count();
    Ok(ZeroEnergyReport {
        status: if dim == 0 { ZeroEnergy::Regular } else { ZeroEnergy::Obstructed { dim } },
        smallest_singular_value: smallest,
        norm,
        smallest_eigenvalue: eig_min,
    })
}

/// Smallest real part among the eigenvalues of a block. For real `V`,
/// `G₀V` is similar to the Hermitian `G₀^{1/2} V G₀^{1/2}`, so these are real.
fn sym_eigen_min(a: &CMatrix) -> f64 {
    let e = eigenvalues(a);
    if e.is_empty() {
        return f64::NAN;
    }
    e.iter().map(|x| x.re).fold(f64::INFINITY, f64::min)
}

/// First amplitude `v₀ ∈ [lo, hi]` at which `I + G₀(v₀·shape)` becomes
/// singular, by bisection on the sign of its smallest eigenvalue.
pub fn first_obstruction_amplitude(shape: &Potential, q: &Quadrature, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    if !shape.is_real() {
        return Err(Error::domain("bisection needs a real potential shape"));
    }
    let f = |t: f64| -> Result<f64> {
        let g = zero_energy_operator(&shape.scaled(Complex64::new(t, 0.0)), q)?;
        Ok(g.symmetrized_blocks()
            .iter()
            .map(|(b, _)| sym_eigen_min(&identity_plus(b)))
            .fold(f64::INFINITY, f64::min))
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::domain(format!(
            "no sign change of the smallest eigenvalue on [{lo}, {hi}] ({fa:.3e}, {fb:.3e})"
        )));
    }
    while (b - a) > rel_tol * a.abs().max(b.abs()) {
        let m = 0.5 * (a + b);
        if f(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Descending singular values of the weight-symmetrized operator.
pub fn singular_value_profile(k: &BSOperator) -> Vec<f64> {
    let mut out = Vec::with_capacity(k.dim());
    for (b, mult) in k.symmetrized_blocks() {
        let s = singular_values(&b);
        for _ in 0..mult {
            out.extend_from_slice(&s);
        }
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Descending singular values of `K^{d+1}` (weight-symmetrized).
pub fn singular_value_profile_power(k: &BSOperator) -> Vec<f64> {
    let mut out = Vec::with_capacity(k.dim());
    for (b, mult) in k.symmetrized_blocks() {
        let s = singular_values(&pow4(&b));
        for _ in 0..mult {
            out.extend_from_slice(&s);
        }
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Least-squares slope of `log s_j` against `log j` (1-based) over
/// `j ∈ [lo, hi]`.
pub fn loglog_slope(s: &[f64], lo: usize, hi: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (lo.max(1)..=hi.min(s.len()))
        .filter(|j| s[j - 1] > 0.0)
        .map(|j| ((j as f64).ln(), s[j - 1].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// The decade of indices centred geometrically in `1..=n`.
pub fn middle_decade(n: usize) -> (usize, usize) {
    let c = (n as f64).sqrt();
    let lo = (c / 10f64.sqrt()).round().max(1.0) as usize;
    (lo, lo * 10)
}

/// `log|det|` on a sample grid of a rectangle, row-major in arg then modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanField {
    pub rect: Rect,
    pub n_log_mod: usize,
    pub n_arg: usize,
    /// `(log|z|, arg, log|det|)`; `log|det|` is NaN where evaluation failed.
    pub samples: Vec<(f64, f64, f64)>,
    pub nan_cells: Vec<(usize, usize)>,
}

pub fn scan_log_det(rect: &Rect, n_log_mod: usize, n_arg: usize, v: &Potential, q: &Quadrature, variant: DetVariant) -> Result<ScanField> {
    if n_log_mod < 2 || n_arg < 2 {
        return Err(Error::domain("scan needs at least 2 samples per direction"));
    }
    let mut samples = Vec::with_capacity(n_log_mod * n_arg);
    let mut nan_cells = Vec::new();
    for i in 0..n_arg {
        let t = rect.arg[0] + (rect.arg[1] - rect.arg[0]) * i as f64 / (n_arg - 1) as f64;
        for j in 0..n_log_mod {
            let u = rect.log_mod[0] + (rect.log_mod[1] - rect.log_mod[0]) * j as f64 / (n_log_mod - 1) as f64;
            let z = SheetPoint::from_log(u, t);
            let k = assemble_bs(z, v, q)?;
            let d = match variant {
                DetVariant::IplusK => det_of(&k),
                DetVariant::H => det_h_of(&k),
            };
            let val = match d {
                Ok(d) => d.log_abs,
                Err(Error::DeterminantRange { .. }) => {
                    nan_cells.push((i, j));
                    f64::NAN
                }
                Err(e) => return Err(e),
            };
            samples.push((u, t, val));
        }
    }
    Ok(ScanField {
        rect: *rect,
        n_log_mod,
        n_arg,
        samples,
        nan_cells,
    })
}

/// `log(1 + log⁺|H(z)|)` along the ray `arg z = θ`, for the growth diagnostic.
pub fn growth_profile(theta: f64, radii: &[f64], v: &Potential, q: &Quadrature) -> Result<Vec<(f64, f64)>> {
    radii
        .iter()
        .map(|&r| {
            let h = det_h(SheetPoint::new(r, theta)?, v, q)?;
            Ok((r, (1.0 + h.log_abs.max(0.0)).ln()))
        })
        .collect()
}

/// Least-squares slope of `y` against `log r`.
pub fn growth_slope(profile: &[(f64, f64)]) -> f64 {
    let n = profile.len() as f64;
    let mx = profile.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = profile.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = profile.iter().map(|p| (p.0.ln() - mx) * (p.1 - my)).sum();
    let sxx: f64 = profile.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    sxy / sxx
}
