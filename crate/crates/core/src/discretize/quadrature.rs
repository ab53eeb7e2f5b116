use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rayon::prelude::*;

use super::dist3;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre_on;

/// Corrected diagonal weights for the local kernel model.
///
/// For node `i`, `Σ_{j≠i} w_j/|x_i−x_j|^p + correction_p` equals the exact
/// ball integral `∫_B |x_i − y|^{−p} dy`, so constants are integrated exactly
/// against the singular part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagCorrection {
    pub inverse_square: f64,
    pub inverse: f64,
    /// Same for `log|x_i − y|`.
    pub log: f64,
}

/// Product rule on the ball: Gauss–Legendre in radius and in `cos θ`,
/// uniform in azimuth.
///
/// Nodes are ordered azimuth-major: node `c·A + a` sits on ring `a` (a
/// radius/polar pair) at azimuth `φ_c = 2π(c + ½)/n_φ`, so the first `A`
/// nodes form one meridian and every quantity that depends only on `a`
/// repeats with period `A`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub radius: f64,
    pub n: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub diag_correction: Vec<DiagCorrection>,
    geometry: Arc<RingGeometry>,
}

/// Distinct distances between meridian nodes and every other node, used by
/// the azimuthal assembly.
#[derive(Debug)]
pub(crate) struct RingGeometry {
    pub distinct: Vec<f64>,
    /// `index[(k·A + a)·A + b]` is the position in `distinct` of
    /// `|x_{0,a} − x_{k,b}|`, `k = 0..=n_φ/2`; `u32::MAX` on the diagonal.
    pub index: Vec<u32>,
    /// Same layout: cell average of `|x − y|^{−2}` minus the point value,
    /// symmetrized over source and target cells; nonzero only for near pairs.
    pub near: Vec<f64>,
}

/// Pairs closer than this many source-cell diameters get a cell-averaged
/// inverse-square kernel.
const NEAR_CELLS: f64 = 2.0;

/// A cell of the product rule in `(r, cos θ, φ)`.
#[derive(Debug, Clone, Copy)]
struct Cell {
    r: [f64; 2],
    mu: [f64; 2],
    phi: [f64; 2],
}

impl Cell {
    fn point(r: f64, mu: f64, phi: f64) -> [f64; 3] {
        let s = (1.0 - mu * mu).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        [r * s * cp, r * s * sp, r * mu]
    }

    fn centre(&self) -> [f64; 3] {
        Self::point(0.5 * (self.r[0] + self.r[1]), 0.5 * (self.mu[0] + self.mu[1]), 0.5 * (self.phi[0] + self.phi[1]))
    }

    fn diameter(&self) -> f64 {
        let dtheta = self.mu[0].clamp(-1.0, 1.0).acos() - self.mu[1].clamp(-1.0, 1.0).acos();
        let s_max = if self.mu[0] <= 0.0 && self.mu[1] >= 0.0 {
            1.0
        } else {
            let m = self.mu[0].abs().min(self.mu[1].abs());
            (1.0 - m * m).sqrt()
        };
        let dr = self.r[1] - self.r[0];
        let rt = self.r[1] * dtheta.abs();
        let rp = self.r[1] * s_max * (self.phi[1] - self.phi[0]);
        (dr * dr + rt * rt + rp * rp).sqrt()
    }

    fn split(&self) -> [Cell; 8] {
        let rm = 0.5 * (self.r[0] + self.r[1]);
        let mm = 0.5 * (self.mu[0] + self.mu[1]);
        let pm = 0.5 * (self.phi[0] + self.phi[1]);
        let mut out = [*self; 8];
        for (i, c) in out.iter_mut().enumerate() {
            c.r = if i & 1 == 0 { [self.r[0], rm] } else { [rm, self.r[1]] };
            c.mu = if i & 2 == 0 { [self.mu[0], mm] } else { [mm, self.mu[1]] };
            c.phi = if i & 4 == 0 { [self.phi[0], pm] } else { [pm, self.phi[1]] };
        }
        out
    }

    /// `(∫_cell |x − y|^{−2} dy, |cell|)`, refining toward `x`.
    fn inverse_square_integral(&self, x: [f64; 3], depth: u32) -> (f64, f64) {
        if depth < 7 && dist3(x, self.centre()) < 1.5 * self.diameter() {
            return self.split().iter().fold((0.0, 0.0), |acc, c| {
                let (i, v) = c.inverse_square_integral(x, depth + 1);
                (acc.0 + i, acc.1 + v)
            });
        }
        let (gr, wr) = gauss_legendre_on(5, self.r[0], self.r[1]);
        let (gm, wm) = gauss_legendre_on(5, self.mu[0], self.mu[1]);
        let (gp, wp) = gauss_legendre_on(5, self.phi[0], self.phi[1]);
        let (mut int, mut vol) = (0.0, 0.0);
        for (r, a) in gr.iter().zip(&wr) {
            for (m, b) in gm.iter().zip(&wm) {
                for (p, c) in gp.iter().zip(&wp) {
                    let w = a * b * c * r * r;
                    let d = dist3(x, Self::point(*r, *m, *p));
                    vol += w;
                    int += w / (d * d);
                }
            }
        }
        (int, vol)
    }
}

/// Cell edges whose widths are the Gauss weights; each Gauss node lies
/// inside its own cell.
fn cell_edges(start: f64, w: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(w.len() + 1);
    e.push(start);
    for x in w {
        e.push(e.last().unwrap() + x);
    }
    e
}

/// `∫_{|y|≤R} |x − y|^{−1} dy` for `|x| = a ≤ R`.
pub fn ball_inverse_integral(radius: f64, a: f64) -> f64 {
    2.0 * PI * radius * radius - 2.0 * PI * a * a / 3.0
}

/// `∫_{|y|≤R} |x − y|^{−2} dy` for `|x| = a < R`.
pub fn ball_inverse_square_integral(radius: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 4.0 * PI * radius;
    }
    2.0 * PI * radius + PI * (radius * radius - a * a) / a * ((radius + a) / (radius - a)).ln()
}

/// `∫_{|y|≤R} log|x − y| dy` for `|x| = a ≤ R`, from the closed-form
/// shell averages integrated over the radius.
pub fn ball_log_integral(radius: f64, a: f64) -> f64 {
    // shell of radius s: 2πs²·½∫₋₁¹ log(a² + s² − 2asμ) dμ
    let shell = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        if a <= 1e-9 * s {
            return 4.0 * PI * s * s * s.ln();
        }
        let f = |u: f64| if u > 0.0 { u * u.ln() - u } else { 0.0 };
        PI * s / (2.0 * a) * (f((a + s) * (a + s)) - f((a - s) * (a - s)))
    };
    // panels graded toward s = a, where the shell average has a log kink
    let mut edges = vec![0.0, radius];
    if a <= 1e-9 * radius {
        // s² log s at the centre
        edges.extend((1..24).map(|k| radius * 0.25f64.powi(k)));
    } else if a < radius {
        let mut h = (a.min(radius - a)) * 0.5;
        edges.push(a);
        while h > 1e-12 * radius {
            if a - h > 0.0 {
                edges.push(a - h);
            }
            if a + h < radius {
                edges.push(a + h);
            }
            h *= 0.25;
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
        .windows(2)
        .map(|w| {
            let (x, wt) = gauss_legendre_on(20, w[0], w[1]);
            x.iter().zip(&wt).map(|(s, w)| w * shell(*s)).sum::<f64>()
        })
        .sum()
}

/// Ball rule with `n/2` radial, `n/2` polar and `n` azimuthal nodes.
pub fn build_quadrature(radius: f64, n: usize) -> Result<Quadrature> {
    build_quadrature_with_breaks(radius, n, &[])
}

/// Ball rule of radius `radius` with radial panels at the potential's
/// breakpoints; the default for every pipeline.
pub fn build_quadrature_for(v: &super::Potential, radius: f64, n: usize) -> Result<Quadrature> {
    build_quadrature_with_breaks(radius, n, &v.radial_breakpoints())
}

/// Ball rule whose radial Gauss–Legendre nodes are split into panels at the
/// given radii, so a potential that is only piecewise smooth in `|x|` is
/// integrated at the full order on each piece. Breaks outside `(0, R)` are
/// ignored; nodes go to panels in proportion to their length, at least two
/// each.
pub fn build_quadrature_with_breaks(radius: f64, n: usize, breaks: &[f64]) -> Result<Quadrature> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("quadrature radius must be positive, got {radius}")));
    }
    if n < 8 || n % 2 != 0 {
        return Err(Error::domain(format!("nodes per axis must be even and at least 8, got {n}")));
    }
    build_product_rule(radius, [n / 2, n / 2, n], breaks, n)
}

/// Product rule with explicit radial, polar and azimuthal counts
/// (`n_φ` even); `n` is recorded as the nominal resolution.
pub fn build_product_rule(radius: f64, counts: [usize; 3], breaks: &[f64], n: usize) -> Result<Quadrature> {
    let [n_r, n_theta, n_phi] = counts;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("quadrature radius must be positive, got {radius}")));
    }
    if n_r < 2 || n_theta < 2 || n_phi < 4 || n_phi % 2 != 0 {
        return Err(Error::domain(format!("bad product-rule counts {counts:?}")));
    }
    let (rho, w_rho) = radial_rule(radius, n_r, breaks);
    let (mu, w_mu) = gauss_legendre_on(n_theta, -1.0, 1.0);
    let dphi = TAU / n_phi as f64;

    let mut nodes = Vec::with_capacity(n_r * n_theta * n_phi);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for c in 0..n_phi {
        let (s_phi, c_phi) = ((c as f64 + 0.5) * dphi).sin_cos();
        for (r, wr) in rho.iter().zip(&w_rho) {
            for (m, wm) in mu.iter().zip(&w_mu) {
                let s = (1.0 - m * m).sqrt();
                nodes.push([r * s * c_phi, r * s * s_phi, r * m]);
                weights.push(wr * r * r * wm * dphi);
            }
        }
    }

    let ring = n_r * n_theta;
    let per_ring: Vec<DiagCorrection> = (0..ring)
        .into_par_iter()
        .map(|a| {
            let x = nodes[a];
            let (mut s1, mut s2, mut sl) = (0.0, 0.0, 0.0);
            for (j, (y, w)) in nodes.iter().zip(&weights).enumerate() {
                if j != a {
                    let d = dist3(x, *y);
                    s1 += w / d;
                    s2 += w / (d * d);
                    sl += w * d.ln();
                }
            }
            let a_rad = super::norm3(x);
            DiagCorrection {
                inverse_square: ball_inverse_square_integral(radius, a_rad) - s2,
                inverse: ball_inverse_integral(radius, a_rad) - s1,
                log: ball_log_integral(radius, a_rad) - sl,
            }
        })
        .collect();
    let re = cell_edges(0.0, &w_rho);
    let me = cell_edges(-1.0, &w_mu);
    let cells: Vec<Cell> = (0..ring)
        .map(|a| {
            let (i, j) = (a / n_theta, a % n_theta);
            Cell { r: [re[i], re[i + 1]], mu: [me[j], me[j + 1]], phi: [0.0, dphi] }
        })
        .collect();
    let geometry = ring_geometry(&nodes, &weights, &cells, ring, n_phi);
    let half = n_phi / 2;
    let mut per_ring = per_ring;
    for (a, dc) in per_ring.iter_mut().enumerate() {
        for k in 0..=half {
            let mult = if k == 0 || k == half { 1.0 } else { 2.0 };
            for b in 0..ring {
                let delta = geometry.near[(k * ring + a) * ring + b];
                if delta != 0.0 {
                    dc.inverse_square -= mult * weights[b] * delta;
                }
            }
        }
    }
    let diag_correction = (0..n_phi).flat_map(|_| per_ring.iter().copied()).collect();

    Ok(Quadrature {
        radius,
        n,
        n_r,
        n_theta,
        n_phi,
        nodes,
        weights,
        diag_correction,
        geometry: Arc::new(geometry),
    })
}

fn ring_geometry(nodes: &[[f64; 3]], weights: &[f64], cells: &[Cell], a_len: usize, n_phi: usize) -> RingGeometry {
    let half = n_phi / 2;
    let dphi = TAU / n_phi as f64;
    let total = (half + 1) * a_len * a_len;
    let raw: Vec<(f64, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let b = idx % a_len;
            let a = (idx / a_len) % a_len;
            let k = idx / (a_len * a_len);
            if k == 0 && a == b {
                return (f64::NAN, 0.0);
            }
            let x = nodes[a];
            let d = dist3(x, nodes[k * a_len + b]);
            let mut cell = cells[b];
            cell.phi = [k as f64 * dphi, (k + 1) as f64 * dphi];
            let reach = NEAR_CELLS * cell.diameter().max(cells[a].diameter());
            let near = if d < reach && weights[b] > 0.0 {
                let (int, vol) = cell.inverse_square_integral(x, 0);
                int / vol - 1.0 / (d * d)
            } else {
                0.0
            };
            (d, near)
        })
        .collect();
    let mut order: Vec<u32> = (0..total as u32).filter(|&i| !raw[i as usize].0.is_nan()).collect();
    order.par_sort_unstable_by(|&i, &j| raw[i as usize].0.total_cmp(&raw[j as usize].0));
    let mut index = vec![u32::MAX; total];
    let mut distinct: Vec<f64> = Vec::new();
    for &i in &order {
        let r = raw[i as usize].0;
        match distinct.last() {
            Some(&last) if r - last <= 1e-13 * r => {}
            _ => distinct.push(r),
        }
        index[i as usize] = (distinct.len() - 1) as u32;
    }
    // The kernel must stay symmetric (S is unitary only then): average the
    // source-cell and target-cell corrections. The reverse of (k, a, b) is
    // (−k, b, a), which the φ-mirror maps to (k, b, a).
    let near = (0..total)
        .map(|idx| {
            let (b, a, k) = (idx % a_len, (idx / a_len) % a_len, idx / (a_len * a_len));
            0.5 * (raw[idx].1 + raw[(k * a_len + b) * a_len + a].1)
        })
        .collect();
    RingGeometry { distinct, index, near }
}

fn radial_rule(radius: f64, n_r: usize, breaks: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut edges = vec![0.0, radius];
    edges.extend(breaks.iter().copied().filter(|b| *b > 1e-9 * radius && *b < radius * (1.0 - 1e-9)));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let panels = edges.len() - 1;
    if panels == 1 || n_r < 2 * panels {
        return gauss_legendre_on(n_r, 0.0, radius);
    }
    // largest-remainder allocation with a floor of two nodes per panel
    let spare = n_r - 2 * panels;
    let share: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]) / radius * spare as f64).collect();
    let mut counts: Vec<usize> = share.iter().map(|x| 2 + x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..panels).collect();
    order.sort_by(|&a, &b| (share[b] - share[b].floor()).total_cmp(&(share[a] - share[a].floor())));
    let mut left = n_r - counts.iter().sum::<usize>();
    for &p in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[p] += 1;
        left -= 1;
    }
    let (mut x, mut w) = (Vec::with_capacity(n_r), Vec::with_capacity(n_r));
    for (e, &c) in edges.windows(2).zip(&counts) {
        let (xp, wp) = gauss_legendre_on(c, e[0], e[1]);
        x.extend(xp);
        w.extend(wp);
    }
    (x, w)
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes per azimuthal ring set (`A`).
    pub fn ring_size(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Warnings about resolution relative to a potential's features.
    pub fn resolution_warnings(&self, smoothness: f64) -> Vec<String> {
        let mut out = Vec::new();
        let h = self.radius / self.n_r as f64;
        if smoothness > 0.0 && smoothness < h {
            out.push(format!(
                "taper width {smoothness} is below the radial spacing {h:.3e}; the ramp is unresolved"
            ));
        }
        out
    }

    pub(crate) fn ring_geometry(&self) -> Arc<RingGeometry> {
        self.geometry.clone()
    }

    /// Near-field correction of the inverse-square kernel between nodes
    /// `i` (target) and `j` (source); see [`RingGeometry::near`].
    pub(crate) fn near_delta(&self, i: usize, j: usize) -> f64 {
        let a_len = self.ring_size();
        let (ci, a) = (i / a_len, i % a_len);
        let (cj, b) = (j / a_len, j % a_len);
        let shift = (cj + self.n_phi - ci) % self.n_phi;
        let k = shift.min(self.n_phi - shift);
        self.geometry.near[(k * a_len + a) * a_len + b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::ball_singular_integral_radial;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms_match_radial_oracle() {
        for &a in &[0.0, 0.2, 0.55, 0.93] {
            let o1 = ball_singular_integral_radial(1.0, a, 1);
            let o2 = ball_singular_integral_radial(1.0, a, 2);
            assert!((ball_inverse_integral(1.0, a) - o1).abs() < 1e-10 * o1);
            assert!((ball_inverse_square_integral(1.0, a) - o2).abs() < 1e-8 * o2);
        }
    }

    #[test]
    fn log_integral_centre_value_and_laplacian() {
        let r: f64 = 1.7;
        let centre = 4.0 * PI * r.powi(3) * (r.ln() / 3.0 - 1.0 / 9.0);
        assert!((ball_log_integral(r, 0.0) - centre).abs() < 1e-12);
        // Δ log|x| = |x|⁻² in three dimensions, so the radial Laplacian of the
        // log potential reproduces the inverse-square integral
        for &a in &[0.3, 0.8, 1.2] {
            let h = 1e-3;
            let (m, c, p) = (ball_log_integral(r, a - h), ball_log_integral(r, a), ball_log_integral(r, a + h));
            let lap = (p - 2.0 * c + m) / (h * h) + (p - m) / (h * a);
            let want = ball_inverse_square_integral(r, a);
            assert!((lap - want).abs() < 1e-5 * want, "a={a}: {lap} vs {want}");
        }
    }

    #[test]
    fn radial_panels_split_at_breaks() {
        let q = build_quadrature_with_breaks(1.0, 20, &[0.8, 1.0, 1.5]).unwrap();
        assert_relative_eq!(q.volume(), 4.0 * PI / 3.0, max_relative = 1e-12);
        let radii: Vec<f64> = (0..q.n_r).map(|i| super::super::norm3(q.nodes[i * q.n_theta])).collect();
        let inner = radii.iter().filter(|r| **r < 0.8).count();
        assert_eq!((inner, radii.len() - inner), (7, 3));
        // a profile with a kink at 0.8 integrates exactly once the rule is split
        let f = |r: f64| if r < 0.8 { 1.0 } else { 1.0 + (r - 0.8) };
        let h: f64 = 0.2;
        let exact = 4.0 * PI * (1.0 / 3.0 + h.powi(4) / 4.0 + 1.6 * h.powi(3) / 3.0 + 0.32 * h * h);
        let got: f64 = q.nodes.iter().zip(&q.weights).map(|(x, w)| w * f(super::super::norm3(*x))).sum();
        assert_relative_eq!(got, exact, max_relative = 1e-12);
    }

    #[test]
    fn rejects_coarse_or_odd_grids() {
        assert!(build_quadrature(1.0, 6).is_err());
        assert!(build_quadrature(1.0, 9).is_err());
        assert!(build_quadrature(-1.0, 8).is_err());
    }

    #[test]
    fn ring_geometry_indexes_every_off_diagonal_pair() {
        let q = build_quadrature(1.0, 8).unwrap();
        let g = q.ring_geometry();
        let a_len = q.ring_size();
        for k in 0..=q.n_phi / 2 {
            for a in 0..a_len {
                for b in 0..a_len {
                    let idx = g.index[(k * a_len + a) * a_len + b];
                    if k == 0 && a == b {
                        assert_eq!(idx, u32::MAX);
                    } else {
                        let r = dist3(q.nodes[a], q.nodes[k * a_len + b]);
                        assert!((g.distinct[idx as usize] - r).abs() <= 1e-13 * r);
                    }
                }
            }
        }
        assert!(g.distinct.len() < (q.n_phi / 2 + 1) * a_len * a_len);
    }
}
