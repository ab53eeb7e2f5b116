use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use super::potential::Potential;
use crate::error::{Error, Result};

/// Samples on the periodic grid `x = −side/2 + h·(i, j, k)`, `h = side/n`,
/// stored with `k` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub n: usize,
    pub side: f64,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn from_fn(n: usize, side: f64, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        let h = side / n as f64;
        let values = (0..n * n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
                f([-0.5 * side + h * i as f64, -0.5 * side + h * j as f64, -0.5 * side + h * k as f64])
            })
            .collect();
        Self { n, side, values }
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        let o = -0.5 * self.side;
        [o + h * i as f64, o + h * j as f64, o + h * k as f64]
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.values[(i * self.n + j) * self.n + k]
    }

    /// Periodic tricubic Lagrange interpolation.
    pub fn interpolate(&self, x: [f64; 3]) -> Complex64 {
        let n = self.n as isize;
        let h = self.spacing();
        let mut base = [0isize; 3];
        let mut wts = [[0.0; 4]; 3];
        for d in 0..3 {
            let t = (x[d] + 0.5 * self.side) / h;
            let i0 = t.floor();
            let s = t - i0;
            base[d] = i0 as isize - 1;
            // nodes at offsets −1, 0, 1, 2 relative to i0
            wts[d] = [
                -s * (s - 1.0) * (s - 2.0) / 6.0,
                (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
                -(s + 1.0) * s * (s - 2.0) / 2.0,
                (s + 1.0) * s * (s - 1.0) / 6.0,
            ];
        }
        let wrap = |i: isize| i.rem_euclid(n) as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, wa) in wts[0].iter().enumerate() {
            for (b, wb) in wts[1].iter().enumerate() {
                for (c, wc) in wts[2].iter().enumerate() {
                    let v = self.at(
                        wrap(base[0] + a as isize),
                        wrap(base[1] + b as isize),
                        wrap(base[2] + c as isize),
                    );
                    acc += v * (wa * wb * wc);
                }
            }
        }
        acc
    }

    /// Discrete `L²` norm (`h³`-weighted).
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.spacing().powi(3)).sqrt()
    }
}

/// In-place 3-D transform (unnormalized in both directions).
fn fft3(values: &mut [Complex64], n: usize, dir: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n, dir);
    // k axis: contiguous lines
    for line in values.chunks_exact_mut(n) {
        fft.process(line);
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (stride, outer) in [(n, n), (n * n, 1)] {
        // stride n: j axis; stride n²: i axis
        for block in 0..n * n {
            let start = if outer == n {
                (block / n) * n * n + block % n
            } else {
                block
            };
            for t in 0..n {
                buf[t] = values[start + t * stride];
            }
            fft.process(&mut buf);
            for t in 0..n {
                values[start + t * stride] = buf[t];
            }
        }
    }
}

fn wavenumbers(n: usize, side: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            TAU * s / side
        })
        .collect()
}

fn apply_multiplier(f: &GridFunction, mult: impl Fn(f64) -> Complex64) -> GridFunction {
    let n = f.n;
    let mut v = f.values.clone();
    fft3(&mut v, n, FftDirection::Forward);
    let xi = wavenumbers(n, f.side);
    let scale = 1.0 / (n * n * n) as f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = (xi[i] * xi[i] + xi[j] * xi[j] + xi[k] * xi[k]).sqrt();
                v[(i * n + j) * n + k] *= mult(a) * scale;
            }
        }
    }
    fft3(&mut v, n, FftDirection::Inverse);
    GridFunction {
        n,
        side: f.side,
        values: v,
    }
}

/// `(√(−Δ) − z)⁻¹ f` on the periodic grid: multiply `f̂` by `1/(|ξ| − z)`.
/// Only meaningful on the physical sheet.
pub fn apply_resolvent_fourier(z: Complex64, f: &GridFunction) -> Result<GridFunction> {
    if z.im <= 0.0 {
        return Err(Error::domain(format!(
            "Fourier resolvent requires Im z > 0, got {z}"
        )));
    }
    Ok(apply_multiplier(f, |a| 1.0 / (a - z)))
}

/// `(√(−Δ) − z) u` on the periodic grid.
pub fn apply_symbol(z: Complex64, u: &GridFunction) -> GridFunction {
    apply_multiplier(u, |a| Complex64::new(a, 0.0) - z)
}

/// Settings for the Fourier-grid eigenvalue oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOracle {
    /// Points per axis.
    pub grid: usize,
    /// Periodic box side.
    pub side: f64,
    pub max_iter: usize,
    /// Relative Ritz residual accepted as converged.
    pub tol: f64,
}

impl Default for EigenOracle {
    fn default() -> Self {
        Self {
            grid: 48,
            side: 12.0,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

/// Lowest `count` eigenvalues of `|ξ| + V` on the periodic grid, by Lanczos
/// with full reorthogonalization. `V` must be real.
pub fn fourier_grid_eigenvalues(v: &Potential, cfg: &EigenOracle, count: usize) -> Result<Vec<f64>> {
    if !v.is_real() {
        return Err(Error::domain("eigenvalue oracle needs a real potential"));
    }
    if cfg.grid < 8 || count == 0 {
        return Err(Error::domain("eigenvalue oracle needs grid ≥ 8 and count ≥ 1"));
    }
    let n = cfg.grid;
    let vg = GridFunction::from_fn(n, cfg.side, |x| v.value_at(x));
    let pot: Vec<f64> = vg.values.iter().map(|c| c.re).collect();
    let xi = wavenumbers(n, cfg.side);
    let symbol: Vec<f64> = (0..n * n * n)
        .map(|idx| {
            let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
            (xi[i] * xi[i] + xi[j] * xi[j] + xi[k] * xi[k]).sqrt()
        })
        .collect();
    let scale = 1.0 / (n * n * n) as f64;
    let apply = |u: &[f64]| -> Vec<f64> {
        let mut c: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft3(&mut c, n, FftDirection::Forward);
        for (ci, s) in c.iter_mut().zip(&symbol) {
            *ci *= s * scale;
        }
        fft3(&mut c, n, FftDirection::Inverse);
        c.iter().zip(u).zip(&pot).map(|((ci, ui), p)| ci.re + p * ui).collect()
    };
    // start in the well, with a little of everything
    let start: Vec<f64> = pot.iter().enumerate().map(|(i, p)| p.abs() + 1e-3 * ((i % 7) as f64)).collect();
    lanczos_lowest(apply, start, count, cfg.max_iter, cfg.tol)
}

/// Radial oracle: for radial `V` the s-wave states are `f(|x|)` with
/// `u(r) = r·f(r)` an odd solution of the one-dimensional problem
/// `(|D| + V(|x|))u = Eu`, because the three-dimensional radial transform of
/// `f` is the sine transform of `u`. Discretized on the periodic grid
/// `(j + ½)h − L`, restricted to odd vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEigenOracle {
    /// Points on the half line `(0, L)`.
    pub points: usize,
    /// Half-period `L`.
    pub half_period: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RadialEigenOracle {
    fn default() -> Self {
        Self {
            points: 1 << 15,
            half_period: 400.0,
            max_iter: 3000,
            tol: 1e-10,
        }
    }
}

/// Lowest s-wave eigenvalues of `√(−Δ) + V` for a real radial potential.
pub fn radial_grid_eigenvalues(v: &Potential, cfg: &RadialEigenOracle, count: usize) -> Result<Vec<f64>> {
    if !v.is_real() || !v.is_radial() {
        return Err(Error::domain("radial eigenvalue oracle needs a real radial potential"));
    }
    if cfg.points < 8 || count == 0 || !(cfg.half_period > v.support_radius) {
        return Err(Error::domain("radial oracle needs ≥ 8 points, count ≥ 1 and L beyond the support"));
    }
    let m = cfg.points;
    let h = cfg.half_period / m as f64;
    let pot: Vec<f64> = (0..m).map(|j| v.value_at([0.0, 0.0, (j as f64 + 0.5) * h]).re).collect();
    let full = 2 * m;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(full);
    let inv = planner.plan_fft_inverse(full);
    let k = wavenumbers(full, 2.0 * cfg.half_period);
    let apply = |u: &[f64]| -> Vec<f64> {
        // odd extension about 0: the grid is symmetric, point m + j ↔ m − 1 − j
        let mut c = vec![Complex64::new(0.0, 0.0); full];
        for j in 0..m {
            c[m + j] = Complex64::new(u[j], 0.0);
            c[m - 1 - j] = Complex64::new(-u[j], 0.0);
        }
        fwd.process(&mut c);
        for (ci, kk) in c.iter_mut().zip(&k) {
            *ci *= kk.abs() / full as f64;
        }
        inv.process(&mut c);
        (0..m).map(|j| c[m + j].re + pot[j] * u[j]).collect()
    };
    let start: Vec<f64> = pot.iter().enumerate().map(|(j, p)| p.abs() + 1e-3 / (1.0 + j as f64 * h)).collect();
    lanczos_lowest(apply, start, count, cfg.max_iter, cfg.tol)
}

/// Lanczos with full reorthogonalization for the lowest `count` eigenvalues
/// of a real symmetric operator.
fn lanczos_lowest(apply: impl Fn(&[f64]) -> Vec<f64>, start: Vec<f64>, count: usize, max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut q = start;
    let nrm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= nrm);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::<f64>::new());
    let mut ritz = Vec::new();
    for j in 0..max_iter {
        let mut w = apply(&basis[j]);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        let m = alpha.len();
        let done = (m >= count && (m % 10 == 0 || bnorm < 1e-14)) || j + 1 == max_iter;
        if done {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut pairs: Vec<(f64, f64)> = (0..m)
                .map(|i| (eig.eigenvalues[i], (bnorm * eig.eigenvectors[(m - 1, i)]).abs()))
                .collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            ritz = pairs;
            let converged = ritz
                .iter()
                .take(count)
                .all(|(th, res)| *res <= tol * th.abs().max(1.0));
            if converged || bnorm < 1e-14 {
                break;
            }
        }
        if bnorm < 1e-14 {
            break;
        }
        beta.push(bnorm);
        w.iter_mut().for_each(|x| *x /= bnorm);
        basis.push(w);
    }
    let out: Vec<f64> = ritz
        .iter()
        .take(count)
        .filter(|(th, res)| *res <= 1e3 * tol * th.abs().max(1.0))
        .map(|(th, _)| *th)
        .collect();
    if out.is_empty() {
        return Err(Error::domain("Lanczos did not converge; raise max_iter"));
    }
    Ok(out)
}
