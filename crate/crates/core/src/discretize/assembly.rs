use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use super::potential::Potential;
use super::quadrature::{DiagCorrection, Quadrature, RingGeometry};
use super::dist3;
use crate::error::{Error, Result};
use crate::freeresolvent::{local_model_coefficients, remainder_at_origin, KernelAt, KernelTable};
use crate::linalg::{identity_plus, CMatrix, Lu};
use crate::logcover::SheetPoint;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Storage of a Nyström matrix.
#[derive(Debug, Clone)]
pub enum BsMatrix {
    Dense(CMatrix),
    /// Block-circulant matrix in the azimuthal index, kept as its Fourier
    /// modes `m = 0..=n_φ/2`. Mode `m` and mode `n_φ − m` coincide, so the
    /// full operator is unitarily similar to the block diagonal
    /// `diag(K̂_0, K̂_1, …, K̂_{n_φ/2}, …, K̂_1)`.
    Azimuthal { modes: Vec<CMatrix>, n_phi: usize },
}

/// Nyström matrix of `V R₀(z) χ`: `K_ij = V(x_i)·w_j·R₀(z)(|x_i − x_j|)` off the
/// diagonal, `V(x_i)·(α₁·D₂ᵢ + β(z)·D₁ᵢ)` on it.
#[derive(Debug, Clone)]
pub struct BSOperator {
    pub z: SheetPoint,
    pub matrix: BsMatrix,
    /// Quadrature weights of the rows of one block.
    pub block_weights: Vec<f64>,
}

impl BSOperator {
    pub fn dim(&self) -> usize {
        match &self.matrix {
            BsMatrix::Dense(m) => m.nrows(),
            BsMatrix::Azimuthal { modes, n_phi } => modes[0].nrows() * n_phi,
        }
    }

    /// Diagonal blocks of a unitarily similar block-diagonal form, with the
    /// number of times each occurs.
    pub fn blocks(&self) -> Vec<(&CMatrix, usize)> {
        match &self.matrix {
            BsMatrix::Dense(m) => vec![(m, 1)],
            BsMatrix::Azimuthal { modes, n_phi } => modes
                .iter()
                .enumerate()
                .map(|(m, b)| (b, if m == 0 || 2 * m == *n_phi { 1 } else { 2 }))
                .collect(),
        }
    }

    /// Blocks conjugated by `W^{1/2}`, so singular values are those of the
    /// operator on `L²` rather than of the raw matrix.
    pub fn symmetrized_blocks(&self) -> Vec<(CMatrix, usize)> {
        let s: Vec<f64> = self.block_weights.iter().map(|w| w.sqrt()).collect();
        self.blocks()
            .into_iter()
            .map(|(b, mult)| (CMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * (s[i] / s[j])), mult))
            .collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.blocks().iter().map(|(b, m)| b.trace() * *m as f64).sum()
    }

    /// Full `N×N` matrix in node order.
    pub fn to_dense(&self) -> CMatrix {
        match &self.matrix {
            BsMatrix::Dense(m) => m.clone(),
            BsMatrix::Azimuthal { modes, n_phi } => {
                let n = *n_phi;
                let a_len = modes[0].nrows();
                // G_k = (1/n) Σ_m K̂_m e^{−2πimk/n}
                let gen: Vec<CMatrix> = (0..n)
                    .map(|k| {
                        let mut g = CMatrix::zeros(a_len, a_len);
                        for m in 0..n {
                            let ph = Complex64::from_polar(1.0 / n as f64, -TAU * (m * k) as f64 / n as f64);
                            g += &modes[m.min(n - m)] * ph;
                        }
                        g
                    })
                    .collect();
                CMatrix::from_fn(n * a_len, n * a_len, |i, j| {
                    let (c, a) = (i / a_len, i % a_len);
                    let (c2, b) = (j / a_len, j % a_len);
                    gen[(c2 + n - c) % n][(a, b)]
                })
            }
        }
    }

    /// `K·v`.
    pub fn apply(&self, v: &CMatrix) -> CMatrix {
        match &self.matrix {
            BsMatrix::Dense(m) => m * v,
            BsMatrix::Azimuthal { modes, n_phi } => {
                let hat = to_modes(v, *n_phi, modes[0].nrows());
                let out: Vec<CMatrix> = hat
                    .iter()
                    .enumerate()
                    .map(|(m, h)| &modes[m.min(n_phi - m)] * h)
                    .collect();
                from_modes(&out, *n_phi)
            }
        }
    }

    /// LU factors of `I + K`.
    pub fn factor_i_plus(&self) -> Factored {
        let lus = self
            .blocks()
            .par_iter()
            .map(|(b, _)| Lu::new(&identity_plus(b)))
            .collect();
        match &self.matrix {
            BsMatrix::Dense(_) => Factored { lus, n_phi: None },
            BsMatrix::Azimuthal { n_phi, .. } => Factored {
                lus,
                n_phi: Some(*n_phi),
            },
        }
    }
}

/// Factored `I + K`, reusable across right-hand sides.
pub struct Factored {
    lus: Vec<Lu>,
    n_phi: Option<usize>,
}

impl Factored {
    /// `(I + K)⁻¹·rhs`.
    pub fn solve(&self, rhs: &CMatrix) -> Result<CMatrix> {
        match self.n_phi {
            None => self.lus[0].solve(rhs),
            Some(n) => {
                let hat = to_modes(rhs, n, rhs.nrows() / n);
                let out = hat
                    .iter()
                    .enumerate()
                    .map(|(m, h)| self.lus[m.min(n - m)].solve(h))
                    .collect::<Result<Vec<_>>>()?;
                Ok(from_modes(&out, n))
            }
        }
    }
}

/// Azimuthal DFT of node-ordered columns: mode `m` is `Σ_c v_c e^{−2πimc/n}`.
fn to_modes(v: &CMatrix, n: usize, a_len: usize) -> Vec<CMatrix> {
    let cols = v.ncols();
    (0..n)
        .map(|m| {
            let mut out = CMatrix::zeros(a_len, cols);
            for c in 0..n {
                let ph = Complex64::from_polar(1.0, -TAU * ((m * c) % n) as f64 / n as f64);
                out += v.rows(c * a_len, a_len) * ph;
            }
            out
        })
        .collect()
}

fn from_modes(hat: &[CMatrix], n: usize) -> CMatrix {
    let a_len = hat[0].nrows();
    let mut out = CMatrix::zeros(a_len * n, hat[0].ncols());
    for c in 0..n {
        let mut blk = CMatrix::zeros(a_len, hat[0].ncols());
        for (m, h) in hat.iter().enumerate() {
            let ph = Complex64::from_polar(1.0 / n as f64, TAU * ((m * c) % n) as f64 / n as f64);
            blk += h * ph;
        }
        out.rows_mut(c * a_len, a_len).copy_from(&blk);
    }
    out
}

fn check_inputs(v: &Potential, q: &Quadrature) -> Result<()> {
    if v.support_radius > q.radius * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "potential support radius {} exceeds quadrature radius {}",
            v.support_radius, q.radius
        )));
    }
    Ok(())
}

/// Birman–Schwinger matrix at `z`; radial potentials use the azimuthal fast path.
pub fn assemble_bs(z: SheetPoint, v: &Potential, q: &Quadrature) -> Result<BSOperator> {
    check_inputs(v, q)?;
    if v.is_radial() {
        Ok(assemble_ring(z, v, q, false)?.0)
    } else {
        Ok(assemble_dense(z, v, q, false)?.0)
    }
}

/// `K(z)` together with `∂_z K(z)`.
pub fn assemble_bs_with_dz(z: SheetPoint, v: &Potential, q: &Quadrature) -> Result<(BSOperator, BSOperator)> {
    check_inputs(v, q)?;
    let (k, dk) = if v.is_radial() {
        assemble_ring(z, v, q, true)?
    } else {
        assemble_dense(z, v, q, true)?
    };
    Ok((k, dk.expect("derivative requested")))
}

/// Dense `N×N` assembly regardless of symmetry.
pub fn assemble_bs_dense(z: SheetPoint, v: &Potential, q: &Quadrature) -> Result<BSOperator> {
    check_inputs(v, q)?;
    Ok(assemble_dense(z, v, q, false)?.0)
}

fn non_finite(row: usize, col: usize, r: f64) -> Error {
    Error::Assembly {
        row,
        col,
        source: Box::new(Error::domain(format!("kernel is not finite at r = {r:e}"))),
    }
}

type Pair = (BSOperator, Option<BSOperator>);

/// Self-interaction of a node: the local model `α₁/r² + β/r` and the
/// finite part `c₀ + c_L·log r` of the remainder, integrated over the ball
/// minus the off-diagonal sums.
struct DiagModel {
    alpha: f64,
    beta: Complex64,
    dbeta: Complex64,
    c: [Complex64; 2],
    dc: [Complex64; 2],
}

impl DiagModel {
    fn new(z: SheetPoint) -> Result<Self> {
        let (alpha, beta) = local_model_coefficients(3, z.value())?;
        let dbeta = local_model_coefficients(3, Complex64::new(1.0, 0.0))?.1;
        let (c, dc) = remainder_at_origin(z);
        Ok(Self { alpha, beta, dbeta, c, dc })
    }

    fn value(&self, d: DiagCorrection, w: f64) -> Complex64 {
        self.alpha * d.inverse_square + self.beta * d.inverse + self.c[0] * w + self.c[1] * d.log
    }

    fn dz(&self, d: DiagCorrection, w: f64) -> Complex64 {
        self.dbeta * d.inverse + self.dc[0] * w + self.dc[1] * d.log
    }
}

/// Below this many kernel evaluations a Chebyshev table does not pay off.
const TABLE_THRESHOLD: usize = 4096;

enum KernelSource {
    Direct(KernelAt),
    Table(KernelTable),
}

impl KernelSource {
    fn new(z: SheetPoint, r_lo: f64, r_hi: f64, evaluations: usize, with_dz: bool) -> Result<Self> {
        let kern = KernelAt::new(3, z)?;
        if evaluations < TABLE_THRESHOLD || !(r_lo > 0.0) {
            return Ok(Self::Direct(kern));
        }
        Ok(Self::Table(KernelTable::new(&kern, r_lo * (1.0 - 1e-9), r_hi * (1.0 + 1e-9), with_dz)?))
    }

    #[inline]
    fn eval(&self, r: f64, with_dz: bool) -> (Complex64, Complex64) {
        match (self, with_dz) {
            (Self::Direct(k), true) => k.value_and_dz(r),
            (Self::Direct(k), false) => (k.value(r), ZERO),
            (Self::Table(t), true) => t.value_and_dz(r),
            (Self::Table(t), false) => (t.value(r), ZERO),
        }
    }
}

fn assemble_ring(z: SheetPoint, v: &Potential, q: &Quadrature, with_dz: bool) -> Result<Pair> {
    let geo = q.ring_geometry();
    let (lo, hi) = (geo.distinct[0], *geo.distinct.last().unwrap_or(&0.0));
    let kern = KernelSource::new(z, lo, hi, geo.distinct.len(), with_dz)?;
    let vals: Vec<(Complex64, Complex64)> = geo.distinct.par_iter().map(|&r| kern.eval(r, with_dz)).collect();
    let a_len = q.ring_size();
    let n = q.n_phi;
    if let Some(bad) = vals.iter().position(|(k, dk)| !(k.is_finite() && dk.is_finite())) {
        let pos = geo.index.iter().position(|&i| i as usize == bad).unwrap_or(0);
        let (k, a, b) = (pos / (a_len * a_len), (pos / a_len) % a_len, pos % a_len);
        return Err(non_finite(a, k * a_len + b, geo.distinct[bad]));
    }

    let vnode: Vec<Complex64> = (0..a_len).map(|a| v.value_at(q.nodes[a])).collect();
    let w = &q.weights[..a_len];
    let col: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let model = DiagModel::new(z)?;

    let table: Vec<Complex64> = vals.iter().map(|p| p.0).collect();
    let diag: Vec<Complex64> = (0..a_len)
        .map(|a| vnode[a] * model.value(q.diag_correction[a], w[a]))
        .collect();
    let op = BSOperator {
        z,
        matrix: BsMatrix::Azimuthal {
            modes: ring_modes(q, &geo, &table, model.alpha, &vnode, &col, &diag),
            n_phi: n,
        },
        block_weights: w.to_vec(),
    };
    let dop = with_dz.then(|| {
        let table: Vec<Complex64> = vals.iter().map(|p| p.1).collect();
        let diag: Vec<Complex64> = (0..a_len)
            .map(|a| vnode[a] * model.dz(q.diag_correction[a], w[a]))
            .collect();
        BSOperator {
            z,
            matrix: BsMatrix::Azimuthal {
                modes: ring_modes(q, &geo, &table, 0.0, &vnode, &col, &diag),
                n_phi: n,
            },
            block_weights: w.to_vec(),
        }
    });
    Ok((op, dop))
}

/// Fourier modes of the block-circulant matrix with entries
/// `row_a·col_b·(table[r_ab] + near·δ_ab)` off the diagonal and `diag_a` on
/// it, `δ` being the near-field inverse-square correction.
#[allow(clippy::too_many_arguments)]
fn ring_modes(
    q: &Quadrature,
    geo: &RingGeometry,
    table: &[Complex64],
    near: f64,
    row: &[Complex64],
    col: &[Complex64],
    diag: &[Complex64],
) -> Vec<CMatrix> {
    let a_len = q.ring_size();
    let n = q.n_phi;
    let half = n / 2;
    (0..=half)
        .into_par_iter()
        .map(|m| {
            let coef: Vec<f64> = (0..=half)
                .map(|k| {
                    if k == 0 {
                        1.0
                    } else if k == half {
                        if m % 2 == 0 { 1.0 } else { -1.0 }
                    } else {
                        2.0 * (TAU * (m * k) as f64 / n as f64).cos()
                    }
                })
                .collect();
            let mut mat = CMatrix::zeros(a_len, a_len);
            for a in 0..a_len {
                if row[a] == ZERO {
                    continue;
                }
                for b in 0..a_len {
                    let mut s = ZERO;
                    for (k, ck) in coef.iter().enumerate() {
                        let pos = (k * a_len + a) * a_len + b;
                        let idx = geo.index[pos];
                        if idx != u32::MAX {
                            s += (table[idx as usize] + near * geo.near[pos]) * *ck;
                        }
                    }
                    mat[(a, b)] = row[a] * col[b] * s;
                }
                mat[(a, a)] += diag[a];
            }
            mat
        })
        .collect()
}

/// Zero-energy operator `G₀V` with `G₀ = α₁/|x − y|²`, in the same storage
/// as [`assemble_bs`]. Its nonzero spectrum coincides with that of `V G₀`.
pub fn zero_energy_operator(v: &Potential, q: &Quadrature) -> Result<BSOperator> {
    check_inputs(v, q)?;
    let (alpha, _) = local_model_coefficients(3, ZERO)?;
    let z = SheetPoint::from_log(f64::NEG_INFINITY, 0.0);
    if v.is_radial() {
        let geo = q.ring_geometry();
        let a_len = q.ring_size();
        let table: Vec<Complex64> = geo.distinct.iter().map(|r| Complex64::new(alpha / (r * r), 0.0)).collect();
        let vnode: Vec<Complex64> = (0..a_len).map(|a| v.value_at(q.nodes[a])).collect();
        let ones = vec![Complex64::new(1.0, 0.0); a_len];
        let col: Vec<Complex64> = (0..a_len).map(|b| vnode[b] * q.weights[b]).collect();
        let diag: Vec<Complex64> = (0..a_len)
            .map(|a| vnode[a] * alpha * q.diag_correction[a].inverse_square)
            .collect();
        return Ok(BSOperator {
            z,
            matrix: BsMatrix::Azimuthal {
                modes: ring_modes(q, &geo, &table, alpha, &ones, &col, &diag),
                n_phi: q.n_phi,
            },
            block_weights: q.weights[..a_len].to_vec(),
        });
    }
    let n = q.len();
    let vn: Vec<Complex64> = q.nodes.iter().map(|x| v.value_at(*x)).collect();
    let m = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            vn[i] * alpha * q.diag_correction[i].inverse_square
        } else {
            let r = dist3(q.nodes[i], q.nodes[j]);
            vn[j] * q.weights[j] * alpha * (1.0 / (r * r) + q.near_delta(i, j))
        }
    });
    Ok(BSOperator {
        z,
        matrix: BsMatrix::Dense(m),
        block_weights: q.weights.clone(),
    })
}

fn assemble_dense(z: SheetPoint, v: &Potential, q: &Quadrature, with_dz: bool) -> Result<Pair> {
    let n = q.len();
    let lo = (0..n)
        .into_par_iter()
        .map(|i| (0..i).map(|j| dist3(q.nodes[i], q.nodes[j])).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);
    let kern = KernelSource::new(z, lo, 2.0 * q.radius, n * n, with_dz)?;
    let model = DiagModel::new(z)?;
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let vi = v.value_at(q.nodes[i]);
            let mut row = vec![ZERO; n];
            let mut drow = vec![ZERO; if with_dz { n } else { 0 }];
            if vi == ZERO {
                return Ok((row, drow));
            }
            for j in 0..n {
                if i == j {
                    let dc = q.diag_correction[i];
                    row[j] = vi * model.value(dc, q.weights[i]);
                    if with_dz {
                        drow[j] = vi * model.dz(dc, q.weights[i]);
                    }
                    continue;
                }
                let r = dist3(q.nodes[i], q.nodes[j]);
                let (k, dk) = kern.eval(r, with_dz);
                if !(k.is_finite() && dk.is_finite()) {
                    return Err(non_finite(i, j, r));
                }
                row[j] = vi * q.weights[j] * (k + model.alpha * q.near_delta(i, j));
                if with_dz {
                    drow[j] = vi * q.weights[j] * dk;
                }
            }
            Ok((row, drow))
        })
        .collect::<Result<_>>()?;
    let op = BSOperator {
        z,
        matrix: BsMatrix::Dense(CMatrix::from_fn(n, n, |i, j| rows[i].0[j])),
        block_weights: q.weights.clone(),
    };
    let dop = with_dz.then(|| BSOperator {
        z,
        matrix: BsMatrix::Dense(CMatrix::from_fn(n, n, |i, j| rows[i].1[j])),
        block_weights: q.weights.clone(),
    });
    Ok((op, dop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_quadrature;

    fn well() -> Potential {
        Potential::ball_step(Complex64::new(-1.5, 0.3), 1.0, 0.2).unwrap()
    }

    #[test]
    fn azimuthal_path_matches_dense_assembly() {
        let q = build_quadrature(1.0, 8).unwrap();
        let z = SheetPoint::new(1.3, 0.9).unwrap();
        let fast = assemble_bs(z, &well(), &q).unwrap();
        let dense = assemble_bs_dense(z, &well(), &q).unwrap();
        let a = fast.to_dense();
        let b = match &dense.matrix {
            BsMatrix::Dense(m) => m.clone(),
            _ => unreachable!(),
        };
        assert!((&a - &b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn solve_and_apply_are_inverse() {
        let q = build_quadrature(1.0, 8).unwrap();
        let k = assemble_bs(SheetPoint::new(0.8, 2.0).unwrap(), &well(), &q).unwrap();
        let rhs = CMatrix::from_fn(q.len(), 2, |i, j| Complex64::new((i as f64 * 0.37 + j as f64).sin(), 0.1));
        let x = k.factor_i_plus().solve(&rhs).unwrap();
        let back = &x + k.apply(&x);
        assert!((&back - &rhs).norm() < 1e-10 * rhs.norm());
    }

    #[test]
    fn support_larger_than_ball_is_rejected() {
        let q = build_quadrature(0.5, 8).unwrap();
        assert!(assemble_bs(SheetPoint::new(1.0, 1.0).unwrap(), &well(), &q).is_err());
    }
}
