use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::norm3;
use crate::error::{Error, Result};

const GRID_HEADER: &str = "halfres-potential";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    BallStep,
    TruncatedGaussian,
    GridFile,
}

/// Scattered samples read from a grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSamples {
    pub points: Vec<[f64; 3]>,
    pub values: Vec<Complex64>,
}

/// Bounded complex potential supported in the closed ball `|x| ≤ support_radius`.
///
/// * `ball_step`: `A` on the ball, with a cosine ramp of width `smoothness`
///   down to zero at the rim (`smoothness = 0` is the sharp step).
/// * `truncated_gaussian`: `A·exp(−|x|²/(2ℓ²))`, `ℓ = R/3`, times the same ramp.
/// * `grid_file`: nearest-neighbour sampling of file values, times `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub amplitude: Complex64,
    pub support_radius: f64,
    pub smoothness: f64,
    /// `sup |V|`.
    pub sup_abs: f64,
    samples: Option<Arc<GridSamples>>,
}

impl Potential {
    pub fn ball_step(amplitude: Complex64, radius: f64, smoothness: f64) -> Result<Self> {
        check_shape(radius, smoothness)?;
        Ok(Self {
            kind: PotentialKind::BallStep,
            amplitude,
            support_radius: radius,
            smoothness,
            sup_abs: amplitude.norm(),
            samples: None,
        })
    }

    pub fn truncated_gaussian(amplitude: Complex64, radius: f64, smoothness: f64) -> Result<Self> {
        check_shape(radius, smoothness)?;
        Ok(Self {
            kind: PotentialKind::TruncatedGaussian,
            amplitude,
            support_radius: radius,
            smoothness,
            sup_abs: amplitude.norm(),
            samples: None,
        })
    }

    /// `V ≡ 0` on a ball of the given radius.
    pub fn zero(radius: f64) -> Result<Self> {
        Self::ball_step(Complex64::new(0.0, 0.0), radius, 0.0)
    }

    pub fn from_samples(radius: f64, samples: GridSamples) -> Result<Self> {
        check_shape(radius, 0.0)?;
        if samples.points.is_empty() || samples.points.len() != samples.values.len() {
            return Err(Error::Parse("grid potential needs matching, non-empty points and values".into()));
        }
        let sup_abs = samples
            .points
            .iter()
            .zip(&samples.values)
            .filter(|(p, _)| norm3(**p) <= radius)
            .fold(0.0f64, |m, (_, v)| m.max(v.norm()));
        Ok(Self {
            kind: PotentialKind::GridFile,
            amplitude: Complex64::new(1.0, 0.0),
            support_radius: radius,
            smoothness: 0.0,
            sup_abs,
            samples: Some(Arc::new(samples)),
        })
    }

    /// Parse the text format
    ///
    /// ```text
    /// halfres-potential v1 R=<radius> n=<count>
    /// x y z re im
    /// ...
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse_grid(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
        let (radius, count) = parse_header(header)?;
        let mut points = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for (k, line) in lines.enumerate() {
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))?;
            if cols.len() != 5 {
                return Err(Error::Parse(format!("row {}: expected 5 columns, found {}", k + 1, cols.len())));
            }
            points.push([cols[0], cols[1], cols[2]]);
            values.push(Complex64::new(cols[3], cols[4]));
        }
        if points.len() != count {
            return Err(Error::Parse(format!("header announces {count} rows, found {}", points.len())));
        }
        Self::from_samples(radius, GridSamples { points, values })
    }

    pub fn from_grid_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_grid(&text)
    }

    /// `c·V`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.amplitude *= c;
        out.sup_abs *= c.norm();
        out
    }

    /// Value at `x`; exactly zero outside the support ball.
    pub fn value_at(&self, x: [f64; 3]) -> Complex64 {
        let rho = norm3(x);
        if rho > self.support_radius {
            return Complex64::new(0.0, 0.0);
        }
        match self.kind {
            PotentialKind::BallStep => self.amplitude * self.ramp(rho),
            PotentialKind::TruncatedGaussian => {
                let ell = self.support_radius / 3.0;
                self.amplitude * (-(rho * rho) / (2.0 * ell * ell)).exp() * self.ramp(rho)
            }
            PotentialKind::GridFile => self.amplitude * self.nearest_sample(x),
        }
    }

    /// Radii where the radial profile stops being analytic: the start of
    /// the taper and the support edge.
    pub fn radial_breakpoints(&self) -> Vec<f64> {
        if !self.is_radial() {
            return Vec::new();
        }
        let mut out = vec![self.support_radius];
        if self.smoothness > 0.0 && self.smoothness < self.support_radius {
            out.push(self.support_radius - self.smoothness);
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Radial potentials admit the azimuthal block fast path.
    pub fn is_radial(&self) -> bool {
        self.kind != PotentialKind::GridFile
    }

    pub fn is_real(&self) -> bool {
        match &self.samples {
            None => self.amplitude.im == 0.0,
            Some(s) => s.values.iter().all(|v| (self.amplitude * v).im == 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup_abs == 0.0
    }

    fn ramp(&self, rho: f64) -> f64 {
        let s = self.smoothness;
        let start = self.support_radius - s;
        if s == 0.0 || rho <= start {
            1.0
        } else {
            0.5 * (1.0 + (PI * (rho - start) / s).cos())
        }
    }

    fn nearest_sample(&self, x: [f64; 3]) -> Complex64 {
        let s = self.samples.as_ref().expect("grid potential carries samples");
        let mut best = f64::INFINITY;
        let mut val = Complex64::new(0.0, 0.0);
        for (p, v) in s.points.iter().zip(&s.values) {
            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2);
            if d < best {
                best = d;
                val = *v;
            }
        }
        val
    }
}

fn check_shape(radius: f64, smoothness: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("support radius must be positive, got {radius}")));
    }
    if !(0.0..=radius).contains(&smoothness) {
        return Err(Error::domain(format!("smoothness must lie in [0, R], got {smoothness}")));
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<(f64, usize)> {
    let bad = || Error::Parse(format!("bad grid header {line:?}"));
    let mut it = line.split_whitespace();
    if it.next() != Some(GRID_HEADER) || it.next() != Some("v1") {
        return Err(bad());
    }
    let mut radius = None;
    let mut count = None;
    for tok in it {
        if let Some(v) = tok.strip_prefix("R=") {
            radius = v.parse::<f64>().ok();
        } else if let Some(v) = tok.strip_prefix("n=") {
            count = v.parse::<usize>().ok();
        } else {
            return Err(bad());
        }
    }
    Ok((radius.ok_or_else(bad)?, count.ok_or_else(bad)?))
}

/// Write samples in the grid-file format.
pub fn write_grid_file(path: &Path, radius: f64, samples: &GridSamples) -> Result<()> {
    let mut out = format!("{GRID_HEADER} v1 R={radius} n={}\n", samples.points.len());
    for (p, v) in samples.points.iter().zip(&samples.values) {
        let _ = writeln!(out, "{:e} {:e} {:e} {:e} {:e}", p[0], p[1], p[2], v.re, v.im);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_outside_support() {
        let v = Potential::ball_step(Complex64::new(-2.0, 0.5), 1.0, 0.2).unwrap();
        assert_eq!(v.value_at([1.0001, 0.0, 0.0]), Complex64::new(0.0, 0.0));
        assert_eq!(v.value_at([0.1, 0.2, 0.3]), Complex64::new(-2.0, 0.5));
        let mid = v.value_at([0.9, 0.0, 0.0]);
        assert!((mid.re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_header_is_strict() {
        assert!(Potential::parse_grid("halfres-potential v2 R=1 n=0\n").is_err());
        assert!(Potential::parse_grid("halfres-potential v1 R=1 n=2\n0 0 0 1 0\n").is_err());
        let v = Potential::parse_grid("# test\nhalfres-potential v1 R=1 n=2\n0 0 0 -1 0\n0.5 0 0 2 1\n").unwrap();
        assert_eq!(v.value_at([0.4, 0.0, 0.0]), Complex64::new(2.0, 1.0));
        assert_eq!(v.value_at([0.0, 0.1, 0.0]), Complex64::new(-1.0, 0.0));
        assert!((v.sup_abs - 5f64.sqrt()).abs() < 1e-15);
        assert!(!v.is_real());
    }
}
