use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use halfres::discretize::{build_quadrature_for, Potential, PotentialKind, Quadrature};
use halfres::resonances::{DetVariant, RegionSpec, SearchOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The single JSON document that drives every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub region: RegionFields,
    pub solver: SolverSpec,
    pub scan: ScanSpec,
    pub count: CountSpec,
    pub scatter: ScatterSpec,
    pub eigen: EigenSpec,
    pub validate: ValidateSpec,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub radius: f64,
    pub smoothness: f64,
    pub grid_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Nominal Nyström resolution `n` (n/2 radial, n/2 polar, n azimuthal).
    pub n_per_axis: usize,
    /// Side of the periodic box used by the Fourier oracles.
    pub oracle_box: f64,
    /// Points per axis of the Fourier oracles.
    pub oracle_grid: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionFields {
    pub r_min: f64,
    pub r_max: f64,
    pub arg_min: f64,
    pub arg_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub det_variant: DetVariant,
    pub contour_points: usize,
    pub subdivision_floor: f64,
    pub exclusion_radius: f64,
    pub newton_size: f64,
    pub max_rectangles: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub n_log_mod: usize,
    pub n_arg: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountSpec {
    pub radii: Vec<f64>,
    pub args: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterSpec {
    pub lambdas: Vec<f64>,
    pub sphere_degree: usize,
    pub calibration_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// One-dimensional reduction for radial potentials.
    Radial,
    /// Periodic three-dimensional grid.
    Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSpec {
    pub count: usize,
    pub method: EigenMethod,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSpec {
    /// Multiplies the Riesz part of the kernel in the kernel-oracle suite;
    /// anything but 1 is a negative control that must fail.
    pub alpha1_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 3,
            potential: PotentialSpec::default(),
            grid: GridSpec::default(),
            region: RegionFields::default(),
            solver: SolverSpec::default(),
            scan: ScanSpec::default(),
            count: CountSpec::default(),
            scatter: ScatterSpec::default(),
            eigen: EigenSpec::default(),
            validate: ValidateSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self {
            kind: PotentialKind::BallStep,
            amplitude_re: -3.0,
            amplitude_im: 0.0,
            radius: 1.0,
            smoothness: 0.2,
            grid_file: None,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_per_axis: 16,
            oracle_box: 24.0,
            oracle_grid: 64,
        }
    }
}

impl Default for RegionFields {
    fn default() -> Self {
        Self {
            r_min: 0.05,
            r_max: 2.0,
            arg_min: -PI,
            arg_max: 3.0 * PI,
        }
    }
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SearchOptions::default();
        Self {
            det_variant: s.variant,
            contour_points: s.contour_points,
            subdivision_floor: s.subdivision_floor,
            exclusion_radius: 0.05,
            newton_size: s.tol,
            max_rectangles: s.max_rectangles,
        }
    }
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self { n_log_mod: 24, n_arg: 24 }
    }
}

impl Default for CountSpec {
    fn default() -> Self {
        Self {
            radii: vec![0.5, 1.0, 2.0],
            args: vec![PI],
        }
    }
}

impl Default for ScatterSpec {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 1.0, 2.0],
            sphere_degree: 6,
            calibration_lambda: 1.0,
        }
    }
}

impl Default for EigenSpec {
    fn default() -> Self {
        Self {
            count: 3,
            method: EigenMethod::Radial,
        }
    }
}

impl Default for ValidateSpec {
    fn default() -> Self {
        Self { alpha1_scale: 1.0 }
    }
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("halfres-out"),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

/// A parsed configuration with its identity.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    /// SHA-256 of the normalized configuration (defaults filled in).
    pub hash: String,
    /// Directory relative paths in the config resolve against.
    pub base: PathBuf,
}

/// Configuration problems; reported as usage errors.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
    let config: RunConfig =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("parsing {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let normalized = serde_json::to_string(&config).map_err(|e| ConfigError(e.to_string()))?;
    let hash = hex(&Sha256::digest(normalized.as_bytes()));
    let loaded = Loaded { config, hash, base };
    loaded.check()?;
    Ok(loaded)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Loaded {
    fn check(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        if c.dimension != 3 && c.dimension != 5 {
            return Err(ConfigError(format!("dimension must be 3 or 5, got {}", c.dimension)));
        }
        if let Some(p) = &c.potential.grid_file {
            let p = self.base.join(p);
            if !p.is_file() {
                return Err(ConfigError(format!("grid_file {} does not exist", p.display())));
            }
        }
        if c.potential.kind == PotentialKind::GridFile && c.potential.grid_file.is_none() {
            return Err(ConfigError("potential kind grid_file needs a grid_file path".into()));
        }
        if c.output.formats.is_empty() {
            return Err(ConfigError("output.formats is empty".into()));
        }
        Ok(())
    }

    /// Matrix pipelines are three-dimensional only.
    pub fn require_3d(&self, command: &str) -> Result<(), ConfigError> {
        if self.config.dimension != 3 {
            return Err(ConfigError(format!(
                "{command} assembles matrices and needs dimension 3 (got {}); only validate runs in dimension 5",
                self.config.dimension
            )));
        }
        Ok(())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.config.output.formats.contains(&f)
    }

    pub fn potential(&self) -> anyhow::Result<Potential> {
        let p = &self.config.potential;
        let amp = Complex64::new(p.amplitude_re, p.amplitude_im);
        let v = match p.kind {
            PotentialKind::BallStep => Potential::ball_step(amp, p.radius, p.smoothness)?,
            PotentialKind::TruncatedGaussian => Potential::truncated_gaussian(amp, p.radius, p.smoothness)?,
            PotentialKind::GridFile => {
                let path = self.base.join(p.grid_file.as_ref().context("grid_file missing")?);
                Potential::from_grid_file(&path).with_context(|| format!("loading {}", path.display()))?.scaled(amp)
            }
        };
        Ok(v)
    }

    pub fn quadrature(&self, v: &Potential) -> anyhow::Result<Quadrature> {
        Ok(build_quadrature_for(v, v.support_radius, self.config.grid.n_per_axis)?)
    }

    pub fn region(&self) -> anyhow::Result<RegionSpec> {
        let r = &self.config.region;
        let spec = RegionSpec {
            r_min: r.r_min,
            r_max: r.r_max,
            arg_min: r.arg_min,
            arg_max: r.arg_max,
            exclusion_radius: self.config.solver.exclusion_radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn search_options(&self) -> anyhow::Result<SearchOptions> {
        let s = &self.config.solver;
        if s.contour_points < 4 {
            bail!("solver.contour_points must be at least 4");
        }
        Ok(SearchOptions {
            variant: s.det_variant,
            contour_points: s.contour_points,
            max_contour_points: (s.contour_points * 8).max(512),
            tol: s.newton_size,
            subdivision_floor: s.subdivision_floor,
            max_rectangles: s.max_rectangles,
        })
    }
}
