//! Run configuration. Every field has a default, so an empty file (or no
//! file) is a valid configuration; flags override what the file sets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::core::bc::BoundaryPair;
use crate::core::evolve::Method;
use crate::core::fold::delta_boundary;
use crate::core::linalg::CMat;
use crate::core::potential::{PotentialGrid, Preset};
use crate::io;
use crate::AppError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSource,
    pub boundary: BoundarySource,
    pub grid: GridConfig,
    pub evolve: EvolveConfig,
    pub decay: DecayConfig,
    pub strichartz: StrichartzConfig,
    pub fold: FoldConfig,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// A named preset with `key = value` parameters, or a potential file.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSource {
    pub preset: String,
    pub params: BTreeMap<String, f64>,
    pub file: Option<PathBuf>,
}

impl Default for PotentialSource {
    fn default() -> Self {
        Self {
            preset: "square_well".into(),
            params: BTreeMap::new(),
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    #[default]
    Dirichlet,
    Neumann,
    Mixed,
    Delta,
    File,
}

/// `mixed` uses `theta`; `delta` uses the Hermitian block `lambda_re + i
/// lambda_im` (row-major) and acts on `2n` channels; `file` reads `file`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySource {
    pub kind: BoundaryKind,
    pub theta: Option<f64>,
    pub lambda_re: Vec<f64>,
    pub lambda_im: Vec<f64>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    /// Stored potential length; presets pick their own when absent.
    pub x_max: Option<f64>,
    pub k_max: f64,
    pub dk: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h: 0.02,
            x_max: None,
            k_max: 40.0,
            dk: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Spectral,
    Kernel,
    Stepper,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Spectral => Method::Spectral,
            MethodName::Kernel => Method::Kernel,
            MethodName::Stepper => Method::Stepper,
        }
    }
}

/// Gaussian packet `exp(-(x - x0)^2 / (2 width^2) + i k0 x)` in every channel.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Packet {
    pub x0: f64,
    pub k0: f64,
    pub width: f64,
}

impl Default for Packet {
    fn default() -> Self {
        Self {
            x0: 6.0,
            k0: -1.5,
            width: 1.0,
        }
    }
}

impl Packet {
    pub fn at(&self, x: f64) -> Complex64 {
        let d = (x - self.x0) / self.width;
        Complex64::from_polar((-0.5 * d * d).exp(), self.k0 * x)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub method: MethodName,
    pub t: f64,
    /// Length of the state grid.
    pub length: f64,
    pub packet: Packet,
    /// Spectral route `k` grid.
    pub k_max: f64,
    pub dk: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            method: MethodName::Spectral,
            t: 1.0,
            length: 40.0,
            packet: Packet::default(),
            k_max: 9.0,
            dk: 0.02,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub t_max: f64,
    /// `p = 1` fits the kernel sup; `1 < p <= 2` samples `||u||_{p'} / ||psi||_p`.
    pub p: f64,
    /// Node box `[0, box_max]` for the kernel sup, every `stride`-th node.
    pub box_max: f64,
    pub stride: usize,
    pub length: f64,
    pub packet: Packet,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            t_max: 64.0,
            p: 1.0,
            box_max: 30.0,
            stride: 4,
            length: 800.0,
            packet: Packet {
                x0: 2.0,
                k0: 0.0,
                width: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzConfig {
    pub q: f64,
    pub r: f64,
    pub t_min: f64,
    pub octaves: usize,
    pub doublings: usize,
    pub per_octave: usize,
    pub length: f64,
    pub packet: Packet,
}

impl Default for StrichartzConfig {
    fn default() -> Self {
        Self {
            q: 8.0,
            r: 4.0,
            t_min: 0.1,
            octaves: 6,
            doublings: 2,
            per_octave: 8,
            length: 400.0,
            packet: Packet {
                x0: 3.0,
                k0: 0.0,
                width: 0.7,
            },
        }
    }
}

/// Line problem: a line potential file, or `V = 0` on `[-x_max, x_max]`,
/// coupled at 0 through the `delta` boundary block (zero when absent).
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub file: Option<PathBuf>,
    pub x_max: f64,
    pub t: f64,
    pub length: f64,
    pub packet: Packet,
    pub method: MethodName,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self {
            file: None,
            x_max: 1.0,
            t: 1.0,
            length: 40.0,
            packet: Packet {
                x0: -6.0,
                k0: 1.8,
                width: 1.0,
            },
            method: MethodName::Spectral,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let mut cfg: Self = io::read_toml(path)?;
        // relative file names are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        for f in [
            &mut cfg.potential.file,
            &mut cfg.boundary.file,
            &mut cfg.fold.file,
        ]
        .into_iter()
        .flatten()
        {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |what: &str| Err(AppError::Config(what.to_string()));
        if !(self.grid.h > 0.0 && self.grid.h.is_finite()) {
            return bad("grid.h must be positive");
        }
        if !(self.grid.k_max > 0.0 && self.grid.dk > 0.0) {
            return bad("grid.k_max and grid.dk must be positive");
        }
        if self.grid.x_max.is_some_and(|x| !(x >= self.grid.h)) {
            return bad("grid.x_max must be at least h");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        if !(self.decay.t_max >= 1.0) {
            return bad("decay.t_max must be at least 1");
        }
        for f in [&self.potential.file, &self.boundary.file, &self.fold.file]
            .into_iter()
            .flatten()
        {
            if !f.is_file() {
                return Err(AppError::Config(format!("{} does not exist", f.display())));
            }
        }
        if self.potential.file.is_none() && !Preset::NAMES.contains(&self.potential.preset.as_str())
        {
            return Err(AppError::Config(format!(
                "unknown preset '{}'",
                self.potential.preset
            )));
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<PotentialGrid, AppError> {
        if let Some(file) = &self.potential.file {
            return io::load_potential(file);
        }
        let preset = Preset::from_name(&self.potential.preset, |k| {
            self.potential.params.get(k).copied()
        })?;
        Ok(preset.build(self.grid.h, self.grid.x_max)?)
    }

    pub fn boundary(&self, n: usize) -> Result<BoundaryPair, AppError> {
        let b = &self.boundary;
        Ok(match b.kind {
            BoundaryKind::Dirichlet => BoundaryPair::dirichlet(n),
            BoundaryKind::Neumann => BoundaryPair::neumann(n),
            BoundaryKind::Mixed => {
                let theta = b.theta.ok_or_else(|| {
                    AppError::Config("boundary.theta is required for mixed".into())
                })?;
                BoundaryPair::mixed(n, theta)
            }
            BoundaryKind::Delta => {
                if !n.is_multiple_of(2) {
                    return Err(AppError::Config(
                        "a delta boundary acts on an even number of channels".into(),
                    ));
                }
                delta_boundary(&self.coupling(n / 2)?)?
            }
            BoundaryKind::File => {
                let f = b
                    .file
                    .as_ref()
                    .ok_or_else(|| AppError::Config("boundary.file is required".into()))?;
                io::load_boundary(f)?
            }
        })
    }

    /// `Lambda` for `n` line channels; zero when the config gives none.
    pub fn coupling(&self, n: usize) -> Result<CMat, AppError> {
        let b = &self.boundary;
        if b.lambda_re.is_empty() && b.lambda_im.is_empty() {
            return Ok(CMat::zeros(n, n));
        }
        let im = if b.lambda_im.is_empty() {
            vec![0.0; n * n]
        } else {
            b.lambda_im.clone()
        };
        if b.lambda_re.len() != n * n || im.len() != n * n {
            return Err(AppError::Config(format!(
                "boundary.lambda needs {} row-major entries",
                n * n
            )));
        }
        Ok(CMat::from_fn(n, n, |r, c| {
            Complex64::new(b.lambda_re[r * n + c], im[r * n + c])
        }))
    }
}
