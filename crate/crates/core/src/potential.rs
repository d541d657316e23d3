//! Matrix potentials sampled cell-wise on a truncated half-line grid.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};

/// Relative tolerance for the Hermiticity of every sample.
pub const EPS_HERMITIAN: f64 = 1e-12;

/// `V` is constant on each cell `[i h, (i+1) h)` of `[0, x_max)` and zero beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub n: usize,
    pub h: f64,
    pub x_max: f64,
    pub samples: Vec<CMat>,
    /// Operator norm of each cell value.
    pub cell_norms: Vec<f64>,
    /// `sum (1 + x_i) |V(x_i)| h` over cell midpoints.
    pub faddeev_norm: f64,
}

impl PotentialGrid {
    pub fn new(n: usize, h: f64, samples: Vec<CMat>) -> Result<Self> {
        if !(h > 0.0) || samples.is_empty() {
            return Err(Error::InvalidParameter(
                "grid needs h > 0 and at least one cell",
            ));
        }
        let mut cell_norms = Vec::with_capacity(samples.len());
        for (i, v) in samples.iter().enumerate() {
            if v.nrows() != n || v.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.nrows(),
                });
            }
            let residual = linalg::hermitian_residual(v);
            if residual > EPS_HERMITIAN * linalg::frob(v) {
                return Err(Error::NotHermitian { index: i, residual });
            }
            cell_norms.push(linalg::hermitian_norm(v));
        }
        let faddeev_norm = cell_norms
            .iter()
            .enumerate()
            .map(|(i, nv)| (1.0 + (i as f64 + 0.5) * h) * nv * h)
            .sum();
        Ok(Self {
            n,
            h,
            x_max: h * samples.len() as f64,
            samples,
            cell_norms,
            faddeev_norm,
        })
    }

    pub fn cells(&self) -> usize {
        self.samples.len()
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    /// Right edge of the last nonzero cell (0 for the zero potential).
    pub fn support_end(&self) -> f64 {
        self.cell_norms
            .iter()
            .rposition(|&v| v > 0.0)
            .map_or(0.0, |i| (i + 1) as f64 * self.h)
    }

    /// Value at `x` (zero beyond the grid).
    pub fn at(&self, x: f64) -> CMat {
        if x < 0.0 || x >= self.x_max {
            return linalg::zeros(self.n);
        }
        let i = ((x / self.h) as usize).min(self.cells() - 1);
        self.samples[i].clone()
    }

    pub fn max_norm(&self) -> f64 {
        self.cell_norms.iter().copied().fold(0.0, f64::max)
    }

    /// `int_x^inf V(z) dz` (matrix-valued, exact for cell-constant V).
    pub fn tail_integral(&self, x: f64) -> CMat {
        let mut acc = linalg::zeros(self.n);
        for (i, v) in self.samples.iter().enumerate() {
            let lo = i as f64 * self.h;
            let hi = lo + self.h;
            let len = hi - lo.max(x);
            if len > 0.0 {
                acc += v * c(len.min(self.h), 0.0);
            }
        }
        acc
    }

    /// Same grid, every cell value multiplied by `s`.
    /// Positions of the strongest jumps of `V` (including the drop to zero
    /// at `x_max`): at most `limit`, each at least `rel * max_norm`.
    pub fn discontinuities(&self, rel: f64, limit: usize) -> Vec<f64> {
        let zero = linalg::zeros(self.n);
        let floor = rel * self.max_norm();
        let mut jumps: Vec<(f64, f64)> = (1..=self.samples.len())
            .filter_map(|j| {
                let next = self.samples.get(j).unwrap_or(&zero);
                let d = linalg::op_norm(&(next - &self.samples[j - 1]));
                (d > floor && d > 0.0).then_some((d, j as f64 * self.h))
            })
            .collect();
        jumps.sort_by(|a, b| b.0.total_cmp(&a.0));
        jumps.truncate(limit);
        let mut at: Vec<f64> = jumps.into_iter().map(|(_, x)| x).collect();
        at.sort_by(f64::total_cmp);
        at
    }

    pub fn scaled(&self, s: f64) -> Self {
        let samples = self.samples.iter().map(|v| v * c(s, 0.0)).collect();
        Self::new(self.n, self.h, samples).expect("scaling preserves hermiticity")
    }
}

/// Tail moments `sigma(x) = int_x^inf |V|` and `sigma1(x) = int_x^inf y |V(y)| dy`.
#[derive(Debug, Clone)]
pub struct Moments {
    h: f64,
    norms: Vec<f64>,
    /// Values at nodes `x_j = j h`, `j = 0..=cells`.
    pub sigma_nodes: Vec<f64>,
    pub sigma1_nodes: Vec<f64>,
}

impl Moments {
    pub fn sigma(&self, x: f64) -> f64 {
        let (j, frac) = self.locate(x);
        match j {
            None => 0.0,
            Some(j) => self.sigma_nodes[j + 1] + self.norms[j] * (1.0 - frac) * self.h,
        }
    }

    pub fn sigma1(&self, x: f64) -> f64 {
        let (j, _) = self.locate(x);
        match j {
            None => 0.0,
            Some(j) => {
                let right = (j + 1) as f64 * self.h;
                let x = x.max(0.0);
                self.sigma1_nodes[j + 1] + self.norms[j] * 0.5 * (right * right - x * x)
            }
        }
    }

    fn locate(&self, x: f64) -> (Option<usize>, f64) {
        let n = self.norms.len();
        if x >= n as f64 * self.h {
            return (None, 0.0);
        }
        let x = x.max(0.0);
        let j = ((x / self.h) as usize).min(n - 1);
        (Some(j), x / self.h - j as f64)
    }
}

pub fn moments(pg: &PotentialGrid) -> Moments {
    let cells = pg.cells();
    let h = pg.h;
    let mut sigma = alloc::vec![0.0; cells + 1];
    let mut sigma1 = alloc::vec![0.0; cells + 1];
    for i in (0..cells).rev() {
        let nv = pg.cell_norms[i];
        sigma[i] = sigma[i + 1] + nv * h;
        // int over the cell of y dy = h * midpoint
        sigma1[i] = sigma1[i + 1] + nv * h * pg.midpoint(i);
    }
    Moments {
        h,
        norms: pg.cell_norms.clone(),
        sigma_nodes: sigma,
        sigma1_nodes: sigma1,
    }
}

/// Named potential families.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Zero {
        n: usize,
    },
    /// `V = depth` on `[0, width]`; depth < 0 is attractive.
    SquareWell {
        depth: f64,
        width: f64,
    },
    SquareBarrier {
        height: f64,
        width: f64,
    },
    /// `V = amplitude exp(-rate x)` truncated where it drops below `1e-10 |amplitude|`.
    ExpDecay {
        amplitude: f64,
        rate: f64,
    },
    /// Two channels on `[0, width]` with `V = [[d1, g], [g, d2]]`.
    CoupledChannels {
        g: f64,
        d1: f64,
        d2: f64,
        width: f64,
    },
}

impl Preset {
    pub const NAMES: [&'static str; 5] = [
        "zero",
        "square_well",
        "square_barrier",
        "exp_decay",
        "coupled_channels",
    ];

    /// Builds a preset from its name and `key = value` parameters; missing
    /// keys take documented defaults.
    pub fn from_name(name: &str, param: impl Fn(&str) -> Option<f64>) -> Result<Self> {
        let get = |k: &str, d: f64| param(k).unwrap_or(d);
        Ok(match name {
            "zero" => Preset::Zero {
                n: get("n", 1.0) as usize,
            },
            "square_well" => Preset::SquareWell {
                depth: get("depth", -2.0),
                width: get("width", 1.0),
            },
            "square_barrier" => Preset::SquareBarrier {
                height: get("height", 2.0),
                width: get("width", 1.0),
            },
            "exp_decay" => Preset::ExpDecay {
                amplitude: get("amplitude", -1.0),
                rate: get("rate", 2.0),
            },
            "coupled_channels" => Preset::CoupledChannels {
                g: get("g", 0.5),
                d1: get("d1", 0.0),
                d2: get("d2", 0.0),
                width: get("width", 1.0),
            },
            other => return Err(Error::UnknownPreset(other.to_string())),
        })
    }

    pub fn channels(&self) -> usize {
        match self {
            Preset::Zero { n } => *n,
            Preset::CoupledChannels { .. } => 2,
            _ => 1,
        }
    }

    /// Extent of the nonzero part.
    pub fn support(&self) -> f64 {
        match *self {
            Preset::Zero { .. } => 0.0,
            Preset::SquareWell { width, .. }
            | Preset::SquareBarrier { width, .. }
            | Preset::CoupledChannels { width, .. } => width,
            Preset::ExpDecay { rate, .. } => libm::log(1e10) / rate,
        }
    }

    /// Grid with step `h` covering at least `x_max`; when `x_max` is absent
    /// the stored zero tail is half the support (one cell for `zero`).
    pub fn build(&self, h: f64, x_max: Option<f64>) -> Result<PotentialGrid> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("h must be positive"));
        }
        let support = self.support();
        if !(support >= 0.0) || !support.is_finite() {
            return Err(Error::InvalidParameter("preset support must be finite"));
        }
        let x_max = x_max.unwrap_or(if support > 0.0 { 1.5 * support } else { h });
        let cells = libm::round(x_max / h).max(1.0) as usize;
        let n = self.channels();
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1"));
        }
        let in_support = |i: usize| ((i as f64 + 0.5) * h) < support;
        let samples = (0..cells)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                match *self {
                    Preset::Zero { n } => linalg::zeros(n),
                    Preset::SquareWell { depth: v, .. }
                    | Preset::SquareBarrier { height: v, .. } => {
                        CMat::from_element(1, 1, c(if in_support(i) { v } else { 0.0 }, 0.0))
                    }
                    Preset::ExpDecay { amplitude, rate } => {
                        let v = if in_support(i) {
                            amplitude * libm::exp(-rate * x)
                        } else {
                            0.0
                        };
                        CMat::from_element(1, 1, c(v, 0.0))
                    }
                    Preset::CoupledChannels { g, d1, d2, .. } => {
                        if in_support(i) {
                            CMat::from_row_slice(
                                2,
                                2,
                                &[c(d1, 0.0), c(g, 0.0), c(g, 0.0), c(d2, 0.0)],
                            )
                        } else {
                            linalg::zeros(2)
                        }
                    }
                }
            })
            .collect();
        PotentialGrid::new(n, h, samples)
    }
}

pub fn preset(name: &str, param: impl Fn(&str) -> Option<f64>, h: f64) -> Result<PotentialGrid> {
    Preset::from_name(name, param)?.build(h, None)
}
