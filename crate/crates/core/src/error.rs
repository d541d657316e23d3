use core::fmt;

/// Every failure the engine can report, grouped by the module that raises it.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    // bc
    DimensionMismatch { expected: usize, found: usize },
    NotSelfAdjointBC { residual: f64 },
    RankDeficientBC { min_eigenvalue: f64 },
    SingularFreeJost,
    // potential
    UnknownPreset(alloc::string::String),
    InvalidParameter(&'static str),
    NotHermitian { index: usize, residual: f64 },
    // jost
    NonHermitianCell { index: usize },
    BranchError,
    MissingConjugateSample,
    SingularJost { k: f64 },
    // spectrum
    ClusterTooDense { kappa: f64 },
    GridMismatch { expected: usize, found: usize },
    RankAmbiguous { s_min: f64, threshold: f64 },
    // kernels
    GridTooCoarse { required: f64, actual: f64 },
    MissingNormalization,
    // evolve
    MissingKernelTables,
    ZeroTime,
    StepTooLarge { drift: f64 },
    SpectralGridTooCoarse { product: f64 },
    // fold
    NotHermitianCoupling,
    // harness
    InadmissibleState { value: f64 },
    NotAdmissible { q: f64, r: f64 },
}

impl Error {
    /// Module-qualified short code, stable across releases.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            DimensionMismatch { .. } => "bc::DimensionMismatch",
            NotSelfAdjointBC { .. } => "bc::NotSelfAdjointBC",
            RankDeficientBC { .. } => "bc::RankDeficientBC",
            SingularFreeJost => "bc::SingularFreeJost",
            UnknownPreset(_) => "potential::UnknownPreset",
            InvalidParameter(_) => "potential::InvalidParameter",
            NotHermitian { .. } => "potential::NotHermitian",
            NonHermitianCell { .. } => "jost::NonHermitianCell",
            BranchError => "jost::BranchError",
            MissingConjugateSample => "jost::MissingConjugateSample",
            SingularJost { .. } => "jost::SingularJost",
            ClusterTooDense { .. } => "spectrum::ClusterTooDense",
            GridMismatch { .. } => "spectrum::GridMismatch",
            RankAmbiguous { .. } => "spectrum::RankAmbiguous",
            GridTooCoarse { .. } => "kernels::GridTooCoarse",
            MissingNormalization => "kernels::MissingNormalization",
            MissingKernelTables => "evolve::MissingKernelTables",
            ZeroTime => "evolve::ZeroTime",
            StepTooLarge { .. } => "evolve::StepTooLarge",
            SpectralGridTooCoarse { .. } => "evolve::SpectralGridTooCoarse",
            NotHermitianCoupling => "fold::NotHermitianCoupling",
            InadmissibleState { .. } => "harness::InadmissibleState",
            NotAdmissible { .. } => "harness::NotAdmissible",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        write!(f, "{}: ", self.code())?;
        match self {
            DimensionMismatch { expected, found } => {
                write!(f, "expected dimension {expected}, found {found}")
            }
            NotSelfAdjointBC { residual } => {
                write!(
                    f,
                    "boundary pair violates -B^+A + A^+B = 0 (residual {residual:e})"
                )
            }
            RankDeficientBC { min_eigenvalue } => {
                write!(
                    f,
                    "A^+A + B^+B is not positive definite (min eigenvalue {min_eigenvalue:e})"
                )
            }
            SingularFreeJost => write!(f, "B - ikA is numerically singular"),
            UnknownPreset(name) => write!(f, "unknown preset '{name}'"),
            InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            NotHermitian { index, residual } => {
                write!(f, "sample {index} is not Hermitian (residual {residual:e})")
            }
            NonHermitianCell { index } => write!(f, "cell {index} holds a non-Hermitian matrix"),
            BranchError => write!(f, "wavenumber must be real or positive imaginary"),
            MissingConjugateSample => write!(f, "no Jost sample at -k"),
            SingularJost { k } => write!(f, "Jost matrix singular at real k = {k:e}"),
            ClusterTooDense { kappa } => {
                write!(f, "bound-state roots cluster near kappa = {kappa:e}")
            }
            GridMismatch { expected, found } => {
                write!(f, "state has {found} nodes, grid has {expected}")
            }
            RankAmbiguous { s_min, threshold } => write!(
                f,
                "smallest singular value {s_min:e} too close to rank threshold {threshold:e}"
            ),
            GridTooCoarse { required, actual } => {
                write!(f, "k-grid too coarse: need {required:e}, have {actual:e}")
            }
            MissingNormalization => {
                write!(
                    f,
                    "bound states present but no normalization constants given"
                )
            }
            MissingKernelTables => write!(f, "kernel tables were not computed"),
            ZeroTime => write!(f, "kernel route requires t > 0"),
            StepTooLarge { drift } => write!(f, "norm drift {drift:e} per step"),
            SpectralGridTooCoarse { product } => write!(
                f,
                "|t| k_max dk = {product:e} exceeds pi/2; use the kernel route"
            ),
            NotHermitianCoupling => write!(f, "delta coupling must be Hermitian"),
            InadmissibleState { value } => write!(
                f,
                "state does not vanish on a Dirichlet channel at x = 0 (|psi(0)| = {value:e})"
            ),
            NotAdmissible { q, r } => write!(f, "(q, r) = ({q}, {r}) is not an admissible pair"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
