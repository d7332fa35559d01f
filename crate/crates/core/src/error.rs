use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid fan: {0}")]
    InvalidFan(String),

    #[error("unknown cone {0:?}")]
    UnknownCone(Vec<usize>),

    #[error("basis vectors do not form a basis of the kernel lattice: {0}")]
    NotABasis(String),

    #[error("e_{a}^dual is not in the extended nef cone of max cone {sigma}")]
    NefViolated { a: usize, sigma: usize },

    #[error("degree functional is not strictly positive on the extended Mori cone of max cone {0}")]
    UnboundedDegree(usize),

    #[error("degree is not in K_sigma for max cone {0}")]
    NotInKSigma(usize),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("gamma function pole at {0}")]
    GammaPole(String),

    #[error("line bundle {0:?} is not Q-ample; build its cycle from differences of ample bundles")]
    NotAmple(Vec<i64>),

    #[error("shift vector is not in the interior of max cone {0}")]
    NotInterior(usize),

    #[error("splitting violates positivity for max cone {0}")]
    SplittingPositivity(usize),

    #[error("invalid splitting: {0}")]
    InvalidSplitting(String),

    #[error("fan dimension {0} not supported by the integrator (n <= 2)")]
    UnsupportedDimension(usize),

    #[error("quadrature did not converge after {subdivisions} subdivisions (error {error:e})")]
    NonConvergent { subdivisions: usize, error: f64 },

    #[error("semi-positivity assumption fails")]
    NotSemiPositive,

    #[error("zero base coefficient in recursion")]
    ZeroCoefficient,

    #[error("extrapolation did not converge (residual {0:e})")]
    Extrapolation(f64),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
