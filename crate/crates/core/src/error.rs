use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter box: {0}")]
    InvalidBox(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("entry a[{row}][{col}] is not monotone in parameter {param}")]
    NonMonotoneEntry { param: usize, row: usize, col: usize },

    #[error("pair is uncontrollable: singular-value ratio {ratio:.3e} below tolerance {tol:.3e}")]
    Uncontrollable { ratio: f64, tol: f64 },

    #[error("corner {corner} yields an uncontrollable model (singular-value ratio {ratio:.3e})")]
    UncontrollableCorner { corner: String, ratio: f64 },

    #[error("canonical forms are single-input only, got {inputs} input columns")]
    MultiInput { inputs: usize },

    #[error("matrix dimension {n} exceeds the permutation budget of {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("weighted transformation mixture is singular (condition estimate {cond:.3e})")]
    SingularMixture { cond: f64 },

    #[error("matrix is numerically singular (condition estimate {cond:.3e})")]
    Singular { cond: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("composite roll inertia I_c = {ic:.6} is not positive")]
    NonPositiveIc { ic: f64 },

    #[error("invalid vehicle parameters: {0}")]
    InvalidVehicle(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
