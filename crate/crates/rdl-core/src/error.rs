use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("covariance entry ({i},{j}) differs from its transpose by {delta:e}, beyond the symmetry tolerance")]
    NotSymmetric { i: usize, j: usize, delta: f64 },

    #[error("matrix is not positive semidefinite within tolerance (scale {scale:e})")]
    NotPsd { scale: f64 },

    #[error("index {index} out of bounds for dimension {dim}")]
    IndexOutOfBounds { index: usize, dim: usize },

    #[error("index {index} appears more than once across the supplied index sets")]
    RepeatedIndex { index: usize },

    #[error("index set for {side} must be nonempty")]
    EmptyIndexSet { side: &'static str },

    #[error(
        "block is numerically singular at index {index} (pivot ratio {ratio:e} <= 1e-12); \
         the conditioning set is degenerate"
    )]
    SingularBlock { index: usize, ratio: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("target distortion {target} lies outside the feasible range [{d_min}, {d_max}]")]
    InfeasibleDistortion { target: f64, d_min: f64, d_max: f64 },

    #[error(
        "rates are undefined at sigma_q2 = 0 (the test channel is noiseless); \
         evaluate distortion and leakage directly or take the small-noise limit"
    )]
    ZeroQuantizerNoise,

    #[error(
        "estimator family cannot reach distortion {target}; the minimum reachable \
         mean squared error at this configuration is {min_reachable}"
    )]
    InfeasibleCalibration { target: f64, min_reachable: f64 },

    #[error("outer-bound term {name} is nonpositive ({value:e}); calibration lies outside the formula's validity region")]
    NonpositiveLogArgument { name: &'static str, value: f64 },

    #[error("{rows} samples are too few for dimension {dim} (need at least 10x the dimension)")]
    InsufficientSamples { rows: usize, dim: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
