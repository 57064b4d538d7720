//! Rate-distortion-leakage analysis for a symmetric network of agents that
//! estimate local Gaussian states from interference-coupled measurements and
//! cooperate over quantize-and-broadcast protocols.
//!
//! The crate layers as follows:
//!
//! - [`linalg`]: validated covariance matrices, conditional covariance,
//!   structured determinants, and Gaussian information measures: the oracle
//!   machinery every closed form is tested against.
//! - [`model`]: the symmetric measurement network, its second-order moments,
//!   explicit joint covariances, and the fidelity extremes.
//! - [`protocols`]: achievable distortion, per-agent and sum rates for the
//!   distributed and centralized protocols, leakage, limits, and the
//!   protocol/encoding comparisons.
//! - [`outer`]: estimator-based converse bounds on rate and leakage with
//!   explicit calibration.
//! - [`mc`]: Monte-Carlo cross-validation of the closed forms.
//!
//! Information quantities are computed in nats internally; [`Units`] converts
//! at the presentation boundary. All operations are pure functions of their
//! inputs and safe to call concurrently.
//!
//! ```
//! use rdl_core::protocols::{achievable_distortion, compare_protocols};
//! use rdl_core::{ModelParams, Units};
//!
//! let params = ModelParams::new(3, 0.5, 1.0)?;
//! let d = achievable_distortion(&params, 6.0);
//! assert!(params.d_min() < d && d < params.d_max());
//!
//! let cmp = compare_protocols(&params, 6.0)?;
//! assert!(cmp.ceo_sum > cmp.dist_sum);
//! assert!((Units::Bits.from_nats(cmp.dist_sum) - 0.556076).abs() < 1e-6);
//! # Ok::<(), rdl_core::Error>(())
//! ```

// Domain guards are written as `!(x > bound)` so that NaN takes the error
// branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod outer;
pub mod protocols;

pub use error::{Error, Result};
pub use linalg::{
    conditional_covariance, f1, gaussian_cond_entropy, gaussian_mi, toeplitz_det, CovMatrix,
    IndexPartition,
};
pub use model::{JointLayout, ModelParams, Moments};
pub use protocols::{
    achievable_distortion, ceo_rates, ceo_sum_rate, compare_protocols, distributed_rates,
    distributed_sum_rate, encoding_equivalence_check, leakage_exact, leakage_formula,
    per_user_rate_limit, sigma_q2_for_distortion, EncodingKind, ProtocolKind, RdlPoint,
};

/// Presentation units for information quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Bits,
    Nats,
}

impl Units {
    /// Convert a value in nats into these units.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}
