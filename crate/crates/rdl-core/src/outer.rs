//! Converse layer: estimator-based lower bounds on the first agent's rate and
//! leakage, with explicit calibration of the estimator parameters.
//!
//! The bounding estimator for agent 1's state keeps unit weight on that
//! agent's own measurement, applies a common scaling `b` to every other
//! measurement, and adds independent noise of variance `sigma_z2`:
//! `Xhat = Y_1 + b * sum_{l != 1} Y_l + Z`. Calibration fixes `b` by the
//! normal equation against one representative other measurement (symmetry
//! makes them all equivalent) and then fixes `sigma_z2` so the estimator's
//! mean squared error equals the target distortion. Because the unit weight
//! on the own measurement keeps its full noise in the error, the reachable
//! mean squared error is bounded below by a configuration-dependent floor
//! that always exceeds 1; targets below the floor are infeasible and error
//! out rather than silently clamping.

use crate::error::{Error, Result};
use crate::linalg::f1;
use crate::model::ModelParams;

/// Calibrated estimator parameters and the derived quantities consumed by the
/// bound formulas. Derived fields recompute from `(b, sigma_z2)` and the
/// model moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorCalibration {
    /// Common scaling applied to the other agents' measurements.
    pub b: f64,
    /// Variance of the estimator's independent noise.
    pub sigma_z2: f64,
    /// `b^2 / (b^2 alpha + sigma_z2)`.
    pub g: f64,
    /// Variance of the estimator residual beyond the own measurement:
    /// `g1 = E[(Xhat - Y)^2] = b^2 [(K-1) alpha + (K-1)(K-2) beta] + sigma_z2`.
    pub g1: f64,
    /// Residual measurement variance given that residual: `alpha - b^2 beta^2 (K-1)^2 / g1`.
    pub q1: f64,
    /// Cross coefficient `b^2 (1 + (K-2) sqrt(h)) beta (K-1) / g1`.
    pub q2: f64,
}

/// The scaling fixed by the normal equation `E[(X - Xhat) Y_l] = 0` for a
/// representative `l` outside the estimating agent. Always negative for this
/// model: the interference must be subtracted back out.
pub fn orthogonal_scaling(params: &ModelParams) -> f64 {
    let m = params.moments();
    let kf = params.k() as f64;
    (params.h().sqrt() * params.sigma_x2() - m.beta) / (m.alpha + (kf - 2.0) * m.beta)
}

/// Smallest mean squared error the estimator family reaches at scaling `b`
/// (attained at `sigma_z2 = 0`).
pub fn min_reachable_distortion(params: &ModelParams, b: f64) -> f64 {
    let m = params.moments();
    let kf = params.k() as f64;
    let sx2 = params.sigma_x2();
    m.alpha - sx2
        + 2.0 * b * (kf - 1.0) * (m.beta - params.h().sqrt() * sx2)
        + b * b * (kf - 1.0) * (m.alpha + (kf - 2.0) * m.beta)
}

/// Calibrate at the orthogonality-pinned scaling; `sigma_z2` absorbs the gap
/// between the target distortion and the floor.
pub fn calibrate(params: &ModelParams, d_target: f64) -> Result<EstimatorCalibration> {
    calibrate_with_scaling(params, d_target, orthogonal_scaling(params))
}

/// Calibrate at an explicit scaling; used by the inspection scan over `b`.
pub fn calibrate_with_scaling(
    params: &ModelParams,
    d_target: f64,
    b: f64,
) -> Result<EstimatorCalibration> {
    let floor = min_reachable_distortion(params, b);
    let sigma_z2 = d_target - floor;
    if sigma_z2 < 0.0 {
        return Err(Error::InfeasibleCalibration {
            target: d_target,
            min_reachable: floor,
        });
    }
    let m = params.moments();
    let kf = params.k() as f64;
    let denom = b * b * m.alpha + sigma_z2;
    let g = if denom > 0.0 { b * b / denom } else { 0.0 };
    let g1 = b * b * ((kf - 1.0) * m.alpha + (kf - 1.0) * (kf - 2.0) * m.beta) + sigma_z2;
    let (q1, q2) = if g1 > 0.0 {
        (
            m.alpha - b * b * m.beta * m.beta * (kf - 1.0) * (kf - 1.0) / g1,
            b * b * (1.0 + (kf - 2.0) * params.h().sqrt()) * m.beta * (kf - 1.0) / g1,
        )
    } else {
        // degenerate b = 0, sigma_z2 = 0: the residual is empty
        (m.alpha, 0.0)
    };
    Ok(EstimatorCalibration {
        b,
        sigma_z2,
        g,
        g1,
        q1,
        q2,
    })
}

fn checked_ln(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value.ln())
    } else {
        Err(Error::NonpositiveLogArgument { name, value })
    }
}

/// Lower bound (nats) on the first agent's broadcast rate for the calibrated
/// estimator: the conditional information its estimate adds about that
/// agent's measurement beyond all the others.
///
/// The first term is `0.5 ln E[var(Y_1 | Y_2..Y_K)]` (up to the entropy
/// constant); the second subtracts the same residual once the calibrated
/// estimate is also available. May be at or below zero for loose
/// calibrations; reported as-is.
pub fn rate_outer_bound(params: &ModelParams, calib: &EstimatorCalibration) -> Result<f64> {
    let m = params.moments();
    let kf = params.k() as f64;
    let ratio_c = m.beta * m.beta / m.alpha;
    let residual = m.alpha - m.alpha * m.alpha * calib.g;
    if !(residual > 0.0) {
        return Err(Error::NonpositiveLogArgument {
            name: "alpha - alpha^2 g",
            value: residual,
        });
    }
    let c1 = m.beta * m.beta * calib.g;
    let c2 = c1 + (m.beta - m.beta * m.alpha * calib.g).powi(2) / residual;
    let f1_c1 = m.f1(kf, c1);
    if !(f1_c1 > 0.0) {
        return Err(Error::NonpositiveLogArgument {
            name: "f1(K, c1)",
            value: f1_c1,
        });
    }
    let first = checked_ln(
        "f1(K, beta^2/alpha) (alpha - beta) / f1(K-1, beta^2/alpha)",
        m.f1(kf, ratio_c) * (m.alpha - m.beta) / f1(m.alpha, m.beta, kf - 1.0, ratio_c),
    )?;
    let second = checked_ln("f1(K, c2) / f1(K, c1) * (alpha - alpha^2 g)", m.f1(kf, c2) / f1_c1 * residual)?;
    Ok(0.5 * first - 0.5 * second)
}

/// Lower bound (nats) on the leakage of the first agent's state at another
/// agent, in the closed form built from `q1` and `q2`:
/// `0.5 ln( q1 / ((1 - sigma_x2 q2^2) q1 - sigma_x2 (sqrt(h) - q2)^2) )`.
///
/// This closed form replaces the exact residual-variance reduction
/// `cov(X, Xhat - Y)^2 / g1` with `sigma_x2^2 q2^2`; the two agree only when
/// `b^2 (K-1)^2 beta^2 = g1`. See [`leakage_outer_bound_exact`] for the
/// drop-in exact evaluation of the same estimator bound.
pub fn leakage_outer_bound(params: &ModelParams, calib: &EstimatorCalibration) -> Result<f64> {
    let sx2 = params.sigma_x2();
    if !(calib.q1 > 0.0) {
        return Err(Error::NonpositiveLogArgument {
            name: "q1",
            value: calib.q1,
        });
    }
    let denom = (1.0 - sx2 * calib.q2 * calib.q2) * calib.q1
        - sx2 * (params.h().sqrt() - calib.q2).powi(2);
    if !(denom > 0.0) {
        return Err(Error::NonpositiveLogArgument {
            name: "(1 - sigma_x2 q2^2) q1 - sigma_x2 (sqrt(h) - q2)^2",
            value: denom,
        });
    }
    Ok(0.5 * (calib.q1 / denom).ln())
}

/// Exact Gaussian evaluation of the same estimator-based leakage bound:
/// `0.5 ln( sigma_x2 / E[var(X | Y_other, Xhat)] )`, computed by
/// conditioning the state on the other agent's measurement and the
/// calibrated estimate directly.
pub fn leakage_outer_bound_exact(
    params: &ModelParams,
    calib: &EstimatorCalibration,
) -> Result<f64> {
    let m = params.moments();
    let kf = params.k() as f64;
    let sx2 = params.sigma_x2();
    let sh = params.h().sqrt();
    // W = Xhat - Y_other is the estimator residual; (Y_other, W) is an
    // invertible image of (Y_other, Xhat).
    let cov_yw = calib.b * (kf - 1.0) * m.beta;
    let cov_xw = sx2 * calib.b * (1.0 + (kf - 2.0) * sh);
    let cov_xy = sh * sx2;
    let var_w = calib.g1;
    let reduction = if var_w > 0.0 {
        let det = m.alpha * var_w - cov_yw * cov_yw;
        if !(det > 0.0) {
            return Err(Error::NonpositiveLogArgument {
                name: "det[(Y_other, W) covariance]",
                value: det,
            });
        }
        (cov_xy * cov_xy * var_w - 2.0 * cov_xy * cov_xw * cov_yw + cov_xw * cov_xw * m.alpha)
            / det
    } else {
        cov_xy * cov_xy / m.alpha
    };
    let residual = sx2 - reduction;
    if !(residual > 0.0) {
        return Err(Error::NonpositiveLogArgument {
            name: "E[var(X | Y_other, Xhat)]",
            value: residual,
        });
    }
    Ok(0.5 * (sx2 / residual).ln())
}

/// [`rate_outer_bound`] spread over the K agents.
pub fn per_user_outer_rate(params: &ModelParams, calib: &EstimatorCalibration) -> Result<f64> {
    Ok(rate_outer_bound(params, calib)? / params.k() as f64)
}

/// Scalings for which the target distortion stays reachable (`sigma_z2 >= 0`),
/// or `None` when no scaling reaches it. The reachable set is an interval
/// around the orthogonal scaling because the floor is quadratic in `b`.
pub fn feasible_scaling_window(params: &ModelParams, d_target: f64) -> Option<(f64, f64)> {
    let m = params.moments();
    let kf = params.k() as f64;
    let sx2 = params.sigma_x2();
    // floor(b) = c + 2 v b + w b^2 <= d_target
    let c = m.alpha - sx2;
    let v = (kf - 1.0) * (m.beta - params.h().sqrt() * sx2);
    let w = (kf - 1.0) * (m.alpha + (kf - 2.0) * m.beta);
    let disc = v * v - w * (c - d_target);
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    Some(((-v - root) / w, (-v + root) / w))
}

/// Inspection scan: evaluate the rate bound over a grid of feasible scalings
/// and return the best calibration found. Not used by any acceptance check;
/// the pinned orthogonal calibration is the reference behavior.
pub fn best_rate_bound_over_scaling(
    params: &ModelParams,
    d_target: f64,
    steps: usize,
) -> Option<(EstimatorCalibration, f64)> {
    let (lo, hi) = feasible_scaling_window(params, d_target)?;
    let mut best: Option<(EstimatorCalibration, f64)> = None;
    for i in 0..=steps {
        let b = lo + (hi - lo) * i as f64 / steps as f64;
        let Ok(calib) = calibrate_with_scaling(params, d_target, b) else {
            continue;
        };
        let Ok(bound) = rate_outer_bound(params, &calib) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, v)| bound > *v) {
            best = Some((calib, bound));
        }
    }
    best
}
