//! The symmetric measurement network: parameter validation, second-order
//! moments, explicit joint covariance assembly, and the fidelity extremes.
//!
//! Each of `K` agents holds an independent zero-mean Gaussian state with
//! variance `sigma_x2` and observes its own state plus every other state
//! scaled by `sqrt(h)`, corrupted by unit-variance measurement noise. The
//! noise variance is fixed at 1 by convention; rescale `sigma_x2` instead.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{f1, CovMatrix};

/// Validated configuration of the symmetric network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    k: usize,
    h: f64,
    sigma_x2: f64,
}

impl ModelParams {
    /// At least two agents, positive interference coefficient, positive state
    /// variance.
    pub fn new(k: usize, h: f64, sigma_x2: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter {
                name: "k",
                value: k as f64,
                reason: "at least two agents are required",
            });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter {
                name: "h",
                value: h,
                reason: "interference coefficient must be positive and finite",
            });
        }
        if !(sigma_x2 > 0.0) || !sigma_x2.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma_x2",
                value: sigma_x2,
                reason: "state variance must be positive and finite",
            });
        }
        Ok(Self { k, h, sigma_x2 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    /// Second-order statistics of the measurements.
    pub fn moments(&self) -> Moments {
        let kf = self.k as f64;
        Moments {
            alpha: self.sigma_x2 * (1.0 + self.h * (kf - 1.0)) + 1.0,
            beta: self.sigma_x2 * (2.0 * self.h.sqrt() + self.h * (kf - 2.0)),
        }
    }

    /// Index layout of the joint vector `(X_0, Y_0..Y_{K-1}, U_0..U_{K-1})`.
    pub fn layout(&self) -> JointLayout {
        JointLayout { k: self.k }
    }

    /// Joint covariance of the first agent's state, all measurements, and all
    /// test-channel outputs `U_a = Y_a + Q_a` with quantization-noise
    /// variance `sigma_q2 >= 0`.
    pub fn joint_covariance(&self, sigma_q2: f64) -> CovMatrix {
        debug_assert!(sigma_q2 >= 0.0 && sigma_q2.is_finite());
        let lay = self.layout();
        let m = self.moments();
        let sx2 = self.sigma_x2;
        let cross = self.h.sqrt() * sx2; // cov(X_0, Y_a) for a != 0
        let mut c = DMatrix::zeros(lay.dim(), lay.dim());
        c[(0, 0)] = sx2;
        for a in 0..self.k {
            let cx = if a == 0 { sx2 } else { cross };
            c[(0, lay.y(a))] = cx;
            c[(lay.y(a), 0)] = cx;
            // the quantization noise is independent of every state
            c[(0, lay.u(a))] = cx;
            c[(lay.u(a), 0)] = cx;
        }
        for a in 0..self.k {
            for b in 0..self.k {
                let yy = if a == b { m.alpha } else { m.beta };
                c[(lay.y(a), lay.y(b))] = yy;
                // cov(Y_a, U_b) = cov(Y_a, Y_b); the noises are independent
                c[(lay.y(a), lay.u(b))] = yy;
                c[(lay.u(b), lay.y(a))] = yy;
                let uu = if a == b { m.alpha + sigma_q2 } else { m.beta };
                c[(lay.u(a), lay.u(b))] = uu;
            }
        }
        CovMatrix::new(c).expect("model joint covariance is symmetric PSD by construction")
    }

    /// Worst-case fidelity: residual variance of the state given only the
    /// agent's own measurement, `sigma_x2 (1 - sigma_x2 / alpha)`.
    pub fn d_max(&self) -> f64 {
        let m = self.moments();
        self.sigma_x2 * (1.0 - self.sigma_x2 / m.alpha)
    }

    /// Best-case fidelity: residual variance of the state given every
    /// measurement in the network.
    pub fn d_min(&self) -> f64 {
        self.d_min_breakdown().value
    }

    /// The intermediate conditional-variance quantities behind `d_min`,
    /// exposed read-only so regressions can be localized.
    pub fn d_min_breakdown(&self) -> DminBreakdown {
        let m = self.moments();
        let kf = self.k as f64;
        let sx2 = self.sigma_x2;
        let c1 = sx2 - sx2 * sx2 / m.alpha;
        let c2 = sx2 * (self.h.sqrt() - m.beta / m.alpha);
        let c3 = m.alpha - m.beta * m.beta / m.alpha;
        let c4 = m.beta - m.beta * m.beta / m.alpha;
        let improvement =
            (kf - 1.0) * sx2 * (self.h.sqrt() - m.beta / m.alpha).powi(2) / (1.0 - sx2 / m.alpha);
        let value =
            self.d_max() * (1.0 - improvement / m.f1(kf, m.beta * m.beta / m.alpha));
        DminBreakdown {
            c1,
            c2,
            c3,
            c4,
            value,
        }
    }

    /// Nominal large-K expression `sigma_x2 (1 - (1 - sqrt(h))^2 / h)`.
    ///
    /// Returned as written even where it is nonpositive (`sqrt(h) <= 1/2`);
    /// callers interpret. Note this expression does not track the true
    /// limit of `d_min` except at `h = 1`; see [`Self::d_min_exact_limit`].
    pub fn d_min_limit(&self) -> f64 {
        let sh = self.h.sqrt();
        self.sigma_x2 * (1.0 - (1.0 - sh).powi(2) / self.h)
    }

    /// Exact large-K limit of `d_min`.
    ///
    /// With infinitely many agents the common state sum is learnable, so each
    /// residual measurement behaves as `(1 - sqrt(h)) X + Z`, giving
    /// `sigma_x2 / (sigma_x2 (1 - sqrt(h))^2 + 1)`.
    pub fn d_min_exact_limit(&self) -> f64 {
        let sh = self.h.sqrt();
        self.sigma_x2 / (self.sigma_x2 * (1.0 - sh).powi(2) + 1.0)
    }
}

/// Measurement second moments: `alpha = E[Y^2]`, `beta = E[Y_a Y_b]` for
/// distinct agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub alpha: f64,
    pub beta: f64,
}

impl Moments {
    /// [`f1`] with these moments substituted.
    pub fn f1(&self, k: f64, c: f64) -> f64 {
        f1(self.alpha, self.beta, k, c)
    }
}

/// Intermediates of the `d_min` derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DminBreakdown {
    /// Residual state variance given the own measurement (equals `d_max`).
    pub c1: f64,
    /// Cross term `sigma_x2 (sqrt(h) - beta/alpha)`.
    pub c2: f64,
    /// `alpha - beta^2 / alpha`.
    pub c3: f64,
    /// `beta - beta^2 / alpha`.
    pub c4: f64,
    pub value: f64,
}

/// Index layout of the joint vector `(X_0, Y_0..Y_{K-1}, U_0..U_{K-1})`.
/// Agents are indexed from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointLayout {
    k: usize,
}

impl JointLayout {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        1 + 2 * self.k
    }

    /// Index of the first agent's state.
    pub fn x(&self) -> usize {
        0
    }

    /// Index of agent `a`'s measurement.
    pub fn y(&self, a: usize) -> usize {
        debug_assert!(a < self.k);
        1 + a
    }

    /// Index of agent `a`'s test-channel output.
    pub fn u(&self, a: usize) -> usize {
        debug_assert!(a < self.k);
        1 + self.k + a
    }

    pub fn ys(&self) -> Vec<usize> {
        (0..self.k).map(|a| self.y(a)).collect()
    }

    pub fn us(&self) -> Vec<usize> {
        (0..self.k).map(|a| self.u(a)).collect()
    }
}
