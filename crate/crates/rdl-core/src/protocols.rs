//! Achievability layer: distortion, per-agent rates, sum rates, and leakage
//! for the quantize-and-broadcast protocols, plus the equivalence and
//! ordering checks between them.
//!
//! Two protocols are covered. In the distributed protocol every agent
//! broadcasts to the others and rates exploit the side information (the
//! correlated measurements) at the receivers. In the centralized protocol the
//! agents broadcast as if to a virtual fusion center and exploit only prior
//! transmissions. Rates are in nats throughout; [`RdlPoint`] converts on
//! construction.

use crate::error::{Error, Result};
use crate::linalg::{gaussian_mi, CovMatrix, IndexPartition};
use crate::model::{JointLayout, ModelParams};
use crate::Units;

/// Who the broadcasts are aimed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    /// Agents broadcast to one another and decode with local side information.
    Distributed,
    /// Agents broadcast as if to a virtual central decoder.
    Centralized,
}

/// What each agent feeds its encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingKind {
    /// Only the agent's own measurements.
    Local,
    /// Own measurements combined with previously received broadcasts.
    Progressive,
}

fn ensure_quantizer_noise(sigma_q2: f64) -> Result<()> {
    if sigma_q2 == 0.0 {
        return Err(Error::ZeroQuantizerNoise);
    }
    if !(sigma_q2 > 0.0) || !sigma_q2.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma_q2",
            value: sigma_q2,
            reason: "quantization-noise variance must be positive and finite",
        });
    }
    Ok(())
}

/// The improvement numerator shared by `d_min` and the achievable distortion:
/// `(K-1) sigma_x2 (sqrt(h) - beta/alpha)^2 / (1 - sigma_x2/alpha)`.
fn improvement_weight(params: &ModelParams) -> f64 {
    let m = params.moments();
    let kf = params.k() as f64;
    (kf - 1.0) * params.sigma_x2() * (params.h().sqrt() - m.beta / m.alpha).powi(2)
        / (1.0 - params.sigma_x2() / m.alpha)
}

/// Distortion achieved when every agent quantizes through a test channel of
/// noise variance `sigma_q2` and each decoder uses its own measurement plus
/// the other agents' quantized broadcasts.
///
/// Equals `d_min` at `sigma_q2 = 0`, tends to `d_max` as `sigma_q2` grows,
/// and is strictly increasing in between whenever `d_min < d_max`.
pub fn achievable_distortion(params: &ModelParams, sigma_q2: f64) -> f64 {
    debug_assert!(sigma_q2 >= 0.0);
    let m = params.moments();
    let kf = params.k() as f64;
    let f1 = m.f1(kf, m.beta * m.beta / m.alpha);
    params.d_max() * (1.0 - improvement_weight(params) / (f1 + sigma_q2))
}

/// Invert [`achievable_distortion`]: the quantization-noise variance that
/// attains `d_target`.
///
/// `d_target = d_max` maps to `f64::INFINITY` (the distortion is approached,
/// never attained, and in the degenerate `d_min = d_max` case any noise
/// level qualifies). Targets outside `[d_min, d_max]` are infeasible.
pub fn sigma_q2_for_distortion(params: &ModelParams, d_target: f64) -> Result<f64> {
    let d_min = params.d_min();
    let d_max = params.d_max();
    if !(d_target >= d_min - 1e-12 * d_min) || !(d_target <= d_max + 1e-12 * d_max) {
        return Err(Error::InfeasibleDistortion {
            target: d_target,
            d_min,
            d_max,
        });
    }
    if d_target >= d_max {
        return Ok(f64::INFINITY);
    }
    let m = params.moments();
    let kf = params.k() as f64;
    let f1 = m.f1(kf, m.beta * m.beta / m.alpha);
    let sq2 = improvement_weight(params) * d_max / (d_max - d_target) - f1;
    Ok(sq2.max(0.0))
}

fn mi_between(joint: &CovMatrix, left: Vec<usize>, right: Vec<usize>) -> Result<f64> {
    gaussian_mi(joint, &IndexPartition::pair(left, right)?)
}

/// Minimal broadcast rates (nats) for the distributed protocol under local
/// encoding, in the fixed order `0, 1, ..., K-1`.
///
/// Agent 0 pays the marginal rate less the side information at the weakest
/// receiver; each later agent subtracts what the prior broadcasts already
/// reveal alongside that receiver's measurement.
pub fn distributed_rates(params: &ModelParams, sigma_q2: f64) -> Result<Vec<f64>> {
    ensure_quantizer_noise(sigma_q2)?;
    let joint = params.joint_covariance(sigma_q2);
    distributed_rates_from_joint(&joint, params.k())
}

/// Plug-in form of [`distributed_rates`] on any covariance over the standard
/// `(X_0, Y, U)` layout; used for sample-covariance evaluation as well.
pub fn distributed_rates_from_joint(joint: &CovMatrix, k: usize) -> Result<Vec<f64>> {
    let order: Vec<usize> = (0..k).collect();
    distributed_rates_in_order(joint, k, &order)
}

/// Broadcast order is irrelevant for the sum by symmetry; individual rates
/// permute. Kept order-generic so tests can assert exactly that.
fn distributed_rates_in_order(joint: &CovMatrix, k: usize, order: &[usize]) -> Result<Vec<f64>> {
    assert_eq!(order.len(), k);
    let lay = JointLayout::new(k);
    let mut rates = Vec::with_capacity(k);
    for (pos, &agent) in order.iter().enumerate() {
        let r = if pos == 0 {
            // any other agent is the binding receiver, by symmetry
            let other = order[1];
            mi_between(joint, vec![lay.u(agent)], vec![lay.y(agent)])?
                - mi_between(joint, vec![lay.u(agent)], vec![lay.y(other)])?
        } else {
            let first = order[0];
            let mut side = vec![lay.y(first)];
            side.extend(order[..pos].iter().map(|&a| lay.u(a)));
            mi_between(joint, vec![lay.u(agent)], vec![lay.y(agent)])?
                - mi_between(joint, vec![lay.u(agent)], side)?
        };
        rates.push(r.max(0.0));
    }
    Ok(rates)
}

/// Closed-form sum of [`distributed_rates`] (nats), O(1) in `K`.
pub fn distributed_sum_rate(params: &ModelParams, sigma_q2: f64) -> Result<f64> {
    ensure_quantizer_noise(sigma_q2)?;
    let m = params.moments();
    let kf = params.k() as f64;
    let own = m.alpha + sigma_q2 - m.beta;
    let t1 = kf / 2.0 * (own / sigma_q2).ln();
    let t2 = 0.5 * ((m.alpha + sigma_q2 - m.beta * m.beta / m.alpha) / own).ln();
    let t3 = 0.5 * ((m.f1(kf, m.beta * m.beta / m.alpha) + sigma_q2) / own).ln();
    Ok(t1 + t2 + t3)
}

/// Minimal broadcast rates (nats) toward a virtual central decoder: no side
/// information, only prior transmissions are subtracted.
pub fn ceo_rates(params: &ModelParams, sigma_q2: f64) -> Result<Vec<f64>> {
    ensure_quantizer_noise(sigma_q2)?;
    let joint = params.joint_covariance(sigma_q2);
    let lay = params.layout();
    let k = params.k();
    let mut rates = Vec::with_capacity(k);
    rates.push(mi_between(&joint, vec![lay.u(0)], vec![lay.y(0)])?);
    for a in 1..k {
        let prior: Vec<usize> = (0..a).map(|b| lay.u(b)).collect();
        let r = mi_between(&joint, vec![lay.u(a)], vec![lay.y(a)])?
            - mi_between(&joint, vec![lay.u(a)], prior)?;
        rates.push(r.max(0.0));
    }
    Ok(rates)
}

/// Closed-form sum of [`ceo_rates`] (nats), O(1) in `K`.
pub fn ceo_sum_rate(params: &ModelParams, sigma_q2: f64) -> Result<f64> {
    ensure_quantizer_noise(sigma_q2)?;
    let m = params.moments();
    let kf = params.k() as f64;
    let own = m.alpha + sigma_q2 - m.beta;
    let t1 = kf / 2.0 * (own / sigma_q2).ln();
    let t2 = 0.5 * ((m.alpha + sigma_q2 + (kf - 1.0) * m.beta) / own).ln();
    Ok(t1 + t2)
}

/// Common large-K per-agent rate of both protocols (nats). Uses the exact
/// K-independent value `alpha - beta = sigma_x2 (1 - sqrt(h))^2 + 1`.
pub fn per_user_rate_limit(h: f64, sigma_x2: f64, sigma_q2: f64) -> f64 {
    debug_assert!(sigma_q2 > 0.0);
    let diff = sigma_x2 * (1.0 - h.sqrt()).powi(2) + 1.0;
    0.5 * ((diff + sigma_q2) / sigma_q2).ln()
}

/// Closed-form leakage expression (nats). Carries no quantization-noise
/// dependence; numerically it coincides with `0.5 ln(sigma_x2 / d_min)`, the
/// zero-noise evaluation of [`leakage_exact`]. Both are reported side by side
/// rather than merged.
pub fn leakage_formula(params: &ModelParams) -> f64 {
    let m = params.moments();
    let kf = params.k() as f64;
    let sx2 = params.sigma_x2();
    let sh = params.h().sqrt();
    let c5 = (m.beta - sh * sx2).powi(2) / (m.alpha - sx2) + params.h() * sx2;
    0.5 * ((m.alpha * m.f1(kf, m.beta * m.beta / m.alpha)) / ((m.alpha - sx2) * m.f1(kf, c5)))
        .ln()
}

/// Exact leakage of agent 0's state at agent 1 (nats): the mutual information
/// between the state and everything agent 1 ends up holding, `I(X_0; Y_1,
/// U_0, U_2, ..., U_{K-1})`.
///
/// Agent 1's own test-channel output is information-free given its
/// measurement and is omitted, which also keeps the evaluation nonsingular at
/// `sigma_q2 = 0`. Monotone nonincreasing in `sigma_q2`.
pub fn leakage_exact(params: &ModelParams, sigma_q2: f64) -> f64 {
    debug_assert!(sigma_q2 >= 0.0 && sigma_q2.is_finite());
    let joint = params.joint_covariance(sigma_q2);
    let lay = params.layout();
    let mut side = vec![lay.y(1), lay.u(0)];
    side.extend((2..params.k()).map(|a| lay.u(a)));
    mi_between(&joint, vec![lay.x()], side)
        .expect("leakage conditioning set is nonsingular by construction")
}

/// Sum-rate comparison between the two protocols at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolComparison {
    pub dist_sum: f64,
    pub ceo_sum: f64,
    pub gap: f64,
    pub per_user_gap: f64,
}

/// Evaluate both closed-form sum rates (nats). The centralized sum is the
/// larger one at every positive noise level; the per-user gap closes as
/// `log(K)/K`.
pub fn compare_protocols(params: &ModelParams, sigma_q2: f64) -> Result<ProtocolComparison> {
    let dist_sum = distributed_sum_rate(params, sigma_q2)?;
    let ceo_sum = ceo_sum_rate(params, sigma_q2)?;
    let gap = ceo_sum - dist_sum;
    Ok(ProtocolComparison {
        dist_sum,
        ceo_sum,
        gap,
        per_user_gap: gap / params.k() as f64,
    })
}

/// Coefficients swept by [`encoding_equivalence_check`]. The construction is
/// claimed equivalent for any choice, so the check sweeps a fixed set instead
/// of picking one.
pub const PROGRESSIVE_COEFFICIENTS: [f64; 3] = [0.0, 0.5, 1.0];

/// One progressive-vs-local rate comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub agent: usize,
    pub coefficient: f64,
    pub progressive: f64,
    pub local: f64,
}

impl RatePair {
    pub fn rate(&self, encoding: EncodingKind) -> f64 {
        match encoding {
            EncodingKind::Local => self.local,
            EncodingKind::Progressive => self.progressive,
        }
    }
}

/// One progressive-vs-local distortion comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionPair {
    pub coefficient: f64,
    pub progressive: f64,
    pub local: f64,
}

impl DistortionPair {
    pub fn distortion(&self, encoding: EncodingKind) -> f64 {
        match encoding {
            EncodingKind::Local => self.local,
            EncodingKind::Progressive => self.progressive,
        }
    }
}

/// Paired progressive and local evaluations; equal pairs are the assertable
/// content of the encoding-equivalence claims.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingEquivalenceReport {
    pub rates: Vec<RatePair>,
    pub distortions: Vec<DistortionPair>,
}

impl EncodingEquivalenceReport {
    /// Worst relative mismatch across all rate and distortion pairs.
    pub fn max_relative_mismatch(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-30);
        let rates = self
            .rates
            .iter()
            .map(|p| rel(p.rate(EncodingKind::Progressive), p.rate(EncodingKind::Local)))
            .fold(0.0_f64, f64::max);
        let dists = self
            .distortions
            .iter()
            .map(|p| {
                rel(
                    p.distortion(EncodingKind::Progressive),
                    p.distortion(EncodingKind::Local),
                )
            })
            .fold(0.0_f64, f64::max);
        rates.max(dists)
    }
}

/// Compare the progressive construction (each broadcast mixes in prior
/// broadcasts with a common coefficient) against local encoding, sweeping
/// [`PROGRESSIVE_COEFFICIENTS`].
pub fn encoding_equivalence_check(
    params: &ModelParams,
    sigma_q2: f64,
) -> Result<EncodingEquivalenceReport> {
    encoding_equivalence_with(params, sigma_q2, &PROGRESSIVE_COEFFICIENTS)
}

/// [`encoding_equivalence_check`] with an explicit coefficient set.
pub fn encoding_equivalence_with(
    params: &ModelParams,
    sigma_q2: f64,
    coefficients: &[f64],
) -> Result<EncodingEquivalenceReport> {
    use crate::linalg::conditional_covariance;
    use nalgebra::DMatrix;

    ensure_quantizer_noise(sigma_q2)?;
    let k = params.k();
    let lay = params.layout();
    let joint = params.joint_covariance(sigma_q2);
    let local_rates = distributed_rates_from_joint(&joint, k)?;
    let mut cond_set = vec![lay.y(0)];
    cond_set.extend(lay.us());
    let local_distortion = conditional_covariance(&joint, &[lay.x()], &cond_set)?.entries()[(0, 0)];

    let mut rates = Vec::new();
    let mut distortions = Vec::new();
    for &a in coefficients {
        // The progressive outputs solve T Utilde = U with T unit lower
        // triangular carrying -a below the diagonal, so Utilde = T^{-1} U is
        // an invertible linear image of the local outputs.
        let mut t = DMatrix::identity(k, k);
        for i in 0..k {
            for j in 0..i {
                t[(i, j)] = -a;
            }
        }
        let t_inv = t
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .expect("unit lower-triangular system is invertible");
        let mut map = DMatrix::identity(lay.dim(), lay.dim());
        for i in 0..k {
            for j in 0..k {
                map[(lay.u(i), lay.u(j))] = t_inv[(i, j)];
            }
        }
        let mut prog = &map * joint.entries() * map.transpose();
        for i in 0..prog.nrows() {
            for j in 0..i {
                let v = 0.5 * (prog[(i, j)] + prog[(j, i)]);
                prog[(i, j)] = v;
                prog[(j, i)] = v;
            }
        }
        let prog = CovMatrix::new(prog).expect("congruence preserves symmetry and PSD");

        for (agent, &local) in local_rates.iter().enumerate() {
            let progressive = if agent == 0 {
                mi_between(&prog, vec![lay.u(0)], vec![lay.y(0)])?
                    - mi_between(&prog, vec![lay.u(0)], vec![lay.y(1)])?
            } else {
                let prior: Vec<usize> = (0..agent).map(|b| lay.u(b)).collect();
                let own = gaussian_mi(
                    &prog,
                    &IndexPartition::new(vec![lay.u(agent)], vec![lay.y(agent)], prior.clone())?,
                )?;
                let leaked = gaussian_mi(
                    &prog,
                    &IndexPartition::new(vec![lay.u(agent)], vec![lay.y(0)], prior)?,
                )?;
                own - leaked
            };
            rates.push(RatePair {
                agent,
                coefficient: a,
                progressive,
                local,
            });
        }
        let prog_distortion =
            conditional_covariance(&prog, &[lay.x()], &cond_set)?.entries()[(0, 0)];
        distortions.push(DistortionPair {
            coefficient: a,
            progressive: prog_distortion,
            local: local_distortion,
        });
    }
    Ok(EncodingEquivalenceReport { rates, distortions })
}

/// One evaluated operating point of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RdlPoint {
    pub params: ModelParams,
    pub protocol: ProtocolKind,
    pub sigma_q2: f64,
    pub rates_per_agent: Vec<f64>,
    pub sum_rate: f64,
    pub per_user_rate: f64,
    pub distortion: f64,
    pub leakage_formula: f64,
    pub leakage_exact: f64,
    pub units: Units,
}

impl RdlPoint {
    /// Evaluate every quantity at one `(params, sigma_q2)` point, converting
    /// information quantities into `units`.
    pub fn evaluate(
        protocol: ProtocolKind,
        params: &ModelParams,
        sigma_q2: f64,
        units: Units,
    ) -> Result<Self> {
        let rates_nats = match protocol {
            ProtocolKind::Distributed => distributed_rates(params, sigma_q2)?,
            ProtocolKind::Centralized => ceo_rates(params, sigma_q2)?,
        };
        let sum_nats = match protocol {
            ProtocolKind::Distributed => distributed_sum_rate(params, sigma_q2)?,
            ProtocolKind::Centralized => ceo_sum_rate(params, sigma_q2)?,
        };
        let mi_sum: f64 = rates_nats.iter().sum();
        assert!(
            (mi_sum - sum_nats).abs() <= 1e-9 * sum_nats.abs().max(1e-12),
            "per-agent rates and closed-form sum disagree: {mi_sum} vs {sum_nats}"
        );
        let distortion = achievable_distortion(params, sigma_q2);
        assert!(
            distortion >= params.d_min() - 1e-12 && distortion <= params.d_max() + 1e-12,
            "achievable distortion escaped its range"
        );
        Ok(Self {
            params: *params,
            protocol,
            sigma_q2,
            rates_per_agent: rates_nats.iter().map(|&r| units.from_nats(r)).collect(),
            sum_rate: units.from_nats(sum_nats),
            per_user_rate: units.from_nats(sum_nats / params.k() as f64),
            distortion,
            leakage_formula: units.from_nats(leakage_formula(params)),
            leakage_exact: units.from_nats(leakage_exact(params, sigma_q2)),
            units,
        })
    }
}
