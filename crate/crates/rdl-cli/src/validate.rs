//! The `validate` subcommand: oracle cross-validation suites with per-suite
//! tolerances, printed one line each.

use rdl_core::linalg::{conditional_covariance, gaussian_cond_entropy, gaussian_mi, IndexPartition, LN_2PI_E};
use rdl_core::mc::{simulate, McConfig};
use rdl_core::outer::{
    calibrate, calibrate_with_scaling, leakage_outer_bound, leakage_outer_bound_exact,
    min_reachable_distortion, per_user_outer_rate,
};
use rdl_core::protocols::{
    achievable_distortion, ceo_rates, ceo_sum_rate, compare_protocols, distributed_rates,
    distributed_sum_rate, encoding_equivalence_check, leakage_exact, leakage_formula,
    per_user_rate_limit,
};
use rdl_core::{ModelParams, Units};

const GRID_H: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];
const GRID_SX2: [f64; 3] = [0.5, 1.0, 2.0];
const GRID_SQ2: [f64; 4] = [0.0, 1.0, 6.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    Small,
    Full,
}

impl Grid {
    fn k_values(self) -> Vec<usize> {
        match self {
            Grid::Small => vec![2, 3, 5, 8, 13, 21, 34],
            Grid::Full => (2..=40).collect(),
        }
    }
}

pub struct SuiteResult {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

fn params(k: usize, h: f64, sigma_x2: f64) -> ModelParams {
    ModelParams::new(k, h, sigma_x2).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub struct Tolerances(Vec<(String, f64)>);

impl Tolerances {
    pub fn parse(overrides: &[String]) -> Result<Self, String> {
        let known = [
            "closed-form-distortion",
            "sum-rate-identities",
            "protocol-ordering",
            "encoding-equivalence",
            "large-k-limits",
            "degenerate-configuration",
            "leakage-coherence",
            "monte-carlo",
            "outer-bound-calibration",
        ];
        let mut parsed = Vec::new();
        for item in overrides {
            let Some((name, value)) = item.split_once('=') else {
                return Err(format!(
                    "invalid value for --tolerance: '{item}' (expected suite=value)"
                ));
            };
            if !known.contains(&name) {
                return Err(format!(
                    "invalid value for --tolerance: unknown suite '{name}' (known: {})",
                    known.join(", ")
                ));
            }
            let value: f64 = value
                .parse()
                .map_err(|_| format!("invalid value for --tolerance: '{item}'"))?;
            parsed.push((name.to_string(), value));
        }
        Ok(Self(parsed))
    }

    fn get(&self, name: &str, default: f64) -> f64 {
        self.0
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .unwrap_or(default)
    }
}

pub fn run_all(grid: Grid, mc_samples: usize, seed: u64, tol: &Tolerances) -> Vec<SuiteResult> {
    vec![
        closed_form_distortion(grid, tol),
        sum_rate_identities(grid, tol),
        protocol_ordering(grid, tol),
        encoding_equivalence(tol),
        large_k_limits(tol),
        degenerate_configuration(tol),
        leakage_coherence(grid, tol),
        monte_carlo(mc_samples, seed, tol),
        outer_bound_calibration(tol),
    ]
}

fn closed_form_distortion(grid: Grid, tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("closed-form-distortion", 1e-9);
    let mut worst = 0.0_f64;
    for &k in &grid.k_values() {
        for h in GRID_H {
            for sx2 in GRID_SX2 {
                let p = params(k, h, sx2);
                let lay = p.layout();
                let base = p.joint_covariance(0.0);
                let dmax =
                    conditional_covariance(&base, &[lay.x()], &[lay.y(0)]).unwrap().entries()
                        [(0, 0)];
                let dmin =
                    conditional_covariance(&base, &[lay.x()], &lay.ys()).unwrap().entries()[(0, 0)];
                worst = worst.max(rel_err(p.d_max(), dmax));
                worst = worst.max(rel_err(p.d_min(), dmin));
                for sq2 in GRID_SQ2 {
                    let joint = p.joint_covariance(sq2);
                    let mut given = vec![lay.y(0)];
                    given.extend((1..k).map(|a| lay.u(a)));
                    let oracle =
                        conditional_covariance(&joint, &[lay.x()], &given).unwrap().entries()
                            [(0, 0)];
                    worst = worst.max(rel_err(achievable_distortion(&p, sq2), oracle));
                }
            }
        }
    }
    SuiteResult {
        name: "closed-form-distortion",
        worst,
        tolerance,
        pass: worst <= tolerance,
        note: "d_min, d_max, achievable distortion vs conditioning".to_string(),
    }
}

fn sum_rate_identities(grid: Grid, tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("sum-rate-identities", 1e-9);
    let mut worst = 0.0_f64;
    for &k in &grid.k_values() {
        for h in GRID_H {
            for sx2 in GRID_SX2 {
                let p = params(k, h, sx2);
                let lay = p.layout();
                for sq2 in [1.0, 6.0, 100.0] {
                    let joint = p.joint_covariance(sq2);
                    let dist_closed = distributed_sum_rate(&p, sq2).unwrap();
                    let ceo_closed = ceo_sum_rate(&p, sq2).unwrap();
                    let others: Vec<usize> = (1..k).map(|a| lay.u(a)).collect();
                    let chain = gaussian_cond_entropy(&joint, &others, &[lay.y(0)]).unwrap()
                        + gaussian_cond_entropy(&joint, &[lay.u(0)], &[lay.y(1)]).unwrap()
                        - k as f64 / 2.0 * (LN_2PI_E + sq2.ln());
                    let ceo_chain = gaussian_cond_entropy(&joint, &lay.us(), &[]).unwrap()
                        - k as f64 / 2.0 * (LN_2PI_E + sq2.ln());
                    worst = worst.max(rel_err(dist_closed, chain));
                    worst = worst.max(rel_err(ceo_closed, ceo_chain));
                    let s1: f64 = distributed_rates(&p, sq2).unwrap().iter().sum();
                    let s2: f64 = ceo_rates(&p, sq2).unwrap().iter().sum();
                    worst = worst.max(rel_err(dist_closed, s1));
                    worst = worst.max(rel_err(ceo_closed, s2));
                }
            }
        }
    }
    SuiteResult {
        name: "sum-rate-identities",
        worst,
        tolerance,
        pass: worst <= tolerance,
        note: "entropy-chain and per-agent-sum equalities".to_string(),
    }
}

fn protocol_ordering(grid: Grid, tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("protocol-ordering", 1e-3);
    let mut min_gap = f64::INFINITY;
    for &k in &grid.k_values() {
        for h in GRID_H {
            for sx2 in GRID_SX2 {
                for sq2 in [1.0, 6.0, 100.0] {
                    let c = compare_protocols(&params(k, h, sx2), sq2).unwrap();
                    min_gap = min_gap.min(c.gap);
                }
            }
        }
    }
    let big = compare_protocols(&params(100_000, 0.5, 1.0), 6.0).unwrap();
    let per_user_bits = Units::Bits.from_nats(big.per_user_gap);
    SuiteResult {
        name: "protocol-ordering",
        worst: per_user_bits,
        tolerance,
        pass: min_gap > 0.0 && per_user_bits <= tolerance,
        note: format!("min centralized-vs-distributed gap {min_gap:.3e} nats; per-user gap at K=1e5 reported as the measured value"),
    }
}

fn encoding_equivalence(tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("encoding-equivalence", 1e-9);
    let mut worst = 0.0_f64;
    for k in [2usize, 3, 5, 8] {
        for (h, sx2, sq2) in [(0.5, 1.0, 6.0), (0.25, 2.0, 1.0), (2.0, 1.0, 6.0)] {
            let r = encoding_equivalence_check(&params(k, h, sx2), sq2).unwrap();
            worst = worst.max(r.max_relative_mismatch());
        }
    }
    SuiteResult {
        name: "encoding-equivalence",
        worst,
        tolerance,
        pass: worst <= tolerance,
        note: "progressive vs local rates and distortion, coefficients {0, 0.5, 1}".to_string(),
    }
}

fn large_k_limits(tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("large-k-limits", 1e-2);
    let p = params(10_000, 0.5, 1.0);
    let d_gap = rel_err(p.d_min(), p.d_min_exact_limit());
    let per_user = Units::Bits.from_nats(distributed_sum_rate(&p, 6.0).unwrap()) / 10_000.0;
    let lim = Units::Bits.from_nats(per_user_rate_limit(0.5, 1.0, 6.0));
    let r_gap = (per_user - lim).abs();
    SuiteResult {
        name: "large-k-limits",
        worst: d_gap,
        tolerance,
        pass: d_gap <= tolerance && r_gap < 2e-3,
        note: format!(
            "d_min(K=1e4) vs exact limit; per-user rate gap {r_gap:.3e} bits (< 2e-3). \
             The nominal large-K distortion expression sits {:.1}% away and is reported, \
             not asserted",
            100.0 * rel_err(p.d_min(), p.d_min_limit())
        ),
    }
}

fn degenerate_configuration(tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("degenerate-configuration", 1e-12);
    let p = params(3, 0.25, 1.0);
    let spread = (p.d_min() - p.d_max()).abs();
    let off = (p.d_min() - 0.6).abs();
    let joint = p.joint_covariance(0.0);
    let oracle = conditional_covariance(&joint, &[0], &p.layout().ys()).unwrap().entries()[(0, 0)];
    let worst = spread.max(off).max((oracle - 0.6).abs());
    SuiteResult {
        name: "degenerate-configuration",
        worst,
        tolerance,
        pass: worst <= tolerance,
        note: "d_min = d_max = 0.6 where cooperation cannot help".to_string(),
    }
}

fn leakage_coherence(grid: Grid, tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("leakage-coherence", 1e-6);
    let mut worst_formula = 0.0_f64;
    let mut worst_exact = 0.0_f64;
    for &k in &grid.k_values() {
        for h in GRID_H {
            for sx2 in GRID_SX2 {
                let p = params(k, h, sx2);
                let reference = 0.5 * (sx2 / p.d_min()).ln();
                worst_exact = worst_exact.max(rel_err(leakage_exact(&p, 0.0), reference));
                worst_formula = worst_formula.max(rel_err(leakage_formula(&p), reference));
            }
        }
    }
    SuiteResult {
        name: "leakage-coherence",
        worst: worst_formula,
        tolerance,
        pass: worst_formula <= tolerance && worst_exact <= 1e-10,
        note: format!("zero-noise exact leakage within {worst_exact:.3e} of 0.5 ln(sigma_x2/d_min)"),
    }
}

fn monte_carlo(mc_samples: usize, seed: u64, tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("monte-carlo", 1.0);
    let p = params(5, 0.5, 1.0);
    let cfg = match McConfig::new(mc_samples, seed, 1) {
        Ok(c) => c,
        Err(e) => {
            return SuiteResult {
                name: "monte-carlo",
                worst: f64::INFINITY,
                tolerance,
                pass: false,
                note: format!("configuration rejected: {e}"),
            }
        }
    };
    let est = match simulate(&p, 6.0, &cfg) {
        Ok(e) => e,
        Err(e) => {
            return SuiteResult {
                name: "monte-carlo",
                worst: f64::INFINITY,
                tolerance,
                pass: false,
                note: format!("under-sampled: {e}"),
            }
        }
    };
    let d_truth = achievable_distortion(&p, 6.0);
    let d_score = (est.d_hat - d_truth).abs() / (3.0 * est.d_stderr).max(0.01 * d_truth);
    let l_truth = leakage_exact(&p, 6.0);
    let l_score =
        (est.leakage_hat - l_truth).abs() / (3.0 * est.leakage_stderr).max(0.02 * l_truth);
    let worst = d_score.max(l_score);
    SuiteResult {
        name: "monte-carlo",
        worst,
        tolerance,
        pass: worst <= tolerance,
        note: format!(
            "n={mc_samples} seed={seed}: deviations as fractions of max(3 stderr, 1-2%); \
             d_hat {:.6} vs {:.6}",
            est.d_hat, d_truth
        ),
    }
}

fn outer_bound_calibration(tol: &Tolerances) -> SuiteResult {
    let tolerance = tol.get("outer-bound-calibration", 1e-10);
    let mut worst = 0.0_f64;
    let mut notes: Vec<String> = Vec::new();

    // calibration round-trip at a reachable target
    let p = params(30, 0.1, 2.0);
    let d = 0.5 * (p.d_min() + p.d_max());
    let calib = calibrate(&p, d).unwrap();
    let m = p.moments();
    let kf = p.k() as f64;
    let sx2 = p.sigma_x2();
    let sh = p.h().sqrt();
    // independent expansion of the estimator's mean squared error
    let mse = sx2 - 2.0 * (sx2 + calib.b * (kf - 1.0) * sh * sx2)
        + m.alpha
        + 2.0 * calib.b * (kf - 1.0) * m.beta
        + calib.b * calib.b * (kf - 1.0) * (m.alpha + (kf - 2.0) * m.beta)
        + calib.sigma_z2;
    worst = worst.max(rel_err(mse, d));
    // orthogonality residual against a representative other measurement
    let resid = sh * sx2 - m.beta - calib.b * (m.alpha + (kf - 2.0) * m.beta);
    worst = worst.max(resid.abs());

    // zero-scaling reduction equals the pairwise information
    let p0 = params(4, 0.1, 2.0);
    let floor0 = min_reachable_distortion(&p0, 0.0);
    let calib0 = calibrate_with_scaling(&p0, floor0 + 0.5, 0.0).unwrap();
    let closed = leakage_outer_bound(&p0, &calib0).unwrap();
    let joint0 = p0.joint_covariance(0.0);
    let lay0 = p0.layout();
    let oracle = gaussian_mi(
        &joint0,
        &IndexPartition::pair(vec![lay0.x()], vec![lay0.y(1)]).unwrap(),
    )
    .unwrap();
    worst = worst.max(rel_err(closed, oracle));

    // per-user decay at a configuration where midpoints stay reachable
    let mut decay_ok = true;
    let mut last = f64::INFINITY;
    for k in [8usize, 16, 32, 64] {
        let p = params(k, 0.1, 5.0);
        let d = 0.5 * (p.d_min() + p.d_max());
        let v = calibrate(&p, d)
            .and_then(|c| per_user_outer_rate(&p, &c))
            .unwrap();
        if v >= last {
            decay_ok = false;
        }
        last = v;
    }
    if !decay_ok {
        notes.push("per-user bound failed to decay".to_string());
    }

    // report, not assert: the closed-form and exact leakage bounds differ
    let gap = (leakage_outer_bound(&p, &calib).unwrap()
        - leakage_outer_bound_exact(&p, &calib).unwrap())
    .abs();
    notes.push(format!(
        "closed-form vs exact leakage bound differ by {gap:.3e} nats at the reference point (reported, not asserted)"
    ));

    SuiteResult {
        name: "outer-bound-calibration",
        worst,
        tolerance,
        pass: worst <= tolerance && decay_ok,
        note: notes.join("; "),
    }
}
