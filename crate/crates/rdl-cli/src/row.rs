//! CSV row assembly: one evaluated operating point per row, fixed column
//! order, `NA` for anything that is undefined or infeasible at that point.

use rdl_core::outer::{calibrate, leakage_outer_bound, rate_outer_bound};
use rdl_core::protocols::{
    achievable_distortion, ceo_sum_rate, distributed_sum_rate, leakage_exact, leakage_formula,
    per_user_rate_limit,
};
use rdl_core::{ModelParams, Units};

pub const HEADER: &str = "k,h,sigma_x2,sigma_q2,units,alpha,beta,d_min,d_max,d_achievable,\
r_sum_dist,r_per_user_dist,r_sum_ceo,r_per_user_ceo,r_per_user_limit,\
leakage_formula,leakage_exact,r1_outer,leakage_outer";

#[derive(Debug, Clone)]
pub struct Row {
    pub k: usize,
    pub h: f64,
    pub sigma_x2: f64,
    /// `None` renders `NA` (the infinite-noise sentinel from inverting a
    /// distortion target equal to the worst case).
    pub sigma_q2: Option<f64>,
    pub units: Units,
    pub alpha: f64,
    pub beta: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub d_achievable: f64,
    pub r_sum_dist: Option<f64>,
    pub r_per_user_dist: Option<f64>,
    pub r_sum_ceo: Option<f64>,
    pub r_per_user_ceo: Option<f64>,
    pub r_per_user_limit: Option<f64>,
    pub leakage_formula: f64,
    pub leakage_exact: Option<f64>,
    pub r1_outer: Option<f64>,
    pub leakage_outer: Option<f64>,
}

/// Which optional column families to compute.
#[derive(Debug, Clone, Copy)]
pub struct RowOptions {
    pub include_outer: bool,
    pub include_exact_leakage: bool,
}

impl Default for RowOptions {
    fn default() -> Self {
        Self {
            include_outer: true,
            include_exact_leakage: true,
        }
    }
}

impl Row {
    /// Evaluate one operating point. `sigma_q2` may be `f64::INFINITY` (the
    /// sentinel for a worst-case distortion target), in which case every
    /// noise-dependent column is `NA`.
    ///
    /// Rates diverge at `sigma_q2 = 0`, so the rate columns are `NA` there
    /// while distortion and leakage stay defined.
    pub fn evaluate(params: &ModelParams, sigma_q2: f64, units: Units, opts: RowOptions) -> Row {
        let m = params.moments();
        let finite = sigma_q2.is_finite();
        let d_achievable = if finite {
            achievable_distortion(params, sigma_q2)
        } else {
            params.d_max()
        };

        let rates_defined = finite && sigma_q2 > 0.0;
        let (r_sum_dist, r_sum_ceo, r_per_user_limit) = if rates_defined {
            (
                Some(distributed_sum_rate(params, sigma_q2).expect("positive noise")),
                Some(ceo_sum_rate(params, sigma_q2).expect("positive noise")),
                Some(per_user_rate_limit(params.h(), params.sigma_x2(), sigma_q2)),
            )
        } else {
            (None, None, None)
        };
        let kf = params.k() as f64;

        let leak_exact = if finite && opts.include_exact_leakage {
            Some(leakage_exact(params, sigma_q2))
        } else {
            None
        };

        let (r1_outer, leakage_outer) = if opts.include_outer {
            match calibrate(params, d_achievable) {
                Ok(calib) => (
                    rate_outer_bound(params, &calib).ok(),
                    leakage_outer_bound(params, &calib).ok(),
                ),
                Err(_) => (None, None),
            }
        } else {
            (None, None)
        };

        let conv = |v: Option<f64>| v.map(|x| units.from_nats(x));
        Row {
            k: params.k(),
            h: params.h(),
            sigma_x2: params.sigma_x2(),
            sigma_q2: finite.then_some(sigma_q2),
            units,
            alpha: m.alpha,
            beta: m.beta,
            d_min: params.d_min(),
            d_max: params.d_max(),
            d_achievable,
            r_sum_dist: conv(r_sum_dist),
            r_per_user_dist: conv(r_sum_dist.map(|v| v / kf)),
            r_sum_ceo: conv(r_sum_ceo),
            r_per_user_ceo: conv(r_sum_ceo.map(|v| v / kf)),
            r_per_user_limit: conv(r_per_user_limit),
            leakage_formula: units.from_nats(leakage_formula(params)),
            leakage_exact: conv(leak_exact),
            r1_outer: conv(r1_outer),
            leakage_outer: conv(leakage_outer),
        }
    }

    pub fn to_csv(&self) -> String {
        let cells: Vec<String> = vec![
            self.k.to_string(),
            fmt(self.h),
            fmt(self.sigma_x2),
            fmt_opt(self.sigma_q2),
            self.units.label().to_string(),
            fmt(self.alpha),
            fmt(self.beta),
            fmt(self.d_min),
            fmt(self.d_max),
            fmt(self.d_achievable),
            fmt_opt(self.r_sum_dist),
            fmt_opt(self.r_per_user_dist),
            fmt_opt(self.r_sum_ceo),
            fmt_opt(self.r_per_user_ceo),
            fmt_opt(self.r_per_user_limit),
            fmt(self.leakage_formula),
            fmt_opt(self.leakage_exact),
            fmt_opt(self.r1_outer),
            fmt_opt(self.leakage_outer),
        ];
        cells.join(",")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, value) in HEADER.split(',').zip(self.to_csv().split(',')) {
            out.push_str(name);
            out.push_str(": ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }
}

/// At least 12 significant digits; non-finite values render as `NA`.
fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "NA".to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt(x),
        None => "NA".to_string(),
    }
}
