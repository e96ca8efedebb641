//! Rate and set-up time selection.
//!
//! Every rate objective here has the shape `exp(b^x / a) / x` (times
//! positive constants), or a positive mixture of such terms, which is convex
//! for `x > 0`. A bracketing golden-section search is therefore enough; the
//! set-up time is an integer and is scanned.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    max_setup_slots, min_snr_pessimistic, smin_lower_simple, t_avg_upper, GroupSizeWeights,
    RatePlan,
};
use crate::channel::{snr_threshold, SystemConfig};
use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_EXPANSIONS: usize = 64;
const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the minimiser of a unimodal extended-real
/// objective on `(lo, hi)`.
///
/// `hi` is doubled while the objective is still falling there. NaN counts as
/// `+inf`, and ties move the bracket left, so flat or infinite stretches
/// resolve to their leftmost point.
pub fn minimize_convex_scalar<F>(objective: F, bracket: (f64, f64), rel_tol: f64) -> Result<ScalarMinimum>
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = bracket;
    assert!(lo > 0.0 && hi > lo, "bracket must satisfy 0 < lo < hi");
    assert!(rel_tol > 0.0, "rel_tol must be positive");

    let mut evaluations = 0usize;
    let mut f = |x: f64| {
        evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut a = lo;
    let mut d = hi;
    for _ in 0..MAX_EXPANSIONS {
        let fd = f(d);
        let fm = f(a + 0.5 * (d - a));
        if fd.is_finite() && fd < fm {
            d *= 2.0;
        } else {
            break;
        }
    }

    let mut b = d - INV_PHI * (d - a);
    let mut c = a + INV_PHI * (d - a);
    let mut fb = f(b);
    let mut fc = f(c);
    for _ in 0..MAX_ITERATIONS {
        if d - a <= rel_tol * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fb <= fc || (fb.is_infinite() && fc.is_infinite()) {
            d = c;
            c = b;
            fc = fb;
            b = d - INV_PHI * (d - a);
            fb = f(b);
        } else {
            a = b;
            b = c;
            fb = fc;
            c = a + INV_PHI * (d - a);
            fc = f(c);
        }
    }
    let (x, value) = if fb <= fc { (b, fb) } else { (c, fc) };
    if !value.is_finite() {
        return Err(Error::NoFiniteObjective { lo, hi: d });
    }
    Ok(ScalarMinimum {
        x,
        value,
        evaluations,
    })
}

/// Default rate bracket for a `k`-user merged band.
pub fn rate_bracket(k: usize, cfg: &SystemConfig) -> (f64, f64) {
    let hi = k as f64 * cfg.bandwidth_per_user() * (1.0 + cfg.edge_snr() * 1e3).log2();
    (1e3, hi)
}

/// `(1/R) exp((2^(R/W) - 1) / (rho0 D^-eta))`: inverse throughput of an
/// edge user under unicast.
pub fn unicast_rate_objective(rate: f64, cfg: &SystemConfig) -> f64 {
    (snr_threshold(rate, cfg.bandwidth_per_user()) / cfg.edge_snr()).exp() / rate
}

/// `(1/R) exp((2^(R/(K W)) - 1) / rho_hat_K)`: inverse multicast throughput
/// of a `k`-user group under the pessimistic outage bound.
pub fn finetune_objective(rate: f64, k: usize, cfg: &SystemConfig) -> f64 {
    let bw = k as f64 * cfg.bandwidth_per_user();
    (snr_threshold(rate, bw) / min_snr_pessimistic(k, cfg)).exp() / rate
}

/// Poisson-weighted multicast-phase time of the upper bound as a function of
/// the multicast rate. Caches come from the simple lower bound, capped to
/// `[0, L_f]`.
pub fn multicast_rate_objective(
    rate: f64,
    t_set: u64,
    r_uc: f64,
    weights: &GroupSizeWeights,
    cfg: &SystemConfig,
) -> f64 {
    let file = cfg.file_size();
    weights
        .iter()
        .filter_map(|(k, w)| {
            let remaining = file - smin_lower_simple(k, t_set, r_uc, cfg).min(file);
            // skip zero terms so 0 * inf never shows up
            (w > 0.0 && remaining > 0.0).then(|| w * remaining * finetune_objective(rate, k, cfg))
        })
        .sum()
}

/// Unicast rate minimising the edge user's inverse throughput. Depends only
/// on W, rho0, eta and D_BS.
pub fn optimal_ruc(cfg: &SystemConfig) -> Result<f64> {
    let m = minimize_convex_scalar(
        |r| unicast_rate_objective(r, cfg),
        rate_bracket(1, cfg),
        DEFAULT_REL_TOL,
    )?;
    Ok(m.x)
}

/// Multicast rate for a known group size.
pub fn finetune_rmc(k: usize, cfg: &SystemConfig) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "group size must be >= 1"));
    }
    let m = minimize_convex_scalar(
        |r| finetune_objective(r, k, cfg),
        rate_bracket(k, cfg),
        DEFAULT_REL_TOL,
    )?;
    Ok(m.x)
}

/// Multicast rate minimising the truncated group-size mixture for a given
/// set-up time and unicast rate.
pub fn optimal_rmc(t_set: u64, r_uc: f64, cfg: &SystemConfig, delta: f64) -> Result<f64> {
    let weights = GroupSizeWeights::for_plan(t_set, cfg, delta)?;
    optimal_rmc_with(t_set, r_uc, &weights, cfg)
}

fn optimal_rmc_with(
    t_set: u64,
    r_uc: f64,
    weights: &GroupSizeWeights,
    cfg: &SystemConfig,
) -> Result<f64> {
    let m = minimize_convex_scalar(
        |r| multicast_rate_objective(r, t_set, r_uc, weights, cfg),
        rate_bracket(weights.k_max(), cfg),
        DEFAULT_REL_TOL,
    )?;
    Ok(m.x)
}

/// How the set-up time axis is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetupScan {
    /// Every `stride`-th slot, then every slot within `window` of the best.
    Coarse { stride: u64, window: u64 },
    /// Every slot from 0 to the limit.
    Full,
}

impl Default for SetupScan {
    fn default() -> Self {
        SetupScan::Coarse {
            stride: 50,
            window: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetupScanPoint {
    pub t_set: u64,
    pub r_mc: f64,
    pub t_avg_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub plan: RatePlan,
    /// Upper-bounded expected average delivery time at `plan`, seconds.
    pub objective: f64,
    pub k_max: usize,
    /// Number of set-up times evaluated.
    pub iterations: usize,
    pub per_t_set_trace: Vec<SetupScanPoint>,
}

/// Largest set-up time allowed for a unicast rate.
pub fn setup_limit(r_uc: f64, cfg: &SystemConfig) -> u64 {
    max_setup_slots(r_uc, cfg).floor() as u64
}

/// Best multicast rate and resulting upper bound for each set-up time.
pub fn scan_setup_times(
    t_values: &[u64],
    r_uc: f64,
    cfg: &SystemConfig,
    delta: f64,
) -> Result<Vec<SetupScanPoint>> {
    t_values
        .par_iter()
        .map(|&t_set| {
            let weights = GroupSizeWeights::for_plan(t_set, cfg, delta)?;
            let r_mc = optimal_rmc_with(t_set, r_uc, &weights, cfg)?;
            let plan = RatePlan { r_uc, r_mc, t_set };
            let (t_avg, _) = t_avg_upper(&plan, cfg, delta)?;
            Ok(SetupScanPoint {
                t_set,
                r_mc,
                t_avg_upper: t_avg,
            })
        })
        .collect()
}

fn best_point(points: &[SetupScanPoint]) -> Option<SetupScanPoint> {
    points.iter().copied().min_by(|a, b| {
        a.t_avg_upper
            .total_cmp(&b.t_avg_upper)
            .then(a.t_set.cmp(&b.t_set))
            .then(a.r_mc.total_cmp(&b.r_mc))
    })
}

/// Joint search: fix the unicast rate, then for every candidate set-up time
/// pick the best multicast rate and keep the set-up time with the smallest
/// upper-bounded delivery time.
pub fn joint_optimize(cfg: &SystemConfig, delta: f64, scan: SetupScan) -> Result<OptimizationResult> {
    optimize_setup(optimal_ruc(cfg)?, cfg, delta, scan)
}

/// Set-up time and multicast rate search for a fixed unicast rate.
pub fn optimize_setup(
    r_uc: f64,
    cfg: &SystemConfig,
    delta: f64,
    scan: SetupScan,
) -> Result<OptimizationResult> {
    if !(r_uc.is_finite() && r_uc > 0.0) {
        return Err(Error::invalid("r_uc", format!("must be > 0, got {r_uc}")));
    }
    let t_max = setup_limit(r_uc, cfg);

    let mut trace = match scan {
        SetupScan::Full => scan_setup_times(&(0..=t_max).collect::<Vec<_>>(), r_uc, cfg, delta)?,
        SetupScan::Coarse { stride, window } => {
            let stride = stride.max(1);
            let mut coarse: Vec<u64> = (0..=t_max).step_by(stride as usize).collect();
            if coarse.last() != Some(&t_max) {
                coarse.push(t_max);
            }
            let mut points = scan_setup_times(&coarse, r_uc, cfg, delta)?;
            let centre = best_point(&points).map_or(0, |p| p.t_set);
            let fine: Vec<u64> = (centre.saturating_sub(window)..=(centre + window).min(t_max))
                .filter(|t| coarse.binary_search(t).is_err())
                .collect();
            points.extend(scan_setup_times(&fine, r_uc, cfg, delta)?);
            points
        }
    };
    trace.sort_by_key(|p| p.t_set);

    let best = best_point(&trace).expect("at least t_set = 0 is scanned");
    let plan = RatePlan {
        r_uc,
        r_mc: best.r_mc,
        t_set: best.t_set,
    };
    let (objective, k_max) = t_avg_upper(&plan, cfg, delta)?;
    Ok(OptimizationResult {
        plan,
        objective,
        k_max,
        iterations: trace.len(),
        per_t_set_trace: trace,
    })
}
