//! Closed-form delivery-time analysis for a set-up/multicast rate plan.
//!
//! The multicast outage of a K-user group is sandwiched between two
//! exponential-SNR outages: a pessimistic one that puts every user at the
//! cell edge and an optimistic one that averages `d^eta` over the disk.
//! Cached-data bounds for the set-up phase combine with those into bounds
//! on the multicast-phase time, and a Poisson mixture over the group size
//! gives the expected average delivery time.

use serde::{Deserialize, Serialize};

use crate::channel::{outage_probability, SystemConfig};
use crate::error::{Error, Result};

/// Largest `t_set` accepted by [`smin_lower_exact`].
pub const EXACT_BOUND_MAX_SLOTS: u64 = 500;

/// Default upper-tail mass dropped when truncating the group-size mixture.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

/// Unicast rate, multicast rate (bits/s) and set-up length (slots).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePlan {
    pub r_uc: f64,
    pub r_mc: f64,
    pub t_set: u64,
}

impl RatePlan {
    pub fn new(r_uc: f64, r_mc: f64, t_set: u64, cfg: &SystemConfig) -> Result<Self> {
        let plan = RatePlan { r_uc, r_mc, t_set };
        plan.validate(cfg)?;
        Ok(plan)
    }

    /// Rates strictly positive and `t_set <= L_f / (T0 * r_uc)`.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if !(self.r_uc.is_finite() && self.r_uc > 0.0) {
            return Err(Error::invalid("r_uc", format!("must be > 0, got {}", self.r_uc)));
        }
        if !(self.r_mc.is_finite() && self.r_mc > 0.0) {
            return Err(Error::invalid("r_mc", format!("must be > 0, got {}", self.r_mc)));
        }
        let limit = max_setup_slots(self.r_uc, cfg);
        if self.t_set as f64 > limit {
            return Err(Error::SetupTooLong {
                t_set: self.t_set,
                limit,
            });
        }
        Ok(())
    }

    /// Bits in one unicast packet.
    pub fn unicast_packet_bits(&self, cfg: &SystemConfig) -> f64 {
        cfg.slot_duration() * self.r_uc
    }
}

/// Slots needed to unicast the whole file without a single outage.
pub fn max_setup_slots(r_uc: f64, cfg: &SystemConfig) -> f64 {
    cfg.file_size() / (cfg.slot_duration() * r_uc)
}

/// Worst-case mean of the group's minimum SNR: every user at the edge,
/// `rho0 / (K D^eta)`.
pub fn min_snr_pessimistic(k: usize, cfg: &SystemConfig) -> f64 {
    cfg.edge_snr() / k as f64
}

/// Disk-averaged mean of the minimum SNR, `rho0 (eta + 2) / (2 K D^eta)`.
pub fn min_snr_optimistic(k: usize, cfg: &SystemConfig) -> f64 {
    cfg.edge_snr() * (cfg.path_loss_exponent() + 2.0) / (2.0 * k as f64)
}

fn merged_bandwidth(k: usize, cfg: &SystemConfig) -> f64 {
    k as f64 * cfg.bandwidth_per_user()
}

/// Upper bound on the K-user multicast outage at `r_mc`.
pub fn mc_outage_upper(k: usize, r_mc: f64, cfg: &SystemConfig) -> f64 {
    assert!(k >= 1, "group size must be >= 1");
    outage_probability(r_mc, merged_bandwidth(k, cfg), min_snr_pessimistic(k, cfg))
}

/// Optimistic K-user multicast outage at `r_mc`, with the path loss
/// averaged over the disk inside the exponent. By Jensen this is a hair
/// above the exact disk-averaged outage, so it is a lower bound only with
/// respect to the edge-pinned value and to within Monte Carlo noise near the
/// operating rates.
pub fn mc_outage_lower(k: usize, r_mc: f64, cfg: &SystemConfig) -> f64 {
    assert!(k >= 1, "group size must be >= 1");
    outage_probability(r_mc, merged_bandwidth(k, cfg), min_snr_optimistic(k, cfg))
}

/// Unicast outage of a user at the cell edge.
pub fn epsilon_max(r_uc: f64, cfg: &SystemConfig) -> f64 {
    outage_probability(r_uc, cfg.bandwidth_per_user(), cfg.edge_snr())
}

/// Upper bound on E[s_min] in bits.
pub fn smin_upper(k: usize, t_set: u64, r_uc: f64, cfg: &SystemConfig) -> f64 {
    assert!(k >= 1, "group size must be >= 1");
    let eta = cfg.path_loss_exponent();
    let x = crate::channel::snr_threshold(r_uc, cfg.bandwidth_per_user());
    let survival = (-2.0 * x / ((eta + 2.0) * cfg.edge_snr())).exp();
    t_set as f64 / k as f64 * cfg.slot_duration() * r_uc * survival
}

/// Lower bound on E[s_min] in bits, from the last arriver at the edge.
/// Clamped at 0 once `t_set <= k`.
pub fn smin_lower_simple(k: usize, t_set: u64, r_uc: f64, cfg: &SystemConfig) -> f64 {
    assert!(k >= 1, "group size must be >= 1");
    let v = (t_set as f64 - k as f64) / k as f64
        * cfg.slot_duration()
        * r_uc
        * (1.0 - epsilon_max(r_uc, cfg));
    v.max(0.0)
}

/// Order-statistics lower bound on E[s_min] in bits, all users at the edge.
pub fn smin_lower_exact(k: usize, t_set: u64, r_uc: f64, cfg: &SystemConfig) -> Result<f64> {
    let packets = expected_min_packets_at_edge(k, t_set, epsilon_max(r_uc, cfg))?;
    Ok(packets * cfg.slot_duration() * r_uc)
}

/// E[min_k c_k] in packets when every unicast slot fails independently with
/// probability `eps`, user 1 is served for `t_set` slots and each later
/// user for `t_set - t_k` slots with `t_k` uniform on `1..=t_set`.
///
/// Uses `E[min] = sum_c P[c_1 > c] * (1 - P[c_k <= c])^(K-1)`.
pub fn expected_min_packets_at_edge(k: usize, t_set: u64, eps: f64) -> Result<f64> {
    assert!(k >= 1, "group size must be >= 1");
    assert!((0.0..=1.0).contains(&eps), "eps must be a probability");
    if t_set > EXACT_BOUND_MAX_SLOTS {
        return Err(Error::ExactBoundIntractable {
            t_set,
            cap: EXACT_BOUND_MAX_SLOTS,
        });
    }
    if t_set == 0 {
        return Ok(0.0);
    }
    let t = t_set as usize;
    let success = 1.0 - eps;
    let ln_fact = ln_factorials(t);

    // later_cdf_sum[c] = sum over remaining slots r in 0..t of P[Bin(r) <= c]
    let mut later_cdf_sum = vec![0.0; t + 1];
    let mut first_cdf = vec![0.0; t + 1];
    let mut row = vec![0.0; t + 1];
    for n in 0..=t {
        binomial_cdf_row(n, success, &ln_fact, &mut row);
        if n < t {
            for (acc, v) in later_cdf_sum.iter_mut().zip(&row) {
                *acc += v;
            }
        } else {
            first_cdf.copy_from_slice(&row);
        }
    }

    let later = (k - 1) as i32;
    let total = (0..=t)
        .map(|c| {
            let first_survives = (1.0 - first_cdf[c]).clamp(0.0, 1.0);
            let later_survives = (1.0 - later_cdf_sum[c] / t as f64).clamp(0.0, 1.0);
            first_survives * later_survives.powi(later)
        })
        .sum();
    Ok(total)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Fills `out[c] = P[Bin(n, p) <= c]` for `c in 0..out.len()`.
fn binomial_cdf_row(n: usize, p: f64, ln_fact: &[f64], out: &mut [f64]) {
    let q = 1.0 - p;
    let mut acc = 0.0;
    for (c, slot) in out.iter_mut().enumerate() {
        if c <= n {
            let pmf = if p == 0.0 {
                if c == 0 { 1.0 } else { 0.0 }
            } else if q == 0.0 {
                if c == n { 1.0 } else { 0.0 }
            } else {
                let ln = ln_fact[n] - ln_fact[c] - ln_fact[n - c]
                    + c as f64 * p.ln()
                    + (n - c) as f64 * q.ln();
                ln.exp()
            };
            acc += pmf;
        }
        *slot = acc.min(1.0);
    }
}

/// Mean set-up-phase time per user, `T0 (t_set K + t_set - K + 2) / (2K)`.
///
/// At K = 1 this gives `T0 (2 t_set + 1) / 2`, half a slot more than the
/// definitional `T0 t_set`; the simulator uses the definitional timing.
pub fn setup_phase_mean(k: usize, t_set: u64, cfg: &SystemConfig) -> f64 {
    assert!(k >= 1, "group size must be >= 1");
    let (k, t) = (k as f64, t_set as f64);
    cfg.slot_duration() * (t * k + t - k + 2.0) / (2.0 * k)
}

fn multicast_time(remaining_bits: f64, r_mc: f64, outage: f64) -> f64 {
    if remaining_bits <= 0.0 {
        return 0.0;
    }
    if outage >= 1.0 {
        return f64::INFINITY;
    }
    remaining_bits / (r_mc * (1.0 - outage))
}

/// Upper bound on the expected multicast-phase time for a K-user group.
pub fn tau_upper(k: usize, plan: &RatePlan, cfg: &SystemConfig) -> f64 {
    let cache = smin_lower_simple(k, plan.t_set, plan.r_uc, cfg).min(cfg.file_size());
    multicast_time(
        cfg.file_size() - cache,
        plan.r_mc,
        mc_outage_upper(k, plan.r_mc, cfg),
    )
}

/// Lower bound on the expected multicast-phase time for a K-user group.
pub fn tau_lower(k: usize, plan: &RatePlan, cfg: &SystemConfig) -> f64 {
    let cache = smin_upper(k, plan.t_set, plan.r_uc, cfg).min(cfg.file_size());
    multicast_time(
        cfg.file_size() - cache,
        plan.r_mc,
        mc_outage_lower(k, plan.r_mc, cfg),
    )
}

/// Poisson(`mean`) probabilities of `K - 1` additional arrivals, truncated
/// to `K = 1..=k_max` where `k_max` is the smallest size whose upper tail
/// `P[K > k_max]` is below `delta`. The dropped tail is not renormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSizeWeights {
    weights: Vec<f64>,
}

impl GroupSizeWeights {
    pub fn new(mean: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1e-3) {
            return Err(Error::invalid("delta", format!("must be in (0, 1e-3], got {delta}")));
        }
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::invalid("mean group size", format!("got {mean}")));
        }
        if mean == 0.0 {
            return Ok(GroupSizeWeights { weights: vec![1.0] });
        }
        // pmf far enough into the tail that the remainder is negligible
        let hi = (mean + 40.0 * mean.sqrt() + 60.0).ceil() as usize;
        let ln_mean = mean.ln();
        let mut ln_fact = 0.0;
        let pmf: Vec<f64> = (0..=hi)
            .map(|j| {
                if j > 0 {
                    ln_fact += (j as f64).ln();
                }
                (j as f64 * ln_mean - mean - ln_fact).exp()
            })
            .collect();
        // tail[j] = P[K - 1 >= j]
        let mut tail = vec![0.0; hi + 2];
        for j in (0..=hi).rev() {
            tail[j] = tail[j + 1] + pmf[j];
        }
        // P[K > k] = P[K - 1 >= k] = tail[k]
        let k_max = (1..=hi)
            .find(|&k| tail[k] < delta)
            .unwrap_or(hi);
        Ok(GroupSizeWeights {
            weights: pmf[..k_max].to_vec(),
        })
    }

    pub fn for_plan(t_set: u64, cfg: &SystemConfig, delta: f64) -> Result<Self> {
        Self::new(t_set as f64 * cfg.arrival_rate(), delta)
    }

    pub fn k_max(&self) -> usize {
        self.weights.len()
    }

    /// `(K, P[K])` for `K = 1..=k_max`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(|(i, &w)| (i + 1, w))
    }

    pub fn probability(&self, k: usize) -> f64 {
        k.checked_sub(1)
            .and_then(|i| self.weights.get(i))
            .copied()
            .unwrap_or(0.0)
    }
}

fn mixture(
    plan: &RatePlan,
    cfg: &SystemConfig,
    delta: f64,
    tau: impl Fn(usize) -> f64,
) -> Result<(f64, usize)> {
    plan.validate(cfg)?;
    let weights = GroupSizeWeights::for_plan(plan.t_set, cfg, delta)?;
    let total = weights
        .iter()
        .filter(|&(_, w)| w > 0.0)
        .map(|(k, w)| w * (setup_phase_mean(k, plan.t_set, cfg) + tau(k)))
        .sum();
    Ok((total, weights.k_max()))
}

/// Tractable upper bound on the expected average delivery time (seconds),
/// with the group-size truncation used.
pub fn t_avg_upper(plan: &RatePlan, cfg: &SystemConfig, delta: f64) -> Result<(f64, usize)> {
    mixture(plan, cfg, delta, |k| tau_upper(k, plan, cfg))
}

/// Companion lower curve built from the optimistic outage and the upper
/// cache bound.
pub fn t_avg_lower(plan: &RatePlan, cfg: &SystemConfig, delta: f64) -> Result<(f64, usize)> {
    mixture(plan, cfg, delta, |k| tau_lower(k, plan, cfg))
}

/// Every analytic quantity for one group size under one plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub k: usize,
    pub min_snr_pessimistic: f64,
    pub min_snr_optimistic: f64,
    pub epsilon_max: f64,
    pub mc_outage_upper: f64,
    pub mc_outage_lower: f64,
    pub smin_upper: f64,
    pub smin_lower: f64,
    pub setup_phase_mean: f64,
    pub tau_upper: f64,
    pub tau_lower: f64,
    pub t_avg_upper: f64,
    pub t_avg_lower: f64,
    pub k_max: usize,
}

impl BoundsReport {
    pub fn compute(k: usize, plan: &RatePlan, cfg: &SystemConfig, delta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "group size must be >= 1"));
        }
        let (t_avg_upper, k_max) = t_avg_upper(plan, cfg, delta)?;
        let (t_avg_lower, _) = t_avg_lower(plan, cfg, delta)?;
        let cap = cfg.file_size();
        Ok(BoundsReport {
            k,
            min_snr_pessimistic: min_snr_pessimistic(k, cfg),
            min_snr_optimistic: min_snr_optimistic(k, cfg),
            epsilon_max: epsilon_max(plan.r_uc, cfg),
            mc_outage_upper: mc_outage_upper(k, plan.r_mc, cfg),
            mc_outage_lower: mc_outage_lower(k, plan.r_mc, cfg),
            smin_upper: smin_upper(k, plan.t_set, plan.r_uc, cfg).min(cap),
            smin_lower: smin_lower_simple(k, plan.t_set, plan.r_uc, cfg).min(cap),
            setup_phase_mean: setup_phase_mean(k, plan.t_set, cfg),
            tau_upper: tau_upper(k, plan, cfg),
            tau_lower: tau_lower(k, plan, cfg),
            t_avg_upper,
            t_avg_lower,
            k_max,
        })
    }
}
