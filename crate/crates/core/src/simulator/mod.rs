//! Slot-level execution of the set-up/multicast mechanism and of the plain
//! unicast baseline.
//!
//! An episode starts with the first request at time 0. Later requests for
//! the same file arrive as a Poisson process during the set-up window and
//! are served by per-user unicast at `r_uc`, one packet per user per slot.
//! When the window closes the base station multicasts from the smallest
//! cache `s_min` over the merged `K W` band at `r_mc` until the rest of the
//! file has gone through. Fading is redrawn for every user in every slot and
//! failed packets are resent whole.

mod monte_carlo;

pub use monte_carlo::{
    episode_rng, monte_carlo, run_episode, run_episodes, summarize, GroupSizeBin, Mode,
    MonteCarloSummary,
};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::bounds::RatePlan;
use crate::channel::{sample_fading, sample_user_distance, snr_threshold, SystemConfig};
use crate::error::{Error, Result};
use crate::optimizer::finetune_rmc;

/// Episodes whose multicast or unicast transfer runs longer than this are
/// aborted.
pub const WATCHDOG_SLOTS: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserState {
    /// Meters from the base station.
    pub distance: f64,
    /// Request instant in seconds after the first request.
    pub arrival_time: f64,
    /// Slot index of the request; the first unicast packet goes out in the
    /// following slot.
    pub request_slot: u64,
    /// `T0 * request_slot - arrival_time`, in `[0, T0)`.
    pub slot_gap: f64,
    pub cached_packets: u64,
    pub cached_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupState {
    /// In arrival order.
    pub users: Vec<UserState>,
    pub t_set: u64,
    pub s_min: f64,
}

impl GroupState {
    pub fn k(&self) -> usize {
        self.users.len()
    }

    pub fn last(&self) -> &UserState {
        self.users.last().expect("a group always has its first user")
    }
}

/// Where group members are placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    UniformDisk,
    /// Every user at the same distance.
    Fixed(f64),
}

impl Placement {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R, cfg: &SystemConfig) -> f64 {
        match self {
            Placement::UniformDisk => sample_user_distance(rng, cfg.coverage_radius()),
            Placement::Fixed(d) => d,
        }
    }
}

/// First user at time 0 plus Poisson(`t_set * lambda_f`) later requests,
/// uniformly placed in the cell.
pub fn generate_arrivals<R: Rng + ?Sized>(
    rng: &mut R,
    t_set: u64,
    lambda_f: f64,
    cfg: &SystemConfig,
) -> GroupState {
    generate_arrivals_placed(rng, t_set, lambda_f, cfg, Placement::UniformDisk)
}

pub fn generate_arrivals_placed<R: Rng + ?Sized>(
    rng: &mut R,
    t_set: u64,
    lambda_f: f64,
    cfg: &SystemConfig,
    placement: Placement,
) -> GroupState {
    let mean = t_set as f64 * lambda_f;
    let extra = if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    } else {
        0
    };
    generate_group(rng, extra, t_set, cfg, placement)
}

/// A group with exactly `extra_users` requests after the first, their
/// arrival instants i.i.d. uniform over the set-up window.
pub fn generate_group<R: Rng + ?Sized>(
    rng: &mut R,
    extra_users: usize,
    t_set: u64,
    cfg: &SystemConfig,
    placement: Placement,
) -> GroupState {
    assert!(
        t_set > 0 || extra_users == 0,
        "an empty set-up window admits no extra users"
    );
    let t0 = cfg.slot_duration();
    let window = t0 * t_set as f64;
    let mut times: Vec<f64> = (0..extra_users)
        .map(|_| window * (1.0 - rng.random::<f64>()))
        .collect();
    times.sort_by(f64::total_cmp);

    let mut users = Vec::with_capacity(extra_users + 1);
    users.push(UserState {
        distance: placement.sample(rng, cfg),
        arrival_time: 0.0,
        request_slot: 0,
        slot_gap: 0.0,
        cached_packets: 0,
        cached_bits: 0.0,
    });
    for arrival_time in times {
        // (T0 t, T0 (t+1)] maps to slot t + 1
        let request_slot = ((arrival_time / t0).ceil() as u64).clamp(1, t_set);
        users.push(UserState {
            distance: placement.sample(rng, cfg),
            arrival_time,
            request_slot,
            slot_gap: (t0 * request_slot as f64 - arrival_time).max(0.0),
            cached_packets: 0,
            cached_bits: 0.0,
        });
    }
    GroupState {
        users,
        t_set,
        s_min: 0.0,
    }
}

/// Unicast one packet per present user per slot for `t_set` slots.
pub fn run_setup_phase<R: Rng + ?Sized>(
    rng: &mut R,
    group: &mut GroupState,
    plan: &RatePlan,
    cfg: &SystemConfig,
) {
    let threshold = snr_threshold(plan.r_uc, cfg.bandwidth_per_user());
    let mean_snr: Vec<f64> = group
        .users
        .iter()
        .map(|u| cfg.mean_snr_at(u.distance))
        .collect();
    for slot in 1..=group.t_set {
        for (user, &snr) in group
            .users
            .iter_mut()
            .zip(&mean_snr)
            .take_while(|(u, _)| u.request_slot < slot)
        {
            if snr * sample_fading(rng) >= threshold {
                user.cached_packets += 1;
            }
        }
    }
    let packet = plan.unicast_packet_bits(cfg);
    for user in &mut group.users {
        user.cached_bits = user.cached_packets as f64 * packet;
    }
    group.s_min = group
        .users
        .iter()
        .map(|u| u.cached_bits)
        .fold(f64::INFINITY, f64::min);
}

/// Arrivals plus set-up phase only, for looking at cache sizes.
pub fn run_setup_episode<R: Rng + ?Sized>(
    rng: &mut R,
    plan: &RatePlan,
    cfg: &SystemConfig,
    placement: Placement,
) -> GroupState {
    let mut group = generate_arrivals_placed(rng, plan.t_set, cfg.arrival_rate(), cfg, placement);
    run_setup_phase(rng, &mut group, plan, cfg);
    group
}

/// Slots a multicast or unicast transfer occupied and how many of them
/// delivered a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransferOutcome {
    pub slots: u64,
    pub successes: u64,
}

/// Smallest `n` with `n * packet_bits >= remaining_bits`.
pub fn packets_needed(remaining_bits: f64, packet_bits: f64) -> u64 {
    if remaining_bits <= 0.0 {
        return 0;
    }
    let mut n = (remaining_bits / packet_bits).ceil() as u64;
    while n > 0 && (n - 1) as f64 * packet_bits >= remaining_bits {
        n -= 1;
    }
    while (n as f64) * packet_bits < remaining_bits {
        n += 1;
    }
    n
}

/// Multicast from `s_min` at `r_mc` over the merged band. A slot succeeds
/// only if the weakest user decodes it.
pub fn run_multicast_phase<R: Rng + ?Sized>(
    rng: &mut R,
    group: &GroupState,
    r_mc: f64,
    cfg: &SystemConfig,
) -> Result<TransferOutcome> {
    multicast_with_limit(rng, group, r_mc, cfg, WATCHDOG_SLOTS)
}

fn multicast_with_limit<R: Rng + ?Sized>(
    rng: &mut R,
    group: &GroupState,
    r_mc: f64,
    cfg: &SystemConfig,
    limit: u64,
) -> Result<TransferOutcome> {
    let needed = packets_needed(cfg.file_size() - group.s_min, cfg.slot_duration() * r_mc);
    let mean_snr: Vec<f64> = group
        .users
        .iter()
        .map(|u| cfg.mean_snr_at(u.distance))
        .collect();
    let threshold = snr_threshold(r_mc, group.k() as f64 * cfg.bandwidth_per_user());
    // P[min_k rho_k g_k >= theta] = exp(-theta * sum_k 1 / rho_k)
    let ln_p = -threshold * mean_snr.iter().map(|s| 1.0 / s).sum::<f64>();
    transfer(needed, limit, threshold, ln_p, || {
        mean_snr
            .iter()
            .map(|&s| s * sample_fading(rng))
            .fold(f64::INFINITY, f64::min)
    })
}

/// True when `needed` Bernoulli(`exp(ln_p)`) successes within `limit`
/// slots has probability below `e^-28` by the Chernoff bound, i.e. the
/// watchdog is certain to fire and the slots need not be played out.
fn cannot_finish(needed: u64, limit: u64, ln_p: f64) -> bool {
    if needed > limit {
        return true;
    }
    let a = needed as f64 / limit as f64;
    let p = ln_p.exp();
    if !(p < a) {
        return ln_p.is_nan();
    }
    let kl = a * (a.ln() - ln_p) + (1.0 - a) * ((1.0 - a).ln() - (-p).ln_1p());
    limit as f64 * kl > 28.0
}

/// `ln_p` is the log of the per-slot success probability, used only to skip
/// transfers that cannot beat the watchdog.
fn transfer(
    needed: u64,
    limit: u64,
    threshold: f64,
    ln_p: f64,
    mut slot_snr: impl FnMut() -> f64,
) -> Result<TransferOutcome> {
    let mut outcome = TransferOutcome {
        slots: 0,
        successes: 0,
    };
    if needed == 0 {
        return Ok(outcome);
    }
    if cannot_finish(needed, limit, ln_p) {
        return Err(Error::Stalled { limit });
    }
    while outcome.successes < needed {
        if outcome.slots == limit {
            return Err(Error::Stalled { limit });
        }
        outcome.slots += 1;
        if slot_snr() >= threshold {
            outcome.successes += 1;
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub mode: Mode,
    pub k: usize,
    pub s_min: f64,
    /// Cache of the last user to arrive.
    pub s_last: f64,
    pub setup_slots: u64,
    /// Slots spent after the set-up window (the whole transfer for unicast).
    pub mc_slots: u64,
    /// Rate used after the set-up window.
    pub r_mc: f64,
    /// Seconds from each user's request to file completion, arrival order.
    pub per_user_delivery: Vec<f64>,
    pub mean_delivery: f64,
}

/// One run of the mechanism. With `finetune` the multicast rate is re-chosen
/// for the realised group size once the set-up window closes.
pub fn run_smmc_episode<R: Rng + ?Sized>(
    rng: &mut R,
    plan: &RatePlan,
    cfg: &SystemConfig,
    finetune: bool,
) -> Result<EpisodeResult> {
    let mut group = generate_arrivals(rng, plan.t_set, cfg.arrival_rate(), cfg);
    run_setup_phase(rng, &mut group, plan, cfg);
    let r_mc = if finetune {
        finetune_rmc(group.k(), cfg)?
    } else {
        plan.r_mc
    };
    let mc = run_multicast_phase(rng, &group, r_mc, cfg)?;

    let t0 = cfg.slot_duration();
    let multicast_time = t0 * mc.slots as f64;
    let per_user_delivery: Vec<f64> = group
        .users
        .iter()
        .map(|u| t0 * (plan.t_set - u.request_slot) as f64 + u.slot_gap + multicast_time)
        .collect();
    let mean_delivery = per_user_delivery.iter().sum::<f64>() / per_user_delivery.len() as f64;
    Ok(EpisodeResult {
        mode: if finetune {
            Mode::FineTuned
        } else {
            Mode::Smmc
        },
        k: group.k(),
        s_min: group.s_min,
        s_last: group.last().cached_bits,
        setup_slots: plan.t_set,
        mc_slots: mc.slots,
        r_mc,
        per_user_delivery,
        mean_delivery,
    })
}

/// A single user served by unicast at `r_uc` until the whole file is in.
pub fn run_unicast_episode<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    r_uc: f64,
) -> Result<EpisodeResult> {
    if !(r_uc > 0.0) {
        return Err(Error::invalid("r_uc", format!("must be > 0, got {r_uc}")));
    }
    let distance = sample_user_distance(rng, cfg.coverage_radius());
    let snr = cfg.mean_snr_at(distance);
    let needed = packets_needed(cfg.file_size(), cfg.slot_duration() * r_uc);
    let threshold = snr_threshold(r_uc, cfg.bandwidth_per_user());
    let out = transfer(needed, WATCHDOG_SLOTS, threshold, -threshold / snr, || {
        snr * sample_fading(rng)
    })?;
    let delivery = out.slots as f64 * cfg.slot_duration();
    Ok(EpisodeResult {
        mode: Mode::Unicast,
        k: 1,
        s_min: 0.0,
        s_last: 0.0,
        setup_slots: 0,
        mc_slots: out.slots,
        r_mc: r_uc,
        per_user_delivery: vec![delivery],
        mean_delivery: delivery,
    })
}
