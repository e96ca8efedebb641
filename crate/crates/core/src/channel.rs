//! Physical-layer primitives: received SNR under path loss and Rayleigh
//! block fading, outage probability at a fixed rate, and user placement.
//!
//! Everything in here works in SI units (bits, Hz, watts, seconds, meters).
//! Capacity is always `bandwidth * log2(1 + snr)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};

/// Physical and traffic parameters of one cell serving one file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    bandwidth_per_user: f64,
    tx_power: f64,
    noise_power: f64,
    ref_snr: f64,
    path_loss_exponent: f64,
    slot_duration: f64,
    coverage_radius: f64,
    file_size: f64,
    arrival_rate: f64,
}

/// Raw inputs for [`SystemConfig::new`]. `ref_snr` is derived, not supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub bandwidth_per_user: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub path_loss_exponent: f64,
    pub slot_duration: f64,
    pub coverage_radius: f64,
    pub file_size: f64,
    pub arrival_rate: f64,
}

impl SystemParams {
    /// 10 MHz per user, 500 mW, -104 dBm noise, eta = 4, 10 ms slots,
    /// 300 m cell, a 1 GB file and 0.002 requests per slot.
    pub fn reference() -> Self {
        SystemParams {
            bandwidth_per_user: 10e6,
            tx_power: 0.5,
            noise_power: dbm_to_watts(-104.0),
            path_loss_exponent: 4.0,
            slot_duration: 0.01,
            coverage_radius: 300.0,
            file_size: 8e9,
            arrival_rate: 0.002,
        }
    }
}

fn require_positive(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("must be finite and > 0, got {value}")))
    }
}

impl SystemConfig {
    pub fn new(p: SystemParams) -> Result<Self> {
        require_positive("bandwidth_per_user", p.bandwidth_per_user)?;
        require_positive("tx_power", p.tx_power)?;
        require_positive("noise_power", p.noise_power)?;
        require_positive("path_loss_exponent", p.path_loss_exponent)?;
        require_positive("slot_duration", p.slot_duration)?;
        require_positive("coverage_radius", p.coverage_radius)?;
        require_positive("file_size", p.file_size)?;
        if p.path_loss_exponent < 2.0 {
            return Err(Error::invalid(
                "path_loss_exponent",
                format!("must be >= 2, got {}", p.path_loss_exponent),
            ));
        }
        if !(p.arrival_rate.is_finite() && p.arrival_rate >= 0.0) {
            return Err(Error::invalid(
                "arrival_rate",
                format!("must be finite and >= 0, got {}", p.arrival_rate),
            ));
        }
        let ref_snr = p.tx_power / p.noise_power;
        require_positive("tx_power / noise_power", ref_snr)?;
        Ok(SystemConfig {
            bandwidth_per_user: p.bandwidth_per_user,
            tx_power: p.tx_power,
            noise_power: p.noise_power,
            ref_snr,
            path_loss_exponent: p.path_loss_exponent,
            slot_duration: p.slot_duration,
            coverage_radius: p.coverage_radius,
            file_size: p.file_size,
            arrival_rate: p.arrival_rate,
        })
    }

    /// The reference scenario, see [`SystemParams::reference`].
    pub fn reference() -> Self {
        Self::new(SystemParams::reference()).expect("reference parameters are valid")
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            bandwidth_per_user: self.bandwidth_per_user,
            tx_power: self.tx_power,
            noise_power: self.noise_power,
            path_loss_exponent: self.path_loss_exponent,
            slot_duration: self.slot_duration,
            coverage_radius: self.coverage_radius,
            file_size: self.file_size,
            arrival_rate: self.arrival_rate,
        }
    }

    pub fn with_arrival_rate(&self, arrival_rate: f64) -> Result<Self> {
        Self::new(SystemParams {
            arrival_rate,
            ..self.params()
        })
    }

    pub fn bandwidth_per_user(&self) -> f64 {
        self.bandwidth_per_user
    }
    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    /// rho0 = P_BS / P_noise.
    pub fn ref_snr(&self) -> f64 {
        self.ref_snr
    }
    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }
    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }
    pub fn coverage_radius(&self) -> f64 {
        self.coverage_radius
    }
    pub fn file_size(&self) -> f64 {
        self.file_size
    }
    /// Requests per slot.
    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    /// Mean SNR of a user at the cell edge, `rho0 * D^-eta`.
    pub fn edge_snr(&self) -> f64 {
        self.ref_snr * self.coverage_radius.powf(-self.path_loss_exponent)
    }

    /// Mean SNR at distance `d` (no fading), `rho0 * d^-eta`.
    pub fn mean_snr_at(&self, distance: f64) -> f64 {
        self.ref_snr * distance.powf(-self.path_loss_exponent)
    }
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0) * 1e-3
}

/// `rho0 * gain * distance^-eta`.
pub fn received_snr(gain: f64, distance: f64, cfg: &SystemConfig) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(cfg.ref_snr * gain * distance.powf(-cfg.path_loss_exponent))
}

/// Smallest SNR that supports `rate` over `eff_bandwidth`, i.e. `2^(R/B) - 1`.
/// Saturates to `+inf` when the exponent overflows.
pub fn snr_threshold(rate: f64, eff_bandwidth: f64) -> f64 {
    (rate / eff_bandwidth).exp2() - 1.0
}

/// Probability that `eff_bandwidth * log2(1 + snr) < rate` when the
/// instantaneous SNR is exponential with mean `mean_snr`.
pub fn outage_probability(rate: f64, eff_bandwidth: f64, mean_snr: f64) -> f64 {
    let x = snr_threshold(rate, eff_bandwidth) / mean_snr;
    if x.is_nan() || x == f64::INFINITY {
        return 1.0;
    }
    // -expm1(-x) keeps precision for tiny x.
    -(-x).exp_m1()
}

/// Distance of a user placed uniformly over the disk of the given radius.
/// Never returns 0.
pub fn sample_user_distance<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> f64 {
    // random() is in [0, 1), so u is in (0, 1].
    let u = 1.0 - rng.random::<f64>();
    radius * u.sqrt()
}

/// Rayleigh channel power gain |h|^2 ~ Exp(1).
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}
