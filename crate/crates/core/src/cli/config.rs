//! TOML configuration with unit-suffixed values, e.g.
//!
//! ```toml
//! bandwidth = "10MHz"
//! noise_power = "-104dBm"
//! file_size = "1GB"
//! ```
//!
//! Bare numbers are read in SI base units (Hz, W, s, m, bit). Byte suffixes
//! are decimal with 8 bits per byte, so `1GB` is 8e9 bits. `arrival_rate` is
//! requests per slot; divide by the slot duration for requests per second.

use std::path::Path;

use toml::{Table, Value};

use crate::channel::{dbm_to_watts, SystemConfig, SystemParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Frequency,
    Power,
    Duration,
    Distance,
    DataSize,
    Rate,
    Dimensionless,
}

impl Quantity {
    /// Longest suffix first so that `mW` is not read as `W`.
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Quantity::Frequency => &[("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)],
            Quantity::Power => &[("mW", 1e-3), ("W", 1.0)],
            Quantity::Duration => &[("ms", 1e-3), ("us", 1e-6), ("s", 1.0)],
            Quantity::Distance => &[("km", 1e3), ("m", 1.0)],
            Quantity::DataSize => &[
                ("Gbit", 1e9),
                ("Mbit", 1e6),
                ("kbit", 1e3),
                ("bits", 1.0),
                ("bit", 1.0),
                ("GB", 8e9),
                ("MB", 8e6),
                ("KB", 8e3),
                ("kB", 8e3),
                ("B", 8.0),
            ],
            Quantity::Rate => &[("Gbps", 1e9), ("Mbps", 1e6), ("kbps", 1e3), ("bps", 1.0)],
            Quantity::Dimensionless => &[],
        }
    }
}

fn parse_number(key: &str, text: &str) -> Result<f64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse {text:?} as a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(key, format!("{text:?} is not finite")))
    }
}

/// Parses `"<number><unit>"` (whitespace between the two is allowed) or a
/// bare number in SI base units.
pub fn parse_quantity(key: &str, text: &str, quantity: Quantity) -> Result<f64> {
    let text = text.trim();
    if quantity == Quantity::Power {
        if let Some(num) = text.strip_suffix("dBm") {
            return Ok(dbm_to_watts(parse_number(key, num)?));
        }
    }
    for &(suffix, scale) in quantity.units() {
        if let Some(num) = text.strip_suffix(suffix) {
            return Ok(parse_number(key, num)? * scale);
        }
    }
    let ends_in_unit = text.chars().last().is_some_and(|c| c.is_alphabetic());
    parse_number(key, text).map_err(|e| {
        if ends_in_unit {
            Error::invalid(key, format!("unrecognised unit in {text:?}"))
        } else {
            e
        }
    })
}

fn value_to_si(key: &str, value: &Value, quantity: Quantity) -> Result<f64> {
    match value {
        Value::String(s) => parse_quantity(key, s, quantity),
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) if f.is_finite() => Ok(*f),
        Value::Float(f) => Err(Error::invalid(key, format!("{f} is not finite"))),
        other => Err(Error::invalid(
            key,
            format!("expected a number or a string, got {}", other.type_str()),
        )),
    }
}

/// Config keys, in the order they are documented.
pub const CONFIG_KEYS: [(&str, Quantity); 8] = [
    ("bandwidth", Quantity::Frequency),
    ("tx_power", Quantity::Power),
    ("noise_power", Quantity::Power),
    ("path_loss_exponent", Quantity::Dimensionless),
    ("slot_duration", Quantity::Duration),
    ("coverage_radius", Quantity::Distance),
    ("file_size", Quantity::DataSize),
    ("arrival_rate", Quantity::Dimensionless),
];

pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let table: Table = text.parse()?;
    if let Some(unknown) = table
        .keys()
        .find(|k| !CONFIG_KEYS.iter().any(|(name, _)| name == k))
    {
        return Err(Error::UnknownKey(unknown.clone()));
    }
    let mut values = [0.0; CONFIG_KEYS.len()];
    for (slot, (key, quantity)) in values.iter_mut().zip(CONFIG_KEYS) {
        let raw = table
            .get(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))?;
        *slot = value_to_si(key, raw, quantity)?;
    }
    let [bandwidth_per_user, tx_power, noise_power, path_loss_exponent, slot_duration, coverage_radius, file_size, arrival_rate] =
        values;
    SystemConfig::new(SystemParams {
        bandwidth_per_user,
        tx_power,
        noise_power,
        path_loss_exponent,
        slot_duration,
        coverage_radius,
        file_size,
        arrival_rate,
    })
    .map_err(|e| match e {
        Error::InvalidParameter { key, reason } if key == "bandwidth_per_user" => {
            Error::InvalidParameter {
                key: "bandwidth".into(),
                reason,
            }
        }
        other => other,
    })
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// The configuration shipped as `configs/default.toml`.
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.toml");
