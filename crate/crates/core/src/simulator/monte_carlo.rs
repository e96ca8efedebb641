use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_smmc_episode, run_unicast_episode, EpisodeResult};
use crate::bounds::RatePlan;
use crate::channel::SystemConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Smmc,
    /// Multicast rate re-optimized for the realised group size.
    #[serde(rename = "ft")]
    FineTuned,
    Unicast,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Smmc => "smmc",
            Mode::FineTuned => "ft",
            Mode::Unicast => "unicast",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smmc" => Ok(Mode::Smmc),
            "ft" => Ok(Mode::FineTuned),
            "unicast" => Ok(Mode::Unicast),
            other => Err(Error::invalid(
                "mode",
                format!("expected smmc, ft or unicast, got {other:?}"),
            )),
        }
    }
}

/// Each episode draws from its own stream of the seed, so results do not
/// depend on how episodes are spread over threads.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run_episode(
    mode: Mode,
    plan: &RatePlan,
    cfg: &SystemConfig,
    seed: u64,
    index: u64,
) -> Result<EpisodeResult> {
    let mut rng = episode_rng(seed, index);
    let out = match mode {
        Mode::Smmc => run_smmc_episode(&mut rng, plan, cfg, false),
        Mode::FineTuned => run_smmc_episode(&mut rng, plan, cfg, true),
        Mode::Unicast => run_unicast_episode(&mut rng, cfg, plan.r_uc),
    };
    out.map_err(|e| Error::Episode {
        index,
        source: Box::new(e),
    })
}

/// Episodes `0..n` in index order, run on the current rayon pool.
pub fn run_episodes(
    mode: Mode,
    plan: &RatePlan,
    cfg: &SystemConfig,
    n: u64,
    seed: u64,
) -> Result<Vec<EpisodeResult>> {
    (0..n)
        .into_par_iter()
        .map(|i| run_episode(mode, plan, cfg, seed, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSizeBin {
    pub k: usize,
    pub count: u64,
    pub probability: f64,
    pub mean_delivery: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub mode: Mode,
    pub episodes: u64,
    pub seed: u64,
    /// Average over episodes of the per-episode mean delivery time.
    pub mean_delivery: f64,
    pub std_delivery: f64,
    /// Half width of the normal 95% interval on `mean_delivery`.
    pub ci95: f64,
    pub mean_s_min: f64,
    pub mean_s_last: f64,
    /// Non-empty group sizes in increasing order.
    pub by_group_size: Vec<GroupSizeBin>,
}

pub fn monte_carlo(
    mode: Mode,
    plan: &RatePlan,
    cfg: &SystemConfig,
    n: u64,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if n == 0 {
        return Err(Error::invalid("episodes", "must be at least 1"));
    }
    let episodes = run_episodes(mode, plan, cfg, n, seed)?;
    Ok(summarize(mode, seed, &episodes))
}

/// Aggregates in slice order, so identical inputs give bit-identical output.
pub fn summarize(mode: Mode, seed: u64, episodes: &[EpisodeResult]) -> MonteCarloSummary {
    let n = episodes.len();
    let nf = n as f64;
    let mean = episodes.iter().map(|e| e.mean_delivery).sum::<f64>() / nf;
    let var = if n > 1 {
        episodes
            .iter()
            .map(|e| (e.mean_delivery - mean).powi(2))
            .sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt();

    let k_max = episodes.iter().map(|e| e.k).max().unwrap_or(0);
    let mut counts = vec![0u64; k_max + 1];
    let mut sums = vec![0.0; k_max + 1];
    for e in episodes {
        counts[e.k] += 1;
        sums[e.k] += e.mean_delivery;
    }
    let by_group_size = counts
        .iter()
        .zip(&sums)
        .enumerate()
        .filter(|(_, (&c, _))| c > 0)
        .map(|(k, (&count, &sum))| GroupSizeBin {
            k,
            count,
            probability: count as f64 / nf,
            mean_delivery: sum / count as f64,
        })
        .collect();

    MonteCarloSummary {
        mode,
        episodes: n as u64,
        seed,
        mean_delivery: mean,
        std_delivery: std,
        ci95: 1.96 * std / nf.sqrt(),
        mean_s_min: episodes.iter().map(|e| e.s_min).sum::<f64>() / nf,
        mean_s_last: episodes.iter().map(|e| e.s_last).sum::<f64>() / nf,
        by_group_size,
    }
}
