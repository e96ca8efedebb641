mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smmc::bounds::{expected_min_packets_at_edge, RatePlan};
use smmc::channel::{SystemConfig, SystemParams};
use smmc::simulator::{
    episode_rng, generate_group, run_episode, run_setup_phase, run_smmc_episode, Mode, Placement,
};

use common::{
    exhaustive_min_packets, expected_last_slot, ks_uniform, mean_and_se, rel,
};

fn small_file() -> SystemConfig {
    SystemConfig::new(SystemParams {
        file_size: 4e8,
        arrival_rate: 0.01,
        ..SystemParams::reference()
    })
    .unwrap()
}

#[test]
fn exact_min_bound_matches_enumeration() {
    for eps in [0.1, 0.3, 0.5] {
        for t in 1..=10u32 {
            for k in 1..=3 {
                let exact = expected_min_packets_at_edge(k, t as u64, eps).unwrap();
                let brute = exhaustive_min_packets(k, t, eps);
                assert!(
                    rel(exact, brute) < 1e-10 || (exact - brute).abs() < 1e-300,
                    "k={k} t={t} eps={eps}: {exact} vs {brute}"
                );
            }
        }
        assert_eq!(expected_min_packets_at_edge(1, 0, eps).unwrap(), 0.0);
    }
}

#[test]
fn enumeration_is_a_distribution() {
    for r in 0..=12 {
        let pmf = common::enumerate_successes(r, 0.37);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean: f64 = pmf.iter().enumerate().map(|(c, p)| c as f64 * p).sum();
        assert!((mean - r as f64 * 0.63).abs() < 1e-12);
    }
}

#[test]
fn last_request_slot_bounds() {
    let cfg = SystemConfig::reference();
    let t_set = 1000;
    for k in [2usize, 5, 10] {
        let (lo, hi) = ((k - 1) as f64 / k as f64 * t_set as f64, (k - 1) as f64 / k as f64 * t_set as f64 + 1.0);
        let exact = expected_last_slot(k, t_set);
        assert!(lo <= exact && exact <= hi, "k={k}: {exact}");

        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                generate_group(&mut rng, k - 1, t_set, &cfg, Placement::UniformDisk)
                    .last()
                    .request_slot as f64
            })
            .collect();
        let (mean, se) = mean_and_se(&draws);
        assert!(lo - 3.0 * se <= mean && mean <= hi + 3.0 * se, "k={k}: {mean} ± {se}");
        assert!((mean - exact).abs() < 4.0 * se, "k={k}: {mean} vs {exact}");
    }
}

#[test]
fn arrival_times_uniform_given_group_size() {
    let cfg = SystemConfig::reference();
    let t_set = 100;
    let window = cfg.slot_duration() * t_set as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut xs = Vec::with_capacity(100_000);
    while xs.len() < 100_000 {
        let g = generate_group(&mut rng, 4, t_set, &cfg, Placement::UniformDisk);
        // one user per group keeps the sample independent
        let pick = xs.len() % 4 + 1;
        xs.push(g.users[pick].arrival_time / window);
    }
    let d = ks_uniform(xs);
    assert!(d < 0.01, "KS distance {d}");
}

#[test]
fn request_slots_uniform() {
    let cfg = SystemConfig::reference();
    let t_set = 100u64;
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut counts = vec![0u64; t_set as usize];
    for _ in 0..n {
        let g = generate_group(&mut rng, 1, t_set, &cfg, Placement::UniformDisk);
        counts[g.users[1].request_slot as usize - 1] += 1;
    }
    let expected = n as f64 / t_set as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99th percentile of chi-square with 99 degrees of freedom
    assert!(chi2 < 134.6416, "chi2 = {chi2}");
}

#[test]
fn edge_pinned_min_cache_matches_exact_bound() {
    let cfg = SystemConfig::reference();
    let r_uc = 81e6;
    let plan = RatePlan::new(r_uc, r_uc, 200, &cfg).unwrap();
    let eps = smmc::bounds::epsilon_max(r_uc, &cfg);
    let exact = expected_min_packets_at_edge(3, 200, eps).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| {
            let mut g = generate_group(&mut rng, 2, 200, &cfg, Placement::Fixed(cfg.coverage_radius()));
            run_setup_phase(&mut rng, &mut g, &plan, &cfg);
            g.users.iter().map(|u| u.cached_packets).min().unwrap() as f64
        })
        .collect();
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - exact).abs() < 3.0 * se, "{mean} ± {se} vs {exact}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episode_invariants(seed in any::<u64>(), t_set in 0u64..400, r_mc in 60e6..130e6f64) {
        let cfg = small_file();
        let plan = RatePlan::new(81e6, r_mc, t_set, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = run_smmc_episode(&mut rng, &plan, &cfg, false).unwrap();
        let t0 = cfg.slot_duration();
        let mc_time = t0 * e.mc_slots as f64;
        prop_assert_eq!(e.per_user_delivery.len(), e.k);
        prop_assert!(e.s_min <= e.s_last);
        prop_assert!(e.s_min <= cfg.file_size());
        prop_assert!((e.per_user_delivery[0] - (t0 * t_set as f64 + mc_time)).abs() < 1e-9);
        for d in &e.per_user_delivery {
            prop_assert!(*d >= mc_time - 1e-12);
            prop_assert!(*d <= t0 * t_set as f64 + mc_time + 1e-9);
        }
        // later requests never wait longer
        prop_assert!(e.per_user_delivery.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        // enough multicast packets to cover the rest of the file
        let covered = e.s_min + t0 * r_mc * e.mc_slots as f64;
        prop_assert!(covered >= cfg.file_size() * (1.0 - 1e-12));
    }

    #[test]
    fn setup_caches_bounded(seed in any::<u64>(), extra in 0usize..8, t_set in 1u64..300) {
        let cfg = small_file();
        let plan = RatePlan::new(81e6, 81e6, t_set, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = generate_group(&mut rng, extra, t_set, &cfg, Placement::UniformDisk);
        run_setup_phase(&mut rng, &mut g, &plan, &cfg);
        prop_assert_eq!(g.k(), extra + 1);
        for u in &g.users {
            prop_assert!(u.cached_packets <= t_set - u.request_slot);
            prop_assert_eq!(u.cached_bits, u.cached_packets as f64 * plan.unicast_packet_bits(&cfg));
        }
        let min = g.users.iter().map(|u| u.cached_bits).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(g.s_min, min);
    }

    #[test]
    fn episodes_reproducible(seed in any::<u64>(), index in 0u64..1000) {
        let cfg = small_file();
        let plan = RatePlan::new(81e6, 100e6, 100, &cfg).unwrap();
        for mode in [Mode::Smmc, Mode::FineTuned, Mode::Unicast] {
            let a = run_episode(mode, &plan, &cfg, seed, index).unwrap();
            let b = run_episode(mode, &plan, &cfg, seed, index).unwrap();
            prop_assert_eq!(a, b);
        }
        // fine-tuning changes only the multicast phase
        let mut r1 = episode_rng(seed, index);
        let mut r2 = episode_rng(seed, index);
        let plain = run_smmc_episode(&mut r1, &plan, &cfg, false).unwrap();
        let tuned = run_smmc_episode(&mut r2, &plan, &cfg, true).unwrap();
        prop_assert_eq!(plain.k, tuned.k);
        prop_assert_eq!(plain.s_min, tuned.s_min);
    }
}
