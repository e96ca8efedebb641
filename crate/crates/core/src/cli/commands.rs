use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{load_config, parse_config, parse_quantity, Quantity, DEFAULT_CONFIG};
use super::output::{create_dir, num, write_csv, write_json, Table};
use super::{BoundsArgs, Command, Common, OptimizeArgs, PlanFlags, ReproduceArgs, SimulateArgs};
use crate::bounds::{t_avg_lower, t_avg_upper, BoundsReport, GroupSizeWeights, RatePlan};
use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::optimizer::{
    optimal_rmc, optimal_ruc, optimize_setup, scan_setup_times, setup_limit, OptimizationResult,
    SetupScan,
};
use crate::simulator::{
    episode_rng, monte_carlo, run_episodes, run_setup_episode, summarize, Mode, Placement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            other => Err(Error::UnknownFigure(other.to_string())),
        }
    }
}

/// An evenly spaced, inclusive range over one plan variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub variable: &'static str,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::invalid("sweep", "bounds must be finite"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid("sweep_step", format!("must be > 0, got {}", self.step)));
        }
        if self.stop < self.start {
            return Err(Error::invalid("sweep_stop", "must not be below sweep_start"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Everything needed to rerun an experiment, recorded next to its output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub scenario: String,
    pub config_path: Option<PathBuf>,
    pub r_uc: Option<f64>,
    pub r_mc: Option<f64>,
    pub t_set: Option<u64>,
    pub sweep: Option<Sweep>,
    pub episodes: u64,
    pub seed: u64,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::invalid("episodes", "must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }
}

/// Runs one subcommand and returns the document printed on stdout.
pub fn run(command: &Command) -> Result<Value> {
    match command {
        Command::Optimize(a) => optimize(a),
        Command::Bounds(a) => bounds(a),
        Command::Simulate(a) => simulate(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

fn resolve_config(common: &Common) -> Result<SystemConfig> {
    let cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => parse_config(DEFAULT_CONFIG)?,
    };
    match common.lambda {
        Some(l) => cfg.with_arrival_rate(l),
        None => Ok(cfg),
    }
}

fn rate(key: &str, text: &str) -> Result<f64> {
    parse_quantity(key, text, Quantity::Rate)
}

fn scan_mode(full: bool) -> SetupScan {
    if full {
        SetupScan::Full
    } else {
        SetupScan::default()
    }
}

fn optimization_json(r: &OptimizationResult, cfg: &SystemConfig) -> Value {
    json!({
        "plan": r.plan,
        "objective": r.objective,
        "k_max": r.k_max,
        "iterations": r.iterations,
        "setup_limit": setup_limit(r.plan.r_uc, cfg),
        "expected_group_size": 1.0 + r.plan.t_set as f64 * cfg.arrival_rate(),
    })
}

fn optimize(a: &OptimizeArgs) -> Result<Value> {
    let cfg = resolve_config(&a.common)?;
    let r = optimize_setup(optimal_ruc(&cfg)?, &cfg, a.common.delta, scan_mode(a.full_scan))?;
    let mut doc = optimization_json(&r, &cfg);
    doc["command"] = json!("optimize");
    doc["config"] = json!(cfg);
    if let Some(out) = &a.out {
        create_dir(out)?;
        let mut t = Table::new(&["t_set", "r_mc", "t_avg_ub"]);
        for p in &r.per_t_set_trace {
            t.push(vec![p.t_set.to_string(), num(p.r_mc), num(p.t_avg_upper)]);
        }
        write_csv(out, "trace.csv", &t)?;
        write_json(&out.join("run.json"), &doc)?;
    }
    Ok(doc)
}

fn bounds(a: &BoundsArgs) -> Result<Value> {
    let cfg = resolve_config(&a.common)?;
    let plan = RatePlan::new(rate("r_uc", &a.r_uc)?, rate("r_mc", &a.r_mc)?, a.t_set, &cfg)?;
    let ks: Vec<usize> = match a.k {
        Some(k) => vec![k],
        None => (1..=GroupSizeWeights::for_plan(plan.t_set, &cfg, a.common.delta)?.k_max()).collect(),
    };
    let reports = ks
        .into_iter()
        .map(|k| BoundsReport::compute(k, &plan, &cfg, a.common.delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "command": "bounds",
        "config": cfg,
        "plan": plan,
        "reports": reports,
    }))
}

/// Plan fields that may come from a file, flags or optimization.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialPlan {
    r_uc: Option<f64>,
    r_mc: Option<f64>,
    t_set: Option<u64>,
}

fn read_plan(path: &Path) -> Result<PartialPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut v: Value = serde_json::from_str(&text)?;
    // the full `optimize` document nests the plan
    if let Some(inner) = v.get_mut("plan") {
        v = inner.take();
    }
    Ok(serde_json::from_value(v)?)
}

/// Fills whatever is missing: the unicast rate by its own optimum, the
/// set-up time (and its rate) by the joint search, the multicast rate by the
/// mixture optimum at the given set-up time.
fn resolve_plan(
    file: Option<&Path>,
    flags: &PlanFlags,
    cfg: &SystemConfig,
    delta: f64,
    scan: SetupScan,
) -> Result<(RatePlan, Option<OptimizationResult>)> {
    let mut p = match file {
        Some(path) => read_plan(path)?,
        None => PartialPlan::default(),
    };
    if let Some(s) = &flags.r_uc {
        p.r_uc = Some(rate("r_uc", s)?);
    }
    if let Some(s) = &flags.r_mc {
        p.r_mc = Some(rate("r_mc", s)?);
    }
    if flags.t_set.is_some() {
        p.t_set = flags.t_set;
    }
    let r_uc = match p.r_uc {
        Some(r) => r,
        None => optimal_ruc(cfg)?,
    };
    let (t_set, searched) = match p.t_set {
        Some(t) => (t, None),
        None => {
            let r = optimize_setup(r_uc, cfg, delta, scan)?;
            (r.plan.t_set, Some(r))
        }
    };
    let r_mc = match (p.r_mc, &searched) {
        (Some(r), _) => r,
        (None, Some(opt)) => opt.plan.r_mc,
        (None, None) => optimal_rmc(t_set, r_uc, cfg, delta)?,
    };
    Ok((RatePlan::new(r_uc, r_mc, t_set, cfg)?, searched))
}

fn simulate(a: &SimulateArgs) -> Result<Value> {
    let cfg = resolve_config(&a.common)?;
    let mode: Mode = a.mode.parse()?;
    let spec = ExperimentSpec {
        scenario: format!("simulate-{}", mode.as_str()),
        config_path: a.common.config.clone(),
        r_uc: None,
        r_mc: None,
        t_set: None,
        sweep: None,
        episodes: a.episodes,
        seed: a.seed,
        out: a.out.clone().unwrap_or_default(),
    };
    spec.validate()?;
    let (plan, _) = resolve_plan(
        a.plan.as_deref(),
        &a.plan_flags,
        &cfg,
        a.common.delta,
        SetupScan::default(),
    )?;
    let episodes = run_episodes(mode, &plan, &cfg, a.episodes, a.seed)?;
    let summary = summarize(mode, a.seed, &episodes);
    let doc = json!({
        "command": "simulate",
        "config": cfg,
        "spec": ExperimentSpec {
            r_uc: Some(plan.r_uc),
            r_mc: Some(plan.r_mc),
            t_set: Some(plan.t_set),
            ..spec
        },
        "plan": plan,
        "summary": summary,
    });
    if let Some(out) = &a.out {
        create_dir(out)?;
        let mut t = Table::new(&[
            "episode",
            "k",
            "s_min",
            "s_last",
            "setup_slots",
            "mc_slots",
            "r_mc",
            "mean_delivery",
        ]);
        for (i, e) in episodes.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                e.k.to_string(),
                num(e.s_min),
                num(e.s_last),
                e.setup_slots.to_string(),
                e.mc_slots.to_string(),
                num(e.r_mc),
                num(e.mean_delivery),
            ]);
        }
        write_csv(out, "episodes.csv", &t)?;
        let mut bins = Table::new(&["k", "count", "prob_k", "mean_delivery"]);
        for b in &summary.by_group_size {
            bins.push(vec![
                b.k.to_string(),
                b.count.to_string(),
                num(b.probability),
                num(b.mean_delivery),
            ]);
        }
        write_csv(out, "group_sizes.csv", &bins)?;
        write_json(&out.join("run.json"), &doc)?;
    }
    Ok(doc)
}

struct FigureOutput {
    result: Value,
    tables: Vec<(&'static str, Table)>,
}

fn sweep_for(a: &ReproduceArgs, variable: &'static str, q: Quantity, default: Sweep) -> Result<Sweep> {
    let get = |key: &str, v: &Option<String>, d: f64| match v {
        Some(s) => parse_quantity(key, s, q),
        None => Ok(d),
    };
    let s = Sweep {
        variable,
        start: get("sweep_start", &a.sweep_start, default.start)?,
        stop: get("sweep_stop", &a.sweep_stop, default.stop)?,
        step: get("sweep_step", &a.sweep_step, default.step)?,
    };
    s.validate()?;
    Ok(s)
}

fn lambdas(a: &ReproduceArgs, defaults: &[f64]) -> Vec<f64> {
    match a.common.lambda {
        Some(l) => vec![l],
        None => defaults.to_vec(),
    }
}

/// Mean minimum cache and mean cache of the last arrival against the
/// unicast rate, users pinned at the cell edge.
fn fig3(a: &ReproduceArgs, base: &SystemConfig, spec: &mut ExperimentSpec) -> Result<FigureOutput> {
    let sweep = sweep_for(
        a,
        "r_uc",
        Quantity::Rate,
        Sweep {
            variable: "r_uc",
            start: 10e6,
            stop: 200e6,
            step: 10e6,
        },
    )?;
    let t_set = a.plan_flags.t_set.unwrap_or(1000);
    let n = spec.episodes;
    let mut t = Table::new(&["lambda_f", "r_uc", "mean_s_min", "mean_s_last"]);
    for lambda in lambdas(a, &[0.002, 0.004]) {
        let cfg = base.with_arrival_rate(lambda)?;
        for r_uc in sweep.values() {
            let plan = RatePlan::new(r_uc, r_uc, t_set, &cfg)?;
            let caches: Vec<(f64, f64)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = episode_rng(spec.seed, i);
                    let g = run_setup_episode(
                        &mut rng,
                        &plan,
                        &cfg,
                        Placement::Fixed(cfg.coverage_radius()),
                    );
                    (g.s_min, g.last().cached_bits)
                })
                .collect();
            let (s_min, s_last) = caches
                .iter()
                .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
            t.push(vec![
                num(lambda),
                num(r_uc),
                num(s_min / n as f64),
                num(s_last / n as f64),
            ]);
        }
    }
    spec.t_set = Some(t_set);
    spec.sweep = Some(sweep);
    Ok(FigureOutput {
        result: json!({ "t_set": t_set, "points": t.rows.len() }),
        tables: vec![("fig3.csv", t)],
    })
}

/// Analytic upper and lower delivery-time curves against the multicast rate
/// with the simulated mean in between.
fn fig4(a: &ReproduceArgs, cfg: &SystemConfig, spec: &mut ExperimentSpec) -> Result<FigureOutput> {
    let sweep = sweep_for(
        a,
        "r_mc",
        Quantity::Rate,
        Sweep {
            variable: "r_mc",
            start: 50e6,
            stop: 150e6,
            step: 5e6,
        },
    )?;
    let t_set = a.plan_flags.t_set.unwrap_or(1000);
    let r_uc = match &a.plan_flags.r_uc {
        Some(s) => rate("r_uc", s)?,
        None => optimal_ruc(cfg)?,
    };
    let mut t = Table::new(&["r_mc", "t_avg_ub", "t_avg_lb", "sim_mean", "sim_ci"]);
    let mut stalled = Vec::new();
    for r_mc in sweep.values() {
        let plan = RatePlan::new(r_uc, r_mc, t_set, cfg)?;
        let (ub, _) = t_avg_upper(&plan, cfg, a.common.delta)?;
        let (lb, _) = t_avg_lower(&plan, cfg, a.common.delta)?;
        // past the rate a lone user can sustain some episodes never finish
        let (mean, ci) = match monte_carlo(Mode::Smmc, &plan, cfg, spec.episodes, spec.seed) {
            Ok(sim) => (sim.mean_delivery, sim.ci95),
            Err(Error::Episode { source, .. }) if matches!(*source, Error::Stalled { .. }) => {
                stalled.push(r_mc);
                (f64::INFINITY, f64::INFINITY)
            }
            Err(e) => return Err(e),
        };
        t.push(vec![num(r_mc), num(ub), num(lb), num(mean), num(ci)]);
    }
    let unicast = monte_carlo(
        Mode::Unicast,
        &RatePlan::new(r_uc, r_uc, 0, cfg)?,
        cfg,
        spec.episodes,
        spec.seed,
    )?;
    spec.r_uc = Some(r_uc);
    spec.t_set = Some(t_set);
    spec.sweep = Some(sweep);
    Ok(FigureOutput {
        result: json!({
            "r_uc": r_uc,
            "t_set": t_set,
            "unicast_mean": unicast.mean_delivery,
            "unicast_ci": unicast.ci95,
            "unbounded_rates": stalled,
        }),
        tables: vec![("fig4.csv", t)],
    })
}

/// Upper-bounded delivery time and best multicast rate against the set-up
/// time. Purely analytic.
fn fig5(a: &ReproduceArgs, base: &SystemConfig, spec: &mut ExperimentSpec) -> Result<FigureOutput> {
    let r_uc = match &a.plan_flags.r_uc {
        Some(s) => rate("r_uc", s)?,
        None => optimal_ruc(base)?,
    };
    let limit = setup_limit(r_uc, base);
    let sweep = sweep_for(
        a,
        "t_set",
        Quantity::Dimensionless,
        Sweep {
            variable: "t_set",
            start: 0.0,
            stop: limit as f64,
            step: 50.0,
        },
    )?;
    let t_values: Vec<u64> = sweep
        .values()
        .into_iter()
        .map(|v| v.max(0.0).round() as u64)
        .filter(|&v| v <= limit)
        .collect();
    let mut t = Table::new(&["lambda_f", "t_set", "r_mc", "t_avg_ub"]);
    let mut best = Vec::new();
    for lambda in lambdas(a, &[0.001, 0.002, 0.004]) {
        let cfg = base.with_arrival_rate(lambda)?;
        let points = scan_setup_times(&t_values, r_uc, &cfg, a.common.delta)?;
        for p in &points {
            t.push(vec![num(lambda), p.t_set.to_string(), num(p.r_mc), num(p.t_avg_upper)]);
        }
        if let Some(p) = points
            .iter()
            .min_by(|x, y| x.t_avg_upper.total_cmp(&y.t_avg_upper).then(x.t_set.cmp(&y.t_set)))
        {
            best.push(json!({ "lambda_f": lambda, "t_set": p.t_set, "r_mc": p.r_mc, "t_avg_ub": p.t_avg_upper }));
        }
    }
    spec.r_uc = Some(r_uc);
    spec.sweep = Some(sweep);
    Ok(FigureOutput {
        result: json!({ "r_uc": r_uc, "best_on_grid": best }),
        tables: vec![("fig5.csv", t)],
    })
}

/// Largest group size reported per row.
const FIG6_MAX_K: usize = 12;

/// Delivery time by realised group size for unicast, SMMC and fine-tuned
/// SMMC, with the empirical group-size distribution.
fn fig6(a: &ReproduceArgs, cfg: &SystemConfig, spec: &mut ExperimentSpec) -> Result<FigureOutput> {
    let (plan, _) = resolve_plan(None, &a.plan_flags, cfg, a.common.delta, scan_mode(a.full_scan))?;
    let (n, seed) = (spec.episodes, spec.seed);
    let smmc = summarize(Mode::Smmc, seed, &run_episodes(Mode::Smmc, &plan, cfg, n, seed)?);
    let ft = summarize(
        Mode::FineTuned,
        seed,
        &run_episodes(Mode::FineTuned, &plan, cfg, n, seed)?,
    );
    let unicast = summarize(
        Mode::Unicast,
        seed,
        &run_episodes(Mode::Unicast, &plan, cfg, n, seed)?,
    );
    let bin = |s: &crate::simulator::MonteCarloSummary, k: usize| {
        s.by_group_size.iter().find(|b| b.k == k).map(|b| (b.probability, b.mean_delivery))
    };
    let mut t = Table::new(&["k", "prob_k", "t_unicast", "t_smmc", "t_ft_smmc"]);
    for k in 1..=FIG6_MAX_K {
        let (p, t_smmc) = bin(&smmc, k).unwrap_or((0.0, f64::NAN));
        let t_ft = bin(&ft, k).map_or(f64::NAN, |b| b.1);
        // unicast users are served independently, so every bin sees the
        // same per-user distribution
        t.push(vec![
            k.to_string(),
            num(p),
            num(unicast.mean_delivery),
            num(t_smmc),
            num(t_ft),
        ]);
    }
    spec.r_uc = Some(plan.r_uc);
    spec.r_mc = Some(plan.r_mc);
    spec.t_set = Some(plan.t_set);
    Ok(FigureOutput {
        result: json!({
            "plan": plan,
            "unicast": unicast,
            "smmc": smmc,
            "ft": ft,
            "smmc_gain_over_unicast": 1.0 - smmc.mean_delivery / unicast.mean_delivery,
        }),
        tables: vec![("fig6.csv", t)],
    })
}

fn reproduce(a: &ReproduceArgs) -> Result<Value> {
    let figure: Figure = a.figure.parse()?;
    let cfg = resolve_config(&a.common)?;
    let default_episodes = match figure {
        Figure::Fig3 => 1000,
        Figure::Fig4 => 500,
        Figure::Fig5 => 1,
        Figure::Fig6 => 10_000,
    };
    let mut spec = ExperimentSpec {
        scenario: a.figure.clone(),
        config_path: a.common.config.clone(),
        r_uc: None,
        r_mc: None,
        t_set: None,
        sweep: None,
        episodes: a.episodes.unwrap_or(default_episodes),
        seed: a.seed,
        out: a.out.clone(),
    };
    spec.validate()?;
    let out = match figure {
        Figure::Fig3 => fig3(a, &cfg, &mut spec)?,
        Figure::Fig4 => fig4(a, &cfg, &mut spec)?,
        Figure::Fig5 => fig5(a, &cfg, &mut spec)?,
        Figure::Fig6 => fig6(a, &cfg, &mut spec)?,
    };
    create_dir(&a.out)?;
    let mut files = Vec::new();
    for (name, table) in &out.tables {
        files.push(write_csv(&a.out, name, table)?);
    }
    let doc = json!({
        "command": "reproduce",
        "figure": figure,
        "config": cfg,
        "spec": spec,
        "result": out.result,
        "files": files,
    });
    write_json(&a.out.join("run.json"), &doc)?;
    Ok(doc)
}
