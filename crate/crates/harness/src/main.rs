use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use surveil_core::linalg::{CMat, CVec, C64};
use surveil_core::model::{ChannelSet, DelayMode, Instance};
use surveil_core::robust::{solve_robust, worst_case_check, RobustConfig, UncertaintyModel};
use surveil_core::scenario::{generate_channels, sub_seed};
use surveil_harness::checks::{lemma_check, selftest, surrogate_check, wmmse_check};
use surveil_harness::experiment::{solve_perfect, status_of};
use surveil_harness::{run_experiment, trial_seed, write_outputs, DesignType, ExperimentConfig, ExperimentId};

#[derive(Parser)]
#[command(name = "surveil", version, about = "Energy-efficient proactive eavesdropping: solvers and experiments")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials (channel realizations).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Restrict to one delay mode.
    #[arg(long, global = true)]
    mode: Option<DelayMode>,
    /// Relative channel uncertainty radius.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Writes the channel realizations of each trial as JSON.
    GenChannels,
    /// Solves one realization with perfect CSI and prints a summary.
    SolvePerfect {
        #[arg(long, default_value = "nee")]
        design: DesignType,
    },
    /// Solves one realization with the worst-case design and validates it
    /// on sampled true channels.
    SolveRobust {
        /// Sampled true channels for the validation.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Runs an experiment and writes its CSV and metadata sidecar.
    Sweep { experiment: ExperimentId },
    /// Outage probability of robust and non-robust designs.
    Outage,
    /// Samples the elementary bounds, the surrogates and the WMMSE identities.
    LemmaCheck {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Quick end-to-end checks; exits nonzero on failure.
    Selftest,
}

impl Cli {
    fn base_config(&self, id: ExperimentId) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::preset(id),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        if let Some(m) = self.mode {
            c.modes = vec![m];
        }
        if let Some(e) = self.eps {
            c.grid.eps = None;
            c.uncertainty.eps = Some(e);
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn cplx(z: C64) -> Value {
    json!([z.re, z.im])
}

fn vec_json(v: &CVec) -> Value {
    Value::Array(v.iter().map(|&z| cplx(z)).collect())
}

fn mat_json(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array(m.row(i).iter().map(|&z| cplx(z)).collect())).collect())
}

fn channels_json(ch: &ChannelSet) -> Value {
    json!({
        "h_ds": cplx(ch.h_ds),
        "h_rs": cplx(ch.h_rs),
        "h_ts": vec_json(&ch.h_ts),
        "h_dt": vec_json(&ch.h_dt),
        "h_rt": vec_json(&ch.h_rt),
        "h_mt": mat_json(&ch.h_mt),
        "h_tt": mat_json(&ch.h_tt),
    })
}

fn emit(out: Option<&Path>, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn instance(cfg: &ExperimentConfig, mode: DelayMode) -> Result<(Instance, u64)> {
    let pt = cfg.grid_points()[0];
    let seed = trial_seed(cfg.seed, 0);
    let ch = generate_channels(&cfg.topology_at(&pt), cfg.dims, seed);
    Ok((Instance::new(ch, cfg.params_at(&pt, mode))?, seed))
}

fn design_json(inst: &Instance, d: &surveil_core::model::BeamDesign) -> Result<Value> {
    let b = inst.nee(&d.g, &d.v)?;
    let feas = inst.check_design_feasible(d)?;
    Ok(json!({
        "nee": b.eta, "eta_d": b.eta_d, "eta_r": b.eta_r,
        "rate_d": b.rate_d, "rate_r": b.rate_r, "power": b.power, "q": b.q,
        "min_slack": feas.min_slack(),
    }))
}

fn gen_channels(cli: &Cli) -> Result<()> {
    let cfg = cli.base_config(ExperimentId::Custom)?;
    let pt = cfg.grid_points()[0];
    let topo = cfg.topology_at(&pt);
    let trials: Vec<Value> = (0..cfg.trials)
        .map(|i| {
            let s = trial_seed(cfg.seed, i);
            json!({ "trial": i, "seed": s, "channels": channels_json(&generate_channels(&topo, cfg.dims, s)) })
        })
        .collect();
    emit(cli.out.as_deref(), &json!({ "dims": cfg.dims, "topology": topo, "trials": trials }))
}

fn solve_perfect_cmd(cli: &Cli, design: DesignType) -> Result<()> {
    let cfg = cli.base_config(ExperimentId::Custom)?;
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        let (inst, seed) = instance(&cfg, mode)?;
        let clock = Instant::now();
        let row = match solve_perfect(&inst, design, &cfg.solver, seed) {
            Ok((d, tr)) => json!({
                "mode": mode.as_str(), "status": "ok", "design": design.as_str(),
                "result": design_json(&inst, &d)?, "iterations": tr.iterations,
                "init_iterations": tr.init_iterations, "nee_trace": tr.nee,
                "wall_time_s": clock.elapsed().as_secs_f64(),
            }),
            Err(e) => json!({ "mode": mode.as_str(), "status": status_of(&e), "error": e.to_string() }),
        };
        rows.push(row);
    }
    emit(cli.out.as_deref(), &Value::Array(rows))
}

fn solve_robust_cmd(cli: &Cli, samples: usize) -> Result<()> {
    let mut cfg = cli.base_config(ExperimentId::Fig8)?;
    if cfg.uncertainty.eps.is_none() && cfg.grid.eps.is_none() {
        cfg.uncertainty.eps = Some(0.02);
    }
    let eps = cfg.grid_points()[0].eps;
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        let (inst, seed) = instance(&cfg, mode)?;
        let unc = UncertaintyModel::relative(eps, &inst.channels)?;
        let clock = Instant::now();
        let row = match solve_robust(&inst, &unc, &RobustConfig { seed, ..cfg.robust.clone() }) {
            Ok(sol) => {
                let rep = worst_case_check(&inst, &unc, &sol.design, Some(&sol.point), samples, sub_seed(seed, 0xc4ec))?;
                json!({
                    "mode": mode.as_str(), "status": if sol.trace.converged { "ok" } else { "max_outer" },
                    "eps": eps, "worst_case_nee": sol.nee(), "nominal": design_json(&inst, &sol.design)?,
                    "lambda_trace": sol.trace.lambda, "outer_iterations": sol.trace.inner.len(),
                    "validation": {
                        "samples": rep.samples, "violations": rep.violations,
                        "min_monitor_slack": rep.min_monitor, "min_rate_slack": rep.min_rate,
                        "min_power_slack": rep.min_power, "certified": rep.certified(rep.tol),
                    },
                    "wall_time_s": clock.elapsed().as_secs_f64(),
                })
            }
            Err(e) => json!({ "mode": mode.as_str(), "status": status_of(&e), "error": e.to_string() }),
        };
        rows.push(row);
    }
    emit(cli.out.as_deref(), &Value::Array(rows))
}

fn sweep(cli: &Cli, id: ExperimentId) -> Result<()> {
    let cfg = cli.base_config(id)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("results/{}.csv", cfg.experiment.as_str())));
    let clock = Instant::now();
    let records = run_experiment(&cfg)?;
    let secs = clock.elapsed().as_secs_f64();
    write_outputs(&out, &records, &cfg, secs)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    eprintln!("{} records ({failed} not ok) in {secs:.1} s -> {}", records.len(), out.display());
    Ok(())
}

fn lemma_check_cmd(cli: &Cli, samples: usize) -> Result<bool> {
    let seed = cli.seed.unwrap_or(0);
    let lemmas = lemma_check(samples, seed);
    let sur = surrogate_check(200, 50, seed);
    let w = wmmse_check(100, seed);
    let ok = lemmas.iter().all(|t| t.passed(1e-9))
        && sur.tallies.iter().all(|t| t.passed(1e-8))
        && w.max_rate_gap <= 1e-9
        && w.max_split_gap <= 1e-9;
    emit(cli.out.as_deref(), &json!({ "passed": ok, "lemmas": lemmas, "surrogates": sur, "wmmse": w }))?;
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::GenChannels => gen_channels(cli)?,
        Cmd::SolvePerfect { design } => {
            if matches!(design, DesignType::Robust | DesignType::NonRobust) {
                bail!("{} is not a perfect-CSI design", design.as_str());
            }
            solve_perfect_cmd(cli, *design)?
        }
        Cmd::SolveRobust { samples } => solve_robust_cmd(cli, *samples)?,
        Cmd::Sweep { experiment } => sweep(cli, *experiment)?,
        Cmd::Outage => sweep(cli, ExperimentId::Fig10)?,
        Cmd::LemmaCheck { samples } => return lemma_check_cmd(cli, *samples),
        Cmd::Selftest => {
            let items = selftest(cli.seed.unwrap_or(0));
            for it in &items {
                println!("{} {}  {}", if it.passed { "PASS" } else { "FAIL" }, it.name, it.detail);
            }
            return Ok(items.iter().all(|it| it.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
