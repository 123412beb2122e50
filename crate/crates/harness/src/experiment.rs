//! Seeded Monte Carlo sweeps over channel realizations.

use crate::config::{DesignType, ExperimentConfig, ExperimentId, GridPoint};
use crate::record::ResultRecord;
use rayon::prelude::*;
use std::collections::HashMap;
use std::time::Instant;
use surveil_core::model::{BeamDesign, DelayMode, Instance};
use surveil_core::pathfollow::{
    solve_dinkelbach_ica, solve_nee_from, solve_nee_perfect, solve_wsr, solve_wsr_from, SolveTrace, SolverConfig,
};
use surveil_core::robust::{outage_of_design, solve_robust, OutageEstimate, RobustConfig, RobustSolution, UncertaintyModel};
use surveil_core::scenario::{generate_channels, sub_seed};
use surveil_core::Error;

/// Random restarts after a numerical failure of the path-following solvers
/// or an initialization that found no feasible point.
pub const MAX_ATTEMPTS: usize = 3;

/// Channel and solver seed of trial `i`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    sub_seed(master, trial as u64)
}

pub fn status_of(e: &Error) -> String {
    match e {
        Error::Infeasible { .. } => "infeasible",
        Error::Backend(_) => "backend_failure",
        Error::SurrogateDomain(_) => "surrogate_domain",
        Error::NonMonotone { .. } => "non_monotone",
        Error::ZeroSignal => "zero_signal",
        _ => "error",
    }
    .into()
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::SurrogateDomain(_) | Error::Backend(_) | Error::NonMonotone { .. } | Error::Infeasible { .. })
}

/// Runs a perfect-CSI solver, restarting from a fresh random point when a
/// linearization leaves its domain, the backend fails or the feasibility
/// search stalls.
pub fn solve_perfect(
    inst: &Instance,
    design: DesignType,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(BeamDesign, SolveTrace), Error> {
    let mut last = None;
    for k in 0..MAX_ATTEMPTS {
        let s = if k == 0 { seed } else { sub_seed(seed, k as u64) };
        let c = SolverConfig { seed: s, ..cfg.clone() };
        let r = match design {
            DesignType::Wsr => solve_wsr(inst, &c),
            DesignType::DinkelbachIca => solve_dinkelbach_ica(inst, &c),
            _ => solve_nee_perfect(inst, &c),
        };
        match r {
            Err(e) if retryable(&e) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

fn fill_nominal(rec: &mut ResultRecord, inst: &Instance, d: &BeamDesign) {
    let Ok(b) = inst.nee(&d.g, &d.v) else {
        rec.status = "error".into();
        return;
    };
    rec.nee = Some(b.eta);
    rec.eta_d = Some(b.eta_d);
    rec.eta_r = Some(b.eta_r);
    rec.rate_d = Some(b.rate_d);
    rec.rate_r = Some(b.rate_r);
    rec.power = Some(b.power);
    rec.q = Some(b.q);
    rec.rate_m = match &d.u {
        Some(u) => inst.rate_monitor(&d.g, &d.v, u).ok(),
        None => inst.rate_monitor_opt(&d.g, &d.v).ok(),
    };
}

/// Everything a trial needs besides the grid point.
struct Trial<'a> {
    cfg: &'a ExperimentConfig,
    index: usize,
    seed: u64,
}

/// Designs that do not depend on the uncertainty radius are solved once
/// per parameter set.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    mode: DelayMode,
    design: DesignType,
    bits: [u64; 5],
}

type Perfect = Result<(BeamDesign, SolveTrace, f64), Error>;

/// Continuation along the power axis: the last solution per mode, design
/// and remaining parameters, with the budget it was solved at.
type WarmKey = (DelayMode, DesignType, [u64; 4]);

/// Starts from `start` (a design solved at a smaller budget, hence still
/// feasible) and falls back to the random-start solver if that fails.
fn solve_continued(inst: &Instance, design: DesignType, cfg: &SolverConfig, seed: u64, start: Option<&BeamDesign>) -> Result<(BeamDesign, SolveTrace), Error> {
    let warm = match (design, start) {
        (DesignType::Nee | DesignType::NonRobust, Some(s)) => Some(solve_nee_from(inst, cfg, s)),
        (DesignType::Wsr, Some(s)) => Some(solve_wsr_from(inst, cfg, s)),
        _ => None,
    };
    match warm {
        Some(Ok(r)) => Ok(r),
        _ => solve_perfect(inst, design, cfg, seed),
    }
}

impl Trial<'_> {
    fn record(&self, mode: DelayMode, design: DesignType, pt: &GridPoint) -> ResultRecord {
        ResultRecord::new(self.cfg.experiment, self.index, self.seed, mode, design, *pt)
    }

    fn instance(&self, pt: &GridPoint, mode: DelayMode) -> Result<Instance, Error> {
        let ch = generate_channels(&self.cfg.topology_at(pt), self.cfg.dims, self.seed);
        Instance::new(ch, self.cfg.params_at(pt, mode))
    }

    fn run(&self) -> Vec<ResultRecord> {
        let mut cache: HashMap<CacheKey, Perfect> = HashMap::new();
        let mut warm: HashMap<WarmKey, (f64, BeamDesign)> = HashMap::new();
        let mut out = Vec::new();
        for pt in self.cfg.grid_points() {
            for &mode in &self.cfg.modes {
                let inst = match self.instance(&pt, mode) {
                    Ok(i) => i,
                    Err(e) => {
                        for d in self.cfg.designs() {
                            let mut r = self.record(mode, d, &pt);
                            r.status = status_of(&e);
                            out.push(r);
                        }
                        continue;
                    }
                };
                for design in self.cfg.designs() {
                    match design {
                        DesignType::Robust => out.extend(self.robust(&inst, &pt, mode)),
                        _ => {
                            let key = CacheKey {
                                mode,
                                design,
                                bits: [pt.p_max, pt.r_th, pt.alpha_d, pt.d_t, pt.d_m].map(f64::to_bits),
                            };
                            let wkey = (mode, design, [pt.r_th, pt.alpha_d, pt.d_t, pt.d_m].map(f64::to_bits));
                            let start = warm.get(&wkey).filter(|(p, _)| *p < pt.p_max).map(|(_, d)| d);
                            let solved = cache
                                .entry(key)
                                .or_insert_with(|| {
                                    let clock = Instant::now();
                                    solve_continued(&inst, design, &self.cfg.solver, self.seed, start)
                                        .map(|(d, t)| (d, t, clock.elapsed().as_secs_f64()))
                                })
                                .clone();
                            if let Ok((d, _, _)) = &solved {
                                if warm.get(&wkey).is_none_or(|(p, _)| *p < pt.p_max) {
                                    warm.insert(wkey, (pt.p_max, d.clone()));
                                }
                            }
                            out.extend(self.perfect(&inst, &pt, mode, design, solved));
                        }
                    }
                }
            }
        }
        out
    }

    fn outage(&self, inst: &Instance, pt: &GridPoint, d: Option<&BeamDesign>) -> Result<OutageEstimate, Error> {
        let n = self.cfg.perturbations();
        match d {
            None => Ok(OutageEstimate::failed(n)),
            Some(d) => {
                let unc = UncertaintyModel::relative(pt.eps, &inst.channels)?;
                outage_of_design(inst, &unc, d, n, sub_seed(self.seed, 0x07a6e))
            }
        }
    }

    fn wants_outage(&self) -> bool {
        self.cfg.experiment == ExperimentId::Fig10
    }

    fn perfect(&self, inst: &Instance, pt: &GridPoint, mode: DelayMode, design: DesignType, solved: Perfect) -> Vec<ResultRecord> {
        let mut rec = self.record(mode, design, pt);
        let (d, trace) = match solved {
            Ok((d, trace, secs)) => {
                rec.wall_time_s = secs;
                (Some(d), Some(trace))
            }
            Err(e) => {
                rec.status = status_of(&e);
                (None, None)
            }
        };
        if let (Some(d), Some(tr)) = (&d, &trace) {
            fill_nominal(&mut rec, inst, d);
            rec.objective = tr.objective.last().copied();
            rec.iterations = Some(tr.iterations);
        }
        if self.wants_outage() {
            match self.outage(inst, pt, d.as_ref()) {
                Ok(o) => {
                    rec.outage = Some(o.probability());
                    rec.outage_evaluations = Some(o.evaluations);
                }
                Err(e) => rec.status = status_of(&e),
            }
        }
        let mut out = Vec::new();
        if self.cfg.experiment == ExperimentId::Fig3 {
            if let Some(tr) = &trace {
                for (k, (&obj, &nee)) in tr.objective.iter().zip(&tr.nee).enumerate() {
                    let mut r = self.record(mode, design, pt);
                    r.stage = Some("path");
                    r.iteration = Some(k);
                    r.objective = Some(obj);
                    r.nee = Some(nee);
                    out.push(r);
                }
            }
        }
        out.push(rec);
        out
    }

    fn robust(&self, inst: &Instance, pt: &GridPoint, mode: DelayMode) -> Vec<ResultRecord> {
        let mut rec = self.record(mode, DesignType::Robust, pt);
        let clock = Instant::now();
        let sol: Result<RobustSolution, Error> = UncertaintyModel::relative(pt.eps, &inst.channels)
            .and_then(|unc| solve_robust(inst, &unc, &RobustConfig { seed: self.seed, ..self.cfg.robust.clone() }));
        rec.wall_time_s = clock.elapsed().as_secs_f64();
        let mut out = Vec::new();
        match &sol {
            Ok(s) => {
                fill_nominal(&mut rec, inst, &s.design);
                rec.worst_case_nee = Some(s.nee());
                rec.lambda = Some(s.nee());
                rec.iterations = Some(s.trace.inner.len());
                if !s.trace.converged {
                    rec.status = "max_outer".into();
                }
                if self.cfg.experiment == ExperimentId::Fig8 {
                    for (q, &lam) in s.trace.lambda.iter().enumerate() {
                        let mut r = self.record(mode, DesignType::Robust, pt);
                        r.stage = Some("outer");
                        r.iteration = Some(q);
                        r.lambda = Some(lam);
                        out.push(r);
                    }
                    for (q, tr) in s.trace.inner.iter().enumerate() {
                        // F at the end of every sweep of the four block steps
                        for (k, &f) in tr.objective.iter().step_by(4).enumerate() {
                            let mut r = self.record(mode, DesignType::Robust, pt);
                            r.stage = Some("inner");
                            r.iteration = Some(k);
                            r.lambda = Some(s.trace.lambda[q]);
                            r.objective = Some(f);
                            out.push(r);
                        }
                    }
                }
            }
            Err(e) => rec.status = status_of(e),
        }
        if self.wants_outage() {
            match self.outage(inst, pt, sol.as_ref().ok().map(|s| &s.design)) {
                Ok(o) => {
                    rec.outage = Some(o.probability());
                    rec.outage_evaluations = Some(o.evaluations);
                }
                Err(e) => rec.status = status_of(&e),
            }
        }
        out.push(rec);
        out
    }
}

/// One record per grid point, trial, delay mode and design (plus trace
/// records for the convergence experiments). Trials run in parallel;
/// the output order is fixed.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let per_trial: Vec<Vec<ResultRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| Trial { cfg, index: i, seed: trial_seed(cfg.seed, i) }.run())
        .collect();
    Ok(per_trial.into_iter().flatten().collect())
}

/// Records of a single trial; identical to the matching slice of
/// `run_experiment`.
pub fn run_trial(cfg: &ExperimentConfig, index: usize) -> Vec<ResultRecord> {
    Trial { cfg, index, seed: trial_seed(cfg.seed, index) }.run()
}
