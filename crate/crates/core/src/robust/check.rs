//! Sampled certification of robust designs and outage estimation.

use super::ao::{solve_robust, RobustConfig, RobustPoint};
use super::wmmse::family_mse;
use super::{Family, PerturbationSample, UncertaintyModel};
use crate::error::Result;
use crate::linalg::{CVec, C64};
use crate::model::{BeamDesign, Dims, Instance, SystemParams};
use crate::pathfollow::{solve_nee_perfect, SolverConfig};
use crate::scenario::{cn_vec, generate_channels, sub_seed, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fraction of draws placed on the boundary of every ball.
const SPHERE_FRACTION: f64 = 0.25;

fn ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64, on_sphere: bool) -> CVec {
    if radius == 0.0 {
        return CVec::zeros(n);
    }
    let z = cn_vec(rng, n, 1.0);
    let nz = z.norm();
    if nz == 0.0 {
        return CVec::zeros(n);
    }
    let r = if on_sphere { radius } else { radius * rng.random::<f64>().powf(1.0 / (2 * n) as f64) };
    z * C64::from(r / nz)
}

/// Independent draws, each uniform on its ball (or on its sphere).
pub fn sample_perturbation<R: Rng + ?Sized>(unc: &UncertaintyModel, rng: &mut R, on_sphere: bool) -> PerturbationSample {
    PerturbationSample {
        ds: ball(rng, 1, unc.eps_ds, on_sphere)[0],
        ts: ball(rng, unc.h_ts.len(), unc.eps_ts, on_sphere),
        dt: ball(rng, unc.h_dt.len(), unc.eps_dt, on_sphere),
        rs: ball(rng, 1, unc.eps_rs, on_sphere)[0],
    }
}

/// Draws with the boundary share applied.
fn draw<R: Rng + ?Sized>(unc: &UncertaintyModel, rng: &mut R) -> PerturbationSample {
    let sphere = rng.random::<f64>() < SPHERE_FRACTION;
    sample_perturbation(unc, rng, sphere)
}

fn true_instance(inst: &Instance, unc: &UncertaintyModel, s: &PerturbationSample) -> Result<Instance> {
    inst.with_channels(unc.perturbed(&inst.channels, s))
}

fn combiner(inst: &Instance, d: &BeamDesign) -> Result<CVec> {
    match &d.u {
        Some(u) => Ok(u.clone()),
        None => inst.optimal_receiver(&d.g, &d.v),
    }
}

/// Smallest slacks over the sampled true channels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorstCaseReport {
    pub samples: usize,
    /// `R_M(u) - R_D`.
    pub min_monitor: f64,
    /// `R_R - R_th`.
    pub min_rate: f64,
    /// `P_max - P_T` (the power does not depend on the uncertain channels
    /// through anything but `h_TS`).
    pub min_power: f64,
    /// True `R_D` minus its certified lower bound (robust designs only).
    pub min_rate_d_margin: Option<f64>,
    /// Largest `E_X^2 MSE_X - beta_X` (and `P_S ||G h_TS||^2 - t_S`) per
    /// family, in `Family::ALL` order (robust designs only).
    pub max_family_excess: Option<[f64; 6]>,
    /// Samples with a monitor, rate or power slack below `-tol`.
    pub violations: usize,
    pub tol: f64,
}

impl WorstCaseReport {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / self.samples.max(1) as f64
    }

    /// Whether every sampled certificate inequality holds within `tol`.
    pub fn certified(&self, tol: f64) -> bool {
        self.max_family_excess.is_some_and(|e| e.iter().all(|&x| x <= tol))
            && self.min_rate_d_margin.is_some_and(|m| m >= -tol)
    }
}

/// Evaluates the design on `n_samples` true channel sets drawn around the
/// estimates. `cert` adds the per-family MSE certificates of a robust point.
pub fn worst_case_check(
    inst: &Instance,
    unc: &UncertaintyModel,
    design: &BeamDesign,
    cert: Option<&RobustPoint>,
    n_samples: usize,
    seed: u64,
) -> Result<WorstCaseReport> {
    unc.check_against(inst)?;
    let u = combiner(inst, design)?;
    let tol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = WorstCaseReport {
        samples: n_samples,
        min_monitor: f64::INFINITY,
        min_rate: f64::INFINITY,
        min_power: f64::INFINITY,
        min_rate_d_margin: cert.map(|_| f64::INFINITY),
        max_family_excess: cert.map(|_| [f64::NEG_INFINITY; 6]),
        violations: 0,
        tol,
    };
    for _ in 0..n_samples {
        let s = draw(unc, &mut rng);
        let ti = true_instance(inst, unc, &s)?;
        let r = ti.check_feasible(&design.g, &design.v, Some(&u))?;
        rep.min_monitor = rep.min_monitor.min(r.monitor);
        rep.min_rate = rep.min_rate.min(r.rate);
        rep.min_power = rep.min_power.min(r.power);
        if r.monitor < -tol || r.rate < -tol || r.power < -tol {
            rep.violations += 1;
        }
        if let Some(pt) = cert {
            let rd = ti.rate_suspicious(&design.g, &design.v)?;
            let m = rep.min_rate_d_margin.as_mut().unwrap();
            *m = m.min(rd - pt.bound(Family::D));
            let ex = rep.max_family_excess.as_mut().unwrap();
            for (k, &f) in Family::ALL.iter().enumerate() {
                let mse = family_mse(&ti, f, &design.g, &design.v, &u, &pt.state);
                let x = if f == Family::S { mse - pt.t_s } else { pt.state.e.get(f).powi(2) * mse - pt.state.beta.get(f) };
                ex[k] = ex[k].max(x);
            }
        }
    }
    Ok(rep)
}

/// Whether the design is in outage under the given true channels:
/// `R_R < R_th` or `R_M < R_D`.
pub fn outage_trial(true_inst: &Instance, design: &BeamDesign) -> Result<bool> {
    let u = combiner(true_inst, design)?;
    let r = true_inst.check_feasible(&design.g, &design.v, Some(&u))?;
    Ok(r.rate < 0.0 || r.monitor < 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageSource {
    /// Worst-case design on the estimates.
    Robust,
    /// Perfect-CSI design computed as if the estimates were exact.
    NonRobust,
}

/// Counts over one or more channel estimates.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub trials: usize,
    pub evaluations: usize,
    pub outages: usize,
    /// Estimates for which no design was found; all their evaluations
    /// count as outages.
    pub failed_designs: usize,
}

impl OutageEstimate {
    pub fn probability(&self) -> f64 {
        self.outages as f64 / self.evaluations.max(1) as f64
    }

    /// An estimate without a design: every evaluation is an outage.
    pub fn failed(n: usize) -> OutageEstimate {
        OutageEstimate { trials: 1, evaluations: n, outages: n, failed_designs: 1 }
    }

    pub fn merge(mut self, o: &OutageEstimate) -> OutageEstimate {
        self.trials += o.trials;
        self.evaluations += o.evaluations;
        self.outages += o.outages;
        self.failed_designs += o.failed_designs;
        self
    }
}

/// Settings shared by all trials of an outage run.
#[derive(Clone, Debug)]
pub struct OutageSetup {
    pub params: SystemParams,
    pub topology: Topology,
    pub dims: Dims,
    /// True-channel draws per estimate.
    pub perturbations: usize,
    pub robust: RobustConfig,
    pub perfect: SolverConfig,
}

/// Designs on one channel estimate (drawn with `trial_seed`) and counts
/// outages over the sampled true channels.
pub fn outage_for_estimate(setup: &OutageSetup, source: OutageSource, eps: f64, trial_seed: u64) -> Result<OutageEstimate> {
    let est = generate_channels(&setup.topology, setup.dims, trial_seed);
    let inst = Instance::new(est, setup.params.clone())?;
    let unc = UncertaintyModel::relative(eps, &inst.channels)?;
    let design = match source {
        OutageSource::Robust => {
            solve_robust(&inst, &unc, &RobustConfig { seed: trial_seed, ..setup.robust.clone() }).map(|s| s.design)
        }
        OutageSource::NonRobust => {
            solve_nee_perfect(&inst, &SolverConfig { seed: trial_seed, ..setup.perfect.clone() }).map(|(d, _)| d)
        }
    };
    match design {
        Ok(d) => outage_of_design(&inst, &unc, &d, setup.perturbations, sub_seed(trial_seed, 0x07a6e)),
        Err(_) => Ok(OutageEstimate::failed(setup.perturbations)),
    }
}

/// Outage counts of a fixed design over `n` true channel sets drawn around
/// the estimates in `inst`.
pub fn outage_of_design(
    inst: &Instance,
    unc: &UncertaintyModel,
    design: &BeamDesign,
    n: usize,
    seed: u64,
) -> Result<OutageEstimate> {
    unc.check_against(inst)?;
    let mut out = OutageEstimate { trials: 1, evaluations: n, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let s = draw(unc, &mut rng);
        let ti = true_instance(inst, unc, &s)?;
        if outage_trial(&ti, design)? {
            out.outages += 1;
        }
    }
    Ok(out)
}

/// Sequential Monte Carlo over `n_trials` estimates. Trial `i` uses
/// `sub_seed(seed, i)`, so robust and non-robust runs share estimates.
pub fn outage_probability(
    setup: &OutageSetup,
    source: OutageSource,
    eps: f64,
    n_trials: usize,
    seed: u64,
) -> Result<OutageEstimate> {
    let mut acc = OutageEstimate::default();
    for i in 0..n_trials {
        acc = acc.merge(&outage_for_estimate(setup, source, eps, sub_seed(seed, i as u64))?);
    }
    Ok(acc)
}
