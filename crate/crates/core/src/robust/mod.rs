//! Worst-case NEE maximization under norm-bounded errors on the channels of
//! the suspicious link (`h_DS`, `h_TS`, `h_DT`, `h_RS`).
//!
//! Rates are replaced by their WMMSE variational forms, each semi-infinite
//! MSE constraint becomes an LMI through the sign-definiteness lemma, and
//! the ratio is handled by Dinkelbach iterations around a block-coordinate
//! ascent over the weights, the equalizers, the monitor combiner and the
//! beamformers.

mod ao;
mod check;
mod lmi;
mod wmmse;

pub use ao::{
    d_step, e_step, g_step, inner_ao_solve, receiver_subproblem, robust_initial_point, solve_robust, EStepMode,
    GStepGoal, InnerOutcome, InnerTrace, RobustConfig, RobustPoint, RobustSolution, RobustTrace,
};
pub use check::{
    outage_for_estimate, outage_of_design, outage_probability, outage_trial, sample_perturbation, worst_case_check, OutageEstimate,
    OutageSetup, OutageSource, WorstCaseReport,
};
pub use lmi::{build_lmis, Direction, LmiBlock};
pub use wmmse::{family_mse, mmse_equalizers, rate_split, suspicious_signal_vector, wmmse_identities, WmmseKind};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};
use crate::model::{ChannelSet, DelayMode, Dims, Instance};
use serde::{Deserialize, Serialize};

/// Norm-bounded uncertainty around the estimated suspicious-link channels.
/// The remaining channels are known exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyModel {
    pub eps_ds: f64,
    pub eps_ts: f64,
    pub eps_dt: f64,
    pub eps_rs: f64,
    pub h_ds: C64,
    pub h_ts: CVec,
    pub h_dt: CVec,
    pub h_rs: C64,
}

impl UncertaintyModel {
    pub fn new(radii: [f64; 4], est: &ChannelSet) -> Result<UncertaintyModel> {
        if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidParams(format!("uncertainty radii must be nonnegative, got {radii:?}")));
        }
        Ok(UncertaintyModel {
            eps_ds: radii[0],
            eps_ts: radii[1],
            eps_dt: radii[2],
            eps_rs: radii[3],
            h_ds: est.h_ds,
            h_ts: est.h_ts.clone(),
            h_dt: est.h_dt.clone(),
            h_rs: est.h_rs,
        })
    }

    /// Radii proportional to the estimates: `eps_X = eps ||h_X||`.
    pub fn relative(eps: f64, est: &ChannelSet) -> Result<UncertaintyModel> {
        UncertaintyModel::new([eps * est.h_ds.norm(), eps * est.h_ts.norm(), eps * est.h_dt.norm(), eps * est.h_rs.norm()], est)
    }

    pub fn exact(est: &ChannelSet) -> UncertaintyModel {
        UncertaintyModel::new([0.0; 4], est).expect("zero radii are valid")
    }

    pub fn is_exact(&self) -> bool {
        self.eps_ds == 0.0 && self.eps_ts == 0.0 && self.eps_dt == 0.0 && self.eps_rs == 0.0
    }

    /// Errors if the estimates differ from the instance's channels.
    pub fn check_against(&self, inst: &Instance) -> Result<()> {
        let ch = &inst.channels;
        let same = self.h_ds == ch.h_ds && self.h_rs == ch.h_rs && self.h_ts == ch.h_ts && self.h_dt == ch.h_dt;
        if !same {
            return Err(Error::Dimension("uncertainty estimates differ from the instance channels".into()));
        }
        Ok(())
    }

    /// True channels `h = h_hat + delta`.
    pub fn perturbed(&self, est: &ChannelSet, s: &PerturbationSample) -> ChannelSet {
        let mut ch = est.clone();
        ch.h_ds = self.h_ds + s.ds;
        ch.h_ts = &self.h_ts + &s.ts;
        ch.h_dt = &self.h_dt + &s.dt;
        ch.h_rs = self.h_rs + s.rs;
        ch
    }
}

/// One realization of the estimation errors.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSample {
    pub ds: C64,
    pub ts: CVec,
    pub dt: CVec,
    pub rs: C64,
}

impl PerturbationSample {
    pub fn zero(dims: Dims) -> PerturbationSample {
        PerturbationSample { ds: C64::new(0.0, 0.0), ts: CVec::zeros(dims.n_r), dt: CVec::zeros(dims.n_t), rs: C64::new(0.0, 0.0) }
    }

    pub fn within(&self, unc: &UncertaintyModel, tol: f64) -> bool {
        self.ds.norm() <= unc.eps_ds + tol
            && self.ts.norm() <= unc.eps_ts + tol
            && self.dt.norm() <= unc.eps_dt + tol
            && self.rs.norm() <= unc.eps_rs + tol
    }
}

/// MSE constraint families of the robust problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Secondary receiver rate.
    R,
    /// Monitor rate.
    M,
    /// Worst-case forwarded power `P_S ||G h_TS||^2 <= t_S`.
    S,
    /// Suspicious rate used in the objective.
    D,
    /// Lemma-7 part of the suspicious-rate upper bound.
    T,
    /// Lemma-6 part of the suspicious-rate upper bound.
    Dd,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::R, Family::M, Family::S, Family::D, Family::T, Family::Dd];
    /// Families carrying a WMMSE weight.
    pub const WEIGHTED: [Family; 5] = [Family::D, Family::R, Family::M, Family::T, Family::Dd];
}

/// One value per weighted family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerFamily {
    pub d: f64,
    pub r: f64,
    pub m: f64,
    pub t: f64,
    pub dd: f64,
}

impl PerFamily {
    pub fn splat(x: f64) -> PerFamily {
        PerFamily { d: x, r: x, m: x, t: x, dd: x }
    }

    pub fn get(&self, f: Family) -> f64 {
        match f {
            Family::D => self.d,
            Family::R => self.r,
            Family::M => self.m,
            Family::T => self.t,
            Family::Dd => self.dd,
            Family::S => panic!("the power family has no weight"),
        }
    }

    pub fn set(&mut self, f: Family, x: f64) {
        match f {
            Family::D => self.d = x,
            Family::R => self.r = x,
            Family::M => self.m = x,
            Family::T => self.t = x,
            Family::Dd => self.dd = x,
            Family::S => panic!("the power family has no weight"),
        }
    }
}

/// WMMSE auxiliaries: weights `E_X = sqrt(S_X)`, equalizers and MSE budgets.
#[derive(Clone, Debug, PartialEq)]
pub struct WmmseState {
    pub e: PerFamily,
    pub d_d: C64,
    pub d_r: C64,
    pub d_m: C64,
    /// Row equalizer of the Lemma-6 split, one entry per component of the
    /// interference vector at D (`N_R + 2` for NNPD, `N_R + 1` for NPD).
    pub d_vec: CVec,
    pub beta: PerFamily,
}

impl WmmseState {
    pub fn validate(&self, mode: DelayMode, n_r: usize) -> Result<()> {
        let want = d_vec_len(mode, n_r);
        if self.d_vec.len() != want {
            return Err(Error::Dimension(format!("D_d has length {}, expected {want}", self.d_vec.len())));
        }
        for f in Family::WEIGHTED {
            if !(self.e.get(f) > 0.0) || !(self.beta.get(f) >= 0.0) {
                return Err(Error::Domain(format!("weights must be positive and budgets nonnegative ({f:?})")));
            }
        }
        Ok(())
    }
}

pub fn d_vec_len(mode: DelayMode, n_r: usize) -> usize {
    match mode {
        DelayMode::Nnpd => n_r + 2,
        DelayMode::Npd => n_r + 1,
    }
}

/// Multipliers of the sign-definiteness lemma, one per perturbation
/// direction of each family. `guard_*` belong to the norm bound on the
/// second-order `dh_DT V0 G dh_TS` term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlackSet {
    pub mu_ts: f64,
    pub mu_rs: f64,
    pub sigma_ts: f64,
    pub tau_ts: f64,
    pub lambda_ds: f64,
    pub lambda_dt: f64,
    pub lambda_ts: f64,
    pub eta_dt: f64,
    pub eta_ts: f64,
    pub eta_ds: f64,
    pub nu_dt: f64,
    /// Unused for NPD.
    pub nu_ts: f64,
    pub guard_d: f64,
    pub guard_t: f64,
    pub guard_dd: f64,
}

/// Names of the multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mult {
    MuTs,
    MuRs,
    SigmaTs,
    TauTs,
    LambdaDs,
    LambdaDt,
    LambdaTs,
    EtaDt,
    EtaTs,
    EtaDs,
    NuDt,
    NuTs,
    GuardD,
    GuardT,
    GuardDd,
}

impl SlackSet {
    pub fn get(&self, m: Mult) -> f64 {
        match m {
            Mult::MuTs => self.mu_ts,
            Mult::MuRs => self.mu_rs,
            Mult::SigmaTs => self.sigma_ts,
            Mult::TauTs => self.tau_ts,
            Mult::LambdaDs => self.lambda_ds,
            Mult::LambdaDt => self.lambda_dt,
            Mult::LambdaTs => self.lambda_ts,
            Mult::EtaDt => self.eta_dt,
            Mult::EtaTs => self.eta_ts,
            Mult::EtaDs => self.eta_ds,
            Mult::NuDt => self.nu_dt,
            Mult::NuTs => self.nu_ts,
            Mult::GuardD => self.guard_d,
            Mult::GuardT => self.guard_t,
            Mult::GuardDd => self.guard_dd,
        }
    }

    pub fn set(&mut self, m: Mult, x: f64) {
        let slot = match m {
            Mult::MuTs => &mut self.mu_ts,
            Mult::MuRs => &mut self.mu_rs,
            Mult::SigmaTs => &mut self.sigma_ts,
            Mult::TauTs => &mut self.tau_ts,
            Mult::LambdaDs => &mut self.lambda_ds,
            Mult::LambdaDt => &mut self.lambda_dt,
            Mult::LambdaTs => &mut self.lambda_ts,
            Mult::EtaDt => &mut self.eta_dt,
            Mult::EtaTs => &mut self.eta_ts,
            Mult::EtaDs => &mut self.eta_ds,
            Mult::NuDt => &mut self.nu_dt,
            Mult::NuTs => &mut self.nu_ts,
            Mult::GuardD => &mut self.guard_d,
            Mult::GuardT => &mut self.guard_t,
            Mult::GuardDd => &mut self.guard_dd,
        };
        *slot = x;
    }

    pub fn all_nonneg(&self, tol: f64) -> bool {
        [
            self.mu_ts, self.mu_rs, self.sigma_ts, self.tau_ts, self.lambda_ds, self.lambda_dt, self.lambda_ts,
            self.eta_dt, self.eta_ts, self.eta_ds, self.nu_dt, self.nu_ts, self.guard_d, self.guard_t, self.guard_dd,
        ]
        .iter()
        .all(|&x| x >= -tol)
    }
}

/// Outer-loop state: the ratio parameter and the epigraph variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DinkelbachState {
    pub lambda: f64,
    pub t_d: f64,
    pub t_r: f64,
    pub t_s: f64,
    pub iota: f64,
}
