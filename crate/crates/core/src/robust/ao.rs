//! Block-coordinate ascent for the robust NEE problem and the Dinkelbach
//! loop around it.

use super::lmi::{family_block, Sym};
use super::wmmse::mmse_equalizers;
use super::{DinkelbachState, Family, Mult, PerFamily, SlackSet, UncertaintyModel, WmmseState};
use crate::conic::{realify, solve_with, Affine, Backend, CAffine, ConeProgram, ConeSolution, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{BeamDesign, DelayMode, Instance};
use crate::pathfollow::seed_point;
use crate::vars::DesignVars;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// How the weights `E_X` are updated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EStepMode {
    /// Each LMI is homogeneous in `(E, beta, multipliers)`, so the optimal
    /// weight follows from one budget-minimizing SDP at `E = 1`.
    #[default]
    Closed,
    /// `max 2 ln E - beta` with an exponential cone per family.
    ExpCone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    /// Dinkelbach tolerance on the change of the ratio.
    pub iota: f64,
    /// Relative change of the inner objective that ends a sweep sequence.
    pub inner_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub init_max_iters: usize,
    /// Conic backend tolerance.
    pub tol: f64,
    pub seed: u64,
    /// Bounds the second-order `dh_DT V0 G dh_TS` term as an extra
    /// perturbation direction.
    pub cross_term_guard: bool,
    pub e_step: EStepMode,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            iota: 1e-3,
            inner_tol: 1e-4,
            max_inner: 50,
            max_outer: 30,
            init_max_iters: 30,
            tol: 1e-8,
            seed: 0,
            cross_term_guard: true,
            e_step: EStepMode::Closed,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_inner == 0 || self.max_outer == 0 || self.init_max_iters == 0 {
            return Err(Error::InvalidParams("iteration limits must be positive".into()));
        }
        if !(self.iota > 0.0) || !(self.inner_tol > 0.0 && self.inner_tol <= 1e-2) {
            return Err(Error::InvalidParams("stopping tolerances out of range".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            return Err(Error::InvalidParams(format!("backend tolerance {} out of range", self.tol)));
        }
        Ok(())
    }
}

/// Every block of the AO at once.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustPoint {
    pub g: CMat,
    pub v: CVec,
    pub u: CVec,
    pub state: WmmseState,
    pub slacks: SlackSet,
    /// Worst-case forwarded signal power bound.
    pub t_s: f64,
}

impl RobustPoint {
    /// Variational lower bound `2 ln E_X - beta_X + 1`; for the Lemma-7
    /// family this is minus an upper bound on `ln M_t`.
    pub fn bound(&self, fam: Family) -> f64 {
        2.0 * self.state.e.get(fam).ln() - self.state.beta.get(fam) + 1.0
    }

    /// Guaranteed worst-case margin of `R_M - R_D`.
    pub fn coupling(&self) -> f64 {
        self.bound(Family::M) + self.bound(Family::T) + self.bound(Family::Dd)
    }

    pub fn rate_margin(&self, inst: &Instance) -> f64 {
        self.bound(Family::R) - inst.params.r_th
    }

    /// Weighted worst-case rate bounds `t_D + t_R`.
    pub fn numerator(&self, inst: &Instance) -> f64 {
        inst.params.alpha_d * self.bound(Family::D) + inst.params.alpha_r * self.bound(Family::R)
    }

    /// Worst-case transmit power bound.
    pub fn power(&self, inst: &Instance) -> f64 {
        self.t_s + inst.params.sigma2_t * self.g.norm_squared() + self.v.norm_squared()
    }

    pub fn consumption(&self, inst: &Instance) -> f64 {
        self.power(inst) / inst.params.xi + inst.static_power()
    }

    /// `t_D + t_R - lambda Q`.
    pub fn objective(&self, inst: &Instance, lambda: f64) -> f64 {
        self.numerator(inst) - lambda * self.consumption(inst)
    }

    pub fn ratio(&self, inst: &Instance) -> f64 {
        self.numerator(inst) / self.consumption(inst)
    }

    pub fn design(&self) -> BeamDesign {
        BeamDesign { g: self.g.clone(), v: self.v.clone(), u: Some(self.u.clone()) }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct InnerTrace {
    /// `F` at the start and after every block update.
    pub objective: Vec<f64>,
    pub sweeps: usize,
    pub rejected_steps: usize,
}

impl InnerTrace {
    pub fn max_drop(&self) -> f64 {
        self.objective.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct InnerOutcome {
    pub point: RobustPoint,
    pub trace: InnerTrace,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RobustTrace {
    /// Ratio parameter per outer iteration, starting from zero.
    pub lambda: Vec<f64>,
    pub inner: Vec<InnerTrace>,
    pub init_iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct RobustSolution {
    pub design: BeamDesign,
    pub dinkelbach: DinkelbachState,
    pub state: WmmseState,
    pub slacks: SlackSet,
    pub point: RobustPoint,
    pub trace: RobustTrace,
}

impl RobustSolution {
    /// Worst-case NEE guaranteed by the certificate.
    pub fn nee(&self) -> f64 {
        self.dinkelbach.lambda
    }
}

struct Ctx<'a> {
    inst: &'a Instance,
    unc: &'a UncertaintyModel,
    cfg: &'a RobustConfig,
}

impl Ctx<'_> {
    fn guard(&self) -> bool {
        self.cfg.cross_term_guard
    }

    fn solve(&self, prog: &ConeProgram) -> Result<ConeSolution> {
        let s = SolverSettings { tol: self.cfg.tol, max_iter: 200, backend: Backend::Auto };
        let sol = solve_with(prog, &s)?;
        if !sol.is_optimal() {
            return Err(Error::Backend(format!("robust subproblem ended with {:?}", sol.status)));
        }
        Ok(sol)
    }

    fn sym(&self, pt: &RobustPoint) -> Sym {
        Sym::fixed(&pt.state, &pt.g, &pt.v, &pt.u)
    }
}

pub(crate) fn family_mults(fam: Family, mode: DelayMode, guard: bool) -> Vec<Mult> {
    let mut m = match fam {
        Family::R => vec![Mult::MuTs, Mult::MuRs],
        Family::M => vec![Mult::SigmaTs],
        Family::S => vec![Mult::TauTs],
        Family::D => vec![Mult::LambdaDs, Mult::LambdaDt, Mult::LambdaTs],
        Family::T => vec![Mult::EtaDt, Mult::EtaTs, Mult::EtaDs],
        Family::Dd => vec![Mult::NuDt],
    };
    let nnpd = mode == DelayMode::Nnpd;
    match fam {
        Family::D if guard => m.push(Mult::GuardD),
        Family::T if guard => m.push(Mult::GuardT),
        Family::Dd if nnpd => {
            m.push(Mult::NuTs);
            if guard {
                m.push(Mult::GuardDd);
            }
        }
        _ => {}
    }
    m
}

pub(crate) fn mult_radius(m: Mult, unc: &UncertaintyModel) -> f64 {
    match m {
        Mult::MuTs | Mult::SigmaTs | Mult::TauTs | Mult::LambdaTs | Mult::EtaTs | Mult::NuTs => unc.eps_ts,
        Mult::MuRs => unc.eps_rs,
        Mult::LambdaDs | Mult::EtaDs => unc.eps_ds,
        Mult::LambdaDt | Mult::EtaDt | Mult::NuDt => unc.eps_dt,
        Mult::GuardD | Mult::GuardT | Mult::GuardDd => unc.eps_dt * unc.eps_ts,
    }
}

/// Multiplier variables; those of zero-radius directions are fixed at zero.
struct MultVars(Vec<(Mult, Affine)>);

impl MultVars {
    fn alloc(prog: &mut ConeProgram, mults: &[Mult], unc: &UncertaintyModel) -> MultVars {
        MultVars(
            mults
                .iter()
                .map(|&m| {
                    if mult_radius(m, unc) > 0.0 {
                        let i = prog.new_var();
                        prog.add_nonneg(Affine::var(i));
                        (m, Affine::var(i))
                    } else {
                        (m, Affine::zero())
                    }
                })
                .collect(),
        )
    }

    fn get(&self, m: Mult) -> Affine {
        self.0.iter().find(|(k, _)| *k == m).map(|(_, a)| a.clone()).unwrap_or_else(Affine::zero)
    }

    fn store(&self, x: &[f64], scale: f64, s: &mut SlackSet) {
        for (m, a) in &self.0 {
            s.set(*m, (a.eval(x) * scale).max(0.0));
        }
    }
}

fn cvar(prog: &mut ConeProgram) -> CAffine {
    let i = prog.new_vars(2);
    CAffine::var(i, i + 1)
}

fn set_e(sym: &mut Sym, fam: Family, e: Affine) {
    match fam {
        Family::D => sym.e_d = e,
        Family::R => sym.e_r = e,
        Family::M => sym.e_m = e,
        Family::T => sym.e_t = e,
        Family::Dd => sym.e_dd = e,
        Family::S => {}
    }
}

/// Adds the budget variable, the family's multipliers and its LMI.
fn add_family(ctx: &Ctx, fam: Family, sym: &Sym, prog: &mut ConeProgram) -> (usize, MultVars) {
    let b = prog.new_var();
    let mv = MultVars::alloc(prog, &family_mults(fam, ctx.inst.mode(), ctx.guard()), ctx.unc);
    family_block(fam, sym, ctx.inst, ctx.unc, ctx.guard(), Affine::var(b), &|m| mv.get(m)).add_to(prog);
    (b, mv)
}

fn min_budget(ctx: &Ctx, fam: Family, sym: &Sym, mut prog: ConeProgram) -> Result<(f64, Vec<f64>, MultVars)> {
    let (b, mv) = add_family(ctx, fam, sym, &mut prog);
    prog.minimize(Affine::var(b));
    let sol = ctx.solve(&prog)?;
    Ok((sol.x[b], sol.x, mv))
}

/// Smallest certified forwarded-power bound at the current design.
fn power_step(ctx: &Ctx, pt: &RobustPoint) -> Result<RobustPoint> {
    let (t, x, mv) = min_budget(ctx, Family::S, &ctx.sym(pt), ConeProgram::new())?;
    let mut out = pt.clone();
    out.t_s = t;
    mv.store(&x, 1.0, &mut out.slacks);
    Ok(out)
}

/// Weight update for every weighted family.
pub fn e_step(inst: &Instance, unc: &UncertaintyModel, pt: &RobustPoint, cfg: &RobustConfig) -> Result<RobustPoint> {
    let ctx = Ctx { inst, unc, cfg };
    let mut out = pt.clone();
    for fam in Family::WEIGHTED {
        let mut sym = ctx.sym(pt);
        match cfg.e_step {
            EStepMode::Closed => {
                set_e(&mut sym, fam, Affine::constant(1.0));
                let (m, x, mv) = min_budget(&ctx, fam, &sym, ConeProgram::new())?;
                if !(m > 0.0) {
                    return Err(Error::Backend(format!("degenerate MSE budget {m:e} for {fam:?}")));
                }
                out.state.e.set(fam, m.powf(-0.5));
                out.state.beta.set(fam, 1.0);
                mv.store(&x, 1.0 / m, &mut out.slacks);
            }
            EStepMode::ExpCone => {
                let mut prog = ConeProgram::new();
                let e = prog.new_var();
                let s = prog.new_var();
                prog.add_exp(Affine::var(s), Affine::constant(1.0), Affine::var(e));
                set_e(&mut sym, fam, Affine::var(e));
                let (b, mv) = add_family(&ctx, fam, &sym, &mut prog);
                prog.maximize(Affine::var(s) * 2.0 - Affine::var(b));
                let sol = ctx.solve(&prog)?;
                out.state.e.set(fam, sol.x[e]);
                out.state.beta.set(fam, sol.x[b]);
                mv.store(&sol.x, 1.0, &mut out.slacks);
            }
        }
    }
    Ok(out)
}

/// Equalizer update with the weights fixed.
pub fn d_step(inst: &Instance, unc: &UncertaintyModel, pt: &RobustPoint, cfg: &RobustConfig) -> Result<RobustPoint> {
    let ctx = Ctx { inst, unc, cfg };
    let mut out = pt.clone();
    for fam in [Family::D, Family::R, Family::M, Family::Dd] {
        let mut sym = ctx.sym(pt);
        let mut prog = ConeProgram::new();
        match fam {
            Family::D => sym.d_d = cvar(&mut prog),
            Family::R => sym.d_r = cvar(&mut prog),
            Family::M => sym.d_m = cvar(&mut prog),
            _ => sym.d_vec = (0..pt.state.d_vec.len()).map(|_| cvar(&mut prog)).collect(),
        }
        let (beta, x, mv) = min_budget(&ctx, fam, &sym, prog)?;
        match fam {
            Family::D => out.state.d_d = sym.d_d.eval(&x),
            Family::R => out.state.d_r = sym.d_r.eval(&x),
            Family::M => out.state.d_m = sym.d_m.eval(&x),
            _ => out.state.d_vec = CVec::from_iterator(sym.d_vec.len(), sym.d_vec.iter().map(|d| d.eval(&x))),
        }
        out.state.beta.set(fam, beta);
        mv.store(&x, 1.0, &mut out.slacks);
    }
    Ok(out)
}

/// Monitor combiner minimizing the worst-case weighted MSE over the unit
/// ball. Returns the unit-norm combiner, the rescaled `D_M` (which leaves
/// the MSE unchanged), the budget and the multiplier.
pub fn receiver_subproblem(
    inst: &Instance,
    unc: &UncertaintyModel,
    pt: &RobustPoint,
    cfg: &RobustConfig,
) -> Result<(CVec, C64, f64, f64)> {
    let ctx = Ctx { inst, unc, cfg };
    let mut sym = ctx.sym(pt);
    let mut prog = ConeProgram::new();
    sym.u = (0..inst.dims.n_m).map(|_| cvar(&mut prog)).collect();
    prog.add_soc(Affine::constant(1.0), realify(&sym.u));
    let (beta, x, mv) = min_budget(&ctx, Family::M, &sym, prog)?;
    let u = CVec::from_iterator(sym.u.len(), sym.u.iter().map(|z| z.eval(&x)));
    let n = u.norm();
    if !(n > 1e-12) {
        return Err(Error::ZeroSignal);
    }
    let mut s = SlackSet::default();
    mv.store(&x, 1.0, &mut s);
    Ok((u / C64::from(n), pt.state.d_m * n, beta, s.sigma_ts))
}

fn u_step(ctx: &Ctx, pt: &RobustPoint) -> Result<RobustPoint> {
    let (u, d_m, beta, sigma) = receiver_subproblem(ctx.inst, ctx.unc, pt, ctx.cfg)?;
    let mut out = pt.clone();
    out.u = u;
    out.state.d_m = d_m;
    out.state.beta.m = beta;
    out.slacks.sigma_ts = sigma;
    Ok(out)
}

/// What the beamformer update maximizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GStepGoal {
    /// `t_D + t_R - lambda Q`.
    Objective { lambda: f64 },
    /// The smallest of the coupling and rate margins.
    Feasibility,
}

/// Joint update of `(G, v)`, the budgets and all multipliers. Returns the
/// new point and the optimal value.
pub fn g_step(
    inst: &Instance,
    unc: &UncertaintyModel,
    pt: &RobustPoint,
    goal: GStepGoal,
    cfg: &RobustConfig,
) -> Result<(RobustPoint, f64)> {
    let ctx = Ctx { inst, unc, cfg };
    let p = &inst.params;
    let mut prog = ConeProgram::new();
    let dv = DesignVars::alloc(&mut prog, inst.dims);
    let mut sym = ctx.sym(pt);
    sym.dv = dv.clone();
    let mut budgets = Vec::new();
    let mut mvs = Vec::new();
    for fam in Family::ALL {
        let (b, mv) = add_family(&ctx, fam, &sym, &mut prog);
        budgets.push((fam, b));
        mvs.push(mv);
    }
    let budget = |f: Family| Affine::var(budgets.iter().find(|(k, _)| *k == f).unwrap().1);
    let w = |f: Family| budget(f) * -1.0 + (2.0 * pt.state.e.get(f).ln() + 1.0);
    let mut rest: Vec<CAffine> = dv.g.iter().map(|x| x.scale_real(p.sigma2_t.sqrt())).collect();
    rest.extend(dv.v.iter().cloned());
    let rest = realify(&rest);
    // backed off by the solver tolerance so returned designs meet P_max exactly
    prog.add_sq_norm_le(rest.clone(), budget(Family::S) * -1.0 + p.p_max * (1.0 - 10.0 * cfg.tol));
    let coupling = w(Family::M) + w(Family::T) + w(Family::Dd);
    let rate = w(Family::R) - p.r_th;
    let t_idx = match goal {
        GStepGoal::Objective { lambda } => {
            prog.add_nonneg(coupling);
            prog.add_nonneg(rate);
            let gain = w(Family::D) * p.alpha_d + w(Family::R) * p.alpha_r - budget(Family::S) * (lambda / p.xi);
            prog.maximize(gain);
            if lambda > 0.0 {
                let s = (lambda / p.xi).sqrt();
                for e in rest {
                    prog.add_square(e * s);
                }
            }
            None
        }
        GStepGoal::Feasibility => {
            let t = prog.new_var();
            prog.add_le(Affine::var(t), coupling);
            prog.add_le(Affine::var(t), rate);
            prog.maximize(Affine::var(t));
            Some(t)
        }
    };
    let sol = ctx.solve(&prog)?;
    let x = &sol.x;
    let (g, v) = dv.extract(x);
    let mut out = pt.clone();
    out.g = g;
    out.v = v;
    for &(f, b) in &budgets {
        if f == Family::S {
            out.t_s = x[b];
        } else {
            out.state.beta.set(f, x[b].max(0.0));
        }
    }
    for mv in &mvs {
        mv.store(x, 1.0, &mut out.slacks);
    }
    let value = match (goal, t_idx) {
        (GStepGoal::Feasibility, Some(t)) => x[t],
        (GStepGoal::Objective { lambda }, _) => out.objective(inst, lambda),
        _ => unreachable!(),
    };
    Ok((out, value))
}

fn check_inputs(inst: &Instance, unc: &UncertaintyModel, cfg: &RobustConfig) -> Result<()> {
    cfg.validate()?;
    unc.check_against(inst)
}

/// Feasible starting point: the WMMSE blocks are built around a random
/// design, then `max t` subproblems push the coupling and rate margins
/// above zero.
pub fn robust_initial_point(inst: &Instance, unc: &UncertaintyModel, cfg: &RobustConfig) -> Result<(RobustPoint, usize)> {
    check_inputs(inst, unc, cfg)?;
    let ctx = Ctx { inst, unc, cfg };
    let sp = seed_point(inst, cfg.seed, false);
    let u = inst.optimal_receiver(&sp.g, &sp.v)?;
    let (d_d, d_r, d_m, d_vec) = mmse_equalizers(inst, &sp.g, &sp.v, &u)?;
    let state = WmmseState { e: PerFamily::splat(1.0), d_d, d_r, d_m, d_vec, beta: PerFamily::splat(0.0) };
    let mut pt = RobustPoint { g: sp.g, v: sp.v, u, state, slacks: SlackSet::default(), t_s: 0.0 };
    pt = power_step(&ctx, &pt)?;
    let mut best_t = f64::NEG_INFINITY;
    for k in 0..=cfg.init_max_iters {
        pt = e_step(inst, unc, &pt, cfg)?;
        pt = d_step(inst, unc, &pt, cfg)?;
        pt = u_step(&ctx, &pt)?;
        let t = pt.coupling().min(pt.rate_margin(inst));
        best_t = best_t.max(t);
        if t >= 0.0 && pt.power(inst) <= inst.params.p_max * (1.0 + 1e-9) {
            return Ok((pt, k));
        }
        if k == cfg.init_max_iters {
            break;
        }
        let (next, t) = g_step(inst, unc, &pt, GStepGoal::Feasibility, cfg)?;
        pt = next;
        best_t = best_t.max(t);
        if t >= 0.0 {
            return Ok((pt, k + 1));
        }
    }
    Err(Error::Infeasible { iterations: cfg.init_max_iters, best_t })
}

struct Sweep<'a> {
    inst: &'a Instance,
    lambda: f64,
    point: RobustPoint,
    f: f64,
    trace: InnerTrace,
}

impl Sweep<'_> {
    /// Keeps the candidate unless it lowers `F`; solver failures count as
    /// rejected steps.
    fn offer(&mut self, name: &str, cand: Result<RobustPoint>) -> Result<()> {
        let cand = match cand {
            Ok(c) => c,
            Err(Error::Backend(_)) => {
                self.trace.rejected_steps += 1;
                self.trace.objective.push(self.f);
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let f = cand.objective(self.inst, self.lambda);
        let scale = self.f.abs().max(1.0);
        if f < self.f - 1e-3 * scale {
            return Err(Error::NonMonotone { step: name.into(), before: self.f, after: f });
        }
        if f.is_finite() && f >= self.f - 1e-7 * scale {
            self.point = cand;
            self.f = f;
        } else {
            self.trace.rejected_steps += 1;
        }
        self.trace.objective.push(self.f);
        Ok(())
    }
}

/// Alternating updates `E -> D -> u -> (G, v)` at a fixed ratio parameter.
pub fn inner_ao_solve(
    inst: &Instance,
    unc: &UncertaintyModel,
    lambda: f64,
    start: &RobustPoint,
    cfg: &RobustConfig,
) -> Result<InnerOutcome> {
    check_inputs(inst, unc, cfg)?;
    let ctx = Ctx { inst, unc, cfg };
    let f0 = start.objective(inst, lambda);
    let mut sw = Sweep { inst, lambda, point: start.clone(), f: f0, trace: InnerTrace { objective: vec![f0], ..Default::default() } };
    for _ in 0..cfg.max_inner {
        let before = sw.f;
        let c = e_step(inst, unc, &sw.point, cfg);
        sw.offer("E", c)?;
        let c = d_step(inst, unc, &sw.point, cfg);
        sw.offer("D", c)?;
        let c = u_step(&ctx, &sw.point);
        sw.offer("u", c)?;
        let c = g_step(inst, unc, &sw.point, GStepGoal::Objective { lambda }, cfg).map(|(p, _)| p);
        sw.offer("G", c)?;
        sw.trace.sweeps += 1;
        let scale = sw.f.abs().max(sw.point.numerator(inst)).max(1e-12);
        if (sw.f - before).abs() <= cfg.inner_tol * scale {
            break;
        }
    }
    Ok(InnerOutcome { point: sw.point, trace: sw.trace })
}

/// Worst-case NEE maximization: Dinkelbach iterations from `lambda = 0`
/// around the inner AO.
pub fn solve_robust(inst: &Instance, unc: &UncertaintyModel, cfg: &RobustConfig) -> Result<RobustSolution> {
    let clock = Instant::now();
    let (mut pt, init_iterations) = robust_initial_point(inst, unc, cfg)?;
    let mut trace = RobustTrace { lambda: vec![0.0], init_iterations, ..Default::default() };
    let mut lambda = 0.0;
    for _ in 0..cfg.max_outer {
        let out = inner_ao_solve(inst, unc, lambda, &pt, cfg)?;
        pt = out.point;
        trace.inner.push(out.trace);
        let next = pt.ratio(inst);
        trace.lambda.push(next);
        let done = (next - lambda).abs() <= cfg.iota;
        lambda = next;
        if done {
            trace.converged = true;
            break;
        }
    }
    trace.wall_time_s = clock.elapsed().as_secs_f64();
    let dinkelbach = DinkelbachState {
        lambda,
        t_d: inst.params.alpha_d * pt.bound(Family::D),
        t_r: inst.params.alpha_r * pt.bound(Family::R),
        t_s: pt.t_s,
        iota: cfg.iota,
    };
    Ok(RobustSolution {
        design: pt.design(),
        dinkelbach,
        state: pt.state.clone(),
        slacks: pt.slacks,
        point: pt,
        trace,
    })
}
