//! Perfect-CSI path-following: feasible-point search, NEE maximization and
//! the weighted-sum-rate and Dinkelbach baselines.

use crate::conic::{solve_with, Backend, ConeSolution, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{BeamDesign, FeasibilityReport, Instance};
use crate::scenario::cn_mat;
use crate::surrogate::{
    build_coeffs, build_feasibility_subproblem, build_subproblem_for, ExpansionPoint, Objective, Subproblem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative change of the objective below which iterations stop.
    pub obj_tol: f64,
    pub init_max_iters: usize,
    /// Outer iterations of the Dinkelbach baseline.
    pub max_outer: usize,
    /// Conic backend tolerance.
    pub tol: f64,
    /// Halvings toward the previous iterate when a step is rejected.
    pub max_halvings: usize,
    pub seed: u64,
    /// Keeps the secondary precoder at zero (pure relaying).
    #[serde(default)]
    pub relay_only: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iters: 50, obj_tol: 1e-4, init_max_iters: 30, max_outer: 30, tol: 1e-8, max_halvings: 10, seed: 0, relay_only: false }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.init_max_iters == 0 || self.max_outer == 0 {
            return Err(Error::InvalidParams("iteration limits must be positive".into()));
        }
        if !(self.obj_tol > 0.0 && self.obj_tol <= 1e-2) {
            return Err(Error::InvalidParams(format!("obj_tol must lie in (0, 1e-2], got {}", self.obj_tol)));
        }
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            return Err(Error::InvalidParams(format!("backend tolerance {} out of range", self.tol)));
        }
        Ok(())
    }

    fn settings(&self) -> SolverSettings {
        SolverSettings { tol: self.tol, max_iter: 100, backend: Backend::Auto }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveTrace {
    /// The method's own objective after each iteration, starting with the
    /// initial point (NEE, weighted sum rate, or the Dinkelbach ratio).
    pub objective: Vec<f64>,
    /// NEE after each iteration.
    pub nee: Vec<f64>,
    pub slacks: Vec<FeasibilityReport>,
    pub iterations: usize,
    pub init_iterations: usize,
    /// Steps that needed shrinking toward the previous iterate.
    pub shrunk_steps: usize,
    pub wall_time_s: f64,
}

impl SolveTrace {
    /// Largest decrease between consecutive objective values.
    pub fn max_drop(&self) -> f64 {
        self.objective.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

fn solve_sub(sp: &Subproblem, cfg: &SolverConfig) -> Result<ConeSolution> {
    let sol = solve_with(&sp.program, &cfg.settings())?;
    if !sol.is_optimal() {
        return Err(Error::Backend(format!("subproblem ended with {:?}", sol.status)));
    }
    Ok(sol)
}

/// Constraint slacks at a design (monitor rate, secondary rate, power).
fn min_slack(r: &FeasibilityReport, p_max: f64) -> f64 {
    r.monitor.min(r.rate).min(r.power / p_max)
}

fn with_receiver(inst: &Instance, g: CMat, v: CVec) -> BeamDesign {
    let u = inst.optimal_receiver(&g, &v).ok();
    BeamDesign { g, v, u }
}

/// Starting point of the feasibility search: random `G` and `v` matched to
/// `h_RT`, each using half the power budget.
pub fn seed_point(inst: &Instance, seed: u64, relay_only: bool) -> ExpansionPoint {
    let p = &inst.params;
    let d = inst.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = cn_mat(&mut rng, d.n_g(), d.n_r, 1.0);
    let pg = p.p_s * (&g * &inst.channels.h_ts).norm_squared() + p.sigma2_t * g.norm_squared();
    let g = g * C64::from((0.5 * p.p_max / pg).sqrt());
    let h = &inst.channels.h_rt;
    let v = if relay_only {
        CVec::zeros(d.n_t)
    } else {
        h.map(|x| x.conj()) * C64::from((0.5 * p.p_max).sqrt() / h.norm())
    };
    ExpansionPoint::new(g, v)
}

/// Iterates the `max t` program until the design satisfies the monitor,
/// rate and power constraints. Returns the design and the iteration count.
pub fn find_initial_point(inst: &Instance, cfg: &SolverConfig) -> Result<(BeamDesign, usize)> {
    cfg.validate()?;
    check_relay_only(inst, cfg)?;
    let mut pt = seed_point(inst, cfg.seed, cfg.relay_only);
    let p_max = inst.params.p_max;
    let mut best_t = f64::NEG_INFINITY;
    for k in 0..=cfg.init_max_iters {
        let rep = inst.check_feasible(&pt.g, &pt.v, None)?;
        if min_slack(&rep, p_max) >= 0.0 {
            return Ok((with_receiver(inst, pt.g, pt.v), k));
        }
        if k == cfg.init_max_iters {
            break;
        }
        let co = build_coeffs(&pt, inst)?;
        let mut sp = build_feasibility_subproblem(&co, inst)?;
        if cfg.relay_only {
            sp.fix_precoder(&pt.v);
        }
        let sol = solve_sub(&sp, cfg)?;
        let t = sol.x[sp.t.expect("feasibility program has t")];
        best_t = best_t.max(t);
        let (g, v) = sp.design(&sol.x);
        pt = ExpansionPoint::new(g, v);
    }
    Err(Error::Infeasible { iterations: cfg.init_max_iters, best_t })
}

fn check_relay_only(inst: &Instance, cfg: &SolverConfig) -> Result<()> {
    if cfg.relay_only && inst.params.r_th > 0.0 {
        return Err(Error::InvalidParams("relay-only designs need r_th = 0".into()));
    }
    Ok(())
}

/// Exact value of the objective a subproblem minorizes.
fn true_objective(inst: &Instance, objective: Objective, g: &CMat, v: &CVec) -> Result<f64> {
    let e = inst.nee(g, v)?;
    let p = &inst.params;
    let wsr = p.alpha_d * e.rate_d + p.alpha_r * e.rate_r;
    Ok(match objective {
        Objective::Nee => e.eta,
        Objective::WeightedSumRate => wsr,
        Objective::Dinkelbach { lambda } => wsr - lambda * e.q,
    })
}

/// A candidate step is kept if the design stays feasible, the next
/// expansion is well defined, and the objective does not drop.
fn acceptable(inst: &Instance, objective: Objective, g: &CMat, v: &CVec, floor: f64) -> Result<Option<f64>> {
    let rep = inst.check_feasible(g, v, None)?;
    if min_slack(&rep, inst.params.p_max) < -1e-7 {
        return Ok(None);
    }
    if build_coeffs(&ExpansionPoint::new(g.clone(), v.clone()), inst).is_err() {
        return Ok(None);
    }
    let f = true_objective(inst, objective, g, v)?;
    Ok((f >= floor).then_some(f))
}

struct Inner {
    design: (CMat, CVec),
    values: Vec<f64>,
    steps: usize,
    shrunk: usize,
}

/// Successive minorant maximization from a feasible start.
fn path_follow(inst: &Instance, cfg: &SolverConfig, start: (CMat, CVec), objective: Objective, trace: &mut SolveTrace) -> Result<Inner> {
    let (mut g, mut v) = start;
    let mut f = true_objective(inst, objective, &g, &v)?;
    let mut values = vec![f];
    let mut shrunk = 0;
    let mut steps = 0;
    for _ in 0..cfg.max_iters {
        let co = build_coeffs(&ExpansionPoint::new(g.clone(), v.clone()), inst)?;
        let mut sp = build_subproblem_for(&co, inst, objective)?;
        if cfg.relay_only {
            sp.fix_precoder(&v);
        }
        let sol = solve_sub(&sp, cfg)?;
        let (gn, vn) = sp.design(&sol.x);
        let floor = f - 1e-9 * f.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = None;
        for h in 0..=cfg.max_halvings {
            let gs = &g + (&gn - &g) * C64::from(step);
            let vs = &v + (&vn - &v) * C64::from(step);
            if let Some(fs) = acceptable(inst, objective, &gs, &vs, floor)? {
                if h > 0 {
                    shrunk += 1;
                }
                accepted = Some((gs, vs, fs));
                break;
            }
            step *= 0.5;
        }
        let Some((gs, vs, fs)) = accepted else { break };
        steps += 1;
        let change = (fs - f).abs();
        g = gs;
        v = vs;
        f = fs;
        values.push(f);
        trace.nee.push(inst.nee(&g, &v)?.eta);
        trace.slacks.push(inst.check_feasible(&g, &v, None)?);
        if change <= cfg.obj_tol * f.abs().max(1e-12) {
            break;
        }
    }
    Ok(Inner { design: (g, v), values, steps, shrunk })
}

fn run(inst: &Instance, cfg: &SolverConfig, objective: Objective) -> Result<(BeamDesign, SolveTrace)> {
    let clock = Instant::now();
    let (init, k) = find_initial_point(inst, cfg)?;
    run_from(inst, cfg, objective, init, k, clock)
}

fn warm(inst: &Instance, cfg: &SolverConfig, objective: Objective, start: &BeamDesign) -> Result<(BeamDesign, SolveTrace)> {
    cfg.validate()?;
    check_relay_only(inst, cfg)?;
    let clock = Instant::now();
    let rep = inst.check_feasible(&start.g, &start.v, None)?;
    if min_slack(&rep, inst.params.p_max) < 0.0 {
        return Err(Error::Infeasible { iterations: 0, best_t: min_slack(&rep, inst.params.p_max) });
    }
    let init = with_receiver(inst, start.g.clone(), start.v.clone());
    run_from(inst, cfg, objective, init, 0, clock)
}

fn run_from(
    inst: &Instance,
    cfg: &SolverConfig,
    objective: Objective,
    init: BeamDesign,
    k: usize,
    clock: Instant,
) -> Result<(BeamDesign, SolveTrace)> {
    let mut trace = SolveTrace { init_iterations: k, ..Default::default() };
    trace.nee.push(inst.nee(&init.g, &init.v)?.eta);
    trace.slacks.push(inst.check_feasible(&init.g, &init.v, None)?);
    let inner = path_follow(inst, cfg, (init.g, init.v), objective, &mut trace)?;
    trace.objective = inner.values;
    trace.iterations = inner.steps;
    trace.shrunk_steps = inner.shrunk;
    trace.wall_time_s = clock.elapsed().as_secs_f64();
    let (g, v) = inner.design;
    Ok((with_receiver(inst, g, v), trace))
}

/// Maximizes the network energy efficiency.
pub fn solve_nee_perfect(inst: &Instance, cfg: &SolverConfig) -> Result<(BeamDesign, SolveTrace)> {
    run(inst, cfg, Objective::Nee)
}

/// NEE maximization started from a given feasible design instead of the
/// feasibility search.
pub fn solve_nee_from(inst: &Instance, cfg: &SolverConfig, start: &BeamDesign) -> Result<(BeamDesign, SolveTrace)> {
    warm(inst, cfg, Objective::Nee, start)
}

/// WSR counterpart of [`solve_nee_from`].
pub fn solve_wsr_from(inst: &Instance, cfg: &SolverConfig, start: &BeamDesign) -> Result<(BeamDesign, SolveTrace)> {
    warm(inst, cfg, Objective::WeightedSumRate, start)
}

/// Maximizes `alpha_D R_D + alpha_R R_R` under the same constraints.
pub fn solve_wsr(inst: &Instance, cfg: &SolverConfig) -> Result<(BeamDesign, SolveTrace)> {
    run(inst, cfg, Objective::WeightedSumRate)
}

/// Dinkelbach iterations on the ratio, each solved by path-following on the
/// subtractive objective. The trace objective is the ratio sequence.
pub fn solve_dinkelbach_ica(inst: &Instance, cfg: &SolverConfig) -> Result<(BeamDesign, SolveTrace)> {
    let clock = Instant::now();
    let (init, k) = find_initial_point(inst, cfg)?;
    let mut trace = SolveTrace { init_iterations: k, ..Default::default() };
    let (mut g, mut v) = (init.g, init.v);
    let mut lambda = inst.nee(&g, &v)?.eta;
    trace.objective.push(lambda);
    trace.nee.push(lambda);
    trace.slacks.push(inst.check_feasible(&g, &v, None)?);
    for _ in 0..cfg.max_outer {
        let inner = path_follow(inst, cfg, (g.clone(), v.clone()), Objective::Dinkelbach { lambda }, &mut trace)?;
        trace.iterations += inner.steps;
        trace.shrunk_steps += inner.shrunk;
        (g, v) = inner.design;
        let next = inst.nee(&g, &v)?.eta;
        let delta = next - lambda;
        lambda = next.max(lambda);
        trace.objective.push(lambda);
        if delta.abs() < cfg.obj_tol {
            break;
        }
    }
    trace.wall_time_s = clock.elapsed().as_secs_f64();
    Ok((with_receiver(inst, g, v), trace))
}
