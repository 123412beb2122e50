//! Sampled checks of the elementary bounds, the surrogates and the WMMSE
//! identities, shared by `lemma-check`, `selftest` and the acceptance suite.

use crate::config::DesignType;
use crate::experiment::solve_perfect;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use surveil_core::linalg::{c, row_dot, CMat, CVec};
use surveil_core::model::{DelayMode, Dims, Instance, SystemParams};
use surveil_core::pathfollow::{seed_point, SolverConfig};
use surveil_core::robust::{rate_split, wmmse_identities, WmmseKind};
use surveil_core::scenario::{cn_mat, cn_vec, generate_channels, sample_channels, sub_seed, Topology};
use surveil_core::surrogate::{build_coeffs, eval_surrogates, lemma5_bounds, lemma_bounds, ExpansionPoint, LemmaQuery};

/// Violations counted beyond this relative slack.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundTally {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest amount by which the bound was crossed (relative).
    pub worst: f64,
    /// Largest relative gap at the expansion point.
    pub tangency: f64,
}

impl BoundTally {
    fn new(name: &str) -> BoundTally {
        BoundTally { name: name.into(), worst: f64::NEG_INFINITY, ..Default::default() }
    }

    /// Records `lower <= upper`.
    fn below(&mut self, lower: f64, upper: f64) {
        let excess = (lower - upper) / upper.abs().max(lower.abs()).max(1.0);
        self.samples += 1;
        self.worst = self.worst.max(excess);
        if excess > BOUND_TOL {
            self.violations += 1;
        }
    }

    fn tangent(&mut self, a: f64, b: f64) {
        self.tangency = self.tangency.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
    }

    pub fn passed(&self, tangency_tol: f64) -> bool {
        self.samples > 0 && self.violations == 0 && self.tangency <= tangency_tol
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// The five elementary bounds on `samples` random arguments each.
pub fn lemma_check(samples: usize, seed: u64) -> Vec<BoundTally> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: Vec<BoundTally> = (1..=5).map(|k| BoundTally::new(&format!("lemma{k}"))).collect();
    for _ in 0..samples {
        let mut pos = || log_uniform(&mut rng, 1e-3, 1e3);
        let (x, y, x0, y0) = (pos(), pos(), pos(), pos());
        let (l, r) = lemma_bounds(&LemmaQuery::L1 { x, x0 }).unwrap();
        t[0].below(l, r);
        let (l, r) = lemma_bounds(&LemmaQuery::L1 { x: x0, x0 }).unwrap();
        t[0].tangent(l, r);
        let (l, r) = lemma_bounds(&LemmaQuery::L2 { x, y, x0, y0 }).unwrap();
        t[1].below(r, l);
        let (l, r) = lemma_bounds(&LemmaQuery::L2 { x: x0, y: y0, x0, y0 }).unwrap();
        t[1].tangent(l, r);
        let (l, r) = lemma_bounds(&LemmaQuery::L3 { x, y, x0, y0 }).unwrap();
        t[2].below(r, l);
        let (l, r) = lemma_bounds(&LemmaQuery::L3 { x: x0, y: y0, x0, y0 }).unwrap();
        t[2].tangent(l, r);

        let n = rng.random_range(1..6);
        let spread = log_uniform(&mut rng, 1e-2, 1e1);
        let xv = cn_vec(&mut rng, n, spread);
        let x0v = cn_vec(&mut rng, n, spread);
        let (l, r) = lemma_bounds(&LemmaQuery::L4 { x: xv.clone(), x0: x0v.clone() }).unwrap();
        t[3].below(r, l);
        let (l, r) = lemma_bounds(&LemmaQuery::L4 { x: x0v.clone(), x0: x0v.clone() }).unwrap();
        t[3].tangent(l, r);

        let hpd = |rng: &mut ChaCha8Rng| {
            let f = cn_mat(rng, n, n, spread);
            &f * f.adjoint() + CMat::identity(n, n) * c(0.05 * spread, 0.0)
        };
        let ym = hpd(&mut rng);
        let y0m = hpd(&mut rng);
        let (l, r) = lemma5_bounds(&xv, &ym, &x0v, &y0m).unwrap();
        t[4].below(r, l);
        let (l, r) = lemma5_bounds(&x0v, &y0m, &x0v, &y0m).unwrap();
        t[4].tangent(l, r);
    }
    t
}

fn instance(seed: u64, mode: DelayMode) -> Instance {
    let ch = generate_channels(&Topology::default(), Dims::default(), seed);
    Instance::new(ch, SystemParams::default().with_mode(mode)).expect("default instance")
}

fn random_point(inst: &Instance, rng: &mut ChaCha8Rng) -> ExpansionPoint {
    let d = inst.dims;
    let scale: f64 = rng.random_range(0.05..2.0);
    ExpansionPoint::new(cn_mat(rng, d.n_g(), d.n_r, scale), cn_vec(rng, d.n_t, 0.05 * scale))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SurrogateReport {
    /// One tally per surrogate: `g`, `pi`, `upsilon`, `rho`, `varsigma`.
    pub tallies: Vec<BoundTally>,
    /// Sampled designs outside the surrogate domain (a linearized
    /// denominator below its floor), which are not evaluated.
    pub outside_domain: usize,
}

/// Draws `designs` designs around a random expansion point on each of
/// `channels` channel sets (both delay modes) and checks the bound
/// directions; tangency is checked at every expansion point.
pub fn surrogate_check(designs: usize, channels: usize, seed: u64) -> SurrogateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: Vec<BoundTally> = ["g", "pi", "upsilon", "rho", "varsigma"].iter().map(|n| BoundTally::new(n)).collect();
    let mut outside = 0;
    for ch in 0..channels {
        for mode in [DelayMode::Nnpd, DelayMode::Npd] {
            let inst = instance(sub_seed(seed, ch as u64), mode);
            let pt = random_point(&inst, &mut rng);
            let Ok(co) = build_coeffs(&pt, &inst) else {
                outside += designs;
                continue;
            };
            let s = eval_surrogates(&co, &inst, &pt.g, &pt.v).unwrap();
            let e = inst.nee(&pt.g, &pt.v).unwrap();
            let r_m = inst.rate_monitor_opt(&pt.g, &pt.v).unwrap();
            for (k, (a, b)) in [(s.g, e.eta_d), (s.pi, e.eta_r), (s.upsilon, e.rate_r), (s.rho, r_m), (s.varsigma, e.rate_d)]
                .into_iter()
                .enumerate()
            {
                t[k].tangent(a, b);
            }
            for _ in 0..designs {
                let step: f64 = [0.01, 0.1, 0.5, 1.0][rng.random_range(0..4)];
                let g = &pt.g + cn_mat(&mut rng, pt.g.nrows(), pt.g.ncols(), step * step);
                let v = &pt.v + cn_vec(&mut rng, pt.v.len(), 0.01 * step * step);
                let Ok(s) = eval_surrogates(&co, &inst, &g, &v) else {
                    outside += 1;
                    continue;
                };
                let e = inst.nee(&g, &v).unwrap();
                let r_m = inst.rate_monitor_opt(&g, &v).unwrap();
                t[0].below(s.g, e.eta_d);
                t[1].below(s.pi, e.eta_r);
                t[2].below(s.upsilon, e.rate_r);
                t[3].below(s.rho, r_m);
                t[4].below(e.rate_d, s.varsigma);
            }
        }
    }
    SurrogateReport { tallies: t, outside_domain: outside }
}

/// Largest deviation between the variational forms and the closed-form
/// rates over random designs, both delay modes.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WmmseReport {
    pub instances: usize,
    pub max_rate_gap: f64,
    pub max_split_gap: f64,
}

pub fn wmmse_check(instances: usize, seed: u64) -> WmmseReport {
    let mut rep = WmmseReport::default();
    for k in 0..instances {
        for mode in [DelayMode::Nnpd, DelayMode::Npd] {
            let s = sub_seed(seed, k as u64);
            let inst = instance(s, mode);
            let p = seed_point(&inst, s, false);
            let (g, v) = (&p.g, &p.v);
            let par = &inst.params;
            let cases = [
                (
                    CVec::from_element(1, row_dot(&inst.channels.h_rt, v)),
                    CMat::from_element(1, 1, c(inst.j_r(g), 0.0)),
                    inst.rate_secondary(g, v).unwrap(),
                ),
                (inst.a_vec(g) * c(par.p_s.sqrt(), 0.0), inst.phi(g, v), inst.rate_monitor_opt(g, v).unwrap()),
            ];
            for (b, r, want) in cases {
                let (rate, var) = wmmse_identities(&WmmseKind::Lemma6 { b, r }).unwrap();
                rep.max_rate_gap = rep.max_rate_gap.max((rate - want).abs()).max((var - want).abs());
            }
            let (r1, r2) = rate_split(&inst, g, v).unwrap();
            let t = (-r1).exp();
            let (rate, var) = wmmse_identities(&WmmseKind::Lemma7 { t }).unwrap();
            rep.max_rate_gap = rep.max_rate_gap.max((rate - r1).abs()).max((var - r1).abs());
            let rd = inst.rate_suspicious(g, v).unwrap();
            rep.max_split_gap = rep.max_split_gap.max((r1 - r2 - rd).abs());
            rep.instances += 1;
        }
    }
    rep
}

/// Per-entry sample variance of the S-T link over `draws` entries,
/// returned with the path-loss value it should match.
pub fn channel_variance_check(topo: &Topology, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims::default();
    let mut sum = 0.0;
    let mut n = 0;
    while n < draws {
        let ch = sample_channels(topo, dims, &mut rng);
        for x in ch.h_ts.iter().take(draws - n) {
            sum += x.norm_sqr();
            n += 1;
        }
    }
    (sum / n as f64, topo.variance(topo.s, topo.t))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfTestItem {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick end-to-end checks of the library, a few seconds in total.
pub fn selftest(seed: u64) -> Vec<SelfTestItem> {
    let mut out = Vec::new();
    let mut push = |name, passed, detail: String| out.push(SelfTestItem { name, passed, detail });

    let lemmas = lemma_check(10_000, seed);
    let ok = lemmas.iter().all(|t| t.passed(1e-9));
    let worst = lemmas.iter().map(|t| t.worst).fold(f64::NEG_INFINITY, f64::max);
    push("elementary_bounds", ok, format!("{} samples each, worst excess {worst:.3e}", 10_000));

    let sur = surrogate_check(50, 4, seed);
    let ok = sur.tallies.iter().all(|t| t.passed(1e-8));
    let v: usize = sur.tallies.iter().map(|t| t.violations).sum();
    push("surrogate_bounds", ok, format!("{v} violations, {} outside the domain", sur.outside_domain));

    let w = wmmse_check(10, seed);
    push(
        "wmmse_identities",
        w.max_rate_gap <= 1e-9 && w.max_split_gap <= 1e-9,
        format!("rate gap {:.3e}, split gap {:.3e}", w.max_rate_gap, w.max_split_gap),
    );

    let topo = Topology::default();
    let (emp, want) = channel_variance_check(&topo, 100_000, seed);
    push("channel_variance", (emp / want - 1.0).abs() <= 0.02, format!("{emp:.4} against {want:.4}"));

    let a = generate_channels(&topo, Dims::default(), seed);
    let b = generate_channels(&topo, Dims::default(), seed);
    push("channel_determinism", a == b, String::new());

    let inst = instance(seed, DelayMode::Nnpd);
    let cfg = SolverConfig { seed, ..SolverConfig::default() };
    match solve_perfect(&inst, DesignType::Nee, &cfg, seed) {
        Ok((d, tr)) => {
            let feas = inst.check_design_feasible(&d).map(|r| r.is_feasible(1e-6)).unwrap_or(false);
            let mono = tr.objective.windows(2).all(|w| w[1] >= w[0] - 1e-6 * w[0].abs().max(1.0));
            let nee = tr.nee.last().copied().unwrap_or(f64::NAN);
            push("perfect_csi_solve", feas && mono, format!("NEE {nee:.4} after {} iterations", tr.iterations));
        }
        Err(e) => push("perfect_csi_solve", false, e.to_string()),
    }
    out
}
